//! Identification from extended summary graphs.

use crate::dag::Backdoor;
use crate::error::{Error, Result};
use crate::graph::{Escg, Ftcg, TimedVertex, MAX_GAMMA_MAX};
use crate::query::{AdjustmentSet, NamedSet, Query, Verdict};
use crate::window::{unroll, Window};

fn check_series(e: &Escg, q: &Query) -> Result<()> {
    e.index_of(q.x.as_str())?;
    e.index_of(q.y.as_str())?;
    Ok(())
}

/// Always identifiable: either trivially, or by adjusting for every
/// possible parent of the treatment.
pub fn identify_escg(e: &Escg, q: &Query) -> Result<Verdict> {
    check_series(e, q)?;
    let scg = e.to_scg();
    if !scg.ancestors(q.y.as_str())?.contains(&q.x) {
        return Ok(Verdict::Trivial);
    }
    let inst = e.instantaneous_parents(q.x.as_str())?;
    // With gamma = 0 and Y(t) -> X(t), X(t) cannot reach Y(t) in any
    // candidate, and the set below would contain the response itself.
    if q.gamma == 0 && inst.contains(&q.y) {
        return Ok(Verdict::Trivial);
    }
    Ok(Verdict::Adjustment(vec![NamedSet {
        name: "B",
        set: b_gamma(e, q)?,
    }]))
}

/// The closed-form set, regardless of the trivial case.
pub fn b_gamma(e: &Escg, q: &Query) -> Result<AdjustmentSet> {
    check_series(e, q)?;
    let g = q.gamma as i64;
    let mut set = Vec::new();
    for z in e.lagged_parents(q.x.as_str())? {
        for l in 1..=q.gamma_max as i64 {
            set.push(TimedVertex::new(z.clone(), -g - l));
        }
    }
    for z in e.instantaneous_parents(q.x.as_str())? {
        set.push(TimedVertex::new(z, -g));
    }
    Ok(AdjustmentSet::new(set))
}

/// The candidate holding every lag the abstraction allows.
pub fn densest_ftcg(e: &Escg, gamma_max: u32) -> Result<Ftcg> {
    if gamma_max == 0 || gamma_max > MAX_GAMMA_MAX {
        return Err(Error::InvalidQuery(format!(
            "gamma_max must lie in 1..={MAX_GAMMA_MAX}"
        )));
    }
    let n = e.len();
    let lagged: u64 = ((1u64 << (gamma_max + 1)) - 1) & !1;
    let mut masks = vec![0u64; n * n];
    for i in 0..n {
        for j in 0..n {
            if e.lagged_idx(i, j) {
                masks[i * n + j] |= lagged;
            }
            if e.inst_idx(i, j) {
                masks[i * n + j] |= 1;
            }
        }
    }
    Ftcg::from_masks(e.series().to_vec(), gamma_max, masks)
}

/// Standard backdoor criterion on one full-time graph, unrolled on `window`.
pub fn check_backdoor_standard(
    f: &Ftcg,
    q: &Query,
    z: &AdjustmentSet,
    window: &Window,
) -> Result<Backdoor<TimedVertex>> {
    f.index_of(q.x.as_str())?;
    f.index_of(q.y.as_str())?;
    z.validate_for(q)?;
    if !window.contains_time(-(q.gamma as i64)) {
        return Err(Error::InvalidWindow(format!(
            "window {window} does not contain the treatment time"
        )));
    }
    if let Some(v) = z.iter().find(|v| !window.contains_time(v.time)) {
        return Err(Error::InvalidWindow(format!(
            "window {window} does not contain {v}"
        )));
    }
    for v in z.iter() {
        f.index_of(v.series.as_str())?;
    }
    let dag = unroll(f, window);
    dag.backdoor(&q.treatment(), &q.response(), z.members())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SeriesId;

    fn ge1() -> Escg {
        Escg::from_names(
            &["X", "Y", "Z"],
            &[("X", "Y"), ("X", "X"), ("Z", "Z"), ("Z", "X"), ("X", "Z")],
            &[("Z", "X"), ("X", "Y")],
        )
        .unwrap()
    }

    fn ge3() -> Escg {
        Escg::from_names(
            &["X", "Y", "Z"],
            &[("X", "Y"), ("X", "X"), ("Z", "Z"), ("Z", "X")],
            &[("X", "Z")],
        )
        .unwrap()
    }

    fn tv(s: &str, t: i64) -> TimedVertex {
        TimedVertex::at(s, t)
    }

    #[test]
    fn b_gamma_on_first_escg() {
        let q = Query::from_names("X", "Y", 1, 2).unwrap();
        let v = identify_escg(&ge1(), &q).unwrap();
        let expected = AdjustmentSet::new([
            tv("X", -2),
            tv("X", -3),
            tv("Z", -2),
            tv("Z", -3),
            tv("Z", -1),
        ]);
        assert_eq!(v.set("B"), Some(&expected));
    }

    #[test]
    fn parentless_treatment_gives_empty_set() {
        let e = Escg::from_names(&["X", "Y"], &[("X", "Y")], &[]).unwrap();
        for gamma in 0..3 {
            let q = Query::from_names("X", "Y", gamma, 2).unwrap();
            assert_eq!(identify_escg(&e, &q).unwrap().set("B"), Some(&AdjustmentSet::default()));
        }
    }

    #[test]
    fn non_ancestor_is_trivial() {
        let e = Escg::from_names(&["X", "Y"], &[("Y", "Y")], &[]).unwrap();
        let q = Query::from_names("X", "Y", 1, 1).unwrap();
        assert_eq!(identify_escg(&e, &q).unwrap(), Verdict::Trivial);
    }

    #[test]
    fn response_as_instantaneous_parent_at_lag_zero() {
        let e = Escg::from_names(&["X", "Y"], &[("X", "Y")], &[("Y", "X")]).unwrap();
        let q = Query::from_names("X", "Y", 0, 1).unwrap();
        assert_eq!(identify_escg(&e, &q).unwrap(), Verdict::Trivial);
        let q1 = Query::from_names("X", "Y", 1, 1).unwrap();
        assert!(identify_escg(&e, &q1).unwrap().set("B").is_some());
    }

    #[test]
    fn densest_of_third_escg() {
        let f = densest_ftcg(&ge3(), 2).unwrap();
        let lags = |a: &str, b: &str| f.lags(a, b).unwrap().into_iter().collect::<Vec<_>>();
        assert_eq!(lags("X", "X"), vec![1, 2]);
        assert_eq!(lags("Z", "Z"), vec![1, 2]);
        assert_eq!(lags("Z", "X"), vec![1, 2]);
        assert_eq!(lags("X", "Z"), vec![0]);
        assert_eq!(lags("X", "Y"), vec![1, 2]);
        assert_eq!(f.lag_pattern().len(), 5);
        assert_eq!(f.to_escg(), ge3());
    }

    #[test]
    fn densest_of_edgeless_escg() {
        let e = Escg::from_names(&["X", "Y"], &[], &[]).unwrap();
        assert!(densest_ftcg(&e, 3).unwrap().lag_pattern().is_empty());
    }

    #[test]
    fn standard_backdoor_checks() {
        let q = Query::from_names("X", "Y", 1, 2).unwrap();
        let f = densest_ftcg(&ge1(), 2).unwrap();
        let w = Window::default_for(1, 2);
        let b = b_gamma(&ge1(), &q).unwrap();
        assert!(check_backdoor_standard(&f, &q, &b, &w).unwrap().is_valid());

        let y1 = AdjustmentSet::new([tv("Y", -1)]);
        assert!(f.lags("X", "Y").unwrap().contains(&0));
        assert_eq!(
            check_backdoor_standard(&f, &q, &y1, &w).unwrap(),
            Backdoor::Descendant(tv("Y", -1))
        );

        let plain = Ftcg::from_names(&["X", "Y"], 1, &[("X", "Y", 1)]).unwrap();
        let q1 = Query::from_names("X", "Y", 1, 1).unwrap();
        let w1 = Window::default_for(1, 1);
        assert!(check_backdoor_standard(&plain, &q1, &AdjustmentSet::default(), &w1)
            .unwrap()
            .is_valid());
    }

    #[test]
    fn window_must_hold_the_set() {
        let q = Query::from_names("X", "Y", 1, 2).unwrap();
        let f = densest_ftcg(&ge1(), 2).unwrap();
        let b = b_gamma(&ge1(), &q).unwrap();
        let small = Window::new(-2, 0).unwrap();
        assert!(matches!(
            check_backdoor_standard(&f, &q, &b, &small),
            Err(Error::InvalidWindow(_))
        ));
        let ghost = AdjustmentSet::new([TimedVertex::new(SeriesId::new("Q").unwrap(), -2)]);
        assert!(check_backdoor_standard(&f, &q, &ghost, &Window::default_for(1, 2)).is_err());
    }
}
