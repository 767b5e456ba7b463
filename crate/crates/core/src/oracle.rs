//! Brute-force ground truth over every candidate full-time graph of an
//! abstraction, evaluated on a finite window.
//!
//! The window is a truncation of an infinite graph. Paths leaving it are not
//! seen, so a pass is only certified for the window that was used; reports
//! always carry it.

use std::collections::BTreeSet;

use rand::Rng;

use crate::bits::{self, BitDag};
use crate::dag::{Backdoor, Dag};
use crate::error::{Error, Result};
use crate::graph::{lag_zero_acyclic, Cycle, Escg, Ftcg, Scg, SeriesId, TimedVertex, MAX_GAMMA_MAX};
use crate::path::{Mark, MarkedPath};
use crate::query::{AdjustmentSet, Query};
use crate::window::{unroll_into, Window};

pub const DEFAULT_CANDIDATE_CAP: u64 = 1_000_000;
pub const DEFAULT_SUBSET_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    pub candidates: u64,
    pub subsets: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            candidates: DEFAULT_CANDIDATE_CAP,
            subsets: DEFAULT_SUBSET_CAP,
        }
    }
}

/// A summary or extended summary graph whose candidates are enumerated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Abstraction {
    Scg(Scg),
    Escg(Escg),
}

impl Abstraction {
    pub fn series(&self) -> &[SeriesId] {
        match self {
            Abstraction::Scg(g) => g.nodes(),
            Abstraction::Escg(e) => e.series(),
        }
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        match self {
            Abstraction::Scg(g) => g.index_of(name),
            Abstraction::Escg(e) => e.index_of(name),
        }
    }
}

/// One free lag-set choice: the pair it belongs to and its options as masks.
#[derive(Clone, Debug)]
struct Slot {
    cell: usize,
    options: Vec<u64>,
}

/// Nonempty subsets of `{lo..=hi}` as masks, in increasing numeric order.
fn subsets(lo: u32, hi: u32) -> Vec<u64> {
    let full: u64 = ((1u64 << (hi + 1)) - 1) & !((1u64 << lo) - 1);
    (1..=full).filter(|m| m & !full == 0).collect()
}

/// The candidates of an abstraction, enumerated lazily in lexicographic
/// order of the per-pair lag-set choices (pairs in row-major order, lag sets
/// by increasing mask).
#[derive(Clone, Debug)]
pub struct CandidateSet {
    series: Vec<SeriesId>,
    gamma_max: u32,
    fixed: Vec<u64>,
    slots: Vec<Slot>,
    needs_acyclic_check: bool,
    cap: u64,
}

impl CandidateSet {
    pub fn new(a: &Abstraction, gamma_max: u32, cap: u64) -> Result<Self> {
        if gamma_max == 0 || gamma_max > MAX_GAMMA_MAX {
            return Err(Error::InvalidQuery(format!(
                "gamma_max must lie in 1..={MAX_GAMMA_MAX}"
            )));
        }
        let series = a.series().to_vec();
        let n = series.len();
        let mut fixed = vec![0u64; n * n];
        let mut slots = Vec::new();
        let mut needs_acyclic_check = false;
        match a {
            Abstraction::Scg(g) => {
                for (i, j) in g.edge_indices() {
                    let lo = if i == j { 1 } else { 0 };
                    slots.push(Slot {
                        cell: i * n + j,
                        options: subsets(lo, gamma_max),
                    });
                    if i != j {
                        needs_acyclic_check = true;
                    }
                }
            }
            Abstraction::Escg(e) => {
                for i in 0..n {
                    for j in 0..n {
                        let inst = if e.inst_idx(i, j) { 1 } else { 0 };
                        if e.lagged_idx(i, j) {
                            slots.push(Slot {
                                cell: i * n + j,
                                options: subsets(1, gamma_max).into_iter().map(|m| m | inst).collect(),
                            });
                        } else {
                            fixed[i * n + j] = inst;
                        }
                    }
                }
            }
        }
        Ok(CandidateSet {
            series,
            gamma_max,
            fixed,
            slots,
            needs_acyclic_check,
            cap,
        })
    }

    pub fn series(&self) -> &[SeriesId] {
        &self.series
    }

    pub fn gamma_max(&self) -> u32 {
        self.gamma_max
    }

    /// Size of the product of lag-set choices, before dropping candidates
    /// with instantaneous cycles.
    pub fn raw_count(&self) -> u128 {
        self.slots
            .iter()
            .map(|s| s.options.len() as u128)
            .product()
    }

    /// Streams lag masks (`n * n`, row-major) of every candidate in order.
    /// `visit` returns false to stop early. Returns the number visited.
    pub fn for_each_masks(&self, mut visit: impl FnMut(&[u64]) -> bool) -> Result<u64> {
        let n = self.series.len();
        let mut masks = self.fixed.clone();
        let mut digits = vec![0usize; self.slots.len()];
        for s in &self.slots {
            masks[s.cell] = s.options[0];
        }
        let mut seen = 0u64;
        loop {
            if !self.needs_acyclic_check || lag_zero_acyclic(n, &masks) {
                seen += 1;
                if seen > self.cap {
                    return Err(Error::CapExceeded {
                        what: "candidate enumeration",
                        cap: self.cap,
                        count: self.raw_count(),
                    });
                }
                if !visit(&masks) {
                    return Ok(seen);
                }
            }
            // Odometer: the last slot turns fastest.
            let mut k = self.slots.len();
            loop {
                if k == 0 {
                    return Ok(seen);
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < self.slots[k].options.len() {
                    masks[self.slots[k].cell] = self.slots[k].options[digits[k]];
                    break;
                }
                digits[k] = 0;
                masks[self.slots[k].cell] = self.slots[k].options[0];
            }
        }
    }

    pub(crate) fn to_ftcg(&self, masks: &[u64]) -> Ftcg {
        Ftcg::from_masks(self.series.clone(), self.gamma_max, masks.to_vec())
            .expect("enumerated candidates are valid")
    }

    /// Every candidate as an [`Ftcg`]; mind the cap.
    pub fn collect(&self) -> Result<Vec<Ftcg>> {
        let mut out = Vec::new();
        self.for_each_masks(|m| {
            out.push(self.to_ftcg(m));
            true
        })?;
        Ok(out)
    }

    pub fn count(&self) -> Result<u64> {
        self.for_each_masks(|_| true)
    }

    /// A uniformly drawn lag-set choice, redrawn while it has an
    /// instantaneous cycle.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Ftcg> {
        let n = self.series.len();
        for _ in 0..100_000 {
            let mut masks = self.fixed.clone();
            for s in &self.slots {
                masks[s.cell] = s.options[rng.random_range(0..s.options.len())];
            }
            if lag_zero_acyclic(n, &masks) {
                return Ok(self.to_ftcg(&masks));
            }
        }
        Err(Error::InvalidGraph("no acyclic candidate drawn".into()))
    }
}

pub fn enumerate_candidates(a: &Abstraction, gamma_max: u32, cap: u64) -> Result<CandidateSet> {
    CandidateSet::new(a, gamma_max, cap)
}

/// A failing candidate for one adjustment set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    /// Position of the candidate in enumeration order.
    pub index: u64,
    pub candidate: Ftcg,
    pub violation: Backdoor<TimedVertex>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetCheck {
    pub set: AdjustmentSet,
    pub counterexample: Option<Counterexample>,
}

impl SetCheck {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// One query with the sets to verify for it.
#[derive(Clone, Debug)]
pub struct Check {
    pub query: Query,
    pub window: Window,
    pub sets: Vec<AdjustmentSet>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub candidates: u64,
    pub window: Window,
    pub results: Vec<SetCheck>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(SetCheck::passed)
    }
}

/// Per-check state precomputed on the window.
struct Prepared {
    window: Window,
    x: usize,
    y: usize,
    sets: Vec<Vec<u64>>,
    labels: Vec<TimedVertex>,
}

fn window_labels(series: &[SeriesId], w: &Window) -> Vec<TimedVertex> {
    let mut labels = Vec::with_capacity(series.len() * w.slices());
    for time in w.t_min..=w.t_max {
        for s in series {
            labels.push(TimedVertex::new(s.clone(), time));
        }
    }
    labels
}

fn prepare(a: &Abstraction, c: &Check) -> Result<Prepared> {
    let n = a.series().len();
    let q = &c.query;
    let w = c.window;
    let xs = a.index_of(q.x.as_str())?;
    let ys = a.index_of(q.y.as_str())?;
    if !w.contains_time(-(q.gamma as i64)) {
        return Err(Error::InvalidWindow(format!(
            "window {w} does not contain the treatment time"
        )));
    }
    let words = bits::words_for(n * w.slices());
    let mut sets = Vec::new();
    for z in &c.sets {
        z.validate_for(q)?;
        let mut b = vec![0u64; words];
        for v in z.iter() {
            if !w.contains_time(v.time) {
                return Err(Error::InvalidWindow(format!("window {w} does not contain {v}")));
            }
            bits::set(&mut b, w.index(n, a.index_of(v.series.as_str())?, v.time));
        }
        sets.push(b);
    }
    Ok(Prepared {
        window: w,
        x: w.index(n, xs, -(q.gamma as i64)),
        y: w.index(n, ys, 0),
        sets,
        labels: window_labels(a.series(), &w),
    })
}

/// Verifies several queries and sets in one pass over the candidates. The
/// first counterexample in enumeration order is kept for each set. The
/// returned count covers the candidates visited, which stops short of the
/// total once every set has failed.
pub fn check_all(a: &Abstraction, gamma_max: u32, checks: &[Check], cap: u64) -> Result<(u64, Vec<Vec<SetCheck>>)> {
    let cands = CandidateSet::new(a, gamma_max, cap)?;
    let n = a.series().len();
    let prepared: Vec<Prepared> = checks.iter().map(|c| prepare(a, c)).collect::<Result<_>>()?;
    let mut results: Vec<Vec<SetCheck>> = checks
        .iter()
        .map(|c| {
            c.sets
                .iter()
                .map(|s| SetCheck {
                    set: s.clone(),
                    counterexample: None,
                })
                .collect()
        })
        .collect();
    let mut open: usize = checks.iter().map(|c| c.sets.len()).sum();
    // Group checks by window so that each window is unrolled once.
    let mut windows: Vec<Window> = prepared.iter().map(|p| p.window).collect();
    windows.sort_by_key(|w| (w.t_min, w.t_max));
    windows.dedup();
    let mut dags: Vec<BitDag> = windows.iter().map(|_| BitDag::new(0)).collect();
    let mut index = 0u64;
    let count = cands.for_each_masks(|masks| {
        for (w, g) in windows.iter().zip(dags.iter_mut()) {
            unroll_into(n, masks, w, g);
        }
        for (ci, p) in prepared.iter().enumerate() {
            if results[ci].iter().all(|r| !r.passed()) {
                continue;
            }
            let g = &dags[windows.iter().position(|w| *w == p.window).unwrap()];
            let desc = g.descendants(p.x);
            for (si, z) in p.sets.iter().enumerate() {
                if !results[ci][si].passed() {
                    continue;
                }
                let violation = if let Some(d) = bits::ones(z).find(|&v| bits::get(&desc, v)) {
                    Some(Backdoor::Descendant(p.labels[d].clone()))
                } else if g.d_connected(p.x, p.y, z, true) {
                    let dag = Dag::from_bits(p.labels.clone(), g.clone());
                    let zs = checks[ci].sets[si].members();
                    Some(
                        dag.backdoor(&p.labels[p.x], &p.labels[p.y], zs)
                            .expect("window labels are consistent"),
                    )
                } else {
                    None
                };
                if let Some(violation) = violation {
                    results[ci][si].counterexample = Some(Counterexample {
                        index,
                        candidate: cands.to_ftcg(masks),
                        violation,
                    });
                    open -= 1;
                }
            }
        }
        index += 1;
        open > 0
    })?;
    Ok((count, results))
}

/// Whether every set satisfies the backdoor criterion in every candidate.
pub fn backdoor_over_all(
    a: &Abstraction,
    q: &Query,
    sets: &[AdjustmentSet],
    window: &Window,
    cap: u64,
) -> Result<OracleReport> {
    let check = Check {
        query: q.clone(),
        window: *window,
        sets: sets.to_vec(),
    };
    let (visited, mut results) = check_all(a, q.gamma_max, &[check], cap)?;
    let results = results.pop().unwrap();
    // Enumeration stops early once every set has failed.
    let candidates = if results.is_empty() || results.iter().any(|r| !r.passed()) {
        CandidateSet::new(a, q.gamma_max, cap)?.count()?
    } else {
        visited
    };
    Ok(OracleReport {
        candidates,
        window: *window,
        results,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub set: Option<AdjustmentSet>,
    pub candidates: u64,
    pub subsets_tried: u64,
    pub window: Window,
}

/// Exhaustive search for a set valid in every candidate: subsets of the
/// window by increasing size, then lexicographically over window order
/// (time, then series). Vertices that are a descendant of the treatment in
/// some candidate can never belong to such a set and are left out.
pub fn search_common_adjustment(a: &Abstraction, q: &Query, window: &Window, caps: Caps) -> Result<SearchOutcome> {
    let n = a.series().len();
    let w = *window;
    let xs = a.index_of(q.x.as_str())?;
    let ys = a.index_of(q.y.as_str())?;
    if !w.contains_time(-(q.gamma as i64)) {
        return Err(Error::InvalidWindow(format!(
            "window {w} does not contain the treatment time"
        )));
    }
    let x = w.index(n, xs, -(q.gamma as i64));
    let y = w.index(n, ys, 0);
    let cands = CandidateSet::new(a, q.gamma_max, caps.candidates)?;
    let mut dags = Vec::new();
    let mut ever_desc = vec![0u64; bits::words_for(n * w.slices())];
    let count = cands.for_each_masks(|masks| {
        let mut g = BitDag::new(0);
        unroll_into(n, masks, &w, &mut g);
        for (acc, d) in ever_desc.iter_mut().zip(g.descendants(x)) {
            *acc |= d;
        }
        dags.push(g);
        true
    })?;
    let pool: Vec<usize> = (0..n * w.slices())
        .filter(|&v| v != x && v != y && !bits::get(&ever_desc, v))
        .collect();
    let labels = window_labels(a.series(), &w);
    let mut tried = 0u64;
    let mut z = vec![0u64; ever_desc.len()];
    // Candidate that failed last; tried first next time.
    let mut hot = 0usize;
    for size in 0..=pool.len() {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            tried += 1;
            if tried > caps.subsets {
                return Err(Error::CapExceeded {
                    what: "adjustment subset search",
                    cap: caps.subsets,
                    count: 1u128 << pool.len().min(127),
                });
            }
            z.iter_mut().for_each(|w| *w = 0);
            for &i in &combo {
                bits::set(&mut z, pool[i]);
            }
            let fails = |g: &BitDag| g.d_connected(x, y, &z, true);
            let mut ok = !dags.is_empty() && !fails(&dags[hot]);
            if ok {
                if let Some(k) = (0..dags.len()).find(|&k| k != hot && fails(&dags[k])) {
                    hot = k;
                    ok = false;
                }
            }
            if ok || dags.is_empty() {
                let set = combo.iter().map(|&i| labels[pool[i]].clone()).collect();
                return Ok(SearchOutcome {
                    set: Some(set),
                    candidates: count,
                    subsets_tried: tried,
                    window: w,
                });
            }
            if !next_combination(&mut combo, pool.len()) {
                break;
            }
        }
    }
    Ok(SearchOutcome {
        set: None,
        candidates: count,
        subsets_tried: tried,
        window: w,
    })
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// DFS budget for the path-level diagnostics.
const DIAGNOSTIC_BUDGET: u64 = 50_000_000;

/// Whether `v` lies on a collider-free backdoor path from `x` to `y`.
fn on_active_backdoor(g: &BitDag, x: usize, y: usize, v: usize, budget: &mut u64) -> Result<bool> {
    // A collider-free path from x entering x through an arrowhead climbs
    // against edges, then descends along them.
    fn go(g: &BitDag, y: usize, target: usize, cur: usize, up: bool, on: &mut [u64], hit: bool, budget: &mut u64) -> Result<bool> {
        if *budget == 0 {
            return Err(Error::CapExceeded {
                what: "path diagnostics",
                cap: DIAGNOSTIC_BUDGET,
                count: DIAGNOSTIC_BUDGET as u128,
            });
        }
        *budget -= 1;
        let hit = hit || cur == target;
        if cur == y {
            return Ok(hit);
        }
        let mut try_next = |w: usize, next_up: bool, on: &mut [u64]| -> Result<bool> {
            if bits::get(on, w) {
                return Ok(false);
            }
            bits::set(on, w);
            let r = go(g, y, target, w, next_up, on, hit, budget)?;
            bits::clear(on, w);
            Ok(r)
        };
        if up {
            for p in bits::ones(g.parents(cur)).collect::<Vec<_>>() {
                if try_next(p, true, on)? {
                    return Ok(true);
                }
            }
        }
        for c in bits::ones(g.children(cur)).collect::<Vec<_>>() {
            if try_next(c, false, on)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
    let mut on = g.empty_set();
    bits::set(&mut on, x);
    for p in bits::ones(g.parents(x)).collect::<Vec<_>>() {
        bits::set(&mut on, p);
        if go(g, y, v, p, true, &mut on, false, budget)? {
            return Ok(true);
        }
        bits::clear(&mut on, p);
    }
    Ok(false)
}

/// Whether `v` is on an active backdoor path (empty conditioning set) in
/// some candidate and a descendant of the treatment in another one.
pub fn classify_ambiguous(a: &Abstraction, q: &Query, v: &TimedVertex, window: &Window, cap: u64) -> Result<bool> {
    let n = a.series().len();
    let w = *window;
    if !w.contains_time(v.time) || !w.contains_time(-(q.gamma as i64)) {
        return Err(Error::InvalidWindow(format!("window {w} does not contain {v}")));
    }
    let x = w.index(n, a.index_of(q.x.as_str())?, -(q.gamma as i64));
    let y = w.index(n, a.index_of(q.y.as_str())?, 0);
    let target = w.index(n, a.index_of(v.series.as_str())?, v.time);
    if target == x || target == y {
        return Ok(false);
    }
    let cands = CandidateSet::new(a, q.gamma_max, cap)?;
    let mut g = BitDag::new(0);
    let mut budget = DIAGNOSTIC_BUDGET;
    let mut failure = None;
    let (mut active, mut desc): (Vec<u64>, Vec<u64>) = (Vec::new(), Vec::new());
    let mut index = 0u64;
    cands.for_each_masks(|masks| {
        unroll_into(n, masks, &w, &mut g);
        if bits::get(&g.descendants(x), target) {
            desc.push(index);
        }
        match on_active_backdoor(&g, x, y, target, &mut budget) {
            Ok(true) => active.push(index),
            Ok(false) => {}
            Err(e) => {
                failure = Some(e);
                return false;
            }
        }
        index += 1;
        // Two distinct witnesses are enough.
        !active.iter().any(|i| desc.iter().any(|j| j != i))
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(active.iter().any(|i| desc.iter().any(|j| j != i)))
}

/// True when no vertex of the path is strictly before the treatment time.
pub fn is_ambiguous_path(p: &MarkedPath<TimedVertex>, q: &Query) -> bool {
    let cutoff = -(q.gamma as i64);
    p.vertices().iter().all(|v| v.time >= cutoff)
}

/// Every interior series of `pf` is an interior series of `ps`, or lies on
/// a cycle through an interior series of `ps` that avoids the treatment.
pub fn is_compatible(pf: &MarkedPath<TimedVertex>, ps: &MarkedPath<SeriesId>, g: &Scg) -> Result<bool> {
    let x = &ps.vertices()[0];
    let interior: BTreeSet<&SeriesId> = ps.interior().iter().collect();
    let mut cycle_members: BTreeSet<SeriesId> = BTreeSet::new();
    for v in &interior {
        for c in g.cycles_through(v.as_str())? {
            if !c.contains(x.as_str()) {
                cycle_members.extend(c.vertices().iter().cloned());
            }
        }
    }
    Ok(pf
        .interior()
        .iter()
        .all(|w| interior.contains(&w.series) || cycle_members.contains(&w.series)))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropertyReport {
    pub candidates: u64,
    pub non_ambiguous_paths: u64,
    pub ambiguous_paths: u64,
    /// Backdoor paths before the treatment time without a blocking member of
    /// the closed-form set (Property 1).
    pub unblocked: Vec<(Ftcg, MarkedPath<TimedVertex>)>,
    /// Ambiguous backdoor paths compatible with no summary backdoor path,
    /// recorded only when the premise holds (Property 2).
    pub incompatible: Vec<(Ftcg, MarkedPath<TimedVertex>)>,
    pub premise_holds: bool,
    /// Candidates settled without path enumeration: every vertex before the
    /// treatment time with an edge into the later slices is in the set, and
    /// the premise fails so ambiguous paths need no inspection.
    pub settled_at_boundary: u64,
}

/// Whether the premise of the compatibility property holds for `q`.
pub fn compatibility_premise(g: &Scg, q: &Query) -> Result<bool> {
    if !g.ancestors(q.y.as_str())?.contains(&q.x) {
        return Ok(false);
    }
    let no_cycle = q.gamma == 0 || g.remove_vertex(q.y.as_str())?.cycles_gt(q.x.as_str())?.is_empty();
    if !no_cycle {
        return Ok(false);
    }
    let desc = g.descendants(q.x.as_str())?;
    let mut qualifying = false;
    crate::path::for_each_simple_path(g, &q.x, &q.y, crate::path::DEFAULT_PATH_CAP, |p| {
        qualifying = crate::path::is_backdoor(&p)
            && crate::path::is_sigma_active_empty(&p)
            && p.interior().iter().all(|v| desc.contains(v));
        !qualifying
    })?;
    Ok(!qualifying)
}

/// Checks the two path properties for one summary graph and query over all
/// candidates. Counterexample lists are truncated to `keep` entries.
pub fn check_properties(g: &Scg, q: &Query, cap: u64, keep: usize) -> Result<PropertyReport> {
    let a = Abstraction::Scg(g.clone());
    let n = g.len();
    let gamma = q.gamma as i64;
    let gm = q.gamma_max as i64;
    // Deep enough for the first vertex before the treatment time.
    let w = Window::new(-(gamma + gm), 0)?;
    let xs = g.index_of(q.x.as_str())?;
    let ys = g.index_of(q.y.as_str())?;
    let x = w.index(n, xs, -gamma);
    let y = w.index(n, ys, 0);
    let a_gamma = crate::scg::adjustment_a_gamma(g, q)?;
    let mut in_a = vec![0u64; bits::words_for(n * w.slices())];
    for v in a_gamma.iter() {
        bits::set(&mut in_a, w.index(n, g.index_of(v.series.as_str())?, v.time));
    }
    let labels = window_labels(g.nodes(), &w);
    let premise = compatibility_premise(g, q)?;
    let summary_backdoor: Vec<MarkedPath<SeriesId>> = if premise {
        crate::path::enumerate_simple_paths(g, &q.x, &q.y, crate::path::DEFAULT_PATH_CAP)?
            .into_iter()
            .filter(crate::path::is_backdoor)
            .collect()
    } else {
        Vec::new()
    };
    let cycles: Vec<BTreeSet<Cycle>> = g
        .nodes()
        .iter()
        .map(|s| g.cycles_through(s.as_str()))
        .collect::<Result<_>>()?;
    let compat = |pf: &MarkedPath<TimedVertex>| -> bool {
        summary_backdoor.iter().any(|ps| {
            let interior: BTreeSet<&SeriesId> = ps.interior().iter().collect();
            pf.interior().iter().all(|w| {
                interior.contains(&w.series)
                    || interior.iter().any(|v| {
                        let vi = g.index_of(v.as_str()).unwrap();
                        cycles[vi]
                            .iter()
                            .any(|c| !c.contains(q.x.as_str()) && c.contains(w.series.as_str()))
                    })
            })
        })
    };
    let cands = CandidateSet::new(&a, q.gamma_max, cap)?;
    let mut report = PropertyReport {
        premise_holds: premise,
        ..Default::default()
    };
    let mut dag = BitDag::new(0);
    let cutoff_slot = (-gamma - w.t_min) as usize;
    let mut failure = None;
    let count = cands.for_each_masks(|masks| {
        unroll_into(n, masks, &w, &mut dag);
        // The first early vertex of a path is entered against an edge into
        // the later slices, so it is a non-collider there.
        if !premise {
            let boundary_in_a = (cutoff_slot * n..labels.len())
                .all(|v| bits::ones(dag.parents(v)).all(|u| u >= cutoff_slot * n || bits::get(&in_a, u)));
            if boundary_in_a {
                report.settled_at_boundary += 1;
                return true;
            }
        }
        let mut verts = vec![x];
        let mut marks: Vec<Mark> = Vec::new();
        let mut on = dag.empty_set();
        bits::set(&mut on, x);
        let mut budget = DIAGNOSTIC_BUDGET;
        let mut visit = |verts: &[usize], marks: &[Mark], kind: PathKind| {
            let path = MarkedPath::new(
                verts.iter().map(|&i| labels[i].clone()).collect(),
                marks.to_vec(),
            )
            .expect("dfs paths are simple");
            match kind {
                PathKind::Certified => report.non_ambiguous_paths += 1,
                PathKind::Unblocked => {
                    report.non_ambiguous_paths += 1;
                    if report.unblocked.len() < keep {
                        report.unblocked.push((cands.to_ftcg(masks), path));
                    }
                }
                PathKind::Ambiguous => {
                    report.ambiguous_paths += 1;
                    if premise && !compat(&path) && report.incompatible.len() < keep {
                        report.incompatible.push((cands.to_ftcg(masks), path));
                    }
                }
            }
        };
        let mut ctx = PathDfs {
            g: &dag,
            y,
            n,
            cutoff_slot,
            in_a: &in_a,
            budget: &mut budget,
        };
        for p in bits::ones(dag.parents(x)).collect::<Vec<_>>() {
            bits::set(&mut on, p);
            verts.push(p);
            marks.push(Mark::Backward);
            if let Err(e) = ctx.walk(&mut verts, &mut marks, &mut on, false, &mut visit) {
                failure = Some(e);
                return false;
            }
            verts.pop();
            marks.pop();
            bits::clear(&mut on, p);
        }
        true
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    report.candidates = count;
    Ok(report)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PathKind {
    /// Reaches before the treatment time through a member of the set that
    /// blocks it; all its extensions are counted once.
    Certified,
    Unblocked,
    Ambiguous,
}

struct PathDfs<'a> {
    g: &'a BitDag,
    y: usize,
    n: usize,
    cutoff_slot: usize,
    in_a: &'a [u64],
    budget: &'a mut u64,
}

impl PathDfs<'_> {
    /// Extends the path ending at `verts.last()`. `early` is true once the
    /// path has a vertex before the treatment time.
    fn walk(
        &mut self,
        verts: &mut Vec<usize>,
        marks: &mut Vec<Mark>,
        on: &mut [u64],
        early: bool,
        visit: &mut dyn FnMut(&[usize], &[Mark], PathKind),
    ) -> Result<()> {
        if *self.budget == 0 {
            return Err(Error::CapExceeded {
                what: "path diagnostics",
                cap: DIAGNOSTIC_BUDGET,
                count: DIAGNOSTIC_BUDGET as u128,
            });
        }
        *self.budget -= 1;
        let v = *verts.last().unwrap();
        let is_early = v / self.n < self.cutoff_slot;
        if is_early && !early {
            // First vertex before the treatment time. It was entered as
            // `v -> previous`, so it is a non-collider whatever comes next.
            let arrived = *marks.last().unwrap();
            if arrived == Mark::Backward && bits::get(self.in_a, v) {
                visit(verts, marks, PathKind::Certified);
                return Ok(());
            }
        }
        let early = early || is_early;
        if v == self.y {
            let kind = if early {
                if self.blocked_by_a(verts, marks) {
                    PathKind::Certified
                } else {
                    PathKind::Unblocked
                }
            } else {
                PathKind::Ambiguous
            };
            visit(verts, marks, kind);
            return Ok(());
        }
        let next: Vec<(usize, Mark)> = bits::ones(self.g.children(v))
            .map(|c| (c, Mark::Forward))
            .chain(bits::ones(self.g.parents(v)).map(|p| (p, Mark::Backward)))
            .collect();
        for (w, m) in next {
            if bits::get(on, w) {
                continue;
            }
            bits::set(on, w);
            verts.push(w);
            marks.push(m);
            self.walk(verts, marks, on, early, visit)?;
            verts.pop();
            marks.pop();
            bits::clear(on, w);
        }
        Ok(())
    }

    /// Some non-collider before the treatment time is in the set.
    fn blocked_by_a(&self, verts: &[usize], marks: &[Mark]) -> bool {
        (1..verts.len() - 1).any(|i| {
            let collider = marks[i - 1] == Mark::Forward && marks[i] == Mark::Backward;
            !collider && verts[i] / self.n < self.cutoff_slot && bits::get(self.in_a, verts[i])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scg(nodes: &[&str], edges: &[(&str, &str)]) -> Abstraction {
        Abstraction::Scg(Scg::from_names(nodes, edges).unwrap())
    }

    #[test]
    fn subsets_in_mask_order() {
        assert_eq!(subsets(0, 1), vec![1, 2, 3]);
        assert_eq!(subsets(1, 2), vec![2, 4, 6]);
    }

    #[test]
    fn single_edge_has_three_candidates() {
        let a = scg(&["X", "Y"], &[("X", "Y")]);
        let c = CandidateSet::new(&a, 1, 100).unwrap();
        assert_eq!(c.count().unwrap(), 3);
        assert_eq!(c.raw_count(), 3);
    }

    #[test]
    fn cap_is_enforced() {
        let a = scg(&["X", "Y"], &[("X", "Y"), ("Y", "X")]);
        let c = CandidateSet::new(&a, 2, 5).unwrap();
        let err = c.count().unwrap_err();
        assert!(err.is_resource());
    }

    #[test]
    fn two_cycle_candidates_skip_instantaneous_cycles() {
        let a = scg(&["X", "Y"], &[("X", "Y"), ("Y", "X")]);
        let c = CandidateSet::new(&a, 1, 100).unwrap();
        // 3 * 3 choices minus the four with lag 0 both ways.
        assert_eq!(c.count().unwrap(), 5);
        assert_eq!(c.raw_count(), 9);
    }

    #[test]
    fn escg_candidates_keep_instantaneous_layer() {
        let e = Escg::from_names(&["X", "Y"], &[("X", "Y"), ("X", "X")], &[("X", "Y")]).unwrap();
        let a = Abstraction::Escg(e.clone());
        let c = CandidateSet::new(&a, 2, 100).unwrap();
        let all = c.collect().unwrap();
        assert_eq!(all.len(), 9);
        for f in all {
            assert_eq!(f.to_escg(), e);
        }
    }

    #[test]
    fn combinations_in_lexicographic_order() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[5], vec![2, 3]);
    }

    #[test]
    fn ambiguous_path_predicate() {
        let q = Query::from_names("X", "Y", 1, 1).unwrap();
        let tv = TimedVertex::at;
        let p1 = MarkedPath::new(
            vec![tv("X", -1), tv("X", -2), tv("Y", -1), tv("Y", 0)],
            vec![Mark::Backward, Mark::Forward, Mark::Forward],
        )
        .unwrap();
        let p2 = MarkedPath::new(
            vec![tv("X", -1), tv("Y", -1), tv("Y", 0)],
            vec![Mark::Backward, Mark::Forward],
        )
        .unwrap();
        let p3 = MarkedPath::new(vec![tv("X", -1), tv("Y", 0)], vec![Mark::Forward]).unwrap();
        assert!(!is_ambiguous_path(&p1, &q));
        assert!(is_ambiguous_path(&p2, &q));
        assert!(is_ambiguous_path(&p3, &q));
    }
}
