//! Linear-Gaussian dynamic structural models: generation, simulation,
//! path-coefficient ground truth and regression-based adjustment.
//!
//! The adjustment estimate is the coefficient of the treatment in an
//! ordinary least-squares fit, which equals the adjustment formula only for
//! linear-Gaussian models.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::bits::BitDag;
use crate::error::{Error, Result};
use crate::graph::{Ftcg, SeriesId, TimedVertex};
use crate::oracle::{Abstraction, CandidateSet};
use crate::query::{AdjustmentSet, Query};
use crate::window::Window;

/// Bound on the sum of absolute incoming coefficients of every series.
pub const STABILITY_BOUND: f64 = 0.9;
const COEFF_MIN: f64 = 0.2;
const COEFF_MAX: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearDscm {
    ftcg: Ftcg,
    coeffs: BTreeMap<(SeriesId, SeriesId, u32), f64>,
    noise_std: Vec<f64>,
}

impl LinearDscm {
    pub fn new(
        ftcg: Ftcg,
        coeffs: BTreeMap<(SeriesId, SeriesId, u32), f64>,
        noise_std: Vec<f64>,
    ) -> Result<Self> {
        let edges: Vec<(SeriesId, SeriesId, u32)> = ftcg.edges();
        if edges.len() != coeffs.len() || edges.iter().any(|e| !coeffs.contains_key(e)) {
            return Err(Error::InvalidModel(
                "coefficients must match the lag pattern exactly".into(),
            ));
        }
        if let Some(((a, b, l), _)) = coeffs.iter().find(|(_, c)| **c == 0.0 || !c.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "coefficient of {a}->{b} at lag {l} must be finite and nonzero"
            )));
        }
        if noise_std.len() != ftcg.len() || noise_std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidModel(
                "one positive noise scale per series is required".into(),
            ));
        }
        for to in ftcg.series() {
            let total: f64 = coeffs
                .iter()
                .filter(|((_, b, _), _)| b == to)
                .map(|(_, c)| c.abs())
                .sum();
            if total > STABILITY_BOUND + 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "incoming coefficients of `{to}` sum to {total:.3} in absolute value, above {STABILITY_BOUND}"
                )));
            }
        }
        Ok(LinearDscm {
            ftcg,
            coeffs,
            noise_std,
        })
    }

    /// Coefficients drawn from `±[0.2, 0.8]`, then scaled down per series
    /// to the stability bound when needed. Unit noise.
    pub fn random(ftcg: Ftcg, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let magnitude = Uniform::new_inclusive(COEFF_MIN, COEFF_MAX).expect("valid range");
        let mut coeffs = BTreeMap::new();
        for e in ftcg.edges() {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            coeffs.insert(e, sign * magnitude.sample(&mut rng));
        }
        for to in ftcg.series() {
            let total: f64 = coeffs
                .iter()
                .filter(|((_, b, _), _)| b == to)
                .map(|(_, c)| c.abs())
                .sum();
            if total > STABILITY_BOUND {
                let scale = STABILITY_BOUND / total;
                for ((_, b, _), c) in coeffs.iter_mut() {
                    if b == to {
                        *c *= scale;
                    }
                }
            }
        }
        let noise_std = vec![1.0; ftcg.len()];
        LinearDscm::new(ftcg, coeffs, noise_std).expect("random model is stable")
    }

    /// A random candidate of `a` (uniform over lag-set choices, redrawn on
    /// instantaneous cycles) with random coefficients.
    pub fn random_candidate(a: &Abstraction, gamma_max: u32, seed: u64) -> Result<Self> {
        let cands = CandidateSet::new(a, gamma_max, u64::MAX)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let ftcg = cands.sample(&mut rng)?;
        Ok(LinearDscm::random(ftcg, seed))
    }

    pub fn ftcg(&self) -> &Ftcg {
        &self.ftcg
    }

    pub fn coefficients(&self) -> &BTreeMap<(SeriesId, SeriesId, u32), f64> {
        &self.coeffs
    }

    pub fn noise_std(&self) -> &[f64] {
        &self.noise_std
    }

    pub fn coefficient(&self, from: &str, to: &str, lag: u32) -> Option<f64> {
        self.coeffs
            .iter()
            .find(|((a, b, l), _)| a.as_str() == from && b.as_str() == to && *l == lag)
            .map(|(_, c)| *c)
    }

    /// Series in an order compatible with the instantaneous edges.
    fn instantaneous_order(&self) -> Vec<usize> {
        let n = self.ftcg.len();
        let masks = self.ftcg.masks();
        let mut g = BitDag::new(n);
        for a in 0..n {
            for b in 0..n {
                if masks[a * n + b] & 1 == 1 {
                    g.add_edge(a, b);
                }
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut done = vec![false; n];
        while order.len() < n {
            for v in 0..n {
                if !done[v] && crate::bits::ones(g.parents(v)).all(|p| done[p]) {
                    done[v] = true;
                    order.push(v);
                }
            }
        }
        order
    }

    /// Incoming terms `(from, lag, coefficient)` per target series.
    fn incoming(&self) -> Vec<Vec<(usize, usize, f64)>> {
        let n = self.ftcg.len();
        let mut inc = vec![Vec::new(); n];
        for ((a, b, l), c) in &self.coeffs {
            let ai = self.ftcg.index_of(a.as_str()).unwrap();
            let bi = self.ftcg.index_of(b.as_str()).unwrap();
            inc[bi].push((ai, *l as usize, *c));
        }
        inc
    }
}

/// Setting one series by intervention at every `period`-th time step, to an
/// independent draw from `N(0, std^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Intervention {
    pub series: SeriesId,
    pub period: usize,
    pub std: f64,
}

/// Simulated values, one row per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesData {
    pub names: Vec<SeriesId>,
    pub rows: usize,
    values: Vec<f64>,
    /// Rows where the intervention was applied.
    pub intervened: Vec<usize>,
}

impl SeriesData {
    pub fn value(&self, row: usize, series: usize) -> f64 {
        self.values[row * self.names.len() + series]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|s| s.as_str() == name)
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    /// CSV with a header of series names and one row per time step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<&str> = self.names.iter().map(|s| s.as_str()).collect();
        writeln!(out, "{}", header.join(","))?;
        let n = self.names.len();
        for r in 0..self.rows {
            let row: Vec<String> = self.values[r * n..(r + 1) * n].iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn burn_in(q: &Query) -> usize {
    10 * (q.gamma as usize + q.gamma_max as usize)
}

/// Simulates `length` time steps after discarding `burn` initial ones.
pub fn simulate(
    m: &LinearDscm,
    length: usize,
    burn: usize,
    seed: u64,
    intervention: Option<&Intervention>,
) -> Result<SeriesData> {
    if length == 0 {
        return Err(Error::InvalidInput("length must be positive".into()));
    }
    let n = m.ftcg.len();
    let target = match intervention {
        Some(iv) => {
            if iv.period == 0 || !(iv.std > 0.0) {
                return Err(Error::InvalidInput(
                    "intervention needs a positive period and scale".into(),
                ));
            }
            Some((m.ftcg.index_of(iv.series.as_str())?, iv.period, iv.std))
        }
        None => None,
    };
    let order = m.instantaneous_order();
    let inc = m.incoming();
    let total = length + burn;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Normal<f64>> = m
        .noise_std
        .iter()
        .map(|s| Normal::new(0.0, *s).expect("positive scale"))
        .collect();
    let mut values = vec![0.0; total * n];
    let mut intervened = Vec::new();
    for s in 0..total {
        for &b in &order {
            let v = match target {
                Some((x, period, std)) if b == x && s >= burn && (s - burn).is_multiple_of(period) => {
                    intervened.push(s - burn);
                    Normal::new(0.0, std).expect("positive scale").sample(&mut rng)
                }
                _ => {
                    let mut v = noise[b].sample(&mut rng);
                    for &(a, lag, c) in &inc[b] {
                        if s >= lag {
                            v += c * values[(s - lag) * n + a];
                        }
                    }
                    v
                }
            };
            values[s * n + b] = v;
        }
    }
    Ok(SeriesData {
        names: m.ftcg.series().to_vec(),
        rows: length,
        values: values.split_off(burn * n),
        intervened,
    })
}

/// Sum over directed paths from the treatment to the response of the
/// products of coefficients.
pub fn true_total_effect(m: &LinearDscm, q: &Query, window: &Window) -> Result<f64> {
    let f = &m.ftcg;
    let xs = f.index_of(q.x.as_str())?;
    let ys = f.index_of(q.y.as_str())?;
    let start = -(q.gamma as i64);
    if !window.contains_time(start) {
        return Err(Error::InvalidWindow(format!(
            "window {window} does not contain the treatment time"
        )));
    }
    let n = f.len();
    let order = m.instantaneous_order();
    let inc = m.incoming();
    let slices = q.gamma as usize + 1;
    // effect[s * n + v]: derivative of vertex (v, start + s) in the treatment.
    let mut effect = vec![0.0; slices * n];
    for s in 0..slices {
        for &b in &order {
            if s == 0 && b == xs {
                effect[b] = 1.0;
                continue;
            }
            let mut e = 0.0;
            for &(a, lag, c) in &inc[b] {
                if s >= lag {
                    e += c * effect[(s - lag) * n + a];
                }
            }
            effect[s * n + b] = e;
        }
    }
    Ok(effect[(slices - 1) * n + ys])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub coefficient: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn column_label(v: &TimedVertex) -> String {
    v.to_string()
}

/// Least squares of `y` on the columns of `x` (intercept included by the
/// caller). Returns the coefficient and standard error of column 1.
fn ols_slope(design: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<Estimate> {
    let p = design.len();
    let rows = y.len();
    if rows <= p {
        return Err(Error::Estimation(format!(
            "{rows} samples are too few for {p} regressors"
        )));
    }
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for i in 0..p {
        for j in i..p {
            let s: f64 = design[i].iter().zip(&design[j]).map(|(a, b)| a * b).sum();
            xtx[(i, j)] = s;
            xtx[(j, i)] = s;
        }
        xty[i] = design[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    // Columns explained by the earlier ones are collinear.
    let mut collinear = Vec::new();
    for j in 1..p {
        let lead = xtx.view((0, 0), (j, j)).into_owned();
        let col = xtx.view((0, j), (j, 1)).into_owned();
        let Some(chol) = lead.cholesky() else { continue };
        let sol = chol.solve(&col);
        let residual = xtx[(j, j)] - (col.transpose() * sol)[(0, 0)];
        if residual <= 1e-9 * xtx[(j, j)].max(1e-300) {
            collinear.push(names[j].clone());
        }
    }
    if !collinear.is_empty() {
        return Err(Error::Estimation(format!(
            "design matrix is rank deficient; collinear columns: {}",
            collinear.join(", ")
        )));
    }
    let chol = xtx.clone().cholesky().ok_or_else(|| {
        Error::Estimation("design matrix is not positive definite".into())
    })?;
    let beta = chol.solve(&xty);
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let rss = (yty - beta.dot(&xty)).max(0.0);
    let sigma2 = rss / (rows - p) as f64;
    let inv = chol.inverse();
    Ok(Estimate {
        coefficient: beta[1],
        std_error: (sigma2 * inv[(1, 1)]).sqrt(),
        samples: rows,
    })
}

/// Coefficient of the treatment when regressing the response on the
/// treatment and every member of `z`, stacking all usable reference times.
pub fn estimate_adjusted(data: &SeriesData, q: &Query, z: &AdjustmentSet) -> Result<Estimate> {
    z.validate_for(q)?;
    let depth = z
        .iter()
        .map(|v| -v.time)
        .chain(std::iter::once(q.gamma as i64))
        .max()
        .unwrap_or(0) as usize;
    if data.rows <= depth {
        return Err(Error::Estimation("series too short for the adjustment set".into()));
    }
    let xs = data.column_index(q.x.as_str())?;
    let ys = data.column_index(q.y.as_str())?;
    let mut cols: Vec<(usize, usize)> = vec![(xs, q.gamma as usize)];
    let mut names = vec!["intercept".to_string(), column_label(&q.treatment())];
    for v in z.iter() {
        cols.push((data.column_index(v.series.as_str())?, (-v.time) as usize));
        names.push(column_label(v));
    }
    let refs: Vec<usize> = (depth..data.rows).collect();
    let mut design = vec![vec![1.0; refs.len()]];
    for &(c, back) in &cols {
        design.push(refs.iter().map(|&t| data.value(t - back, c)).collect());
    }
    let y: Vec<f64> = refs.iter().map(|&t| data.value(t, ys)).collect();
    ols_slope(&design, &y, &names)
}

/// Slope of `Y_{s+gamma}` on the value set for `X_s` at each intervened
/// step, with interventions spaced `gamma + 1` apart so that none falls in
/// between.
pub fn interventional_slope(m: &LinearDscm, q: &Query, samples: usize, seed: u64) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be positive".into()));
    }
    let period = q.gamma as usize + 1;
    let iv = Intervention {
        series: q.x.clone(),
        period,
        std: 1.0,
    };
    let length = samples * period + q.gamma as usize;
    let data = simulate(m, length, burn_in(q), seed, Some(&iv))?;
    let xs = data.column_index(q.x.as_str())?;
    let ys = data.column_index(q.y.as_str())?;
    let rows: Vec<usize> = data
        .intervened
        .iter()
        .copied()
        .filter(|&s| s + q.gamma as usize >= 1 && s + (q.gamma as usize) < data.rows)
        .collect();
    let x: Vec<f64> = rows.iter().map(|&s| data.value(s, xs)).collect();
    let y: Vec<f64> = rows.iter().map(|&s| data.value(s + q.gamma as usize, ys)).collect();
    let design = vec![vec![1.0; rows.len()], x];
    ols_slope(&design, &y, &["intercept".into(), column_label(&q.treatment())])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(edges: &[(&str, &str, u32, f64)], series: &[&str], gamma_max: u32) -> LinearDscm {
        let e: Vec<(&str, &str, u32)> = edges.iter().map(|(a, b, l, _)| (*a, *b, *l)).collect();
        let f = Ftcg::from_names(series, gamma_max, &e).unwrap();
        let coeffs = edges
            .iter()
            .map(|(a, b, l, c)| ((SeriesId::new(*a).unwrap(), SeriesId::new(*b).unwrap(), *l), *c))
            .collect();
        LinearDscm::new(f, coeffs, vec![1.0; series.len()]).unwrap()
    }

    #[test]
    fn two_path_sum() {
        let m = model(
            &[("X", "Y", 1, 0.3), ("X", "X", 1, 0.5), ("X", "Y", 0, 0.4)],
            &["X", "Y"],
            1,
        );
        let q = Query::from_names("X", "Y", 1, 1).unwrap();
        let w = Window::default_for(1, 1);
        let got = true_total_effect(&m, &q, &w).unwrap();
        assert!((got - (0.3 + 0.5 * 0.4)).abs() < 1e-12);
        let none = model(&[("Y", "X", 1, 0.3)], &["X", "Y"], 1);
        assert_eq!(true_total_effect(&none, &q, &w).unwrap(), 0.0);
    }

    #[test]
    fn unstable_and_mismatched_models_are_rejected() {
        let f = Ftcg::from_names(&["X", "Y"], 1, &[("X", "Y", 1)]).unwrap();
        let key = (SeriesId::new("X").unwrap(), SeriesId::new("Y").unwrap(), 1);
        let big: BTreeMap<_, _> = [(key.clone(), 0.95)].into();
        assert!(LinearDscm::new(f.clone(), big, vec![1.0, 1.0]).is_err());
        assert!(LinearDscm::new(f.clone(), BTreeMap::new(), vec![1.0, 1.0]).is_err());
        let zero: BTreeMap<_, _> = [(key, 0.0)].into();
        assert!(LinearDscm::new(f, zero, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn random_models_respect_the_bound() {
        let f = Ftcg::from_names(
            &["X", "Y", "Z"],
            2,
            &[("X", "Y", 0), ("X", "Y", 1), ("Z", "Y", 2), ("Y", "Y", 1), ("X", "X", 2)],
        )
        .unwrap();
        for seed in 0..20 {
            let m = LinearDscm::random(f.clone(), seed);
            for c in m.coefficients().values() {
                assert!(c.abs() <= COEFF_MAX && c.abs() > 0.0);
            }
        }
    }

    #[test]
    fn regression_recovers_single_lagged_edge() {
        let m = model(&[("X", "Y", 1, 0.6)], &["X", "Y"], 1);
        let q = Query::from_names("X", "Y", 1, 1).unwrap();
        let data = simulate(&m, 50_000, 20, 3, None).unwrap();
        let est = estimate_adjusted(&data, &q, &AdjustmentSet::default()).unwrap();
        assert!((est.coefficient - 0.6).abs() < 4.0 * est.std_error + 1e-3);
        let iv = interventional_slope(&m, &q, 50_000, 4).unwrap();
        assert!((iv.coefficient - 0.6).abs() < 4.0 * iv.std_error + 1e-3);
    }

    #[test]
    fn collinear_columns_are_named() {
        let m = model(&[("X", "Y", 1, 0.6)], &["X", "Y"], 1);
        let data = simulate(&m, 1000, 20, 3, None).unwrap();
        let q = Query::from_names("X", "Y", 0, 1).unwrap();
        // X at lag 0 twice is impossible in a set, so build a degenerate
        // design directly.
        let x: Vec<f64> = (0..data.rows).map(|r| data.value(r, 0)).collect();
        let design = vec![vec![1.0; x.len()], x.clone(), x.iter().map(|v| 2.0 * v).collect()];
        let y: Vec<f64> = (0..data.rows).map(|r| data.value(r, 1)).collect();
        let err = ols_slope(&design, &y, &["intercept".into(), "a".into(), "b".into()]).unwrap_err();
        assert!(err.to_string().contains("b"));
        assert!(estimate_adjusted(&data, &q, &AdjustmentSet::new([TimedVertex::at("X", 0)])).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = model(&[("X", "Y", 1, 0.6)], &["X", "Y"], 1);
        let data = simulate(&m, 3, 0, 1, None).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "X,Y");
    }
}
