//! Graph types for the three abstraction levels of a time-series causal
//! model: full-time graphs (stored as a lag pattern), extended summary graphs
//! and summary graphs.
//!
//! Cycle enumeration is exponential in the worst case; no size limit is
//! imposed, but the graphs this crate is aimed at have at most a few dozen
//! series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::BitDag;
use crate::error::{Error, Result};

/// Label of one time series.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeriesId(String);

impl SeriesId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidGraph("series labels must be non-empty".into()));
        }
        Ok(SeriesId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for SeriesId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// A variable of a full-time graph. `time` is relative to the reference
/// time `t`, so `-2` stands for `t-2`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimedVertex {
    pub series: SeriesId,
    pub time: i64,
}

impl TimedVertex {
    pub fn new(series: SeriesId, time: i64) -> Self {
        TimedVertex { series, time }
    }

    /// Convenience constructor used heavily in tests.
    pub fn at(series: &str, time: i64) -> Self {
        TimedVertex {
            series: SeriesId(series.to_string()),
            time,
        }
    }
}

/// Renders a relative time as `t`, `t-3` or `t+1`.
pub fn time_offset(time: i64) -> String {
    match time {
        0 => "t".to_string(),
        t if t < 0 => format!("t{t}"),
        t => format!("t+{t}"),
    }
}

/// Parses `t`, `t-3`, `t+1` or a bare integer.
pub fn parse_time_offset(text: &str) -> Result<i64> {
    let s = text.trim();
    let bad = || Error::InvalidInput(format!("cannot parse time offset `{text}`"));
    if s == "t" {
        return Ok(0);
    }
    if let Some(rest) = s.strip_prefix('t') {
        return rest.parse::<i64>().map_err(|_| bad());
    }
    s.parse::<i64>().map_err(|_| bad())
}

impl fmt::Display for TimedVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.series, time_offset(self.time))
    }
}

/// A directed cycle, closed: the first vertex is repeated at the end, so a
/// self-loop is `[v, v]`. Rotated to start at the smallest label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cycle(Vec<SeriesId>);

impl Cycle {
    fn canonical(mut open: Vec<SeriesId>) -> Self {
        let start = open
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        open.rotate_left(start);
        let first = open[0].clone();
        open.push(first);
        Cycle(open)
    }

    pub fn from_names(names: &[&str]) -> Self {
        let open: Vec<SeriesId> = names.iter().map(|n| SeriesId(n.to_string())).collect();
        Cycle::canonical(open)
    }

    pub fn vertices(&self) -> &[SeriesId] {
        &self.0
    }

    pub fn is_self_loop(&self) -> bool {
        self.0.len() == 2
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0.iter().any(|s| s.as_str() == v)
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|s| s.as_str()).collect();
        write!(f, "<{}>", names.join(","))
    }
}

fn sorted_unique(names: impl IntoIterator<Item = SeriesId>) -> Result<Vec<SeriesId>> {
    let mut v: Vec<SeriesId> = names.into_iter().collect();
    let before = v.len();
    v.sort();
    v.dedup();
    if v.len() != before {
        return Err(Error::InvalidGraph("duplicate series label".into()));
    }
    Ok(v)
}

fn ids(names: &[&str]) -> Result<Vec<SeriesId>> {
    names.iter().map(|n| SeriesId::new(*n)).collect()
}

fn lookup(nodes: &[SeriesId], name: &str) -> Result<usize> {
    nodes
        .binary_search_by(|s| s.as_str().cmp(name))
        .map_err(|_| Error::UnknownVertex(name.to_string()))
}

/// Summary causal graph: one vertex per series, an edge whenever some lag
/// carries a causal relation. Cycles and self-loops are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scg {
    nodes: Vec<SeriesId>,
    adj: Vec<Vec<bool>>,
}

impl Scg {
    pub fn new(
        nodes: impl IntoIterator<Item = SeriesId>,
        edges: impl IntoIterator<Item = (SeriesId, SeriesId)>,
    ) -> Result<Self> {
        let nodes = sorted_unique(nodes)?;
        let n = nodes.len();
        let mut adj = vec![vec![false; n]; n];
        for (a, b) in edges {
            let i = lookup(&nodes, a.as_str())?;
            let j = lookup(&nodes, b.as_str())?;
            adj[i][j] = true;
        }
        Ok(Scg { nodes, adj })
    }

    /// Builds from string slices; panics-free, errors on dangling endpoints.
    pub fn from_names(nodes: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let e: Result<Vec<_>> = edges
            .iter()
            .map(|(a, b)| Ok((SeriesId::new(*a)?, SeriesId::new(*b)?)))
            .collect();
        Scg::new(ids(nodes)?, e?)
    }

    pub fn nodes(&self) -> &[SeriesId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        lookup(&self.nodes, name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_ok()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Ok(i), Ok(j)) => self.adj[i][j],
            _ => false,
        }
    }

    pub(crate) fn has_edge_idx(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> Vec<(SeriesId, SeriesId)> {
        self.edge_indices()
            .into_iter()
            .map(|(i, j)| (self.nodes[i].clone(), self.nodes[j].clone()))
            .collect()
    }

    pub(crate) fn edge_indices(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.adj[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let n = self.len();
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let edge = if forward { self.adj[v][w] } else { self.adj[w][v] };
                if edge && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    fn collect(&self, mask: &[bool]) -> BTreeSet<SeriesId> {
        mask.iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| self.nodes[i].clone())
            .collect()
    }

    /// `Anc(v)`, including `v` itself.
    pub fn ancestors(&self, v: &str) -> Result<BTreeSet<SeriesId>> {
        let i = self.index_of(v)?;
        Ok(self.collect(&self.reach(i, false)))
    }

    /// `Desc(v)`, including `v` itself.
    pub fn descendants(&self, v: &str) -> Result<BTreeSet<SeriesId>> {
        let i = self.index_of(v)?;
        Ok(self.collect(&self.reach(i, true)))
    }

    pub(crate) fn descendant_mask(&self, i: usize) -> Vec<bool> {
        self.reach(i, true)
    }

    pub fn parents(&self, v: &str) -> Result<BTreeSet<SeriesId>> {
        let j = self.index_of(v)?;
        Ok((0..self.len())
            .filter(|&i| self.adj[i][j])
            .map(|i| self.nodes[i].clone())
            .collect())
    }

    /// All simple directed cycles through `v`, self-loop included.
    pub fn cycles_through(&self, v: &str) -> Result<BTreeSet<Cycle>> {
        let start = self.index_of(v)?;
        let n = self.len();
        let mut out = BTreeSet::new();
        let mut on_path = vec![false; n];
        let mut path = vec![start];
        on_path[start] = true;
        self.cycle_dfs(start, start, &mut on_path, &mut path, &mut out);
        Ok(out)
    }

    fn cycle_dfs(
        &self,
        start: usize,
        v: usize,
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut BTreeSet<Cycle>,
    ) {
        for w in 0..self.len() {
            if !self.adj[v][w] {
                continue;
            }
            if w == start {
                out.insert(Cycle::canonical(
                    path.iter().map(|&i| self.nodes[i].clone()).collect(),
                ));
            } else if !on_path[w] {
                on_path[w] = true;
                path.push(w);
                self.cycle_dfs(start, w, on_path, path, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }

    /// Cycles through `v` with at least two distinct vertices.
    pub fn cycles_gt(&self, v: &str) -> Result<BTreeSet<Cycle>> {
        Ok(self
            .cycles_through(v)?
            .into_iter()
            .filter(|c| !c.is_self_loop())
            .collect())
    }

    /// The subgraph without `v` and its incident edges.
    pub fn remove_vertex(&self, v: &str) -> Result<Scg> {
        let k = self.index_of(v)?;
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != k).collect();
        Ok(Scg {
            nodes: keep.iter().map(|&i| self.nodes[i].clone()).collect(),
            adj: keep
                .iter()
                .map(|&i| keep.iter().map(|&j| self.adj[i][j]).collect())
                .collect(),
        })
    }
}

/// Extended summary causal graph: lagged relations `A(t-) -> B(t)` and
/// instantaneous relations `A(t) -> B(t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Escg {
    series: Vec<SeriesId>,
    lagged: Vec<Vec<bool>>,
    inst: Vec<Vec<bool>>,
}

impl Escg {
    pub fn new(
        series: impl IntoIterator<Item = SeriesId>,
        lagged: impl IntoIterator<Item = (SeriesId, SeriesId)>,
        instantaneous: impl IntoIterator<Item = (SeriesId, SeriesId)>,
    ) -> Result<Self> {
        let series = sorted_unique(series)?;
        let n = series.len();
        let mut lag = vec![vec![false; n]; n];
        let mut inst = vec![vec![false; n]; n];
        for (a, b) in lagged {
            lag[lookup(&series, a.as_str())?][lookup(&series, b.as_str())?] = true;
        }
        for (a, b) in instantaneous {
            let i = lookup(&series, a.as_str())?;
            let j = lookup(&series, b.as_str())?;
            if i == j {
                return Err(Error::InvalidGraph(format!(
                    "instantaneous self-loop on `{a}`"
                )));
            }
            inst[i][j] = true;
        }
        let mut g = BitDag::new(n);
        for i in 0..n {
            for j in 0..n {
                if inst[i][j] {
                    g.add_edge(i, j);
                }
            }
        }
        if !g.is_acyclic() {
            return Err(Error::InvalidGraph(
                "instantaneous edges contain a directed cycle".into(),
            ));
        }
        Ok(Escg {
            series,
            lagged: lag,
            inst,
        })
    }

    pub fn from_names(
        series: &[&str],
        lagged: &[(&str, &str)],
        instantaneous: &[(&str, &str)],
    ) -> Result<Self> {
        let pairs = |e: &[(&str, &str)]| -> Result<Vec<(SeriesId, SeriesId)>> {
            e.iter()
                .map(|(a, b)| Ok((SeriesId::new(*a)?, SeriesId::new(*b)?)))
                .collect()
        };
        Escg::new(ids(series)?, pairs(lagged)?, pairs(instantaneous)?)
    }

    pub fn series(&self) -> &[SeriesId] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        lookup(&self.series, name)
    }

    pub(crate) fn lagged_idx(&self, i: usize, j: usize) -> bool {
        self.lagged[i][j]
    }

    pub(crate) fn inst_idx(&self, i: usize, j: usize) -> bool {
        self.inst[i][j]
    }

    fn pairs(&self, m: &[Vec<bool>]) -> Vec<(SeriesId, SeriesId)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[i][j] {
                    out.push((self.series[i].clone(), self.series[j].clone()));
                }
            }
        }
        out
    }

    pub fn lagged_edges(&self) -> Vec<(SeriesId, SeriesId)> {
        self.pairs(&self.lagged)
    }

    pub fn instantaneous_edges(&self) -> Vec<(SeriesId, SeriesId)> {
        self.pairs(&self.inst)
    }

    /// Series `Z` with `Z(t-) -> X(t)`.
    pub fn lagged_parents(&self, x: &str) -> Result<BTreeSet<SeriesId>> {
        let j = self.index_of(x)?;
        Ok((0..self.len())
            .filter(|&i| self.lagged[i][j])
            .map(|i| self.series[i].clone())
            .collect())
    }

    /// Series `Z` with `Z(t) -> X(t)`.
    pub fn instantaneous_parents(&self, x: &str) -> Result<BTreeSet<SeriesId>> {
        let j = self.index_of(x)?;
        Ok((0..self.len())
            .filter(|&i| self.inst[i][j])
            .map(|i| self.series[i].clone())
            .collect())
    }

    pub fn to_scg(&self) -> Scg {
        let n = self.len();
        let adj = (0..n)
            .map(|i| (0..n).map(|j| self.lagged[i][j] || self.inst[i][j]).collect())
            .collect();
        Scg {
            nodes: self.series.clone(),
            adj,
        }
    }
}

/// Largest supported maximal lag (lags are stored as bit masks).
pub const MAX_GAMMA_MAX: u32 = 62;

/// A full-time causal graph that is consistent through time, stored as its
/// lag pattern: `A(t-l-k) -> B(t-l)` exists for every `l` and every `k` in
/// `lags(A, B)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ftcg {
    series: Vec<SeriesId>,
    gamma_max: u32,
    /// `n * n` lag masks; bit `k` of `masks[i * n + j]` means lag `k` from `i` to `j`.
    masks: Vec<u64>,
}

impl Ftcg {
    pub fn new(
        series: impl IntoIterator<Item = SeriesId>,
        gamma_max: u32,
        edges: impl IntoIterator<Item = (SeriesId, SeriesId, u32)>,
    ) -> Result<Self> {
        let series = sorted_unique(series)?;
        let n = series.len();
        let mut masks = vec![0u64; n * n];
        if gamma_max > MAX_GAMMA_MAX {
            return Err(Error::InvalidGraph(format!(
                "gamma_max {gamma_max} exceeds the supported maximum {MAX_GAMMA_MAX}"
            )));
        }
        for (a, b, lag) in edges {
            let i = lookup(&series, a.as_str())?;
            let j = lookup(&series, b.as_str())?;
            if lag > gamma_max {
                return Err(Error::InvalidGraph(format!(
                    "lag {lag} on {a}->{b} exceeds gamma_max {gamma_max}"
                )));
            }
            if i == j && lag == 0 {
                return Err(Error::InvalidGraph(format!(
                    "instantaneous self-edge on `{a}`"
                )));
            }
            masks[i * n + j] |= 1 << lag;
        }
        Ftcg::from_masks(series, gamma_max, masks)
    }

    pub fn from_names(series: &[&str], gamma_max: u32, edges: &[(&str, &str, u32)]) -> Result<Self> {
        let e: Result<Vec<_>> = edges
            .iter()
            .map(|(a, b, l)| Ok((SeriesId::new(*a)?, SeriesId::new(*b)?, *l)))
            .collect();
        Ftcg::new(ids(series)?, gamma_max, e?)
    }

    pub(crate) fn from_masks(series: Vec<SeriesId>, gamma_max: u32, masks: Vec<u64>) -> Result<Self> {
        let n = series.len();
        if !lag_zero_acyclic(n, &masks) {
            return Err(Error::InvalidGraph(
                "lag-0 (instantaneous) edges contain a directed cycle".into(),
            ));
        }
        Ok(Ftcg {
            series,
            gamma_max,
            masks,
        })
    }

    pub fn series(&self) -> &[SeriesId] {
        &self.series
    }

    pub fn gamma_max(&self) -> u32 {
        self.gamma_max
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        lookup(&self.series, name)
    }

    pub(crate) fn masks(&self) -> &[u64] {
        &self.masks
    }

    /// Lags `k` such that `from(t-k) -> to(t)`.
    pub fn lags(&self, from: &str, to: &str) -> Result<BTreeSet<u32>> {
        let n = self.len();
        let m = self.masks[self.index_of(from)? * n + self.index_of(to)?];
        Ok(mask_lags(m).collect())
    }

    /// Non-empty lag sets keyed by `(from, to)`.
    pub fn lag_pattern(&self) -> BTreeMap<(SeriesId, SeriesId), BTreeSet<u32>> {
        let n = self.len();
        let mut out = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let m = self.masks[i * n + j];
                if m != 0 {
                    out.insert(
                        (self.series[i].clone(), self.series[j].clone()),
                        mask_lags(m).collect(),
                    );
                }
            }
        }
        out
    }

    /// `(from, to, lag)` triples in lexicographic order.
    pub fn edges(&self) -> Vec<(SeriesId, SeriesId, u32)> {
        self.lag_pattern()
            .into_iter()
            .flat_map(|((a, b), lags)| lags.into_iter().map(move |l| (a.clone(), b.clone(), l)))
            .collect()
    }

    pub fn to_scg(&self) -> Scg {
        let n = self.len();
        let adj = (0..n)
            .map(|i| (0..n).map(|j| self.masks[i * n + j] != 0).collect())
            .collect();
        Scg {
            nodes: self.series.clone(),
            adj,
        }
    }

    pub fn to_escg(&self) -> Escg {
        let n = self.len();
        let lagged = (0..n)
            .map(|i| (0..n).map(|j| self.masks[i * n + j] & !1 != 0).collect())
            .collect();
        let inst = (0..n)
            .map(|i| (0..n).map(|j| self.masks[i * n + j] & 1 != 0).collect())
            .collect();
        Escg {
            series: self.series.clone(),
            lagged,
            inst,
        }
    }
}

pub(crate) fn mask_lags(m: u64) -> impl Iterator<Item = u32> {
    (0..64u32).filter(move |k| m >> k & 1 == 1)
}

pub(crate) fn lag_zero_acyclic(n: usize, masks: &[u64]) -> bool {
    let mut g = BitDag::new(n);
    for i in 0..n {
        for j in 0..n {
            if masks[i * n + j] & 1 != 0 {
                if i == j {
                    return false;
                }
                g.add_edge(i, j);
            }
        }
    }
    g.is_acyclic()
}

/// SCG derived from an ESCG.
pub fn derive_scg(e: &Escg) -> Scg {
    e.to_scg()
}

/// SCG derived from an FTCG.
pub fn derive_scg_from_ftcg(f: &Ftcg) -> Scg {
    f.to_scg()
}

/// ESCG derived from an FTCG.
pub fn derive_escg(f: &Ftcg) -> Escg {
    f.to_escg()
}

/// Any of the three abstraction levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Graph {
    Scg(Scg),
    Escg(Escg),
    Ftcg(Ftcg),
}

impl Graph {
    pub fn kind(&self) -> GraphKind {
        match self {
            Graph::Scg(_) => GraphKind::Scg,
            Graph::Escg(_) => GraphKind::Escg,
            Graph::Ftcg(_) => GraphKind::Ftcg,
        }
    }

    pub fn series(&self) -> &[SeriesId] {
        match self {
            Graph::Scg(g) => g.nodes(),
            Graph::Escg(g) => g.series(),
            Graph::Ftcg(g) => g.series(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Scg,
    Escg,
    Ftcg,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Scg => "scg",
            GraphKind::Escg => "escg",
            GraphKind::Ftcg => "ftcg",
        })
    }
}
