//! Labeled acyclic graphs: the unrolled windows of full-time graphs and
//! the small random DAGs used in tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::bits::{self, BitDag};
use crate::error::{Error, Result};
use crate::path::{Mark, MarkedPath};

/// Outcome of a standard backdoor check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Backdoor<V> {
    Valid,
    /// A member of the set is a descendant of the treatment.
    Descendant(V),
    /// A backdoor path left open by the set.
    OpenPath(MarkedPath<V>),
}

impl<V> Backdoor<V> {
    pub fn is_valid(&self) -> bool {
        matches!(self, Backdoor::Valid)
    }
}

/// Upper bound on DFS expansions when extracting an open backdoor path.
const PATH_SEARCH_BUDGET: u64 = 5_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag<V: Ord + Clone> {
    labels: Vec<V>,
    index: BTreeMap<V, usize>,
    g: BitDag,
}

impl<V: Ord + Clone + fmt::Display> Dag<V> {
    pub fn new(vertices: Vec<V>, edges: &[(V, V)]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex {v}")));
            }
        }
        let mut g = BitDag::new(vertices.len());
        for (a, b) in edges {
            let i = *index.get(a).ok_or_else(|| Error::UnknownVertex(a.to_string()))?;
            let j = *index.get(b).ok_or_else(|| Error::UnknownVertex(b.to_string()))?;
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on {a}")));
            }
            g.add_edge(i, j);
        }
        if !g.is_acyclic() {
            return Err(Error::InvalidGraph("graph has a directed cycle".into()));
        }
        Ok(Dag {
            labels: vertices,
            index,
            g,
        })
    }

    pub(crate) fn from_bits(labels: Vec<V>, g: BitDag) -> Self {
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Dag { labels, index, g }
    }

    pub fn vertices(&self) -> &[V] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, v: &V) -> bool {
        self.index.contains_key(v)
    }

    pub fn index_of(&self, v: &V) -> Result<usize> {
        self.index
            .get(v)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(v.to_string()))
    }

    pub fn label(&self, i: usize) -> &V {
        &self.labels[i]
    }

    pub fn has_edge(&self, a: &V, b: &V) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.g.has_edge(i, j),
            _ => false,
        }
    }

    pub(crate) fn has_edge_idx(&self, i: usize, j: usize) -> bool {
        self.g.has_edge(i, j)
    }

    pub fn edges(&self) -> Vec<(V, V)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in bits::ones(self.g.children(i)) {
                out.push((self.labels[i].clone(), self.labels[j].clone()));
            }
        }
        out
    }

    fn labels_of(&self, set: &[u64]) -> BTreeSet<V> {
        bits::ones(set).map(|i| self.labels[i].clone()).collect()
    }

    pub fn ancestors(&self, v: &V) -> Result<BTreeSet<V>> {
        Ok(self.labels_of(&self.g.ancestors(self.index_of(v)?)))
    }

    pub fn descendants(&self, v: &V) -> Result<BTreeSet<V>> {
        Ok(self.labels_of(&self.g.descendants(self.index_of(v)?)))
    }

    pub fn parents(&self, v: &V) -> Result<BTreeSet<V>> {
        Ok(self.labels_of(self.g.parents(self.index_of(v)?)))
    }

    fn set_bits(&self, z: &BTreeSet<V>) -> Result<Vec<u64>> {
        let mut bits = self.g.empty_set();
        for v in z {
            bits::set(&mut bits, self.index_of(v)?);
        }
        Ok(bits)
    }

    fn check_endpoints(&self, a: &V, b: &V, z: &BTreeSet<V>) -> Result<(usize, usize)> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        if z.contains(a) || z.contains(b) {
            return Err(Error::InvalidInput(
                "conditioning set contains an endpoint".into(),
            ));
        }
        if i == j {
            return Err(Error::InvalidInput("endpoints must differ".into()));
        }
        Ok((i, j))
    }

    /// d-separation by reachability; linear in the graph size.
    pub fn d_separated_reach(&self, a: &V, b: &V, z: &BTreeSet<V>) -> Result<bool> {
        let (i, j) = self.check_endpoints(a, b, z)?;
        Ok(!self.g.d_connected(i, j, &self.set_bits(z)?, false))
    }

    /// Standard backdoor criterion for the pair `(x, y)` and set `z`.
    pub fn backdoor(&self, x: &V, y: &V, z: &BTreeSet<V>) -> Result<Backdoor<V>> {
        let (i, j) = self.check_endpoints(x, y, z)?;
        let zb = self.set_bits(z)?;
        let desc = self.g.descendants(i);
        if let Some(d) = bits::ones(&zb).find(|&v| bits::get(&desc, v)) {
            return Ok(Backdoor::Descendant(self.labels[d].clone()));
        }
        if !self.g.d_connected(i, j, &zb, true) {
            return Ok(Backdoor::Valid);
        }
        let path = self.open_backdoor_path(i, j, &zb)?;
        Ok(Backdoor::OpenPath(path))
    }

    /// Finds a backdoor path from `x` to `y` that `z` leaves active, by DFS
    /// over simple paths pruned at blocked prefixes.
    fn open_backdoor_path(&self, x: usize, y: usize, z: &[u64]) -> Result<MarkedPath<V>> {
        let mut anc_z = Vec::new();
        self.g.closure(z, true, &mut anc_z);
        let mut on_path = self.g.empty_set();
        bits::set(&mut on_path, x);
        let mut verts = vec![x];
        let mut marks = Vec::new();
        let mut budget = PATH_SEARCH_BUDGET;
        for p in bits::ones(self.g.parents(x)) {
            if self.extend(p, Mark::Backward, y, z, &anc_z, &mut on_path, &mut verts, &mut marks, &mut budget) {
                let vs = verts.iter().map(|&k| self.labels[k].clone()).collect();
                return MarkedPath::new(vs, marks);
            }
        }
        Err(Error::CapExceeded {
            what: "open backdoor path search",
            cap: PATH_SEARCH_BUDGET,
            count: (PATH_SEARCH_BUDGET - budget) as u128,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        v: usize,
        mark: Mark,
        y: usize,
        z: &[u64],
        anc_z: &[u64],
        on_path: &mut [u64],
        verts: &mut Vec<usize>,
        marks: &mut Vec<Mark>,
        budget: &mut u64,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        verts.push(v);
        marks.push(mark);
        if v == y {
            return true;
        }
        bits::set(on_path, v);
        let in_z = bits::get(z, v);
        // Continuing through `v` forward (v -> next) or backward (v <- next).
        let arrived_into_v = mark == Mark::Forward;
        let next: Vec<(usize, Mark)> = bits::ones(self.g.children(v))
            .map(|c| (c, Mark::Forward))
            .chain(bits::ones(self.g.parents(v)).map(|p| (p, Mark::Backward)))
            .collect();
        for (w, m) in next {
            if bits::get(on_path, w) {
                continue;
            }
            let collider = arrived_into_v && m == Mark::Backward;
            let open = if collider { bits::get(anc_z, v) } else { !in_z };
            if open && self.extend(w, m, y, z, anc_z, on_path, verts, marks, budget) {
                return true;
            }
        }
        bits::clear(on_path, v);
        verts.pop();
        marks.pop();
        false
    }
}
