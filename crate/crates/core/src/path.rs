//! Paths with edge marks, backdoor and blocking predicates.
//!
//! Simple-path enumeration is exponential in general; every enumeration
//! takes an explicit cap and fails loudly when it is exceeded.

use std::collections::BTreeSet;
use std::fmt;

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::graph::{Scg, SeriesId};

pub const DEFAULT_PATH_CAP: u64 = 100_000;

/// Orientation of the adjacency between two consecutive path vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mark {
    /// `a -> b`
    Forward,
    /// `a <- b`
    Backward,
    /// `a <-> b`, both directions present (summary graphs only).
    Both,
}

impl Mark {
    pub fn symbol(self) -> &'static str {
        match self {
            Mark::Forward => "->",
            Mark::Backward => "<-",
            Mark::Both => "<->",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarkedPath<V> {
    vertices: Vec<V>,
    marks: Vec<Mark>,
}

impl<V: PartialEq> MarkedPath<V> {
    pub fn new(vertices: Vec<V>, marks: Vec<Mark>) -> Result<Self> {
        if vertices.is_empty() || marks.len() + 1 != vertices.len() {
            return Err(Error::InvalidInput(
                "a path needs one mark between each pair of vertices".into(),
            ));
        }
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].contains(v) {
                return Err(Error::InvalidInput("path vertices must be distinct".into()));
            }
        }
        Ok(MarkedPath { vertices, marks })
    }
}

impl<V> MarkedPath<V> {
    pub fn vertices(&self) -> &[V] {
        &self.vertices
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    /// Number of vertices (the `n` of the identification conditions).
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn interior(&self) -> &[V] {
        let n = self.vertices.len();
        if n < 2 {
            &[]
        } else {
            &self.vertices[1..n - 1]
        }
    }

    /// Interior positions where the path has `-> v <-` exactly.
    pub fn strict_colliders(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.vertices.len().saturating_sub(1))
            .filter(|&i| self.marks[i - 1] == Mark::Forward && self.marks[i] == Mark::Backward)
    }

    pub fn map<W>(&self, f: impl Fn(&V) -> W) -> MarkedPath<W> {
        MarkedPath {
            vertices: self.vertices.iter().map(f).collect(),
            marks: self.marks.clone(),
        }
    }
}

impl<V: fmt::Display> fmt::Display for MarkedPath<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.vertices[0])?;
        for (m, v) in self.marks.iter().zip(&self.vertices[1..]) {
            write!(f, " {} {}", m.symbol(), v)?;
        }
        Ok(())
    }
}

/// A graph whose simple paths can be enumerated.
pub trait PathGraph {
    type Vertex: Clone + Ord + fmt::Display;

    fn vertex_count(&self) -> usize;
    fn vertex(&self, i: usize) -> Self::Vertex;
    fn locate(&self, v: &Self::Vertex) -> Result<usize>;
    /// The mark from `i` to `j`, if adjacent. Self-adjacency is ignored.
    fn link(&self, i: usize, j: usize) -> Option<Mark>;
}

impl PathGraph for Scg {
    type Vertex = SeriesId;

    fn vertex_count(&self) -> usize {
        self.len()
    }

    fn vertex(&self, i: usize) -> SeriesId {
        self.nodes()[i].clone()
    }

    fn locate(&self, v: &SeriesId) -> Result<usize> {
        self.index_of(v.as_str())
    }

    fn link(&self, i: usize, j: usize) -> Option<Mark> {
        if i == j {
            return None;
        }
        match (self.has_edge_idx(i, j), self.has_edge_idx(j, i)) {
            (true, true) => Some(Mark::Both),
            (true, false) => Some(Mark::Forward),
            (false, true) => Some(Mark::Backward),
            (false, false) => None,
        }
    }
}

impl<V: Ord + Clone + fmt::Display> PathGraph for Dag<V> {
    type Vertex = V;

    fn vertex_count(&self) -> usize {
        self.len()
    }

    fn vertex(&self, i: usize) -> V {
        self.label(i).clone()
    }

    fn locate(&self, v: &V) -> Result<usize> {
        self.index_of(v)
    }

    fn link(&self, i: usize, j: usize) -> Option<Mark> {
        if self.has_edge_idx(i, j) {
            Some(Mark::Forward)
        } else if self.has_edge_idx(j, i) {
            Some(Mark::Backward)
        } else {
            None
        }
    }
}

/// All simple paths between `from` and `to`, in DFS order over vertex
/// indices.
pub fn enumerate_simple_paths<G: PathGraph>(
    g: &G,
    from: &G::Vertex,
    to: &G::Vertex,
    cap: u64,
) -> Result<Vec<MarkedPath<G::Vertex>>> {
    let mut out = Vec::new();
    for_each_simple_path(g, from, to, cap, |p| {
        out.push(p);
        true
    })?;
    Ok(out)
}

/// Streams simple paths to `visit` until it returns false. Counts toward
/// the cap every path produced.
pub fn for_each_simple_path<G: PathGraph>(
    g: &G,
    from: &G::Vertex,
    to: &G::Vertex,
    cap: u64,
    mut visit: impl FnMut(MarkedPath<G::Vertex>) -> bool,
) -> Result<()> {
    let s = g.locate(from)?;
    let t = g.locate(to)?;
    if s == t {
        return Err(Error::InvalidInput("path endpoints must differ".into()));
    }
    let n = g.vertex_count();
    let mut on_path = vec![false; n];
    on_path[s] = true;
    let mut verts = vec![s];
    let mut marks: Vec<Mark> = Vec::new();
    // Explicit stack of next-neighbour cursors.
    let mut cursor = vec![0usize];
    let mut count = 0u64;
    while let Some(c) = cursor.last_mut() {
        let v = *verts.last().unwrap();
        if *c >= n {
            cursor.pop();
            verts.pop();
            marks.pop();
            on_path[v] = false;
            continue;
        }
        let w = *c;
        *c += 1;
        if on_path[w] {
            continue;
        }
        let Some(m) = g.link(v, w) else { continue };
        if w == t {
            count += 1;
            if count > cap {
                return Err(Error::CapExceeded {
                    what: "simple path enumeration",
                    cap,
                    count: count as u128,
                });
            }
            let mut vs: Vec<G::Vertex> = verts.iter().map(|&i| g.vertex(i)).collect();
            vs.push(g.vertex(t));
            let mut ms = marks.clone();
            ms.push(m);
            if !visit(MarkedPath { vertices: vs, marks: ms }) {
                return Ok(());
            }
            continue;
        }
        on_path[w] = true;
        verts.push(w);
        marks.push(m);
        cursor.push(0);
    }
    Ok(())
}

/// True when the path enters its first vertex through an arrowhead.
pub fn is_backdoor<V>(p: &MarkedPath<V>) -> bool {
    matches!(p.marks.first(), Some(Mark::Backward | Mark::Both))
}

/// σ-activity given the empty set: only a strict `-> v <-` blocks.
pub fn is_sigma_active_empty<V>(p: &MarkedPath<V>) -> bool {
    p.strict_colliders().next().is_none()
}

/// Blocking in an acyclic graph: some non-collider is in `z`, or some
/// collider has no descendant in `z`.
pub fn is_blocked_dag<V: Ord + Clone + fmt::Display>(
    p: &MarkedPath<V>,
    z: &BTreeSet<V>,
    g: &Dag<V>,
) -> Result<bool> {
    let (first, last) = (&p.vertices[0], &p.vertices[p.len() - 1]);
    if z.contains(first) || z.contains(last) {
        return Err(Error::InvalidInput(
            "conditioning set contains a path endpoint".into(),
        ));
    }
    for i in 1..p.len().saturating_sub(1) {
        let v = &p.vertices[i];
        let collider = p.marks[i - 1] == Mark::Forward && p.marks[i] == Mark::Backward;
        if collider {
            let desc = g.descendants(v)?;
            if desc.is_disjoint(z) {
                return Ok(true);
            }
        } else if z.contains(v) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// d-separation by exhaustive path enumeration.
pub fn d_separated<V: Ord + Clone + fmt::Display>(
    g: &Dag<V>,
    a: &V,
    b: &V,
    z: &BTreeSet<V>,
    cap: u64,
) -> Result<bool> {
    if z.contains(a) || z.contains(b) {
        return Err(Error::InvalidInput(
            "conditioning set contains an endpoint".into(),
        ));
    }
    let mut separated = true;
    let mut failure = None;
    for_each_simple_path(g, a, b, cap, |p| match is_blocked_dag(&p, z, g) {
        Ok(true) => true,
        Ok(false) => {
            separated = false;
            false
        }
        Err(e) => {
            failure = Some(e);
            false
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(separated),
    }
}
