//! Queries, adjustment sets and verdicts.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{Cycle, SeriesId, TimedVertex};
use crate::path::MarkedPath;

/// The total effect of `x` at time `t - gamma` on `y` at time `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub x: SeriesId,
    pub y: SeriesId,
    pub gamma: u32,
    pub gamma_max: u32,
}

impl Query {
    pub fn new(x: SeriesId, y: SeriesId, gamma: u32, gamma_max: u32) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidQuery(format!(
                "treatment and response must be different series (both `{x}`)"
            )));
        }
        if gamma_max == 0 {
            return Err(Error::InvalidQuery("gamma_max must be at least 1".into()));
        }
        Ok(Query {
            x,
            y,
            gamma,
            gamma_max,
        })
    }

    pub fn from_names(x: &str, y: &str, gamma: u32, gamma_max: u32) -> Result<Self> {
        Query::new(SeriesId::new(x)?, SeriesId::new(y)?, gamma, gamma_max)
    }

    pub fn treatment(&self) -> TimedVertex {
        TimedVertex::new(self.x.clone(), -(self.gamma as i64))
    }

    pub fn response(&self) -> TimedVertex {
        TimedVertex::new(self.y.clone(), 0)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P({}_t | do({}))", self.y, self.treatment())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdjustmentSet(BTreeSet<TimedVertex>);

impl AdjustmentSet {
    pub fn new(members: impl IntoIterator<Item = TimedVertex>) -> Self {
        AdjustmentSet(members.into_iter().collect())
    }

    pub fn members(&self) -> &BTreeSet<TimedVertex> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &TimedVertex) -> bool {
        self.0.contains(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TimedVertex> {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &AdjustmentSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Rejects sets containing the treatment, the response or a future vertex.
    pub fn validate_for(&self, q: &Query) -> Result<()> {
        if self.contains(&q.treatment()) || self.contains(&q.response()) {
            return Err(Error::InvalidInput(
                "adjustment set may not contain the treatment or the response".into(),
            ));
        }
        if let Some(v) = self.iter().find(|v| v.time > 0) {
            return Err(Error::InvalidInput(format!("{v} lies after the response")));
        }
        Ok(())
    }
}

impl FromIterator<TimedVertex> for AdjustmentSet {
    fn from_iter<I: IntoIterator<Item = TimedVertex>>(iter: I) -> Self {
        AdjustmentSet::new(iter)
    }
}

impl fmt::Display for AdjustmentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// An adjustment set together with its closed-form name (`B`, `A`, `A'`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedSet {
    pub name: &'static str,
    pub set: AdjustmentSet,
}

/// Why the sufficient conditions do not cover a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// A cycle of at least two vertices through X once Y is removed.
    Condition1 { cycle: Cycle },
    /// A longer σ-active backdoor path through descendants of X.
    Condition2a { path: MarkedPath<SeriesId> },
    /// A direct backdoor adjacency with `gamma != 1`.
    Condition2b { path: MarkedPath<SeriesId> },
    /// A direct backdoor adjacency with `gamma = 1` and another cycle on Y.
    Condition2c { path: MarkedPath<SeriesId>, cycle: Cycle },
}

impl Witness {
    pub fn condition(&self) -> &'static str {
        match self {
            Witness::Condition1 { .. } => "1",
            Witness::Condition2a { .. } => "2a",
            Witness::Condition2b { .. } => "2b",
            Witness::Condition2c { .. } => "2c",
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Condition1 { cycle } => write!(f, "condition 1: cycle {cycle}"),
            Witness::Condition2a { path } => write!(f, "condition 2a: path {path}"),
            Witness::Condition2b { path } => write!(f, "condition 2b: path {path}"),
            Witness::Condition2c { path, cycle } => {
                write!(f, "condition 2c: path {path}, cycle {cycle}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VerdictKind {
    IdentifiableTrivial,
    IdentifiableByAdjustment,
    NotCovered,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::IdentifiableTrivial => "identifiable_trivial",
            VerdictKind::IdentifiableByAdjustment => "identifiable_by_adjustment",
            VerdictKind::NotCovered => "not_covered_by_sufficient_conditions",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// X is not an ancestor of Y: the effect equals `P(y_t)`.
    Trivial,
    Adjustment(Vec<NamedSet>),
    /// The sufficient conditions are silent; this is not a proof of
    /// non-identifiability.
    NotCovered(Witness),
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Trivial => VerdictKind::IdentifiableTrivial,
            Verdict::Adjustment(_) => VerdictKind::IdentifiableByAdjustment,
            Verdict::NotCovered(_) => VerdictKind::NotCovered,
        }
    }

    pub fn is_identifiable(&self) -> bool {
        !matches!(self, Verdict::NotCovered(_))
    }

    pub fn sets(&self) -> &[NamedSet] {
        match self {
            Verdict::Adjustment(s) => s,
            _ => &[],
        }
    }

    pub fn set(&self, name: &str) -> Option<&AdjustmentSet> {
        self.sets().iter().find(|s| s.name == name).map(|s| &s.set)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::NotCovered(w) => Some(w),
            _ => None,
        }
    }
}
