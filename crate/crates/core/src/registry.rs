//! Identification strategies selectable by name.

use crate::error::{Error, Result};
use crate::escg::identify_escg;
use crate::graph::{Graph, GraphKind};
use crate::query::{Query, Verdict};
use crate::scg::{identify_scg, identify_scg_v2};

pub trait Identifier {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn accepts(&self, kind: GraphKind) -> bool;
    fn identify(&self, g: &Graph, q: &Query) -> Result<Verdict>;
}

struct EscgIdentifier;
struct ScgIdentifier;
struct ScgV2Identifier;

impl Identifier for EscgIdentifier {
    fn name(&self) -> &'static str {
        "escg"
    }

    fn describe(&self) -> &'static str {
        "adjust for every possible parent of the treatment (extended summary graphs)"
    }

    fn accepts(&self, kind: GraphKind) -> bool {
        matches!(kind, GraphKind::Escg | GraphKind::Ftcg)
    }

    fn identify(&self, g: &Graph, q: &Query) -> Result<Verdict> {
        match g {
            Graph::Escg(e) => identify_escg(e, q),
            Graph::Ftcg(f) => identify_escg(&f.to_escg(), q),
            Graph::Scg(_) => Err(unsupported(self, g)),
        }
    }
}

fn summary_of(g: &Graph) -> crate::graph::Scg {
    match g {
        Graph::Scg(s) => s.clone(),
        Graph::Escg(e) => e.to_scg(),
        Graph::Ftcg(f) => f.to_scg(),
    }
}

impl Identifier for ScgIdentifier {
    fn name(&self) -> &'static str {
        "scg"
    }

    fn describe(&self) -> &'static str {
        "obstruction conditions on the summary graph"
    }

    fn accepts(&self, _: GraphKind) -> bool {
        true
    }

    fn identify(&self, g: &Graph, q: &Query) -> Result<Verdict> {
        identify_scg(&summary_of(g), q)
    }
}

impl Identifier for ScgV2Identifier {
    fn name(&self) -> &'static str {
        "scg-v2"
    }

    fn describe(&self) -> &'static str {
        "positive formulation of the summary graph conditions"
    }

    fn accepts(&self, _: GraphKind) -> bool {
        true
    }

    fn identify(&self, g: &Graph, q: &Query) -> Result<Verdict> {
        identify_scg_v2(&summary_of(g), q)
    }
}

fn unsupported(id: &dyn Identifier, g: &Graph) -> Error {
    Error::InvalidInput(format!(
        "method `{}` does not accept {} documents",
        id.name(),
        g.kind()
    ))
}

pub struct Registry {
    entries: Vec<Box<dyn Identifier>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(EscgIdentifier));
        r.register(Box::new(ScgIdentifier));
        r.register(Box::new(ScgV2Identifier));
        r
    }

    /// Adds a strategy, replacing any with the same name.
    pub fn register(&mut self, id: Box<dyn Identifier>) {
        self.entries.retain(|e| e.name() != id.name());
        self.entries.push(id);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Identifier> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown method `{name}` (available: {})",
                    self.names().join(", ")
                ))
            })
    }

    /// `escg` for extended summary and full-time graphs, `scg` otherwise.
    pub fn default_for(&self, kind: GraphKind) -> Result<&dyn Identifier> {
        match kind {
            GraphKind::Scg => self.get("scg"),
            GraphKind::Escg | GraphKind::Ftcg => self.get("escg"),
        }
    }

    pub fn identify(&self, method: Option<&str>, g: &Graph, q: &Query) -> Result<Verdict> {
        let id = match method {
            Some(m) => self.get(m)?,
            None => self.default_for(g.kind())?,
        };
        if !id.accepts(g.kind()) {
            return Err(unsupported(id, g));
        }
        id.identify(g, q)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::standard()
    }
}
