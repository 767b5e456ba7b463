//! JSON documents for graphs and linear models.
//!
//! ```json
//! {"kind": "scg", "nodes": ["X", "Y"], "edges": [["X", "Y"]], "both": [["X", "X"]]}
//! {"kind": "escg", "nodes": ["X", "Y"], "lagged": [["X", "Y"]], "instantaneous": []}
//! {"kind": "ftcg", "nodes": ["X", "Y"], "gamma_max": 2, "edges": [["X", "Y", 1]]}
//! {"kind": "dscm", "nodes": ["X", "Y"], "gamma_max": 1, "edges": [["X", "Y", 1, 0.5]],
//!  "noise_std": [1.0, 1.0]}
//! ```
//!
//! Syntax and type errors carry a line and column; semantic errors carry
//! the JSON path of the offending entry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{Escg, Ftcg, Graph, Scg, SeriesId};
use crate::sim::LinearDscm;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScgDoc {
    #[serde(rename = "kind")]
    _kind: String,
    nodes: Vec<String>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    both: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EscgDoc {
    #[serde(rename = "kind")]
    _kind: String,
    nodes: Vec<String>,
    #[serde(default)]
    lagged: Vec<(String, String)>,
    #[serde(default)]
    instantaneous: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FtcgDoc {
    #[serde(rename = "kind")]
    _kind: String,
    nodes: Vec<String>,
    gamma_max: u32,
    #[serde(default)]
    edges: Vec<(String, String, u32)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DscmDoc {
    #[serde(rename = "kind")]
    _kind: String,
    nodes: Vec<String>,
    gamma_max: u32,
    #[serde(default)]
    edges: Vec<(String, String, u32, f64)>,
    #[serde(default)]
    noise_std: Option<Vec<f64>>,
}

/// A parsed document: a graph, or a fully specified linear model.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Graph(Graph),
    Model(LinearDscm),
}

fn syntax(e: serde_json::Error) -> Error {
    Error::Parse {
        position: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}

fn at(position: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        position: position.into(),
        message: message.into(),
    }
}

fn nodes(list: &[String]) -> Result<Vec<SeriesId>> {
    let mut out = Vec::with_capacity(list.len());
    for (i, name) in list.iter().enumerate() {
        let id = SeriesId::new(name.clone()).map_err(|e| at(format!("nodes[{i}]"), e.to_string()))?;
        if out.contains(&id) {
            return Err(at(format!("nodes[{i}]"), format!("duplicate node `{name}`")));
        }
        out.push(id);
    }
    Ok(out)
}

fn endpoint(known: &[SeriesId], name: &str, path: String) -> Result<SeriesId> {
    known
        .iter()
        .find(|s| s.as_str() == name)
        .cloned()
        .ok_or_else(|| at(path, format!("edge endpoint `{name}` is not a declared node")))
}

fn pairs(known: &[SeriesId], list: &[(String, String)], field: &str) -> Result<Vec<(SeriesId, SeriesId)>> {
    list.iter()
        .enumerate()
        .map(|(i, (a, b))| {
            Ok((
                endpoint(known, a, format!("{field}[{i}][0]"))?,
                endpoint(known, b, format!("{field}[{i}][1]"))?,
            ))
        })
        .collect()
}

fn graph_error(field: &str, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => at(field, other.to_string()),
    }
}

/// Parses any document kind.
pub fn parse_document(text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(text).map_err(syntax)?;
    let Some(kind) = value.get("kind") else {
        return Err(at("kind", "missing top-level \"kind\""));
    };
    let Some(kind) = kind.as_str() else {
        return Err(at("kind", "\"kind\" must be a string"));
    };
    match kind {
        "scg" => {
            let d: ScgDoc = serde_json::from_str(text).map_err(syntax)?;
            let ns = nodes(&d.nodes)?;
            let mut edges = pairs(&ns, &d.edges, "edges")?;
            for (a, b) in pairs(&ns, &d.both, "both")? {
                edges.push((b.clone(), a.clone()));
                edges.push((a, b));
            }
            Ok(Document::Graph(Graph::Scg(
                Scg::new(ns, edges).map_err(|e| graph_error("edges", e))?,
            )))
        }
        "escg" => {
            let d: EscgDoc = serde_json::from_str(text).map_err(syntax)?;
            let ns = nodes(&d.nodes)?;
            let lagged = pairs(&ns, &d.lagged, "lagged")?;
            let inst = pairs(&ns, &d.instantaneous, "instantaneous")?;
            Ok(Document::Graph(Graph::Escg(
                Escg::new(ns, lagged, inst).map_err(|e| graph_error("instantaneous", e))?,
            )))
        }
        "ftcg" => {
            let d: FtcgDoc = serde_json::from_str(text).map_err(syntax)?;
            Ok(Document::Graph(Graph::Ftcg(ftcg_from(&d.nodes, d.gamma_max, d.edges.iter().map(|(a, b, l)| (a, b, *l)))?)))
        }
        "dscm" => {
            let d: DscmDoc = serde_json::from_str(text).map_err(syntax)?;
            let f = ftcg_from(&d.nodes, d.gamma_max, d.edges.iter().map(|(a, b, l, _)| (a, b, *l)))?;
            let mut coeffs = BTreeMap::new();
            for (i, (a, b, l, c)) in d.edges.iter().enumerate() {
                let key = (SeriesId::new(a.clone())?, SeriesId::new(b.clone())?, *l);
                if coeffs.insert(key, *c).is_some() {
                    return Err(at(format!("edges[{i}]"), "duplicate edge"));
                }
            }
            // Noise scales follow the declared node order; the model stores
            // them in sorted series order.
            let noise = match d.noise_std {
                Some(v) => {
                    if v.len() != d.nodes.len() {
                        return Err(at("noise_std", "one entry per node is required"));
                    }
                    let mut sorted = vec![0.0; v.len()];
                    for (name, s) in d.nodes.iter().zip(&v) {
                        sorted[f.index_of(name)?] = *s;
                    }
                    sorted
                }
                None => vec![1.0; f.len()],
            };
            Ok(Document::Model(
                LinearDscm::new(f, coeffs, noise).map_err(|e| at("edges", e.to_string()))?,
            ))
        }
        other => Err(at("kind", format!("unknown kind `{other}` (expected scg, escg, ftcg or dscm)"))),
    }
}

fn ftcg_from<'a>(names: &[String], gamma_max: u32, edges: impl Iterator<Item = (&'a String, &'a String, u32)>) -> Result<Ftcg> {
    let ns = nodes(names)?;
    let mut triples = Vec::new();
    for (i, (a, b, l)) in edges.enumerate() {
        let a = endpoint(&ns, a, format!("edges[{i}][0]"))?;
        let b = endpoint(&ns, b, format!("edges[{i}][1]"))?;
        if l > gamma_max {
            return Err(at(format!("edges[{i}][2]"), format!("lag {l} exceeds gamma_max {gamma_max}")));
        }
        if a == b && l == 0 {
            return Err(at(format!("edges[{i}]"), format!("instantaneous self-edge on `{a}`")));
        }
        triples.push((a, b, l));
    }
    Ftcg::new(ns, gamma_max, triples).map_err(|e| graph_error("edges", e))
}

/// Parses a graph document; model documents are rejected.
pub fn parse_graph(text: &str) -> Result<Graph> {
    match parse_document(text)? {
        Document::Graph(g) => Ok(g),
        Document::Model(_) => Err(at("kind", "expected a graph, found a dscm model")),
    }
}

fn names(ids: &[SeriesId]) -> Vec<&str> {
    ids.iter().map(|s| s.as_str()).collect()
}

fn pair_list(edges: &[(SeriesId, SeriesId)]) -> Vec<[&str; 2]> {
    edges.iter().map(|(a, b)| [a.as_str(), b.as_str()]).collect()
}

#[derive(Serialize)]
struct ScgOut<'a> {
    kind: &'static str,
    nodes: Vec<&'a str>,
    edges: Vec<[&'a str; 2]>,
}

#[derive(Serialize)]
struct EscgOut<'a> {
    kind: &'static str,
    nodes: Vec<&'a str>,
    lagged: Vec<[&'a str; 2]>,
    instantaneous: Vec<[&'a str; 2]>,
}

#[derive(Serialize)]
struct FtcgOut<'a> {
    kind: &'static str,
    nodes: Vec<&'a str>,
    gamma_max: u32,
    edges: Vec<(&'a str, &'a str, u32)>,
}

#[derive(Serialize)]
struct DscmOut<'a> {
    kind: &'static str,
    nodes: Vec<&'a str>,
    gamma_max: u32,
    edges: Vec<(&'a str, &'a str, u32, f64)>,
    noise_std: &'a [f64],
}

/// Canonical JSON: nodes and edges sorted, bidirectional links as two pairs.
pub fn emit_graph(g: &Graph) -> String {
    let text = match g {
        Graph::Scg(s) => {
            let edges = s.edges();
            serde_json::to_string_pretty(&ScgOut {
                kind: "scg",
                nodes: names(s.nodes()),
                edges: pair_list(&edges),
            })
        }
        Graph::Escg(e) => {
            let lagged = e.lagged_edges();
            let inst = e.instantaneous_edges();
            serde_json::to_string_pretty(&EscgOut {
                kind: "escg",
                nodes: names(e.series()),
                lagged: pair_list(&lagged),
                instantaneous: pair_list(&inst),
            })
        }
        Graph::Ftcg(f) => {
            let edges = f.edges();
            serde_json::to_string_pretty(&FtcgOut {
                kind: "ftcg",
                nodes: names(f.series()),
                gamma_max: f.gamma_max(),
                edges: edges.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)).collect(),
            })
        }
    };
    text.expect("documents serialize") + "\n"
}

pub fn emit_model(m: &LinearDscm) -> String {
    let f = m.ftcg();
    let out = DscmOut {
        kind: "dscm",
        nodes: names(f.series()),
        gamma_max: f.gamma_max(),
        edges: m
            .coefficients()
            .iter()
            .map(|((a, b, l), c)| (a.as_str(), b.as_str(), *l, *c))
            .collect(),
        noise_std: m.noise_std(),
    };
    serde_json::to_string_pretty(&out).expect("documents serialize") + "\n"
}
