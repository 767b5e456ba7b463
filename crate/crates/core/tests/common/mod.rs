#![allow(dead_code)]

use std::path::PathBuf;

use tsident::io::parse_graph;
use tsident::{Escg, Graph, Scg, SeriesId};

pub const NAMES: [&str; 3] = ["X", "Y", "Z"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Graph {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_graph(&text).expect("fixture parses")
}

pub fn fixture_scg(name: &str) -> Scg {
    match fixture(name) {
        Graph::Scg(s) => s,
        other => panic!("{name} is a {} document", other.kind()),
    }
}

fn ids(k: usize) -> Vec<SeriesId> {
    NAMES[..k].iter().map(|s| SeriesId::new(*s).unwrap()).collect()
}

/// The SCG on `k` labeled nodes whose edge `(i, j)` is present when bit
/// `i * k + j` of `mask` is set.
pub fn scg_from_mask(k: usize, mask: u32) -> Scg {
    let nodes = ids(k);
    let mut edges = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if mask >> (i * k + j) & 1 == 1 {
                edges.push((nodes[i].clone(), nodes[j].clone()));
            }
        }
    }
    Scg::new(nodes, edges).unwrap()
}

pub fn all_scgs(k: usize) -> impl Iterator<Item = Scg> {
    (0..1u32 << (k * k)).map(move |m| scg_from_mask(k, m))
}

/// Every ESCG on `k` series: all lagged edge sets crossed with every
/// acyclic instantaneous edge set.
pub fn all_escgs(k: usize) -> Vec<Escg> {
    let nodes = ids(k);
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    for lag in 0..1u32 << (k * k) {
        let lagged: Vec<(SeriesId, SeriesId)> = (0..k * k)
            .filter(|b| lag >> b & 1 == 1)
            .map(|b| (nodes[b / k].clone(), nodes[b % k].clone()))
            .collect();
        for inst in 0..1u32 << pairs.len() {
            let ie: Vec<(SeriesId, SeriesId)> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| inst >> b & 1 == 1)
                .map(|(_, &(i, j))| (nodes[i].clone(), nodes[j].clone()))
                .collect();
            if let Ok(e) = Escg::new(nodes.clone(), lagged.clone(), ie) {
                out.push(e);
            }
        }
    }
    out
}

pub fn ordered_pairs(k: usize) -> Vec<(&'static str, &'static str)> {
    let mut out = Vec::new();
    for x in &NAMES[..k] {
        for y in &NAMES[..k] {
            if x != y {
                out.push((*x, *y));
            }
        }
    }
    out
}
