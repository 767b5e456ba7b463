use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tsident::graph::{parse_time_offset, time_offset};
use tsident::io::{self, Document};
use tsident::oracle::{self, Caps, SetCheck};
use tsident::sim::{self, Estimate, LinearDscm};
use tsident::{
    Abstraction, AdjustmentSet, Backdoor, Cycle, Error, Graph, MarkedPath, Query, Registry, SeriesId,
    TimedVertex, Verdict, Window, Witness,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const BIAS_SE: f64 = 5.0;

#[derive(Parser)]
#[command(name = "tsident", version, about = "Identifiability of total effects in time-series causal graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide identifiability and print the adjustment sets or the obstruction.
    Identify(IdentifyArgs),
    /// Check the closed-form sets over every candidate full-time graph.
    Oracle(OracleArgs),
    /// Simulate a linear-Gaussian model and compare estimates with the truth.
    Simulate(SimulateArgs),
    /// Derive a coarser graph (ftcg -> escg -> scg) or canonicalize a document.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct QueryArgs {
    /// Document path.
    file: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long, allow_negative_numbers = true)]
    gamma: u32,
    /// Defaults to the graph's own bound for ftcg documents, else max(gamma, 1).
    #[arg(long, allow_negative_numbers = true)]
    gamma_max: Option<u32>,
    /// Identification method: escg, scg or scg-v2.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct IdentifyArgs {
    #[command(flatten)]
    query: QueryArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Window depth: times t-DEPTH..t.
    #[arg(long, allow_negative_numbers = true)]
    window: Option<u32>,
    /// Also search exhaustively for any common adjustment set.
    #[arg(long)]
    search_set: bool,
    /// CANDIDATES[,SUBSETS]
    #[arg(long)]
    caps: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value_t = 200_000, allow_negative_numbers = true)]
    samples: usize,
    /// Overridden by the ID_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the observational series here.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Extra adjustment sets such as `Z[t-1],W[t-2]`; repeatable, `{}` for none.
    #[arg(long)]
    adjust: Vec<String>,
}

#[derive(Args)]
struct ConvertArgs {
    file: PathBuf,
    /// Target kind; defaults to the input kind.
    #[arg(long, value_enum)]
    to: Option<Target>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Scg,
    Escg,
    Ftcg,
}

/// Outcome of a command: the rendered report and its exit code.
struct Outcome {
    text: String,
    code: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let resource = e.downcast_ref::<Error>().is_some_and(Error::is_resource);
            ExitCode::from(if resource { 3 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Identify(a) => identify(&a),
        Command::Oracle(a) => run_oracle(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Convert(a) => convert(&a),
    }
}

fn read_document(path: &Path) -> anyhow::Result<Document> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    io::parse_document(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_graph(path: &Path) -> anyhow::Result<Graph> {
    match read_document(path)? {
        Document::Graph(g) => Ok(g),
        Document::Model(_) => bail!("{} holds a model, not a graph", path.display()),
    }
}

fn build_query(a: &QueryArgs, g: &Graph) -> anyhow::Result<Query> {
    for name in [&a.x, &a.y] {
        if !g.series().iter().any(|s| s.as_str() == name) {
            bail!("unknown node `{name}`");
        }
    }
    let gamma_max = match (a.gamma_max, g) {
        (Some(m), _) => m,
        (None, Graph::Ftcg(f)) => f.gamma_max(),
        (None, _) => a.gamma.max(1),
    };
    Ok(Query::from_names(&a.x, &a.y, a.gamma, gamma_max)?)
}

fn method_name(registry: &Registry, a: &QueryArgs, g: &Graph) -> anyhow::Result<&'static str> {
    Ok(match &a.method {
        Some(m) => registry.get(m)?.name(),
        None => registry.default_for(g.kind())?.name(),
    })
}

fn vertex_json(v: &TimedVertex) -> Value {
    json!({ "series": v.series.as_str(), "time": time_offset(v.time) })
}

fn set_json(z: &AdjustmentSet) -> Value {
    Value::Array(z.iter().map(vertex_json).collect())
}

fn path_json<V: std::fmt::Display>(p: &MarkedPath<V>) -> Value {
    json!({
        "vertices": p.vertices().iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "marks": p.marks().iter().map(|m| m.symbol()).collect::<Vec<_>>(),
        "text": p.to_string(),
    })
}

fn cycle_json(c: &Cycle) -> Value {
    Value::Array(c.vertices().iter().map(|s| json!(s.as_str())).collect())
}

fn witness_json(w: &Witness) -> Value {
    let mut obj = json!({ "condition": w.condition(), "text": w.to_string() });
    match w {
        Witness::Condition1 { cycle } => obj["cycle"] = cycle_json(cycle),
        Witness::Condition2a { path } | Witness::Condition2b { path } => obj["path"] = path_json(path),
        Witness::Condition2c { path, cycle } => {
            obj["path"] = path_json(path);
            obj["cycle"] = cycle_json(cycle);
        }
    }
    obj
}

fn query_json(q: &Query) -> Value {
    json!({
        "x": q.x.as_str(),
        "y": q.y.as_str(),
        "gamma": q.gamma,
        "gamma_max": q.gamma_max,
        "text": q.to_string(),
    })
}

fn verdict_json(v: &Verdict) -> Value {
    let sets: serde_json::Map<String, Value> = v
        .sets()
        .iter()
        .map(|s| (s.name.to_string(), set_json(&s.set)))
        .collect();
    json!({
        "kind": v.kind().as_str(),
        "identifiable": v.is_identifiable(),
        "sets": sets,
        "witness": v.witness().map(witness_json),
    })
}

fn render(format: Format, value: Value, text: String, code: u8) -> Outcome {
    let text = match format {
        Format::Text => text,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("json values serialize");
            s.push('\n');
            s
        }
    };
    Outcome { text, code }
}

fn verdict_text(v: &Verdict) -> String {
    let mut out = format!("verdict: {}\n", v.kind().as_str());
    for s in v.sets() {
        out += &format!("{} = {}\n", s.name, s.set);
    }
    if let Some(w) = v.witness() {
        out += &format!("witness: {w}\n");
    }
    out
}

fn identify(a: &IdentifyArgs) -> anyhow::Result<Outcome> {
    let a = &a.query;
    let g = read_graph(&a.file)?;
    let q = build_query(a, &g)?;
    let registry = Registry::standard();
    let method = method_name(&registry, a, &g)?;
    let v = registry.identify(Some(method), &g, &q)?;
    let value = json!({
        "command": "identify",
        "version": VERSION,
        "graph_kind": g.kind().to_string(),
        "method": method,
        "query": query_json(&q),
        "verdict": verdict_json(&v),
    });
    let text = format!("query: {q} (gamma_max {}, method {method})\n{}", q.gamma_max, verdict_text(&v));
    let code = if v.is_identifiable() { 0 } else { 2 };
    Ok(render(a.format, value, text, code))
}

fn parse_caps(text: Option<&str>) -> anyhow::Result<Caps> {
    let mut caps = Caps::default();
    if let Some(t) = text {
        let mut parts = t.split(',');
        let mut next = |what: &str| -> anyhow::Result<Option<u64>> {
            parts
                .next()
                .map(|p| p.trim().parse::<u64>().with_context(|| format!("bad {what} cap `{p}`")))
                .transpose()
        };
        caps.candidates = next("candidate")?.ok_or_else(|| anyhow!("empty --caps"))?;
        if let Some(s) = next("subset")? {
            caps.subsets = s;
        }
        if parts.next().is_some() {
            bail!("--caps takes at most two values");
        }
    }
    Ok(caps)
}

fn abstraction_of(g: &Graph) -> Abstraction {
    match g {
        Graph::Scg(s) => Abstraction::Scg(s.clone()),
        Graph::Escg(e) => Abstraction::Escg(e.clone()),
        Graph::Ftcg(f) => Abstraction::Escg(f.to_escg()),
    }
}

fn violation_json(c: &SetCheck) -> Value {
    match &c.counterexample {
        None => Value::Null,
        Some(ce) => {
            let (kind, detail) = match &ce.violation {
                Backdoor::Valid => ("none", Value::Null),
                Backdoor::Descendant(v) => ("descendant", vertex_json(v)),
                Backdoor::OpenPath(p) => ("open_path", path_json(p)),
            };
            let edges: Vec<Value> = ce
                .candidate
                .edges()
                .iter()
                .map(|(a, b, l)| json!([a.as_str(), b.as_str(), l]))
                .collect();
            json!({ "index": ce.index, "kind": kind, "detail": detail, "candidate_edges": edges })
        }
    }
}

fn violation_text(name: &str, c: &SetCheck, candidates: u64) -> String {
    match &c.counterexample {
        None => format!("{name} valid in all {candidates} candidates\n"),
        Some(ce) => {
            let why = match &ce.violation {
                Backdoor::Valid => "no violation".to_string(),
                Backdoor::Descendant(v) => format!("{v} is a descendant of the treatment"),
                Backdoor::OpenPath(p) => format!("open backdoor path {p}"),
            };
            let edges: Vec<String> = ce
                .candidate
                .edges()
                .iter()
                .map(|(a, b, l)| format!("{a}->{b}@{l}"))
                .collect();
            format!(
                "{name} fails on candidate #{}: {why}\n  candidate: {}\n",
                ce.index,
                edges.join(" ")
            )
        }
    }
}

fn run_oracle(a: &OracleArgs) -> anyhow::Result<Outcome> {
    let qa = &a.query;
    let g = read_graph(&qa.file)?;
    let q = build_query(qa, &g)?;
    let caps = parse_caps(a.caps.as_deref())?;
    let window = match a.window {
        Some(d) => Window::with_depth(d, q.gamma, q.gamma_max)?,
        None => Window::default_for(q.gamma, q.gamma_max),
    };
    let registry = Registry::standard();
    let method = method_name(&registry, qa, &g)?;
    let verdict = registry.identify(Some(method), &g, &q)?;
    let abstraction = abstraction_of(&g);
    let names: Vec<&str> = verdict.sets().iter().map(|s| s.name).collect();
    let sets: Vec<AdjustmentSet> = verdict.sets().iter().map(|s| s.set.clone()).collect();
    let report = oracle::backdoor_over_all(&abstraction, &q, &sets, &window, caps.candidates)?;
    let search = if a.search_set {
        Some(oracle::search_common_adjustment(&abstraction, &q, &window, caps)?)
    } else {
        None
    };

    let mut text = format!(
        "query: {q} (gamma_max {}, method {method})\nverdict: {}\nwindow: {window}\ncandidates: {}\n",
        q.gamma_max,
        verdict.kind().as_str(),
        report.candidates
    );
    if let Some(w) = verdict.witness() {
        text += &format!("witness: {w}\n");
    }
    let mut checks = serde_json::Map::new();
    for (name, c) in names.iter().zip(&report.results) {
        text += &violation_text(name, c, report.candidates);
        checks.insert(
            name.to_string(),
            json!({ "set": set_json(&c.set), "passed": c.passed(), "counterexample": violation_json(c) }),
        );
    }
    let search_json = search.as_ref().map(|s| {
        match &s.set {
            Some(z) => text += &format!("common adjustment set: {z} ({} subsets tried)\n", s.subsets_tried),
            None => text += &format!("no common adjustment set in window ({} subsets tried)\n", s.subsets_tried),
        }
        json!({ "set": s.set.as_ref().map(set_json), "subsets_tried": s.subsets_tried })
    });
    text += "note: checked on the finite window only; validity beyond it is not claimed\n";

    let closed_form_ok = verdict.is_identifiable() && report.all_passed();
    let found = search.as_ref().is_some_and(|s| s.set.is_some());
    let code = if closed_form_ok || found { 0 } else { 2 };
    let value = json!({
        "command": "oracle",
        "version": VERSION,
        "graph_kind": g.kind().to_string(),
        "method": method,
        "query": query_json(&q),
        "verdict": verdict_json(&verdict),
        "window": { "from": time_offset(window.t_min), "to": time_offset(window.t_max) },
        "candidates": report.candidates,
        "checks": checks,
        "search": search_json,
        "passed": code == 0,
    });
    Ok(render(qa.format, value, text, code))
}

fn parse_vertex(text: &str) -> anyhow::Result<TimedVertex> {
    let t = text.trim();
    let (name, rest) = t
        .split_once('[')
        .ok_or_else(|| anyhow!("expected SERIES[t-LAG], got `{t}`"))?;
    let offset = rest
        .strip_suffix(']')
        .ok_or_else(|| anyhow!("expected SERIES[t-LAG], got `{t}`"))?;
    Ok(TimedVertex::new(SeriesId::new(name)?, parse_time_offset(offset)?))
}

fn parse_set(text: &str) -> anyhow::Result<AdjustmentSet> {
    let t = text.trim();
    let inner = t.strip_prefix('{').and_then(|s| s.strip_suffix('}')).unwrap_or(t);
    if inner.trim().is_empty() {
        return Ok(AdjustmentSet::new([]));
    }
    let mut out = Vec::new();
    let mut rest = inner;
    // Split on commas outside brackets.
    while !rest.trim().is_empty() {
        let close = rest.find(']').ok_or_else(|| anyhow!("unterminated vertex in `{t}`"))?;
        out.push(parse_vertex(&rest[..=close])?);
        rest = rest[close + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest);
    }
    Ok(AdjustmentSet::new(out))
}

fn seed_from_env(flag: u64) -> anyhow::Result<u64> {
    match std::env::var("ID_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("bad ID_SEED `{s}`")),
        Err(_) => Ok(flag),
    }
}

struct Row {
    name: String,
    set: AdjustmentSet,
    estimate: Estimate,
}

fn estimate_json(e: &Estimate, truth: f64) -> Value {
    let gap = (e.coefficient - truth).abs();
    json!({
        "estimate": e.coefficient,
        "std_error": e.std_error,
        "samples": e.samples,
        "gap": gap,
        "biased": gap > BIAS_SE * e.std_error,
    })
}

fn estimate_text(label: &str, e: &Estimate, truth: f64) -> String {
    let gap = (e.coefficient - truth).abs();
    let flag = if gap > BIAS_SE * e.std_error {
        format!("  BIASED: gap exceeds {BIAS_SE} standard errors")
    } else {
        String::new()
    };
    format!(
        "{label}: {:.4} (se {:.4}, gap {:.4}){flag}\n",
        e.coefficient, e.std_error, gap
    )
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<Outcome> {
    let qa = &a.query;
    if a.samples == 0 {
        bail!("--samples must be positive");
    }
    let seed = seed_from_env(a.seed)?;
    let (model, graph) = match read_document(&qa.file)? {
        Document::Model(m) => {
            let g = Graph::Ftcg(m.ftcg().clone());
            (Some(m), g)
        }
        Document::Graph(g) => (None, g),
    };
    let q = build_query(qa, &graph)?;
    let model = match (model, &graph) {
        (Some(m), _) => m,
        (None, Graph::Ftcg(f)) => LinearDscm::random(f.clone(), seed),
        (None, g) => LinearDscm::random_candidate(&abstraction_of(g), q.gamma_max, seed)?,
    };
    let registry = Registry::standard();
    let method = method_name(&registry, qa, &graph)?;
    let verdict = registry.identify(Some(method), &graph, &q)?;

    let mut sets: Vec<(String, AdjustmentSet)> =
        verdict.sets().iter().map(|s| (s.name.to_string(), s.set.clone())).collect();
    for (i, text) in a.adjust.iter().enumerate() {
        sets.push((format!("adjust{}", i + 1), parse_set(text)?));
    }
    let depth = sets
        .iter()
        .flat_map(|(_, z)| z.iter().map(|v| -v.time))
        .chain([q.gamma as i64])
        .max()
        .unwrap_or(0) as usize;

    let window = Window::default_for(q.gamma, q.gamma_max);
    let truth = sim::true_total_effect(&model, &q, &window)?;
    let data = sim::simulate(&model, a.samples + depth, sim::burn_in(&q), seed, None)?;
    if let Some(path) = &a.csv_out {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        data.write_csv(std::io::BufWriter::new(file))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let mut rows = Vec::new();
    for (name, z) in sets {
        let estimate = sim::estimate_adjusted(&data, &q, &z)?;
        rows.push(Row { name, set: z, estimate });
    }
    let interventional = sim::interventional_slope(&model, &q, a.samples, seed.wrapping_add(1))?;

    let mut text = format!(
        "query: {q} (gamma_max {}, method {method}, seed {seed})\nverdict: {}\ntrue effect: {truth:.4}\n",
        q.gamma_max,
        verdict.kind().as_str()
    );
    let mut estimates = serde_json::Map::new();
    for r in &rows {
        text += &estimate_text(&format!("adjusted by {} = {}", r.name, r.set), &r.estimate, truth);
        let mut e = estimate_json(&r.estimate, truth);
        e["set"] = set_json(&r.set);
        estimates.insert(r.name.clone(), e);
    }
    text += &estimate_text("interventional slope", &interventional, truth);

    let coefficients: Vec<Value> = model
        .coefficients()
        .iter()
        .map(|((a, b, l), c)| json!([a.as_str(), b.as_str(), l, c]))
        .collect();
    let value = json!({
        "command": "simulate",
        "version": VERSION,
        "graph_kind": graph.kind().to_string(),
        "method": method,
        "seed": seed,
        "query": query_json(&q),
        "verdict": verdict_json(&verdict),
        "model": coefficients,
        "true_effect": truth,
        "adjusted": estimates,
        "interventional": estimate_json(&interventional, truth),
    });
    Ok(render(qa.format, value, text, 0))
}

fn convert(a: &ConvertArgs) -> anyhow::Result<Outcome> {
    let text = match read_document(&a.file)? {
        Document::Model(m) => match a.to {
            None | Some(Target::Ftcg) => io::emit_model(&m),
            Some(t) => io::emit_graph(&coarsen(Graph::Ftcg(m.ftcg().clone()), t)?),
        },
        Document::Graph(g) => match a.to {
            None => io::emit_graph(&g),
            Some(t) => io::emit_graph(&coarsen(g, t)?),
        },
    };
    Ok(Outcome { text, code: 0 })
}

fn coarsen(g: Graph, to: Target) -> anyhow::Result<Graph> {
    Ok(match (g, to) {
        (Graph::Ftcg(f), Target::Ftcg) => Graph::Ftcg(f),
        (Graph::Ftcg(f), Target::Escg) => Graph::Escg(f.to_escg()),
        (Graph::Ftcg(f), Target::Scg) => Graph::Scg(f.to_scg()),
        (Graph::Escg(e), Target::Escg) => Graph::Escg(e),
        (Graph::Escg(e), Target::Scg) => Graph::Scg(e.to_scg()),
        (Graph::Scg(s), Target::Scg) => Graph::Scg(s),
        (g, _) => bail!("cannot refine a {} graph into a finer kind", g.kind()),
    })
}
