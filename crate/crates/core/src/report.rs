//! Report documents (JSON, CSV, DOT). Every document carries the tool
//! version and the config hash; all orderings are fixed so identical
//! configs give byte-identical files.

use crate::chains::{chain_stability_margin, ChainDigraph, ComponentDecomposition};
use crate::config::RunConfig;
use crate::entropy::{
    entropy_slope, path_count_slope, restricted_spectral_entropy, spectral_chain_entropy,
    EntropyEstimate,
};
use crate::error::{Error, Result};
use crate::harness::{run_checks, Context, TheoremCheck};
use crate::model::{validate_model, FiniteModel};
use crate::pointwise::{point_report, PointReport};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub const TOOL_VERSION: &str = concat!("chainscope ", env!("CARGO_PKG_VERSION"));
pub const REPORT_SCHEMA: u32 = 1;

/// Provenance stamped into every output file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stamp {
    pub tool: String,
    pub config_hash: String,
    pub system: String,
}

impl Stamp {
    pub fn new(cfg: &RunConfig, system: &str) -> Self {
        Stamp {
            tool: TOOL_VERSION.into(),
            config_hash: cfg.hash(),
            system: system.into(),
        }
    }
}

/// A named output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub name: String,
    pub content: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    stamp: &'a Stamp,
    data: &'a T,
}

pub fn json_document<T: Serialize>(name: &str, kind: &str, stamp: &Stamp, data: &T) -> Document {
    let env = Envelope {
        schema_version: REPORT_SCHEMA,
        kind,
        stamp,
        data,
    };
    let mut content = serde_json::to_string_pretty(&env).expect("report serializes");
    content.push('\n');
    Document {
        name: name.into(),
        content,
    }
}

pub fn csv_document(
    name: &str,
    stamp: &Stamp,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<Document> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
        .expect("csv output is utf-8");
    Ok(Document {
        name: name.into(),
        content: format!(
            "# {} config_hash={} system={}\n{body}",
            stamp.tool, stamp.config_hash, stamp.system
        ),
    })
}

pub fn write_documents(dir: &Path, docs: &[Document]) -> Result<()> {
    for d in docs {
        let path = dir.join(&d.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, &d.content)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub kind: String,
    pub nodes: usize,
    pub mesh: f64,
    pub proj_error: f64,
    pub chain_floor: f64,
    pub resolution_floor: f64,
    pub separation_floor: f64,
    pub deterministic: bool,
    pub labels: Vec<String>,
}

pub fn model_summary(m: &FiniteModel) -> Result<ModelSummary> {
    let v = validate_model(m, 2000)?;
    Ok(ModelSummary {
        name: m.name().into(),
        kind: format!("{:?}", m.kind()).to_lowercase(),
        nodes: m.len(),
        mesh: m.mesh(),
        proj_error: m.proj_error(),
        chain_floor: m.chain_floor(),
        resolution_floor: m.resolution_floor(),
        separation_floor: v.separation_floor,
        deterministic: m.is_deterministic(),
        labels: m.labels().to_vec(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentEntry {
    pub index: usize,
    pub size: usize,
    pub terminal: bool,
    pub spectral_entropy: f64,
    /// Largest distance from the component reached by chains leaving it.
    pub stability_margin: f64,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaComponents {
    pub delta: f64,
    pub edges: usize,
    pub scc_count: usize,
    pub chain_recurrent_nodes: usize,
    pub components: Vec<ComponentEntry>,
    pub condensation: Vec<(usize, usize)>,
    pub terminal: Vec<usize>,
}

pub fn components_for(
    m: &FiniteModel,
    g: &ChainDigraph,
    d: &ComponentDecomposition,
) -> DeltaComponents {
    let components = d
        .components
        .par_iter()
        .enumerate()
        .map(|(c, nodes)| ComponentEntry {
            index: c,
            size: nodes.len(),
            terminal: d.terminal[c],
            spectral_entropy: restricted_spectral_entropy(g, nodes).value,
            stability_margin: chain_stability_margin(m, g, d, c),
            nodes: nodes.clone(),
        })
        .collect();
    DeltaComponents {
        delta: g.delta(),
        edges: g.edge_count(),
        scc_count: d.scc_count,
        chain_recurrent_nodes: d.cr_nodes.len(),
        components,
        condensation: d.condensation.clone(),
        terminal: d.terminal_components(),
    }
}

fn estimate_row(delta: f64, region: &str, e: &EntropyEstimate) -> Vec<String> {
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let optn = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
    let counts = e
        .counts
        .iter()
        .map(|(n, c)| format!("{n}:{c}"))
        .collect::<Vec<_>>()
        .join(";");
    vec![
        delta.to_string(),
        serde_json::to_value(e.method)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string(),
        region.to_string(),
        opt(e.params.r),
        optn(e.params.n_min),
        optn(e.params.n_max),
        e.value.to_string(),
        serde_json::to_value(e.bound)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string(),
        counts,
        optn(e.saturation),
        e.note.clone().unwrap_or_default(),
    ]
}

pub const ENTROPY_HEADER: [&str; 11] = [
    "delta",
    "method",
    "region",
    "r",
    "n_min",
    "n_max",
    "value",
    "bound",
    "counts",
    "saturation",
    "note",
];

/// Entropy table: spectral and path-count values per δ, per component,
/// and separated-count slopes of the whole model at each entropy scale.
pub fn entropy_rows(ctx: &Context) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for (g, d) in ctx.digraphs.iter().zip(&ctx.decomps) {
        rows.push(estimate_row(g.delta(), "all", &spectral_chain_entropy(g)));
        match path_count_slope(g, ctx.analysis.path_n) {
            Ok(e) => rows.push(estimate_row(g.delta(), "all", &e)),
            Err(Error::Capacity { .. }) => {}
            Err(e) => return Err(e),
        }
        for (c, nodes) in d.components.iter().enumerate() {
            let e = restricted_spectral_entropy(g, nodes);
            rows.push(estimate_row(g.delta(), &format!("component {c}"), &e));
        }
    }
    let all: Vec<usize> = (0..ctx.model.len()).collect();
    for &r in &ctx.analysis.entropy_r {
        let res = entropy_slope(
            &ctx.model,
            &all,
            r,
            ctx.analysis.n_min,
            ctx.analysis.n_max,
            ctx.analysis.count_mode,
        );
        match res {
            Ok(e) => rows.push(estimate_row(f64::NAN, "all", &e)),
            Err(Error::Capacity { what, needed, cap }) => {
                let mut row = vec![String::new(); ENTROPY_HEADER.len()];
                row[1] = "separated-slope".into();
                row[2] = "all".into();
                row[3] = r.to_string();
                row[10] = format!("capped: {what} needs {needed}, cap {cap}");
                rows.push(row);
            }
            Err(e) => return Err(e),
        }
    }
    for row in &mut rows {
        if row[0] == "NaN" {
            row[0].clear();
        }
    }
    Ok(rows)
}

/// DOT rendering of the component condensation at one δ. Terminal
/// components are drawn as double circles.
pub fn condensation_dot(stamp: &Stamp, d: &ComponentDecomposition, delta: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "// {} config_hash={} system={}",
        stamp.tool, stamp.config_hash, stamp.system
    );
    let _ = writeln!(s, "digraph condensation {{");
    let _ = writeln!(s, "  label=\"chain components at delta={delta}\";");
    for (c, nodes) in d.components.iter().enumerate() {
        let shape = if d.terminal[c] {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(
            s,
            "  C{c} [shape={shape}, label=\"C{c}\\n{} nodes\"];",
            nodes.len()
        );
    }
    for &(a, b) in &d.condensation {
        let _ = writeln!(s, "  C{a} -> C{b};");
    }
    s.push_str("}\n");
    s
}

/// DOT rendering of a chain digraph with node labels.
pub fn digraph_dot(
    stamp: &Stamp,
    m: &FiniteModel,
    g: &ChainDigraph,
    d: &ComponentDecomposition,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "// {} config_hash={} system={}",
        stamp.tool, stamp.config_hash, stamp.system
    );
    let _ = writeln!(s, "digraph chains {{");
    let _ = writeln!(s, "  label=\"chain digraph at delta={}\";", g.delta());
    for v in 0..g.node_count() {
        let style = match d.component_of[v] {
            Some(c) if d.terminal[c] => ", style=filled, fillcolor=lightblue",
            Some(_) => ", style=filled, fillcolor=lightgray",
            None => "",
        };
        let _ = writeln!(
            s,
            "  n{v} [label=\"{}\"{style}];",
            m.label(v).replace('"', "'")
        );
    }
    for (a, b) in g.edges() {
        let _ = writeln!(s, "  n{a} -> n{b};");
    }
    s.push_str("}\n");
    s
}

/// All `analyze` artifacts.
pub fn analyze_documents(ctx: &Context, stamp: &Stamp) -> Result<Vec<Document>> {
    let model = model_summary(&ctx.model)?;
    let comps: Vec<DeltaComponents> = ctx
        .digraphs
        .iter()
        .zip(&ctx.decomps)
        .map(|(g, d)| components_for(&ctx.model, g, d))
        .collect();
    let points: Vec<PointReport> = (0..ctx.model.len())
        .into_par_iter()
        .map(|x| {
            point_report(
                &ctx.model,
                &ctx.digraphs,
                &ctx.schedule,
                x,
                &ctx.analysis.sensitivity_r,
            )
        })
        .collect::<Result<_>>()?;
    let rows = entropy_rows(ctx)?;
    let dj = ctx.finest_delta();
    Ok(vec![
        json_document("model.json", "model", stamp, &model),
        json_document("components.json", "components", stamp, &comps),
        json_document("points.json", "points", stamp, &points),
        csv_document("entropy.csv", stamp, &ENTROPY_HEADER, &rows)?,
        Document {
            name: "condensation.dot".into(),
            content: condensation_dot(stamp, &ctx.decomps[dj], ctx.schedule.deltas[dj]),
        },
    ])
}

pub const SUMMARY_HEADER: [&str; 6] = [
    "system",
    "theorem",
    "status",
    "failed_hypothesis",
    "witnesses",
    "statement",
];

/// Theorem reports (one JSON per check) plus the summary table.
pub fn check_documents(
    ctx: &Context,
    ids: &[String],
    stamp: &Stamp,
) -> Result<(Vec<Document>, Vec<TheoremCheck>)> {
    let checks = run_checks(ctx, ids)?;
    let mut docs: Vec<Document> = checks
        .iter()
        .map(|c| {
            json_document(
                &format!("checks/{}.json", c.theorem),
                "theorem-check",
                stamp,
                c,
            )
        })
        .collect();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.system.clone(),
                c.theorem.clone(),
                c.status.as_str().into(),
                c.failed_hypothesis.clone().unwrap_or_default(),
                c.witnesses.len().to_string(),
                c.statement.clone(),
            ]
        })
        .collect();
    docs.push(csv_document(
        "checks/summary.csv",
        stamp,
        &SUMMARY_HEADER,
        &rows,
    )?);
    Ok((docs, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn documents_are_stamped_and_stable() {
        let cfg = zoo::lookup("golden_mean").unwrap().config();
        let ctx = Context::from_config(&cfg).unwrap();
        let stamp = Stamp::new(&cfg, "golden_mean");
        let a = analyze_documents(&ctx, &stamp).unwrap();
        let b = analyze_documents(&Context::from_config(&cfg).unwrap(), &stamp).unwrap();
        assert_eq!(a, b);
        let names: Vec<&str> = a.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "model.json",
                "components.json",
                "points.json",
                "entropy.csv",
                "condensation.dot"
            ]
        );
        for d in &a {
            assert!(d.content.contains(&stamp.config_hash), "{}", d.name);
            assert!(d.content.contains(TOOL_VERSION), "{}", d.name);
        }
        let csv = &a[3].content;
        assert!(csv.lines().nth(1).unwrap().starts_with("delta,method"));
        assert!(csv.contains("spectral"));
    }

    #[test]
    fn check_documents_include_summary() {
        let cfg = zoo::lookup("rotation").unwrap().config();
        let ctx = Context::from_config(&cfg).unwrap();
        let stamp = Stamp::new(&cfg, "rotation");
        let (docs, checks) = check_documents(&ctx, &[], &stamp).unwrap();
        assert_eq!(checks.len(), 8);
        assert_eq!(docs.len(), 9);
        assert!(checks.iter().all(|c| c.status.is_success()));
        assert!(docs
            .last()
            .unwrap()
            .content
            .contains("rotation,B1,confirmed"));
    }
}
