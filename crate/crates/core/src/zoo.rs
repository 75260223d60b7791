//! Built-in systems with default run configurations.

use crate::config::{AnalysisConfig, ModelSpec, RunConfig, RunOptions};
use crate::entropy::CountMode;
use crate::error::{Error, Result};
use crate::model::{ResolutionSchedule, DEFAULT_NODE_CAP};
use std::collections::BTreeMap;

pub struct ZooEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Where the system comes from and what it is expected to show.
    pub provenance: &'static str,
    build: fn() -> RunConfig,
}

impl ZooEntry {
    pub fn config(&self) -> RunConfig {
        (self.build)()
    }

    /// Multi-line description: summary, parameters, schedule, provenance.
    pub fn describe(&self) -> String {
        let cfg = self.config();
        let mut out = format!("{}: {}\n", self.name, self.summary);
        out.push_str("parameters:\n");
        for (k, v) in model_parameters(&cfg.model) {
            out.push_str(&format!("  {k} = {v}\n"));
        }
        let s = &cfg.schedule;
        out.push_str(&format!(
            "schedule:\n  epsilons = {:?}\n  deltas = {:?}\n  radii = {:?}\n",
            s.epsilons, s.deltas, s.radii
        ));
        out.push_str(&format!("provenance: {}\n", self.provenance));
        out
    }
}

fn model_parameters(spec: &ModelSpec) -> Vec<(String, String)> {
    match spec {
        ModelSpec::Grid {
            map, mesh, params, ..
        } => {
            let mut v = vec![
                ("map".into(), map.clone()),
                ("mesh".into(), mesh.to_string()),
            ];
            v.extend(params.iter().map(|(k, x)| (k.clone(), x.to_string())));
            v
        }
        ModelSpec::Subshift {
            alphabet,
            forbidden,
            window,
            ..
        } => vec![
            ("alphabet".into(), alphabet.iter().collect()),
            ("forbidden".into(), format!("{forbidden:?}")),
            ("N".into(), window.to_string()),
        ],
        ModelSpec::Example31 { s, window, .. } => vec![
            ("K".into(), s.len().to_string()),
            ("N".into(), window.to_string()),
            ("s".into(), format!("{s:?}")),
        ],
        ModelSpec::Explicit { dist, .. } => vec![("points".into(), dist.len().to_string())],
    }
}

const H: f64 = 1.0 / 64.0;

fn grid(map: &str, mesh: f64, params: &[(&str, f64)]) -> ModelSpec {
    ModelSpec::Grid {
        map: map.into(),
        mesh,
        params: params
            .iter()
            .map(|&(k, v)| (k.to_string(), v))
            .collect::<BTreeMap<_, _>>(),
        node_cap: DEFAULT_NODE_CAP,
    }
}

fn schedule(epsilons: &[f64], deltas: &[f64], radii: &[f64]) -> ResolutionSchedule {
    ResolutionSchedule {
        epsilons: epsilons.to_vec(),
        deltas: deltas.to_vec(),
        radii: radii.to_vec(),
    }
}

fn config(
    system: &str,
    model: ModelSpec,
    schedule: ResolutionSchedule,
    analysis: AnalysisConfig,
) -> RunConfig {
    RunConfig {
        system: Some(system.into()),
        model,
        schedule,
        analysis,
        run: RunOptions::default(),
    }
}

fn interval_analysis() -> AnalysisConfig {
    AnalysisConfig {
        sensitivity_r: vec![0.25],
        entropy_r: vec![0.125],
        entropy_b: vec![0.5, 0.25],
        n_min: 3,
        n_max: 7,
        count_mode: CountMode::Greedy,
        ..AnalysisConfig::default()
    }
}

fn shift_analysis() -> AnalysisConfig {
    AnalysisConfig {
        sensitivity_r: vec![0.5],
        entropy_r: vec![0.5],
        entropy_b: vec![0.5, 0.25],
        n_min: 2,
        n_max: 6,
        count_mode: CountMode::Greedy,
        ..AnalysisConfig::default()
    }
}

fn identity() -> RunConfig {
    config(
        "identity",
        grid("identity", H, &[]),
        schedule(&[0.25, 0.125], &[0.75 * H, 0.5 * H], &[2.0 * H, 0.5 * H]),
        interval_analysis(),
    )
}

fn rotation() -> RunConfig {
    config(
        "rotation",
        grid("rotation", H, &[("alpha", 0.25)]),
        schedule(&[0.25, 0.125], &[0.75 * H, 0.5 * H], &[2.0 * H, 0.5 * H]),
        interval_analysis(),
    )
}

fn doubling() -> RunConfig {
    config(
        "doubling",
        grid("doubling", H, &[]),
        schedule(&[0.25, 0.125], &[2.0 * H, H, 0.5 * H], &[4.0 * H, 0.5 * H]),
        interval_analysis(),
    )
}

fn tent() -> RunConfig {
    config(
        "tent",
        grid("tent", H, &[]),
        schedule(&[0.25, 0.125], &[2.0 * H, H, 0.5 * H], &[4.0 * H, 0.5 * H]),
        interval_analysis(),
    )
}

fn north_south() -> RunConfig {
    config(
        "north_south",
        grid("north_south", H, &[("lambda", 3.0), ("phase", H / 2.0)]),
        schedule(&[0.25, 0.125], &[1.125 * H, 0.5 * H], &[2.0 * H, 0.5 * H]),
        interval_analysis(),
    )
}

fn subshift(forbidden: &[&str]) -> ModelSpec {
    ModelSpec::Subshift {
        alphabet: vec!['0', '1'],
        forbidden: forbidden.iter().map(|s| s.to_string()).collect(),
        window: 3,
        node_cap: DEFAULT_NODE_CAP,
    }
}

fn full_shift() -> RunConfig {
    config(
        "full_shift",
        subshift(&[]),
        schedule(&[0.5, 0.25], &[0.125, 0.0625], &[0.25, 0.125]),
        shift_analysis(),
    )
}

fn golden_mean() -> RunConfig {
    config(
        "golden_mean",
        subshift(&["11"]),
        schedule(&[0.5, 0.25], &[0.125, 0.0625], &[0.25, 0.125]),
        shift_analysis(),
    )
}

fn example31() -> RunConfig {
    config(
        "example31",
        ModelSpec::Example31 {
            s: vec![0.9, 0.99],
            window: 4,
            node_cap: DEFAULT_NODE_CAP,
        },
        schedule(&[0.5, 0.25], &[1e-3, 1e-5], &[0.125, 0.0625]),
        AnalysisConfig {
            sensitivity_r: vec![0.5],
            entropy_r: vec![0.25],
            entropy_b: vec![0.2, 0.1],
            n_min: 2,
            n_max: 6,
            count_mode: CountMode::Greedy,
            ..AnalysisConfig::default()
        },
    )
}

pub const ZOO: [ZooEntry; 8] = [
    ZooEntry {
        name: "identity",
        summary: "identity map on [0,1], grid model",
        provenance: "trivial dynamics: every point is a fixed point, shadowable and chain continuous; zero entropy",
        build: identity,
    },
    ZooEntry {
        name: "rotation",
        summary: "rotation x -> x + alpha mod 1 on the circle, grid model",
        provenance: "an isometry: equicontinuous everywhere, no sensitive points, zero entropy",
        build: rotation,
    },
    ZooEntry {
        name: "doubling",
        summary: "doubling map x -> 2x mod 1 on the circle, grid model",
        provenance: "expanding circle map with the shadowing property; every point sensitive; entropy ln 2",
        build: doubling,
    },
    ZooEntry {
        name: "tent",
        summary: "full tent map on [0,1], grid model",
        provenance: "piecewise expanding interval map with the shadowing property; sensitive everywhere; entropy ln 2",
        build: tent,
    },
    ZooEntry {
        name: "north_south",
        summary: "north-south circle map t -> atan(lambda tan(pi t))/pi, grid model",
        provenance: "one repelling and one attracting fixed point; exactly two chain components, only the attractor terminal; zero entropy",
        build: north_south,
    },
    ZooEntry {
        name: "full_shift",
        summary: "full shift on two symbols, central windows of radius N",
        provenance: "the standard shift with the shadowing property; chain entropy ln 2",
        build: full_shift,
    },
    ZooEntry {
        name: "golden_mean",
        summary: "golden-mean shift (no two consecutive 1s), central windows of radius N",
        provenance: "shift of finite type with the shadowing property; chain entropy ln((1+sqrt 5)/2)",
        build: golden_mean,
    },
    ZooEntry {
        name: "example31",
        summary: "level-set shift over {+-1} and {+-s_k}, central windows of radius N",
        provenance: "counterexample family: a shift with the shadowing property whose \
                     chain components are X_1, X_2, ... and X_inf, where only X_inf is terminal; X_inf carries zero \
                     entropy and no upper entropy points although its points form entropy pairs",
        build: example31,
    },
];

pub fn names() -> Vec<&'static str> {
    ZOO.iter().map(|e| e.name).collect()
}

pub fn lookup(name: &str) -> Result<&'static ZooEntry> {
    ZOO.iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownSystem(name.to_string()))
}
