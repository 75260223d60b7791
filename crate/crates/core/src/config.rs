//! Run configuration: model spec, schedule, analysis settings and run options.
//!
//! Configs are TOML. Unknown keys are rejected at every level.

use crate::entropy::{CountMode, DEFAULT_THETA};
use crate::error::{Error, Result};
use crate::model::{
    build_example31_model, build_grid_model, build_subshift_model, FiniteModel, GridSpec, MapSpec,
    ResolutionSchedule, DEFAULT_NODE_CAP,
};
use crate::pointwise::DEFAULT_STATE_CAP;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

fn default_node_cap() -> usize {
    DEFAULT_NODE_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Grid discretization of a named map.
    Grid {
        map: String,
        mesh: f64,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        #[serde(default = "default_node_cap")]
        node_cap: usize,
    },
    /// Subshift of finite type on central windows of radius `window`.
    Subshift {
        alphabet: Vec<char>,
        #[serde(default)]
        forbidden: Vec<String>,
        window: usize,
        #[serde(default = "default_node_cap")]
        node_cap: usize,
    },
    /// The level-set shift over `{±1} ∪ {±s_k}`.
    Example31 {
        s: Vec<f64>,
        window: usize,
        #[serde(default = "default_node_cap")]
        node_cap: usize,
    },
    /// A finite metric space with a self-map given by a table.
    Explicit {
        dist: Vec<Vec<f64>>,
        map: Vec<usize>,
        #[serde(default)]
        name: Option<String>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<FiniteModel> {
        match self {
            ModelSpec::Grid {
                map,
                mesh,
                params,
                node_cap,
            } => build_grid_model(&GridSpec {
                map: MapSpec::from_name(map, params)?,
                mesh: *mesh,
                node_cap: *node_cap,
            }),
            ModelSpec::Subshift {
                alphabet,
                forbidden,
                window,
                node_cap,
            } => {
                let words: Vec<&str> = forbidden.iter().map(String::as_str).collect();
                build_subshift_model(alphabet, &words, *window, *node_cap)
            }
            ModelSpec::Example31 {
                s,
                window,
                node_cap,
            } => build_example31_model(s, *window, *node_cap),
            ModelSpec::Explicit { dist, map, name } => FiniteModel::from_map(
                name.clone().unwrap_or_else(|| "explicit".into()),
                dist.clone(),
                map,
            ),
        }
    }
}

/// Thresholds, scales and caps shared by the analyses and theorem checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Entropy positivity threshold (nats).
    pub theta: f64,
    /// Separation constants `r` for sensitivity and chain sensitivity.
    pub sensitivity_r: Vec<f64>,
    /// `(r, b)` grid for the upper entropy point test.
    pub entropy_r: Vec<f64>,
    pub entropy_b: Vec<f64>,
    /// Segment lengths used for separated-count slopes.
    pub n_min: usize,
    pub n_max: usize,
    pub count_mode: CountMode,
    /// Path length for the path-count slope.
    pub path_n: usize,
    /// Bound on explored shadowing states per query.
    pub state_cap: usize,
    /// Number of reachable pairs sampled by the Sh-propagation check.
    pub pair_samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            theta: DEFAULT_THETA,
            sensitivity_r: vec![0.25],
            entropy_r: vec![0.125],
            entropy_b: vec![0.2, 0.1],
            n_min: 3,
            n_max: 7,
            count_mode: CountMode::Greedy,
            path_n: 20,
            state_cap: DEFAULT_STATE_CAP,
            pair_samples: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Subcommands run by `analyze`-style drivers; informational for `check`.
    pub commands: Vec<String>,
    /// Theorem ids for `check`; empty means all.
    pub theorems: Vec<String>,
    pub out: String,
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            commands: vec!["analyze".into(), "check".into()],
            theorems: Vec::new(),
            out: "out".into(),
            seed: 0,
            jobs: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in reports; defaults to the model name.
    #[serde(default)]
    pub system: Option<String>,
    pub model: ModelSpec,
    pub schedule: ResolutionSchedule,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub run: RunOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that do not need the model.
    pub fn check_shape(&self) -> Result<()> {
        self.schedule.check_shape()?;
        let a = &self.analysis;
        if !(a.theta >= 0.0 && a.theta.is_finite()) {
            return Err(Error::Config(format!(
                "theta must be >= 0, got {}",
                a.theta
            )));
        }
        if a.n_min == 0 || a.n_max <= a.n_min {
            return Err(Error::Config(format!(
                "need 1 <= n_min < n_max, got {}..{}",
                a.n_min, a.n_max
            )));
        }
        if a.path_n == 0 {
            return Err(Error::Config("path_n must be >= 1".into()));
        }
        for (name, v) in [
            ("sensitivity_r", &a.sensitivity_r),
            ("entropy_r", &a.entropy_r),
            ("entropy_b", &a.entropy_b),
        ] {
            if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config(format!("`{name}` entries must be positive")));
            }
        }
        Ok(())
    }

    /// Checks the schedule and scales against the model's resolution floors.
    pub fn validate_for(&self, m: &FiniteModel) -> Result<()> {
        self.schedule.validate_for(m)?;
        let floor = m.resolution_floor();
        for &r in &self.analysis.sensitivity_r {
            if r <= 2.0 * floor {
                return Err(Error::resolution(
                    "sensitivity r (must exceed)",
                    r,
                    2.0 * floor,
                ));
            }
            if r / 2.0 + 1e-12 < floor {
                return Err(Error::resolution("entropy scale r/2", r / 2.0, floor));
            }
        }
        for &r in &self.analysis.entropy_r {
            if r + 1e-12 < floor {
                return Err(Error::resolution("entropy r", r, floor));
            }
        }
        Ok(())
    }

    pub fn system_name(&self, m: &FiniteModel) -> String {
        self.system.clone().unwrap_or_else(|| m.name().to_string())
    }

    /// SHA-256 over the parts of the config that determine results; the
    /// output directory and worker count are excluded.
    pub fn hash(&self) -> String {
        let key = serde_json::json!({
            "system": self.system,
            "model": self.model,
            "schedule": self.schedule,
            "analysis": self.analysis,
            "seed": self.run.seed,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOUBLING: &str = r#"
system = "doubling"
[model]
kind = "grid"
map = "doubling"
mesh = 0.0625
[schedule]
epsilons = [0.25, 0.125]
deltas = [0.0625, 0.03125]
radii = [0.125, 0.0625]
"#;

    #[test]
    fn parses_and_builds() {
        let c = RunConfig::from_toml(DOUBLING).unwrap();
        let m = c.model.build().unwrap();
        assert_eq!(m.len(), 16);
        c.validate_for(&m).unwrap();
        assert_eq!(c.analysis, AnalysisConfig::default());
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DOUBLING.replace("mesh = 0.0625", "mesh = 0.0625\ncolour = 3");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = format!("{DOUBLING}\n[analysis]\ntheta2 = 1.0\n");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = format!("{DOUBLING}\nextra = 1\n");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn floor_violation_names_floor() {
        let c = RunConfig::from_toml(&DOUBLING.replace("[0.25, 0.125]", "[0.25, 0.01]")).unwrap();
        let m = c.model.build().unwrap();
        let e = c.validate_for(&m).unwrap_err();
        assert!(matches!(e, Error::Resolution { .. }));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::from_toml(DOUBLING).unwrap();
        let mut b = a.clone();
        b.run.out = "elsewhere".into();
        b.run.jobs = 3;
        assert_eq!(a.hash(), b.hash());
        b.analysis.theta = 0.5;
        assert_ne!(a.hash(), b.hash());
    }
}
