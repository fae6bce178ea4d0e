//! Experiment manifests and the runner that turns configs into CSV + JSON.

use super::experiments::{self, ExpOutput};
use super::SuiteError;
use crate::mc::McConfig;
use crate::model::resolve_model;
use crate::region::Policy;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_kappa() -> u32 {
    1
}

/// One experiment entry: what to run and at what scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    /// One of: halfline, line, strip, factorization, entry, shifted,
    /// overshoot, logasym, gottahit, beurling.
    pub kind: String,
    /// Builtin model name or path to a model JSON file.
    pub model: String,
    #[serde(default = "default_kappa")]
    pub kappa: u32,
    #[serde(default)]
    pub n_grid: Vec<u32>,
    /// Second radius grid (entry: the +n starts).
    #[serde(default)]
    pub n_grid2: Vec<u32>,
    /// Secondary parameter grid (beurling: k, shifted: j).
    #[serde(default)]
    pub k_grid: Vec<i64>,
    #[serde(default)]
    pub samples: u64,
    /// Second sample count (entry: the +n starts).
    #[serde(default)]
    pub samples2: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hard_cap: Option<u64>,
    #[serde(default)]
    pub chunk_size: Option<u32>,
    #[serde(default)]
    pub policies: Vec<String>,
    #[serde(default)]
    pub policy_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiments: Vec<ExperimentConfig>,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Manifest, SuiteError> {
        let m: Manifest =
            serde_json::from_str(text).map_err(|e| SuiteError::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn find(&self, id: &str) -> Option<&ExperimentConfig> {
        self.experiments.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.experiments.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), SuiteError> {
        const KINDS: [&str; 10] = [
            "halfline",
            "line",
            "strip",
            "factorization",
            "entry",
            "shifted",
            "overshoot",
            "logasym",
            "gottahit",
            "beurling",
        ];
        for e in &self.experiments {
            if !KINDS.contains(&e.kind.as_str()) {
                return Err(SuiteError::Config(format!("unknown experiment kind {:?}", e.kind)));
            }
            if e.n_grid.is_empty() {
                return Err(SuiteError::Config(format!("{}: empty n_grid", e.id)));
            }
            if e.kappa == 0 {
                return Err(SuiteError::Config(format!("{}: kappa must be positive", e.id)));
            }
            if e.kind == "beurling" {
                for &k in &e.k_grid {
                    for &n in &e.n_grid {
                        if k <= 0 || 2 * k > n as i64 {
                            return Err(SuiteError::Config(format!(
                                "{}: beurling grid requires 0 < k <= n/2 (k={k}, n={n})",
                                e.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub workers: Option<usize>,
    pub chunk_size: Option<u32>,
}

/// A finished experiment with provenance and verdict.
pub struct ExperimentResult {
    pub id: String,
    pub kind: String,
    pub model_hash: String,
    pub seed: u64,
    pub duration_s: f64,
    pub output: ExpOutput,
}

impl ExperimentResult {
    pub fn csv(&self) -> String {
        self.output.table.to_csv(VERSION)
    }

    pub fn summary_json(&self) -> String {
        let v = json!({
            "experiment": self.id,
            "pass": self.output.pass,
            "metrics": self.output.metrics,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "model_hash": self.model_hash,
            "version": VERSION,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }
}

fn parse_policies(cfg: &ExperimentConfig) -> Result<Vec<Policy>, SuiteError> {
    let names: Vec<String> = if cfg.policies.is_empty() {
        vec!["ray".to_string()]
    } else {
        cfg.policies.clone()
    };
    names
        .iter()
        .map(|n| Policy::parse(n, cfg.policy_seed).map_err(SuiteError::from))
        .collect()
}

/// Run one experiment. Worker count only changes wall time, never output.
pub fn run_experiment(cfg: &ExperimentConfig, ov: &RunOverrides) -> Result<ExperimentResult, SuiteError> {
    let model = resolve_model(&cfg.model)?;
    let mc = McConfig {
        chunk_size: ov.chunk_size.or(cfg.chunk_size).unwrap_or(4096),
        hard_cap: cfg.hard_cap.unwrap_or(1_000_000_000),
    };
    let samples = ov.samples.unwrap_or(cfg.samples).max(1);
    let samples2 = ov.samples.unwrap_or(if cfg.samples2 > 0 { cfg.samples2 } else { cfg.samples }).max(1);
    let seed = ov.seed.unwrap_or(cfg.seed);
    let policies = parse_policies(cfg)?;
    let started = std::time::Instant::now();
    let body = || -> Result<ExpOutput, SuiteError> {
        match cfg.kind.as_str() {
            "halfline" => experiments::exp_halfline(&model, cfg.kappa, &cfg.n_grid, samples, seed, mc),
            "line" => experiments::exp_line(&model, cfg.kappa, &cfg.n_grid, samples, seed, mc),
            "strip" => experiments::exp_strip(&model, cfg.kappa, &cfg.n_grid, samples, seed, mc),
            "factorization" => {
                experiments::exp_factorization(&model, cfg.kappa, &cfg.n_grid, samples, seed, mc)
            }
            "entry" => {
                let plus = if cfg.n_grid2.is_empty() { cfg.n_grid.clone() } else { cfg.n_grid2.clone() };
                experiments::exp_entry_point(
                    &model, cfg.kappa, &cfg.n_grid, &plus, samples, samples2, seed, mc,
                )
            }
            "shifted" => {
                experiments::exp_shifted(&model, cfg.kappa, &cfg.k_grid, &cfg.n_grid, samples, seed, mc)
            }
            "overshoot" => experiments::exp_overshoot(&model, &cfg.n_grid, samples, seed, mc),
            "logasym" => experiments::exp_log_asymptotics(&model, &cfg.n_grid),
            "gottahit" => experiments::exp_gottahit(&model, cfg.kappa, &cfg.n_grid, &policies),
            "beurling" => experiments::exp_beurling(
                &model, cfg.kappa, &cfg.k_grid, &cfg.n_grid, &policies, samples, seed, mc,
            ),
            other => Err(SuiteError::Config(format!("unknown experiment kind {other:?}"))),
        }
    };
    let mut output = match ov.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| SuiteError::Config(e.to_string()))?;
            pool.install(body)?
        }
        None => body()?,
    };
    output.table.experiment = cfg.id.clone();
    Ok(ExperimentResult {
        id: cfg.id.clone(),
        kind: cfg.kind.clone(),
        model_hash: model.hash().to_string(),
        seed,
        duration_s: started.elapsed().as_secs_f64(),
        output,
    })
}

/// Write `<id>.csv` and `<id>.json` under `dir`.
pub fn write_outputs(res: &ExperimentResult, dir: &Path) -> Result<(PathBuf, PathBuf), SuiteError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", res.id));
    let json_path = dir.join(format!("{}.json", res.id));
    std::fs::write(&csv_path, res.csv())?;
    std::fs::write(&json_path, res.summary_json())?;
    Ok((csv_path, json_path))
}

/// The stock experiment set: grids and sample counts sized so the whole
/// suite stays within a desk-scale time budget.
pub fn default_manifest() -> Manifest {
    let geo = |lo: u32, hi: u32| {
        let mut v = Vec::new();
        let mut n = lo;
        while n <= hi {
            v.push(n);
            n *= 2;
        }
        v
    };
    let base = |id: &str, kind: &str, model: &str| ExperimentConfig {
        id: id.to_string(),
        kind: kind.to_string(),
        model: model.to_string(),
        kappa: 1,
        n_grid: Vec::new(),
        n_grid2: Vec::new(),
        k_grid: Vec::new(),
        samples: 0,
        samples2: 0,
        seed: 0,
        hard_cap: None,
        chunk_size: None,
        policies: Vec::new(),
        policy_seed: 0,
    };
    let experiments = vec![
        ExperimentConfig {
            n_grid: geo(16, 512),
            samples: 100_000,
            seed: 0xBEEF_0001,
            ..base("halfline", "halfline", "srw")
        },
        ExperimentConfig {
            n_grid: geo(16, 512),
            samples: 100_000,
            seed: 0xBEEF_0002,
            ..base("line", "line", "srw")
        },
        ExperimentConfig {
            n_grid: geo(16, 512),
            samples: 100_000,
            seed: 0xBEEF_0003,
            ..base("strip-srw", "strip", "srw")
        },
        ExperimentConfig {
            n_grid: geo(16, 512),
            samples: 100_000,
            seed: 0xBEEF_0004,
            ..base("strip-asym", "strip", "asym")
        },
        ExperimentConfig {
            n_grid: vec![4, 8, 16],
            samples: 1_000_000,
            seed: 0xBEEF_0005,
            ..base("factorization-srw", "factorization", "srw")
        },
        ExperimentConfig {
            n_grid: vec![4, 8, 16],
            samples: 1_000_000,
            seed: 0xBEEF_0006,
            ..base("factorization-asym", "factorization", "asym")
        },
        ExperimentConfig {
            n_grid: vec![8, 16, 32, 64],
            n_grid2: vec![8, 16, 32],
            samples: 30_000,
            samples2: 400_000,
            seed: 0xBEEF_0007,
            hard_cap: Some(200_000),
            ..base("entry", "entry", "srw")
        },
        ExperimentConfig {
            k_grid: vec![1, 4, 16],
            n_grid: vec![32, 128],
            samples: 20_000,
            seed: 0xBEEF_0008,
            ..base("shifted", "shifted", "srw")
        },
        ExperimentConfig {
            n_grid: geo(32, 512),
            samples: 20_000,
            seed: 0xBEEF_0009,
            ..base("overshoot-heavy", "overshoot", "heavy")
        },
        ExperimentConfig {
            n_grid: vec![16, 64, 256],
            samples: 20_000,
            seed: 0xBEEF_000A,
            ..base("overshoot-srw", "overshoot", "srw")
        },
        ExperimentConfig { n_grid: vec![16, 32, 64, 128], ..base("logasym", "logasym", "srw") },
        ExperimentConfig {
            n_grid: vec![16, 32, 64],
            policies: vec!["ray".into(), "alternating".into()],
            ..base("gottahit", "gottahit", "srw")
        },
        ExperimentConfig {
            k_grid: vec![1, 4, 16],
            n_grid: vec![64, 128, 256],
            samples: 10_000,
            seed: 0xBEEF_000B,
            policies: vec!["ray".into(), "random".into(), "alternating".into()],
            policy_seed: 424_242,
            ..base("beurling", "beurling", "srw")
        },
    ];
    Manifest { experiments }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_is_valid() {
        let m = default_manifest();
        m.validate().unwrap();
        assert!(m.find("beurling").is_some());
        assert!(m.find("nope").is_none());
        // Round-trips through JSON.
        let m2 = Manifest::from_json(&m.to_json()).unwrap();
        assert_eq!(m2.experiments.len(), m.experiments.len());
    }

    #[test]
    fn beurling_grid_guard() {
        let mut m = default_manifest();
        for e in &mut m.experiments {
            if e.kind == "beurling" {
                e.k_grid = vec![40];
                e.n_grid = vec![64];
            }
        }
        assert!(matches!(m.validate(), Err(SuiteError::Config(_))));
    }

    #[test]
    fn unknown_kind_rejected() {
        let text = r#"{"experiments":[{"id":"x","kind":"blob","model":"srw","n_grid":[8]}]}"#;
        assert!(Manifest::from_json(text).is_err());
    }

    #[test]
    fn small_experiment_runs_and_is_deterministic() {
        let cfg = ExperimentConfig {
            id: "line-small".into(),
            kind: "line".into(),
            model: "srw".into(),
            kappa: 1,
            n_grid: vec![8, 16],
            n_grid2: vec![],
            k_grid: vec![],
            samples: 2000,
            samples2: 0,
            seed: 7,
            hard_cap: None,
            chunk_size: None,
            policies: vec![],
            policy_seed: 0,
        };
        let a = run_experiment(&cfg, &RunOverrides { workers: Some(1), ..Default::default() }).unwrap();
        let b = run_experiment(&cfg, &RunOverrides { workers: Some(3), ..Default::default() }).unwrap();
        assert_eq!(a.csv(), b.csv());
    }
}
