//! Experiment suite: scaling-law experiments for escape probabilities, with
//! power-law fits, exact cross-checks and manifest-driven execution.

pub mod experiments;
pub mod manifest;

pub use experiments::ExpOutput;
pub use manifest::{default_manifest, run_experiment, ExperimentConfig, ExperimentResult, Manifest, RunOverrides};

use crate::green::GreenError;
use crate::kernel::KernelError;
use crate::mc::McError;
use crate::model::ModelError;
use crate::region::RegionError;
use crate::stats::linear_fit;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("not enough rows for a fit ({0})")]
    InsufficientSamples(usize),
    #[error("experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One estimate at one grid point.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub n: u32,
    /// Secondary parameter (k for dense-set slices, j for shifts).
    pub k: Option<i64>,
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub cap_hits: u64,
}

/// Rows of one experiment, with provenance for the CSV contract.
#[derive(Debug, Clone)]
pub struct ScalingTable {
    pub experiment: String,
    pub model_hash: String,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn new(experiment: &str, model_hash: &str, seed: u64) -> ScalingTable {
        ScalingTable {
            experiment: experiment.to_string(),
            model_hash: model_hash.to_string(),
            seed,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ScalingRow) {
        self.rows.push(row);
    }

    pub fn rows_for(&self, label: &str) -> Vec<&ScalingRow> {
        self.rows.iter().filter(|r| r.label == label).collect()
    }

    /// CSV per the results contract:
    /// `experiment_id,model_hash,param_n,param_k,label,p_hat,stderr,n_samples,seed,cap_hits`.
    pub fn to_csv(&self, version: &str) -> String {
        let mut out = format!("# latwalk-version={version}\n");
        out.push_str("experiment_id,model_hash,param_n,param_k,label,p_hat,stderr,n_samples,seed,cap_hits\n");
        for r in &self.rows {
            let k = r.k.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.experiment,
                self.model_hash,
                r.n,
                k,
                r.label,
                r.estimate,
                r.stderr,
                r.n_samples,
                self.seed,
                r.cap_hits
            ));
        }
        out
    }

    /// Log-log fit over the rows carrying `label`.
    pub fn fit_power(&self, label: &str, target_exponent: f64) -> Result<PowerFit, SuiteError> {
        let rows = self.rows_for(label);
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ps: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        fit_power(&ns, &ps, target_exponent)
    }
}

/// Least-squares power law on log-log axes plus the ratio-spread diagnostic
/// against a declared exponent.
#[derive(Debug, Clone)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Per-point residuals of log p against the fitted line.
    pub residuals: Vec<f64>,
    /// Extremes of `p * n^(-target)` over the grid.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub target_exponent: f64,
}

impl PowerFit {
    pub fn ratio_spread(&self) -> f64 {
        if self.ratio_min <= 0.0 {
            f64::INFINITY
        } else {
            self.ratio_max / self.ratio_min
        }
    }
}

pub fn fit_power(ns: &[f64], ps: &[f64], target_exponent: f64) -> Result<PowerFit, SuiteError> {
    if ns.len() < 2 {
        return Err(SuiteError::InsufficientSamples(ns.len()));
    }
    if ps.iter().any(|&p| p <= 0.0) {
        return Err(SuiteError::InsufficientSamples(ps.iter().filter(|&&p| p > 0.0).count()));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys).ok_or(SuiteError::InsufficientSamples(ns.len()))?;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;
    for (n, p) in ns.iter().zip(ps) {
        let r = p * n.powf(-target_exponent);
        ratio_min = ratio_min.min(r);
        ratio_max = ratio_max.max(r);
    }
    Ok(PowerFit { slope, intercept, residuals, ratio_min, ratio_max, target_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_half_power() {
        let ns: Vec<f64> = [16.0, 32.0, 64.0, 128.0].to_vec();
        let ps: Vec<f64> = ns.iter().map(|n| n.powf(-0.5)).collect();
        let fit = fit_power(&ns, &ps, -0.5).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.ratio_spread() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_inverse_power() {
        let ns: Vec<f64> = [8.0, 16.0, 32.0].to_vec();
        let ps: Vec<f64> = ns.iter().map(|n| 3.0 / n).collect();
        let fit = fit_power(&ns, &ps, -1.0).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jittered_half_power() {
        // +-5% deterministic jitter moves the slope by well under 0.05.
        let ns: Vec<f64> = (4..=9).map(|i| (1u64 << i) as f64).collect();
        let ps: Vec<f64> = ns
            .iter()
            .enumerate()
            .map(|(i, n)| n.powf(-0.5) * (1.0 + 0.05 * if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let fit = fit_power(&ns, &ps, -0.5).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_power(&[4.0], &[0.5], -0.5).is_err());
        assert!(fit_power(&[4.0, 8.0], &[0.5, 0.0], -0.5).is_err());
    }
}
