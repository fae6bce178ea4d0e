//! Chunked Monte Carlo estimation with counter-mode random streams.
//!
//! Trajectories are grouped into fixed-size chunks; chunk `i` draws from an
//! independent stream derived from the master seed, and aggregation is a
//! deterministic fold in chunk order. Output is therefore byte-identical for
//! a fixed `(seed, n_samples, chunk_size)` regardless of how many workers
//! run the chunks.

use super::{simulate_until, McError, Outcome, StepSampler, StoppingRule};
use crate::model::{Coord, LatticeBasis, WalkModel};
use crate::stats::wilson_interval;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub chunk_size: u32,
    pub hard_cap: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { chunk_size: 4096, hard_cap: 1_000_000_000 }
    }
}

/// A Monte Carlo point estimate with provenance.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Trajectories that hit the hard cap; counted as non-events and
    /// reported, never dropped silently.
    pub cap_hits: u64,
    /// Wilson 95% interval, present for proportion estimates.
    pub wilson: Option<(f64, f64)>,
}

/// Functional of the stopped trajectory for expectation estimates.
#[derive(Clone)]
pub enum Functional {
    /// `|S_T|` (physical modulus).
    AbsEnd,
    /// `log |S_T|`.
    LogAbsEnd,
    /// The stopping step index.
    Steps,
    Custom(Arc<dyn Fn(&Outcome, &LatticeBasis) -> f64 + Send + Sync>),
}

impl Functional {
    fn apply(&self, out: &Outcome, basis: &LatticeBasis) -> f64 {
        match self {
            Functional::AbsEnd => basis.norm2(out.position).sqrt(),
            Functional::LogAbsEnd => basis.norm2(out.position).sqrt().ln(),
            Functional::Steps => out.step as f64,
            Functional::Custom(f) => f(out, basis),
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk + 1);
    rng
}

fn run_chunks<T, F>(n_samples: u64, seed: u64, chunk_size: u32, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    let chunk = chunk_size.max(1) as u64;
    let n_chunks = n_samples.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = chunk_rng(seed, ci);
            let count = chunk.min(n_samples - ci * chunk);
            body(count, &mut rng)
        })
        .collect()
}

/// Estimate the probability that the race ends in one of `success_labels`.
pub fn estimate_event(
    model: &WalkModel,
    start: Coord,
    rule: &StoppingRule,
    success_labels: &[&str],
    n_samples: u64,
    seed: u64,
    cfg: McConfig,
) -> Result<Estimate, McError> {
    let mut mask = vec![false; rule.labels().len()];
    for l in success_labels {
        mask[rule.label_index(l)?] = true;
    }
    let sampler = StepSampler::new(model.support());
    let basis = *model.basis();
    let chunks = run_chunks(n_samples, seed, cfg.chunk_size, |count, rng| {
        let mut successes = 0u64;
        let mut caps = 0u64;
        for _ in 0..count {
            match simulate_until(&sampler, &basis, start, rule, cfg.hard_cap, rng) {
                Ok(out) => {
                    if mask[out.label] {
                        successes += 1;
                    }
                }
                Err(McError::CapExceeded(_)) => caps += 1,
                Err(e) => unreachable!("simulate_until: {e}"),
            }
        }
        (successes, caps)
    });
    let mut successes = 0u64;
    let mut caps = 0u64;
    for (s, c) in chunks {
        successes += s;
        caps += c;
    }
    let n = n_samples as f64;
    let p = successes as f64 / n;
    let stderr = (p * (1.0 - p) / n).sqrt();
    Ok(Estimate {
        value: p,
        stderr,
        n_samples,
        seed,
        cap_hits: caps,
        wilson: Some(wilson_interval(successes, n_samples, 1.96)),
    })
}

/// Estimate the mean of a functional of the stopped trajectory.
///
/// Capped trajectories contribute no functional value; they are excluded
/// from the mean and surfaced through `cap_hits`.
pub fn estimate_expectation(
    model: &WalkModel,
    start: Coord,
    rule: &StoppingRule,
    functional: &Functional,
    n_samples: u64,
    seed: u64,
    cfg: McConfig,
) -> Result<Estimate, McError> {
    let sampler = StepSampler::new(model.support());
    let basis = *model.basis();
    let chunks = run_chunks(n_samples, seed, cfg.chunk_size, |count, rng| {
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        let mut kept = 0u64;
        let mut caps = 0u64;
        for _ in 0..count {
            match simulate_until(&sampler, &basis, start, rule, cfg.hard_cap, rng) {
                Ok(out) => {
                    let v = functional.apply(&out, &basis);
                    sum += v;
                    sum_sq += v * v;
                    kept += 1;
                }
                Err(McError::CapExceeded(_)) => caps += 1,
                Err(e) => unreachable!("simulate_until: {e}"),
            }
        }
        (sum, sum_sq, kept, caps)
    });
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut kept = 0u64;
    let mut caps = 0u64;
    for (s, q, k, c) in chunks {
        sum += s;
        sum_sq += q;
        kept += k;
        caps += c;
    }
    let n = kept.max(1) as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
        n_samples,
        seed,
        cap_hits: caps,
        wilson: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Trigger;
    use crate::region::{LineKind, Region};

    fn srw_race(n: f64) -> StoppingRule {
        StoppingRule::new(vec![
            ("exit".into(), Trigger::Exit { region: Region::disk(n) }),
            (
                "line".into(),
                Trigger::Enter { region: Region::line(1, LineKind::NonNeg), at_time_zero: false },
            ),
        ])
    }

    #[test]
    fn sure_event_has_zero_stderr() {
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![(
            "start".into(),
            Trigger::Enter { region: Region::disk(100.0), at_time_zero: true },
        )]);
        let e = estimate_event(&m, (0, 0), &rule, &["start"], 5000, 1, McConfig::default()).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.cap_hits, 0);
    }

    #[test]
    fn time_zero_race_start_on_target() {
        // T0 race from a point of the target: probability exactly one.
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![
            (
                "line".into(),
                Trigger::Enter { region: Region::line(1, LineKind::NonNeg), at_time_zero: true },
            ),
            ("exit".into(), Trigger::Exit { region: Region::disk(16.0) }),
        ]);
        let e = estimate_event(&m, (0, 0), &rule, &["line"], 2000, 2, McConfig::default()).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn worker_count_independence() {
        let m = WalkModel::srw();
        let rule = srw_race(16.0);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                estimate_event(&m, (0, 0), &rule, &["exit"], 20_000, 99, McConfig::default()).unwrap()
            })
        };
        let a = run(1);
        let b = run(2);
        let c = run(7);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(b.value.to_bits(), c.value.to_bits());
        assert_eq!(a.cap_hits, c.cap_hits);
    }

    #[test]
    fn chunk_size_changes_stream_but_seed_reproduces() {
        let m = WalkModel::srw();
        let rule = srw_race(12.0);
        let cfg = McConfig { chunk_size: 1000, ..Default::default() };
        let a = estimate_event(&m, (0, 0), &rule, &["exit"], 10_000, 5, cfg).unwrap();
        let b = estimate_event(&m, (0, 0), &rule, &["exit"], 10_000, 5, cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn matches_exact_dirichlet_value() {
        // P^z(T_0 < tau_16) from z = (4, 0) against the exact solve.
        let m = WalkModel::srw();
        let exact = crate::green::hit_before_exit(
            &m,
            &Region::disk(16.0),
            &Region::explicit([(0, 0)]),
            (4, 0),
        )
        .unwrap();
        let rule = StoppingRule::new(vec![
            (
                "hit".into(),
                Trigger::Enter { region: Region::explicit([(0, 0)]), at_time_zero: true },
            ),
            ("exit".into(), Trigger::Exit { region: Region::disk(16.0) }),
        ]);
        let e =
            estimate_event(&m, (4, 0), &rule, &["hit"], 100_000, 31, McConfig::default()).unwrap();
        assert!(
            (e.value - exact).abs() < 3.0 * e.stderr,
            "mc {} +- {} vs exact {exact}",
            e.value,
            e.stderr
        );
    }

    #[test]
    fn expectation_constant_functional() {
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![("exit".into(), Trigger::Exit { region: Region::disk(4.0) })]);
        let f = Functional::Custom(Arc::new(|_, _| 1.0));
        let e = estimate_expectation(&m, (0, 0), &rule, &f, 3000, 8, McConfig::default()).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn overshoot_bounded_for_unit_steps() {
        let m = WalkModel::srw();
        let n = 64.0;
        let rule = StoppingRule::new(vec![("exit".into(), Trigger::Exit { region: Region::disk(n) })]);
        let e = estimate_expectation(
            &m,
            (0, 0),
            &rule,
            &Functional::AbsEnd,
            4000,
            17,
            McConfig::default(),
        )
        .unwrap();
        let over = e.value - n;
        assert!(over >= 0.0 && over < 1.0, "overshoot {over}");
    }
}
