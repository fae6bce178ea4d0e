//! Trajectory simulation with composite stopping rules.

mod estimate;
mod sampler;

pub use estimate::{estimate_event, estimate_expectation, Estimate, Functional, McConfig};
pub use sampler::StepSampler;

use crate::model::{Coord, LatticeBasis, WalkModel};
use crate::region::Region;
use rand::Rng;

#[derive(Debug, thiserror::Error)]
pub enum McError {
    #[error("no trigger fired within the hard cap of {0} steps")]
    CapExceeded(u64),
    #[error("stopping rule has no trigger that is almost surely finite")]
    NoFiniteTrigger,
    #[error("unknown trigger label {0:?}")]
    UnknownLabel(String),
}

/// One way a trajectory can stop.
#[derive(Debug, Clone)]
pub enum Trigger {
    /// Fires when the walk is in the region; at step 0 only with
    /// `at_time_zero` (the T0 convention), otherwise from step 1 (T).
    Enter { region: Region, at_time_zero: bool },
    /// Fires at the first step `j >= 0` with the walk outside the region
    /// (exit times of disks and strips).
    Exit { region: Region },
    /// Fires when the step index reaches the budget.
    StepBudget(u64),
}

/// Ordered triggers; the first to fire (list order breaks step ties) ends
/// the trajectory.
#[derive(Debug, Clone)]
pub struct StoppingRule {
    triggers: Vec<(String, Trigger)>,
}

impl StoppingRule {
    pub fn new(triggers: Vec<(String, Trigger)>) -> StoppingRule {
        assert!(!triggers.is_empty(), "stopping rule needs at least one trigger");
        StoppingRule { triggers }
    }

    pub fn labels(&self) -> Vec<&str> {
        self.triggers.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn label_index(&self, label: &str) -> Result<usize, McError> {
        self.triggers
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| McError::UnknownLabel(label.to_string()))
    }

    #[inline]
    fn check(&self, pos: Coord, step: u64, basis: &LatticeBasis) -> Option<usize> {
        for (i, (_, t)) in self.triggers.iter().enumerate() {
            let fired = match t {
                Trigger::Enter { region, at_time_zero } => {
                    (step > 0 || *at_time_zero) && region.contains(pos, basis)
                }
                Trigger::Exit { region } => !region.contains(pos, basis),
                Trigger::StepBudget(n) => step >= *n,
            };
            if fired {
                return Some(i);
            }
        }
        None
    }
}

/// Where and why a trajectory stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    /// Index into the rule's trigger list.
    pub label: usize,
    pub step: u64,
    pub position: Coord,
}

/// Run one trajectory from `start` until a trigger fires.
///
/// A hard-cap hit is an error, never a silent outcome.
pub fn simulate_until<R: Rng>(
    sampler: &StepSampler,
    basis: &LatticeBasis,
    start: Coord,
    rule: &StoppingRule,
    hard_cap: u64,
    rng: &mut R,
) -> Result<Outcome, McError> {
    let mut pos = start;
    let mut step: u64 = 0;
    loop {
        if let Some(label) = rule.check(pos, step, basis) {
            return Ok(Outcome { label, step, position: pos });
        }
        if step >= hard_cap {
            return Err(McError::CapExceeded(hard_cap));
        }
        let (dx, dy) = sampler.sample(rng);
        pos.0 += dx;
        pos.1 += dy;
        step += 1;
    }
}

/// Convenience wrapper building the sampler from the model.
pub fn simulate_model<R: Rng>(
    model: &WalkModel,
    start: Coord,
    rule: &StoppingRule,
    hard_cap: u64,
    rng: &mut R,
) -> Result<Outcome, McError> {
    let sampler = StepSampler::new(model.support());
    simulate_until(&sampler, model.basis(), start, rule, hard_cap, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enter_at_time_zero_fires_immediately() {
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![(
            "enter".into(),
            Trigger::Enter { region: Region::explicit([(2, 2)]), at_time_zero: true },
        )]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = simulate_model(&m, (2, 2), &rule, 1000, &mut rng).unwrap();
        assert_eq!(out.step, 0);
        assert_eq!(out.position, (2, 2));
    }

    #[test]
    fn positive_time_semantics_skip_step_zero() {
        let m = WalkModel::srw();
        // Start on the half-line; with T semantics the trigger cannot fire
        // at step 0 even though the start is in the region.
        let rule = StoppingRule::new(vec![
            ("exit".into(), Trigger::Exit { region: Region::disk(4.0) }),
            (
                "line".into(),
                Trigger::Enter { region: Region::line(1, crate::region::LineKind::NonNeg), at_time_zero: false },
            ),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let out = simulate_model(&m, (0, 0), &rule, 100_000, &mut rng).unwrap();
            assert!(out.step >= 1);
        }
    }

    #[test]
    fn unit_disk_exit_after_one_step() {
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![("exit".into(), Trigger::Exit { region: Region::disk(1.0) })]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let out = simulate_model(&m, (0, 0), &rule, 10, &mut rng).unwrap();
            assert_eq!(out.step, 1);
            assert!((out.position.0.abs() + out.position.1.abs()) == 1);
        }
    }

    #[test]
    fn hard_cap_is_an_error() {
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![(
            "never".into(),
            Trigger::Enter { region: Region::explicit([(1_000_000, 0)]), at_time_zero: false },
        )]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        match simulate_model(&m, (0, 0), &rule, 500, &mut rng) {
            Err(McError::CapExceeded(500)) => {}
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn step_budget_is_a_labeled_outcome() {
        let m = WalkModel::srw();
        let rule = StoppingRule::new(vec![
            ("exit".into(), Trigger::Exit { region: Region::disk(1e9) }),
            ("budget".into(), Trigger::StepBudget(100)),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = simulate_model(&m, (0, 0), &rule, 10_000, &mut rng).unwrap();
        assert_eq!(out.label, 1);
        assert_eq!(out.step, 100);
    }

    #[test]
    fn exit_disk_mean_time_scales_quadratically() {
        // E[tau_n] / n^2 stays in a stable bracket over a small n grid.
        let m = WalkModel::srw();
        let sampler = StepSampler::new(m.support());
        let mut ratios = Vec::new();
        for n in [8u32, 16, 32] {
            let rule =
                StoppingRule::new(vec![("exit".into(), Trigger::Exit { region: Region::disk(n as f64) })]);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + n as u64);
            let mut total = 0u64;
            let samples = 400;
            for _ in 0..samples {
                total +=
                    simulate_until(&sampler, m.basis(), (0, 0), &rule, 10_000_000, &mut rng).unwrap().step;
            }
            ratios.push(total as f64 / samples as f64 / (n as f64 * n as f64));
        }
        let spread = crate::stats::ratio_spread(&ratios);
        assert!(spread < 1.6, "tau_n/n^2 ratios {ratios:?}");
    }
}
