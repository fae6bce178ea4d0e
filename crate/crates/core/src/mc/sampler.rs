//! Constant-time step sampling by Vose's alias method.
//!
//! Hand-rolled so the byte-level reproducibility contract depends only on
//! this crate and the counter-mode generator, not on the sampling internals
//! of a dependency.

use crate::model::Coord;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct StepSampler {
    steps: Vec<Coord>,
    /// Acceptance threshold per slot.
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl StepSampler {
    pub fn new(support: &[(Coord, f64)]) -> StepSampler {
        let n = support.len();
        assert!(n > 0);
        let steps: Vec<Coord> = support.iter().map(|e| e.0).collect();
        let mut scaled: Vec<f64> = support.iter().map(|e| e.1 * n as f64).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        let mut prob = vec![1.0f64; n];
        let mut alias = vec![0u32; n];
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s as usize] = scaled[s as usize];
            alias[s as usize] = l;
            scaled[l as usize] = (scaled[l as usize] + scaled[s as usize]) - 1.0;
            if scaled[l as usize] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are numerically 1.
        StepSampler { steps, prob, alias }
    }

    pub fn support_len(&self) -> usize {
        self.steps.len()
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Coord {
        let n = self.steps.len();
        let i = (rng.gen::<u64>() % n as u64) as usize;
        if rng.gen::<f64>() < self.prob[i] {
            self.steps[i]
        } else {
            self.steps[self.alias[i] as usize]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WalkModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frequencies_match_pmf() {
        for m in [WalkModel::srw(), WalkModel::x_asymmetric(), WalkModel::range2()] {
            let s = StepSampler::new(m.support());
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let n = 400_000;
            let mut counts = std::collections::HashMap::new();
            for _ in 0..n {
                *counts.entry(s.sample(&mut rng)).or_insert(0u64) += 1;
            }
            for &(c, p) in m.support() {
                let freq = *counts.get(&c).unwrap_or(&0) as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (freq - p).abs() < 5.0 * se + 1e-9,
                    "model {} step {c:?}: {freq} vs {p}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn heavy_tail_sampler_moments() {
        let m = WalkModel::heavy(7.5, 1000).unwrap();
        let s = StepSampler::new(m.support());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let mut sum = (0.0, 0.0);
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let (x, y) = s.sample(&mut rng);
            sum.0 += x as f64;
            sum.1 += y as f64;
            sum_sq += (x * x) as f64;
        }
        assert!((sum.0 / n as f64).abs() < 0.05);
        assert!((sum.1 / n as f64).abs() < 0.05);
        let sigma2 = sum_sq / n as f64;
        assert!((sigma2 - m.sigma2()).abs() < 0.1, "sampled {sigma2} vs {}", m.sigma2());
    }

    #[test]
    fn deterministic_given_stream() {
        let m = WalkModel::srw();
        let s = StepSampler::new(m.support());
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Coord> = (0..100).map(|_| s.sample(&mut a)).collect();
        let ys: Vec<Coord> = (0..100).map(|_| s.sample(&mut b)).collect();
        assert_eq!(xs, ys);
    }
}
