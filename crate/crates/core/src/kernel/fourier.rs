//! Potential kernel via quadrature on the dual torus.
//!
//! The kernel is the limit of the defining series, which sums to
//! `(2pi)^-2 * Re \int (1 - exp(-i th.z)) / (1 - phi(th)) dth` over the
//! torus, `phi` the characteristic function of the step law in lattice
//! coordinates. The integrand is bounded but direction-dependent at the
//! origin, so panels refine geometrically toward zero and the innermost
//! cell is integrated with a local moment expansion. All trigonometric
//! differences use `1 - cos x = 2 sin^2(x/2)` so there is no cancellation
//! at deep refinement levels.

use crate::model::{Coord, WalkModel};

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("step law has an off-origin zero of 1 - phi; fall back to the series evaluator")]
    PeriodicWalk,
    #[error("requested accuracy {requested:.3e} unreachable (achieved {achieved:.3e})")]
    BudgetExceeded { requested: f64, achieved: f64 },
    #[error("not enough samples for the fit ({points} points)")]
    InsufficientSamples { points: usize },
}

/// Quadrature parameters with precomputed Gauss-Legendre nodes.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Geometric refinement levels toward the origin (factor 2 per level).
    pub max_levels: u32,
    /// Highest tolerated phase swing per panel per axis, in radians.
    pub phase_budget: f64,
    /// Absolute accuracy target.
    pub target: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::new(24, 48, 1e-8)
    }
}

impl Quadrature {
    pub fn new(order: usize, max_levels: u32, target: f64) -> Quadrature {
        let (nodes, weights) = gauss_legendre(order);
        Quadrature { nodes, weights, max_levels, phase_budget: 0.6 * order as f64, target }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_{n-1}(x).
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = -x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

struct Integrand<'a> {
    support: &'a [(Coord, f64)],
    z: Coord,
}

impl Integrand<'_> {
    /// Re[(1 - e^{-i th.z}) / (1 - phi(th))], cancellation-free.
    #[inline]
    fn eval(&self, t1: f64, t2: f64) -> f64 {
        let u = t1 * self.z.0 as f64 + t2 * self.z.1 as f64;
        let su = (0.5 * u).sin();
        let num_re = 2.0 * su * su;
        let num_im = u.sin();
        let mut den_re = 0.0;
        let mut den_im = 0.0;
        for &((wx, wy), p) in self.support {
            let v = t1 * wx as f64 + t2 * wy as f64;
            let sv = (0.5 * v).sin();
            den_re += p * 2.0 * sv * sv;
            den_im -= p * v.sin();
        }
        (num_re * den_re + num_im * den_im) / (den_re * den_re + den_im * den_im)
    }
}

/// Same ratio with `1 - phi` replaced by its quadratic-plus-cubic moment
/// model; used on the innermost cell where the full law adds nothing.
struct LocalModel {
    cov: [f64; 3],
    m3: [f64; 4],
    z: Coord,
}

impl LocalModel {
    fn new(model: &WalkModel, z: Coord) -> LocalModel {
        let mut cov = [0.0f64; 3];
        let mut m3 = [0.0f64; 4];
        for &((wx, wy), p) in model.support() {
            let (x, y) = (wx as f64, wy as f64);
            cov[0] += p * x * x;
            cov[1] += p * x * y;
            cov[2] += p * y * y;
            m3[0] += p * x * x * x;
            m3[1] += p * x * x * y;
            m3[2] += p * x * y * y;
            m3[3] += p * y * y * y;
        }
        LocalModel { cov, m3, z }
    }

    #[inline]
    fn eval(&self, t1: f64, t2: f64) -> f64 {
        let u = t1 * self.z.0 as f64 + t2 * self.z.1 as f64;
        let su = (0.5 * u).sin();
        let num_re = 2.0 * su * su;
        let num_im = u.sin();
        let a = 0.5 * (self.cov[0] * t1 * t1 + 2.0 * self.cov[1] * t1 * t2 + self.cov[2] * t2 * t2);
        let b = (self.m3[0] * t1 * t1 * t1
            + 3.0 * self.m3[1] * t1 * t1 * t2
            + 3.0 * self.m3[2] * t1 * t2 * t2
            + self.m3[3] * t2 * t2 * t2)
            / 6.0;
        (num_re * a + num_im * b) / (a * a + b * b)
    }
}

/// Detect an off-origin zero of `1 - phi` on a coarse torus grid.
pub fn is_periodic(model: &WalkModel) -> bool {
    is_periodic_support(model.support())
}

pub(crate) fn is_periodic_support(support: &[(Coord, f64)]) -> bool {
    let n = 128i32;
    for j in -n / 2..n / 2 {
        for k in -n / 2..n / 2 {
            if j.abs() <= 2 && k.abs() <= 2 {
                continue;
            }
            let t1 = j as f64 * std::f64::consts::TAU / n as f64;
            let t2 = k as f64 * std::f64::consts::TAU / n as f64;
            let mut den_re = 0.0;
            let mut den_im = 0.0;
            for &((wx, wy), p) in support {
                let v = t1 * wx as f64 + t2 * wy as f64;
                let sv = (0.5 * v).sin();
                den_re += p * 2.0 * sv * sv;
                den_im -= p * v.sin();
            }
            if den_re * den_re + den_im * den_im < 1e-12 {
                return true;
            }
        }
    }
    false
}

/// Evaluate the kernel at `z` (lattice coordinates). Returns the value and a
/// heuristic error estimate combining the level tail and the innermost cell.
pub fn kernel_fourier(model: &WalkModel, z: Coord, quad: &Quadrature) -> Result<(f64, f64), KernelError> {
    if is_periodic(model) {
        return Err(KernelError::PeriodicWalk);
    }
    Ok(kernel_fourier_unchecked(model, z, quad))
}

/// Quadrature without the periodicity scan; the caller certifies the law.
pub(crate) fn kernel_fourier_unchecked(model: &WalkModel, z: Coord, quad: &Quadrature) -> (f64, f64) {
    if z == (0, 0) {
        return (0.0, 0.0);
    }
    let f = Integrand { support: model.support(), z };
    let w_max = model
        .support()
        .iter()
        .map(|&((x, y), _)| x.abs().max(y.abs()))
        .max()
        .unwrap_or(1) as f64;
    let freq1 = z.0.abs() as f64 + w_max;
    let freq2 = z.1.abs() as f64 + w_max;

    let mut total = 0.0f64;
    let mut last_level = 0.0f64;
    let mut f_scale = 0.0f64;
    let mut s = std::f64::consts::PI;
    let mut level = 0;
    while level < quad.max_levels {
        let half = 0.5 * s;
        // The frame between boxes of half-size s and s/2, as 12 tiles of
        // side s/2 (4x4 grid minus the inner 2x2).
        let mut level_sum = 0.0;
        for bx in 0..4 {
            for by in 0..4 {
                if (1..=2).contains(&bx) && (1..=2).contains(&by) {
                    continue;
                }
                let x0 = -s + bx as f64 * half;
                let y0 = -s + by as f64 * half;
                let m1 = ((half * 0.5 * freq1) / quad.phase_budget).ceil().max(1.0) as usize;
                let m2 = ((half * 0.5 * freq2) / quad.phase_budget).ceil().max(1.0) as usize;
                let dx = half / m1 as f64;
                let dy = half / m2 as f64;
                for i in 0..m1 {
                    for j in 0..m2 {
                        let cx = x0 + (i as f64 + 0.5) * dx;
                        let cy = y0 + (j as f64 + 0.5) * dy;
                        let mut cell = 0.0;
                        for (gi, &nx) in quad.nodes.iter().enumerate() {
                            let t1 = cx + 0.5 * dx * nx;
                            let mut inner = 0.0;
                            for (gj, &ny) in quad.nodes.iter().enumerate() {
                                let t2 = cy + 0.5 * dy * ny;
                                let v = f.eval(t1, t2);
                                inner += quad.weights[gj] * v;
                                f_scale = f_scale.max(v.abs());
                            }
                            cell += quad.weights[gi] * inner;
                        }
                        level_sum += cell * 0.25 * dx * dy;
                    }
                }
            }
        }
        total += level_sum;
        last_level = level_sum.abs();
        s = half;
        level += 1;
        // Deep levels contribute ~ area * bounded integrand; stop once the
        // remaining box is provably below target.
        if level >= 8 {
            let remaining = 4.0 * s * s * integrand_bound(model, z);
            if remaining < 0.25 * quad.target && last_level < 0.25 * quad.target {
                break;
            }
        }
    }
    // Innermost cell with the local moment model.
    let local = LocalModel::new(model, z);
    let mut inner_sum = 0.0;
    for (gi, &nx) in quad.nodes.iter().enumerate() {
        let t1 = s * nx;
        let mut acc = 0.0;
        for (gj, &ny) in quad.nodes.iter().enumerate() {
            acc += quad.weights[gj] * local.eval(t1, s * ny);
        }
        inner_sum += quad.weights[gi] * acc;
    }
    total += inner_sum * s * s * 0.25 * 4.0;
    let inner_bound = 4.0 * s * s * (integrand_bound(model, z) + f_scale);

    let norm = 1.0 / (std::f64::consts::TAU * std::f64::consts::TAU);
    let value = total * norm;
    let err = (last_level + inner_bound) * norm + 1e-14 * value.abs().max(1.0);
    (value, err)
}

/// Crude uniform bound on the integrand near the origin.
fn integrand_bound(model: &WalkModel, z: Coord) -> f64 {
    let z2 = (z.0 * z.0 + z.1 * z.1) as f64;
    let mut m3 = 0.0;
    let mut c = [0.0f64; 3];
    for &((wx, wy), p) in model.support() {
        let r2 = (wx * wx + wy * wy) as f64;
        m3 += p * r2.powf(1.5);
        c[0] += p * (wx * wx) as f64;
        c[1] += p * (wx * wy) as f64;
        c[2] += p * (wy * wy) as f64;
    }
    // Smallest eigenvalue of the coordinate covariance.
    let tr = c[0] + c[2];
    let det = c[0] * c[2] - c[1] * c[1];
    let lam = (0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())).max(1e-12);
    2.0 * z2 / lam + 8.0 * z2.sqrt() * m3 / (lam * lam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WalkModel;

    #[test]
    fn gauss_nodes_integrate_polynomials() {
        let (n, w) = gauss_legendre(8);
        // x^14 over [-1,1] = 2/15, exact for order 8 (degree <= 15).
        let v: f64 = n.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn srw_known_values() {
        let m = WalkModel::srw();
        let q = Quadrature::default();
        // a(1) = 1 exactly: forced by harmonicity at 0 and 4-fold symmetry.
        let (v1, e1) = kernel_fourier(&m, (1, 0), &q).unwrap();
        assert!((v1 - 1.0).abs() < 1e-8, "a(1) = {v1}, err est {e1}");
        assert!((v1 - 1.0).abs() <= e1.max(1e-9) * 10.0);
        // Classical closed forms: a(1,1) = 4/pi, a(2,0) = 4 - 8/pi.
        let (v11, _) = kernel_fourier(&m, (1, 1), &q).unwrap();
        assert!((v11 - 4.0 / std::f64::consts::PI).abs() < 1e-8, "a(1+i) = {v11}");
        let (v2, _) = kernel_fourier(&m, (2, 0), &q).unwrap();
        assert!((v2 - (4.0 - 8.0 / std::f64::consts::PI)).abs() < 1e-8, "a(2) = {v2}");
    }

    #[test]
    fn zero_is_exact() {
        let m = WalkModel::range2();
        let q = Quadrature::default();
        assert_eq!(kernel_fourier(&m, (0, 0), &q).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn symmetric_model_even_kernel() {
        let m = WalkModel::range2();
        let q = Quadrature::default();
        for z in [(1, 0), (2, 1), (3, -2)] {
            let (v, e) = kernel_fourier(&m, z, &q).unwrap();
            let (vn, en) = kernel_fourier(&m, (-z.0, -z.1), &q).unwrap();
            assert!((v - vn).abs() <= (e + en).max(1e-10), "a({z:?}) = {v} vs {vn}");
        }
    }

    #[test]
    fn periodic_detection() {
        // Diagonal steps inside Z^2 generate the even sublattice; 1 - phi
        // vanishes at (pi, pi).
        let s = [((1, 1), 0.25), ((-1, -1), 0.25), ((1, -1), 0.25), ((-1, 1), 0.25)];
        assert!(is_periodic_support(&s));
        // The same law declared on its own diagonal lattice is aperiodic.
        assert!(!is_periodic(&WalkModel::diagonal()));
        assert!(!is_periodic(&WalkModel::srw()));
        assert!(!is_periodic(&WalkModel::range2()));
    }
}
