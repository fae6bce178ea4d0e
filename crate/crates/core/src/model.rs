//! Walk models: lattice bases, step distributions and their moment checks.
//!
//! A model is a two-dimensional lattice together with a mean-zero step
//! distribution whose covariance is a multiple of the identity. Walks on the
//! integer lattice with a general covariance can be brought into this frame
//! with [`normalize`].

use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::fmt;

/// Integer coordinates of a lattice point in the basis of its lattice.
pub type Coord = (i64, i64);

/// Tolerance for probability-mass checks (sum to one, mean zero).
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance for isotropy of the covariance matrix.
pub const COV_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("probabilities must be nonnegative and sum to 1 (deviation {0:.3e})")]
    NonProbability(f64),
    #[error("support spans a line; a two-dimensional step distribution is required")]
    DegenerateSupport,
    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,
    #[error("lattice basis vectors are linearly dependent")]
    DegenerateBasis,
    #[error("step distribution violates walk conditions: {0:?}")]
    ConditionsViolated(Vec<ConditionViolation>),
    #[error("heavy-tail exponent {beta} too small: requires beta > 4 + delta = {min}")]
    HeavyTailExponent { beta: f64, min: f64 },
    #[error("model description: {0}")]
    Parse(String),
}

/// Which of the standing walk conditions a distribution fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionViolation {
    /// Mean of the step law is not zero (first condition).
    NonzeroMean,
    /// Covariance is not a positive multiple of the identity (second condition).
    AnisotropicCovariance,
    /// The 3+delta moment is not finite (third condition).
    InfiniteMoment,
    /// Support does not generate the declared lattice.
    DoesNotGenerate,
}

/// Basis of a two-dimensional lattice `{ j*e1 + k*e2 }` embedded in the plane.
///
/// The canonical frame uses `e1 = 1` and `e2` with nonzero imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBasis {
    pub e1: [f64; 2],
    pub e2: [f64; 2],
}

impl LatticeBasis {
    /// The integer lattice: `e1 = 1`, `e2 = i`.
    pub fn standard() -> Self {
        LatticeBasis { e1: [1.0, 0.0], e2: [0.0, 1.0] }
    }

    pub fn new(e1: [f64; 2], e2: [f64; 2]) -> Result<Self, ModelError> {
        let b = LatticeBasis { e1, e2 };
        let scale = e1[0].abs() + e1[1].abs() + e2[0].abs() + e2[1].abs();
        if b.det().abs() <= 1e-12 * scale * scale {
            return Err(ModelError::DegenerateBasis);
        }
        Ok(b)
    }

    pub fn det(&self) -> f64 {
        self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0]
    }

    pub fn is_standard(&self) -> bool {
        self.e1 == [1.0, 0.0] && self.e2 == [0.0, 1.0]
    }

    /// Physical position of the lattice point with integer coordinates `c`.
    #[inline]
    pub fn to_physical(&self, c: Coord) -> [f64; 2] {
        let (j, k) = (c.0 as f64, c.1 as f64);
        [j * self.e1[0] + k * self.e2[0], j * self.e1[1] + k * self.e2[1]]
    }

    /// Integer coordinates of a physical point known to lie on the lattice.
    pub fn coords(&self, p: [f64; 2]) -> Coord {
        let d = self.det();
        let j = (p[0] * self.e2[1] - p[1] * self.e2[0]) / d;
        let k = (p[1] * self.e1[0] - p[0] * self.e1[1]) / d;
        (j.round() as i64, k.round() as i64)
    }

    /// Squared modulus of the lattice point with coordinates `c`.
    #[inline]
    pub fn norm2(&self, c: Coord) -> f64 {
        if self.is_standard() {
            (c.0 * c.0 + c.1 * c.1) as f64
        } else {
            let p = self.to_physical(c);
            p[0] * p[0] + p[1] * p[1]
        }
    }
}

/// Parametric heavy-tail family: axis-aligned steps with
/// `P(|step| = r)` proportional to `r^-beta`, truncated at `rmax`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTail {
    pub beta: f64,
    pub rmax: u32,
}

/// A finitely supported probability mass function on lattice coordinates.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    support: Vec<(Coord, f64)>,
    moment_exponent: f64,
    heavy: Option<HeavyTail>,
}

impl StepDistribution {
    /// Build from explicit `(coordinate, probability)` pairs.
    ///
    /// Duplicate coordinates are merged. Fails with `NonProbability` when any
    /// mass is negative or the total deviates from 1 by more than `MASS_TOL`.
    pub fn from_support(pairs: &[(Coord, f64)], moment_exponent: f64) -> Result<Self, ModelError> {
        let mut support: Vec<(Coord, f64)> = Vec::new();
        for &(c, p) in pairs {
            if p < 0.0 {
                return Err(ModelError::NonProbability(p));
            }
            match support.binary_search_by_key(&c, |e| e.0) {
                Ok(i) => support[i].1 += p,
                Err(i) => support.insert(i, (c, p)),
            }
        }
        support.retain(|e| e.1 > 0.0);
        let total: f64 = support.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(ModelError::NonProbability(total - 1.0));
        }
        if support.len() < 2 {
            return Err(ModelError::DegenerateSupport);
        }
        Ok(StepDistribution { support, moment_exponent, heavy: None })
    }

    /// The truncated power-law family. The 3+delta moment condition is
    /// certified analytically from the exponent, so `beta > 4 + delta` is
    /// required even though the truncated law has all moments.
    pub fn heavy_tail(beta: f64, rmax: u32, delta: f64) -> Result<Self, ModelError> {
        if beta <= 4.0 + delta {
            return Err(ModelError::HeavyTailExponent { beta, min: 4.0 + delta });
        }
        if rmax == 0 {
            return Err(ModelError::Parse("heavy-tail rmax must be positive".into()));
        }
        let z: f64 = (1..=rmax).map(|r| (r as f64).powf(-beta)).sum();
        let mut pairs = Vec::with_capacity(4 * rmax as usize);
        for r in 1..=rmax as i64 {
            let q = (r as f64).powf(-beta) / (4.0 * z);
            pairs.push(((r, 0), q));
            pairs.push(((-r, 0), q));
            pairs.push(((0, r), q));
            pairs.push(((0, -r), q));
        }
        let mut dist = Self::from_support(&pairs, delta)?;
        dist.heavy = Some(HeavyTail { beta, rmax });
        Ok(dist)
    }

    /// Support as sorted `(coordinate, probability)` pairs.
    pub fn support(&self) -> &[(Coord, f64)] {
        &self.support
    }

    pub fn pmf(&self, c: Coord) -> f64 {
        self.support
            .binary_search_by_key(&c, |e| e.0)
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    pub fn moment_exponent(&self) -> f64 {
        self.moment_exponent
    }

    pub fn heavy(&self) -> Option<HeavyTail> {
        self.heavy
    }

    /// The reversed law `p*(z) = p(-z)`.
    pub fn reversed(&self) -> StepDistribution {
        let pairs: Vec<(Coord, f64)> =
            self.support.iter().map(|&((x, y), p)| ((-x, -y), p)).collect();
        let mut d = Self::from_support(&pairs, self.moment_exponent)
            .expect("reversal preserves probability");
        d.heavy = self.heavy;
        d
    }

    pub fn is_symmetric(&self) -> bool {
        self.support.iter().all(|&((x, y), p)| (self.pmf((-x, -y)) - p).abs() == 0.0)
    }
}

/// Either a computed moment value or a certificate that it is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentBound {
    Value(f64),
    AnalyticallyFinite,
}

/// Moments of a step law in physical coordinates, with condition flags.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub sigma2: f64,
    pub third_plus_delta_moment: MomentBound,
    pub generates_lattice: bool,
    pub violations: Vec<ConditionViolation>,
}

impl MomentReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Index in `Z^2` of the subgroup generated by the given coordinate vectors.
/// Returns `None` when the vectors span a rank-deficient subgroup.
///
/// Keeps a triangular basis `(r1, (0, b))` and folds generators in one at a
/// time with unimodular row operations.
fn subgroup_index(vecs: &[Coord]) -> Option<i64> {
    let mut r1: Coord = (0, 0);
    let mut b: i64 = 0;
    for &v in vecs {
        let mut v = v;
        if v.0 != 0 {
            let (g, s, t) = ext_gcd(r1.0, v.0);
            let new_r1 = (s * r1.0 + t * v.0, s * r1.1 + t * v.1);
            v = (0, (r1.0 / g) * v.1 - (v.0 / g) * r1.1);
            r1 = new_r1;
        }
        if v.1 != 0 {
            b = gcd(b, v.1);
        }
    }
    if r1.0 == 0 || b == 0 {
        None
    } else {
        Some((r1.0 * b).abs())
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Extended gcd: `(g, s, t)` with `s*a + t*b = g = gcd(a, b)`, `g > 0`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Compute moments in physical coordinates and flag violated conditions.
///
/// Hard structural failures (negative or non-unit mass, support on a line)
/// are errors; condition violations are reported in the result.
pub fn validate(dist: &StepDistribution, basis: &LatticeBasis) -> Result<MomentReport, ModelError> {
    if dist.support.len() < 2 {
        return Err(ModelError::DegenerateSupport);
    }
    // Rank of the physical span of the support.
    let mut rank2 = false;
    let first = dist.support[0].0;
    for &(c, _) in &dist.support[1..] {
        if first.0 as i128 * c.1 as i128 != first.1 as i128 * c.0 as i128 {
            rank2 = true;
            break;
        }
    }
    if !rank2 {
        return Err(ModelError::DegenerateSupport);
    }

    let mut mean = [0.0f64; 2];
    let mut cov = [[0.0f64; 2]; 2];
    let mut m3d = 0.0f64;
    let delta = dist.moment_exponent;
    for &(c, p) in &dist.support {
        let z = basis.to_physical(c);
        mean[0] += p * z[0];
        mean[1] += p * z[1];
        cov[0][0] += p * z[0] * z[0];
        cov[0][1] += p * z[0] * z[1];
        cov[1][1] += p * z[1] * z[1];
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        m3d += p * r.powf(3.0 + delta);
    }
    cov[1][0] = cov[0][1];

    let mut violations = Vec::new();
    if mean[0].abs() > MASS_TOL || mean[1].abs() > MASS_TOL {
        violations.push(ConditionViolation::NonzeroMean);
    }
    let sigma2 = 0.5 * (cov[0][0] + cov[1][1]);
    if (cov[0][0] - cov[1][1]).abs() > COV_TOL || cov[0][1].abs() > COV_TOL || sigma2 <= 0.0 {
        violations.push(ConditionViolation::AnisotropicCovariance);
    }
    let third = if dist.heavy.is_some() {
        // Certified from the exponent at construction time.
        MomentBound::AnalyticallyFinite
    } else {
        MomentBound::Value(m3d)
    };

    let coords: Vec<Coord> = dist.support.iter().map(|e| e.0).collect();
    let generates = subgroup_index(&coords) == Some(1);
    if !generates {
        violations.push(ConditionViolation::DoesNotGenerate);
    }

    Ok(MomentReport {
        mean,
        covariance: cov,
        sigma2,
        third_plus_delta_moment: third,
        generates_lattice: generates,
        violations,
    })
}

/// An admissible walk: validated step law on its lattice.
#[derive(Clone)]
pub struct WalkModel {
    name: String,
    basis: LatticeBasis,
    dist: StepDistribution,
    report: MomentReport,
    hash: String,
}

impl fmt::Debug for WalkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WalkModel({}, {} steps, sigma2={})", self.name, self.dist.support.len(), self.sigma2())
    }
}

impl WalkModel {
    pub fn new(name: &str, basis: LatticeBasis, dist: StepDistribution) -> Result<Self, ModelError> {
        let report = validate(&dist, &basis)?;
        if !report.passes() {
            return Err(ModelError::ConditionsViolated(report.violations));
        }
        let hash = content_hash(&basis, &dist);
        Ok(WalkModel { name: name.to_string(), basis, dist, report, hash })
    }

    /// Simple random walk: uniform on the four unit steps.
    pub fn srw() -> WalkModel {
        let s = [((1, 0), 0.25), ((-1, 0), 0.25), ((0, 1), 0.25), ((0, -1), 0.25)];
        let dist = StepDistribution::from_support(&s, 1.0).unwrap();
        WalkModel::new("srw", LatticeBasis::standard(), dist).unwrap()
    }

    /// Uniform on the eight axis steps of length one and two.
    pub fn range2() -> WalkModel {
        let p = 1.0 / 8.0;
        let s = [
            ((1, 0), p),
            ((-1, 0), p),
            ((2, 0), p),
            ((-2, 0), p),
            ((0, 1), p),
            ((0, -1), p),
            ((0, 2), p),
            ((0, -2), p),
        ];
        let dist = StepDistribution::from_support(&s, 1.0).unwrap();
        WalkModel::new("range2", LatticeBasis::standard(), dist).unwrap()
    }

    /// A mean-zero isotropic walk that is not symmetric in the x direction:
    /// one step of +2 balanced by a double-weight step of -1.
    pub fn x_asymmetric() -> WalkModel {
        let s = [((2, 0), 1.0 / 9.0), ((-1, 0), 2.0 / 9.0), ((0, 1), 1.0 / 3.0), ((0, -1), 1.0 / 3.0)];
        let dist = StepDistribution::from_support(&s, 1.0).unwrap();
        WalkModel::new("asym", LatticeBasis::standard(), dist).unwrap()
    }

    /// Uniform diagonal steps, declared on the even sublattice they generate.
    pub fn diagonal() -> WalkModel {
        let basis = LatticeBasis::new([1.0, 1.0], [-1.0, 1.0]).unwrap();
        let p = 0.25;
        // Coordinates are in the diagonal basis: (1,0) is the step 1+i.
        let s = [((1, 0), p), ((-1, 0), p), ((0, 1), p), ((0, -1), p)];
        let dist = StepDistribution::from_support(&s, 1.0).unwrap();
        WalkModel::new("diag", basis, dist).unwrap()
    }

    /// Truncated power-law walk with tail exponent `beta`.
    pub fn heavy(beta: f64, rmax: u32) -> Result<WalkModel, ModelError> {
        let delta = (beta - 4.0).min(1.0) * 0.5;
        let dist = StepDistribution::heavy_tail(beta, rmax, delta)?;
        WalkModel::new(&format!("heavy{beta}"), LatticeBasis::standard(), dist)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn dist(&self) -> &StepDistribution {
        &self.dist
    }

    pub fn support(&self) -> &[(Coord, f64)] {
        self.dist.support()
    }

    pub fn report(&self) -> &MomentReport {
        &self.report
    }

    pub fn sigma2(&self) -> f64 {
        self.report.sigma2
    }

    /// Stable content hash (basis, support, probabilities, delta).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// The time-reversed walk, with `p*(z) = p(-z)`.
    pub fn reverse(&self) -> WalkModel {
        let name = if let Some(base) = self.name.strip_suffix('*') {
            base.to_string()
        } else {
            format!("{}*", self.name)
        };
        let dist = self.dist.reversed();
        let report = validate(&dist, &self.basis).expect("reversal preserves validity");
        let hash = content_hash(&self.basis, &dist);
        WalkModel { name, basis: self.basis, dist, report, hash }
    }

    pub fn is_symmetric(&self) -> bool {
        self.dist.is_symmetric()
    }

    /// Largest physical step length in the support.
    pub fn max_step(&self) -> f64 {
        self.dist
            .support()
            .iter()
            .map(|&(c, _)| self.basis.norm2(c).sqrt())
            .fold(0.0, f64::max)
    }
}

fn content_hash(basis: &LatticeBasis, dist: &StepDistribution) -> String {
    let mut h = Sha256::new();
    for v in [basis.e1[0], basis.e1[1], basis.e2[0], basis.e2[1]] {
        h.update(v.to_bits().to_le_bytes());
    }
    for &((x, y), p) in dist.support() {
        h.update(x.to_le_bytes());
        h.update(y.to_le_bytes());
        h.update(p.to_bits().to_le_bytes());
    }
    h.update(dist.moment_exponent().to_bits().to_le_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Bring a walk with positive-definite covariance into the isotropic frame.
///
/// Returns the symmetric linear map `L` (applied to physical positions) and
/// the transformed model. Integer coordinates of support points are
/// unchanged; only the lattice basis is mapped, so the image of every support
/// point is exactly a point of the image lattice. The scale is fixed so that
/// the y-variance is preserved, hence already-isotropic walks map by the
/// identity.
pub fn normalize(model: &WalkModel) -> Result<([[f64; 2]; 2], WalkModel), ModelError> {
    let dist = model.dist();
    let basis = model.basis();
    let rep = validate(dist, basis)?;
    let c = rep.covariance;
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    if det <= 0.0 || c[0][0] <= 0.0 {
        return Err(ModelError::SingularCovariance);
    }
    let iso = (c[0][0] - c[1][1]).abs() <= COV_TOL && c[0][1].abs() <= COV_TOL;
    let map = if iso {
        [[1.0, 0.0], [0.0, 1.0]]
    } else {
        // L = sqrt(c_yy) * C^{-1/2}, via the closed-form square root of a
        // symmetric positive definite 2x2 matrix.
        let tr = c[0][0] + c[1][1];
        let s = det.sqrt();
        let t = (tr + 2.0 * s).sqrt();
        // sqrt(C) = (C + s*I) / t
        let sq = [[(c[0][0] + s) / t, c[0][1] / t], [c[1][0] / t, (c[1][1] + s) / t]];
        let sdet = sq[0][0] * sq[1][1] - sq[0][1] * sq[1][0];
        let inv = [[sq[1][1] / sdet, -sq[0][1] / sdet], [-sq[1][0] / sdet, sq[0][0] / sdet]];
        let scale = c[1][1].sqrt();
        [[scale * inv[0][0], scale * inv[0][1]], [scale * inv[1][0], scale * inv[1][1]]]
    };
    let apply = |v: [f64; 2]| [map[0][0] * v[0] + map[0][1] * v[1], map[1][0] * v[0] + map[1][1] * v[1]];
    let new_basis = LatticeBasis::new(apply(basis.e1), apply(basis.e2))?;
    let model2 = WalkModel::new(&format!("{}-normalized", model.name()), new_basis, dist.clone())?;
    Ok((map, model2))
}

#[derive(Deserialize)]
struct ModelFile {
    kind: String,
    #[serde(default)]
    support: Vec<(i64, i64, serde_json::Value)>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    rmax: Option<u32>,
    #[serde(default)]
    delta: Option<f64>,
}

fn parse_prob(v: &serde_json::Value) -> Result<f64, ModelError> {
    match v {
        serde_json::Value::Number(n) => {
            n.as_f64().ok_or_else(|| ModelError::Parse(format!("bad probability {n}")))
        }
        serde_json::Value::String(s) => {
            // Exact decimal strings, plus "a/b" rationals for convenience.
            if let Some((num, den)) = s.split_once('/') {
                let num: f64 = num.trim().parse().map_err(|_| ModelError::Parse(format!("bad probability {s:?}")))?;
                let den: f64 = den.trim().parse().map_err(|_| ModelError::Parse(format!("bad probability {s:?}")))?;
                if den == 0.0 {
                    return Err(ModelError::Parse(format!("zero denominator in {s:?}")));
                }
                Ok(num / den)
            } else {
                s.trim().parse().map_err(|_| ModelError::Parse(format!("bad probability {s:?}")))
            }
        }
        other => Err(ModelError::Parse(format!("bad probability {other}"))),
    }
}

/// Parse a model description file.
///
/// Format: `{"kind": "srw" | "range2" | "custom" | "heavy",
/// "support": [[dx, dy, prob], ...], "beta": b, "rmax": r}`. Probabilities
/// may be JSON numbers or strings ("0.25", "2/9").
pub fn model_from_json(text: &str) -> Result<WalkModel, ModelError> {
    let raw: ModelFile =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    match raw.kind.as_str() {
        "srw" => Ok(WalkModel::srw()),
        "range2" => Ok(WalkModel::range2()),
        "asym" => Ok(WalkModel::x_asymmetric()),
        "heavy" => {
            let beta = raw.beta.ok_or_else(|| ModelError::Parse("heavy model requires beta".into()))?;
            let rmax = raw.rmax.unwrap_or(10_000);
            WalkModel::heavy(beta, rmax)
        }
        "custom" => {
            if raw.support.is_empty() {
                return Err(ModelError::Parse("custom model requires a support list".into()));
            }
            let mut pairs = Vec::with_capacity(raw.support.len());
            for (x, y, pv) in &raw.support {
                pairs.push((((*x), (*y)), parse_prob(pv)?));
            }
            let dist = StepDistribution::from_support(&pairs, raw.delta.unwrap_or(1.0))?;
            WalkModel::new("custom", LatticeBasis::standard(), dist)
        }
        other => Err(ModelError::Parse(format!("unknown model kind {other:?}"))),
    }
}

/// Resolve a model argument: a builtin name or a path to a JSON file.
pub fn resolve_model(spec: &str) -> Result<WalkModel, ModelError> {
    match spec {
        "srw" => Ok(WalkModel::srw()),
        "range2" => Ok(WalkModel::range2()),
        "asym" => Ok(WalkModel::x_asymmetric()),
        "diag" => Ok(WalkModel::diagonal()),
        "heavy" => WalkModel::heavy(7.5, 10_000),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ModelError::Parse(format!("{path}: {e}")))?;
            model_from_json(&text)
        }
    }
}
