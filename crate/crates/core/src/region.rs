//! Stopping sets: disks, strips, arithmetic line sets, segments, dense sets.
//!
//! Membership is O(1) for every variant except `Explicit`, which uses a hash
//! set. All regions are immutable once built and cheap to share.

use crate::model::{Coord, LatticeBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum RegionError {
    #[error("annulus {0} (width kappa) contains no lattice point")]
    EmptyAnnulus(u32),
    #[error("region spec: {0}")]
    Parse(String),
    #[error("region is not finite")]
    NotFinite,
    #[error("kappa multiples are not points of this lattice")]
    LineOffLattice,
}

/// Which arithmetic progression of multiples of kappa a line set uses.
/// The set is `{ kappa * (shift + m) : m in kind }` on the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    /// m >= 0
    NonNeg,
    /// m > 0
    Pos,
    /// m < 0
    Neg,
    /// m <= 0
    NonPos,
    /// all integers m
    All,
}

impl LineKind {
    fn admits(self, m: i64) -> bool {
        match self {
            LineKind::NonNeg => m >= 0,
            LineKind::Pos => m > 0,
            LineKind::Neg => m < 0,
            LineKind::NonPos => m <= 0,
            LineKind::All => true,
        }
    }
}

/// Placement policy for dense-set points, one per annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Nearest lattice point to the positive real axis in each annulus.
    Ray,
    /// Independent uniform angle per annulus, seeded.
    RandomAngle(u64),
    /// Angles alternate between 0 and pi.
    Alternating,
    /// Angle advances by the golden angle per annulus.
    Spiral,
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Ray => "ray".into(),
            Policy::RandomAngle(s) => format!("random{s}"),
            Policy::Alternating => "alternating".into(),
            Policy::Spiral => "spiral".into(),
        }
    }

    pub fn parse(s: &str, seed: u64) -> Result<Policy, RegionError> {
        match s {
            "ray" => Ok(Policy::Ray),
            "random" | "random-angle" => Ok(Policy::RandomAngle(seed)),
            "alternating" => Ok(Policy::Alternating),
            "spiral" => Ok(Policy::Spiral),
            other => Err(RegionError::Parse(format!("unknown policy {other:?}"))),
        }
    }
}

/// A minimal dense set: one lattice point per annulus `[t*kappa, (t+1)*kappa)`
/// below the cutoff radius, so every origin-centered annulus of width kappa
/// meets the set.
#[derive(Debug, Clone)]
pub struct DenseSet {
    kappa: u32,
    cutoff: u32,
    /// `points[t]` lies in the annulus `[t*kappa, (t+1)*kappa)`.
    points: Vec<Coord>,
    policy: String,
}

impl DenseSet {
    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn policy(&self) -> &str {
        &self.policy
    }

    pub fn points(&self) -> &[Coord] {
        &self.points
    }

    /// Exact membership for standard-lattice coordinates.
    #[inline]
    pub fn contains_std(&self, z: Coord) -> bool {
        let n2 = (z.0 * z.0 + z.1 * z.1) as u64;
        let t = (isqrt(n2) / self.kappa as u64) as usize;
        t < self.points.len() && self.points[t] == z
    }

    /// Points of `A` with `inner <= |w| < outer` (the annulus slice).
    pub fn slice(&self, basis: &LatticeBasis, inner: f64, outer: f64) -> Vec<Coord> {
        self.points
            .iter()
            .copied()
            .filter(|&w| {
                let r2 = basis.norm2(w);
                r2 >= inner * inner && r2 < outer * outer
            })
            .collect()
    }
}

/// Integer square root: largest `r` with `r*r <= n`.
pub fn isqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).map_or(true, |s| s > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).map_or(false, |s| s <= n) {
        r += 1;
    }
    r
}

/// Build a minimal dense set on the lattice, materialized below `cutoff`.
///
/// Annulus point selection tie-breaks by smallest angle difference to the
/// policy angle, then lexicographic coordinates, so the construction is
/// deterministic.
pub fn make_dense(
    basis: &LatticeBasis,
    kappa: u32,
    cutoff: u32,
    policy: Policy,
) -> Result<DenseSet, RegionError> {
    assert!(kappa >= 1, "kappa must be a positive integer");
    let n_annuli = (cutoff as usize).div_ceil(kappa as usize);
    let mut rng = match policy {
        Policy::RandomAngle(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let mut points = Vec::with_capacity(n_annuli);
    for t in 0..n_annuli {
        let angle = match policy {
            Policy::Ray => 0.0,
            Policy::RandomAngle(_) => {
                rng.as_mut().unwrap().gen::<f64>() * std::f64::consts::TAU
            }
            Policy::Alternating => {
                if t % 2 == 0 {
                    0.0
                } else {
                    std::f64::consts::PI
                }
            }
            Policy::Spiral => (t as f64 * golden) % std::f64::consts::TAU,
        };
        let lo = (t as u64) * kappa as u64;
        let hi = lo + kappa as u64;
        let w = pick_annulus_point(basis, lo, hi, angle)
            .ok_or(RegionError::EmptyAnnulus(t as u32 * kappa))?;
        points.push(w);
    }
    Ok(DenseSet { kappa, cutoff, points, policy: policy.label() })
}

/// Lattice point with `lo <= |w| < hi` nearest in angle to `angle`.
fn pick_annulus_point(basis: &LatticeBasis, lo: u64, hi: u64, angle: f64) -> Option<Coord> {
    // Bounding box in coordinates: |coords| bounded by |w| scaled by the
    // inverse basis; for the standard basis this is just hi.
    let scale = if basis.is_standard() {
        1.0
    } else {
        let d = basis.det().abs();
        let m = |v: [f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        (m(basis.e1) + m(basis.e2)) / d
    };
    let bound = ((hi as f64) * scale).ceil() as i64 + 1;
    let (lo2, hi2) = ((lo * lo) as f64, (hi * hi) as f64);
    let mut best: Option<(f64, Coord)> = None;
    for x in -bound..=bound {
        for y in -bound..=bound {
            let r2 = basis.norm2((x, y));
            if r2 < lo2 || r2 >= hi2 {
                continue;
            }
            let p = basis.to_physical((x, y));
            let mut d = (p[1].atan2(p[0]) - angle).rem_euclid(std::f64::consts::TAU);
            if d > std::f64::consts::PI {
                d = std::f64::consts::TAU - d;
            }
            let cand = (d, (x, y));
            best = Some(match best {
                None => cand,
                Some(b) => {
                    if cand.0 < b.0 - 1e-12 || (cand.0 < b.0 + 1e-12 && cand.1 < b.1) {
                        cand
                    } else {
                        b
                    }
                }
            });
        }
    }
    best.map(|b| b.1)
}

/// True iff every annulus of width kappa fully below the cutoff meets the set.
pub fn is_dense(points: &[Coord], basis: &LatticeBasis, kappa: u32, cutoff: u32) -> bool {
    let n_annuli = cutoff as u64 / kappa as u64;
    if n_annuli == 0 {
        return true;
    }
    let mut hit = vec![false; n_annuli as usize];
    for &w in points {
        let r = basis.norm2(w).sqrt();
        let t = (r / kappa as f64).floor() as u64;
        if t < n_annuli {
            // Guard against rounding at annulus boundaries on the standard
            // lattice, where radii are exact integer square roots.
            let t = if basis.is_standard() {
                isqrt((w.0 * w.0 + w.1 * w.1) as u64) / kappa as u64
            } else {
                t
            };
            if t < n_annuli {
                hit[t as usize] = true;
            }
        }
    }
    hit.iter().all(|&h| h)
}

/// A stopping set.
#[derive(Debug, Clone)]
pub enum Region {
    /// Open disk `{ |z| < radius }`.
    Disk { radius: f64 },
    /// Closed disk `{ |z| <= radius }`.
    ClosedDisk { radius: f64 },
    /// Open strip `{ |Im z| < half_width }`.
    Strip { half_width: f64 },
    /// Arithmetic set of multiples of kappa on the real axis.
    Line { kappa: u32, kind: LineKind, shift: i64 },
    /// Multiples of kappa in `[lo, hi)`; `two_sided` admits negative ones,
    /// otherwise only nonnegative multiples qualify.
    Segment { kappa: u32, lo: i64, hi: i64, two_sided: bool },
    /// An explicit finite point set.
    Explicit(Arc<HashSet<Coord>>),
    /// A materialized minimal dense set.
    Dense(Arc<DenseSet>),
    /// `set` intersected with the annulus `inner <= |z| < outer`.
    AnnulusSlice { set: Box<Region>, inner: f64, outer: f64 },
    Complement(Box<Region>),
    Union(Vec<Region>),
}

impl Region {
    pub fn disk(radius: f64) -> Region {
        Region::Disk { radius }
    }

    pub fn strip(half_width: f64) -> Region {
        Region::Strip { half_width }
    }

    pub fn line(kappa: u32, kind: LineKind) -> Region {
        Region::Line { kappa, kind, shift: 0 }
    }

    pub fn shifted_line(kappa: u32, kind: LineKind, shift: i64) -> Region {
        Region::Line { kappa, kind, shift }
    }

    pub fn segment(kappa: u32, lo: i64, hi: i64) -> Region {
        Region::Segment { kappa, lo, hi, two_sided: false }
    }

    pub fn segment_two_sided(kappa: u32, lo: i64, hi: i64) -> Region {
        Region::Segment { kappa, lo, hi, two_sided: true }
    }

    pub fn explicit<I: IntoIterator<Item = Coord>>(points: I) -> Region {
        Region::Explicit(Arc::new(points.into_iter().collect()))
    }

    pub fn dense(set: DenseSet) -> Region {
        Region::Dense(Arc::new(set))
    }

    /// `A[j1, j2]`: the part of a set in the annulus `j1 <= |z| < j2`.
    pub fn annulus_slice(set: Region, inner: f64, outer: f64) -> Region {
        Region::AnnulusSlice { set: Box::new(set), inner, outer }
    }

    pub fn contains(&self, z: Coord, basis: &LatticeBasis) -> bool {
        match self {
            Region::Disk { radius } => basis.norm2(z) < radius * radius,
            Region::ClosedDisk { radius } => basis.norm2(z) <= radius * radius,
            Region::Strip { half_width } => {
                let y = if basis.is_standard() {
                    z.1 as f64
                } else {
                    basis.to_physical(z)[1]
                };
                y.abs() < *half_width
            }
            Region::Line { kappa, kind, shift } => {
                line_multiple(z, basis, *kappa).is_some_and(|t| kind.admits(t - shift))
            }
            Region::Segment { kappa, lo, hi, two_sided } => {
                line_multiple(z, basis, *kappa).is_some_and(|t| {
                    let x = t * *kappa as i64;
                    x >= *lo && x < *hi && (*two_sided || x >= 0)
                })
            }
            Region::Explicit(set) => set.contains(&z),
            Region::Dense(a) => {
                if basis.is_standard() {
                    a.contains_std(z)
                } else {
                    let r = basis.norm2(z).sqrt();
                    let t = (r / a.kappa as f64).floor() as usize;
                    t < a.points.len() && a.points[t] == z
                }
            }
            Region::AnnulusSlice { set, inner, outer } => {
                let r2 = basis.norm2(z);
                r2 >= inner * inner && r2 < outer * outer && set.contains(z, basis)
            }
            Region::Complement(r) => !r.contains(z, basis),
            Region::Union(rs) => rs.iter().any(|r| r.contains(z, basis)),
        }
    }

    /// All member points, for finite regions. `None` when infinite.
    pub fn enumerate(&self, basis: &LatticeBasis) -> Option<Vec<Coord>> {
        let mut pts = match self {
            Region::Disk { radius } | Region::ClosedDisk { radius } => {
                let scale = if basis.is_standard() {
                    1.0
                } else {
                    let d = basis.det().abs();
                    let m = |v: [f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
                    (m(basis.e1) + m(basis.e2)) / d
                };
                let b = (radius * scale).ceil() as i64 + 1;
                let mut pts = Vec::new();
                for x in -b..=b {
                    for y in -b..=b {
                        if self.contains((x, y), basis) {
                            pts.push((x, y));
                        }
                    }
                }
                pts
            }
            Region::Strip { .. } | Region::Line { .. } | Region::Complement(_) => return None,
            Region::Segment { kappa, lo, hi, two_sided } => {
                let k = *kappa as i64;
                let start = if *two_sided { lo.div_euclid(k) } else { lo.div_euclid(k).max(0) };
                let mut pts = Vec::new();
                let mut t = start;
                while t * k < *lo {
                    t += 1;
                }
                while t * k < *hi {
                    if *two_sided || t >= 0 {
                        if let Some(p) = lattice_real_point(basis, t * k) {
                            pts.push(p);
                        }
                    }
                    t += 1;
                }
                pts
            }
            Region::Explicit(set) => {
                let mut pts: Vec<Coord> = set.iter().copied().collect();
                pts.sort_unstable();
                pts
            }
            Region::Dense(a) => a.points.clone(),
            Region::AnnulusSlice { set, inner, outer } => {
                let inner_pts = set.enumerate(basis)?;
                inner_pts
                    .into_iter()
                    .filter(|&z| {
                        let r2 = basis.norm2(z);
                        r2 >= inner * inner && r2 < outer * outer
                    })
                    .collect()
            }
            Region::Union(rs) => {
                let mut all = Vec::new();
                for r in rs {
                    all.extend(r.enumerate(basis)?);
                }
                all.sort_unstable();
                all.dedup();
                all
            }
        };
        pts.sort_unstable();
        pts.dedup();
        Some(pts)
    }

    /// Parse CLI region specs such as `disk:128`, `strip:32`, `kappaN:2`,
    /// `segment:2:64:1`, `dense:ray:1:256`.
    pub fn parse(s: &str) -> Result<Region, RegionError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> Result<f64, RegionError> {
            p.parse().map_err(|_| RegionError::Parse(format!("bad number {p:?} in {s:?}")))
        };
        let int = |p: &str| -> Result<i64, RegionError> {
            p.parse().map_err(|_| RegionError::Parse(format!("bad integer {p:?} in {s:?}")))
        };
        match parts.as_slice() {
            ["disk", r] => Ok(Region::disk(num(r)?)),
            ["strip", n] => Ok(Region::strip(num(n)?)),
            ["kappaN", k] => Ok(Region::line(int(k)? as u32, LineKind::NonNeg)),
            ["kappaZ", k] => Ok(Region::line(int(k)? as u32, LineKind::All)),
            ["kappaZ+", k] | ["kappaZplus", k] => Ok(Region::line(int(k)? as u32, LineKind::Pos)),
            ["kappaZ-", k] | ["kappaZminus", k] => Ok(Region::line(int(k)? as u32, LineKind::Neg)),
            ["segment", j1, j2, k] => Ok(Region::segment(int(k)? as u32, int(j1)?, int(j2)?)),
            ["dense", policy, k, cutoff] => {
                let p = Policy::parse(policy, 0)?;
                let set = make_dense(&LatticeBasis::standard(), int(k)? as u32, int(cutoff)? as u32, p)?;
                Ok(Region::dense(set))
            }
            _ => Err(RegionError::Parse(format!("unrecognized region spec {s:?}"))),
        }
    }
}

/// If `z` is the real-axis point `kappa * t`, returns `t`.
fn line_multiple(z: Coord, basis: &LatticeBasis, kappa: u32) -> Option<i64> {
    if basis.is_standard() {
        if z.1 != 0 || z.0.rem_euclid(kappa as i64) != 0 {
            return None;
        }
        Some(z.0 / kappa as i64)
    } else {
        let p = basis.to_physical(z);
        if p[1].abs() > 1e-9 {
            return None;
        }
        let t = p[0] / kappa as f64;
        let r = t.round();
        if (t - r).abs() > 1e-9 {
            return None;
        }
        Some(r as i64)
    }
}

/// The lattice point at real position `x`, if there is one.
fn lattice_real_point(basis: &LatticeBasis, x: i64) -> Option<Coord> {
    if basis.is_standard() {
        return Some((x, 0));
    }
    let c = basis.coords([x as f64, 0.0]);
    let p = basis.to_physical(c);
    if (p[0] - x as f64).abs() < 1e-9 && p[1].abs() < 1e-9 {
        Some(c)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_basis() -> LatticeBasis {
        LatticeBasis::standard()
    }

    #[test]
    fn disk_strip_match_brute_force() {
        let b = std_basis();
        let disk = Region::disk(7.0);
        let strip = Region::strip(4.0);
        for x in -100..=100 {
            for y in -100..=100 {
                let z = (x, y);
                let r2 = (x * x + y * y) as f64;
                assert_eq!(disk.contains(z, &b), r2 < 49.0);
                assert_eq!(strip.contains(z, &b), (y as f64).abs() < 4.0);
            }
        }
    }

    #[test]
    fn segment_membership_brute_force() {
        let b = std_basis();
        let seg = Region::segment(2, 3, 11);
        for x in -20..=20 {
            for y in -2..=2 {
                let expect = y == 0 && x >= 0 && x % 2 == 0 && x >= 3 && x < 11;
                assert_eq!(seg.contains((x, y), &b), expect, "({x},{y})");
            }
        }
        assert_eq!(seg.enumerate(&b).unwrap(), vec![(4, 0), (6, 0), (8, 0), (10, 0)]);
        let seg2 = Region::segment_two_sided(1, -5, 5);
        let pts = seg2.enumerate(&b).unwrap();
        assert_eq!(pts.len(), 10);
        assert!(pts.contains(&(-5, 0)) && pts.contains(&(4, 0)) && !pts.contains(&(5, 0)));
    }

    #[test]
    fn line_kinds() {
        let b = std_basis();
        let n = Region::line(2, LineKind::NonNeg);
        assert!(n.contains((0, 0), &b) && n.contains((4, 0), &b));
        assert!(!n.contains((-2, 0), &b) && !n.contains((3, 0), &b) && !n.contains((2, 1), &b));
        let zm = Region::line(2, LineKind::Neg);
        assert!(zm.contains((-2, 0), &b) && !zm.contains((0, 0), &b));
        let np = Region::line(2, LineKind::NonPos);
        assert!(np.contains((0, 0), &b) && np.contains((-4, 0), &b) && !np.contains((2, 0), &b));
        let shifted = Region::shifted_line(2, LineKind::NonNeg, 3);
        assert!(shifted.contains((6, 0), &b) && !shifted.contains((4, 0), &b));
    }

    #[test]
    fn ray_dense_set_is_positive_axis() {
        let b = std_basis();
        let a = make_dense(&b, 1, 12, Policy::Ray).unwrap();
        for (t, &w) in a.points().iter().enumerate() {
            assert_eq!(w, (t as i64, 0));
        }
        assert!(is_dense(a.points(), &b, 1, 12));
    }

    #[test]
    fn all_policies_produce_dense_sets() {
        let b = std_basis();
        for policy in [Policy::Ray, Policy::RandomAngle(7), Policy::Alternating, Policy::Spiral] {
            for kappa in [1u32, 2, 3] {
                let a = make_dense(&b, kappa, 40, policy).unwrap();
                assert!(is_dense(a.points(), &b, kappa, 40), "{policy:?} kappa={kappa}");
                // Minimality: each point in its annulus.
                for (t, &w) in a.points().iter().enumerate() {
                    let r2 = (w.0 * w.0 + w.1 * w.1) as u64;
                    let j = t as u64 * kappa as u64;
                    assert!(r2 >= j * j && r2 < (j + kappa as u64) * (j + kappa as u64));
                }
            }
        }
    }

    #[test]
    fn alternating_flips_sign() {
        let b = std_basis();
        let a = make_dense(&b, 1, 10, Policy::Alternating).unwrap();
        for (t, &w) in a.points().iter().enumerate().skip(1) {
            if t % 2 == 0 {
                assert!(w.0 > 0, "annulus {t}: {w:?}");
            } else {
                assert!(w.0 < 0, "annulus {t}: {w:?}");
            }
        }
    }

    #[test]
    fn density_counterexamples() {
        let b = std_basis();
        // Full lattice box is dense.
        let mut all = Vec::new();
        for x in -20..=20i64 {
            for y in -20..=20i64 {
                all.push((x, y));
            }
        }
        assert!(is_dense(&all, &b, 1, 20));
        // Empty set is not.
        assert!(!is_dense(&[], &b, 1, 8));
        // Deleting the annulus-5 point breaks density.
        let a = make_dense(&b, 1, 10, Policy::Ray).unwrap();
        let holed: Vec<Coord> = a.points().iter().copied().filter(|&w| w != (5, 0)).collect();
        assert!(!is_dense(&holed, &b, 1, 10));
    }

    #[test]
    fn annulus_slice_subset() {
        let b = std_basis();
        let a = make_dense(&b, 1, 64, Policy::Spiral).unwrap();
        let slice = Region::annulus_slice(Region::dense(a.clone()), 8.0, 32.0);
        let pts = slice.enumerate(&b).unwrap();
        assert!(!pts.is_empty());
        for &w in &pts {
            let r2 = (w.0 * w.0 + w.1 * w.1) as f64;
            assert!(r2 >= 64.0 && r2 < 1024.0);
            assert!(a.contains_std(w));
        }
        assert_eq!(pts, {
            let mut s = a.slice(&b, 8.0, 32.0);
            s.sort_unstable();
            s
        });
    }

    #[test]
    fn random_angle_reproducible() {
        let b = std_basis();
        let a1 = make_dense(&b, 1, 50, Policy::RandomAngle(42)).unwrap();
        let a2 = make_dense(&b, 1, 50, Policy::RandomAngle(42)).unwrap();
        assert_eq!(a1.points(), a2.points());
        let a3 = make_dense(&b, 1, 50, Policy::RandomAngle(43)).unwrap();
        assert_ne!(a1.points(), a3.points());
    }

    #[test]
    fn dense_membership_exact_at_boundaries() {
        let b = std_basis();
        let a = make_dense(&b, 1, 30, Policy::Spiral).unwrap();
        let region = Region::dense(a.clone());
        for x in -35..=35 {
            for y in -35..=35 {
                let z = (x, y);
                let expect = a.points().contains(&z);
                assert_eq!(region.contains(z, &b), expect, "{z:?}");
            }
        }
    }

    #[test]
    fn isqrt_exact() {
        for n in 0..5000u64 {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n, "n={n}");
        }
        let big = u64::MAX;
        let r = isqrt(big);
        assert!(r.checked_mul(r).is_some_and(|s| s <= big));
    }

    #[test]
    fn parse_specs() {
        assert!(matches!(Region::parse("disk:128").unwrap(), Region::Disk { radius } if radius == 128.0));
        assert!(matches!(Region::parse("strip:32").unwrap(), Region::Strip { half_width } if half_width == 32.0));
        assert!(matches!(Region::parse("kappaN:2").unwrap(), Region::Line { kappa: 2, kind: LineKind::NonNeg, shift: 0 }));
        let seg = Region::parse("segment:2:64:1").unwrap();
        assert!(seg.contains((2, 0), &std_basis()) && seg.contains((63, 0), &std_basis()));
        assert!(!seg.contains((64, 0), &std_basis()) && !seg.contains((1, 0), &std_basis()));
        assert!(Region::parse("dense:ray:1:256").is_ok());
        assert!(Region::parse("blob:1").is_err());
    }

    #[test]
    fn diagonal_lattice_regions() {
        let m = crate::model::WalkModel::diagonal();
        let b = *m.basis();
        // Physical points are (j-k, j+k); the real axis points are even.
        let disk = Region::disk(3.0);
        assert!(disk.contains((1, 0), &b)); // physical (1,1), |z| = sqrt2
        assert!(!disk.contains((3, 0), &b)); // physical (3,3)
        let line = Region::line(2, LineKind::All);
        assert!(line.contains((1, -1), &b)); // physical (2, 0)
        assert!(!line.contains((1, 0), &b));
    }
}
