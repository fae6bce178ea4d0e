//! Exact Green's functions, hitting probabilities and identity checks on
//! finite domains, computed by linear solves on the walk generator.

pub mod solver;

use crate::kernel::{KernelError, PotentialKernel};
use crate::model::{Coord, WalkModel};
use crate::region::{Region, RegionError};
use solver::{Csr, Factorized, Solution};
use std::collections::{BTreeMap, HashMap};

/// Default cap on the number of sites in a finite domain.
pub const SITE_CAP: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum GreenError {
    #[error("domain has {sites} sites, above the cap {cap}")]
    DomainTooLarge { sites: usize, cap: usize },
    #[error("linear solve did not reach tolerance (residual {residual:.3e})")]
    SolverFailure { residual: f64 },
    #[error("function value missing at {0:?}")]
    MissingValue(Coord),
    #[error("kernel error bound {estimated:.3e} too large for the requested check")]
    KernelAccuracyInsufficient { estimated: f64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Residual demanded of every solve backing an exact identity.
pub const SOLVE_TOL: f64 = 1e-10;

/// Stable enumeration of a finite site set, row-major by coordinates.
#[derive(Debug, Clone)]
pub struct SiteIndexer {
    points: Vec<Coord>,
    index: HashMap<Coord, u32>,
}

impl SiteIndexer {
    pub fn new(mut points: Vec<Coord>) -> SiteIndexer {
        points.sort_unstable_by_key(|&(x, y)| (y, x));
        points.dedup();
        let index = points.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
        SiteIndexer { points, index }
    }

    pub fn from_region(region: &Region, model: &WalkModel) -> Result<SiteIndexer, GreenError> {
        let pts = region.enumerate(model.basis()).ok_or(RegionError::NotFinite)?;
        Ok(SiteIndexer::new(pts))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, p: Coord) -> Option<u32> {
        self.index.get(&p).copied()
    }

    pub fn point(&self, i: u32) -> Coord {
        self.points[i as usize]
    }

    pub fn points(&self) -> &[Coord] {
        &self.points
    }

    pub fn contains(&self, p: Coord) -> bool {
        self.index.contains_key(&p)
    }
}

/// Assemble `I - P` restricted to the sites of the indexer.
fn generator_matrix(model: &WalkModel, sites: &SiteIndexer) -> Csr {
    let n = sites.len();
    let support = model.support();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    row_ptr.push(0);
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(support.len() + 1);
    for i in 0..n {
        let w = sites.point(i as u32);
        row.clear();
        row.push((i as u32, 1.0));
        for &((dx, dy), p) in support {
            let target = (w.0 + dx, w.1 + dy);
            if let Some(j) = sites.index(target) {
                row.push((j, -p));
            }
        }
        row.sort_unstable_by_key(|e| e.0);
        // Merge duplicates (the diagonal may combine with a zero step).
        let mut k = 0;
        while k < row.len() {
            let (c, mut v) = row[k];
            let mut m = k + 1;
            while m < row.len() && row[m].0 == c {
                v += row[m].1;
                m += 1;
            }
            cols.push(c);
            vals.push(v);
            k = m;
        }
        row_ptr.push(cols.len());
    }
    Csr { n, row_ptr, cols, vals }
}

/// Factorized generator on a finite domain; solves share the factorization.
pub struct GreenSolver {
    model: WalkModel,
    sites: SiteIndexer,
    system: Factorized,
}

impl GreenSolver {
    pub fn new(model: &WalkModel, domain: &Region) -> Result<GreenSolver, GreenError> {
        let sites = SiteIndexer::from_region(domain, model)?;
        Self::on_sites(model, sites)
    }

    pub fn on_sites(model: &WalkModel, sites: SiteIndexer) -> Result<GreenSolver, GreenError> {
        if sites.len() > SITE_CAP {
            return Err(GreenError::DomainTooLarge { sites: sites.len(), cap: SITE_CAP });
        }
        if sites.is_empty() {
            return Err(GreenError::InvalidArgument("empty domain".into()));
        }
        let csr = generator_matrix(model, &sites);
        Ok(GreenSolver { model: model.clone(), sites, system: Factorized::new(csr) })
    }

    pub fn sites(&self) -> &SiteIndexer {
        &self.sites
    }

    pub fn model(&self) -> &WalkModel {
        &self.model
    }

    fn checked_solve(&self, rhs: &[f64]) -> Result<Solution, GreenError> {
        let sol = self.system.solve(rhs);
        if sol.residual > SOLVE_TOL {
            return Err(GreenError::SolverFailure { residual: sol.residual });
        }
        Ok(sol)
    }

    /// The column `w -> G_B(w, z)` over the domain sites.
    pub fn column(&self, z: Coord) -> Result<Vec<f64>, GreenError> {
        let Some(zi) = self.sites.index(z) else {
            return Ok(vec![0.0; self.sites.len()]);
        };
        let mut rhs = vec![0.0; self.sites.len()];
        rhs[zi as usize] = 1.0;
        Ok(self.checked_solve(&rhs)?.x)
    }
}

/// Selected columns of the Green's function on a finite domain.
pub struct GreenTable {
    sites: SiteIndexer,
    columns: BTreeMap<u32, Vec<f64>>,
    model_hash: String,
}

/// Which columns of `G_B` to materialize.
pub enum Columns<'a> {
    All,
    Points(&'a [Coord]),
}

impl GreenTable {
    pub fn build(model: &WalkModel, domain: &Region, which: Columns) -> Result<GreenTable, GreenError> {
        let solver = GreenSolver::new(model, domain)?;
        Self::from_solver(&solver, which)
    }

    pub fn from_solver(solver: &GreenSolver, which: Columns) -> Result<GreenTable, GreenError> {
        let sites = solver.sites().clone();
        let zs: Vec<Coord> = match which {
            Columns::All => {
                if sites.len() > solver::DENSE_THRESHOLD {
                    return Err(GreenError::DomainTooLarge {
                        sites: sites.len(),
                        cap: solver::DENSE_THRESHOLD,
                    });
                }
                sites.points().to_vec()
            }
            Columns::Points(zs) => zs.to_vec(),
        };
        let mut columns = BTreeMap::new();
        for z in zs {
            if let Some(zi) = sites.index(z) {
                columns.insert(zi, solver.column(z)?);
            }
        }
        Ok(GreenTable { sites, columns, model_hash: solver.model().hash().to_string() })
    }

    pub fn sites(&self) -> &SiteIndexer {
        &self.sites
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    /// `G_B(w, z)`; zero when either argument is outside the domain.
    pub fn value(&self, w: Coord, z: Coord) -> f64 {
        let (Some(wi), Some(zi)) = (self.sites.index(w), self.sites.index(z)) else {
            return 0.0;
        };
        self.columns.get(&zi).map_or(0.0, |col| col[wi as usize])
    }

    pub fn column_points(&self) -> Vec<Coord> {
        self.columns.keys().map(|&i| self.sites.point(i)).collect()
    }

    /// CSV export: `x_w,y_w,x_z,y_z,value` rows in stable order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_w,y_w,x_z,y_z,value\n");
        for (&zi, col) in &self.columns {
            let z = self.sites.point(zi);
            for (wi, &v) in col.iter().enumerate() {
                let w = self.sites.point(wi as u32);
                out.push_str(&format!("{},{},{},{},{}\n", w.0, w.1, z.0, z.1, v));
            }
        }
        out
    }
}

/// Dirichlet solution `h(w) = P^w(T0_{B'} < T0_{B^c})` on a finite domain.
///
/// `h` is 1 on the target set, 0 outside the domain, and p-harmonic in
/// between. Values are queryable everywhere via [`DirichletField::value`].
pub struct DirichletField {
    model: WalkModel,
    domain_sites: SiteIndexer,
    values: Vec<f64>,
    targets: Region,
    max_residual: f64,
}

impl DirichletField {
    pub fn solve(model: &WalkModel, domain: &Region, targets: &Region) -> Result<DirichletField, GreenError> {
        let domain_sites = SiteIndexer::from_region(domain, model)?;
        Self::solve_on_sites(model, domain_sites, targets)
    }

    pub fn solve_on_sites(
        model: &WalkModel,
        domain_sites: SiteIndexer,
        targets: &Region,
    ) -> Result<DirichletField, GreenError> {
        if domain_sites.len() > SITE_CAP {
            return Err(GreenError::DomainTooLarge { sites: domain_sites.len(), cap: SITE_CAP });
        }
        let basis = *model.basis();
        let unknown: Vec<Coord> = domain_sites
            .points()
            .iter()
            .copied()
            .filter(|&p| !targets.contains(p, &basis))
            .collect();
        let unknown_sites = SiteIndexer::new(unknown);
        let mut values = vec![0.0; domain_sites.len()];
        if unknown_sites.is_empty() {
            // Every domain point is a target.
            for (i, _) in domain_sites.points().iter().enumerate() {
                values[i] = 1.0;
            }
            return Ok(DirichletField {
                model: model.clone(),
                domain_sites,
                values,
                targets: targets.clone(),
                max_residual: 0.0,
            });
        }
        let csr = generator_matrix(model, &unknown_sites);
        let system = Factorized::new(csr);
        // rhs[w] = sum over steps leaving the unknown set into the target set.
        let mut rhs = vec![0.0; unknown_sites.len()];
        for (i, &w) in unknown_sites.points().iter().enumerate() {
            let mut acc = 0.0;
            for &((dx, dy), p) in model.support() {
                let v = (w.0 + dx, w.1 + dy);
                if !unknown_sites.contains(v)
                    && domain_sites.contains(v)
                    && targets.contains(v, &basis)
                {
                    acc += p;
                }
            }
            rhs[i] = acc;
        }
        let sol = system.solve(&rhs);
        if sol.residual > SOLVE_TOL {
            return Err(GreenError::SolverFailure { residual: sol.residual });
        }
        for (i, &w) in domain_sites.points().iter().enumerate() {
            values[i] = if targets.contains(w, &basis) {
                1.0
            } else {
                sol.x[unknown_sites.index(w).unwrap() as usize]
            };
        }
        Ok(DirichletField {
            model: model.clone(),
            domain_sites,
            values,
            targets: targets.clone(),
            max_residual: sol.residual,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn domain_sites(&self) -> &SiteIndexer {
        &self.domain_sites
    }

    /// `P^z(T0_{B'} < T0_{B^c})`; zero off the domain.
    pub fn value(&self, z: Coord) -> f64 {
        match self.domain_sites.index(z) {
            Some(i) => self.values[i as usize],
            None => 0.0,
        }
    }

    /// Strictly-positive-time hitting probability `P^w(T_{B'} < T_{B^c})`:
    /// one generator application before reading the T0 solution.
    pub fn hit_positive_time(&self, w: Coord) -> f64 {
        let mut acc = 0.0;
        for &((dx, dy), p) in self.model.support() {
            acc += p * self.value((w.0 + dx, w.1 + dy));
        }
        acc
    }

    /// Escape factor `P^w(T_{B'} > T_{B^c})`.
    pub fn escape(&self, w: Coord) -> f64 {
        1.0 - self.hit_positive_time(w)
    }

    pub fn targets(&self) -> &Region {
        &self.targets
    }
}

/// `P^z(T0_{B'} < T0_{B^c})` for a single start.
pub fn hit_before_exit(
    model: &WalkModel,
    domain: &Region,
    targets: &Region,
    start: Coord,
) -> Result<f64, GreenError> {
    if targets.contains(start, model.basis()) {
        return Ok(1.0);
    }
    if !domain.contains(start, model.basis()) {
        return Ok(0.0);
    }
    Ok(DirichletField::solve(model, domain, targets)?.value(start))
}

/// The row `z -> G_B(z, w)` over `w`, via one solve on the reversed walk
/// (duality `G_B(z, w) = G*_B(w, z)`).
pub fn green_row(model: &WalkModel, domain: &Region, z: Coord) -> Result<(SiteIndexer, Vec<f64>), GreenError> {
    let reversed = model.reverse();
    let solver = GreenSolver::new(&reversed, domain)?;
    let col = solver.column(z)?;
    Ok((solver.sites().clone(), col))
}

/// `E^z[number of visits to the subset strictly before leaving the domain]`,
/// i.e. the Green's function summed over the subset.
pub fn expected_visits(
    model: &WalkModel,
    domain: &Region,
    subset: &[Coord],
    z: Coord,
) -> Result<f64, GreenError> {
    let (sites, row) = green_row(model, domain, z)?;
    let mut acc = 0.0;
    for &w in subset {
        if let Some(i) = sites.index(w) {
            acc += row[i as usize];
        }
    }
    Ok(acc)
}

/// Residual of the last-exit decomposition at `z`:
/// `| P^z(T0_{B'} < T0_{B^c}) - sum_w G_B(z,w) P^w(T_{B'} > T_{B^c}) |`.
pub fn last_exit_residual(
    model: &WalkModel,
    domain: &Region,
    targets: &Region,
    z: Coord,
) -> Result<f64, GreenError> {
    let field = DirichletField::solve(model, domain, targets)?;
    let lhs = field.value(z);
    let (sites, row) = green_row(model, domain, z)?;
    let basis = model.basis();
    let mut rhs = 0.0;
    for (i, &w) in sites.points().iter().enumerate() {
        if targets.contains(w, basis) {
            rhs += row[i] * field.escape(w);
        }
    }
    Ok((lhs - rhs).abs())
}

/// Discrete generator applied to a finitely supported function:
/// `sum_z p(z) [f(w + z) - f(w)]`.
pub fn harmonic_residual(
    model: &WalkModel,
    f: &HashMap<Coord, f64>,
    w: Coord,
) -> Result<f64, GreenError> {
    let fw = *f.get(&w).ok_or(GreenError::MissingValue(w))?;
    let mut acc = 0.0;
    for &((dx, dy), p) in model.support() {
        let v = (w.0 + dx, w.1 + dy);
        let fv = *f.get(&v).ok_or(GreenError::MissingValue(v))?;
        acc += p * (fv - fw);
    }
    Ok(acc)
}

/// Green's function through the potential-kernel route:
/// `G_B(w, z) = E^w[a(z - S_T)] - a(z - w)` with `T` the exit time of `B`.
///
/// Independent of [`GreenTable`] except for the exit distribution, which
/// comes from one reversed solve.
pub fn green_via_potential(
    model: &WalkModel,
    domain: &Region,
    w: Coord,
    z: Coord,
    kernel: &PotentialKernel,
) -> Result<f64, GreenError> {
    let basis = model.basis();
    if !domain.contains(w, basis) {
        return Ok(0.0);
    }
    let (sites, row) = green_row(model, domain, w)?;
    // Exit distribution: nu(y) = sum_v G(w, v) p(y - v) over exterior y.
    let mut exit: BTreeMap<Coord, f64> = BTreeMap::new();
    for (i, &v) in sites.points().iter().enumerate() {
        let g = row[i];
        if g == 0.0 {
            continue;
        }
        for &((dx, dy), p) in model.support() {
            let y = (v.0 + dx, v.1 + dy);
            if !sites.contains(y) {
                *exit.entry(y).or_insert(0.0) += g * p;
            }
        }
    }
    let mut value = 0.0;
    let mut err_budget = 0.0;
    for (&y, &nu) in &exit {
        let (a, e) = kernel.eval((z.0 - y.0, z.1 - y.1))?;
        value += nu * a;
        err_budget += nu * e;
    }
    let (aw, ew) = kernel.eval((z.0 - w.0, z.1 - w.1))?;
    err_budget += ew;
    if err_budget > 1e-7 {
        return Err(GreenError::KernelAccuracyInsufficient { estimated: err_budget });
    }
    Ok(value - aw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WalkModel;

    #[test]
    fn singleton_domain() {
        let m = WalkModel::srw();
        let b = Region::explicit([(0, 0)]);
        let g = GreenTable::build(&m, &b, Columns::All).unwrap();
        assert!((g.value((0, 0), (0, 0)) - 1.0).abs() < 1e-14);
        assert_eq!(g.value((1, 0), (0, 0)), 0.0);
    }

    #[test]
    fn srw_symmetry_c16() {
        let m = WalkModel::srw();
        let b = Region::disk(16.0);
        let g = GreenTable::build(&m, &b, Columns::All).unwrap();
        let pts = g.sites().points().to_vec();
        let mut max_asym: f64 = 0.0;
        for (i, &w) in pts.iter().enumerate() {
            for &z in pts.iter().skip(i + 1).step_by(17) {
                max_asym = max_asym.max((g.value(w, z) - g.value(z, w)).abs());
            }
        }
        assert!(max_asym < 1e-10, "asymmetry {max_asym}");
    }

    #[test]
    fn duality_against_reversed_model() {
        let m = WalkModel::x_asymmetric();
        let b = Region::disk(8.0);
        let g = GreenTable::build(&m, &b, Columns::All).unwrap();
        let g_star = GreenTable::build(&m.reverse(), &b, Columns::All).unwrap();
        let pts = g.sites().points().to_vec();
        let mut max_diff: f64 = 0.0;
        for &w in pts.iter().step_by(3) {
            for &z in pts.iter().step_by(5) {
                max_diff = max_diff.max((g.value(z, w) - g_star.value(w, z)).abs());
            }
        }
        assert!(max_diff < 1e-10, "duality violation {max_diff}");
    }

    #[test]
    fn monotone_in_domain() {
        let m = WalkModel::srw();
        let g_small = GreenTable::build(&m, &Region::disk(8.0), Columns::All).unwrap();
        let g_big = GreenTable::build(&m, &Region::disk(12.0), Columns::All).unwrap();
        for &w in g_small.sites().points() {
            let v_small = g_small.value(w, (0, 0));
            let v_big = g_big.value(w, (0, 0));
            assert!(v_small <= v_big + 1e-12, "{w:?}: {v_small} > {v_big}");
        }
    }

    #[test]
    fn dirichlet_ratio_identity() {
        // h(z) = G_n(z, 0) / G_n(0, 0) for hitting the origin before exit.
        let m = WalkModel::srw();
        let b = Region::disk(12.0);
        let solver = GreenSolver::new(&m, &b).unwrap();
        let col = solver.column((0, 0)).unwrap();
        let g00 = col[solver.sites().index((0, 0)).unwrap() as usize];
        let field = DirichletField::solve(&m, &b, &Region::explicit([(0, 0)])).unwrap();
        let mut max_diff: f64 = 0.0;
        for (i, &z) in solver.sites().points().iter().enumerate() {
            let expect = col[i] / g00;
            max_diff = max_diff.max((field.value(z) - expect).abs());
        }
        assert!(max_diff < 1e-9, "ratio identity violated by {max_diff}");
    }

    #[test]
    fn dirichlet_trivial_cases() {
        let m = WalkModel::srw();
        let b = Region::disk(6.0);
        let t = Region::explicit([(2, 0), (3, 0)]);
        assert_eq!(hit_before_exit(&m, &b, &t, (2, 0)).unwrap(), 1.0);
        // Target equal to the domain.
        let all = Region::disk(6.0);
        assert_eq!(hit_before_exit(&m, &b, &all, (1, 1)).unwrap(), 1.0);
        // Start outside the domain.
        assert_eq!(hit_before_exit(&m, &b, &t, (10, 0)).unwrap(), 0.0);
    }

    #[test]
    fn last_exit_identities() {
        let m = WalkModel::srw();
        let b = Region::disk(12.0);
        let seg = Region::segment(1, 2, 8);
        let r = last_exit_residual(&m, &b, &seg, (0, 0)).unwrap();
        assert!(r < 1e-9, "residual {r}");
        // Singleton target: 1 = G(z,z) * P^z(T_z > T_exit).
        let z = (3, -2);
        let single = Region::explicit([z]);
        let r2 = last_exit_residual(&m, &b, &single, z).unwrap();
        assert!(r2 < 1e-10, "singleton residual {r2}");
    }

    #[test]
    fn last_exit_range2_explicit_targets() {
        let m = WalkModel::range2();
        let b = Region::disk(12.0);
        let t = Region::explicit([(0, 0), (2, 1), (-3, 0), (1, -4), (5, 5)]);
        let r = last_exit_residual(&m, &b, &t, (1, 1)).unwrap();
        assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn expected_visits_trivial() {
        let m = WalkModel::srw();
        let b = Region::explicit([(0, 0)]);
        let v = expected_visits(&m, &b, &[(0, 0)], (0, 0)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_residual_constant() {
        let m = WalkModel::range2();
        let mut f = HashMap::new();
        for x in -3..=3 {
            for y in -3..=3 {
                f.insert((x, y), 7.5);
            }
        }
        assert_eq!(harmonic_residual(&m, &f, (0, 0)).unwrap(), 0.0);
        assert!(matches!(
            harmonic_residual(&m, &f, (3, 3)),
            Err(GreenError::MissingValue(_))
        ));
    }

    #[test]
    fn green_function_is_nonnegative() {
        let m = WalkModel::x_asymmetric();
        let g = GreenTable::build(&m, &Region::disk(7.0), Columns::All).unwrap();
        for &w in g.sites().points() {
            for &z in g.sites().points() {
                assert!(g.value(w, z) >= -1e-12);
            }
        }
    }
}
