//! Linear solves for the walk generator on finite site sets.
//!
//! Small systems go through a dense LU factorization; larger ones use
//! BiCGSTAB with an ILU(0) preconditioner. The generator matrix `I - P` is
//! weakly diagonally dominant, for which ILU(0) is well behaved.

use nalgebra::DMatrix;

/// Sites at or below this count are solved densely.
pub const DENSE_THRESHOLD: usize = 2048;

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[i] = acc;
        }
    }

    fn find(&self, row: usize, col: u32) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.cols[lo..hi].binary_search(&col).ok().map(|p| lo + p)
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut r = vec![0.0; self.n];
        self.matvec(x, &mut r);
        r.iter().zip(b).map(|(ax, bi)| (bi - ax) * (bi - ax)).sum::<f64>().sqrt()
    }
}

/// ILU(0): incomplete LU on the sparsity pattern of the matrix.
struct Ilu0 {
    csr: Csr,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn factor(a: &Csr) -> Option<Ilu0> {
        let n = a.n;
        let mut csr = a.clone();
        let mut diag_pos = vec![0usize; n];
        for i in 0..n {
            diag_pos[i] = csr.find(i, i as u32)?;
        }
        for i in 0..n {
            for kk in csr.row_ptr[i]..diag_pos[i] {
                let k = csr.cols[kk] as usize;
                let akk = csr.vals[diag_pos[k]];
                if akk == 0.0 {
                    return None;
                }
                let mult = csr.vals[kk] / akk;
                csr.vals[kk] = mult;
                for jj in diag_pos[k] + 1..csr.row_ptr[k + 1] {
                    let j = csr.cols[jj];
                    if let Some(pos) = csr.find(i, j) {
                        csr.vals[pos] -= mult * csr.vals[jj];
                    }
                }
            }
            if csr.vals[diag_pos[i]] == 0.0 {
                return None;
            }
        }
        Some(Ilu0 { csr, diag_pos })
    }

    /// Solve `L U x = r` with `L` unit lower triangular.
    fn apply(&self, r: &[f64], x: &mut [f64]) {
        let n = self.csr.n;
        for i in 0..n {
            let mut acc = r[i];
            for k in self.csr.row_ptr[i]..self.diag_pos[i] {
                acc -= self.csr.vals[k] * x[self.csr.cols[k] as usize];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in self.diag_pos[i] + 1..self.csr.row_ptr[i + 1] {
                acc -= self.csr.vals[k] * x[self.csr.cols[k] as usize];
            }
            x[i] = acc / self.csr.vals[self.diag_pos[i]];
        }
    }
}

enum Factor {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Iterative(Option<Ilu0>),
}

/// A factorized linear system, reusable across right-hand sides.
pub struct Factorized {
    csr: Csr,
    factor: Factor,
}

/// Solution with its verified residual.
pub struct Solution {
    pub x: Vec<f64>,
    pub residual: f64,
}

impl Factorized {
    pub fn new(csr: Csr) -> Factorized {
        let factor = if csr.n <= DENSE_THRESHOLD {
            let mut m = DMatrix::<f64>::zeros(csr.n, csr.n);
            for i in 0..csr.n {
                for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                    m[(i, csr.cols[k] as usize)] = csr.vals[k];
                }
            }
            Factor::Dense(m.lu())
        } else {
            Factor::Iterative(Ilu0::factor(&csr))
        };
        Factorized { csr, factor }
    }

    pub fn n(&self) -> usize {
        self.csr.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.factor, Factor::Dense(_))
    }

    pub fn solve(&self, b: &[f64]) -> Solution {
        match &self.factor {
            Factor::Dense(lu) => {
                let bv = nalgebra::DVector::from_column_slice(b);
                let x = lu.solve(&bv).map(|v| v.as_slice().to_vec()).unwrap_or_else(|| vec![0.0; b.len()]);
                let residual = self.csr.residual_norm(&x, b);
                Solution { x, residual }
            }
            Factor::Iterative(ilu) => {
                let (x, residual) = bicgstab(&self.csr, ilu.as_ref(), b, 1e-12, 100_000);
                Solution { x, residual }
            }
        }
    }
}

/// Preconditioned BiCGSTAB. Returns the iterate and its true residual norm.
fn bicgstab(a: &Csr, precond: Option<&Ilu0>, b: &[f64], tol_abs: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = a.n;
    let apply_m = |r: &[f64], out: &mut Vec<f64>| match precond {
        Some(p) => p.apply(r, out),
        None => out.copy_from_slice(r),
    };
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let norm = |u: &[f64]| dot(u, u).sqrt();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let tol = tol_abs.max(1e-300);

    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best_x = x.clone();
    let mut best_res = norm(&r);

    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply_m(&p, &mut p_hat);
        a.matvec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        // s = r - alpha v (reuse r)
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm(&r) < tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            let res = a.residual_norm(&x, b);
            if res < best_res {
                return (x, res);
            }
            break;
        }
        apply_m(&r, &mut s_hat);
        a.matvec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &r) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        let rn = norm(&r);
        if rn < best_res {
            best_res = rn;
            best_x.copy_from_slice(&x);
        }
        if rn < tol {
            break;
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    let res_x = a.residual_norm(&x, b);
    let res_best = a.residual_norm(&best_x, b);
    if res_x <= res_best {
        (x, res_x)
    } else {
        (best_x, res_best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut row_ptr = vec![0usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            if i > 0 {
                cols.push((i - 1) as u32);
                vals.push(-0.5);
            }
            cols.push(i as u32);
            vals.push(1.0);
            if i + 1 < n {
                cols.push((i + 1) as u32);
                vals.push(-0.5);
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }

    #[test]
    fn dense_and_iterative_agree() {
        let small = Factorized::new(laplacian_1d(100));
        assert!(small.is_dense());
        let big = Factorized::new(laplacian_1d(3000));
        assert!(!big.is_dense());
        for sys in [&small, &big] {
            let n = sys.n();
            let mut b = vec![0.0; n];
            b[n / 2] = 1.0;
            let sol = sys.solve(&b);
            assert!(sol.residual < 1e-10, "residual {}", sol.residual);
            // Green's function of 1D gambler's ruin at the center: known form
            // 2*(i+1)*(n-j)/(n+1) for i <= j with our scaling.
            let i = n / 2;
            let expect = 2.0 * (i as f64 + 1.0) * (n - i) as f64 / (n as f64 + 1.0);
            assert!((sol.x[i] - expect).abs() < 1e-7, "{} vs {}", sol.x[i], expect);
        }
    }
}
