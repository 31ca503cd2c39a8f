//! Small sparse linear-algebra kit: CSR storage, ILU(0) and BiCGSTAB.

use crate::error::{Error, Result};

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and every row stores its diagonal.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from per-row `(col, val)` lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            if !r.iter().any(|&(c, _)| c == i) {
                r.push((i, 0.0));
            }
            r.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == i).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    /// Copy of the matrix where the listed rows are replaced by identity rows.
    pub fn with_identity_rows(&self, identity: &[bool]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.n {
            if identity[i] {
                for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                    out.vals[k] = if out.cols[k] == i { 1.0 } else { 0.0 };
                }
            }
        }
        out
    }
}

/// Incomplete LU factorisation with zero fill-in.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag_pos = vec![0usize; n];
        for i in 0..n {
            diag_pos[i] = (lu.row_ptr[i]..lu.row_ptr[i + 1])
                .find(|&k| lu.cols[k] == i)
                .ok_or_else(|| Error::Domain(format!("missing diagonal in row {i}")))?;
        }
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let (rs, re) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in rs..re {
                marker[lu.cols[k]] = k;
            }
            for k in rs..re {
                let col = lu.cols[k];
                if col >= i {
                    break;
                }
                let piv = lu.vals[diag_pos[col]];
                if piv == 0.0 {
                    return Err(Error::Domain(format!("zero pivot in ILU at row {col}")));
                }
                let l = lu.vals[k] / piv;
                lu.vals[k] = l;
                for kk in diag_pos[col] + 1..lu.row_ptr[col + 1] {
                    let m = marker[lu.cols[kk]];
                    if m != usize::MAX {
                        lu.vals[m] -= l * lu.vals[kk];
                    }
                }
            }
            for k in rs..re {
                marker[lu.cols[k]] = usize::MAX;
            }
            if lu.vals[diag_pos[i]] == 0.0 {
                return Err(Error::Domain(format!("zero pivot in ILU at row {i}")));
            }
        }
        Ok(Self { lu, diag_pos })
    }

    /// Solve `(LU) x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = x[i];
            for k in lu.row_ptr[i]..self.diag_pos[i] {
                s -= lu.vals[k] * x[lu.cols[k]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for k in self.diag_pos[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * x[lu.cols[k]];
            }
            x[i] = s / lu.vals[self.diag_pos[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Right-preconditioned BiCGSTAB. `x` holds the initial guess on entry.
pub fn bicgstab(a: &Csr, pre: &Ilu0, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n;
    let bnorm = norm(b).max(1e-300);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: rel,
        });
    }
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // restart from the current residual
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        p_hat.copy_from_slice(&p);
        pre.apply(&mut p_hat);
        a.mul_vec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        alpha = rho / denom;
        // r now holds s
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * p_hat[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                rel_residual: rel,
            });
        }
        s_hat.copy_from_slice(&r);
        pre.apply(&mut s_hat);
        a.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                rel_residual: rel,
            });
        }
    }
    // recompute the true residual before giving up
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    rel = norm(&r) / bnorm;
    if rel <= tol * 10.0 {
        return Ok(SolveStats {
            iterations: max_iter,
            rel_residual: rel,
        });
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        last_error: rel,
        history: vec![rel],
    })
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
