use crate::error::{Error, Result};
use crate::linalg::{bicgstab, Csr, Ilu0};
use crate::model::ModelParams;

use super::boundary::TailCoefficients;
use super::grid::GridSpec;
use super::operator::assemble_operator;
use super::surface::ValueSurface;

/// Complementarity solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Policy iteration (primal-dual active set); each step is a sparse linear solve.
    Howard,
    /// Projected successive over-relaxation.
    Psor { omega: f64 },
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "howard" => Ok(Self::Howard),
            "psor" => Ok(Self::Psor { omega: 1.5 }),
            other => Err(Error::Config(format!("unknown solver method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Howard => f.write_str("howard"),
            Self::Psor { omega } => write!(f, "psor(omega={omega})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: Method,
    /// Complementarity tolerance; `None` means `1e-9 * ell / r`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Fail when some beta row has no stopping node before `z_max`.
    pub require_stopping: bool,
    /// Initialise the stopping set from a solve on a grid of half the resolution.
    pub warm_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Howard,
            tol: None,
            max_iter: 200,
            require_stopping: true,
            warm_start: true,
        }
    }
}

impl SolverOptions {
    pub fn tolerance(&self, p: &ModelParams) -> f64 {
        self.tol.unwrap_or(1e-9 * p.ell / p.r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub method: Method,
    /// Outer iterations (policy updates or relaxation sweeps).
    pub iterations: usize,
    /// Total Krylov iterations (policy iteration only).
    pub inner_iterations: usize,
    /// `max |min(-(L_h v + f), -v)|` at exit.
    pub final_error: f64,
    pub tolerance: f64,
    pub history: Vec<f64>,
    /// Nodes whose stencil is not monotone (direct mode only).
    pub nonmonotone: usize,
}

/// The discrete linear complementarity problem
/// `u >= 0, A u - q >= 0, u (A u - q) = 0` with `u = -v`, `A = -L_h`.
struct Lcp {
    a: Csr,
    q: Vec<f64>,
}

impl Lcp {
    fn slack(&self, u: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; u.len()];
        self.a.mul_vec(u, &mut w);
        for (wi, qi) in w.iter_mut().zip(&self.q) {
            *wi -= qi;
        }
        w
    }

    fn error(&self, u: &[f64], w: &[f64]) -> f64 {
        u.iter().zip(w).map(|(x, y)| x.min(*y).abs()).fold(0.0, f64::max)
    }
}

fn howard(
    lcp: &Lcp,
    mut active: Vec<bool>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<bool>, usize, usize, Vec<f64>)> {
    let n = lcp.q.len();
    let mut u = vec![0.0; n];
    let mut history = Vec::new();
    let mut inner = 0;
    for it in 1..=max_iter {
        let m = lcp.a.with_identity_rows(&active);
        let rhs: Vec<f64> = (0..n).map(|k| if active[k] { 0.0 } else { lcp.q[k] }).collect();
        let pre = Ilu0::new(&m)?;
        for k in 0..n {
            if active[k] {
                u[k] = 0.0;
            }
        }
        let st = bicgstab(&m, &pre, &rhs, &mut u, 1e-14, 5000)?;
        inner += st.iterations;
        // one step of iterative refinement on the true residual
        let mut r = vec![0.0; n];
        m.mul_vec(&u, &mut r);
        let mut corr: Vec<f64> = (0..n).map(|k| rhs[k] - r[k]).collect();
        if corr.iter().any(|c| c.abs() > 0.1 * tol) {
            let mut x = vec![0.0; n];
            let st = bicgstab(&m, &pre, &corr, &mut x, 1e-10, 5000).unwrap_or(st);
            inner += st.iterations;
            for k in 0..n {
                u[k] += x[k];
            }
            corr.clear();
        }
        let w = lcp.slack(&u);
        let err = lcp.error(&u, &w);
        history.push(err);
        let next: Vec<bool> = (0..n).map(|k| u[k] <= w[k]).collect();
        if next == active {
            if err <= tol {
                return Ok((u, active, it, inner, history));
            }
            return Err(Error::NotConverged {
                iterations: it,
                last_error: err,
                history,
            });
        }
        active = next;
    }
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NotConverged {
        iterations: max_iter,
        last_error: last,
        history,
    })
}

fn psor(lcp: &Lcp, omega: f64, tol: f64, max_iter: usize) -> Result<(Vec<f64>, Vec<bool>, usize, Vec<f64>)> {
    let n = lcp.q.len();
    let a = &lcp.a;
    let mut u = vec![0.0; n];
    let mut history = Vec::new();
    for sweep in 1..=max_iter {
        let mut change = 0.0f64;
        let forward = sweep % 2 == 1;
        for step in 0..n {
            let k = if forward { step } else { n - 1 - step };
            let mut s = lcp.q[k];
            let mut d = 0.0;
            for (c, v) in a.row(k) {
                if c == k {
                    d = v;
                } else {
                    s -= v * u[c];
                }
            }
            let new = ((1.0 - omega) * u[k] + omega * s / d).max(0.0);
            change = change.max((new - u[k]).abs());
            u[k] = new;
        }
        if change < 0.01 * tol || sweep % 50 == 0 {
            let w = lcp.slack(&u);
            let err = lcp.error(&u, &w);
            history.push(err);
            if err <= tol {
                let active = (0..n).map(|k| u[k] <= w[k]).collect();
                return Ok((u, active, sweep, history));
            }
        }
    }
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NotConverged {
        iterations: max_iter,
        last_error: last,
        history,
    })
}

/// Starting stopping set: from the boundary of a half-resolution solve when
/// the grid is large enough to benefit, else where the running reward is
/// non-negative.
fn initial_active(
    grid: &GridSpec,
    p: &ModelParams,
    opts: &SolverOptions,
    op: &super::operator::DiscreteOperator,
    q: &[f64],
) -> Result<Vec<bool>> {
    let fallback = || q.iter().map(|&q| q <= 0.0).collect();
    if !opts.warm_start || grid.n_z < 200 {
        return Ok(fallback());
    }
    let coarse = GridSpec {
        n_z: grid.n_z / 2,
        n_beta: if grid.n_beta > 1 { (grid.n_beta / 4) * 2 + 1 } else { 1 },
        ..*grid
    };
    let sub = SolverOptions {
        require_stopping: false,
        ..*opts
    };
    let Ok(s) = solve_vi(&coarse, p, &sub) else {
        return Ok(fallback());
    };
    let Ok(fb) = crate::dual::extract_boundary(&s) else {
        return Ok(fallback());
    };
    let lay = &op.layout;
    let mut active = Vec::with_capacity(lay.n_nodes);
    for (j, row) in lay.rows.iter().enumerate() {
        let zs = fb.at(row.beta);
        for i in 0..row.len {
            active.push(lay.y(j, i).exp() >= zs);
        }
    }
    Ok(active)
}

/// Solve the variational inequality on `grid`.
///
/// Dirichlet data: `v = 0` beyond `z_max`, the never-stop asymptote below
/// `z_min`. Ties between the two branches are classified as stopping.
pub fn solve_vi(grid: &GridSpec, p: &ModelParams, opts: &SolverOptions) -> Result<ValueSurface> {
    let op = assemble_operator(grid, p)?;
    let tail = TailCoefficients::for_grid(p, grid)?;
    let lay = &op.layout;
    let n = op.n();

    let bvals = op.dirichlet_values(&tail);
    let b = op.dirichlet_rhs(&bvals);
    let mut f = Vec::with_capacity(n);
    for (j, row) in lay.rows.iter().enumerate() {
        for i in 0..row.len {
            f.push(p.ell - lay.y(j, i).exp().powf(-1.0 / p.gamma));
        }
    }
    let mut a = op.matrix.clone();
    a.vals.iter_mut().for_each(|v| *v = -*v);
    let q: Vec<f64> = (0..n).map(|k| -(b[k] + f[k])).collect();
    let lcp = Lcp { a, q };

    let tol = opts.tolerance(p);
    let (u, active, iterations, inner, history) = match opts.method {
        Method::Howard => {
            let start = initial_active(grid, p, opts, &op, &lcp.q)?;
            howard(&lcp, start, tol, opts.max_iter)?
        }
        Method::Psor { omega } => {
            let (u, act, it, h) = psor(&lcp, omega, tol, opts.max_iter)?;
            (u, act, it, 0, h)
        }
    };
    // v = -u on continuation nodes; stopping nodes hold the obstacle exactly
    let v: Vec<f64> = (0..n).map(|k| if active[k] { 0.0 } else { -u[k] }).collect();
    let u: Vec<f64> = v.iter().map(|x| -x).collect();
    // A u - q = L_h v + f
    let residual = lcp.slack(&u);
    let final_error = lcp.error(&u, &residual);

    if opts.require_stopping {
        for (j, row) in lay.rows.iter().enumerate() {
            if row.len == 0 || !active[row.offset + row.len - 1] {
                return Err(Error::DomainTooSmall { row: j, beta: row.beta });
            }
        }
    }

    let diagnostics = SolveDiagnostics {
        method: opts.method,
        iterations,
        inner_iterations: inner,
        final_error,
        tolerance: tol,
        history,
        nonmonotone: op.nonmonotone.len(),
    };
    Ok(ValueSurface::new(*p, op.layout, tail, v, active, residual, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vi::CoordMode;

    #[test]
    fn huge_income_never_stops() {
        // With the grid entirely below ell^-gamma the running reward is negative everywhere.
        let mut p = ModelParams::reference().constant_beta();
        p.ell = 50.0;
        let floor = crate::model::boundary_floor(&p);
        let g = GridSpec {
            z_min: 1e-3 * floor,
            z_max: 0.5 * floor,
            n_z: 200,
            beta_lo: 0.05,
            beta_hi: 0.05,
            n_beta: 1,
            mode: CoordMode::Direct,
        };
        let opts = SolverOptions {
            require_stopping: false,
            ..Default::default()
        };
        let s = solve_vi(&g, &p, &opts).unwrap();
        assert!(s.active.iter().all(|a| !a));
        assert!(s.v.iter().all(|&v| v < 0.0));
        let opts = SolverOptions::default();
        assert!(matches!(solve_vi(&g, &p, &opts), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn psor_agrees_with_howard() {
        let p = ModelParams::reference().constant_beta();
        let g = GridSpec::default_for(&p).with_beta_span(&p, 5.0).with_resolution(120, 1);
        let h = solve_vi(&g, &p, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            method: Method::Psor { omega: 1.8 },
            max_iter: 200_000,
            ..Default::default()
        };
        let s = solve_vi(&g, &p, &opts).unwrap();
        let diff = h.v.iter().zip(&s.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
        assert_eq!(h.active, s.active);
    }

    #[test]
    fn small_stochastic_grid_converges() {
        let p = ModelParams::reference();
        let g = GridSpec::default_for(&p).with_beta_span(&p, 3.0).with_resolution(101, 31);
        let s = solve_vi(&g, &p, &SolverOptions::default()).unwrap();
        assert!(s.diagnostics.final_error <= s.diagnostics.tolerance);
        assert!(s.v.iter().all(|&v| v <= 0.0));
    }
}
