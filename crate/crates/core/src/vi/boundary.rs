use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::model::ModelParams;

use super::grid::GridSpec;

/// Small-`z` asymptote of the stopping value.
///
/// Never stopping gives `g(z, beta) = ell/r - z^(-1/gamma) h(beta)` with
/// `h(beta) = int_0^inf e^(-rt) E[(Zhat_t^{1,beta})^(-1/gamma)] dt`. Substituting
/// into the generator, `h` solves the linear two-point problem
///
/// ```text
/// 0.5 sigma_beta^2 h'' + m(beta) h' - (r + rho(beta)) h + 1 = 0,
/// m(beta) = kappa (beta_bar - beta) + (beta/sigma) sigma_beta (1 - 1/gamma),
/// ```
///
/// which is solved on a padded beta interval with the frozen-factor value
/// `1/(r + rho(beta))` imposed at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCoefficients {
    params: ModelParams,
    beta_lo: f64,
    d_beta: f64,
    /// `h` at `beta_lo + k d_beta`; empty for a frozen factor.
    values: Vec<f64>,
}

impl TailCoefficients {
    /// Frozen-factor version: `h = 1/(r + rho(beta))` pointwise.
    pub fn frozen(p: &ModelParams) -> Self {
        Self {
            params: *p,
            beta_lo: 0.0,
            d_beta: 0.0,
            values: Vec::new(),
        }
    }

    /// Solve the ODE on `[lo, hi]` with `n` nodes.
    pub fn solve(p: &ModelParams, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if p.sigma_beta <= 0.0 {
            return Ok(Self::frozen(p));
        }
        if !(hi > lo) || n < 3 {
            return Err(Error::InvalidGrid("tail ODE needs lo < hi and n >= 3".into()));
        }
        let d = (hi - lo) / (n - 1) as f64;
        let diff = 0.5 * p.sigma_beta * p.sigma_beta / (d * d);
        let mut lower = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let frozen = |b: f64| 1.0 / (p.r + p.rho(b));
        rhs[0] = frozen(lo);
        rhs[n - 1] = frozen(hi);
        for k in 1..n - 1 {
            let b = lo + k as f64 * d;
            let m = p.kappa * (p.beta_bar - b) + b / p.sigma * p.sigma_beta * (1.0 - 1.0 / p.gamma);
            let (mut lo_c, mut up_c) = (diff, diff);
            if m.abs() * d <= p.sigma_beta * p.sigma_beta {
                lo_c -= m / (2.0 * d);
                up_c += m / (2.0 * d);
            } else if m > 0.0 {
                up_c += m / d;
            } else {
                lo_c -= m / d;
            }
            // written as (-L) h = 1 so that the system is an M-matrix
            lower[k] = -lo_c;
            upper[k] = -up_c;
            diag[k] = lo_c + up_c + p.r + p.rho(b);
            rhs[k] = 1.0;
        }
        let values = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        if let Some(k) = values.iter().position(|&h| !(h > 0.0)) {
            return Err(Error::Domain(format!(
                "tail coefficient non-positive at beta = {}",
                lo + k as f64 * d
            )));
        }
        Ok(Self {
            params: *p,
            beta_lo: lo,
            d_beta: d,
            values,
        })
    }

    /// Default resolution for a grid: the beta range tripled around its
    /// centre, sampled ten times finer than the grid.
    pub fn for_grid(p: &ModelParams, grid: &GridSpec) -> Result<Self> {
        if p.sigma_beta <= 0.0 {
            return Ok(Self::frozen(p));
        }
        let c = 0.5 * (grid.beta_lo + grid.beta_hi);
        let w = 0.5 * (grid.beta_hi - grid.beta_lo).max(1e-3);
        let n = (30 * grid.n_beta.max(3)).max(3001);
        Self::solve(p, c - 3.0 * w, c + 3.0 * w, n)
    }

    pub fn is_frozen(&self) -> bool {
        self.values.is_empty()
    }

    /// `h(beta)`, linear between ODE nodes; frozen-factor value outside.
    pub fn h(&self, beta: f64) -> f64 {
        if self.values.is_empty() {
            return 1.0 / (self.params.r + self.params.rho(beta));
        }
        let s = (beta - self.beta_lo) / self.d_beta;
        let n = self.values.len();
        if !(s >= 0.0) || s > (n - 1) as f64 {
            return 1.0 / (self.params.r + self.params.rho(beta));
        }
        let k = (s.floor() as usize).min(n - 2);
        let w = s - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// `h'(beta)` by central differences of the interpolant.
    pub fn h_prime(&self, beta: f64) -> f64 {
        let e = if self.d_beta > 0.0 { self.d_beta } else { 1e-5 };
        (self.h(beta + e) - self.h(beta - e)) / (2.0 * e)
    }

    /// The never-stop value `g(z, beta)`.
    pub fn g(&self, z: f64, beta: f64) -> f64 {
        self.params.ell / self.params.r - z.powf(-1.0 / self.params.gamma) * self.h(beta)
    }

    /// `d g / d z`.
    pub fn g_z(&self, z: f64, beta: f64) -> f64 {
        let g = self.params.gamma;
        z.powf(-1.0 / g - 1.0) * self.h(beta) / g
    }

    /// `d g / d beta`.
    pub fn g_beta(&self, z: f64, beta: f64) -> f64 {
        -z.powf(-1.0 / self.params.gamma) * self.h_prime(beta)
    }

    /// `int_0^z g(y, beta) dy`, finite because `1/gamma < 1`.
    pub fn g_integral(&self, z: f64, beta: f64) -> f64 {
        let q = 1.0 - 1.0 / self.params.gamma;
        self.params.ell * z / self.params.r - self.h(beta) * z.powf(q) / q
    }
}

/// Dirichlet data at `z_min`, one value per beta row, together with the
/// tail coefficients used to produce it.
pub fn left_boundary_values(grid: &GridSpec, p: &ModelParams) -> Result<(TailCoefficients, Vec<f64>)> {
    let tail = TailCoefficients::for_grid(p, grid)?;
    let vals = (0..grid.n_beta).map(|j| tail.g(grid.z_min, grid.beta(j))).collect();
    Ok((tail, vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_value() {
        let p = ModelParams::reference().constant_beta();
        let t = TailCoefficients::frozen(&p);
        let h = t.h(0.05);
        assert!((1.0 / h - 0.045247).abs() < 1e-5, "{}", 1.0 / h);
        assert!((h - 22.10).abs() < 0.01);
    }

    #[test]
    fn ode_degenerates_to_frozen() {
        let mut p = ModelParams::reference();
        p.sigma_beta = 1e-6;
        p.kappa = 1e-6;
        let t = TailCoefficients::solve(&p, -0.2, 0.3, 2001).unwrap();
        for b in [-0.1, 0.0, 0.05, 0.2] {
            let exact = 1.0 / (p.r + p.rho(b));
            assert!((t.h(b) - exact).abs() < 1e-3 * exact);
        }
    }

    #[test]
    fn bounded_by_moment_rate() {
        let p = ModelParams::reference();
        let g = GridSpec::default_for(&p);
        let t = TailCoefficients::for_grid(&p, &g).unwrap();
        let ub = 1.0 / p.moment_rate();
        for j in 0..g.n_beta {
            let h = t.h(g.beta(j));
            assert!(h > 0.0 && h <= ub * (1.0 + 1e-12));
        }
    }

    #[test]
    fn integral_differentiates_to_g() {
        let p = ModelParams::reference();
        let t = TailCoefficients::frozen(&p.constant_beta());
        let (z, e) = (0.01, 1e-7);
        let d = (t.g_integral(z + e, 0.05) - t.g_integral(z - e, 0.05)) / (2.0 * e);
        assert!((d - t.g(z, 0.05)).abs() < 1e-5 * t.g(z, 0.05).abs());
    }
}
