//! Strong duality and the static budget constraint along simulated optimal paths.
//!
//! Up to a horizon `T`, the optimal paths satisfy two identities:
//!
//! ```text
//! E[int_0^T e^{-delta t} u(c*) dt + e^{-delta T} V(X*_T, beta_T)] = Vtilde(zhat, beta) + zhat x
//! E[int_0^T H D* (c* - ell) dt + H_T D*_T X*_T]                   = x
//! ```
//!
//! Both horizon terms are reported next to the truncated integrals. The
//! primal one is also bounded crudely from the largest boundary value.

use crate::dual::DualValue;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::simulate::{for_each_step, SimConfig};
use crate::stats::mean_se;

/// Estimate, target and tolerance of one identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// Truncated integral plus horizon term.
    pub estimate: f64,
    pub se: f64,
    /// Mean horizon term included in `estimate`.
    pub horizon_term: f64,
    pub target: f64,
    /// `|estimate - target| / |target|`.
    pub relative_gap: f64,
    /// `gap <= max(rel_tol |target|, 3 se)`.
    pub pass: bool,
}

impl IdentityCheck {
    fn new(samples: &[f64], horizon_term: f64, target: f64, rel_tol: f64) -> Self {
        let (estimate, se) = mean_se(samples);
        let gap = (estimate - target).abs();
        Self {
            estimate,
            se,
            horizon_term,
            target,
            relative_gap: gap / target.abs(),
            pass: gap <= (rel_tol * target.abs()).max(3.0 * se),
        }
    }
}

/// Result of [`check_strong_duality`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub x: f64,
    pub beta: f64,
    pub z_hat: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub primal: IdentityCheck,
    pub budget: IdentityCheck,
    /// `e^{-delta T} |u(c_min)| / delta` with `c_min` at the largest boundary value.
    pub primal_tail_bound: f64,
    /// `(z, Vtilde(z) + z x - primal estimate, 3 se)` for suboptimal dual points.
    pub weak_duality: Vec<(f64, f64, f64)>,
}

impl DualityReport {
    pub fn passed(&self) -> bool {
        self.primal.pass && self.budget.pass && self.weak_duality.iter().all(|&(_, gap, tol)| gap >= -tol)
    }
}

/// Monte Carlo primal value and budget at `(x, beta)` against the dual
/// surface, with `rel_tol` the relative tolerance (e.g. 2%).
pub fn check_strong_duality<D: DualValue + ?Sized>(
    x: f64,
    beta: f64,
    dual: &D,
    n_paths: usize,
    cfg: &SimConfig,
    rel_tol: f64,
) -> Result<DualityReport> {
    if n_paths == 0 {
        return Err(Error::Domain("duality check needs at least one path".into()));
    }
    let p = *dual.params();
    let g = p.gamma;
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let samples = map_indexed(n_paths, |i| {
        let (mut primal, mut budget) = (0.0, 0.0);
        let (mut primal_end, mut budget_end) = (0.0, 0.0);
        for_each_step(x, beta, dual, cfg, i as u64, |s| {
            let c = s.z_ctrl.powf(-1.0 / g);
            let hd = s.log_h.exp() * s.d_star;
            if s.step < n_steps {
                primal += (-p.delta * s.t).exp() * c.powf(1.0 - g) / (1.0 - g) * dt;
                budget += hd * (c - p.ell) * dt;
            } else {
                let value = dual.v_tilde(s.z_ctrl, s.beta) + s.z_ctrl * s.x_star;
                primal_end = (-p.delta * s.t).exp() * value;
                budget_end = hd * s.x_star;
            }
        })?;
        Ok::<_, Error>((primal + primal_end, budget + budget_end, primal_end, budget_end))
    });
    let mut rows = Vec::with_capacity(n_paths);
    for s in samples {
        rows.push(s?);
    }
    let n = rows.len() as f64;
    let col = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let z_hat = dual.invert_marginal(x, beta)?;
    let target = dual.v_tilde(z_hat, beta) + z_hat * x;
    let primal = IdentityCheck::new(&col(|r| r.0), rows.iter().map(|r| r.2).sum::<f64>() / n, target, rel_tol);
    let budget = IdentityCheck::new(&col(|r| r.1), rows.iter().map(|r| r.3).sum::<f64>() / n, x, rel_tol);
    let weak_duality = [0.25, 0.5, 0.8, 1.25, 2.0]
        .iter()
        .map(|&m| {
            let z = z_hat * m;
            (z, dual.v_tilde(z, beta) + z * x - primal.estimate, 3.0 * primal.se)
        })
        .collect();
    Ok(DualityReport {
        x,
        beta,
        z_hat,
        n_paths,
        dt,
        horizon: cfg.horizon,
        seed: cfg.seed,
        primal,
        budget,
        primal_tail_bound: primal_tail_bound(p.delta, g, cfg.horizon, dual.z_star_sup()),
        weak_duality,
    })
}

/// Bound on the primal contribution after `horizon` when consumption never
/// drops below `z_max_star^(-1/gamma)`.
pub fn primal_tail_bound(delta: f64, gamma: f64, horizon: f64, z_max_star: f64) -> f64 {
    let c_min = z_max_star.powf(-1.0 / gamma);
    (-delta * horizon).exp() * c_min.powf(1.0 - gamma) / (gamma - 1.0) / delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::oracle::ConstBetaSolution;

    #[test]
    fn frozen_factor_duality_gap_is_small() {
        let s = ConstBetaSolution::at_beta_bar(&ModelParams::reference().constant_beta()).unwrap();
        let cfg = SimConfig {
            horizon: 150.0,
            dt: 0.02,
            seed: 17,
            ..SimConfig::default()
        };
        let r = check_strong_duality(1.0, s.beta, &s, 400, &cfg, 0.01).unwrap();
        assert!(r.primal.pass, "{:?}", r.primal);
        assert!(r.budget.pass, "{:?}", r.budget);
        assert!(r.passed());
        assert!(r.primal.target < 0.0);
        assert!(r.primal_tail_bound > 0.0 && r.primal_tail_bound < 0.01 * r.primal.target.abs());
    }

    #[test]
    fn tail_bound_formula() {
        let b = primal_tail_bound(0.04, 1.5, 0.0, 1.0);
        assert!((b - 2.0 / 0.04).abs() < 1e-12);
    }
}
