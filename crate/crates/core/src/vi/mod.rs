//! Finite-difference solution of the optimal-stopping variational inequality
//!
//! ```text
//! min( L v - r v + f, -v ) = 0,   f(z) = -z^(-1/gamma) + ell,
//! ```
//!
//! where `L` is the generator of `(Z, beta)` under the stopping measure. The
//! diffusion of that pair is rank one (a single Brownian motion drives
//! both), so in the coordinates `(psi, beta)` with
//! `psi = ln z - beta^2 / (2 sigma sigma_beta)` the generator has no diffusion
//! along `psi` and no cross derivative, which gives a monotone upwind scheme.

mod boundary;
mod grid;
mod operator;
mod refine;
mod solve;
mod surface;

pub use boundary::{left_boundary_values, TailCoefficients};
pub use grid::{CoordMode, GridSpec, Layout, RowLayout};
pub use operator::{assemble_operator, DiscreteOperator};
pub use refine::{domain_sensitivity, refine_and_compare, ConvergenceReport};
pub use solve::{solve_vi, Method, SolveDiagnostics, SolverOptions};
pub use surface::ValueSurface;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Running reward of the stopping problem, `-z^(-1/gamma) + ell`.
pub fn running_cost(p: &ModelParams, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("running cost needs z > 0, got {z}")));
    }
    Ok(p.ell - z.powf(-1.0 / p.gamma))
}

/// `beta^2 / (2 sigma sigma_beta)`: the shift between `ln z` and `psi`.
#[inline]
pub fn psi_shift(p: &ModelParams, beta: f64) -> f64 {
    beta * beta / (2.0 * p.sigma * p.sigma_beta)
}

/// `psi = ln z - beta^2 / (2 sigma sigma_beta)`.
pub fn characteristic_coords(p: &ModelParams, y: f64, beta: f64) -> Result<f64> {
    if !(p.sigma_beta > 0.0) {
        return Err(Error::Domain(
            "characteristic coordinates need sigma_beta > 0".into(),
        ));
    }
    Ok(y - psi_shift(p, beta))
}

/// Drift of `psi` under the stopping measure (its diffusion vanishes):
///
/// `delta - r - beta^2/(2 sigma^2) - kappa beta (beta_bar - beta)/(sigma sigma_beta) - sigma_beta/(2 sigma)`.
#[inline]
pub fn psi_drift(p: &ModelParams, beta: f64) -> f64 {
    p.delta - p.r - beta * beta / (2.0 * p.sigma * p.sigma)
        - p.kappa * beta * (p.beta_bar - beta) / (p.sigma * p.sigma_beta)
        - p.sigma_beta / (2.0 * p.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{q_beta_drift, q_log_z_drift};

    #[test]
    fn running_cost_values() {
        let p = ModelParams::reference();
        let floor = crate::model::boundary_floor(&p);
        assert!(running_cost(&p, floor).unwrap().abs() < 1e-14);
        assert!((running_cost(&p, 1.0).unwrap() + 0.4).abs() < 1e-15);
        assert!((running_cost(&p, 1e12).unwrap() - 0.6).abs() < 1e-7);
        assert!(running_cost(&p, 0.0).is_err());
    }

    #[test]
    fn psi_drift_matches_ito() {
        // d psi = dy - f'(beta) d beta - 0.5 f''(beta) sigma_beta^2 dt
        let p = ModelParams::reference();
        for beta in [-0.3, -0.05, 0.0, 0.05, 0.2, 0.5] {
            let f1 = beta / (p.sigma * p.sigma_beta);
            let f2 = 1.0 / (p.sigma * p.sigma_beta);
            let ito = q_log_z_drift(&p, beta)
                - f1 * q_beta_drift(&p, beta)
                - 0.5 * f2 * p.sigma_beta * p.sigma_beta;
            assert!((ito - psi_drift(&p, beta)).abs() < 1e-14);
            // diffusion: -beta/sigma - f'(beta) (-sigma_beta) = 0
            assert!((-beta / p.sigma + f1 * p.sigma_beta).abs() < 1e-15);
        }
        assert!((psi_drift(&p, 0.0) - (0.01 - 0.03 / 0.36)).abs() < 1e-15);
        assert!((psi_drift(&p, 0.0) + 0.073333333).abs() < 1e-8);
    }

    #[test]
    fn psi_at_zero_beta_is_y() {
        let p = ModelParams::reference();
        assert_eq!(characteristic_coords(&p, 1.3, 0.0).unwrap(), 1.3);
        assert!(characteristic_coords(&p.constant_beta(), 1.3, 0.0).is_err());
    }
}
