//! Independent ground truth: the frozen-factor closed form and Monte Carlo
//! estimators of the stopping value, its gradient, the moment bound and the
//! duality/budget identities.

pub mod checks;
mod const_beta;
pub mod mc;
pub mod report;

pub use checks::{check_strong_duality, DualityReport, IdentityCheck};
pub use const_beta::ConstBetaSolution;
pub use report::{CheckLine, CheckReport};
pub use mc::{
    check_moment_bound, mc_gradient_estimate, mc_tail_coefficient, mc_value_estimate, mc_vbeta_estimate,
    mc_vz_estimate, GradientEstimate, McConfig, McEstimate, MomentReport, MomentRow,
};
