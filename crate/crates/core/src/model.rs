//! Market and preference constants, the power utility and its convex dual,
//! and parameter validation.
//!
//! The market is a Kim–Omberg economy: the risky asset's expected excess
//! return `beta` follows an Ornstein–Uhlenbeck process driven by the same
//! Brownian motion as the asset (perfect negative correlation). The agent
//! has power utility with risk aversion `gamma > 1` and receives a constant
//! labour income `ell`.

use crate::error::{Error, Result};

/// The eight model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Risk-free rate.
    pub r: f64,
    /// Subjective discount rate.
    pub delta: f64,
    /// Labour income rate.
    pub ell: f64,
    /// Relative risk aversion (> 1).
    pub gamma: f64,
    /// Mean-reversion speed of the excess return.
    pub kappa: f64,
    /// Long-run excess return.
    pub beta_bar: f64,
    /// Volatility of the excess return.
    pub sigma_beta: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
}

impl ModelParams {
    /// Reference parameter set used throughout the numerical study.
    pub const fn reference() -> Self {
        Self {
            r: 0.03,
            delta: 0.04,
            ell: 0.6,
            gamma: 1.5,
            kappa: 0.25,
            beta_bar: 0.05,
            sigma_beta: 0.03,
            sigma: 0.18,
        }
    }

    /// Same market with the factor frozen at `beta_bar` (`kappa = sigma_beta = 0`).
    pub fn constant_beta(&self) -> Self {
        Self {
            kappa: 0.0,
            sigma_beta: 0.0,
            ..*self
        }
    }

    /// True when the factor has no dynamics.
    pub fn is_constant_beta(&self) -> bool {
        self.kappa == 0.0 && self.sigma_beta == 0.0
    }

    /// Mean-reversion rate of the factor under the stopping measure,
    /// `a = kappa - sigma_beta / sigma`.
    pub fn a(&self) -> f64 {
        self.kappa - self.sigma_beta / self.sigma
    }

    /// Long-run level of the factor under the stopping measure, `kappa * beta_bar / a`.
    /// Only meaningful when `a > 0`.
    pub fn b(&self) -> f64 {
        self.kappa * self.beta_bar / self.a()
    }

    /// Market price of risk `beta / sigma`.
    pub fn theta(&self, beta: f64) -> f64 {
        beta / self.sigma
    }

    /// `r + (delta - r) / gamma`, the discount rate in the moment bound.
    pub fn moment_rate(&self) -> f64 {
        self.r + (self.delta - self.r) / self.gamma
    }

    /// Effective discount add-on for a frozen factor value:
    /// `(delta - r)/gamma + theta^2 (gamma - 1) / (2 gamma^2)`.
    pub fn rho(&self, beta: f64) -> f64 {
        let th = self.theta(beta);
        (self.delta - self.r) / self.gamma
            + 0.5 * th * th * (self.gamma - 1.0) / (self.gamma * self.gamma)
    }

    pub fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("r", self.r),
            ("delta", self.delta),
            ("ell", self.ell),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("beta_bar", self.beta_bar),
            ("sigma_beta", self.sigma_beta),
            ("sigma", self.sigma),
        ]
    }

    /// Field names accepted in the `[model]` config section.
    pub const FIELD_NAMES: [&'static str; 8] = [
        "r",
        "delta",
        "ell",
        "gamma",
        "kappa",
        "beta_bar",
        "sigma_beta",
        "sigma",
    ];

    /// Set a field by its config name.
    pub fn set_field(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "r" => &mut self.r,
            "delta" => &mut self.delta,
            "ell" => &mut self.ell,
            "gamma" => &mut self.gamma,
            "kappa" => &mut self.kappa,
            "beta_bar" => &mut self.beta_bar,
            "sigma_beta" => &mut self.sigma_beta,
            "sigma" => &mut self.sigma,
            other => return Err(Error::Config(format!("unknown model key `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Read a field by its config name.
    pub fn field(&self, name: &str) -> Option<f64> {
        self.fields().iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    /// Validate and return an error unless the report is clean of errors.
    pub fn checked(self, mode: ValidationMode) -> Result<Self> {
        let report = validate_params(&self, mode);
        if report.accepted() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(report.error_summary()))
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// How strictly to enforce the standing assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    #[default]
    Strict,
    /// Additionally admits the frozen-factor regime `kappa = sigma_beta = 0`.
    Permissive,
}

impl std::str::FromStr for ValidationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Self::Strict),
            "permissive" => Ok(Self::Permissive),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub severity: Severity,
    pub message: String,
    /// Signed distance from the violated threshold (positive means violated by this much).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Set when the frozen-factor regime was recognised.
    pub constant_beta: bool,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.severity == Severity::Warning)
    }

    pub fn accepted(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn error_summary(&self) -> String {
        self.errors()
            .map(|c| format!("{}: {}", c.name, c.message))
            .collect::<Vec<_>>()
            .join("; ")
    }

    fn push(&mut self, name: &'static str, severity: Severity, margin: f64, message: String) {
        self.checks.push(Check {
            name,
            severity,
            message,
            margin,
        });
    }
}

/// The risk-aversion threshold `sigma_beta / (sigma (kappa - sigma_beta/sigma))`
/// above which the stopping value is known to be well posed.
pub fn gamma_wellposed_bound(p: &ModelParams) -> f64 {
    p.sigma_beta / (p.sigma * p.a())
}

/// Evaluate every parameter invariant. Pure: identical input gives an identical report.
pub fn validate_params(p: &ModelParams, mode: ValidationMode) -> ValidationReport {
    let mut rep = ValidationReport::default();

    for (name, v) in p.fields() {
        if !v.is_finite() {
            rep.push("finite", Severity::Error, f64::NAN, format!("{name} is not finite"));
        }
    }
    if !rep.accepted() {
        return rep;
    }

    let positive = [("r", p.r), ("delta", p.delta), ("ell", p.ell), ("sigma", p.sigma)];
    for (name, v) in positive {
        if v <= 0.0 {
            rep.push("positivity", Severity::Error, -v, format!("{name} = {v} must be > 0"));
        }
    }
    if p.gamma <= 1.0 {
        rep.push(
            "gamma",
            Severity::Error,
            1.0 - p.gamma,
            format!("gamma = {} must be > 1", p.gamma),
        );
    }
    if p.kappa < 0.0 || p.sigma_beta < 0.0 {
        rep.push(
            "factor",
            Severity::Error,
            -p.kappa.min(p.sigma_beta),
            "kappa and sigma_beta must be >= 0".into(),
        );
    }
    if !rep.accepted() {
        return rep;
    }

    if p.is_constant_beta() {
        rep.constant_beta = true;
        if mode == ValidationMode::Strict {
            rep.push(
                "constant_beta",
                Severity::Error,
                0.0,
                "kappa = sigma_beta = 0 requires permissive mode".into(),
            );
        }
        return rep;
    }

    // Novikov-type requirement kappa * sigma > sigma_beta.
    let novikov = p.kappa * p.sigma - p.sigma_beta;
    if novikov <= 0.0 {
        rep.push(
            "novikov",
            Severity::Error,
            -novikov,
            format!(
                "kappa*sigma = {} must exceed sigma_beta = {}",
                p.kappa * p.sigma,
                p.sigma_beta
            ),
        );
        return rep;
    }

    // Sufficient (not necessary) condition for well-posedness: reported only.
    let bound = gamma_wellposed_bound(p);
    if p.gamma <= bound {
        rep.push(
            "gamma_wellposed",
            Severity::Warning,
            bound - p.gamma,
            format!(
                "gamma = {} does not exceed the sufficient bound {bound:.6}",
                p.gamma
            ),
        );
    }
    rep
}

/// Power utility `c^(1-gamma) / (1-gamma)`.
pub fn utility(c: f64, gamma: f64) -> Result<f64> {
    if c <= 0.0 || c.is_nan() {
        return Err(Error::Domain(format!("utility requires c > 0, got {c}")));
    }
    Ok(c.powf(1.0 - gamma) / (1.0 - gamma))
}

/// Convex dual of the utility, `sup_c (u(c) - z c) = gamma/(1-gamma) z^{-(1-gamma)/gamma}`.
pub fn dual_utility(z: f64, gamma: f64) -> Result<f64> {
    if z <= 0.0 || z.is_nan() {
        return Err(Error::Domain(format!("dual utility requires z > 0, got {z}")));
    }
    Ok(gamma / (1.0 - gamma) * z.powf(-(1.0 - gamma) / gamma))
}

/// Derivative of the dual utility, `-z^{-1/gamma}`.
pub fn dual_utility_prime(z: f64, gamma: f64) -> Result<f64> {
    if z <= 0.0 || z.is_nan() {
        return Err(Error::Domain(format!("dual utility requires z > 0, got {z}")));
    }
    Ok(-z.powf(-1.0 / gamma))
}

/// `ell^{-gamma}`: the free boundary never lies below this level.
pub fn boundary_floor(p: &ModelParams) -> f64 {
    p.ell.powf(-p.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_params_pass_novikov_and_warn_on_gamma() {
        let p = ModelParams::reference();
        let rep = validate_params(&p, ValidationMode::Strict);
        assert!(rep.accepted());
        let w: Vec<_> = rep.warnings().collect();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].name, "gamma_wellposed");
        // bound = 0.03 / (0.18 * (0.25 - 1/6)) = 2.0
        assert!((gamma_wellposed_bound(&p) - 2.0).abs() < 1e-12);
        assert!((w[0].margin - 0.5).abs() < 1e-12);
        assert!(p.kappa * p.sigma - p.sigma_beta > 0.0);
        assert!((p.kappa * p.sigma - 0.045).abs() < 1e-15);
    }

    #[test]
    fn constant_beta_needs_permissive_mode() {
        let p = ModelParams::reference().constant_beta();
        assert!(!validate_params(&p, ValidationMode::Strict).accepted());
        let rep = validate_params(&p, ValidationMode::Permissive);
        assert!(rep.accepted());
        assert!(rep.constant_beta);
    }

    #[test]
    fn hard_errors() {
        let mut p = ModelParams::reference();
        p.gamma = 0.9;
        assert!(!validate_params(&p, ValidationMode::Permissive).accepted());
        let mut p = ModelParams::reference();
        p.sigma = 0.0;
        assert!(!validate_params(&p, ValidationMode::Permissive).accepted());
        let mut p = ModelParams::reference();
        p.r = f64::NAN;
        let rep = validate_params(&p, ValidationMode::Permissive);
        assert!(!rep.accepted());
        assert_eq!(rep.checks[0].name, "finite");
        let mut p = ModelParams::reference();
        p.sigma_beta = 0.05; // kappa*sigma = 0.045 < 0.05
        assert!(!validate_params(&p, ValidationMode::Strict).accepted());
    }

    #[test]
    fn validation_is_pure() {
        let p = ModelParams::reference();
        assert_eq!(
            validate_params(&p, ValidationMode::Strict),
            validate_params(&p, ValidationMode::Strict)
        );
    }

    #[test]
    fn utility_values() {
        assert!((utility(1.0, 1.5).unwrap() + 2.0).abs() < 1e-15);
        assert!((utility(4.0, 1.5).unwrap() + 1.0).abs() < 1e-15);
        assert!(utility(0.0, 1.5).is_err());
        let mut prev = utility(1.0, 1.5).unwrap();
        for k in 1..40 {
            let u = utility(2f64.powi(k), 1.5).unwrap();
            assert!(u > prev && u < 0.0);
            prev = u;
        }
    }

    #[test]
    fn dual_utility_values() {
        for g in [1.2, 1.5, 2.0, 5.0] {
            assert!((dual_utility_prime(1.0, g).unwrap() + 1.0).abs() < 1e-15);
        }
        assert!((dual_utility(1.0, 1.5).unwrap() + 3.0).abs() < 1e-15);
        assert!(dual_utility(-1.0, 1.5).is_err());
        assert!(dual_utility_prime(0.0, 1.5).is_err());
    }

    #[test]
    fn dual_utility_shape_on_grid() {
        let g = 1.5;
        let zs: Vec<f64> = (0..200).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 199.0)).collect();
        for w in zs.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(dual_utility_prime(a, g).unwrap() < dual_utility_prime(b, g).unwrap());
            assert!(dual_utility_prime(b, g).unwrap() < 0.0);
            assert!(dual_utility(a, g).unwrap() > dual_utility(b, g).unwrap());
            assert!(dual_utility(b, g).unwrap() < 0.0);
        }
    }

    /// Brute-force conjugacy: scan c on a log grid, refine locally by golden section.
    fn brute_conjugate(z: f64, g: f64) -> f64 {
        let obj = |c: f64| utility(c, g).unwrap() - z * c;
        let n = 4000;
        let (lo, hi) = (-8.0f64, 8.0f64);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..=n {
            let c = (lo + (hi - lo) * i as f64 / n as f64).exp();
            let v = obj(c);
            if v > best.0 {
                best = (v, i);
            }
        }
        let step = (hi - lo) / n as f64;
        let mut a = lo + step * (best.1 as f64 - 1.0);
        let mut b = lo + step * (best.1 as f64 + 1.0);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if obj(x1.exp()) > obj(x2.exp()) {
                b = x2;
            } else {
                a = x1;
            }
        }
        obj((0.5 * (a + b)).exp())
    }

    #[test]
    fn conjugacy_by_brute_force() {
        for g in [1.5, 2.0] {
            for i in 0..25 {
                let z = 10f64.powf(-1.0 + 2.0 * i as f64 / 24.0);
                let bf = brute_conjugate(z, g);
                let cf = dual_utility(z, g).unwrap();
                assert!((bf - cf).abs() < 1e-8, "z={z} g={g} bf={bf} cf={cf}");
            }
        }
    }

    #[test]
    fn boundary_floor_values() {
        let mut p = ModelParams::reference();
        assert!((boundary_floor(&p) - 0.6f64.powf(-1.5)).abs() < 1e-14);
        assert!((boundary_floor(&p) - 2.151657414559676).abs() < 1e-12);
        p.ell = 1.0;
        assert_eq!(boundary_floor(&p), 1.0);
        p.ell = 0.2;
        assert!((boundary_floor(&p) - 11.180339887498949).abs() < 1e-10);
    }
}
