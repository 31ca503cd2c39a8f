use crate::dual::DualValue;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Closed-form stopping value for a frozen factor.
///
/// With `beta` constant the variational inequality reduces to the Euler ODE
/// `0.5 theta^2 z^2 v'' + (delta - r + theta^2) z v' - r v - z^(-1/gamma) + ell = 0`
/// on `(0, z*)`, `v = 0` above. The bounded solution is
///
/// ```text
/// v(z) = ell/r - z^(-1/gamma)/(r + rho) + A z^alpha
/// ```
///
/// with `alpha` the positive root of `0.5 theta^2 a(a-1) + (delta - r + theta^2) a - r = 0`;
/// value matching and smooth pasting at `z*` fix `A` and `z*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstBetaSolution {
    pub params: ModelParams,
    pub beta: f64,
    pub rho: f64,
    pub alpha_plus: f64,
    /// Coefficient of the homogeneous term (negative).
    pub a_coef: f64,
    pub z_star_1d: f64,
}

impl ConstBetaSolution {
    pub fn new(p: &ModelParams, beta: f64) -> Result<Self> {
        let th2 = (beta / p.sigma).powi(2);
        let rho = p.rho(beta);
        let rr = p.r + rho;
        if !(rr > 0.0) {
            return Err(Error::Domain(format!("r + rho = {rr} must be positive")));
        }
        // 0.5 th2 a^2 + B a - r = 0 with B = delta - r + th2/2; stable positive root
        let bq = p.delta - p.r + 0.5 * th2;
        let disc = bq * bq + 2.0 * th2 * p.r;
        let den = bq + disc.sqrt();
        let alpha = 2.0 * p.r / den;
        if !(den > 0.0) || !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!(
                "no positive characteristic root for beta = {beta}"
            )));
        }
        let g = p.gamma;
        let w = p.ell * rr / p.r * g * alpha / (g * alpha + 1.0);
        let z_star = w.powf(-g);
        let a_coef = -z_star.powf(-1.0 / g - alpha) / (g * alpha * rr);
        Ok(Self {
            params: *p,
            beta,
            rho,
            alpha_plus: alpha,
            a_coef,
            z_star_1d: z_star,
        })
    }

    /// At the long-run level of the factor.
    pub fn at_beta_bar(p: &ModelParams) -> Result<Self> {
        Self::new(p, p.beta_bar)
    }

    fn rr(&self) -> f64 {
        self.params.r + self.rho
    }

    pub fn value(&self, z: f64) -> f64 {
        if z >= self.z_star_1d {
            return 0.0;
        }
        let p = &self.params;
        p.ell / p.r - z.powf(-1.0 / p.gamma) / self.rr() + self.a_coef * z.powf(self.alpha_plus)
    }

    pub fn value_z(&self, z: f64) -> f64 {
        if z >= self.z_star_1d {
            return 0.0;
        }
        let g = self.params.gamma;
        z.powf(-1.0 / g - 1.0) / (g * self.rr())
            + self.alpha_plus * self.a_coef * z.powf(self.alpha_plus - 1.0)
    }

    pub fn value_zz(&self, z: f64) -> f64 {
        if z >= self.z_star_1d {
            return 0.0;
        }
        let g = self.params.gamma;
        let a = self.alpha_plus;
        -(1.0 / g) * (1.0 / g + 1.0) * z.powf(-1.0 / g - 2.0) / self.rr()
            + a * (a - 1.0) * self.a_coef * z.powf(a - 2.0)
    }

    /// `int_0^z v`, constant beyond `z*`.
    pub fn value_tilde(&self, z: f64) -> f64 {
        let p = &self.params;
        let z = z.min(self.z_star_1d);
        let q = 1.0 - 1.0 / p.gamma;
        let a = self.alpha_plus;
        p.ell * z / p.r - z.powf(q) / (q * self.rr()) + self.a_coef * z.powf(a + 1.0) / (a + 1.0)
    }

    /// Residual of the Euler ODE at `z < z*`.
    pub fn ode_residual(&self, z: f64) -> f64 {
        let p = &self.params;
        let th2 = (self.beta / p.sigma).powi(2);
        0.5 * th2 * z * z * self.value_zz(z) + (p.delta - p.r + th2) * z * self.value_z(z)
            - p.r * self.value(z)
            - z.powf(-1.0 / p.gamma)
            + p.ell
    }

    /// `d v / d beta` across the family of frozen-factor solutions, by
    /// central differences.
    pub fn value_beta(&self, z: f64) -> f64 {
        let e = 1e-5;
        match (Self::new(&self.params, self.beta + e), Self::new(&self.params, self.beta - e)) {
            (Ok(a), Ok(b)) => (a.value(z) - b.value(z)) / (2.0 * e),
            _ => 0.0,
        }
    }
}

impl DualValue for ConstBetaSolution {
    fn params(&self) -> &ModelParams {
        &self.params
    }
    fn v(&self, z: f64, _beta: f64) -> f64 {
        self.value(z)
    }
    fn v_z(&self, z: f64, _beta: f64) -> f64 {
        self.value_z(z)
    }
    fn v_beta(&self, z: f64, _beta: f64) -> f64 {
        self.value_beta(z)
    }
    fn v_tilde(&self, z: f64, _beta: f64) -> f64 {
        self.value_tilde(z)
    }
    fn z_star(&self, _beta: f64) -> f64 {
        self.z_star_1d
    }
    fn tail_h(&self, _beta: f64) -> f64 {
        1.0 / self.rr()
    }
    fn upper_bracket(&self, _beta: f64) -> f64 {
        self.z_star_1d
    }
    fn z_limit(&self) -> f64 {
        f64::INFINITY
    }
    fn z_star_sup(&self) -> f64 {
        self.z_star_1d
    }
}
