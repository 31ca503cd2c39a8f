//! Euler–Maruyama steppers for the factor/discount system under the
//! physical measure and for the dual state under the stopping measure,
//! plus exact Ornstein–Uhlenbeck moments.
//!
//! Both systems are driven by a single Brownian motion, so every stepper
//! takes one shared increment `dw` for all of its components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Default time step (one trading day).
pub const DEFAULT_DT: f64 = 1.0 / 250.0;

/// A reproducible Brownian increment stream.
///
/// Path `stream` of master seed `seed` always yields the same draws,
/// independent of how paths are scheduled across workers. A stream can be
/// coarsened: each coarse increment is the sum of `k` fine increments, so a
/// coarse and a fine scheme driven by the same `(seed, stream)` see the same
/// Brownian path.
#[derive(Debug, Clone)]
pub struct PathNoise {
    rng: ChaCha8Rng,
    fine_sqrt_dt: f64,
    substeps: usize,
    pub dt: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl PathNoise {
    pub fn new(seed: u64, stream_id: u64, dt: f64) -> Self {
        Self::with_substeps(seed, stream_id, dt, 1)
    }

    /// Increments of size `dt`, each built from `substeps` draws of size `dt / substeps`.
    pub fn with_substeps(seed: u64, stream_id: u64, dt: f64, substeps: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        let substeps = substeps.max(1);
        Self {
            rng,
            fine_sqrt_dt: (dt / substeps as f64).sqrt(),
            substeps,
            dt,
            seed,
            stream_id,
        }
    }

    #[inline]
    pub fn next_dw(&mut self) -> f64 {
        let mut s = 0.0;
        for _ in 0..self.substeps {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            s += g;
        }
        s * self.fine_sqrt_dt
    }

    /// Materialise `n_steps` increments.
    pub fn increments(&mut self, n_steps: usize) -> Vec<f64> {
        (0..n_steps).map(|_| self.next_dw()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    /// Physical measure: factor reverts at `kappa` to `beta_bar`.
    P,
    /// Stopping measure: factor reverts at `a` to `b`.
    Q,
}

/// State of the uncontrolled system under the physical measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PStateSample {
    pub t: f64,
    pub beta: f64,
    /// Log of the state-price deflator.
    pub log_h: f64,
    /// Log of the uncontrolled dual state, `ln z + delta t + ln H`.
    pub log_z1: f64,
}

impl PStateSample {
    pub fn initial(z: f64, beta: f64) -> Self {
        Self {
            t: 0.0,
            beta,
            log_h: 0.0,
            log_z1: z.ln(),
        }
    }
}

/// State of the dual process under the stopping measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStateSample {
    pub t: f64,
    pub z_hat: f64,
    pub beta_hat: f64,
}

/// One Euler step under the physical measure. `log_z1` is recomputed from
/// the exact identity rather than stepped, so `log_z1 - log_h - delta t`
/// stays equal to `ln z` along the path.
#[inline]
pub fn step_p(s: &PStateSample, p: &ModelParams, dt: f64, dw: f64) -> PStateSample {
    let b = s.beta;
    let theta = b / p.sigma;
    let log_z0 = s.log_z1 - s.log_h - p.delta * s.t;
    let beta = b + p.kappa * (p.beta_bar - b) * dt - p.sigma_beta * dw;
    let log_h = s.log_h - (p.r + 0.5 * theta * theta) * dt - theta * dw;
    let t = s.t + dt;
    PStateSample {
        t,
        beta,
        log_h,
        log_z1: log_z0 + p.delta * t + log_h,
    }
}

/// Drift of `ln Z` under the stopping measure.
#[inline]
pub fn q_log_z_drift(p: &ModelParams, beta: f64) -> f64 {
    let th = beta / p.sigma;
    p.delta - p.r + 0.5 * th * th
}

/// Drift of the factor under the stopping measure.
#[inline]
pub fn q_beta_drift(p: &ModelParams, beta: f64) -> f64 {
    p.kappa * (p.beta_bar - beta) + beta * p.sigma_beta / p.sigma
}

/// One shared-increment Euler step of `(ln Z, beta)` under the stopping measure.
#[inline]
pub fn step_q(s: &QStateSample, p: &ModelParams, dt: f64, dw: f64) -> QStateSample {
    let b = s.beta_hat;
    let log_z = s.z_hat.ln() + q_log_z_drift(p, b) * dt - b / p.sigma * dw;
    QStateSample {
        t: s.t + dt,
        z_hat: log_z.exp(),
        beta_hat: b + q_beta_drift(p, b) * dt - p.sigma_beta * dw,
    }
}

/// Log-space variant of [`step_q`] used in hot loops: returns `(ln z, beta)`.
#[inline]
pub fn step_q_log(p: &ModelParams, log_z: f64, beta: f64, dt: f64, dw: f64) -> (f64, f64) {
    (
        log_z + q_log_z_drift(p, beta) * dt - beta / p.sigma * dw,
        beta + q_beta_drift(p, beta) * dt - p.sigma_beta * dw,
    )
}

/// Exact mean and standard deviation of the factor at time `t` (`t = inf`
/// gives the stationary law).
pub fn ou_exact_moments(p: &ModelParams, measure: Measure, beta0: f64, t: f64) -> Result<(f64, f64)> {
    let (rate, level) = match measure {
        Measure::P => (p.kappa, p.beta_bar),
        Measure::Q => {
            let a = p.a();
            (a, if a != 0.0 { p.b() } else { f64::NAN })
        }
    };
    if t == 0.0 {
        return Ok((beta0, 0.0));
    }
    if t.is_infinite() {
        if rate <= 0.0 {
            return Err(Error::Domain(format!(
                "no stationary law for reversion rate {rate}"
            )));
        }
        return Ok((level, p.sigma_beta / (2.0 * rate).sqrt()));
    }
    if rate.abs() < 1e-14 {
        // Brownian motion with drift kappa*beta_bar (Q) or pure noise.
        let drift = match measure {
            Measure::P => 0.0,
            Measure::Q => p.kappa * p.beta_bar,
        };
        return Ok((beta0 + drift * t, p.sigma_beta * t.sqrt()));
    }
    let e = (-rate * t).exp();
    let mean = level + (beta0 - level) * e;
    let var = p.sigma_beta * p.sigma_beta * (1.0 - e * e) / (2.0 * rate);
    Ok((mean, var.sqrt()))
}
