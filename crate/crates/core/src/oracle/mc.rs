//! Monte Carlo estimators under the stopping measure.
//!
//! The stopping value and its gradient are estimated from the same
//! paths. Each path runs until the first step where `Zhat >= z*(betahat)`,
//! or until the horizon. Integrals use left-point quadrature. Paths still
//! running at the horizon contribute a tail bound instead of a value.

use crate::dynamics::{step_q_log, PathNoise, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::parallel::map_indexed;
use crate::simulate::MONITORING_SHIFT;
use crate::stats::mean_se;

/// Simulation settings shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Brownian draws per step; a value of `k` uses the same paths as a run
    /// with `dt / k` and `substeps = 1`.
    pub substeps: usize,
    /// Stop at the boundary shifted by the expected overshoot of step
    /// sampling (see [`crate::simulate::MONITORING_SHIFT`]).
    pub monitoring_correction: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt: DEFAULT_DT,
            horizon: 200.0,
            seed: 0,
            substeps: 1,
            monitoring_correction: true,
        }
    }
}

impl McConfig {
    /// The same Brownian paths sampled at twice the step.
    pub fn coarsened(&self) -> Self {
        Self {
            dt: 2.0 * self.dt,
            substeps: 2 * self.substeps,
            ..*self
        }
    }

    fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn check(&self) -> Result<()> {
        if self.n_paths == 0 || !(self.dt > 0.0) || !(self.horizon >= 0.0) {
            return Err(Error::Domain(format!(
                "invalid Monte Carlo settings: n = {}, dt = {}, horizon = {}",
                self.n_paths, self.dt, self.horizon
            )));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Bound on `|E[contribution after the horizon]|`.
    pub tail_bound: f64,
    /// Paths still running at the horizon.
    pub unstopped: usize,
    /// More than 0.1% of paths unstopped and a tail bound above the s.e.
    pub flagged: bool,
}

impl McEstimate {
    fn from_samples(xs: &[f64], tail: f64, unstopped: usize, cfg: &McConfig) -> Self {
        let (value, se) = mean_se(xs);
        let flagged = unstopped as f64 > 1e-3 * xs.len() as f64 && tail > se;
        Self {
            value,
            se,
            n_paths: xs.len(),
            dt: cfg.dt,
            horizon: cfg.horizon,
            seed: cfg.seed,
            tail_bound: tail,
            unstopped,
            flagged,
        }
    }

    /// `|value - target| <= k se + slack`.
    pub fn agrees(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.se + slack
    }
}

/// Stopping value and both partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate {
    pub v: McEstimate,
    pub v_z: McEstimate,
    pub v_beta: McEstimate,
}

#[derive(Default, Clone, Copy)]
struct PathSample {
    v: f64,
    v_z: f64,
    v_beta: f64,
    tail_v: f64,
    tail_z: f64,
    tail_beta: f64,
    unstopped: bool,
}

/// Stopping level at factor `beta`, shifted inwards by
/// `0.5826 s sqrt(dt)` in logs when requested, with `s` the volatility of
/// `ln Zhat - ln z*(betahat)`.
fn stopping_level<B>(p: &ModelParams, boundary: &B, beta: f64, cfg: &McConfig) -> f64
where
    B: Fn(f64) -> f64 + Sync,
{
    let z = boundary(beta);
    if !cfg.monitoring_correction {
        return z;
    }
    let h = 1e-3;
    let slope = if p.sigma_beta > 0.0 {
        (boundary(beta + h).ln() - boundary(beta - h).ln()) / (2.0 * h)
    } else {
        0.0
    };
    let vol = (-beta / p.sigma + p.sigma_beta * slope).abs();
    z * (-MONITORING_SHIFT * vol * cfg.dt.sqrt()).exp()
}

fn stopped_path<B>(p: &ModelParams, z: f64, beta: f64, boundary: &B, cfg: &McConfig, path: usize) -> PathSample
where
    B: Fn(f64) -> f64 + Sync,
{
    let mut out = PathSample::default();
    if z >= boundary(beta) {
        return out;
    }
    let inv_g = 1.0 / p.gamma;
    let a = p.a();
    let s2 = p.sigma * p.sigma;
    let dt = cfg.dt;
    let mut noise = PathNoise::with_substeps(cfg.seed, path as u64, dt, cfg.substeps);
    let (mut log_z, mut b) = (z.ln(), beta);
    // kernel = int e^{-as} beta/sigma^2 ds - (1/sigma) int e^{-as} dW
    let mut kernel = 0.0;
    let mut t = 0.0;
    for _ in 0..cfg.n_steps() {
        let disc = (-p.r * t).exp();
        let zg = (-inv_g * log_z).exp();
        out.v += disc * (p.ell - zg) * dt;
        let dz = disc * inv_g * zg * dt;
        out.v_z += dz;
        out.v_beta += dz * kernel;
        let dw = noise.next_dw();
        let ea = (-a * t).exp();
        kernel += ea * (b / s2 * dt - dw / p.sigma);
        (log_z, b) = step_q_log(p, log_z, b, dt, dw);
        t += dt;
        if log_z.exp() >= stopping_level(p, boundary, b, cfg) {
            out.v_z /= z;
            return out;
        }
    }
    // Remaining value lies in [-e^{-rT} Zhat^{-1/gamma} / moment_rate, 0].
    let rest = (-p.r * t).exp() * (-inv_g * log_z).exp() / p.moment_rate();
    out.v_z /= z;
    out.unstopped = true;
    out.tail_v = rest;
    out.tail_z = inv_g * rest / z;
    // heuristic: the kernel frozen at its horizon value
    out.tail_beta = inv_g * rest * kernel.abs();
    out
}

/// Stopping value, `v_z` and `v_beta` at `(z, beta)` from one path set.
///
/// `v_z` uses the integrand `e^{-rt} (1/gamma) z^-1 Zhat^(-1/gamma)`. `v_beta`
/// weights the same integrand by the pathwise factor sensitivity
/// `int e^{-as} betahat/sigma^2 ds - (1/sigma) int e^{-as} dW`.
pub fn mc_gradient_estimate<B>(
    p: &ModelParams,
    z: f64,
    beta: f64,
    boundary: &B,
    cfg: &McConfig,
) -> Result<GradientEstimate>
where
    B: Fn(f64) -> f64 + Sync,
{
    cfg.check()?;
    if !(z > 0.0) {
        return Err(Error::Domain(format!("z must be positive, got {z}")));
    }
    let samples = map_indexed(cfg.n_paths, |i| stopped_path(p, z, beta, boundary, cfg, i));
    let n = samples.len() as f64;
    let unstopped = samples.iter().filter(|s| s.unstopped).count();
    let col = |f: fn(&PathSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let tail = |f: fn(&PathSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    Ok(GradientEstimate {
        v: McEstimate::from_samples(&col(|s| s.v), tail(|s| s.tail_v), unstopped, cfg),
        v_z: McEstimate::from_samples(&col(|s| s.v_z), tail(|s| s.tail_z), unstopped, cfg),
        v_beta: McEstimate::from_samples(&col(|s| s.v_beta), tail(|s| s.tail_beta), unstopped, cfg),
    })
}

/// Stopping value `E[int_0^tau e^{-rt} (ell - Zhat^(-1/gamma)) dt]`.
pub fn mc_value_estimate<B>(p: &ModelParams, z: f64, beta: f64, boundary: &B, cfg: &McConfig) -> Result<McEstimate>
where
    B: Fn(f64) -> f64 + Sync,
{
    Ok(mc_gradient_estimate(p, z, beta, boundary, cfg)?.v)
}

/// Derivative of the stopping value in `z`.
pub fn mc_vz_estimate<B>(p: &ModelParams, z: f64, beta: f64, boundary: &B, cfg: &McConfig) -> Result<McEstimate>
where
    B: Fn(f64) -> f64 + Sync,
{
    Ok(mc_gradient_estimate(p, z, beta, boundary, cfg)?.v_z)
}

/// Derivative of the stopping value in `beta`.
pub fn mc_vbeta_estimate<B>(p: &ModelParams, z: f64, beta: f64, boundary: &B, cfg: &McConfig) -> Result<McEstimate>
where
    B: Fn(f64) -> f64 + Sync,
{
    if !(p.a() > 0.0) {
        return Err(Error::Domain(format!("factor sensitivity needs a > 0, got {}", p.a())));
    }
    Ok(mc_gradient_estimate(p, z, beta, boundary, cfg)?.v_beta)
}

/// Never-stop coefficient `h(beta) = E[int e^{-rt} (Zhat_t / z)^(-1/gamma) dt]`.
/// It does not depend on `z`.
pub fn mc_tail_coefficient(p: &ModelParams, beta: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check()?;
    let inv_g = 1.0 / p.gamma;
    let samples = map_indexed(cfg.n_paths, |i| {
        let mut noise = PathNoise::with_substeps(cfg.seed, i as u64, cfg.dt, cfg.substeps);
        let (mut log_z, mut b) = (0.0, beta);
        let mut acc = 0.0;
        let mut t = 0.0;
        for _ in 0..cfg.n_steps() {
            acc += (-p.r * t - inv_g * log_z).exp() * cfg.dt;
            (log_z, b) = step_q_log(p, log_z, b, cfg.dt, noise.next_dw());
            t += cfg.dt;
        }
        (acc, (-p.r * t - inv_g * log_z).exp() / p.moment_rate())
    });
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let tail = samples.iter().map(|s| s.1).sum::<f64>() / xs.len() as f64;
    Ok(McEstimate::from_samples(&xs, tail, cfg.n_paths, cfg))
}

/// One row of a moment-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Sample mean of `Zhat_t^(-1/gamma)` against `z^(-1/gamma) e^{-(delta-r) t/gamma}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub z: f64,
    pub beta: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Check the decay bound on `E[Zhat_t^(-1/gamma)]` at each time in `t_list`
/// (the bound must hold within 3 s.e.).
pub fn check_moment_bound(
    p: &ModelParams,
    z: f64,
    beta: f64,
    t_list: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<MomentReport> {
    if !(z > 0.0) || n_paths == 0 || !(dt > 0.0) {
        return Err(Error::Domain("moment check needs z > 0, n > 0, dt > 0".into()));
    }
    if t_list.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Domain("check times must be nonnegative".into()));
    }
    let steps: Vec<usize> = t_list.iter().map(|t| (t / dt).round() as usize).collect();
    let last = steps.iter().copied().max().unwrap_or(0);
    let inv_g = 1.0 / p.gamma;
    let samples = map_indexed(n_paths, |i| {
        let mut noise = PathNoise::new(seed, i as u64, dt);
        let mut at = vec![0.0; steps.len()];
        let (mut log_z, mut b) = (z.ln(), beta);
        for k in 0..=last {
            for (slot, &s) in at.iter_mut().zip(&steps) {
                if s == k {
                    *slot = (-inv_g * log_z).exp();
                }
            }
            if k < last {
                (log_z, b) = step_q_log(p, log_z, b, dt, noise.next_dw());
            }
        }
        at
    });
    let rows = t_list
        .iter()
        .enumerate()
        .map(|(m, &t)| {
            let xs: Vec<f64> = samples.iter().map(|s| s[m]).collect();
            let (mean, se) = mean_se(&xs);
            let bound = z.powf(-inv_g) * (-(p.delta - p.r) * t * inv_g).exp();
            MomentRow {
                t,
                mean,
                se,
                bound,
                pass: mean <= bound + 3.0 * se + 1e-12 * bound,
            }
        })
        .collect();
    Ok(MomentReport {
        z,
        beta,
        n_paths,
        dt,
        seed,
        rows,
    })
}
