//! Optimal controlled paths under the physical measure.
//!
//! The dual state starts at `zhat` with `v(zhat, beta0) = -x0`. It is then
//! driven by the uncontrolled process `Z1`. The nonincreasing control
//! `D* = min(D*_prev, z*(beta)/Z1, 1)` keeps `Z* = Z1 D*` below the free
//! boundary. Wealth, consumption and the risky position are read off the
//! dual surface at `(Z*, beta)`; wealth is never integrated, except as an
//! optional diagnostic.

use crate::dual::DualValue;
use crate::dynamics::{step_p, PStateSample, PathNoise, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::policy::investment_at;
use crate::stats::{mean_se, quantile_sorted};

/// Relative decrease of `D*` above which a step counts as a reflection.
pub const REFLECTION_THRESHOLD: f64 = 1e-12;

/// `-zeta(1/2)/sqrt(2 pi)`: expected gap between the continuous and the
/// step-sampled running maximum of a Brownian motion, per `sigma sqrt(dt)`.
pub const MONITORING_SHIFT: f64 = 0.5826;

/// `min(d_prev, z_star_now / z1_now, 1)`.
#[inline]
pub fn singular_control_update(d_prev: f64, z_star_now: f64, z1_now: f64) -> f64 {
    d_prev.min(z_star_now / z1_now).min(1.0)
}

/// Time stepping for optimal paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    /// Brownian draws per step (see [`PathNoise::with_substeps`]).
    pub substeps: usize,
    /// Also integrate the wealth equation with Euler steps, as a check on
    /// the wealth read off the surface.
    pub integrate_wealth: bool,
    /// Reflect at `z* exp(-0.5826 s sqrt(dt))`, with `s` the local volatility
    /// of `ln Z1 - ln z*(beta)`, so that the step-sampled control tracks the
    /// continuously monitored one to first order.
    pub monitoring_correction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            dt: DEFAULT_DT,
            seed: 0,
            substeps: 1,
            integrate_wealth: false,
            monitoring_correction: true,
        }
    }
}

impl SimConfig {
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) || self.substeps == 0 {
            return Err(Error::Domain(format!(
                "invalid simulation settings: dt = {}, horizon = {}",
                self.dt, self.horizon
            )));
        }
        Ok(())
    }
}

/// Boundary used by the step-sampled control at factor level `beta`.
pub fn effective_boundary<D: DualValue + ?Sized>(dual: &D, beta: f64, cfg: &SimConfig) -> f64 {
    let z_star = dual.z_star(beta);
    if !cfg.monitoring_correction {
        return z_star;
    }
    let p = dual.params();
    let h = 1e-3;
    let slope = if p.sigma_beta > 0.0 {
        (dual.z_star(beta + h).ln() - dual.z_star(beta - h).ln()) / (2.0 * h)
    } else {
        0.0
    };
    // d(ln Z1 - ln z*) has dW-loading -beta/sigma + sigma_beta * slope
    let vol = (-beta / p.sigma + p.sigma_beta * slope).abs();
    z_star * (-MONITORING_SHIFT * vol * cfg.dt.sqrt()).exp()
}

/// State after a step of the optimal system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    pub step: usize,
    pub t: f64,
    pub beta: f64,
    pub log_h: f64,
    pub log_z1: f64,
    pub d_star: f64,
    pub z_ctrl: f64,
    /// Free boundary at the current factor level (before any monitoring shift).
    pub z_star: f64,
    /// Wealth read off the surface, `-v(Z*, beta)`.
    pub x_star: f64,
    /// Euler-integrated wealth (NaN unless requested).
    pub x_integrated: f64,
    pub reflected: bool,
}

/// Step one optimal path and hand every state (including `t = 0`) to `visit`.
/// Returns the initial dual state `zhat`.
pub fn for_each_step<D, F>(x0: f64, beta0: f64, dual: &D, cfg: &SimConfig, stream: u64, mut visit: F) -> Result<f64>
where
    D: DualValue + ?Sized,
    F: FnMut(&StepState),
{
    cfg.check()?;
    let p = *dual.params();
    let z0 = dual.invert_marginal(x0, beta0)?;
    let mut noise = PathNoise::with_substeps(cfg.seed, stream, cfg.dt, cfg.substeps);
    let mut ps = PStateSample::initial(z0, beta0);
    let z_star0 = dual.z_star(beta0);
    let d0 = singular_control_update(1.0, effective_boundary(dual, beta0, cfg), z0);
    let mut s = StepState {
        step: 0,
        t: 0.0,
        beta: beta0,
        log_h: 0.0,
        log_z1: z0.ln(),
        d_star: d0,
        z_ctrl: z0 * d0,
        z_star: z_star0,
        x_star: if d0 < 1.0 { -dual.v(z0 * d0, beta0) } else { x0 },
        x_integrated: if cfg.integrate_wealth { x0 } else { f64::NAN },
        reflected: d0 < 1.0 - REFLECTION_THRESHOLD,
    };
    visit(&s);
    let limit = dual.z_limit();
    for k in 1..=cfg.n_steps() {
        let dw = noise.next_dw();
        if cfg.integrate_wealth {
            let c = s.z_ctrl.powf(-1.0 / p.gamma);
            let pi = investment_at(s.z_ctrl, s.beta, dual);
            s.x_integrated += (p.r * s.x_integrated + pi * s.beta - c + p.ell) * cfg.dt + pi * p.sigma * dw;
        }
        ps = step_p(&ps, &p, cfg.dt, dw);
        let z1 = ps.log_z1.exp();
        let z_star = dual.z_star(ps.beta);
        let d = singular_control_update(s.d_star, effective_boundary(dual, ps.beta, cfg), z1);
        let z_ctrl = z1 * d;
        if !(z_ctrl <= limit) || !z_ctrl.is_finite() || !(z_ctrl > 0.0) {
            return Err(Error::Domain(format!(
                "dual state {z_ctrl} left the surface (limit {limit}) at t = {}",
                ps.t
            )));
        }
        s = StepState {
            step: k,
            t: ps.t,
            beta: ps.beta,
            log_h: ps.log_h,
            log_z1: ps.log_z1,
            reflected: d < s.d_star * (1.0 - REFLECTION_THRESHOLD),
            d_star: d,
            z_ctrl,
            z_star,
            x_star: -dual.v(z_ctrl, ps.beta),
            x_integrated: s.x_integrated,
        };
        visit(&s);
    }
    Ok(z0)
}

/// Full record of one optimal path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub z_hat: f64,
    pub t: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_z1: Vec<f64>,
    pub d_star: Vec<f64>,
    pub z_ctrl: Vec<f64>,
    pub z_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub x_integrated: Vec<f64>,
    pub c_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    /// Discount factor `H_t`.
    pub h: Vec<f64>,
    pub reflect: Vec<bool>,
}

impl PathRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV rows `t, beta, z1, d_star, z_ctrl, x_star, c_star, pi_star, reflect_flag`.
    pub fn csv_rows(&self) -> Vec<[f64; 9]> {
        (0..self.len())
            .map(|k| {
                [
                    self.t[k],
                    self.beta[k],
                    self.log_z1[k].exp(),
                    self.d_star[k],
                    self.z_ctrl[k],
                    self.x_star[k],
                    self.c_star[k],
                    self.pi_star[k],
                    if self.reflect[k] { 1.0 } else { 0.0 },
                ]
            })
            .collect()
    }
}

/// Simulate and record one optimal path on stream `stream` of `cfg.seed`.
pub fn simulate_optimal_path<D: DualValue + ?Sized>(
    x0: f64,
    beta0: f64,
    dual: &D,
    cfg: &SimConfig,
    stream: u64,
) -> Result<PathRecord> {
    let n = cfg.n_steps() + 1;
    let mut rec = PathRecord {
        z_hat: 0.0,
        t: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        log_z1: Vec::with_capacity(n),
        d_star: Vec::with_capacity(n),
        z_ctrl: Vec::with_capacity(n),
        z_star: Vec::with_capacity(n),
        x_star: Vec::with_capacity(n),
        x_integrated: Vec::with_capacity(n),
        c_star: Vec::with_capacity(n),
        pi_star: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        reflect: Vec::with_capacity(n),
    };
    let inv_g = 1.0 / dual.params().gamma;
    rec.z_hat = for_each_step(x0, beta0, dual, cfg, stream, |s| {
        rec.t.push(s.t);
        rec.beta.push(s.beta);
        rec.log_z1.push(s.log_z1);
        rec.d_star.push(s.d_star);
        rec.z_ctrl.push(s.z_ctrl);
        rec.z_star.push(s.z_star);
        rec.x_star.push(s.x_star);
        rec.x_integrated.push(s.x_integrated);
        rec.c_star.push(s.z_ctrl.powf(-inv_g));
        rec.pi_star.push(investment_at(s.z_ctrl, s.beta, dual));
        rec.h.push(s.log_h.exp());
        rec.reflect.push(s.reflected);
    })?;
    Ok(rec)
}

/// What a single ensemble path reports.
#[derive(Debug, Clone, PartialEq)]
struct PathSummary {
    /// Wealth at the recorded times.
    x: Vec<f64>,
    min_x: f64,
    min_x_integrated: f64,
    reflections: usize,
    /// Reflections with `Z*` within one cell of `z*` and `X*` within `eps`.
    colocated: usize,
    /// Largest `Z* / z*(beta)` along the path.
    max_ratio: f64,
    /// Largest wealth at a reflection.
    max_x_reflect: f64,
    /// Largest wealth tolerance over the reflections.
    epsilon: f64,
}

/// Tolerance for classifying reflection events, evaluated at the factor
/// level where each event happens.
///
/// An event at `beta` is co-located when `Z*` lies within one `z` cell plus
/// the monitoring shift of `z*(beta)`, and `X*` is at most the wealth the
/// dual assigns at that distance inside the boundary. Both shrink with the
/// cell width and with `sqrt(dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColocationTolerance {
    /// Log width of one `z` cell.
    pub log_cell: f64,
}

impl ColocationTolerance {
    /// One cell of the solved grid.
    pub fn for_surface(dual: &crate::dual::DualSurface) -> Self {
        Self {
            log_cell: dual.surface.layout.dy,
        }
    }

    /// `(z_rel, x_abs)` at factor level `beta`.
    pub fn at<D: DualValue + ?Sized>(&self, dual: &D, beta: f64, cfg: &SimConfig) -> (f64, f64) {
        let z_star = dual.z_star(beta);
        let gap = self.log_cell + (z_star / effective_boundary(dual, beta, cfg)).ln();
        (gap.exp_m1(), -dual.v(z_star * (-gap).exp(), beta))
    }
}

/// Initial state and sampling of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub x0: f64,
    pub beta0: f64,
    pub n_paths: usize,
    /// Record wealth every this many steps (the final step is always recorded).
    pub record_every: usize,
    pub tolerance: ColocationTolerance,
}

/// Ensemble statistics on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub se_x: Vec<f64>,
    pub sd_x: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    pub n_paths: usize,
    pub failed: usize,
    pub seed: u64,
    pub dt: f64,
    pub min_x: f64,
    /// NaN unless wealth integration was requested.
    pub min_x_integrated: f64,
    pub reflections: usize,
    pub colocated: usize,
    pub max_ratio: f64,
    /// Largest `|X*|` at a reflection event.
    pub max_x_reflect: f64,
    /// Largest co-location wealth tolerance over the reflection events.
    pub epsilon: f64,
    /// Terminal wealth per successful path, in path order.
    pub terminal: Vec<f64>,
    /// Recorded wealth per successful path.
    per_path: Vec<Vec<f64>>,
}

impl EnsembleStats {
    /// CSV rows `t, mean_x, se_x, q05, q50, q95`.
    pub fn csv_rows(&self) -> Vec<[f64; 6]> {
        (0..self.times.len())
            .map(|k| [self.times[k], self.mean_x[k], self.se_x[k], self.q05[k], self.q50[k], self.q95[k]])
            .collect()
    }

    /// Recorded wealth of successful path `i`.
    pub fn path(&self, i: usize) -> &[f64] {
        &self.per_path[i]
    }
}

/// Simulate `spec.n_paths` optimal paths (stream `i` for path `i`). Fails if more than 0.1% of the paths
/// fail.
pub fn run_ensemble<D: DualValue + ?Sized>(dual: &D, cfg: &SimConfig, spec: &EnsembleSpec) -> Result<EnsembleStats> {
    cfg.check()?;
    let (x0, beta0, n_paths, tol) = (spec.x0, spec.beta0, spec.n_paths, spec.tolerance);
    if n_paths == 0 {
        return Err(Error::Domain("ensemble needs at least one path".into()));
    }
    let every = spec.record_every.max(1);
    let n_steps = cfg.n_steps();
    let results = map_indexed(n_paths, |i| {
        let mut sum = PathSummary {
            x: Vec::with_capacity(n_steps / every + 2),
            min_x: f64::INFINITY,
            min_x_integrated: f64::INFINITY,
            reflections: 0,
            colocated: 0,
            max_ratio: 0.0,
            max_x_reflect: 0.0,
            epsilon: 0.0,
        };
        for_each_step(x0, beta0, dual, cfg, i as u64, |s| {
            if s.step % every == 0 || s.step == n_steps {
                sum.x.push(s.x_star);
            }
            sum.min_x = sum.min_x.min(s.x_star);
            sum.min_x_integrated = sum.min_x_integrated.min(s.x_integrated);
            sum.max_ratio = sum.max_ratio.max(s.z_ctrl / s.z_star);
            if s.reflected {
                sum.reflections += 1;
                sum.max_x_reflect = sum.max_x_reflect.max(s.x_star.abs());
                let (z_rel, x_abs) = tol.at(dual, s.beta, cfg);
                sum.epsilon = sum.epsilon.max(x_abs);
                if (s.z_ctrl / s.z_star - 1.0).abs() <= z_rel && s.x_star.abs() <= x_abs {
                    sum.colocated += 1;
                }
            }
        })
        .map(|_| sum)
    });
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed as f64 > 1e-3 * n_paths as f64 {
        let first = results.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Ensemble {
            failed,
            total: n_paths,
            first,
        });
    }
    let ok: Vec<PathSummary> = results.into_iter().filter_map(|r| r.ok()).collect();
    Ok(summarize(ok, failed, cfg, every))
}

fn summarize(ok: Vec<PathSummary>, failed: usize, cfg: &SimConfig, every: usize) -> EnsembleStats {
    let n_steps = cfg.n_steps();
    let mut times: Vec<f64> = (0..=n_steps).filter(|k| k % every == 0 || *k == n_steps).map(|k| k as f64 * cfg.dt).collect();
    times.dedup();
    let m = times.len();
    let mut st = EnsembleStats {
        times,
        mean_x: Vec::with_capacity(m),
        se_x: Vec::with_capacity(m),
        sd_x: Vec::with_capacity(m),
        q05: Vec::with_capacity(m),
        q50: Vec::with_capacity(m),
        q95: Vec::with_capacity(m),
        n_paths: ok.len(),
        failed,
        seed: cfg.seed,
        dt: cfg.dt,
        min_x: ok.iter().map(|s| s.min_x).fold(f64::INFINITY, f64::min),
        min_x_integrated: if cfg.integrate_wealth {
            ok.iter().map(|s| s.min_x_integrated).fold(f64::INFINITY, f64::min)
        } else {
            f64::NAN
        },
        reflections: ok.iter().map(|s| s.reflections).sum(),
        colocated: ok.iter().map(|s| s.colocated).sum(),
        max_ratio: ok.iter().map(|s| s.max_ratio).fold(0.0, f64::max),
        max_x_reflect: ok.iter().map(|s| s.max_x_reflect).fold(0.0, f64::max),
        epsilon: ok.iter().map(|s| s.epsilon).fold(0.0, f64::max),
        terminal: ok.iter().map(|s| *s.x.last().unwrap_or(&f64::NAN)).collect(),
        per_path: Vec::new(),
    };
    let mut col = vec![0.0; ok.len()];
    for k in 0..m {
        for (c, s) in col.iter_mut().zip(&ok) {
            *c = s.x[k];
        }
        let (mean, se) = mean_se(&col);
        st.mean_x.push(mean);
        st.se_x.push(se);
        st.sd_x.push(se * (col.len() as f64).sqrt());
        col.sort_by(f64::total_cmp);
        st.q05.push(quantile_sorted(&col, 0.05));
        st.q50.push(quantile_sorted(&col, 0.5));
        st.q95.push(quantile_sorted(&col, 0.95));
    }
    st.per_path = ok.into_iter().map(|s| s.x).collect();
    st
}

/// State feedback `x -> (c, pi)` of an agent who holds the factor at a
/// fixed belief, tabulated on a log-spaced wealth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    pub belief_beta: f64,
    log_x0: f64,
    dlog: f64,
    c: Vec<f64>,
    pi: Vec<f64>,
    /// Consumption at zero wealth, `z*^(-1/gamma)`.
    c_zero: f64,
}

impl FeedbackPolicy {
    /// Tabulate on `n` nodes from `x_min` to `x_max`.
    pub fn new<D: DualValue + ?Sized>(dual: &D, belief_beta: f64, x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min > 0.0) || !(x_max > x_min) || n < 2 {
            return Err(Error::Domain("feedback table needs 0 < x_min < x_max and n >= 2".into()));
        }
        let (l0, l1) = (x_min.ln(), x_max.ln());
        let dlog = (l1 - l0) / (n - 1) as f64;
        let inv_g = 1.0 / dual.params().gamma;
        let cells = map_indexed(n, |i| {
            let x = (l0 + i as f64 * dlog).exp();
            dual.invert_marginal(x, belief_beta)
                .map(|z| (z.powf(-inv_g), investment_at(z, belief_beta, dual)))
        });
        let mut c = Vec::with_capacity(n);
        let mut pi = Vec::with_capacity(n);
        for cell in cells {
            let (a, b) = cell?;
            c.push(a);
            pi.push(b);
        }
        Ok(Self {
            belief_beta,
            log_x0: l0,
            dlog,
            c,
            pi,
            c_zero: dual.z_star(belief_beta).powf(-inv_g),
        })
    }

    /// `(c, pi)` at wealth `x`: linear towards `(c_zero, 0)` below the
    /// table, clamped above it, linear in `ln x` inside.
    pub fn at(&self, x: f64) -> (f64, f64) {
        let x0 = self.log_x0.exp();
        if x <= x0 {
            let w = (x / x0).max(0.0);
            return (self.c_zero + w * (self.c[0] - self.c_zero), w * self.pi[0]);
        }
        let s = (x.ln() - self.log_x0) / self.dlog;
        let n = self.c.len();
        if s >= (n - 1) as f64 {
            return (self.c[n - 1], self.pi[n - 1]);
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        (
            self.c[i] + w * (self.c[i + 1] - self.c[i]),
            self.pi[i] + w * (self.pi[i + 1] - self.pi[i]),
        )
    }
}

/// Ensemble of an agent following `policy` in the market described by
/// `world`. Wealth is Euler-integrated and held at zero when a step would
/// take it below (a reflection).
pub fn run_feedback_ensemble(
    policy: &FeedbackPolicy,
    world: &crate::model::ModelParams,
    cfg: &SimConfig,
    spec: &EnsembleSpec,
) -> Result<EnsembleStats> {
    cfg.check()?;
    if spec.n_paths == 0 {
        return Err(Error::Domain("ensemble needs at least one path".into()));
    }
    let every = spec.record_every.max(1);
    let n_steps = cfg.n_steps();
    let p = *world;
    let paths = map_indexed(spec.n_paths, |i| {
        let mut noise = PathNoise::with_substeps(cfg.seed, i as u64, cfg.dt, cfg.substeps);
        let mut st = PStateSample::initial(1.0, spec.beta0);
        let mut x = spec.x0;
        let mut sum = PathSummary {
            x: vec![x],
            min_x: x,
            min_x_integrated: f64::NAN,
            reflections: 0,
            colocated: 0,
            max_ratio: f64::NAN,
            max_x_reflect: 0.0,
            epsilon: 0.0,
        };
        for k in 1..=n_steps {
            let dw = noise.next_dw();
            let (c, pi) = policy.at(x);
            x += (p.r * x + st.beta * pi - c + p.ell) * cfg.dt + p.sigma * pi * dw;
            if x < 0.0 {
                x = 0.0;
                sum.reflections += 1;
            }
            st = step_p(&st, &p, cfg.dt, dw);
            if k % every == 0 || k == n_steps {
                sum.x.push(x);
            }
            sum.min_x = sum.min_x.min(x);
        }
        sum
    });
    let cfg = SimConfig {
        integrate_wealth: false,
        ..*cfg
    };
    Ok(summarize(paths, 0, &cfg, every))
}

/// Where the constant-factor agent trades.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentWorld {
    /// Each agent lives in the market its own model describes.
    Own,
    /// Both agents trade in the stochastic-factor market. The constant agent
    /// follows its own feedback policy, and its wealth is integrated.
    Shared,
}

impl std::str::FromStr for AgentWorld {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "own" => Ok(Self::Own),
            "shared" => Ok(Self::Shared),
            _ => Err(Error::Config(format!("unknown comparison world '{s}' (own|shared)"))),
        }
    }
}

impl std::fmt::Display for AgentWorld {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Own => "own",
            Self::Shared => "shared",
        })
    }
}

/// Two agents driven by the same Brownian paths.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentComparison {
    pub stochastic: EnsembleStats,
    pub constant: EnsembleStats,
    /// Mean of the pathwise wealth difference (stochastic minus constant).
    pub mean_diff: Vec<f64>,
    pub se_diff: Vec<f64>,
}

impl AgentComparison {
    pub fn times(&self) -> &[f64] {
        &self.stochastic.times
    }

    /// Mean wealth gap relative to the constant agent's mean wealth at time index `k`.
    pub fn relative_gap(&self, k: usize) -> f64 {
        self.mean_diff[k] / self.constant.mean_x[k]
    }

    /// CSV rows `t, mean_x_stochastic, se_stochastic, mean_x_constant, se_constant, mean_diff, se_diff`.
    pub fn csv_rows(&self) -> Vec<[f64; 7]> {
        (0..self.mean_diff.len())
            .map(|k| {
                [
                    self.stochastic.times[k],
                    self.stochastic.mean_x[k],
                    self.stochastic.se_x[k],
                    self.constant.mean_x[k],
                    self.constant.se_x[k],
                    self.mean_diff[k],
                    self.se_diff[k],
                ]
            })
            .collect()
    }
}

/// Run both agents from the same initial state on identical noise.
pub fn compare_agents<A, B>(
    stochastic: &A,
    constant: &B,
    cfg: &SimConfig,
    spec: &EnsembleSpec,
    world: AgentWorld,
) -> Result<AgentComparison>
where
    A: DualValue + ?Sized,
    B: DualValue + ?Sized,
{
    let s = run_ensemble(stochastic, cfg, spec)?;
    let c = match world {
        AgentWorld::Own => run_ensemble(constant, cfg, spec)?,
        AgentWorld::Shared => {
            let policy = FeedbackPolicy::new(constant, spec.beta0, 1e-6 * spec.x0, 1e4 * spec.x0.max(1.0), 4000)?;
            run_feedback_ensemble(&policy, stochastic.params(), cfg, spec)?
        }
    };
    if s.failed > 0 || c.failed > 0 {
        return Err(Error::Ensemble {
            failed: s.failed + c.failed,
            total: 2 * spec.n_paths,
            first: "paired comparison needs every path of both agents".into(),
        });
    }
    let mut mean_diff = Vec::with_capacity(s.times.len());
    let mut se_diff = Vec::with_capacity(s.times.len());
    for k in 0..s.times.len() {
        let d: Vec<f64> = (0..s.n_paths).map(|i| s.per_path[i][k] - c.per_path[i][k]).collect();
        let (m, se) = mean_se(&d);
        mean_diff.push(m);
        se_diff.push(se);
    }
    Ok(AgentComparison {
        stochastic: s,
        constant: c,
        mean_diff,
        se_diff,
    })
}
