//! Run configuration: a flat `key = value` file with the sections `[model]`,
//! `[grid]`, `[solver]`, `[sim]` and `[output]`.
//!
//! Every model field must be given. The other sections are optional key by
//! key; each default that gets filled in is recorded in
//! [`RunConfig::defaults`] so callers can echo it. Unknown sections, unknown
//! keys, duplicate keys and values of the wrong type are errors.
//!
//! [`RunConfig::to_ini`] writes the fully resolved configuration back in the
//! same format, and [`RunConfig::hash`] is the SHA-256 of that text. Parsing
//! the output of `to_ini` gives back the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dynamics::DEFAULT_DT;
use crate::error::{Error, Result};
use crate::model::{ModelParams, ValidationMode};
use crate::simulate::AgentWorld;
use crate::vi::{CoordMode, GridSpec, Method, SolverOptions};

const SECTIONS: [&str; 5] = ["model", "grid", "solver", "sim", "output"];

/// Simulation and Monte Carlo settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    /// Horizon of path plots and agent comparisons.
    pub horizon: f64,
    /// Truncation horizon of the infinite-horizon duality and budget checks.
    pub duality_horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub x0: f64,
    pub beta0: f64,
    /// Keep every `record_every`-th step in ensemble statistics.
    pub record_every: usize,
    pub integrate_wealth: bool,
    pub monitoring_correction: bool,
    pub world: AgentWorld,
}

/// Output location and the scenario scans used by `policy` and `figures`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub dir: String,
    pub scenario: String,
    pub policy_betas: Vec<f64>,
    pub policy_x_max: f64,
    pub policy_n_x: usize,
    pub labor_scan: Vec<f64>,
    pub gamma_scan: Vec<f64>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridSpec,
    pub solver: SolverOptions,
    pub sim: SimSettings,
    pub output: OutputSettings,
    /// `section.key = value` for every default that was filled in.
    pub defaults: Vec<String>,
}

/// One section of raw entries, consumed key by key.
struct Section {
    name: &'static str,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, kind: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!(
                    "line {line}: `{}.{key}` expects {kind}, got `{raw}`",
                    self.name
                ))
            }),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(Error::Config(format!("`{}.{key}` must be finite", self.name))),
            other => Ok(other),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((raw, line)) = self.take(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "line {line}: `{}.{key}` expects a comma-separated list of numbers, got `{raw}`",
                        self.name
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => Err(Error::Config(format!("line {line}: unknown key `{}.{key}`", self.name))),
        }
    }
}

/// Split the text into sections. Lines are `[section]`, `key = value`,
/// blank, or comments starting with `#` or `;`.
fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = SECTIONS
        .iter()
        .map(|&name| Section {
            name,
            entries: BTreeMap::new(),
        })
        .collect();
    let mut current: Option<usize> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {line_no}: malformed section header `{line}`")))?
                .trim();
            current = Some(
                SECTIONS
                    .iter()
                    .position(|&s| s == name)
                    .ok_or_else(|| Error::Config(format!("line {line_no}: unknown section `[{name}]`")))?,
            );
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`")))?;
        let s = current.ok_or_else(|| Error::Config(format!("line {line_no}: `{line}` appears before any section")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {line_no}: empty key")));
        }
        if sections[s].entries.insert(key.clone(), (value, line_no)).is_some() {
            return Err(Error::Config(format!(
                "line {line_no}: duplicate key `{}.{key}`",
                sections[s].name
            )));
        }
    }
    Ok(sections)
}

/// Fill `slot` from the section or record the default it keeps.
macro_rules! fill {
    ($sec:expr, $defaults:expr, $slot:expr, $getter:ident, $key:expr) => {
        match $sec.$getter($key)? {
            Some(v) => $slot = v,
            None => $defaults.push(format!("{}.{} = {}", $sec.name, $key, $slot)),
        }
    };
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Read and resolve a configuration file.
    pub fn load(path: &Path, mode: ValidationMode) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, mode)
    }

    /// Parse, fill defaults and validate.
    pub fn parse(text: &str, mode: ValidationMode) -> Result<Self> {
        let mut it = split_sections(text)?.into_iter();
        let (mut ms, mut gs, mut ss, mut sims, mut os) = (
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        );
        let mut defaults = Vec::new();

        let mut model = ModelParams::reference();
        for name in ModelParams::FIELD_NAMES {
            let v = ms
                .f64(name)?
                .ok_or_else(|| Error::Config(format!("missing required key `model.{name}`")))?;
            model.set_field(name, v)?;
        }
        ms.finish()?;
        let model = model.checked(mode)?;

        let mut grid = GridSpec::default_for(&model);
        fill!(gs, defaults, grid.z_min, f64, "z_min");
        fill!(gs, defaults, grid.z_max, f64, "z_max");
        fill!(gs, defaults, grid.n_z, parsed_usize, "n_z");
        fill!(gs, defaults, grid.beta_lo, f64, "beta_lo");
        fill!(gs, defaults, grid.beta_hi, f64, "beta_hi");
        fill!(gs, defaults, grid.n_beta, parsed_usize, "n_beta");
        fill!(gs, defaults, grid.mode, parsed_mode, "mode");
        gs.finish()?;
        grid.validate(&model)?;

        let mut solver = SolverOptions::default();
        let method: Option<String> = ss.parsed("method", "a method name")?;
        let omega = ss.f64("psor_omega")?;
        solver.method = match (method.as_deref(), omega) {
            (None, None) => {
                defaults.push(format!("solver.method = {}", solver.method));
                solver.method
            }
            (None, Some(_)) => return Err(Error::Config("`solver.psor_omega` requires `method = psor`".into())),
            (Some(m), omega) => match (m.parse::<Method>()?, omega) {
                (Method::Psor { .. }, Some(w)) if w > 0.0 && w < 2.0 => Method::Psor { omega: w },
                (Method::Psor { .. }, Some(w)) => {
                    return Err(Error::Config(format!("`solver.psor_omega` must lie in (0, 2), got {w}")))
                }
                (Method::Howard, Some(_)) => {
                    return Err(Error::Config("`solver.psor_omega` requires `method = psor`".into()))
                }
                (m, None) => m,
            },
        };
        match ss.take("tol") {
            None => defaults.push("solver.tol = auto".into()),
            Some((raw, _)) if raw == "auto" => {}
            Some((raw, line)) => match raw.parse::<f64>() {
                Ok(t) if t > 0.0 && t.is_finite() => solver.tol = Some(t),
                _ => {
                    return Err(Error::Config(format!(
                        "line {line}: `solver.tol` expects a positive number or `auto`, got `{raw}`"
                    )))
                }
            },
        }
        fill!(ss, defaults, solver.max_iter, parsed_usize, "max_iter");
        fill!(ss, defaults, solver.warm_start, parsed_bool, "warm_start");
        fill!(ss, defaults, solver.require_stopping, parsed_bool, "require_stopping");
        ss.finish()?;
        if solver.max_iter == 0 {
            return Err(Error::Config("`solver.max_iter` must be positive".into()));
        }

        let mut sim = SimSettings {
            dt: DEFAULT_DT,
            horizon: 30.0,
            duality_horizon: 200.0,
            n_paths: 1000,
            seed: 0,
            x0: 1.0,
            beta0: model.beta_bar,
            record_every: 25,
            integrate_wealth: false,
            monitoring_correction: true,
            world: AgentWorld::Shared,
        };
        fill!(sims, defaults, sim.dt, f64, "dt");
        fill!(sims, defaults, sim.horizon, f64, "horizon");
        fill!(sims, defaults, sim.duality_horizon, f64, "duality_horizon");
        fill!(sims, defaults, sim.n_paths, parsed_usize, "n_paths");
        fill!(sims, defaults, sim.seed, parsed_u64, "seed");
        fill!(sims, defaults, sim.x0, f64, "x0");
        fill!(sims, defaults, sim.beta0, f64, "beta0");
        fill!(sims, defaults, sim.record_every, parsed_usize, "record_every");
        fill!(sims, defaults, sim.integrate_wealth, parsed_bool, "integrate_wealth");
        fill!(sims, defaults, sim.monitoring_correction, parsed_bool, "monitoring_correction");
        fill!(sims, defaults, sim.world, parsed_world, "world");
        sims.finish()?;
        sim.check()?;

        let mut output = OutputSettings {
            dir: "out".into(),
            scenario: "reference".into(),
            policy_betas: vec![0.02, 0.05, 0.12],
            policy_x_max: 10.0,
            policy_n_x: 101,
            labor_scan: vec![0.2, 0.6, 1.0],
            gamma_scan: vec![1.2, 1.5, 2.0],
        };
        fill!(os, defaults, output.dir, parsed_string, "dir");
        fill!(os, defaults, output.scenario, parsed_string, "scenario");
        match os.list("policy_betas")? {
            Some(v) => output.policy_betas = v,
            None => defaults.push(format!("output.policy_betas = {}", fmt_list(&output.policy_betas))),
        }
        fill!(os, defaults, output.policy_x_max, f64, "policy_x_max");
        fill!(os, defaults, output.policy_n_x, parsed_usize, "policy_n_x");
        match os.list("labor_scan")? {
            Some(v) => output.labor_scan = v,
            None => defaults.push(format!("output.labor_scan = {}", fmt_list(&output.labor_scan))),
        }
        match os.list("gamma_scan")? {
            Some(v) => output.gamma_scan = v,
            None => defaults.push(format!("output.gamma_scan = {}", fmt_list(&output.gamma_scan))),
        }
        os.finish()?;
        output.check()?;

        Ok(Self {
            model,
            grid,
            solver,
            sim,
            output,
            defaults,
        })
    }

    /// The resolved configuration in canonical form.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        s.push_str("[model]\n");
        for (name, v) in m.fields() {
            let _ = writeln!(s, "{name} = {v}");
        }
        let g = &self.grid;
        let _ = write!(
            s,
            "\n[grid]\nz_min = {}\nz_max = {}\nn_z = {}\nbeta_lo = {}\nbeta_hi = {}\nn_beta = {}\nmode = {}\n",
            g.z_min, g.z_max, g.n_z, g.beta_lo, g.beta_hi, g.n_beta, g.mode
        );
        let o = &self.solver;
        s.push_str("\n[solver]\n");
        match o.method {
            Method::Howard => s.push_str("method = howard\n"),
            Method::Psor { omega } => {
                let _ = write!(s, "method = psor\npsor_omega = {omega}\n");
            }
        }
        match o.tol {
            None => s.push_str("tol = auto\n"),
            Some(t) => {
                let _ = writeln!(s, "tol = {t}");
            }
        }
        let _ = write!(
            s,
            "max_iter = {}\nwarm_start = {}\nrequire_stopping = {}\n",
            o.max_iter, o.warm_start, o.require_stopping
        );
        let m = &self.sim;
        let _ = write!(
            s,
            "\n[sim]\ndt = {}\nhorizon = {}\nduality_horizon = {}\nn_paths = {}\nseed = {}\nx0 = {}\nbeta0 = {}\n\
             record_every = {}\nintegrate_wealth = {}\nmonitoring_correction = {}\nworld = {}\n",
            m.dt,
            m.horizon,
            m.duality_horizon,
            m.n_paths,
            m.seed,
            m.x0,
            m.beta0,
            m.record_every,
            m.integrate_wealth,
            m.monitoring_correction,
            m.world
        );
        let o = &self.output;
        let _ = write!(
            s,
            "\n[output]\ndir = {}\nscenario = {}\npolicy_betas = {}\npolicy_x_max = {}\npolicy_n_x = {}\n\
             labor_scan = {}\ngamma_scan = {}\n",
            o.dir,
            o.scenario,
            fmt_list(&o.policy_betas),
            o.policy_x_max,
            o.policy_n_x,
            fmt_list(&o.labor_scan),
            fmt_list(&o.gamma_scan)
        );
        s
    }

    /// Hex SHA-256 of [`RunConfig::to_ini`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_ini().as_bytes()))
    }

    /// Copy with the model replaced; grid defaults that depended on the old
    /// model are not recomputed.
    pub fn with_model(&self, model: ModelParams, mode: ValidationMode) -> Result<Self> {
        let model = model.checked(mode)?;
        self.grid.validate(&model)?;
        Ok(Self {
            model,
            ..self.clone()
        })
    }
}

impl SimSettings {
    fn check(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("duality_horizon", self.duality_horizon),
            ("x0", self.x0),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("`sim.{name}` must be positive, got {v}")));
            }
        }
        if self.dt > self.horizon {
            return Err(Error::Config("`sim.dt` exceeds `sim.horizon`".into()));
        }
        if self.n_paths == 0 || self.record_every == 0 {
            return Err(Error::Config("`sim.n_paths` and `sim.record_every` must be positive".into()));
        }
        Ok(())
    }
}

impl OutputSettings {
    fn check(&self) -> Result<()> {
        if self.dir.is_empty() || self.scenario.is_empty() {
            return Err(Error::Config("`output.dir` and `output.scenario` must be non-empty".into()));
        }
        if self.policy_betas.is_empty() || self.labor_scan.is_empty() || self.gamma_scan.is_empty() {
            return Err(Error::Config("scan lists must be non-empty".into()));
        }
        if !(self.policy_x_max > 0.0) || self.policy_n_x < 2 {
            return Err(Error::Config(
                "`output.policy_x_max` must be positive and `output.policy_n_x` at least 2".into(),
            ));
        }
        Ok(())
    }
}

impl Section {
    fn parsed_usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parsed(key, "a non-negative integer")
    }

    fn parsed_u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.parsed(key, "a non-negative integer")
    }

    fn parsed_bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.parsed(key, "`true` or `false`")
    }

    fn parsed_string(&mut self, key: &str) -> Result<Option<String>> {
        Ok(self.take(key).map(|(v, _)| v))
    }

    fn parsed_mode(&mut self, key: &str) -> Result<Option<CoordMode>> {
        self.take(key).map(|(v, _)| v.parse()).transpose()
    }

    fn parsed_world(&mut self, key: &str) -> Result<Option<AgentWorld>> {
        self.take(key).map(|(v, _)| v.parse()).transpose()
    }
}
