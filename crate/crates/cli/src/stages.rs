//! Pipeline stages behind the subcommands.

use std::path::PathBuf;

use noborrow::config::RunConfig;
use noborrow::io::{Artifact, Meta};
use noborrow::model::boundary_floor;
use noborrow::oracle::{check_moment_bound, check_strong_duality, mc_gradient_estimate, CheckReport, McConfig};
use noborrow::policy::{build_policy_table, wealth_grid, PolicyTable};
use noborrow::simulate::{
    compare_agents, run_ensemble, simulate_optimal_path, ColocationTolerance, EnsembleSpec, SimConfig,
};
use noborrow::{ConstBetaSolution, DualSurface, DualValue, Error, GridSpec, ModelParams, Result, ValidationMode};

use crate::Outcome;

const PATH_HEADER: [&str; 9] = [
    "t", "beta", "z1", "d_star", "z_ctrl", "x_star", "c_star", "pi_star", "reflect_flag",
];
const ENSEMBLE_HEADER: [&str; 6] = ["t", "mean_x", "se_x", "q05", "q50", "q95"];
const COMPARE_HEADER: [&str; 7] = [
    "t",
    "mean_x_stochastic",
    "se_stochastic",
    "mean_x_constant",
    "se_constant",
    "mean_diff",
    "se_diff",
];
const POLICY_HEADER: [&str; 6] = ["x", "beta", "z_hat", "c_star", "pi_star", "V"];

/// Resolved configuration plus where to write.
pub struct Context {
    pub cfg: RunConfig,
    pub mode: ValidationMode,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: RunConfig, mode: ValidationMode) -> Self {
        let out = PathBuf::from(&cfg.output.dir);
        Self { cfg, mode, out }
    }

    fn meta(&self, stage: &str) -> Meta {
        let mut m = Meta::new();
        m.push("stage", stage)
            .push("config_hash", self.cfg.hash())
            .push("scenario", &self.cfg.output.scenario)
            .push("mode", format!("{:?}", self.mode).to_lowercase())
            .push_block("config", &self.cfg.to_ini());
        m
    }

    fn write<R: AsRef<[f64]>>(&self, base: &str, header: &[&str], rows: &[R], meta: &Meta) -> Result<()> {
        let a = Artifact::new(&self.out, base);
        a.write(header, rows, meta)?;
        println!("wrote {} ({} rows)", a.csv.display(), rows.len());
        Ok(())
    }

    fn sim_config(&self, horizon: f64) -> SimConfig {
        let s = &self.cfg.sim;
        SimConfig {
            horizon,
            dt: s.dt,
            seed: s.seed,
            substeps: 1,
            integrate_wealth: s.integrate_wealth,
            monitoring_correction: s.monitoring_correction,
        }
    }

    /// Solve for `model`: the configured grid for the configured model,
    /// otherwise the default rectangle of `model` at the configured resolution.
    fn solve_for(&self, model: &ModelParams) -> Result<DualSurface> {
        let grid = if *model == self.cfg.model {
            self.cfg.grid.clone()
        } else {
            GridSpec::default_for(model)
                .with_resolution(self.cfg.grid.n_z, self.cfg.grid.n_beta)
                .with_mode(self.cfg.grid.mode)
        };
        let dual = DualSurface::solve(&grid, model, &self.cfg.solver)?;
        let d = &dual.surface.diagnostics;
        eprintln!(
            "solved {}x{} grid: {} iterations, final error {:.2e}, z* in [{:.4}, {:.4}]",
            grid.n_z,
            grid.n_beta,
            d.iterations,
            d.final_error,
            dual.boundary.min(),
            dual.boundary.max_finite()
        );
        Ok(dual)
    }

    fn solve(&self) -> Result<DualSurface> {
        self.solve_for(&self.cfg.model)
    }

    fn x_grid(&self) -> Vec<f64> {
        let o = &self.cfg.output;
        wealth_grid(o.policy_x_max / o.policy_n_x as f64, o.policy_x_max, o.policy_n_x)
    }

    fn ensemble_spec(&self, dual: &DualSurface) -> EnsembleSpec {
        let s = &self.cfg.sim;
        EnsembleSpec {
            x0: s.x0,
            beta0: s.beta0,
            n_paths: s.n_paths,
            record_every: s.record_every,
            tolerance: ColocationTolerance::for_surface(dual),
        }
    }
}

fn push_solve_meta(m: &mut Meta, dual: &DualSurface) {
    let d = &dual.surface.diagnostics;
    m.push("solver.method_used", d.method)
        .push("solver.iterations", d.iterations)
        .push("solver.inner_iterations", d.inner_iterations)
        .push("solver.final_error", d.final_error)
        .push("solver.tolerance", d.tolerance)
        .push("solver.nonmonotone_nodes", d.nonmonotone)
        .push("grid.nodes", dual.surface.v.len())
        .push("grid.dy", dual.surface.layout.dy);
}

pub fn solve(ctx: &Context) -> Result<Outcome> {
    let dual = ctx.solve()?;
    let mut m = ctx.meta("solve");
    push_solve_meta(&mut m, &dual);
    ctx.write("surface", &["z", "beta", "v", "active", "residual"], &dual.surface.csv_rows(), &m)?;
    ctx.write("dual", &["z", "beta", "v", "v_tilde", "v_z", "v_beta"], &dual.csv_rows(), &m)?;
    Ok(Outcome::Ok)
}

pub fn boundary(ctx: &Context) -> Result<Outcome> {
    let dual = ctx.solve()?;
    let b = &dual.boundary;
    let mut m = ctx.meta("boundary");
    push_solve_meta(&mut m, &dual);
    m.push("floor", boundary_floor(&ctx.cfg.model))
        .push("z_star_min", b.min())
        .push("z_star_max", b.max_finite())
        .push("unbounded_rows", b.unbounded_rows.len());
    ctx.write("boundary", &["beta", "z_star"], &b.csv_rows(), &m)?;
    Ok(Outcome::Ok)
}

fn table_meta(m: &mut Meta, t: &PolicyTable) {
    m.push("policy.failed_cells", t.failed_cells());
    let betas: Vec<String> = t.beta_values.iter().map(|b| b.to_string()).collect();
    m.push("policy.betas", betas.join(", "));
}

pub fn policy(ctx: &Context) -> Result<Outcome> {
    let dual = ctx.solve()?;
    let t = build_policy_table(&ctx.x_grid(), &ctx.cfg.output.policy_betas, &dual);
    let mut m = ctx.meta("policy");
    table_meta(&mut m, &t);
    ctx.write(
        &format!("policy_{}", ctx.cfg.output.scenario),
        &POLICY_HEADER,
        &t.csv_rows(),
        &m,
    )?;
    Ok(Outcome::Ok)
}

pub fn simulate(ctx: &Context) -> Result<Outcome> {
    let dual = ctx.solve()?;
    let s = &ctx.cfg.sim;
    let sim = ctx.sim_config(s.horizon);
    let path = simulate_optimal_path(s.x0, s.beta0, &dual, &sim, 0)?;
    let mut m = ctx.meta("simulate");
    m.push("path.stream", 0).push("path.z_hat", path.z_hat);
    ctx.write("paths", &PATH_HEADER, &path.csv_rows(), &m)?;

    let spec = ctx.ensemble_spec(&dual);
    let e = run_ensemble(&dual, &sim, &spec)?;
    let mut m = ctx.meta("simulate");
    m.push("ensemble.n_paths", e.n_paths)
        .push("ensemble.failed", e.failed)
        .push("ensemble.min_x", e.min_x)
        .push("ensemble.min_x_integrated", e.min_x_integrated)
        .push("ensemble.reflections", e.reflections)
        .push("ensemble.colocated", e.colocated)
        .push("ensemble.max_x_at_reflection", e.max_x_reflect)
        .push("ensemble.epsilon", e.epsilon)
        .push("ensemble.log_cell", spec.tolerance.log_cell);
    ctx.write("ensemble", &ENSEMBLE_HEADER, &e.csv_rows(), &m)?;
    Ok(Outcome::Ok)
}

fn constant_agent(model: &ModelParams) -> Result<ConstBetaSolution> {
    ConstBetaSolution::at_beta_bar(&model.constant_beta())
}

fn run_compare(ctx: &Context, dual: &DualSurface, base: &str) -> Result<()> {
    let s = &ctx.cfg.sim;
    let constant = constant_agent(&ctx.cfg.model)?;
    let spec = ctx.ensemble_spec(dual);
    let c = compare_agents(dual, &constant, &ctx.sim_config(s.horizon), &spec, s.world)?;
    let last = c.mean_diff.len() - 1;
    let mut m = ctx.meta("compare");
    m.push("compare.world", s.world)
        .push("compare.n_paths", s.n_paths)
        .push("compare.terminal_diff", c.mean_diff[last])
        .push("compare.terminal_diff_se", c.se_diff[last])
        .push("compare.terminal_relative_gap", c.relative_gap(last));
    ctx.write(base, &COMPARE_HEADER, &c.csv_rows(), &m)?;
    println!(
        "terminal wealth: stochastic {:.4} constant {:.4} difference {:.4} (se {:.4})",
        c.stochastic.mean_x[last], c.constant.mean_x[last], c.mean_diff[last], c.se_diff[last]
    );
    if base == "compare" {
        ctx.write("compare_stochastic", &ENSEMBLE_HEADER, &c.stochastic.csv_rows(), &m)?;
        ctx.write("compare_constant", &ENSEMBLE_HEADER, &c.constant.csv_rows(), &m)?;
    }
    Ok(())
}

pub fn compare(ctx: &Context) -> Result<Outcome> {
    let dual = ctx.solve()?;
    run_compare(ctx, &dual, "compare")?;
    Ok(Outcome::Ok)
}

/// Every check whose inputs are fixed by the config and seed.
pub fn validation_report(ctx: &Context) -> Result<CheckReport> {
    let p = &ctx.cfg.model;
    let s = &ctx.cfg.sim;
    let mut r = CheckReport::new();
    let dual = ctx.solve()?;
    let surf = &dual.surface;
    let d = &surf.diagnostics;

    r.push("solver_converged", d.final_error, "<=", d.tolerance, f64::NAN, d.final_error <= d.tolerance);
    let comp = surf.complementarity_error();
    r.push("complementarity", comp, "<=", d.tolerance, f64::NAN, comp <= d.tolerance);
    let (lo, hi) = surf.bound_violations();
    r.push("value_bounds_violations", (lo + hi) as f64, "==", 0.0, f64::NAN, lo + hi == 0);
    let mono: usize = surf.monotonicity_violations().iter().sum();
    r.push("monotonicity_violations", mono as f64, "==", 0.0, f64::NAN, mono == 0);
    let cross = surf.single_crossing_failures().len();
    r.push("single_crossing_failures", cross as f64, "==", 0.0, f64::NAN, cross == 0);
    let floor = boundary_floor(p);
    let zmin = dual.boundary.min();
    r.push("boundary_floor", zmin, ">=", floor, f64::NAN, zmin >= floor);

    let z_probe = 0.6 * dual.z_star(s.beta0);
    match check_moment_bound(p, z_probe, s.beta0, &[1.0, 5.0, 10.0], s.n_paths, s.dt, s.seed) {
        Ok(m) => {
            for row in &m.rows {
                r.push(format!("moment_bound_t{}", row.t), row.mean, "<=", row.bound, row.se, row.pass);
            }
        }
        Err(e) => r.push_error("moment_bound", &e.to_string()),
    }

    let mc = McConfig {
        n_paths: s.n_paths,
        dt: s.dt,
        horizon: s.duality_horizon,
        seed: s.seed,
        ..McConfig::default()
    };
    let bnd = dual.boundary.clone();
    match mc_gradient_estimate(p, z_probe, s.beta0, &|b| bnd.at(b), &mc) {
        Ok(g) => {
            let pairs = [
                ("mc_v", g.v, dual.v(z_probe, s.beta0)),
                ("mc_v_z", g.v_z, dual.v_z(z_probe, s.beta0)),
                ("mc_v_beta", g.v_beta, dual.v_beta(z_probe, s.beta0)),
            ];
            for (name, est, fd) in pairs {
                let tol = 4.0 * est.se + 0.02 * fd.abs() + est.tail_bound;
                r.push(name, est.value, "~", fd, est.se, (est.value - fd).abs() <= tol);
            }
        }
        Err(e) => r.push_error("mc_gradient", &e.to_string()),
    }

    match check_strong_duality(s.x0, s.beta0, &dual, s.n_paths, &ctx.sim_config(s.duality_horizon), 0.02) {
        Ok(rep) => {
            let (pr, bu) = (rep.primal, rep.budget);
            r.push("strong_duality", pr.estimate, "~", pr.target, pr.se, pr.pass);
            r.push("budget", bu.estimate, "~", bu.target, bu.se, bu.pass);
            let worst = rep
                .weak_duality
                .iter()
                .map(|&(_, gap, tol)| gap + tol)
                .fold(f64::INFINITY, f64::min);
            r.push("weak_duality_min_gap_plus_3se", worst, ">=", 0.0, pr.se, worst >= 0.0);
        }
        Err(e) => r.push_error("strong_duality", &e.to_string()),
    }

    let spec = ctx.ensemble_spec(&dual);
    match run_ensemble(&dual, &ctx.sim_config(s.horizon), &spec) {
        Ok(e) => {
            let eps = e.epsilon;
            r.push("no_borrowing_min_x", e.min_x, ">=", -eps, f64::NAN, e.min_x >= -eps);
            r.push(
                "reflections_colocated",
                e.colocated as f64,
                "==",
                e.reflections as f64,
                f64::NAN,
                e.colocated == e.reflections,
            );
        }
        Err(e) => r.push_error("ensemble", &e.to_string()),
    }
    Ok(r)
}

pub fn validate(ctx: &Context) -> Result<Outcome> {
    let report = validation_report(ctx)?;
    std::fs::create_dir_all(&ctx.out)?;
    let csv = ctx.out.join("validation.csv");
    let txt = ctx.out.join("validation.txt");
    let summary = report.summary();
    std::fs::write(&csv, report.to_csv())?;
    std::fs::write(&txt, &summary)?;
    let mut m = ctx.meta("validate");
    m.push("checks", report.lines.len()).push("failures", report.failures());
    m.write(&ctx.out.join("validation.meta"))?;
    print!("{summary}");
    println!("wrote {} and {}", csv.display(), txt.display());
    Ok(if report.passed() {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed
    })
}

/// Policy tables at `beta_bar` for each value of one model field.
fn scan_rows(ctx: &Context, field: &str, values: &[f64]) -> Result<Vec<[f64; 7]>> {
    let mut rows = Vec::new();
    for &v in values {
        let mut model = ctx.cfg.model;
        model.set_field(field, v)?;
        let model = model.checked(ctx.mode)?;
        let dual = ctx.solve_for(&model)?;
        let t = build_policy_table(&ctx.x_grid(), &[model.beta_bar], &dual);
        if t.failed_cells() > 0 {
            return Err(Error::Domain(format!(
                "{field} = {v}: {} policy cells failed",
                t.failed_cells()
            )));
        }
        rows.extend(t.csv_rows().into_iter().map(|r| [v, r[0], r[1], r[2], r[3], r[4], r[5]]));
    }
    Ok(rows)
}

pub fn figures(ctx: &Context) -> Result<Outcome> {
    let dual = ctx.solve()?;
    let s = &ctx.cfg.sim;

    let path = simulate_optimal_path(s.x0, s.beta0, &dual, &ctx.sim_config(s.horizon), 0)?;
    let rows: Vec<[f64; 10]> = path
        .csv_rows()
        .into_iter()
        .map(|r| [r[0], r[1], r[2], r[3], r[4], dual.z_star(r[1]), r[5], r[6], r[7], r[8]])
        .collect();
    let mut m = ctx.meta("figures");
    m.push("path.z_hat", path.z_hat);
    ctx.write(
        "fig1_paths",
        &["t", "beta", "z1", "d_star", "z_ctrl", "z_star", "x_star", "c_star", "pi_star", "reflect_flag"],
        &rows,
        &m,
    )?;

    run_compare(ctx, &dual, "fig2_compare")?;

    let o = &ctx.cfg.output;
    let m = ctx.meta("figures");
    let labor = scan_rows(ctx, "ell", &o.labor_scan)?;
    ctx.write("fig3_labor", &["ell", "x", "beta", "z_hat", "c_star", "pi_star", "V"], &labor, &m)?;
    let gamma = scan_rows(ctx, "gamma", &o.gamma_scan)?;
    ctx.write("fig4_gamma", &["gamma", "x", "beta", "z_hat", "c_star", "pi_star", "V"], &gamma, &m)?;

    let t = build_policy_table(&ctx.x_grid(), &o.policy_betas, &dual);
    let mut m = ctx.meta("figures");
    table_meta(&mut m, &t);
    ctx.write("fig5_beta", &POLICY_HEADER, &t.csv_rows(), &m)?;
    Ok(Outcome::Ok)
}
