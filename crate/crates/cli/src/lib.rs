//! Command-line front end: each subcommand runs one stage of the
//! solve → boundary → policy → simulate → compare → validate pipeline from a
//! config file and writes CSV tables with `.meta` sidecars.
//!
//! Exit codes: 0 on success, 1 when a check fails or a stage errors, 2 on
//! usage errors (including a missing or unreadable config file).

mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use noborrow::config::RunConfig;
use noborrow::simulate::AgentWorld;
use noborrow::{Error, ValidationMode};

pub use stages::Context;

#[derive(Debug, Parser)]
#[command(name = "noborrow", version, about = "No-borrowing consumption/investment solver and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (`key = value` file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master seed; overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Parameter validation mode.
    #[arg(long, global = true, default_value = "strict", value_parser = parse_mode)]
    mode: ValidationMode,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the stopping problem; writes surface.csv and dual.csv.
    Solve,
    /// Solve and write the free boundary to boundary.csv.
    Boundary,
    /// Consumption and investment tables on a wealth grid.
    Policy,
    /// One optimal path and an ensemble of paths.
    Simulate,
    /// Stochastic-factor agent against the constant-factor agent on shared noise.
    Compare {
        /// Market in which the constant-factor agent trades; overrides `sim.world`.
        #[arg(long, value_parser = parse_world)]
        world: Option<AgentWorld>,
    },
    /// Run the validation checks and write validation.csv / validation.txt.
    Validate,
    /// Every table behind the figures of the numerical study.
    Figures,
}

fn parse_mode(s: &str) -> Result<ValidationMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_world(s: &str) -> Result<AgentWorld, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Outcome of a stage that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    ChecksFailed,
}

/// Parse `args` (including the program name), run the subcommand and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config is required");
        return 2;
    };
    if !path.is_file() {
        eprintln!("error: config file {} not found", path.display());
        return 2;
    }
    let mut cfg = match RunConfig::load(path, cli.mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.display().to_string();
    }
    if let Command::Compare { world: Some(w) } = cli.command {
        cfg.sim.world = w;
    }
    for d in &cfg.defaults {
        eprintln!("default: {d}");
    }
    let ctx = Context::new(cfg, cli.mode);
    let result = noborrow::parallel::with_threads(cli.threads, || match cli.command {
        Command::Solve => stages::solve(&ctx),
        Command::Boundary => stages::boundary(&ctx),
        Command::Policy => stages::policy(&ctx),
        Command::Simulate => stages::simulate(&ctx),
        Command::Compare { .. } => stages::compare(&ctx),
        Command::Validate => stages::validate(&ctx),
        Command::Figures => stages::figures(&ctx),
    });
    match result {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::ChecksFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
