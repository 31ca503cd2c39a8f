use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noborrow::config::RunConfig;
use noborrow::ValidationMode;

const SMALL: &str = "\
[model]
r = 0.03
delta = 0.04
ell = 0.6
gamma = 1.5
kappa = 0.25
beta_bar = 0.05
sigma_beta = 0.03
sigma = 0.18

[grid]
n_z = 300
n_beta = 101

[sim]
dt = 0.01
horizon = 3
duality_horizon = 20
n_paths = 64
record_every = 10

[output]
policy_n_x = 20
labor_scan = 0.6, 1.0
gamma_scan = 1.5, 2.0
";

fn noborrow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noborrow")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, cfg: &Path, sub: &str, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    noborrow(&args)
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn solve_writes_surface_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "solve", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let surface = fs::read_to_string(out.join("surface.csv")).unwrap();
    assert!(surface.starts_with("z,beta,v,active,residual\n"));
    let meta = fs::read_to_string(out.join("surface.meta")).unwrap();
    for key in ["config_hash = ", "solver.iterations = ", "solver.final_error = ", "config.grid.n_z = 300", "created_unix = "] {
        assert!(meta.contains(key), "missing {key}");
    }
    assert!(!surface.contains("created"));
    assert!(fs::read_to_string(out.join("dual.csv")).unwrap().starts_with("z,beta,v,v_tilde,v_z,v_beta\n"));
}

#[test]
fn defaults_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("dt = 0.01\n", ""));
    let o = run_in(dir.path(), &cfg, "boundary", &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("default: sim.dt = 0.004"));
    let b = fs::read_to_string(dir.path().join("out/boundary.csv")).unwrap();
    assert!(b.starts_with("beta,z_star\n"));
    assert_eq!(b.lines().count(), 102);
}

#[test]
fn validate_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    let a = run_in(dir.path(), &cfg, "validate", &["--seed", "7"]);
    assert!(matches!(a.status.code(), Some(0) | Some(1)));
    let (csv, txt) = (read("validation.csv"), read("validation.txt"));
    let b = run_in(dir.path(), &cfg, "validate", &["--seed", "7", "--threads", "1"]);
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(csv, read("validation.csv"));
    assert_eq!(txt, read("validation.txt"));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(txt).unwrap();
    assert!(text.contains("boundary_floor"));
    assert!(text.contains("checks passed"));
}

#[test]
fn seed_changes_simulation_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let read = || fs::read(dir.path().join("out/ensemble.csv")).unwrap();
    assert_eq!(run_in(dir.path(), &cfg, "simulate", &["--seed", "1"]).status.code(), Some(0));
    let first = read();
    assert_eq!(run_in(dir.path(), &cfg, "simulate", &["--seed", "1"]).status.code(), Some(0));
    assert_eq!(first, read());
    assert_eq!(run_in(dir.path(), &cfg, "simulate", &["--seed", "2"]).status.code(), Some(0));
    assert_ne!(first, read());
    let paths = fs::read_to_string(dir.path().join("out/paths.csv")).unwrap();
    assert!(paths.starts_with("t,beta,z1,d_star,z_ctrl,x_star,c_star,pi_star,reflect_flag\n"));
    assert_eq!(paths.lines().count(), 302);
}

#[test]
fn policy_and_compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(run_in(dir.path(), &cfg, "policy", &[]).status.code(), Some(0));
    let pol = fs::read_to_string(dir.path().join("out/policy_reference.csv")).unwrap();
    assert!(pol.starts_with("x,beta,z_hat,c_star,pi_star,V\n"));
    assert_eq!(pol.lines().count(), 1 + 3 * 20);
    for world in ["own", "shared"] {
        let o = run_in(dir.path(), &cfg, "compare", &["--world", world]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let meta = fs::read_to_string(dir.path().join("out/compare.meta")).unwrap();
        assert!(meta.contains(&format!("compare.world = {world}")));
    }
    assert!(dir.path().join("out/compare_constant.csv").exists());
}

#[test]
fn figures_emits_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), &cfg, "figures", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for name in ["fig1_paths", "fig2_compare", "fig3_labor", "fig4_gamma", "fig5_beta"] {
        assert!(out.join(format!("{name}.csv")).is_file(), "{name}");
        assert!(out.join(format!("{name}.meta")).is_file(), "{name}");
    }
    let fig1 = fs::read_to_string(out.join("fig1_paths.csv")).unwrap();
    assert!(fig1.lines().next().unwrap().contains("z_star"));
    let fig3 = fs::read_to_string(out.join("fig3_labor.csv")).unwrap();
    assert_eq!(fig3.lines().count(), 1 + 2 * 20);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(noborrow(&["solve"]).status.code(), Some(2));
    assert_eq!(noborrow(&["solve", "--config", "/nonexistent/run.cfg"]).status.code(), Some(2));
    assert_eq!(noborrow(&["explode", "--config", "x.cfg"]).status.code(), Some(2));
    assert_eq!(noborrow(&["solve", "--mode", "lenient", "--config", "x.cfg"]).status.code(), Some(2));
    assert_eq!(noborrow(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        SMALL.replace("gamma = 1.5", "gamma = 0.9"),
        SMALL.replace("[sim]\n", "[sim]\nspeed = 3\n"),
        SMALL.replace("n_paths = 64", "n_paths = many"),
    ] {
        let cfg = write_config(dir.path(), &text);
        let o = run_in(dir.path(), &cfg, "solve", &[]);
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn shipped_configs_load() {
    let root = repo_root().join("configs");
    let reference = RunConfig::load(&root.join("reference.cfg"), ValidationMode::Strict).unwrap();
    assert_eq!(reference.model, noborrow::ModelParams::reference());
    assert_eq!(reference.output.labor_scan, vec![0.2, 0.6, 1.0]);
    assert_eq!(reference.output.gamma_scan, vec![1.2, 1.5, 2.0]);
    assert_eq!(reference.output.policy_betas, vec![0.02, 0.05, 0.12]);
    let mut n = 0;
    for entry in fs::read_dir(root.join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let c = RunConfig::load(&path, ValidationMode::Strict).unwrap();
        assert_ne!(c.output.scenario, "reference", "{}", path.display());
        n += 1;
    }
    assert_eq!(n, 7);
}
