//! Command-line driver: solves configured problems, runs the property
//! suites, and performs grid-refinement studies.
//!
//! Exit codes: `0` success (for `check`: all properties passed), `1` property
//! failure, `2` solver failure (continuation or Newton breakdown), `3`
//! configuration or problem-specification error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use mixed_hessian::chi::{self, SamplePlan};
use mixed_hessian::problems;
use mixed_hessian::properties::{self, FailingSample, PropertyConfig, SuiteResult};
use mixed_hessian::solver::{Continuation, ProblemSpec, SolveOutcome};
use mixed_hessian::Error;

#[derive(Parser)]
#[command(
    name = "mixed-hessian",
    version,
    about = "Continuation solver and property checker for mixed Hessian equations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Seed for property sampling (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts (overrides MIXED_HESSIAN_OUT and the
    /// config; default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Newton residual tolerance override.
    #[arg(long = "tol-newton", global = true)]
    tol_newton: Option<f64>,
    /// Initial continuation step override.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Admissibility margin coefficient override.
    #[arg(long, global = true)]
    tau: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a problem: a built-in name or a JSON config path.
    Solve { target: String },
    /// Run the seeded property suites described by a config (or a built-in
    /// check target such as degeneracy-sweep).
    Check { target: String },
    /// Grid-refinement study of a built-in problem with a known solution.
    Mms {
        name: String,
        /// Comma-separated nodes-per-axis list.
        #[arg(long, value_delimiter = ',', default_value = "9,17")]
        grids: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_solver_failure() { 2 } else { 3 };
        }
    }
    3
}

fn dispatch(cli: &Cli) -> anyhow::Result<u8> {
    match &cli.cmd {
        Cmd::Solve { target } => run_solve(load_target(target)?, cli),
        Cmd::Check { target } => run_check(load_target(target)?, cli),
        Cmd::Mms { name, grids } => run_mms(name, grids, cli),
    }
}

/// A target is either a JSON config file or a bare built-in name.
fn load_target(target: &str) -> anyhow::Result<RunConfig> {
    let path = Path::new(target);
    if path.exists() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Ok(config::parse_config(&text)?)
    } else if problems::names().iter().any(|n| *n == target) || target == "degeneracy-sweep" {
        Ok(RunConfig {
            problem: Some(target.to_string()),
            ..RunConfig::default()
        })
    } else {
        Err(Error::InvalidInput(format!(
            "no config file at {target:?} and no built-in problem with that name \
             (available: {}, degeneracy-sweep)",
            problems::names().join(", ")
        ))
        .into())
    }
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("MIXED_HESSIAN_OUT").map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn apply_flag_overrides(spec: &mut ProblemSpec, cli: &Cli) {
    if let Some(v) = cli.tol_newton {
        spec.opts.tol_newton = v;
    }
    if let Some(v) = cli.dt {
        spec.opts.dt = v;
    }
    if let Some(v) = cli.tau {
        spec.opts.tau_coeff = v;
    }
}

// ------------------------------------------------------------------ solve

#[derive(Serialize)]
struct Summary<'a> {
    problem: &'a str,
    k: usize,
    counts: &'a [usize],
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    final_t: f64,
    stages: usize,
    total_newton_iters: usize,
    final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_error: Option<f64>,
    comparison_worst: f64,
    comparison_ok: bool,
    strict_regime: bool,
    exit_code: u8,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct ContinuationDoc<'a> {
    problem: &'a str,
    records: &'a [mixed_hessian::ContinuationRecord],
    newton_log: &'a [mixed_hessian::NewtonIterRecord],
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_solve(cfg: RunConfig, cli: &Cli) -> anyhow::Result<u8> {
    let mut spec = config::build_problem(&cfg)?;
    apply_flag_overrides(&mut spec, cli);
    let dir = out_dir(cli, &cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let start = Instant::now();
    let mut solver = Continuation::new(&spec)?;
    let outcome: SolveOutcome = match solver.solve() {
        Ok(o) => o,
        Err(e) => {
            let code = if e.is_solver_failure() { 2 } else { 3 };
            let summary = Summary {
                problem: &spec.name,
                k: spec.k,
                counts: spec.grid.counts(),
                converged: false,
                error: Some(e.to_string()),
                final_t: 0.0,
                stages: 0,
                total_newton_iters: 0,
                final_residual: f64::NAN,
                max_error: None,
                comparison_worst: f64::NAN,
                comparison_ok: false,
                strict_regime: false,
                exit_code: code,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            write_json(&dir.join("summary.json"), &summary)?;
            return Err(e.into());
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let last = outcome.records.last().expect("at least the initial stage");

    outcome
        .solution
        .write_text(spec.k, dir.join("solution.txt"))?;
    write_json(
        &dir.join("continuation.json"),
        &ContinuationDoc {
            problem: &spec.name,
            records: &outcome.records,
            newton_log: &outcome.newton_log,
        },
    )?;
    let mut csv = String::from("t,c0,c1,c2,residual\n");
    for r in &outcome.records {
        csv.push_str(&format!("{},{},{},{},{}\n", r.t, r.c0, r.c1, r.c2, r.residual));
    }
    fs::write(dir.join("norms.csv"), csv)?;
    let summary = Summary {
        problem: &spec.name,
        k: spec.k,
        counts: spec.grid.counts(),
        converged: last.t == 1.0,
        error: None,
        final_t: last.t,
        stages: outcome.records.len(),
        total_newton_iters: outcome.total_newton_iters(),
        final_residual: last.residual,
        max_error: outcome.max_error,
        comparison_worst: outcome.comparison_worst,
        comparison_ok: outcome.comparison_ok,
        strict_regime: outcome.strict_regime,
        exit_code: 0,
        wall_seconds: wall,
    };
    write_json(&dir.join("summary.json"), &summary)?;

    println!(
        "solved {}: t = {} in {} stages, {} Newton iterations, residual {:.3e}",
        spec.name,
        last.t,
        outcome.records.len(),
        outcome.total_newton_iters(),
        last.residual
    );
    if let Some(err) = outcome.max_error {
        println!("max nodal error vs reference: {err:.3e}");
    }
    println!("artifacts written to {}", dir.display());
    Ok(0)
}

// ------------------------------------------------------------------ check

fn chi_user_suite(cfg: &RunConfig, seed: u64) -> anyhow::Result<Option<SuiteResult>> {
    let Some(chi_cfg) = &cfg.chi else {
        return Ok(None);
    };
    let n = cfg.n.unwrap_or(3);
    let chi = config::build_chi(chi_cfg, n)?;
    let plan = SamplePlan {
        seed: seed ^ 0x9e37_79b9_7f4a_7c15,
        samples: cfg.samples.unwrap_or(SamplePlan::default().samples),
        ..SamplePlan::default()
    };
    let report = chi::validate(&chi, &plan)?;
    let failures = report.checks.iter().filter(|c| !c.pass).count();
    let worst_margin = report
        .checks
        .iter()
        .map(|c| c.worst_margin)
        .fold(f64::INFINITY, f64::min);
    let failing = report.checks.iter().find(|c| !c.pass).map(|c| FailingSample {
        case: format!("chi {:?}, structural check {:?}", report.chi, c.name),
        detail: match &c.worst {
            Some(w) => format!(
                "margin {:.6e} at x = {:?}, z = {}, p = {:?}",
                w.margin, w.x, w.z, w.p
            ),
            None => format!("worst margin {:.6e}", c.worst_margin),
        },
    });
    Ok(Some(SuiteResult {
        name: "chi-user".into(),
        samples: report.samples,
        failures,
        vacuous: report.samples == 0,
        pass: failures == 0,
        worst_margin: if worst_margin.is_finite() { worst_margin } else { 0.0 },
        failing,
    }))
}

fn run_check(cfg: RunConfig, cli: &Cli) -> anyhow::Result<u8> {
    let suites = match (&cfg.problem, &cfg.suites) {
        (Some(p), None) if p == "degeneracy-sweep" => Some(vec!["degeneracy-path".to_string()]),
        _ => cfg.suites.clone(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(42);
    let pc = PropertyConfig {
        seed,
        samples: cfg.samples,
        suites,
    };
    let mut report = properties::run(&pc)?;
    if let Some(extra) = chi_user_suite(&cfg, seed)? {
        report.suites.push(extra);
        report.total_samples = report.suites.iter().map(|s| s.samples).sum();
        report.all_pass = report.suites.iter().all(|s| s.pass);
        report.vacuous = report.total_samples == 0;
    }

    let dir = out_dir(cli, &cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut text = report.to_json_string();
    text.push('\n');
    fs::write(dir.join("properties.json"), &text)?;

    for suite in &report.suites {
        let status = if suite.vacuous {
            "vacuous"
        } else if suite.pass {
            "pass"
        } else {
            "FAIL"
        };
        println!(
            "{:<28} {:>7} samples  worst margin {:>12.3e}  {status}",
            suite.name, suite.samples, suite.worst_margin
        );
    }
    println!(
        "report written to {} ({} suites, {} samples)",
        dir.join("properties.json").display(),
        report.suites.len(),
        report.total_samples
    );
    if report.all_pass {
        Ok(0)
    } else {
        for suite in report.suites.iter().filter(|s| !s.pass) {
            if let Some(f) = &suite.failing {
                eprintln!("{} failed: {}\n  {}", suite.name, f.case, f.detail);
            }
        }
        Ok(1)
    }
}

// -------------------------------------------------------------------- mms

fn run_mms(name: &str, grids: &[usize], cli: &Cli) -> anyhow::Result<u8> {
    if !problems::names().iter().any(|n| *n == name) {
        return Err(Error::InvalidInput(format!(
            "unknown problem {name:?}; available: {}",
            problems::names().join(", ")
        ))
        .into());
    }
    if grids.is_empty() {
        return Err(Error::InvalidInput("at least one grid size is required".into()).into());
    }
    let dir = out_dir(cli, &RunConfig::default());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut rows: Vec<(usize, f64, f64, usize, f64)> = Vec::new();
    for &per_axis in grids {
        let mut spec = problems::by_name(name, Some(per_axis), None, None)?;
        apply_flag_overrides(&mut spec, cli);
        let start = Instant::now();
        let mut solver = Continuation::new(&spec)?;
        let outcome = solver.solve()?;
        let secs = start.elapsed().as_secs_f64();
        let err = outcome
            .max_error
            .ok_or_else(|| Error::InvalidInput(format!("{name} has no reference solution")))?;
        let h = spec.grid.max_spacing();
        rows.push((per_axis, h, err, outcome.total_newton_iters(), secs));
        println!(
            "{name} at {per_axis}^3: h = {h:.4}, max error {err:.6e}, {} iterations, {secs:.1} s",
            outcome.total_newton_iters()
        );
    }

    let mut csv = String::from("per_axis,h,max_error,newton_iters,wall_seconds,order\n");
    let mut last_order = None;
    for (i, (per_axis, h, err, iters, secs)) in rows.iter().enumerate() {
        let order = if i == 0 {
            String::new()
        } else {
            let (_, hp, ep, _, _) = rows[i - 1];
            let o = (ep / err).ln() / (hp / h).ln();
            last_order = Some(o);
            format!("{o}")
        };
        csv.push_str(&format!("{per_axis},{h},{err},{iters},{secs},{order}\n"));
    }
    let csv_path = dir.join(format!("mms_{name}.csv"));
    fs::write(&csv_path, csv)?;
    if let Some(o) = last_order {
        println!("measured convergence order: {o:.3}");
    }
    println!("study written to {}", csv_path.display());
    Ok(0)
}
