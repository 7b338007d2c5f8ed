//! Subcommand implementations.
//!
//! Exit codes: 0 all runs complete, 1 config error, 2 at least one run
//! flagged (diverged / no feasible iterate) or a counterexample check
//! missed its tolerance.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cefopt::algorithms::{self, AlgorithmConfig, AlgorithmKind};
use cefopt::compressors::CompressorSpec;
use cefopt::parallel::map_jobs;
use cefopt::problems::make_l1_toy;
use cefopt::simulator::{RunRecord, SimOptions};
use cefopt::verify;

use crate::config::{self, ConfigError, ExperimentConfig, SweepPoint};
use crate::csvio::{self, SummaryRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;

pub struct RunOptions {
    pub jobs: usize,
    pub out_override: Option<PathBuf>,
    pub seed_override: Option<u64>,
    /// `sweep` subcommand: insist on a non-empty sweep block.
    pub require_sweep: bool,
}

pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> i32 {
    match run_inner(config_path, opts) {
        Ok(any_flagged) => {
            if any_flagged {
                EXIT_FLAGGED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

fn out_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    if let Some(dir) = &opts.out_override {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("CEFOPT_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    match cfg.output.get("dir") {
        Some(crate::config::RawValue::Scalar(s)) => PathBuf::from(s),
        _ => PathBuf::from("cefopt_out"),
    }
}

struct TaskResult {
    point: usize,
    seed: u64,
    row: SummaryRow,
    flagged: bool,
    line: String,
}

fn run_inner(config_path: &Path, opts: &RunOptions) -> Result<bool, ConfigError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| ConfigError(format!("{}: {e}", config_path.display())))?;
    let cfg = config::parse(&text)?;
    if opts.require_sweep && cfg.sweep.keys().next().is_none() {
        return Err(ConfigError("sweep subcommand needs a non-empty [sweep] section".into()));
    }
    let seeds = match opts.seed_override {
        Some(s) => vec![s],
        None => config::seeds(&cfg)?,
    };
    let points = config::expand_sweep(&cfg)?;
    let stride = match cfg.output.get("stride") {
        None => 1usize,
        Some(crate::config::RawValue::Scalar(s)) => {
            s.parse().map_err(|_| ConfigError(format!("field output.stride: bad integer {s:?}")))?
        }
        Some(_) => return Err(ConfigError("field output.stride: expected a scalar".into())),
    };
    let dir = out_dir(&cfg, opts);
    std::fs::create_dir_all(&dir)
        .map_err(|e| ConfigError(format!("cannot create {}: {e}", dir.display())))?;

    // Build every problem instance up front: sweep points share instances
    // across seeds, and config errors surface before any run starts.
    let mut built = Vec::new();
    for point in &points {
        let hint = config::numeric_gamma_hint(&point.algorithm);
        let (inst, problem_echo) = config::build_problem(&point.problem, hint)?;
        // Validate the algorithm block once per point.
        config::build_algorithm(&point.algorithm, &inst, seeds[0])?;
        built.push((point.clone(), inst, problem_echo));
    }

    let mut tasks: Vec<(usize, u64)> = Vec::new();
    for (pi, _) in built.iter().enumerate() {
        for &seed in &seeds {
            tasks.push((pi, seed));
        }
    }

    let dir_ref = &dir;
    let built_ref = &built;
    let results: Vec<Result<TaskResult, ConfigError>> =
        map_jobs(tasks, opts.jobs, move |(pi, seed)| {
            let (point, inst, problem_echo) = &built_ref[pi];
            let (algo, algo_echo) = config::build_algorithm(&point.algorithm, inst, seed)?;
            let sim = SimOptions { stride, ..SimOptions::default() };
            let start = Instant::now();
            let rec = algorithms::run(inst, &algo, &sim).map_err(|e| ConfigError(e.to_string()))?;
            let wall = start.elapsed().as_secs_f64();
            let traj_path = dir_ref.join(format!("traj_point{:03}_seed{}.csv", point.index, seed));
            csvio::write_trajectory(&traj_path, &rec)
                .map_err(|e| ConfigError(format!("writing {}: {e}", traj_path.display())))?;
            Ok(summarize(point, inst, problem_echo, &algo_echo, seed, &rec, wall))
        });

    let mut rows = Vec::new();
    let mut any_flagged = false;
    let mut failure: Option<ConfigError> = None;
    for r in results {
        match r {
            Ok(t) => {
                println!("{}", t.line);
                any_flagged |= t.flagged;
                rows.push((t.point, t.seed, t.row));
            }
            Err(e) => failure = Some(failure.unwrap_or(e)),
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    rows.sort_by_key(|(p, s, _)| (*p, *s));
    let rows: Vec<SummaryRow> = rows.into_iter().map(|(_, _, r)| r).collect();
    let summary_path = dir.join("summary.csv");
    csvio::write_summary(&summary_path, &rows)
        .map_err(|e| ConfigError(format!("writing {}: {e}", summary_path.display())))?;
    println!("summary: {}", summary_path.display());
    Ok(any_flagged)
}

fn summarize(
    point: &SweepPoint,
    inst: &cefopt::problems::ProblemInstance,
    problem_echo: &config::ProblemEcho,
    algo_echo: &config::AlgoEcho,
    seed: u64,
    rec: &RunRecord,
    wall: f64,
) -> TaskResult {
    let output = rec.output();
    let final_gap = inst.f_mean(output) - inst.f_star.unwrap_or(0.0);
    let g_out = inst.g_mean(output);
    let mut flags = Vec::new();
    if rec.diverged {
        flags.push(format!("diverged@{}", rec.diverged_at.unwrap()));
    }
    if rec.no_feasible_iterate {
        flags.push("no_feasible_iterate".to_string());
    }
    let flagged = !flags.is_empty();

    let mut row = SummaryRow::default();
    row.set("point", point.index.to_string());
    row.set("seed", seed.to_string());
    row.extend(&problem_echo.fields);
    row.extend(&algo_echo.fields);
    row.set("final_f_gap_xbar", csvio::format_float(final_gap));
    row.set("g_xbar", csvio::format_float(g_out));
    row.set("b_count", rec.b_count.to_string());
    row.set("bytes_per_worker", format!("{:.3e}", rec.bytes_per_worker()));
    row.set("wall_time_s", format!("{wall:.3}"));
    row.set("flags", flags.join(";"));

    let label = if point.label.is_empty() { String::new() } else { format!(" [{}]", point.label) };
    let line = format!(
        "point {:03} seed {}{}: f_gap(x̄) = {:.6e}, g(x̄) = {:.3e}, |B| = {}, bytes/worker = {:.3e}{}",
        point.index,
        seed,
        label,
        final_gap,
        g_out,
        rec.b_count,
        rec.bytes_per_worker(),
        if flagged { format!(", flags: {}", flags.join(";")) } else { String::new() },
    );
    TaskResult { point: point.index, seed, row, flagged, line }
}

pub fn cmd_verify() -> i32 {
    let outcomes = verify::run_all();
    let mut all_ok = true;
    for o in &outcomes {
        println!("{}", o.line());
        all_ok &= o.passed;
    }
    if all_ok {
        println!("all {} criteria passed", outcomes.len());
        EXIT_OK
    } else {
        println!("FAILURES present");
        EXIT_FLAGGED
    }
}

/// The exact two-dimensional reproduction setup: `T = 10³`, `γ = 1/√T`,
/// `x⁰ = (γ/2, −1)`, Top-1 uplink.
pub fn cmd_counterexample(which: &str) -> i32 {
    let t = 1000usize;
    let gamma = 1.0 / (t as f64).sqrt();
    let problem = make_l1_toy(gamma).unwrap();
    let kind = match which {
        "cgd" => AlgorithmKind::Cgd,
        "ef21" => AlgorithmKind::Ef21,
        "safe_ef" => AlgorithmKind::SafeEf,
        other => {
            eprintln!("unknown counterexample {other:?} (cgd | ef21 | safe_ef)");
            return EXIT_CONFIG;
        }
    };
    let cfg = AlgorithmConfig {
        uplink: CompressorSpec::top_k(1),
        ef21_v0: if kind == AlgorithmKind::Ef21 {
            problem.ef21_estimator_init.clone()
        } else {
            None
        },
        ..AlgorithmConfig::new(kind, gamma, t)
    };
    let rec = algorithms::run(&problem, &cfg, &SimOptions::default()).unwrap();

    let closed_form: Box<dyn Fn(usize) -> f64> = match kind {
        AlgorithmKind::Cgd => Box::new(move |_| 1.0 + gamma / 2.0),
        AlgorithmKind::Ef21 => Box::new(move |step| 1.0 + gamma / 2.0 + step as f64 * gamma),
        _ => Box::new(|_| f64::NAN),
    };
    println!("{} on the two-dimensional l1 toy: T = {t}, gamma = {gamma:.6}", kind.name());
    println!("{:>6} {:>22} {:>22} {:>12}", "t", "measured gap", "closed form", "deviation");
    for &step in &[0usize, 1, 2, 10, 100, 500, 999] {
        let m = rec.f_gap[step];
        let cf = closed_form(step);
        if cf.is_nan() {
            println!("{step:>6} {m:>22.15} {:>22} {:>12}", "-", "-");
        } else {
            println!("{step:>6} {m:>22.15} {cf:>22.15} {:>12.2e}", (m - cf).abs());
        }
    }
    match kind {
        AlgorithmKind::Cgd | AlgorithmKind::Ef21 => {
            let tol = if kind == AlgorithmKind::Cgd { 1e-12 } else { 1e-9 };
            let worst = rec
                .f_gap
                .iter()
                .enumerate()
                .map(|(step, g)| (g - closed_form(step)).abs())
                .fold(0.0f64, f64::max);
            println!("max |measured − closed form| over all t: {worst:.3e} (tolerance {tol:.0e})");
            if worst <= tol {
                EXIT_OK
            } else {
                EXIT_FLAGGED
            }
        }
        _ => {
            let budget = 10.0 * problem.m_bound * problem.radius.unwrap() / (t as f64).sqrt();
            let gap = problem.f_mean(rec.output()) - problem.f_star.unwrap();
            let run_min = rec.min_f_gap();
            println!("gap at averaged output: {gap:.6} (budget 10·MR/√T = {budget:.6})");
            println!("running minimum gap: {run_min:.6}");
            if gap <= budget && run_min < 0.5 {
                EXIT_OK
            } else {
                EXIT_FLAGGED
            }
        }
    }
}
