use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use relheat::evolve;
use relheat::grid::{self, fmt17};
use relheat::report::RunReport;
use relheat::stationary::{self, HarmonicSolution};
use relheat::verify::{self, CheckResult, ScorecardConfig};

use crate::config::{self, Equation, ExperimentConfig};
use crate::manifest::Manifest;
use crate::CliError;

/// Which experiment a sweep repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepRun {
    Evolve,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    /// Full-resolution scorecard.
    All,
    /// Coarse smoke run of the same checks.
    Quick,
}

pub fn run_evolve(cfg: &ExperimentConfig, dir: &Path) -> Result<(RunReport, Vec<PathBuf>), CliError> {
    let grid = cfg.grid()?;
    let bc = cfg.boundary(&grid)?;
    let params = cfg.params()?;
    let (u0, v0) = cfg.initial_data(&grid)?;
    let time = cfg.time_config();
    let report = match cfg.equation {
        Equation::Relativistic => evolve::evolve(&u0, &bc, &params, &time),
        Equation::Heat => evolve::evolve_classical_heat(&u0, &bc, &time),
        Equation::Telegraph => evolve::evolve_telegraph(&u0, &v0, &bc, &params, &time),
    }
    .map_err(CliError::from_run)?;
    let paths = report.write(dir, "run").map_err(CliError::from_run)?;
    Ok((report, paths))
}

pub struct StationaryOutcome {
    pub solution: HarmonicSolution,
    pub checks: Vec<CheckResult>,
    pub paths: Vec<PathBuf>,
}

/// Solve, then probe the solution: strong maximum principle, flux balance
/// on `stationary.balls` random balls drawn from `seed`, and (1D) the
/// shooting oracle when it resolves the same data.
pub fn run_stationary(cfg: &ExperimentConfig, dir: &Path) -> Result<StationaryOutcome, CliError> {
    let problem = cfg.stationary_problem()?;
    let params = cfg.params()?;
    let solution = stationary::solve_harmonic(&problem, &params).map_err(CliError::from_run)?;
    let grid = problem.grid;
    let h = grid.h_min();
    let mut checks = vec![stationary::verify_strong_max(&solution.field, &solution.bc)];

    let u = solution.field.map(f64::exp).map_err(CliError::from_run)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    let mut probed = 0usize;
    let mut attempts = 0usize;
    let span = (0..grid.dim()).map(|a| grid.upper(a) - grid.lower(a)).fold(f64::INFINITY, f64::min);
    while probed < cfg.stationary.balls && attempts < 100 * cfg.stationary.balls.max(1) {
        attempts += 1;
        let r = rng.gen_range(2.0 * h..(0.3 * span).max(2.5 * h));
        let centre: Vec<f64> = (0..grid.dim()).map(|a| rng.gen_range(grid.lower(a)..grid.upper(a))).collect();
        match grid::flux_balance_sphere(&u, &centre, r, &params) {
            Ok(f) => {
                worst = worst.max(f.abs());
                probed += 1;
            }
            Err(relheat::Error::BallOutsideDomain) => continue,
            Err(e) => return Err(CliError::from_run(e)),
        }
    }
    checks.push(CheckResult::new(
        "flux_balance",
        worst,
        10.0 * solution.tolerance,
        BTreeMap::from([("balls".into(), json!(probed)), ("seed".into(), json!(cfg.seed))]),
    ));

    if let (1, relheat::BoundaryCondition::Dirichlet(d)) = (grid.dim(), &solution.bc) {
        let interval = (grid.lower(0), grid.upper(0));
        if let Ok(oracle) = stationary::shoot_1d_on(interval, d.side(0)[0], d.side(1)[0], &params, 100_000) {
            let err = (0..grid.len())
                .map(|i| (solution.field.values()[i] - oracle.eval(grid.axis_center(0, i))).abs())
                .fold(0.0, f64::max);
            checks.push(CheckResult::new(
                "oracle_agreement",
                err,
                10.0 * h * h,
                BTreeMap::from([("shooting_steps".into(), json!(100_000))]),
            ));
        }
    }

    let mut paths = solution.write(dir, "harmonic").map_err(CliError::from_run)?;
    let checks_path = dir.join("checks.json");
    let text = verify::scorecard_json(&checks).map_err(CliError::from_run)?;
    std::fs::write(&checks_path, text).map_err(|e| CliError::io(&checks_path, e))?;
    paths.push(checks_path);
    Ok(StationaryOutcome { solution, checks, paths })
}

fn failed_names(checks: &[CheckResult]) -> Option<String> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed && !c.exploratory).map(|c| c.name.as_str()).collect();
    (!failed.is_empty()).then(|| failed.join(", "))
}

pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dir = cfg.output_path();
    let mut manifest = Manifest::new(&dir, "evolve")?;
    let key = manifest.add_config("", cfg)?;
    let (report, paths) = run_evolve(cfg, &dir)?;
    manifest.add_files(&paths, &key)?;
    manifest.finish()?;
    println!(
        "evolve: {} steps of dt = {:.3e}, max {:.6} min {:.6}, {} clipped cells; {} files in {}",
        report.steps,
        report.dt,
        report.global_max,
        report.global_min,
        report.clip_count,
        paths.len() + 2,
        dir.display()
    );
    Ok(())
}

pub fn cmd_stationary(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dir = cfg.output_path();
    let mut manifest = Manifest::new(&dir, "stationary")?;
    let key = manifest.add_config("", cfg)?;
    let out = run_stationary(cfg, &dir)?;
    manifest.add_files(&out.paths, &key)?;
    manifest.finish()?;
    println!(
        "stationary: {} Newton iterations, residual {:.3e}",
        out.solution.iterations(),
        out.solution.residual
    );
    print!("{}", verify::format_table(&out.checks));
    match failed_names(&out.checks) {
        Some(names) => Err(CliError::Check(names)),
        None => Ok(()),
    }
}

pub fn cmd_verify(suite: Suite, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let card = match suite {
        Suite::All => cfg.scorecard(),
        Suite::Quick => ScorecardConfig {
            c: cfg.c,
            ..ScorecardConfig::quick()
        },
    };
    let dir = cfg.output_path();
    let mut manifest = Manifest::new(&dir, "verify")?;
    let key = manifest.add_config("", cfg)?;
    let results = verify::run_scorecard(&card).map_err(CliError::from_run)?;
    let path = dir.join("scorecard.json");
    let text = verify::scorecard_json(&results).map_err(CliError::from_run)?;
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    manifest.add_file(&path, &key)?;
    manifest.finish()?;
    print!("{}", verify::format_table(&results));
    match failed_names(&results) {
        Some(names) => Err(CliError::Check(names)),
        None => Ok(()),
    }
}

/// Subdirectory name for one sweep point.
fn point_dir(axis: &str, value: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|ch| if ch.is_ascii_alphanumeric() || "-_.+".contains(ch) { ch } else { '_' })
            .collect()
    };
    format!("{}={}", clean(axis), clean(value))
}

enum PointResult {
    Evolve(RunReport, Vec<PathBuf>),
    Stationary(StationaryOutcome),
}

/// Runs the same experiment once per value of `axis` (any key accepted by
/// `--set`). Every point is validated before any runs; points run
/// concurrently, each in its own subdirectory, and the manifest is written
/// once all have finished.
pub fn cmd_sweep(base: &toml::Table, axis: &str, values: &[String], run: SweepRun) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config("--values: at least one value is required".into()));
    }
    let base_cfg = config::from_table(base.clone())?;
    let mut points = Vec::new();
    for v in values {
        let mut table = base.clone();
        config::apply_override(&mut table, &format!("{axis}={v}"))?;
        let cfg = config::from_table(table)?;
        points.push((point_dir(axis, v), cfg));
    }
    let dir = base_cfg.output_path();
    let mut manifest = Manifest::new(&dir, "sweep")?;
    let base_key = manifest.add_config("", &base_cfg)?;

    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut results: Vec<Result<PointResult, CliError>> = Vec::with_capacity(points.len());
    for chunk in points.chunks(workers) {
        let batch: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(sub, cfg)| {
                    let target = dir.join(sub);
                    s.spawn(move || match run {
                        SweepRun::Evolve => run_evolve(cfg, &target).map(|(r, p)| PointResult::Evolve(r, p)),
                        SweepRun::Stationary => run_stationary(cfg, &target).map(PointResult::Stationary),
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Solver("sweep worker panicked".into()))))
                .collect()
        });
        results.extend(batch);
    }

    let mut summary = match run {
        SweepRun::Evolve => format!("{axis},dt,steps,global_max,global_min,final_mass,clip_count\n"),
        SweepRun::Stationary => format!("{axis},iterations,residual,checks_passed\n"),
    };
    let mut failures = Vec::new();
    for ((sub, cfg), (value, result)) in points.iter().zip(values.iter().zip(results)) {
        let key = manifest.add_config(sub, cfg)?;
        match result? {
            PointResult::Evolve(report, paths) => {
                manifest.add_files(&paths, &key)?;
                let _ = writeln!(
                    summary,
                    "{value},{},{},{},{},{},{}",
                    fmt17(report.dt),
                    report.steps,
                    fmt17(report.global_max),
                    fmt17(report.global_min),
                    fmt17(grid::mass(report.final_field())),
                    report.clip_count
                );
            }
            PointResult::Stationary(out) => {
                manifest.add_files(&out.paths, &key)?;
                let passed = verify::all_gating_passed(&out.checks);
                if let Some(names) = failed_names(&out.checks) {
                    failures.push(format!("{sub}: {names}"));
                }
                let _ = writeln!(
                    summary,
                    "{value},{},{},{passed}",
                    out.solution.iterations(),
                    fmt17(out.solution.residual)
                );
            }
        }
    }
    let summary_path = dir.join("sweep.csv");
    std::fs::write(&summary_path, &summary).map_err(|e| CliError::io(&summary_path, e))?;
    manifest.add_file(&summary_path, &base_key)?;
    manifest.finish()?;
    print!("{summary}");
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}
