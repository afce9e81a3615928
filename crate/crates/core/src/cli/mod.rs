//! Command-line front end: `theory`, `sweep`, `precision-scan`,
//! `validate-oracle` and `trajectory`.
//!
//! Exit codes: 0 success, 2 configuration rejected (nothing is written),
//! 3 failure at run time.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiment::fit::{fit_a, mle, FitResult};
use crate::experiment::histogram::{build_histogram_range, natural_upper};
use crate::experiment::regression::{exponent_regression, precision_regression};
use crate::experiment::{run_sweep_with_workers, validate_oracle, SweepConfig, SweepResult};
use crate::numerics::PrecisionPolicy;
use crate::steppers::{run_trajectory, StepperKind, StopCondition, TrajectoryConfig};
use crate::theory::{crossing_sigma, hit_moments, predict, TheoryPrediction};
use config::{FileConfig, Overrides, RunConfig, Scan};
use output::{real, write_hits_csv, write_histogram_csv, write_json, write_table_csv, RunManifest};

pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

/// Largest number of rows a trajectory dump may hold.
pub const MAX_DUMP_ROWS: u64 = 10_000_000;

/// Significance level of the oracle verdict.
pub const ORACLE_ALPHA: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "saddle-lab", version, about = "Rounding-error randomness of fixed-step solvers near a saddle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Sweep worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub stepper: Option<StepperArg>,
    /// single, double or emulated:<p>
    #[arg(long, global = true)]
    pub precision: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepperArg {
    Euler,
    Rk4,
    Inject,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the predicted distribution parameters as JSON.
    Theory,
    /// Run a step-size sweep and fit the hitting distribution.
    Sweep,
    /// Sweep over several step sizes (scan_h) or precisions (scan_p).
    PrecisionScan,
    /// Compare a sweep with its noise-injection counterpart.
    ValidateOracle,
    /// Dump one trajectory.
    Trajectory,
}

/// A command error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

fn reject(error: Error) -> Failure {
    Failure { code: EXIT_REJECTED, error }
}

fn fail(error: Error) -> Failure {
    Failure { code: EXIT_FAILED, error }
}

pub type CmdResult = std::result::Result<(), Failure>;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_REJECTED } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(reject)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        seed: cli.seed,
        stepper: cli.stepper.map(|s| format!("{s:?}").to_lowercase()),
        precision: cli.precision.clone(),
    };
    let cfg = RunConfig::resolve(&file, &flags).map_err(reject)?;
    if cli.workers == Some(0) {
        return Err(reject(Error::config("workers", "need at least one worker")));
    }
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match cli.command {
        Command::Theory => cmd_theory(&cfg),
        Command::Sweep => cmd_sweep(&cfg, workers, &cli.out_dir),
        Command::PrecisionScan => cmd_precision_scan(&cfg, workers, &cli.out_dir),
        Command::ValidateOracle => cmd_validate_oracle(&cfg, workers, &cli.out_dir),
        Command::Trajectory => cmd_trajectory(&cfg, &cli.out_dir),
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn print_json<T: serde::Serialize>(value: &T) {
    let mut stdout = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut stdout, value).map_err(std::io::Error::from).and_then(|_| writeln!(stdout));
}

fn prepare_out_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| fail(Error::Io(format!("{}: {e}", dir.display()))))
}

/// Precisions to report predictions for: explicit values, the injection
/// precision, or the effective bracket of the arithmetic.
fn theory_precisions(cfg: &RunConfig) -> Vec<f64> {
    if let Some(ps) = &cfg.theory_p {
        return ps.clone();
    }
    match cfg.sweep.stepper {
        StepperKind::NoiseInjection { p, .. } => vec![p],
        _ => {
            let (lo, hi) = cfg.sweep.policy.effective_p_bracket();
            vec![lo, hi]
        }
    }
}

fn predictions(cfg: &RunConfig) -> Vec<TheoryPrediction> {
    theory_precisions(cfg).into_iter().map(|p| predict(&cfg.sweep.spec, cfg.sweep.base_h, p)).collect()
}

fn spec_json(sweep: &SweepConfig) -> serde_json::Value {
    json!({
        "lambda": sweep.spec.lambda,
        "mu": sweep.spec.mu,
        "phi": sweep.spec.phi,
        "x0": sweep.spec.x0_magnitude,
        "h": sweep.base_h,
        "theta": sweep.theta,
    })
}

pub fn cmd_theory(cfg: &RunConfig) -> CmdResult {
    let s = &cfg.sweep;
    if !(s.base_h > 0.0 && s.base_h.is_finite()) {
        return Err(reject(Error::config("h", "step size must be positive")));
    }
    let preds = predictions(cfg);
    let mut warnings = Vec::new();
    if preds.iter().all(|p| p.sigma_sq == 0.0) {
        let w = "sigma^2 = 0: the initial value lies on an eigenvector and no randomness is predicted";
        eprintln!("warning: {w}");
        warnings.push(w.to_string());
    }
    let crossing: Vec<serde_json::Value> = preds
        .iter()
        .map(|p| {
            let sigma = crossing_sigma(&s.spec, s.base_h, p.p, s.theta);
            let (mean, std) = hit_moments(s.spec.lambda, s.spec.mu, sigma);
            json!({ "p": p.p, "sigma": sigma, "mean": mean, "std": std })
        })
        .collect();
    let out = json!({
        "system": spec_json(s),
        "predictions": preds,
        "along_detection_line": crossing,
        "warnings": warnings,
    });
    print_json(&out);
    Ok(())
}

fn fit_sweep(result: &SweepResult, upper: Option<f64>) -> Result<(crate::experiment::Histogram, FitResult)> {
    let ys = result.distances();
    if ys.is_empty() {
        return Err(Error::InsufficientData(format!("no hits in {} repetitions", result.config.repetitions())));
    }
    let upper = upper.unwrap_or_else(|| natural_upper(mle(&ys)));
    let hist = build_histogram_range(&result.hits, result.config.bins, upper)?;
    let mut fit = fit_a(&result.hits, &hist)?;
    fit.n_no_hit = result.no_hits.len();
    Ok((hist, fit))
}

pub fn cmd_sweep(cfg: &RunConfig, workers: usize, out: &Path) -> CmdResult {
    cfg.sweep.validate().map_err(reject)?;
    prepare_out_dir(out)?;
    let result = run_sweep_with_workers(&cfg.sweep, workers).map_err(fail)?;
    write_hits_csv(&out.join("hits.csv"), &result.hits).map_err(fail)?;
    let mut manifest = RunManifest::new("sweep", &cfg.sweep);
    manifest.extra = json!({ "histogram_upper": cfg.histogram_upper, "workers": workers, "total_steps": result.total_steps });
    write_json(&out.join("manifest.json"), &manifest).map_err(fail)?;
    let (hist, fit) = fit_sweep(&result, cfg.histogram_upper).map_err(fail)?;
    write_histogram_csv(&out.join("histogram.csv"), &hist, Some(fit.a_mle)).map_err(fail)?;
    let doc = json!({
        "fit": fit,
        "a_normalized": fit.a_mle / cfg.sweep.base_h.sqrt(),
        "histogram_upper": hist.upper,
        "plus_branch_fraction": result.plus_fraction(),
        "n_diverged": result.diverged.len(),
        "no_hits": result.no_hits,
        "theory": predictions(cfg),
    });
    write_json(&out.join("fit.json"), &doc).map_err(fail)?;
    eprintln!(
        "{} hits, {} without hit; a = {:.6e} +- {:.2e}, a h^-1/2 = {:.6e}",
        fit.n_hits,
        fit.n_no_hit,
        fit.a_mle,
        fit.a_stderr,
        fit.a_mle / cfg.sweep.base_h.sqrt()
    );
    Ok(())
}

pub fn cmd_precision_scan(cfg: &RunConfig, workers: usize, out: &Path) -> CmdResult {
    let base = cfg.sweep;
    let points: Vec<(f64, f64, SweepConfig)> = match &cfg.scan {
        None => return Err(reject(Error::config("scan_h", "precision-scan needs scan_h or scan_p"))),
        Some(Scan::StepSizes(hs)) => {
            if hs.len() < 4 {
                return Err(reject(Error::config("scan_h", format!("{} step sizes, need at least 4", hs.len()))));
            }
            let p = theory_precisions(cfg)[0];
            hs.iter().map(|&h| (h, p, SweepConfig { base_h: h, ..base })).collect()
        }
        Some(Scan::Precisions(ps)) => {
            if ps.len() < 3 {
                return Err(reject(Error::config("scan_p", format!("{} precisions, need at least 3", ps.len()))));
            }
            ps.iter()
                .map(|&p| {
                    let point = match base.stepper {
                        StepperKind::NoiseInjection { seed, .. } => {
                            SweepConfig { stepper: StepperKind::NoiseInjection { p: p as f64, seed }, ..base }
                        }
                        _ => SweepConfig { policy: PrecisionPolicy::Emulated { p }, ..base },
                    };
                    (base.base_h, p as f64, point)
                })
                .collect()
        }
    };
    for (_, _, point) in &points {
        point.validate().map_err(reject)?;
    }
    prepare_out_dir(out)?;
    let mut rows = Vec::new();
    let mut fitted = Vec::new();
    let mut gaps = Vec::new();
    for (h, p, point) in &points {
        match run_sweep_with_workers(point, workers).and_then(|r| fit_sweep(&r, cfg.histogram_upper)) {
            Ok((_, fit)) => {
                eprintln!("h = {h:e}, p = {p}: a = {:.6e} +- {:.2e}", fit.a_mle, fit.a_stderr);
                rows.push(vec![
                    real(*h),
                    real(*p),
                    real(fit.a_mle),
                    real(fit.a_stderr),
                    fit.n_hits.to_string(),
                    fit.n_no_hit.to_string(),
                    "ok".into(),
                ]);
                fitted.push((*h, *p, fit.a_mle));
            }
            Err(e) => {
                eprintln!("h = {h:e}, p = {p}: {e}");
                rows.push(vec![real(*h), real(*p), "nan".into(), "nan".into(), "0".into(), "0".into(), "failed".into()]);
                gaps.push(json!({ "h": h, "p": p, "error": e.to_string() }));
            }
        }
    }
    write_table_csv(&out.join("scan.csv"), "h,p,a,a_stderr,n_hits,n_no_hit,status", &rows).map_err(fail)?;
    let mut manifest = RunManifest::new("precision-scan", &base);
    manifest.extra = json!({ "scan": points.iter().map(|(h, p, _)| json!({ "h": h, "p": p })).collect::<Vec<_>>() });
    write_json(&out.join("manifest.json"), &manifest).map_err(fail)?;
    let regression = match &cfg.scan {
        Some(Scan::StepSizes(_)) => {
            let law = exponent_regression(&fitted.iter().map(|f| (f.0, f.2)).collect::<Vec<_>>()).map_err(fail)?;
            json!({ "kind": "step_size", "model": "a = exp(intercept) h^slope", "slope": law.slope,
                    "intercept": law.intercept, "r_squared": law.r_squared, "points": law.n, "gaps": gaps })
        }
        _ => {
            let (slope, intercept) =
                precision_regression(&fitted.iter().map(|f| (f.1, f.2)).collect::<Vec<_>>()).map_err(fail)?;
            json!({ "kind": "precision", "model": "log2 a = intercept + slope p", "slope": slope,
                    "intercept": intercept, "points": fitted.len(), "gaps": gaps })
        }
    };
    eprintln!("slope = {}", regression["slope"]);
    write_json(&out.join("regression.json"), &regression).map_err(fail)?;
    Ok(())
}

pub fn cmd_validate_oracle(cfg: &RunConfig, workers: usize, out: &Path) -> CmdResult {
    let native = cfg.sweep;
    let injected = SweepConfig {
        stepper: StepperKind::NoiseInjection { p: cfg.oracle_p, seed: native.master_seed },
        policy: PrecisionPolicy::NativeDouble,
        ..native
    };
    native.validate().map_err(reject)?;
    injected.validate().map_err(reject)?;
    prepare_out_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| fail(Error::Sweep(e.to_string())))?;
    let report = pool.install(|| validate_oracle(&native, &injected)).map_err(fail)?;
    let consistent = report.p_value > ORACLE_ALPHA;
    let doc = json!({
        "report": report,
        "alpha": ORACLE_ALPHA,
        "verdict": if consistent { "consistent" } else { "inconsistent" },
        "native": { "stepper": native.stepper, "precision": native.policy.to_string() },
        "injected_p": cfg.oracle_p,
    });
    write_json(&out.join("oracle.json"), &doc).map_err(fail)?;
    let mut manifest = RunManifest::new("validate-oracle", &native);
    manifest.extra = json!({ "oracle_p": cfg.oracle_p, "workers": workers });
    write_json(&out.join("manifest.json"), &manifest).map_err(fail)?;
    eprintln!("KS D = {:.5}, p-value = {:.4e}: {}", report.ks_stat, report.p_value, doc["verdict"]);
    Ok(())
}

pub fn cmd_trajectory(cfg: &RunConfig, out: &Path) -> CmdResult {
    let s = &cfg.sweep;
    let traj = TrajectoryConfig::new(s.stepper, s.policy, s.base_h, s.t_max, s.spec);
    traj.validate().map_err(reject)?;
    if traj.max_steps() / cfg.dump_every > MAX_DUMP_ROWS {
        return Err(reject(Error::config(
            "dump_every",
            format!("{} steps would give more than {MAX_DUMP_ROWS} rows; raise dump_every", traj.max_steps()),
        )));
    }
    prepare_out_dir(out)?;
    let path = out.join("trajectory.csv");
    let file = File::create(&path).map_err(|e| fail(Error::Io(format!("{}: {e}", path.display()))))?;
    let mut w = BufWriter::new(file);
    let mut write_err: Option<std::io::Error> = None;
    let _ = writeln!(w, "step_index,t,c1,c2").map_err(|e| write_err = Some(e));
    let every = cfg.dump_every;
    let mut obs = |n: u64, t: f64, x: crate::numerics::Vec2| {
        if n.is_multiple_of(every) && write_err.is_none() {
            if let Err(e) = writeln!(w, "{n},{},{},{}", real(t), real(x.c1), real(x.c2)) {
                write_err = Some(e);
            }
        }
    };
    let outcome = run_trajectory(&traj, StopCondition::LineHit { theta: s.theta }, Some(&mut obs)).map_err(fail)?;
    if let Some(e) = write_err {
        return Err(fail(Error::Io(format!("{}: {e}", path.display()))));
    }
    w.flush().map_err(|e| fail(Error::Io(format!("{}: {e}", path.display()))))?;
    let mut manifest = RunManifest::new("trajectory", s);
    manifest.extra = json!({ "dump_every": every, "outcome": outcome });
    write_json(&out.join("manifest.json"), &manifest).map_err(fail)?;
    print_json(&outcome);
    Ok(())
}
