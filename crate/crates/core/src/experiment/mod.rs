//! The step-size sweep: `L = 2k + 1` trajectories with step sizes
//! `h_i = h + dh (i - 1 - k)`, each run until it first crosses the detection
//! lines, followed by histogramming, fitting and validation.

pub mod detect;
pub mod fit;
pub mod histogram;
pub mod oracle;
pub mod regression;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::PrecisionPolicy;
use crate::steppers::{run_trajectory, StepperKind, StopCondition, TrajectoryConfig, DEFAULT_STEP_BUDGET};
use crate::system::SaddleSpec;

pub use detect::{detect_hit, Crossing};
pub use fit::{fit_a, FitResult};
pub use histogram::{build_histogram, build_histogram_range, Histogram};
pub use oracle::{ks_two_sample, validate_oracle, OracleReport};
pub use regression::{exponent_regression, PowerLaw};

/// Largest step size for which enough rounding errors accumulate.
pub const MAX_BASE_H: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base_h: f64,
    pub delta_h: f64,
    pub k: u64,
    /// Detection-line angle relative to the eigenbasis.
    pub theta: f64,
    pub spec: SaddleSpec,
    pub stepper: StepperKind,
    pub policy: PrecisionPolicy,
    pub bins: usize,
    /// Seeds the injection streams; each repetition uses stream `i`.
    pub master_seed: u64,
    pub t_max: f64,
}

impl SweepConfig {
    /// The reference configuration: Euler in double precision, `h = 1e-4`,
    /// `dh = 1e-10`, `k = 10^4`, `phi = pi/5`, `lambda = mu = 1`.
    pub fn reference() -> Self {
        SweepConfig {
            base_h: 1e-4,
            delta_h: 1e-10,
            k: 10_000,
            theta: std::f64::consts::FRAC_PI_4,
            spec: SaddleSpec::symmetric(std::f64::consts::PI / 5.0),
            stepper: StepperKind::Euler,
            policy: PrecisionPolicy::NativeDouble,
            bins: 50,
            master_seed: 0,
            t_max: 60.0,
        }
    }

    pub fn repetitions(&self) -> u64 {
        2 * self.k + 1
    }

    /// Relative resolution of the arithmetic that stores `h_i`.
    fn step_resolution(&self) -> f64 {
        match self.stepper {
            StepperKind::NoiseInjection { .. } => f64::EPSILON,
            _ => self.policy.epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.policy.validate()?;
        if !(self.base_h > 0.0 && self.base_h.is_finite()) {
            return Err(Error::config("h", "step size must be positive"));
        }
        if self.base_h > MAX_BASE_H {
            return Err(Error::config(
                "h",
                format!(
                    "h = {} > {MAX_BASE_H}: too few rounding errors accumulate and the hitting \
                     distribution departs from the Gaussian-driven law",
                    self.base_h
                ),
            ));
        }
        if !(self.delta_h > 0.0 && self.delta_h.is_finite()) {
            return Err(Error::config("delta_h", "must be positive"));
        }
        if self.k == 0 {
            return Err(Error::config("k", "need at least one repetition on each side of h"));
        }
        if self.k as f64 * self.delta_h > self.base_h / 10.0 * (1.0 + 1e-12) {
            return Err(Error::config(
                "delta_h",
                format!(
                    "k * delta_h = {:e} must be much smaller than h (at most h/10 = {:e})",
                    self.k as f64 * self.delta_h,
                    self.base_h / 10.0
                ),
            ));
        }
        if self.delta_h / self.base_h < self.step_resolution() {
            return Err(Error::config(
                "delta_h",
                format!(
                    "delta_h / h = {:e} is below the numerical precision {:e}; the step sizes \
                     would not differ and no randomness would appear",
                    self.delta_h / self.base_h,
                    self.step_resolution()
                ),
            ));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config("theta", "must lie in (0, pi/2)"));
        }
        if self.bins < 4 {
            return Err(Error::config("bins", "need at least 4 bins"));
        }
        if let StepperKind::NoiseInjection { p, .. } = self.stepper {
            if p.is_nan() || p <= 0.0 {
                return Err(Error::config("inject_p", "noise precision must be positive"));
            }
        }
        if !(self.t_max > 0.0) {
            return Err(Error::config("t_max", "must be positive"));
        }
        let h_min = self.base_h - self.delta_h * self.k as f64;
        if (self.t_max / h_min).ceil() > DEFAULT_STEP_BUDGET as f64 {
            return Err(Error::config("t_max", format!("t_max / h exceeds the step budget {DEFAULT_STEP_BUDGET}")));
        }
        Ok(())
    }

    /// Stepper for one repetition; injection streams are keyed by `master_seed`.
    fn stepper(&self) -> StepperKind {
        match self.stepper {
            StepperKind::NoiseInjection { p, .. } => StepperKind::NoiseInjection { p, seed: self.master_seed },
            other => other,
        }
    }

    pub fn trajectory(&self, i: u64) -> Result<TrajectoryConfig> {
        let h = step_size_schedule(self, i)?;
        let mut t = TrajectoryConfig::new(self.stepper(), self.policy, h, self.t_max, self.spec);
        t.repetition = i;
        Ok(t)
    }
}

/// `h_i = h + dh (i - 1 - k)` for `i` in `1..=2k+1`.
pub fn step_size_schedule(cfg: &SweepConfig, i: u64) -> Result<f64> {
    if i == 0 || i > cfg.repetitions() {
        return Err(Error::config("repetition", format!("index {i} outside 1..={}", cfg.repetitions())));
    }
    let offset = i as i64 - 1 - cfg.k as i64;
    Ok(cfg.base_h + cfg.delta_h * offset as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub repetition_index: u64,
    pub h_i: f64,
    pub y: f64,
    pub t_hit: f64,
    pub branch: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoHitRecord {
    pub repetition_index: u64,
    pub h_i: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergedRecord {
    pub repetition_index: u64,
    pub h_i: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Ordered by repetition index.
    pub hits: Vec<HitRecord>,
    pub no_hits: Vec<NoHitRecord>,
    pub diverged: Vec<DivergedRecord>,
    pub total_steps: u64,
}

impl SweepResult {
    pub fn distances(&self) -> Vec<f64> {
        self.hits.iter().map(|h| h.y).collect()
    }

    /// Share of hits on the `+` branch.
    pub fn plus_fraction(&self) -> f64 {
        let plus = self.hits.iter().filter(|h| h.branch > 0).count();
        plus as f64 / self.hits.len().max(1) as f64
    }
}

enum Outcome {
    Hit(HitRecord),
    NoHit(NoHitRecord),
    Diverged(DivergedRecord),
}

fn run_repetition(cfg: &SweepConfig, i: u64) -> Result<(Outcome, u64)> {
    let traj = cfg.trajectory(i)?;
    let h_i = traj.h;
    match run_trajectory(&traj, StopCondition::LineHit { theta: cfg.theta }, None) {
        Ok(out) => {
            let rec = match out.hit {
                Some(hit) => Outcome::Hit(HitRecord {
                    repetition_index: i,
                    h_i,
                    y: hit.crossing.y,
                    t_hit: hit.t_hit,
                    branch: hit.crossing.branch,
                }),
                None => Outcome::NoHit(NoHitRecord { repetition_index: i, h_i, t_final: out.t_final }),
            };
            Ok((rec, out.steps))
        }
        Err(e @ Error::Divergence { step, .. }) => {
            Ok((Outcome::Diverged(DivergedRecord { repetition_index: i, h_i, message: e.to_string() }), step))
        }
        Err(e) => Err(e),
    }
}

/// Runs every repetition on the current rayon pool. The result depends only
/// on the configuration, not on scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let outcomes: Vec<(Outcome, u64)> =
        (1..=cfg.repetitions()).into_par_iter().map(|i| run_repetition(cfg, i)).collect::<Result<_>>()?;
    let mut result =
        SweepResult { config: *cfg, hits: Vec::new(), no_hits: Vec::new(), diverged: Vec::new(), total_steps: 0 };
    for (o, steps) in outcomes {
        result.total_steps += steps;
        match o {
            Outcome::Hit(r) => result.hits.push(r),
            Outcome::NoHit(r) => result.no_hits.push(r),
            Outcome::Diverged(r) => result.diverged.push(r),
        }
    }
    if result.diverged.len() as f64 > 0.01 * cfg.repetitions() as f64 {
        return Err(Error::Sweep(format!(
            "{} of {} repetitions diverged (first: {})",
            result.diverged.len(),
            cfg.repetitions(),
            result.diverged[0].message
        )));
    }
    Ok(result)
}

/// [`run_sweep`] on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(cfg: &SweepConfig, workers: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Sweep(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}
