//! Flat TOML run configuration. Every key is optional; missing keys take the
//! reference values. Command-line flags override file values.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::SweepConfig;
use crate::numerics::PrecisionPolicy;
use crate::steppers::StepperKind;
use crate::system::SaddleSpec;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PrecisionBits {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub phi: Option<Angle>,
    pub x0: Option<f64>,
    pub h: Option<f64>,
    pub delta_h: Option<f64>,
    pub k: Option<u64>,
    pub theta: Option<Angle>,
    pub stepper: Option<String>,
    pub precision: Option<String>,
    pub inject_p: Option<f64>,
    pub seed: Option<u64>,
    pub bins: Option<usize>,
    pub t_max: Option<f64>,
    pub histogram_upper: Option<f64>,
    /// Precision for `theory`; a list evaluates each entry.
    pub p: Option<PrecisionBits>,
    pub scan_h: Option<Vec<f64>>,
    pub scan_p: Option<Vec<u32>>,
    /// Injection precision of the oracle sweep.
    pub oracle_p: Option<f64>,
    pub dump_every: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub stepper: Option<String>,
    pub precision: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scan {
    StepSizes(Vec<f64>),
    Precisions(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sweep: SweepConfig,
    pub histogram_upper: Option<f64>,
    /// Explicit `p` values for `theory`, if any.
    pub theory_p: Option<Vec<f64>>,
    pub scan: Option<Scan>,
    pub oracle_p: f64,
    pub dump_every: u64,
}

/// Parses `"pi/5"`, `"3pi/4"`, `"2*pi/5"`, `"-pi"`, `"pi"` or a plain number.
pub fn parse_angle(field: &str, text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    let bad = || Error::config(field, format!("cannot parse angle {text:?}; use radians or a multiple of pi like \"pi/5\""));
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let (coef, rest) = (&s[..pos], &s[pos + 2..]);
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let den = match rest {
        "" => 1.0,
        r => r.strip_prefix('/').and_then(|d| d.parse::<f64>().ok()).filter(|d| *d != 0.0).ok_or_else(bad)?,
    };
    Ok(coef * std::f64::consts::PI / den)
}

fn angle(field: &str, a: &Option<Angle>, default: f64) -> Result<f64> {
    match a {
        None => Ok(default),
        Some(Angle::Radians(x)) => Ok(*x),
        Some(Angle::Expr(s)) => parse_angle(field, s),
    }
}

fn stepper(name: &str, inject_p: f64, seed: u64) -> Result<StepperKind> {
    match name.trim() {
        "euler" => Ok(StepperKind::Euler),
        "rk4" => Ok(StepperKind::Rk4),
        "inject" => Ok(StepperKind::NoiseInjection { p: inject_p, seed }),
        other => Err(Error::config("stepper", format!("expected euler, rk4 or inject, got {other:?}"))),
    }
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Self> {
        let base = SweepConfig::reference();
        let spec = SaddleSpec::new(
            file.lambda.unwrap_or(base.spec.lambda),
            file.mu.unwrap_or(base.spec.mu),
            angle("phi", &file.phi, base.spec.phi)?,
            file.x0.unwrap_or(base.spec.x0_magnitude),
        )?;
        let seed = flags.seed.or(file.seed).unwrap_or(base.master_seed);
        let stepper_name = flags.stepper.as_deref().or(file.stepper.as_deref()).unwrap_or("euler");
        let stepper = stepper(stepper_name, file.inject_p.unwrap_or(53.0), seed)?;
        let policy = match flags.precision.as_deref().or(file.precision.as_deref()) {
            Some(p) => p.parse::<PrecisionPolicy>()?,
            None => base.policy,
        };
        if matches!(stepper, StepperKind::NoiseInjection { .. }) && policy != PrecisionPolicy::NativeDouble {
            return Err(Error::config("precision", "noise injection runs in full double precision"));
        }
        let sweep = SweepConfig {
            base_h: file.h.unwrap_or(base.base_h),
            delta_h: file.delta_h.unwrap_or(base.delta_h),
            k: file.k.unwrap_or(base.k),
            theta: angle("theta", &file.theta, base.theta)?,
            spec,
            stepper,
            policy,
            bins: file.bins.unwrap_or(base.bins),
            master_seed: seed,
            t_max: file.t_max.unwrap_or(base.t_max),
        };
        let scan = match (&file.scan_h, &file.scan_p) {
            (Some(_), Some(_)) => return Err(Error::config("scan_h", "give either scan_h or scan_p, not both")),
            (Some(h), None) => Some(Scan::StepSizes(h.clone())),
            (None, Some(p)) => Some(Scan::Precisions(p.clone())),
            (None, None) => None,
        };
        let theory_p = file.p.as_ref().map(|p| match p {
            PrecisionBits::One(p) => vec![*p],
            PrecisionBits::Many(ps) => ps.clone(),
        });
        if let Some(ps) = &theory_p {
            if ps.is_empty() || ps.iter().any(|p| !(*p > 0.0)) {
                return Err(Error::config("p", "precision values must be positive"));
            }
        }
        if let Some(u) = file.histogram_upper {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::config("histogram_upper", "must be positive and finite"));
            }
        }
        let oracle_p = file.oracle_p.unwrap_or(23.5);
        if !(oracle_p > 0.0) {
            return Err(Error::config("oracle_p", "must be positive"));
        }
        let dump_every = file.dump_every.unwrap_or(1);
        if dump_every == 0 {
            return Err(Error::config("dump_every", "must be at least 1"));
        }
        Ok(RunConfig { sweep, histogram_upper: file.histogram_upper, theory_p, scan, oracle_p, dump_every })
    }
}
