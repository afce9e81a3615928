//! Comparing native-rounding sweeps with the noise-injection oracle.

use serde::{Deserialize, Serialize};

use super::{run_sweep, SweepConfig, SweepResult};
use crate::error::{Error, Result};
use crate::steppers::StepperKind;

pub const MIN_ORACLE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub ks_stat: f64,
    pub p_value: f64,
    pub n_native: usize,
    pub n_injected: usize,
    pub mean_native: f64,
    pub mean_injected: f64,
}

/// Kolmogorov survival function `Q(t) = 2 sum (-1)^{j-1} exp(-2 j^2 t^2)`.
fn kolmogorov_q(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * t * t).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    (d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Compares two completed sweeps.
pub fn compare_sweeps(native: &SweepResult, injected: &SweepResult) -> Result<OracleReport> {
    let (x, y) = (native.distances(), injected.distances());
    for (name, v) in [("native", &x), ("injected", &y)] {
        if v.len() < MIN_ORACLE_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "{name} sweep has {} hits, need at least {MIN_ORACLE_SAMPLES}",
                v.len()
            )));
        }
    }
    let (ks_stat, p_value) = ks_two_sample(&x, &y);
    Ok(OracleReport {
        ks_stat,
        p_value,
        n_native: x.len(),
        n_injected: y.len(),
        mean_native: mean(&x),
        mean_injected: mean(&y),
    })
}

/// Runs a sweep and its noise-injection counterpart on the same system and
/// step-size schedule, then compares the hitting distributions. The first
/// sweep is normally native rounding but may itself be injected.
pub fn validate_oracle(native: &SweepConfig, injected: &SweepConfig) -> Result<OracleReport> {
    if !matches!(injected.stepper, StepperKind::NoiseInjection { .. }) {
        return Err(Error::config("stepper", "the oracle sweep must use noise injection"));
    }
    if native.spec != injected.spec
        || native.base_h != injected.base_h
        || native.delta_h != injected.delta_h
        || native.k != injected.k
        || native.theta != injected.theta
    {
        return Err(Error::config("oracle", "native and injected sweeps must share system and step-size schedule"));
    }
    compare_sweeps(&run_sweep(native)?, &run_sweep(injected)?)
}
