use serde::{Deserialize, Serialize};

use super::HitRecord;
use crate::error::{Error, Result};

/// Equal-width bins on `[0, upper)` plus an overflow bucket for `y >= upper`.
/// Densities are normalised by the total count including overflow, so they
/// compare directly with a probability density on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub upper: f64,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        self.upper / self.counts.len() as f64
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        (w * i as f64, w * (i + 1) as f64)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.width() * (i as f64 + 0.5)
    }

    pub fn density(&self, i: usize) -> f64 {
        self.counts[i] as f64 / (self.total as f64 * self.width())
    }
}

/// Histogram on `[0, 1)`.
pub fn build_histogram(hits: &[HitRecord], bins: usize) -> Result<Histogram> {
    build_histogram_range(hits, bins, 1.0)
}

pub fn build_histogram_range(hits: &[HitRecord], bins: usize, upper: f64) -> Result<Histogram> {
    if bins < 4 {
        return Err(Error::config("bins", "need at least 4 bins"));
    }
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::config("histogram_upper", "must be positive and finite"));
    }
    if hits.is_empty() {
        return Err(Error::InsufficientData("no hits to histogram".into()));
    }
    let mut counts = vec![0u64; bins];
    let mut overflow = 0;
    let width = upper / bins as f64;
    for h in hits {
        if h.y >= upper {
            overflow += 1;
        } else {
            let i = ((h.y / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
    }
    Ok(Histogram { upper, counts, overflow, total: hits.len() as u64 })
}

/// Range that covers the bulk of a family density with parameter `a`:
/// 2.5 times its natural scale `(16 / (pi a^2))^{1/4}`, rounded up to
/// 1, 2 or 5 times a power of ten.
pub fn natural_upper(a: f64) -> f64 {
    let scale = 2.5 * (16.0 / (std::f64::consts::PI * a * a)).powf(0.25);
    let decade = 10f64.powf(scale.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * decade).find(|&u| u >= scale * (1.0 - 1e-12)).unwrap_or(10.0 * decade)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hits(ys: &[f64]) -> Vec<HitRecord> {
        ys.iter()
            .enumerate()
            .map(|(i, &y)| HitRecord { repetition_index: i as u64 + 1, h_i: 1e-4, y, t_hit: 1.0, branch: 1 })
            .collect()
    }

    #[test]
    fn counts_and_overflow() {
        let h = build_histogram_range(&hits(&[0.0, 0.1, 0.26, 0.99, 1.0, 3.0]), 4, 1.0).unwrap();
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.total, 6);
        assert_eq!(h.edges(1), (0.25, 0.5));
        assert!((h.density(0) - 2.0 / (6.0 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_histogram(&[], 10), Err(Error::InsufficientData(_))));
        assert!(matches!(build_histogram(&hits(&[0.5]), 3), Err(Error::Config { .. })));
    }

    #[test]
    fn natural_range() {
        // a = 8.22: scale 2.5 * (16 / (pi 67.57))^{1/4} = 1.31 -> 2
        assert_eq!(natural_upper(8.22), 2.0);
        let u = natural_upper(4.9e14);
        assert!(u > 2.5 * (16.0 / (std::f64::consts::PI * 4.9e14 * 4.9e14)).powf(0.25));
        assert!(u < 1e-6);
    }
}
