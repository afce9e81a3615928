//! Fitting `f(x) = a x exp(-(pi/16) a^2 x^4)` to observed hitting distances.

use serde::{Deserialize, Serialize};

use super::{Histogram, HitRecord};
use crate::error::{Error, Result};
use crate::theory::{family_cdf, family_f};

/// Fewer hits than this give an unusable fit.
pub const MIN_FIT_HITS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a_mle: f64,
    /// Least-squares fit of the density to the histogram.
    pub a_lsq: f64,
    /// Asymptotic standard error of `a_mle`, `a / sqrt(2 n)`.
    pub a_stderr: f64,
    pub chi_sq: f64,
    pub dof: usize,
    pub ks_stat: f64,
    pub n_hits: usize,
    pub n_no_hit: usize,
}

/// Closed-form maximiser of the family likelihood:
/// `a^2 = 8 n / (pi sum x^4)`.
pub fn mle(ys: &[f64]) -> f64 {
    let s4: f64 = ys.iter().map(|y| y.powi(4)).sum();
    (8.0 * ys.len() as f64 / (std::f64::consts::PI * s4)).sqrt()
}

/// `sup |F_n - F|` against the family CDF.
pub fn ks_statistic(ys: &[f64], a: f64) -> f64 {
    let mut sorted = ys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &y)| {
        let f = family_cdf(y, a);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

fn lsq_objective(hist: &Histogram, a: f64) -> f64 {
    (0..hist.bins()).map(|i| (hist.density(i) - family_f(hist.center(i), a)).powi(2)).sum()
}

/// Golden-section search on `ln a` within a factor of 4 around `a0`.
fn lsq_fit(hist: &Histogram, a0: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a0.ln() - 4f64.ln(), a0.ln() + 4f64.ln());
    let s = |la: f64| lsq_objective(hist, la.exp());
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (s(x1), s(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = s(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = s(x2);
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Chi-square of the histogram against expected counts under `a`; empty
/// bins are skipped.
fn chi_square(hist: &Histogram, a: f64) -> (f64, usize) {
    let n = hist.total as f64;
    let mut chi = 0.0;
    let mut used = 0usize;
    for i in 0..hist.bins() {
        if hist.counts[i] == 0 {
            continue;
        }
        let (l, r) = hist.edges(i);
        let expected = n * (family_cdf(r, a) - family_cdf(l, a));
        if expected > 0.0 {
            chi += (hist.counts[i] as f64 - expected).powi(2) / expected;
            used += 1;
        }
    }
    (chi, used.saturating_sub(2))
}

pub fn fit_a(hits: &[HitRecord], hist: &Histogram) -> Result<FitResult> {
    if hits.len() < MIN_FIT_HITS {
        return Err(Error::InsufficientData(format!("{} hits, need at least {MIN_FIT_HITS}", hits.len())));
    }
    let ys: Vec<f64> = hits.iter().map(|h| h.y).collect();
    let first = ys[0];
    if ys.iter().all(|&y| y == first) {
        return Err(Error::Fit(format!("all {} hitting distances equal {first:e}", ys.len())));
    }
    let a_mle = mle(&ys);
    if !(a_mle.is_finite() && a_mle > 0.0) {
        return Err(Error::Fit(format!("maximum-likelihood estimate {a_mle} is not positive and finite")));
    }
    let (chi_sq, dof) = chi_square(hist, a_mle);
    Ok(FitResult {
        a_mle,
        a_lsq: lsq_fit(hist, a_mle),
        a_stderr: a_mle / (2.0 * ys.len() as f64).sqrt(),
        chi_sq,
        dof,
        ks_stat: ks_statistic(&ys, a_mle),
        n_hits: ys.len(),
        n_no_hit: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::histogram::{build_histogram_range, natural_upper};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// `y = |Z|^{1/2}` with `Z ~ N(0, sigma^2)` has the family law with
    /// `a = 4 / (sqrt(2 pi) sigma)`.
    fn draws(a: f64, n: usize, seed: u64) -> Vec<HitRecord> {
        let sigma = 4.0 / ((2.0 * std::f64::consts::PI).sqrt() * a);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| HitRecord {
                repetition_index: i as u64 + 1,
                h_i: 1e-4,
                y: normal.sample(&mut rng).abs().sqrt(),
                t_hit: 1.0,
                branch: 1,
            })
            .collect()
    }

    #[test]
    fn recovers_parameter() {
        for (a, seed) in [(7.0, 1), (4.9e14, 2), (0.3, 3)] {
            let hits = draws(a, 20_000, seed);
            let hist = build_histogram_range(&hits, 50, natural_upper(a)).unwrap();
            let fit = fit_a(&hits, &hist).unwrap();
            assert!(((fit.a_mle - a) / a).abs() < 4.0 * fit.a_stderr / a, "{fit:?}");
            assert!(((fit.a_lsq - a) / a).abs() < 0.05, "{fit:?}");
            assert!(fit.ks_stat < 0.015);
            // chi-square within a generous band of its degrees of freedom
            assert!(fit.chi_sq < fit.dof as f64 + 5.0 * (2.0 * fit.dof as f64).sqrt(), "{fit:?}");
        }
    }

    #[test]
    fn stderr_matches_spread() {
        let a = 2.0;
        let est: Vec<f64> = (0..200).map(|s| mle(&draws(a, 500, 100 + s).iter().map(|h| h.y).collect::<Vec<_>>())).collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
        let predicted = a / (2.0 * 500f64).sqrt();
        assert!((sd / predicted - 1.0).abs() < 0.15, "sd {sd} predicted {predicted}");
    }

    #[test]
    fn degenerate_data() {
        let mut hits = draws(1.0, 200, 5);
        let hist = build_histogram_range(&hits, 10, 3.0).unwrap();
        assert!(matches!(fit_a(&hits[..50], &hist), Err(Error::InsufficientData(_))));
        for h in &mut hits {
            h.y = 0.5;
        }
        assert!(matches!(fit_a(&hits, &hist), Err(Error::Fit(_))));
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // Quantiles of the family: y = (4 erfinv(u) / (sqrt(pi) a))^{1/2}
        let a = 3.0;
        let n = 1000;
        let ys: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (4.0 * statrs::function::erf::erf_inv(u) / (std::f64::consts::PI.sqrt() * a)).sqrt()
            })
            .collect();
        assert!(ks_statistic(&ys, a) <= 0.5 / n as f64 + 1e-9);
    }
}
