use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = exp(intercept) x^slope`, fitted by least squares on logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Straight-line least squares; returns `(slope, intercept, r^2)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Needs at least four points spanning 1.5 decades in `x`.
pub fn exponent_regression(points: &[(f64, f64)]) -> Result<PowerLaw> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("{} points, need at least 4", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain("power-law regression needs positive finite data".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo) / std::f64::consts::LN_10 < 1.5 {
        return Err(Error::InsufficientData(format!(
            "x spans {:.2} decades, need at least 1.5",
            (hi - lo) / std::f64::consts::LN_10
        )));
    }
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(PowerLaw { slope, intercept, r_squared, n: points.len() })
}

/// Slope of `log2 a` against `p`; needs three or more distinct `p`.
pub fn precision_regression(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points, need at least 3", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::InsufficientData("all precisions are equal".into()));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let (slope, intercept, _) = ols(&xs, &ys);
    Ok((slope, intercept))
}
