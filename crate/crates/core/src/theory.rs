//! Closed-form and quadrature predictions for the hitting distribution.
//!
//! Rounding errors seed the unstable direction with a Gaussian coefficient
//! `Z ~ N(0, sigma^2)`, `sigma^2 = sigma_inf^2 / h`. For `lambda = mu` the
//! hitting distance then follows `f(x) = a x exp(-(pi/16) a^2 x^4)` with
//! `a = 4 / (sqrt(2 pi) sigma)`, so `a h^{-1/2}` depends only on the
//! system and the precision `p`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numerics::{sin_cos, Vec2};
use crate::quadrature;
use crate::system::{GeneralSystem, SaddleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub p: f64,
    pub h: f64,
    pub sigma_inf_sq: f64,
    /// Variance of the Gaussian seeding the unstable direction, `sigma_inf^2 / h`.
    pub sigma_sq: f64,
    /// `None` unless `lambda = mu`.
    pub a_predicted: Option<f64>,
    /// `a_predicted * h^{-1/2}`.
    pub a_normalized: Option<f64>,
    /// Exponent of the hitting-distance scale in `sigma`, halved: `mu / (2 (lambda + mu))`.
    pub gamma: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// `(1 / (3 (lambda + mu))) 2^{-2p} |x0|^2 (cos(phi) sin(phi))^2`.
pub fn sigma_inf_sq_linear(spec: &SaddleSpec, p: f64) -> f64 {
    let (s, c) = sin_cos(spec.phi);
    // v_{1,1} v'_{2,1} = cos(phi) * (-sin(phi)).
    let proj = c * -s;
    (-2.0 * p).exp2() * spec.x0_magnitude.powi(2) * proj * proj / (3.0 * (spec.lambda + spec.mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    /// Bound on the integral beyond `t_cut`.
    pub tail_bound: f64,
    /// Error estimate of the quadrature over `[0, t_cut]`.
    pub quad_error: f64,
}

/// Reference integration step for states and variational matrices.
const REFERENCE_DT: f64 = 1e-3;

/// `sigma_inf^2 = int_0^inf e^{-2 lambda s} D_s a(x_s) D_s^T ds` by adaptive
/// quadrature on `[0, t_cut]` plus an analytic tail bound.
///
/// `quad_tol` is relative to the `2^{-2p}` scale of the integrand.
pub fn sigma_inf_sq_quadrature(
    system: &GeneralSystem,
    x0: Vec2,
    p: f64,
    t_cut: f64,
    quad_tol: f64,
) -> Result<QuadratureEstimate> {
    if !(t_cut > 0.0 && quad_tol > 0.0) {
        return Err(Error::config("t_cut", "t_cut and quad_tol must be positive"));
    }
    let (lambda, mu, eig) = system.eigen();
    let x_cut = reference_state(system, x0, t_cut);
    // |D_s| <= 2 and |x_s| <= |x_cut| e^{-mu (s - t_cut)} beyond the cut.
    let tail_unit = 4.0 * x_cut.dot(x_cut) / 3.0 * (-2.0 * lambda * t_cut).exp() / (2.0 * (lambda + mu));
    if tail_unit > quad_tol {
        return Err(Error::config(
            "t_cut",
            format!("tail bound {tail_unit:e} exceeds quad_tol {quad_tol:e}; increase t_cut"),
        ));
    }

    let mut failure = None;
    let integrand = |s: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let xs = reference_state(system, x0, s);
        match variational_limit(system, xs, lambda, eig.v2p, quad_tol) {
            Ok(d) => (-2.0 * lambda * s).exp() * (d.c1 * d.c1 * xs.c1 * xs.c1 + d.c2 * d.c2 * xs.c2 * xs.c2) / 3.0,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let r = quadrature::integrate(integrand, 0.0, t_cut, quad_tol * 1e-3, quad_tol, 4000);
    if let Some(e) = failure {
        return Err(e);
    }
    let scale = (-2.0 * p).exp2();
    Ok(QuadratureEstimate { value: r.value * scale, tail_bound: tail_unit * scale, quad_error: r.error * scale })
}

fn rk4_state(system: &GeneralSystem, x: Vec2, dt: f64) -> Vec2 {
    let k1 = system.field(x);
    let k2 = system.field(x.add(k1.scale(0.5 * dt)));
    let k3 = system.field(x.add(k2.scale(0.5 * dt)));
    let k4 = system.field(x.add(k3.scale(dt)));
    x.add(k1.add(k2.scale(2.0)).add(k3.scale(2.0)).add(k4).scale(dt / 6.0))
}

/// `phi_t(x0)` by RK4 with steps no longer than [`REFERENCE_DT`].
fn reference_state(system: &GeneralSystem, x0: Vec2, t: f64) -> Vec2 {
    let n = (t / REFERENCE_DT).ceil().max(1.0) as usize;
    let dt = t / n as f64;
    (0..n).fold(x0, |x, _| rk4_state(system, x, dt))
}

/// `lim_{t -> inf} e^{-lambda t} v2' grad(phi_t)(x)`, integrating the
/// variational equation `J' = Db(phi_t(x)) J`, `J(0) = I`, until the scaled
/// row changes by less than `tol` (relative) over one unit of time. Capped at
/// `t = 50 / lambda`.
pub fn variational_limit(system: &GeneralSystem, x: Vec2, lambda: f64, v2p: Vec2, tol: f64) -> Result<Vec2> {
    let horizon = 50.0 / lambda;
    let steps_per_unit = (1.0 / REFERENCE_DT).ceil() as usize;
    let dt = 1.0 / steps_per_unit as f64;
    // Track w = e^{-lambda t} v2' J, which obeys w' = w (Db - lambda I), along x(t).
    let mut w = v2p;
    let mut state = x;
    let mut t = 0.0;
    let deriv = |state: Vec2, w: Vec2| -> (Vec2, Vec2) {
        let jac = system.jacobian(state);
        let wj = Vec2::new(w.c1 * jac.m[0][0] + w.c2 * jac.m[1][0], w.c1 * jac.m[0][1] + w.c2 * jac.m[1][1]);
        (system.field(state), wj)
    };
    loop {
        let before = w;
        for _ in 0..steps_per_unit {
            // RK4 on (x, w) with w' = w Db - lambda w.
            let f = |s: Vec2, w: Vec2| {
                let (fx, wj) = deriv(s, w);
                (fx, wj.sub(w.scale(lambda)))
            };
            let (a1, b1) = f(state, w);
            let (a2, b2) = f(state.add(a1.scale(0.5 * dt)), w.add(b1.scale(0.5 * dt)));
            let (a3, b3) = f(state.add(a2.scale(0.5 * dt)), w.add(b2.scale(0.5 * dt)));
            let (a4, b4) = f(state.add(a3.scale(dt)), w.add(b3.scale(dt)));
            state = state.add(a1.add(a2.scale(2.0)).add(a3.scale(2.0)).add(a4).scale(dt / 6.0));
            w = w.add(b1.add(b2.scale(2.0)).add(b3.scale(2.0)).add(b4).scale(dt / 6.0));
        }
        t += 1.0;
        let residual = w.sub(before).norm() / w.norm().max(f64::MIN_POSITIVE);
        if residual < tol {
            return Ok(w);
        }
        if t >= horizon || !w.is_finite() {
            return Err(Error::NonConvergence { horizon, residual });
        }
    }
}

/// Density of `|Z|^{mu / (lambda + mu)}` for `Z ~ N(0, sigma^2)`.
pub fn hitting_density(y: f64, lambda: f64, mu: f64, sigma: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let k = 2.0 * (lambda + mu) / mu;
    2.0 * (lambda + mu) / ((2.0 * std::f64::consts::PI).sqrt() * sigma * mu)
        * y.powf(lambda / mu)
        * (-y.powf(k) / (2.0 * sigma * sigma)).exp()
}

/// CDF of `|Z|^{mu / (lambda + mu)}`: `erf(y^{(lambda + mu)/mu} / (sigma sqrt 2))`.
pub fn hitting_cdf(y: f64, lambda: f64, mu: f64, sigma: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    erf(y.powf((lambda + mu) / mu) / (sigma * std::f64::consts::SQRT_2))
}

/// `f(x) = a x exp(-(pi/16) a^2 x^4)`.
pub fn family_f(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    a * x * (-std::f64::consts::PI / 16.0 * a * a * x.powi(4)).exp()
}

/// CDF of [`family_f`]: `erf(sqrt(pi) a x^2 / 4)`.
pub fn family_cdf(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    erf(std::f64::consts::PI.sqrt() * a * x * x / 4.0)
}

/// Scale of the Gaussian behind the hitting distance, `sqrt(sigma_inf^2 / h)`.
pub fn hitting_sigma(spec: &SaddleSpec, h: f64, p: f64) -> f64 {
    (sigma_inf_sq_linear(spec, p) / h).sqrt()
}

/// `a = 4 / (sqrt(2 pi) sigma)`; only defined for `lambda = mu`.
pub fn predicted_a(spec: &SaddleSpec, h: f64, p: f64) -> Result<f64> {
    if spec.lambda != spec.mu {
        return Err(Error::Unsupported(format!(
            "the two-parameter family needs lambda = mu (got {} and {}); use hitting_density",
            spec.lambda, spec.mu
        )));
    }
    Ok(4.0 / ((2.0 * std::f64::consts::PI).sqrt() * hitting_sigma(spec, h, p)))
}

/// `E|Z|^q = sigma^q 2^{q/2} Gamma((q + 1) / 2) / sqrt(pi)`.
fn abs_normal_moment(sigma: f64, q: f64) -> f64 {
    sigma.powf(q) * (q / 2.0).exp2() * gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Mean and standard deviation of `|Z|^{mu / (lambda + mu)}`, `Z ~ N(0, sigma^2)`.
pub fn hit_moments(lambda: f64, mu: f64, sigma: f64) -> (f64, f64) {
    let q = mu / (lambda + mu);
    let mean = abs_normal_moment(sigma, q);
    let second = abs_normal_moment(sigma, 2.0 * q);
    (mean, (second - mean * mean).max(0.0).sqrt())
}

/// `mu / (2 (lambda + mu))`.
pub fn gamma_exponent(lambda: f64, mu: f64) -> f64 {
    mu / (2.0 * (lambda + mu))
}

/// Gaussian scale of the hitting distance as measured along the line at
/// angle `theta`: for a crossing at `u2 = tan(theta) u1` the distance is
/// `|Z_eff|^{mu/(lambda+mu)}` with
/// `Z_eff = Z x0^{lambda/mu} / (tan(theta) cos(theta)^{(lambda+mu)/mu})`.
/// At `theta = pi/4`, `lambda = mu`, this is twice [`hitting_sigma`].
pub fn crossing_sigma(spec: &SaddleSpec, h: f64, p: f64, theta: f64) -> f64 {
    let (l, m) = (spec.lambda, spec.mu);
    let geometric = spec.x0_magnitude.powf(l / m) / (theta.tan() * theta.cos().powf((l + m) / m));
    hitting_sigma(spec, h, p) * geometric
}

pub fn predict(spec: &SaddleSpec, h: f64, p: f64) -> TheoryPrediction {
    let sigma_inf_sq = sigma_inf_sq_linear(spec, p);
    let sigma_sq = sigma_inf_sq / h;
    let a_predicted = predicted_a(spec, h, p).ok().filter(|a| a.is_finite());
    let (mean, std) = if sigma_sq > 0.0 {
        let (m, s) = hit_moments(spec.lambda, spec.mu, sigma_sq.sqrt());
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    TheoryPrediction {
        p,
        h,
        sigma_inf_sq,
        sigma_sq,
        a_predicted,
        a_normalized: a_predicted.map(|a| a / h.sqrt()),
        gamma: gamma_exponent(spec.lambda, spec.mu),
        mean,
        std,
    }
}

/// Linear part used when the caller only has a [`SaddleSpec`].
pub fn linear_system(spec: &SaddleSpec) -> GeneralSystem {
    GeneralSystem::from_spec(spec)
}
