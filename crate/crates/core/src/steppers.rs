//! Fixed-step explicit solvers under a [`PrecisionPolicy`], and the
//! noise-injection stepper that adds one uniform perturbation per component
//! and step to a full-precision Euler step.
//!
//! Operation order inside a step is fixed; it decides which roundings occur.
//! Euler: `M x`, then `h * (M x)`, then `x + h (M x)` per component.
//! RK4: the classical tableau with `x + (h/6) * (((k1 + 2 k2) + 2 k3) + k4)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::detect::{Crossing, LineDetector};
use crate::numerics::{with_arith, Arith, Double, Mat2, PrecisionPolicy, Vec2};
use crate::system::{build_rotated_matrix, initial_value, GeneralSystem, SaddleSpec};

/// Default cap on steps per trajectory.
pub const DEFAULT_STEP_BUDGET: u64 = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepperKind {
    Euler,
    Rk4,
    /// Full-precision Euler plus `U[-|x_i| 2^-p, |x_i| 2^-p]` per component.
    /// `p` may be fractional or infinite.
    NoiseInjection { p: f64, seed: u64 },
}

impl StepperKind {
    pub fn name(&self) -> &'static str {
        match self {
            StepperKind::Euler => "euler",
            StepperKind::Rk4 => "rk4",
            StepperKind::NoiseInjection { .. } => "inject",
        }
    }
}

/// Random stream of one repetition: ChaCha8 keyed by the master seed, with
/// the repetition index as the stream number.
pub fn repetition_rng(master_seed: u64, repetition: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(repetition);
    rng
}

pub fn euler_step(x: Vec2, h: f64, m: &Mat2, policy: PrecisionPolicy) -> Result<Vec2> {
    check_step_inputs(x, h, m, policy)?;
    let out = with_arith!(policy, |a| {
        let mut s = EulerStep::new(a, m, h);
        lower(a, s.step(lift(a, x)))
    });
    finite_or_diverged(out)
}

pub fn rk4_step(x: Vec2, h: f64, m: &Mat2, policy: PrecisionPolicy) -> Result<Vec2> {
    check_step_inputs(x, h, m, policy)?;
    let out = with_arith!(policy, |a| {
        let mut s = Rk4Step::new(a, m, h);
        lower(a, s.step(lift(a, x)))
    });
    finite_or_diverged(out)
}

/// Full-precision Euler step followed by the uniform rounding-model
/// perturbation; advances `rng` by two draws.
pub fn noise_injection_step(x: Vec2, h: f64, m: &Mat2, p: f64, rng: &mut ChaCha8Rng) -> Result<Vec2> {
    check_step_inputs(x, h, m, PrecisionPolicy::NativeDouble)?;
    if p.is_nan() {
        return Err(Error::Domain("noise precision p is NaN".into()));
    }
    let mut s = InjectStep::new(m, h, p, rng.clone());
    let out = lower(Double, s.step([x.c1, x.c2]));
    *rng = s.rng;
    finite_or_diverged(out)
}

fn check_step_inputs(x: Vec2, h: f64, m: &Mat2, policy: PrecisionPolicy) -> Result<()> {
    if !x.is_finite() || !m.is_finite() {
        return Err(Error::Domain("step on non-finite input".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    policy.validate()
}

fn finite_or_diverged(v: Vec2) -> Result<Vec2> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence { step: 1, t: 0.0 })
    }
}

#[inline(always)]
fn lift<A: Arith>(a: A, x: Vec2) -> [A::S; 2] {
    [a.lift(x.c1), a.lift(x.c2)]
}

#[inline(always)]
fn lower<A: Arith>(a: A, x: [A::S; 2]) -> Vec2 {
    Vec2::new(a.lower(x[0]), a.lower(x[1]))
}

/// One step of a scheme in arithmetic `A`.
trait Step<A: Arith> {
    fn step(&mut self, x: [A::S; 2]) -> [A::S; 2];
}

struct EulerStep<A: Arith> {
    a: A,
    m: [[A::S; 2]; 2],
    h: A::S,
}

impl<A: Arith> EulerStep<A> {
    fn new(a: A, m: &Mat2, h: f64) -> Self {
        EulerStep { a, m: a.lift_mat(m), h: a.lift(h) }
    }
}

impl<A: Arith> Step<A> for EulerStep<A> {
    #[inline(always)]
    fn step(&mut self, x: [A::S; 2]) -> [A::S; 2] {
        let a = self.a;
        let mx = a.mat_vec(&self.m, x);
        [a.add(x[0], a.mul(self.h, mx[0])), a.add(x[1], a.mul(self.h, mx[1]))]
    }
}

struct Rk4Step<A: Arith> {
    a: A,
    m: [[A::S; 2]; 2],
    h: A::S,
    half_h: A::S,
    sixth_h: A::S,
}

impl<A: Arith> Rk4Step<A> {
    fn new(a: A, m: &Mat2, h: f64) -> Self {
        let hl = a.lift(h);
        let h64 = a.lower(hl);
        Rk4Step { a, m: a.lift_mat(m), h: hl, half_h: a.lift(h64 * 0.5), sixth_h: a.lift(h64 / 6.0) }
    }

    #[inline(always)]
    fn axpy(&self, x: [A::S; 2], s: A::S, k: [A::S; 2]) -> [A::S; 2] {
        let a = self.a;
        [a.add(x[0], a.mul(s, k[0])), a.add(x[1], a.mul(s, k[1]))]
    }
}

impl<A: Arith> Step<A> for Rk4Step<A> {
    #[inline(always)]
    fn step(&mut self, x: [A::S; 2]) -> [A::S; 2] {
        let a = self.a;
        let k1 = a.mat_vec(&self.m, x);
        let k2 = a.mat_vec(&self.m, self.axpy(x, self.half_h, k1));
        let k3 = a.mat_vec(&self.m, self.axpy(x, self.half_h, k2));
        let k4 = a.mat_vec(&self.m, self.axpy(x, self.h, k3));
        let sum = |i: usize| {
            let s = a.add(k1[i], a.add(k2[i], k2[i]));
            let s = a.add(s, a.add(k3[i], k3[i]));
            a.add(s, k4[i])
        };
        self.axpy(x, self.sixth_h, [sum(0), sum(1)])
    }
}

struct InjectStep {
    euler: EulerStep<Double>,
    scale: f64,
    rng: ChaCha8Rng,
}

impl InjectStep {
    fn new(m: &Mat2, h: f64, p: f64, rng: ChaCha8Rng) -> Self {
        InjectStep { euler: EulerStep::new(Double, m, h), scale: (-p).exp2(), rng }
    }
}

impl Step<Double> for InjectStep {
    #[inline(always)]
    fn step(&mut self, x: [f64; 2]) -> [f64; 2] {
        let y = self.euler.step(x);
        let u1: f64 = self.rng.random();
        let u2: f64 = self.rng.random();
        [
            y[0] + (2.0 * u1 - 1.0) * y[0].abs() * self.scale,
            y[1] + (2.0 * u2 - 1.0) * y[1].abs() * self.scale,
        ]
    }
}

/// Steppers for a general `b(x) = B x + tau(x)`, in binary64.
struct GeneralStep<'a> {
    sys: &'a GeneralSystem,
    kind: StepperKind,
    h: f64,
    scale: f64,
    rng: Option<ChaCha8Rng>,
}

impl Step<Double> for GeneralStep<'_> {
    fn step(&mut self, x: [f64; 2]) -> [f64; 2] {
        let x = Vec2::new(x[0], x[1]);
        let h = self.h;
        let y = match self.kind {
            StepperKind::Rk4 => {
                let b = |v: Vec2| self.sys.field(v);
                let k1 = b(x);
                let k2 = b(x.add(k1.scale(h * 0.5)));
                let k3 = b(x.add(k2.scale(h * 0.5)));
                let k4 = b(x.add(k3.scale(h)));
                x.add(k1.add(k2.scale(2.0)).add(k3.scale(2.0)).add(k4).scale(h / 6.0))
            }
            _ => x.add(self.sys.field(x).scale(h)),
        };
        match self.rng.as_mut() {
            Some(rng) => {
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                [
                    y.c1 + (2.0 * u1 - 1.0) * y.c1.abs() * self.scale,
                    y.c2 + (2.0 * u2 - 1.0) * y.c2.abs() * self.scale,
                ]
            }
            None => [y.c1, y.c2],
        }
    }
}

/// The ODE a trajectory integrates.
#[derive(Debug, Clone)]
pub enum SystemDef {
    Saddle(SaddleSpec),
    /// A general system with a caller-supplied initial point; integrated in binary64.
    General { system: GeneralSystem, x0: Vec2 },
}

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub stepper: StepperKind,
    pub policy: PrecisionPolicy,
    pub h: f64,
    pub t_max: f64,
    pub system: SystemDef,
    /// Hard cap on `t_max / h`.
    pub step_budget: u64,
    /// Stream number for the injection RNG.
    pub repetition: u64,
}

impl TrajectoryConfig {
    pub fn new(stepper: StepperKind, policy: PrecisionPolicy, h: f64, t_max: f64, spec: SaddleSpec) -> Self {
        TrajectoryConfig {
            stepper,
            policy,
            h,
            t_max,
            system: SystemDef::Saddle(spec),
            step_budget: DEFAULT_STEP_BUDGET,
            repetition: 0,
        }
    }

    pub fn max_steps(&self) -> u64 {
        (self.t_max / self.h).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config("h", "step size must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config("t_max", "must be positive"));
        }
        if self.max_steps() > self.step_budget {
            return Err(Error::config(
                "t_max",
                format!("t_max / h = {} exceeds the step budget {}", self.max_steps(), self.step_budget),
            ));
        }
        self.policy.validate()?;
        if let StepperKind::NoiseInjection { p, .. } = self.stepper {
            if p.is_nan() || p <= 0.0 {
                return Err(Error::config("inject_p", "noise precision must be positive"));
            }
        }
        match &self.system {
            SystemDef::Saddle(spec) => spec.validate(),
            SystemDef::General { x0, .. } => {
                if self.policy != PrecisionPolicy::NativeDouble {
                    return Err(Error::Unsupported("general systems run in native double only".into()));
                }
                if !x0.is_finite() || x0.norm() > 1.0 {
                    return Err(Error::config("x0", "initial point must be finite with |x0| <= 1"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum StopCondition {
    /// Run to `t_max`.
    Never,
    /// Stop at the first crossing of the lines at `theta` to the stable eigenvector.
    LineHit { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitEvent {
    pub crossing: Crossing,
    /// Interpolated time of the crossing.
    pub t_hit: f64,
    /// Post-step states on either side of the crossing.
    pub before: Vec2,
    pub after: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub final_state: Vec2,
    pub steps: u64,
    pub t_final: f64,
    /// `None` when `t_max` was reached without an event.
    pub hit: Option<HitEvent>,
}

/// Per-step observer: `(step_index, t, state)`, including the initial state at step 0.
pub type Observer<'a> = &'a mut dyn FnMut(u64, f64, Vec2);

/// Iterates the configured stepper from the initial value until the stop
/// condition fires on a post-step state or `t_max` is reached.
pub fn run_trajectory(
    cfg: &TrajectoryConfig,
    stop: StopCondition,
    observer: Option<Observer<'_>>,
) -> Result<TrajectoryOutcome> {
    cfg.validate()?;
    let max_steps = cfg.max_steps();
    match &cfg.system {
        SystemDef::Saddle(spec) => {
            let m = build_rotated_matrix(spec);
            let x0 = initial_value(spec);
            let eig = crate::system::eigenstructure(spec);
            let detector = detector_for(stop, eig);
            match cfg.stepper {
                StepperKind::Euler => with_arith!(cfg.policy, |a| {
                    let h = a.lower(a.lift(cfg.h));
                    integrate(a, EulerStep::new(a, &m, cfg.h), x0, h, max_steps, detector, observer)
                }),
                StepperKind::Rk4 => with_arith!(cfg.policy, |a| {
                    let h = a.lower(a.lift(cfg.h));
                    integrate(a, Rk4Step::new(a, &m, cfg.h), x0, h, max_steps, detector, observer)
                }),
                StepperKind::NoiseInjection { p, seed } => {
                    let rng = repetition_rng(seed, cfg.repetition);
                    integrate(Double, InjectStep::new(&m, cfg.h, p, rng), x0, cfg.h, max_steps, detector, observer)
                }
            }
        }
        SystemDef::General { system, x0 } => {
            let (_, _, eig) = system.eigen();
            let detector = detector_for(stop, eig);
            let (scale, rng) = match cfg.stepper {
                StepperKind::NoiseInjection { p, seed } => ((-p).exp2(), Some(repetition_rng(seed, cfg.repetition))),
                _ => (0.0, None),
            };
            let s = GeneralStep { sys: system, kind: cfg.stepper, h: cfg.h, scale, rng };
            integrate(Double, s, *x0, cfg.h, max_steps, detector, observer)
        }
    }
}

fn detector_for(stop: StopCondition, eig: crate::system::EigenStructure) -> Option<LineDetector> {
    match stop {
        StopCondition::Never => None,
        StopCondition::LineHit { theta } => Some(LineDetector::new(eig, theta)),
    }
}

fn integrate<A: Arith, S: Step<A>>(
    a: A,
    mut stepper: S,
    x0: Vec2,
    h: f64,
    max_steps: u64,
    detector: Option<LineDetector>,
    mut observer: Option<Observer<'_>>,
) -> Result<TrajectoryOutcome> {
    let mut x = lift(a, x0);
    let mut prev = lower(a, x);
    let mut g_prev = detector.map_or(0.0, |d| d.gauge(prev));
    if let Some(obs) = observer.as_mut() {
        obs(0, 0.0, prev);
    }
    for n in 1..=max_steps {
        x = stepper.step(x);
        let next = lower(a, x);
        let t = n as f64 * h;
        if !next.is_finite() {
            return Err(Error::Divergence { step: n, t });
        }
        if let Some(obs) = observer.as_mut() {
            obs(n, t, next);
        }
        if let Some(det) = detector.as_ref() {
            let g_next = det.gauge(next);
            if let Some(crossing) = det.crossing_from_gauges(prev, next, g_prev, g_next) {
                let t_hit = (n as f64 - 1.0 + crossing.fraction) * h;
                return Ok(TrajectoryOutcome {
                    final_state: next,
                    steps: n,
                    t_final: t,
                    hit: Some(HitEvent { crossing, t_hit, before: prev, after: next }),
                });
            }
            g_prev = g_next;
        }
        prev = next;
    }
    Ok(TrajectoryOutcome { final_state: prev, steps: max_steps, t_final: max_steps as f64 * h, hit: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::exact_linear_flow;
    use std::f64::consts::{FRAC_PI_4, PI};

    const DOUBLE: PrecisionPolicy = PrecisionPolicy::NativeDouble;

    #[test]
    fn euler_examples() {
        let m = Mat2::diag(-1.0, 1.0);
        assert_eq!(euler_step(Vec2::new(1.0, 0.0), 0.5, &m, DOUBLE).unwrap(), Vec2::new(0.5, 0.0));
        let anti = Mat2::new(0.0, -1.0, -1.0, 0.0);
        assert_eq!(euler_step(Vec2::new(1.0, 1.0), 0.25, &anti, DOUBLE).unwrap(), Vec2::new(0.75, 0.75));
        for pol in [DOUBLE, PrecisionPolicy::NativeSingle, PrecisionPolicy::Emulated { p: 12 }] {
            assert_eq!(euler_step(Vec2::ZERO, 0.37, &anti, pol).unwrap(), Vec2::ZERO);
            assert_eq!(rk4_step(Vec2::ZERO, 0.37, &anti, pol).unwrap(), Vec2::ZERO);
        }
        assert!(euler_step(Vec2::new(1.0, 0.0), 0.0, &m, DOUBLE).is_err());
        assert!(matches!(
            euler_step(Vec2::new(f64::MAX, 0.0), 1.0, &Mat2::diag(4.0, 1.0), DOUBLE),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn rk4_taylor_polynomial() {
        let m = Mat2::diag(-1.0, 1.0);
        let y = rk4_step(Vec2::new(1.0, 0.0), 0.1, &m, DOUBLE).unwrap();
        let taylor = 1.0 - 0.1 + 0.005 - 1.0 / 6000.0 + 1.0 / 240000.0;
        assert!((y.c1 - taylor).abs() < 1e-15, "{}", y.c1);
        assert!((y.c1 - 0.904_837_5).abs() < 1e-9);
        assert_eq!(y.c2, 0.0);
    }

    #[test]
    fn rk4_local_error() {
        let spec = SaddleSpec::symmetric(PI / 5.0);
        let m = build_rotated_matrix(&spec);
        let h = 0.01;
        for x in [Vec2::new(0.3, -0.8), Vec2::new(1.0, 0.0), Vec2::new(-0.2, 0.4)] {
            let y = rk4_step(x, h, &m, DOUBLE).unwrap();
            let e = exact_linear_flow(&spec, x, h).unwrap();
            assert!((y.c1 - e.c1).abs() <= x.norm() * h.powi(5));
            assert!((y.c2 - e.c2).abs() <= x.norm() * h.powi(5));
        }
    }

    #[test]
    fn injection_degenerate_and_deterministic() {
        let m = build_rotated_matrix(&SaddleSpec::symmetric(PI / 5.0));
        let x = Vec2::new(0.8, 0.6);
        let mut rng = repetition_rng(7, 3);
        let y = noise_injection_step(x, 1e-3, &m, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(y, euler_step(x, 1e-3, &m, DOUBLE).unwrap());

        let mut r1 = repetition_rng(42, 5);
        let mut r2 = repetition_rng(42, 5);
        let a = noise_injection_step(x, 1e-3, &m, 10.0, &mut r1).unwrap();
        let b = noise_injection_step(x, 1e-3, &m, 10.0, &mut r2).unwrap();
        assert_eq!(a, b);
        // The generator advanced.
        let c = noise_injection_step(x, 1e-3, &m, 10.0, &mut r1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn injection_noise_variance() {
        // Var U[-w, w] = w^2 / 3 with w = |x_i| 2^-p.
        let p = 8.0;
        let m = Mat2::ZERO;
        let x = Vec2::new(0.75, -0.5);
        let mut rng = repetition_rng(1, 0);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let y = noise_injection_step(x, 0.1, &m, p, &mut rng).unwrap();
            s1 += (y.c1 - x.c1).powi(2);
            s2 += (y.c2 - x.c2).powi(2);
        }
        let want = |c: f64| c * c * (-2.0 * p).exp2() / 3.0;
        assert!((s1 / n as f64 / want(x.c1) - 1.0).abs() < 0.01);
        assert!((s2 / n as f64 / want(x.c2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn streams_are_independent() {
        let mut a = repetition_rng(9, 0);
        let mut b = repetition_rng(9, 1);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }

    #[test]
    fn phi_zero_never_leaves_the_axis() {
        for kind in [StepperKind::Euler, StepperKind::Rk4, StepperKind::NoiseInjection { p: 20.0, seed: 1 }] {
            let cfg = TrajectoryConfig::new(kind, DOUBLE, 1e-2, 40.0, SaddleSpec::symmetric(0.0));
            let mut max_c2 = 0.0f64;
            let mut obs = |_: u64, _: f64, x: Vec2| max_c2 = max_c2.max(x.c2.abs());
            let out = run_trajectory(&cfg, StopCondition::LineHit { theta: FRAC_PI_4 }, Some(&mut obs)).unwrap();
            assert!(out.hit.is_none());
            assert_eq!(out.final_state.c2, 0.0);
            assert_eq!(max_c2, 0.0);
        }
    }

    #[test]
    fn phi_quarter_pi_components_stay_equal() {
        let cfg = TrajectoryConfig::new(StepperKind::Euler, DOUBLE, 1e-4, 100.0, SaddleSpec::symmetric(FRAC_PI_4));
        let mut equal = true;
        let mut obs = |_: u64, _: f64, x: Vec2| equal &= x.c1 == x.c2;
        let out = run_trajectory(&cfg, StopCondition::LineHit { theta: FRAC_PI_4 }, Some(&mut obs)).unwrap();
        assert!(out.steps >= 1_000_000);
        assert!(equal);
        assert!(out.hit.is_none());
    }

    #[test]
    fn euler_matches_matrix_power() {
        let spec = SaddleSpec::symmetric(PI / 5.0);
        let b = build_rotated_matrix(&spec);
        let h = 1e-3;
        let step = Mat2::IDENTITY.add(&b.scale(h));
        let n = 2000u64;
        let cfg = TrajectoryConfig::new(StepperKind::Euler, DOUBLE, h, n as f64 * h, spec);
        let out = run_trajectory(&cfg, StopCondition::Never, None).unwrap();
        // Binary powering of (I + hB).
        let (mut acc, mut base, mut k) = (Mat2::IDENTITY, step, n);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        let want = acc.apply(initial_value(&spec));
        let bound = n as f64 * (-50.0f64).exp2() * initial_value(&spec).norm();
        assert!(out.final_state.sub(want).norm() <= bound);
    }

    #[test]
    fn hit_time_near_transition() {
        // Transition where e^{-t} and the noise-seeded e^{t} term meet:
        // e^{-2t} ~ 2 |W|, W ~ N(0, sigma_inf^2 / h) at effective p ~ 53.4.
        let h = 1e-4;
        let cfg = TrajectoryConfig::new(StepperKind::Euler, DOUBLE, h, 60.0, SaddleSpec::symmetric(PI / 5.0));
        let out = run_trajectory(&cfg, StopCondition::LineHit { theta: FRAC_PI_4 }, None).unwrap();
        let hit = out.hit.expect("double-precision Euler trajectory must leave the stable manifold");
        let (c, s) = ((PI / 5.0).cos(), (PI / 5.0).sin());
        let sigma_w = (-53.44f64).exp2() * c * s / 6f64.sqrt() / h.sqrt();
        let t_pred = -0.5 * (2.0 * 0.67 * sigma_w).ln();
        assert!((hit.t_hit - t_pred).abs() < 3.0, "t_hit = {} predicted {}", hit.t_hit, t_pred);
        assert!(hit.crossing.y > 0.0);
    }

    #[test]
    fn general_linear_matches_saddle_path() {
        let spec = SaddleSpec::symmetric(PI / 5.0);
        let g = GeneralSystem::from_spec(&spec);
        for kind in [StepperKind::Euler, StepperKind::Rk4, StepperKind::NoiseInjection { p: 30.0, seed: 3 }] {
            let a = TrajectoryConfig::new(kind, DOUBLE, 1e-2, 5.0, spec);
            let mut b = a.clone();
            b.system = SystemDef::General { system: g.clone(), x0: initial_value(&spec) };
            let oa = run_trajectory(&a, StopCondition::Never, None).unwrap();
            let ob = run_trajectory(&b, StopCondition::Never, None).unwrap();
            let tol = if kind == StepperKind::Rk4 { 1e-13 } else { 0.0 };
            assert!(oa.final_state.sub(ob.final_state).norm() <= tol, "{kind:?}");
        }
    }

    #[test]
    fn trajectory_config_validation() {
        let spec = SaddleSpec::symmetric(0.3);
        let mut cfg = TrajectoryConfig::new(StepperKind::Euler, DOUBLE, 1e-4, 10.0, spec);
        cfg.step_budget = 10;
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let cfg = TrajectoryConfig::new(StepperKind::Euler, PrecisionPolicy::Emulated { p: 60 }, 1e-2, 1.0, spec);
        assert!(cfg.validate().is_err());
    }
}
