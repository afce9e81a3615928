//! Planar linear algebra and the precision machinery the solvers run on.
//!
//! Three arithmetics are supported: hardware binary32, hardware binary64 and
//! an emulated format with `p` fraction bits carried in binary64. Emulated
//! results are rounded to nearest (ties to even) after every add and
//! multiply, so they accumulate error the same way hardware does.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Runs `$body` with `$a` bound to the concrete [`Arith`] for `$policy`.
macro_rules! with_arith {
    ($policy:expr, |$a:ident| $body:expr) => {
        match $policy {
            $crate::numerics::PrecisionPolicy::NativeSingle => {
                let $a = $crate::numerics::Single;
                $body
            }
            $crate::numerics::PrecisionPolicy::NativeDouble => {
                let $a = $crate::numerics::Double;
                $body
            }
            $crate::numerics::PrecisionPolicy::Emulated { p } => {
                let $a = $crate::numerics::Emulated { p };
                $body
            }
        }
    };
}
pub(crate) use with_arith;

/// Fraction bits of the binary64 carrier.
pub const CARRIER_FRACTION_BITS: u32 = 52;
/// Emulated formats must stay this many bits below the carrier.
pub const CARRIER_GUARD_BITS: u32 = 10;
pub const MIN_EMULATED_P: u32 = 2;
pub const MAX_EMULATED_P: u32 = CARRIER_FRACTION_BITS - CARRIER_GUARD_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub c1: f64,
    pub c2: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { c1: 0.0, c2: 0.0 };

    pub const fn new(c1: f64, c2: f64) -> Self {
        Vec2 { c1, c2 }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.c1 * other.c1 + self.c2 * other.c2
    }

    pub fn norm(self) -> f64 {
        self.c1.hypot(self.c2)
    }

    pub fn is_finite(self) -> bool {
        self.c1.is_finite() && self.c2.is_finite()
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.c1 * s, self.c2 * s)
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.c1 + other.c1, self.c2 + other.c2)
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.c1 - other.c1, self.c2 - other.c2)
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { m: [[1.0, 0.0], [0.0, 1.0]] };
    pub const ZERO: Mat2 = Mat2 { m: [[0.0, 0.0], [0.0, 0.0]] };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { m: [[a11, a12], [a21, a22]] }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Mat2::new(d1, 0.0, 0.0, d2)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        let mut r = *self;
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let mut r = *self;
        r.m.iter_mut().flatten().for_each(|v| *v *= s);
        r
    }

    /// Full-precision product `M v`.
    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.c1 + self.m[0][1] * v.c2,
            self.m[1][0] * v.c1 + self.m[1][1] * v.c2,
        )
    }

    pub fn row(&self, i: usize) -> Vec2 {
        Vec2::new(self.m[i][0], self.m[i][1])
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

/// Arithmetic a solver runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrecisionPolicy {
    NativeSingle,
    NativeDouble,
    /// `p` fraction bits, round-half-even after every operation.
    Emulated { p: u32 },
}

impl PrecisionPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrecisionPolicy::Emulated { p } if !(MIN_EMULATED_P..=MAX_EMULATED_P).contains(&p) => {
                Err(Error::config(
                    "precision",
                    format!(
                        "emulated p = {p} outside [{MIN_EMULATED_P}, {MAX_EMULATED_P}]; \
                         carrier rounding must stay 2^{CARRIER_GUARD_BITS} below emulated rounding"
                    ),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Spacing of representable numbers just above 1.
    pub fn epsilon(&self) -> f64 {
        match *self {
            PrecisionPolicy::NativeSingle => f32::EPSILON as f64,
            PrecisionPolicy::NativeDouble => f64::EPSILON,
            PrecisionPolicy::Emulated { p } => 2f64.powi(-(p as i32)),
        }
    }

    /// Bracket `[p, p + 1]` for the effective precision of the rounding model.
    pub fn effective_p_bracket(&self) -> (f64, f64) {
        let p = match *self {
            PrecisionPolicy::NativeSingle => 23.0,
            PrecisionPolicy::NativeDouble => 52.0,
            PrecisionPolicy::Emulated { p } => p as f64,
        };
        (p, p + 1.0)
    }

    /// Rounds a carrier value into this policy's format.
    pub fn round(&self, x: f64) -> f64 {
        match *self {
            PrecisionPolicy::NativeSingle => x as f32 as f64,
            PrecisionPolicy::NativeDouble => x,
            PrecisionPolicy::Emulated { p } => round_mantissa(x, p),
        }
    }
}

impl fmt::Display for PrecisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionPolicy::NativeSingle => write!(f, "single"),
            PrecisionPolicy::NativeDouble => write!(f, "double"),
            PrecisionPolicy::Emulated { p } => write!(f, "emulated:{p}"),
        }
    }
}

impl FromStr for PrecisionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let policy = match s {
            "single" => PrecisionPolicy::NativeSingle,
            "double" => PrecisionPolicy::NativeDouble,
            _ => {
                let p = s
                    .strip_prefix("emulated:")
                    .and_then(|p| p.trim().parse::<u32>().ok())
                    .ok_or_else(|| {
                        Error::config("precision", format!("expected single, double or emulated:<p>, got {s:?}"))
                    })?;
                PrecisionPolicy::Emulated { p }
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Round to the nearest number with `p` fraction bits, ties to even.
///
/// Exponent range is that of the binary64 carrier; subnormal carrier inputs
/// are rescaled so they are rounded with a full `p`-bit significand.
pub fn round_to_p(x: f64, p: u32) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("round_to_p of non-finite value {x}")));
    }
    if !(MIN_EMULATED_P..=MAX_EMULATED_P).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [{MIN_EMULATED_P}, {MAX_EMULATED_P}]")));
    }
    Ok(round_mantissa(x, p))
}

/// Bit-level rounding kernel behind [`round_to_p`]; no range checks.
#[inline]
pub(crate) fn round_mantissa(x: f64, p: u32) -> f64 {
    let bits = x.to_bits();
    let biased_exp = (bits >> 52) & 0x7ff;
    if biased_exp == 0 {
        if x == 0.0 {
            return x;
        }
        // 2^600 keeps every subnormal normal and the rescaling exact.
        const UP: f64 = f64::from_bits((1023 + 600) << 52);
        const DOWN: f64 = f64::from_bits((1023 - 600) << 52);
        return round_mantissa(x * UP, p) * DOWN;
    }
    if biased_exp == 0x7ff {
        return x;
    }
    let drop = CARRIER_FRACTION_BITS - p;
    let lsb = (bits >> drop) & 1;
    let half_minus_one = (1u64 << (drop - 1)) - 1;
    // A carry out of the fraction bumps the exponent, overflowing to inf.
    let rounded = (bits + half_minus_one + lsb) & !((1u64 << drop) - 1);
    f64::from_bits(rounded)
}

/// `R(phi)`, the counter-clockwise rotation.
pub fn rotation(phi: f64) -> Mat2 {
    let (s, c) = sin_cos(phi);
    Mat2::new(c, -s, s, c)
}

/// `(sin, cos)` with the symmetric angles pinned so that `pi/4` gives equal
/// components and `0` gives an exact zero.
pub fn sin_cos(phi: f64) -> (f64, f64) {
    if phi == 0.0 {
        (0.0, 1.0)
    } else if phi == std::f64::consts::FRAC_PI_4 {
        (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
    } else {
        phi.sin_cos()
    }
}

/// `M v` with every multiply and add rounded per `policy`.
pub fn mat_apply(m: &Mat2, v: Vec2, policy: PrecisionPolicy) -> Result<Vec2> {
    if !m.is_finite() || !v.is_finite() {
        return Err(Error::Domain("mat_apply on non-finite input".into()));
    }
    policy.validate()?;
    let out = with_arith!(policy, |a| {
        let mm = a.lift_mat(m);
        let r = a.mat_vec(&mm, [a.lift(v.c1), a.lift(v.c2)]);
        Vec2::new(a.lower(r[0]), a.lower(r[1]))
    });
    if !out.is_finite() {
        return Err(Error::Divergence { step: 0, t: 0.0 });
    }
    Ok(out)
}

/// A scalar arithmetic: storage type plus correctly rounded `+` and `*`.
pub trait Arith: Copy + Send + Sync {
    type S: Copy + Send + Sync + PartialEq + fmt::Debug;

    fn lift(&self, x: f64) -> Self::S;
    fn lower(&self, x: Self::S) -> f64;
    fn add(&self, a: Self::S, b: Self::S) -> Self::S;
    fn mul(&self, a: Self::S, b: Self::S) -> Self::S;

    #[inline]
    fn lift_mat(&self, m: &Mat2) -> [[Self::S; 2]; 2] {
        [
            [self.lift(m.m[0][0]), self.lift(m.m[0][1])],
            [self.lift(m.m[1][0]), self.lift(m.m[1][1])],
        ]
    }

    /// Row `i` of `M v` as `m_i1 * v1 + m_i2 * v2`.
    #[inline]
    fn mat_vec(&self, m: &[[Self::S; 2]; 2], v: [Self::S; 2]) -> [Self::S; 2] {
        [
            self.add(self.mul(m[0][0], v[0]), self.mul(m[0][1], v[1])),
            self.add(self.mul(m[1][0], v[0]), self.mul(m[1][1], v[1])),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Single;

#[derive(Debug, Clone, Copy, Default)]
pub struct Double;

#[derive(Debug, Clone, Copy)]
pub struct Emulated {
    pub p: u32,
}

impl Arith for Single {
    type S = f32;
    #[inline(always)]
    fn lift(&self, x: f64) -> f32 {
        x as f32
    }
    #[inline(always)]
    fn lower(&self, x: f32) -> f64 {
        x as f64
    }
    #[inline(always)]
    fn add(&self, a: f32, b: f32) -> f32 {
        a + b
    }
    #[inline(always)]
    fn mul(&self, a: f32, b: f32) -> f32 {
        a * b
    }
}

impl Arith for Double {
    type S = f64;
    #[inline(always)]
    fn lift(&self, x: f64) -> f64 {
        x
    }
    #[inline(always)]
    fn lower(&self, x: f64) -> f64 {
        x
    }
    #[inline(always)]
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline(always)]
    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }
}

impl Arith for Emulated {
    type S = f64;
    #[inline(always)]
    fn lift(&self, x: f64) -> f64 {
        round_mantissa(x, self.p)
    }
    #[inline(always)]
    fn lower(&self, x: f64) -> f64 {
        x
    }
    #[inline(always)]
    fn add(&self, a: f64, b: f64) -> f64 {
        round_mantissa(a + b, self.p)
    }
    #[inline(always)]
    fn mul(&self, a: f64, b: f64) -> f64 {
        round_mantissa(a * b, self.p)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    /// Enumerates every p-bit significand in the binade of `x` and picks the
    /// nearest, breaking ties towards an even significand.
    fn brute_force_round(x: f64, p: u32) -> f64 {
        let e = x.abs().log2().floor() as i32;
        let step = 2f64.powi(e - p as i32);
        let lo = 2f64.powi(e);
        let mut best = lo;
        let mut best_m = 0u64;
        for m in 0..=(1u64 << p) {
            let cand = lo + m as f64 * step;
            let (d, db) = ((cand - x.abs()).abs(), (best - x.abs()).abs());
            if d < db || (d == db && m % 2 == 0 && best_m % 2 == 1) {
                best = cand;
                best_m = m;
            }
        }
        best.copysign(x)
    }

    #[test]
    fn round_zero_and_tie() {
        assert_eq!(round_to_p(0.0, 10).unwrap(), 0.0);
        assert_eq!(round_to_p(1.0625, 3).unwrap(), 1.0);
        assert_eq!(brute_force_round(1.0625, 3), 1.0);
        // 1.1875 = 1.0011b sits between 1.001b and 1.010b; even is 1.010b.
        assert_eq!(round_to_p(1.1875, 3).unwrap(), 1.25);
        assert_eq!(round_to_p(-1.0625, 3).unwrap(), -1.0);
    }

    #[test]
    fn round_matches_enumeration() {
        let xs = [1.0625, 1.3, 1.999, 3.25159, 0.1, 7.5e-9, 123456.789, 1.9999999];
        for &x in &xs {
            for p in [2, 3, 5, 8, 12] {
                assert_eq!(round_to_p(x, p).unwrap(), brute_force_round(x, p), "x={x} p={p}");
            }
        }
    }

    #[test]
    fn round_carries_into_exponent() {
        assert_eq!(round_to_p(1.999, 3).unwrap(), 2.0);
        assert_eq!(round_to_p(f64::MAX, 10).unwrap(), f64::INFINITY);
    }

    #[test]
    fn round_rejects_bad_input() {
        assert!(matches!(round_to_p(f64::NAN, 10), Err(Error::Domain(_))));
        assert!(matches!(round_to_p(f64::INFINITY, 10), Err(Error::Domain(_))));
        assert!(round_to_p(1.0, 1).is_err());
        assert!(round_to_p(1.0, 43).is_err());
    }

    #[test]
    fn round_subnormal_keeps_relative_precision() {
        let x = 3.3e-310;
        let r = round_to_p(x, 10).unwrap();
        assert!(((r - x) / x).abs() <= 2f64.powi(-11));
        assert_ne!(r, 0.0);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation(0.0), Mat2::IDENTITY);
        let r = rotation(FRAC_PI_4);
        for v in r.m.iter().flatten() {
            assert_eq!(v.abs(), FRAC_1_SQRT_2);
        }
        for k in 0..20 {
            let phi = k as f64 * std::f64::consts::FRAC_PI_2 / 20.0;
            let r = rotation(phi);
            let id = r.mul(&r.transpose());
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((id.m[i][j] - want).abs() <= 4.0 * f64::EPSILON, "phi={phi}");
                }
            }
        }
    }

    #[test]
    fn mat_apply_examples() {
        let v = Vec2::new(0.3, -1.7);
        for pol in [
            PrecisionPolicy::NativeDouble,
            PrecisionPolicy::NativeSingle,
            PrecisionPolicy::Emulated { p: 20 },
        ] {
            let vr = Vec2::new(pol.round(v.c1), pol.round(v.c2));
            assert_eq!(mat_apply(&Mat2::IDENTITY, vr, pol).unwrap(), vr);
            assert_eq!(
                mat_apply(&Mat2::diag(-1.0, 1.0), Vec2::new(1.0, 0.0), pol).unwrap(),
                Vec2::new(-1.0, 0.0)
            );
        }
        assert!(matches!(
            mat_apply(&Mat2::diag(f64::MAX, 1.0), Vec2::new(4.0, 0.0), PrecisionPolicy::NativeDouble),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn policy_parse() {
        assert_eq!("single".parse::<PrecisionPolicy>().unwrap(), PrecisionPolicy::NativeSingle);
        assert_eq!("emulated:30".parse::<PrecisionPolicy>().unwrap(), PrecisionPolicy::Emulated { p: 30 });
        assert!("emulated:50".parse::<PrecisionPolicy>().is_err());
        assert!("quad".parse::<PrecisionPolicy>().is_err());
        assert_eq!(PrecisionPolicy::Emulated { p: 7 }.to_string(), "emulated:7");
    }

    fn finite_f64() -> impl Strategy<Value = f64> {
        (-1.0e30f64..1.0e30).prop_union(-2.0f64..2.0)
    }

    proptest! {
        #[test]
        fn round_idempotent(x in finite_f64(), p in 2u32..=42) {
            let r = round_to_p(x, p).unwrap();
            prop_assert_eq!(round_to_p(r, p).unwrap(), r);
        }

        #[test]
        fn round_monotone(x in finite_f64(), y in finite_f64(), p in 2u32..=42) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(round_to_p(lo, p).unwrap() <= round_to_p(hi, p).unwrap());
        }

        #[test]
        fn round_sign_symmetric(x in finite_f64(), p in 2u32..=42) {
            prop_assert_eq!(round_to_p(-x, p).unwrap(), -round_to_p(x, p).unwrap());
        }

        #[test]
        fn round_relative_error(x in finite_f64(), p in 2u32..=42) {
            prop_assume!(x != 0.0);
            let r = round_to_p(x, p).unwrap();
            prop_assert!(((r - x) / x).abs() <= 2f64.powi(-(p as i32)));
        }

        #[test]
        fn emulated_24_matches_binary32(a in -1.0e6f32..1.0e6, b in -1.0e6f32..1.0e6) {
            let e = Emulated { p: 23 };
            // p counts fraction bits: binary32 has 23 of them.
            let (x, y) = (e.lift(a as f64), e.lift(b as f64));
            prop_assert_eq!(e.add(x, y), (a + b) as f64);
            prop_assert_eq!(e.mul(x, y), (a * b) as f64);
        }
    }
}
