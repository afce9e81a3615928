//! The rotated linear saddle `x' = R(phi) diag(-mu, lambda) R(phi)^T x` and
//! general planar systems `x' = B x + tau(x)` with a saddle at the origin.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rotation, sin_cos, Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleSpec {
    /// Unstable eigenvalue.
    pub lambda: f64,
    /// Magnitude of the stable eigenvalue `-mu`.
    pub mu: f64,
    /// Rotation angle in `[0, pi/2)`.
    pub phi: f64,
    /// Distance of the initial point from the origin, at most 1.
    pub x0_magnitude: f64,
}

impl SaddleSpec {
    pub fn new(lambda: f64, mu: f64, phi: f64, x0_magnitude: f64) -> Result<Self> {
        let spec = SaddleSpec { lambda, mu, phi, x0_magnitude };
        spec.validate()?;
        Ok(spec)
    }

    /// The canonical experiment: `lambda = mu = 1`, unit initial distance.
    pub fn symmetric(phi: f64) -> Self {
        SaddleSpec { lambda: 1.0, mu: 1.0, phi, x0_magnitude: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config("lambda", "must be a positive finite number"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::config("mu", "must be a positive finite number"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.phi) {
            return Err(Error::config("phi", "must lie in [0, pi/2)"));
        }
        if !(self.x0_magnitude > 0.0 && self.x0_magnitude <= 1.0) {
            return Err(Error::config("x0", "initial distance must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Right eigenvectors `v1` (for `-mu`) and `v2` (for `lambda`) with the
/// matching left eigenvectors as rows, normalised so `v_i' v_j = delta_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenStructure {
    pub v1: Vec2,
    pub v2: Vec2,
    pub v1p: Vec2,
    pub v2p: Vec2,
}

impl EigenStructure {
    /// Eigen-coordinates `(v1' x, v2' x)`.
    #[inline]
    pub fn coords(&self, x: Vec2) -> (f64, f64) {
        (self.v1p.dot(x), self.v2p.dot(x))
    }

    /// Eigenstructure of a general real 2x2 matrix with eigenvalues of
    /// opposite sign. Returns `(lambda, mu, structure)`.
    pub fn of_saddle_matrix(b: &Mat2) -> Result<(f64, f64, EigenStructure)> {
        let tr = b.trace();
        let det = b.det();
        if !(det < 0.0) {
            return Err(Error::Unsupported(format!(
                "linear part has det = {det}; a saddle needs eigenvalues of opposite sign"
            )));
        }
        let disc = (0.25 * tr * tr - det).sqrt();
        let lambda = 0.5 * tr + disc;
        let neg_mu = 0.5 * tr - disc;
        let v1 = eigenvector(b, neg_mu);
        let v2 = eigenvector(b, lambda);
        // Rows of V^{-1} with V = [v1 v2].
        let d = v1.c1 * v2.c2 - v2.c1 * v1.c2;
        let v1p = Vec2::new(v2.c2 / d, -v2.c1 / d);
        let v2p = Vec2::new(-v1.c2 / d, v1.c1 / d);
        Ok((lambda, -neg_mu, EigenStructure { v1, v2, v1p, v2p }))
    }
}

fn eigenvector(b: &Mat2, ev: f64) -> Vec2 {
    // Null vector of (B - ev I), taken from whichever row is better conditioned.
    let r0 = Vec2::new(b.m[0][0] - ev, b.m[0][1]);
    let r1 = Vec2::new(b.m[1][0], b.m[1][1] - ev);
    let row = if r0.norm() >= r1.norm() { r0 } else { r1 };
    let v = if row.norm() == 0.0 { Vec2::new(1.0, 0.0) } else { Vec2::new(-row.c2, row.c1) };
    let v = v.scale(1.0 / v.norm());
    // Orient with a non-negative leading nonzero component.
    if v.c1 < 0.0 || (v.c1 == 0.0 && v.c2 < 0.0) {
        v.scale(-1.0)
    } else {
        v
    }
}

/// `B(phi) = R(phi) diag(-mu, lambda) R(phi)^T`, expanded analytically so the
/// result is exactly symmetric.
pub fn build_rotated_matrix(spec: &SaddleSpec) -> Mat2 {
    let (s, c) = sin_cos(spec.phi);
    let (l, m) = (spec.lambda, spec.mu);
    let off = -(l + m) * c * s;
    Mat2::new(-m * c * c + l * s * s, off, off, -m * s * s + l * c * c)
}

/// `|x0| (cos phi, sin phi)`, on the stable manifold.
pub fn initial_value(spec: &SaddleSpec) -> Vec2 {
    let (s, c) = sin_cos(spec.phi);
    Vec2::new(spec.x0_magnitude * c, spec.x0_magnitude * s)
}

pub fn eigenstructure(spec: &SaddleSpec) -> EigenStructure {
    let (s, c) = sin_cos(spec.phi);
    let v1 = Vec2::new(c, s);
    let v2 = Vec2::new(-s, c);
    EigenStructure { v1, v2, v1p: v1, v2p: v2 }
}

/// `R diag(e^{-mu t}, e^{lambda t}) R^T x` in binary64.
pub fn exact_linear_flow(spec: &SaddleSpec, x: Vec2, t: f64) -> Result<Vec2> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("flow time must be non-negative, got {t}")));
    }
    let r = rotation(spec.phi);
    let decay = (-spec.mu * t).exp();
    let growth = (spec.lambda * t).exp();
    let u = r.transpose().apply(x);
    let out = r.apply(Vec2::new(u.c1 * decay, u.c2 * growth));
    if !out.is_finite() {
        return Err(Error::Divergence { step: 0, t });
    }
    Ok(out)
}

type VecField = dyn Fn(Vec2) -> Vec2 + Send + Sync;
type JacField = dyn Fn(Vec2) -> Mat2 + Send + Sync;

/// `b(x) = B x + tau(x)` with `tau(x) = O(|x|^2)`.
#[derive(Clone)]
pub struct GeneralSystem {
    pub linear_part: Mat2,
    tau: Arc<VecField>,
    tau_jacobian: Arc<JacField>,
}

impl fmt::Debug for GeneralSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralSystem").field("linear_part", &self.linear_part).finish_non_exhaustive()
    }
}

impl GeneralSystem {
    /// Checks `tau(0) = 0` and `D tau(0) = 0` before accepting the callbacks.
    pub fn new<T, J>(linear_part: Mat2, tau: T, tau_jacobian: J) -> Result<Self>
    where
        T: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        J: Fn(Vec2) -> Mat2 + Send + Sync + 'static,
    {
        if tau(Vec2::ZERO) != Vec2::ZERO {
            return Err(Error::config("tau", "nonlinearity must vanish at the origin"));
        }
        if tau_jacobian(Vec2::ZERO) != Mat2::ZERO {
            return Err(Error::config("tau_jacobian", "Jacobian of the nonlinearity must vanish at the origin"));
        }
        EigenStructure::of_saddle_matrix(&linear_part)?;
        Ok(GeneralSystem { linear_part, tau: Arc::new(tau), tau_jacobian: Arc::new(tau_jacobian) })
    }

    pub fn linear(linear_part: Mat2) -> Result<Self> {
        Self::new(linear_part, |_| Vec2::ZERO, |_| Mat2::ZERO)
    }

    pub fn from_spec(spec: &SaddleSpec) -> Self {
        // The rotated saddle always has det = -lambda mu < 0.
        Self::linear(build_rotated_matrix(spec)).expect("rotated saddle is a saddle")
    }

    pub fn field(&self, x: Vec2) -> Vec2 {
        self.linear_part.apply(x).add((self.tau)(x))
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        self.linear_part.add(&(self.tau_jacobian)(x))
    }

    pub fn eigen(&self) -> (f64, f64, EigenStructure) {
        EigenStructure::of_saddle_matrix(&self.linear_part).expect("validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

    #[test]
    fn rotated_matrix_examples() {
        let b = build_rotated_matrix(&SaddleSpec::symmetric(0.0));
        assert_eq!(b, Mat2::diag(-1.0, 1.0));
        let b = build_rotated_matrix(&SaddleSpec::symmetric(FRAC_PI_4));
        assert!(b.m[0][0].abs() < 1e-15 && b.m[1][1].abs() < 1e-15);
        assert!((b.m[0][1] + 1.0).abs() < 1e-15 && (b.m[1][0] + 1.0).abs() < 1e-15);
        // The matrix-product route agrees.
        let r = rotation(PI / 5.0);
        let spec = SaddleSpec::new(2.0, 0.5, PI / 5.0, 1.0).unwrap();
        let via_product = r.mul(&Mat2::diag(-0.5, 2.0)).mul(&r.transpose());
        let b = build_rotated_matrix(&spec);
        for i in 0..2 {
            for j in 0..2 {
                assert!((b.m[i][j] - via_product.m[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(b.m[0][1], b.m[1][0]);
    }

    #[test]
    fn initial_value_examples() {
        assert_eq!(initial_value(&SaddleSpec::symmetric(0.0)), Vec2::new(1.0, 0.0));
        let x = initial_value(&SaddleSpec::symmetric(PI / 5.0));
        assert!((x.c1 - 0.809_016_994_374_947_4).abs() < 1e-15);
        assert!((x.c2 - 0.587_785_252_292_473_1).abs() < 1e-15);
        let x = initial_value(&SaddleSpec::symmetric(FRAC_PI_4));
        assert_eq!(x, Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
    }

    #[test]
    fn eigenstructure_examples() {
        let e = eigenstructure(&SaddleSpec::symmetric(0.0));
        assert_eq!((e.v1, e.v2), (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)));
        assert_eq!(e.v1p.dot(e.v1), 1.0);
        assert_eq!(e.v1p.dot(e.v2), 0.0);
        let e = eigenstructure(&SaddleSpec::symmetric(PI / 5.0));
        assert!((e.v1.c1 * e.v2p.c1 + 0.475_528_258_147_576_8).abs() < 1e-15);
        // Eigen-equations hold for the rotated matrix.
        let spec = SaddleSpec::new(1.5, 0.7, 0.9, 1.0).unwrap();
        let b = build_rotated_matrix(&spec);
        let e = eigenstructure(&spec);
        let bv1 = b.apply(e.v1);
        let bv2 = b.apply(e.v2);
        assert!((bv1.c1 + 0.7 * e.v1.c1).abs() < 1e-15 && (bv1.c2 + 0.7 * e.v1.c2).abs() < 1e-15);
        assert!((bv2.c1 - 1.5 * e.v2.c1).abs() < 1e-15 && (bv2.c2 - 1.5 * e.v2.c2).abs() < 1e-15);
    }

    #[test]
    fn general_eigenstructure_matches_analytic() {
        let spec = SaddleSpec::new(1.3, 0.4, 0.5, 1.0).unwrap();
        let (l, m, e) = EigenStructure::of_saddle_matrix(&build_rotated_matrix(&spec)).unwrap();
        assert!((l - 1.3).abs() < 1e-14 && (m - 0.4).abs() < 1e-14);
        let ea = eigenstructure(&spec);
        for (a, b) in [(e.v1, ea.v1), (e.v2, ea.v2)] {
            // Same line; orientation may differ.
            assert!((a.dot(b).abs() - 1.0).abs() < 1e-14);
        }
        assert!((e.v1p.dot(e.v1) - 1.0).abs() < 1e-14);
        assert!(e.v1p.dot(e.v2).abs() < 1e-14);
        assert!(e.v2p.dot(e.v1).abs() < 1e-14);
        // Non-orthogonal saddle.
        let b = Mat2::new(1.0, 2.0, 0.0, -3.0);
        let (l, m, e) = EigenStructure::of_saddle_matrix(&b).unwrap();
        assert!((l - 1.0).abs() < 1e-14 && (m - 3.0).abs() < 1e-14);
        assert!((e.v2p.dot(e.v2) - 1.0).abs() < 1e-14 && e.v2p.dot(e.v1).abs() < 1e-14);
        assert!(EigenStructure::of_saddle_matrix(&Mat2::diag(1.0, 2.0)).is_err());
    }

    #[test]
    fn flow_examples() {
        let spec = SaddleSpec::symmetric(0.0);
        let x = Vec2::new(0.3, 0.2);
        assert_eq!(exact_linear_flow(&spec, x, 0.0).unwrap(), x);
        let y = exact_linear_flow(&spec, Vec2::new(1.0, 0.0), 1.0).unwrap();
        assert!((y.c1 - (-1.0f64).exp()).abs() < 1e-16 && y.c2 == 0.0);
        let spec = SaddleSpec::symmetric(PI / 5.0);
        let x0 = initial_value(&spec);
        let y = exact_linear_flow(&spec, x0, 10.0).unwrap();
        assert!(y.norm() < x0.norm() * (-9.0f64).exp());
        assert!(matches!(exact_linear_flow(&spec, x0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(exact_linear_flow(&spec, Vec2::new(0.0, 1.0), 800.0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(SaddleSpec::new(0.0, 1.0, 0.1, 1.0).is_err());
        assert!(SaddleSpec::new(1.0, -1.0, 0.1, 1.0).is_err());
        assert!(SaddleSpec::new(1.0, 1.0, PI / 2.0, 1.0).is_err());
        assert!(SaddleSpec::new(1.0, 1.0, 0.1, 1.5).is_err());
    }

    #[test]
    fn general_system_rejects_bad_tau() {
        let b = Mat2::diag(-1.0, 1.0);
        assert!(GeneralSystem::new(b, |_| Vec2::new(1.0, 0.0), |_| Mat2::ZERO).is_err());
        assert!(GeneralSystem::new(b, |_| Vec2::ZERO, |_| Mat2::IDENTITY).is_err());
        let g = GeneralSystem::from_spec(&SaddleSpec::symmetric(0.3));
        let x = Vec2::new(0.2, -0.4);
        assert_eq!(g.field(x), build_rotated_matrix(&SaddleSpec::symmetric(0.3)).apply(x));
    }

    proptest! {
        #[test]
        fn similarity_invariants(l in 0.1f64..5.0, m in 0.1f64..5.0, phi in 0.0f64..1.57) {
            let b = build_rotated_matrix(&SaddleSpec::new(l, m, phi, 1.0).unwrap());
            prop_assert!((b.det() + l * m).abs() <= 1e-14 * l * m * 4.0);
            prop_assert!((b.trace() - (l - m)).abs() <= 1e-14 * (l + m));
        }

        #[test]
        fn biorthogonality(phi in 0.0f64..1.57) {
            let e = eigenstructure(&SaddleSpec::symmetric(phi));
            prop_assert!((e.v1p.dot(e.v1) - 1.0).abs() <= 8.0 * f64::EPSILON);
            prop_assert!((e.v2p.dot(e.v2) - 1.0).abs() <= 8.0 * f64::EPSILON);
            prop_assert!(e.v1p.dot(e.v2).abs() <= 4.0 * f64::EPSILON);
            prop_assert!(e.v2p.dot(e.v1).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn flow_semigroup(s in 0.0f64..10.0, t in 0.0f64..10.0, phi in 0.0f64..1.57) {
            let spec = SaddleSpec::symmetric(phi);
            let x = Vec2::new(0.6, -0.3);
            let a = exact_linear_flow(&spec, exact_linear_flow(&spec, x, t).unwrap(), s).unwrap();
            let b = exact_linear_flow(&spec, x, s + t).unwrap();
            prop_assert!(a.sub(b).norm() <= 1e-12 * b.norm());
        }

        #[test]
        fn initial_value_stays_on_stable_manifold(t in 0.0f64..30.0, phi in 0.0f64..1.57) {
            let spec = SaddleSpec::symmetric(phi);
            let e = eigenstructure(&spec);
            let x = exact_linear_flow(&spec, initial_value(&spec), t).unwrap();
            // Only carrier noise survives, amplified at most by e^{lambda t}.
            prop_assert!(e.v2p.dot(x).abs() <= 4.0 * f64::EPSILON * (t).exp());
        }
    }
}
