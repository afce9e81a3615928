use serde::{Deserialize, Serialize};

use crate::numerics::Vec2;
use crate::system::EigenStructure;

/// A crossing of one of the lines through 0 along `cos(theta) v1 +- sin(theta) v2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Distance of the interpolated crossing point from the origin.
    pub y: f64,
    /// Position of the crossing between the two states, in `[0, 1]`.
    pub fraction: f64,
    /// `+1` for the `+ sin(theta) v2` line, `-1` for the other.
    pub branch: i8,
    pub point: Vec2,
}

/// Line-crossing test `g(u) = tan(theta) |u1| - |u2|` in eigen-coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LineDetector {
    pub eig: EigenStructure,
    pub tan_theta: f64,
}

impl LineDetector {
    pub fn new(eig: EigenStructure, theta: f64) -> Self {
        LineDetector { eig, tan_theta: theta.tan() }
    }

    #[inline]
    pub fn gauge(&self, x: Vec2) -> f64 {
        let (u1, u2) = self.eig.coords(x);
        self.tan_theta * u1.abs() - u2.abs()
    }

    /// Crossing between `prev` and `next`, given their precomputed gauges.
    #[inline]
    pub fn crossing_from_gauges(&self, prev: Vec2, next: Vec2, g_prev: f64, g_next: f64) -> Option<Crossing> {
        let changed = (g_prev > 0.0 && g_next <= 0.0) || (g_prev < 0.0 && g_next >= 0.0);
        if !changed {
            return None;
        }
        let fraction = g_prev / (g_prev - g_next);
        let point = prev.add(next.sub(prev).scale(fraction));
        let (_, u2) = self.eig.coords(point);
        let branch = if u2 >= 0.0 { 1 } else { -1 };
        Some(Crossing { y: point.norm(), fraction, branch, point })
    }
}

/// Detects a crossing of the lines through the origin at angle `theta` to
/// `v1` between two consecutive post-step states, interpolating linearly.
pub fn detect_hit(x_prev: Vec2, x_next: Vec2, eig: &EigenStructure, theta: f64) -> Option<Crossing> {
    let det = LineDetector::new(*eig, theta);
    det.crossing_from_gauges(x_prev, x_next, det.gauge(x_prev), det.gauge(x_next))
}
