//! Classical kicked map on the unit torus.
//!
//! The map is kick-then-drift,
//!
//! ```text
//! p' = p − ((k + ε_eff) / 2π) · sin(2π q)   (mod 1)
//! q' = q + p'                               (mod 1)
//! ```
//!
//! generated by `W(q) = −(k/4π²) cos(2π q)` and the perturbation `V(q) = W(q)/k`.
//! The effective Planck constant of the matching quantization is `ħ = 1/(2πN)`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Physical and numerical configuration of a perturbed kicked map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    k: f64,
    epsilon: f64,
    dim: usize,
    hbar: f64,
}

impl MapSpec {
    pub fn new(k: f64, epsilon: f64, dim: usize) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::invalid(format!("kick strength k must be finite, got {k}")));
        }
        if !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be finite, got {epsilon}")));
        }
        if dim < 2 {
            return Err(Error::invalid(format!("Hilbert dimension must be at least 2, got {dim}")));
        }
        Ok(Self { k, epsilon, dim, hbar: 1.0 / (2.0 * PI * dim as f64) })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Hilbert dimension `N` of the quantized torus.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Same map with a different perturbation strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.k, epsilon, self.dim)
    }

    /// Kick strength actually applied by the map.
    #[inline]
    pub(crate) fn kick_strength(&self, perturbed: bool) -> f64 {
        if perturbed {
            self.k + self.epsilon
        } else {
            self.k
        }
    }
}

/// Unperturbed potential `W(q)`.
#[inline]
pub fn potential(k: f64, q: f64) -> f64 {
    -(k / FOUR_PI_SQ) * (2.0 * PI * q).cos()
}

/// Perturbation `V(q)`; its gradient is bounded by `1/2π`.
#[inline]
pub fn perturbation(q: f64) -> f64 {
    -(2.0 * PI * q).cos() / FOUR_PI_SQ
}

/// `sup_q |∇V(q)|` for the perturbation above.
pub const PERTURBATION_GRAD_BOUND: f64 = 1.0 / (2.0 * PI);

/// Reduce onto `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed shortest displacement on the circle, in `[-0.5, 0.5)`.
#[inline]
pub fn wrap_centered(d: f64) -> f64 {
    let r = wrap(d + 0.5) - 0.5;
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Point of the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    /// Builds a point, reducing both coordinates onto `[0, 1)`.
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !q.is_finite() || !p.is_finite() {
            return Err(Error::invalid(format!("non-finite phase-space point ({q}, {p})")));
        }
        Ok(Self { q: wrap(q), p: wrap(p) })
    }

    /// Sup-norm of the shortest wrap-around displacement.
    pub fn torus_distance(&self, other: &PhasePoint) -> f64 {
        wrap_centered(self.q - other.q).abs().max(wrap_centered(self.p - other.p).abs())
    }

    fn check_finite(&self) -> Result<()> {
        if self.q.is_finite() && self.p.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("non-finite phase-space point ({}, {})", self.q, self.p)))
        }
    }
}

/// One map step, also returning `cos(2π q)` at the kick position.
///
/// Every orbit in the crate goes through this one compiled body: left to
/// inlining, LLVM may fuse `sin`/`cos` into `sincos` at some call sites only,
/// and orbits would then differ in the last bit between callers.
#[inline(never)]
pub(crate) fn kick_drift(kick: f64, q: f64, p: f64) -> (f64, f64, f64) {
    let (sin, cos) = (2.0 * PI * q).sin_cos();
    let p1 = wrap(p - kick / (2.0 * PI) * sin);
    let q1 = wrap(q + p1);
    (q1, p1, cos)
}

#[inline]
pub(crate) fn kick_drift_inverse(kick: f64, q1: f64, p1: f64) -> (f64, f64) {
    let q = wrap(q1 - p1);
    let p = wrap(p1 + kick / (2.0 * PI) * (2.0 * PI * q).sin());
    (q, p)
}

/// One application of `f⁰` (or `f^ε` when `perturbed`).
pub fn step(spec: &MapSpec, x: PhasePoint, perturbed: bool) -> Result<PhasePoint> {
    x.check_finite()?;
    let (q, p, _) = kick_drift(spec.kick_strength(perturbed), x.q, x.p);
    Ok(PhasePoint { q, p })
}

/// Exact inverse of [`step`].
pub fn step_inverse(spec: &MapSpec, x: PhasePoint, perturbed: bool) -> Result<PhasePoint> {
    x.check_finite()?;
    let (q, p) = kick_drift_inverse(spec.kick_strength(perturbed), x.q, x.p);
    Ok(PhasePoint { q, p })
}

/// Tangent map of [`step`] in `(q, p)` coordinates. Its determinant is identically 1.
pub fn jacobian(spec: &MapSpec, x: PhasePoint, perturbed: bool) -> Result<Matrix2<f64>> {
    x.check_finite()?;
    Ok(tangent(spec.kick_strength(perturbed), x.q))
}

#[inline]
pub(crate) fn tangent(kick: f64, q: f64) -> Matrix2<f64> {
    let s = kick * (2.0 * PI * q).cos();
    Matrix2::new(1.0 - s, 1.0, -s, 1.0)
}

/// An unperturbed orbit together with its accumulated action difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub start: PhasePoint,
    pub steps: usize,
    /// `ΔS = −ε Σ_{m<T} V(q_m)` along the unperturbed orbit.
    pub delta_s: f64,
    /// `T + 1` points when requested.
    pub orbit: Option<Vec<PhasePoint>>,
}

/// Runs the unperturbed map for `steps` kicks from `x0`, accumulating `ΔS`.
///
/// The orbit never depends on `spec.epsilon()`; the perturbation only enters
/// `delta_s` as an overall factor.
pub fn propagate(spec: &MapSpec, x0: PhasePoint, steps: usize, store_orbit: bool) -> Result<TrajectoryRecord> {
    x0.check_finite()?;
    let mut orbit = store_orbit.then(|| Vec::with_capacity(steps + 1));
    let (mut q, mut p) = (x0.q, x0.p);
    let mut cos_sum = 0.0;
    if let Some(o) = orbit.as_mut() {
        o.push(x0);
    }
    for _ in 0..steps {
        let cos;
        (q, p, cos) = kick_drift(spec.k, q, p);
        cos_sum += cos;
        if let Some(o) = orbit.as_mut() {
            o.push(PhasePoint { q, p });
        }
    }
    Ok(TrajectoryRecord { start: x0, steps, delta_s: action_difference(spec.epsilon, cos_sum), orbit })
}

/// `ΔS` from the running sum `Σ cos(2π q_m)`; linear in `epsilon` bit for bit.
#[inline]
pub(crate) fn action_difference(epsilon: f64, cos_sum: f64) -> f64 {
    epsilon * (cos_sum / FOUR_PI_SQ)
}
