//! Pseudotrajectory residuals and shadow-orbit refinement.
//!
//! A true orbit of `f^ε` is an `ε·sup|∇V|`-pseudotrajectory of `f⁰`, and adding
//! per-step noise of size `δ` makes it a `(δ + ε·sup|∇V|)`-pseudotrajectory.
//! [`refine_shadow`] looks for a true orbit of a target map near a given
//! pseudo-orbit by Newton iteration on all orbit equations at once.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{kick_drift, tangent, wrap, wrap_centered, MapSpec, PhasePoint};
use crate::error::{Error, Result};
use crate::initial_states::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    PerturbedMap,
    UnperturbedMap,
    Noisy,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMap {
    Unperturbed,
    Perturbed,
}

impl TargetMap {
    fn perturbed(self) -> bool {
        matches!(self, TargetMap::Perturbed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit {
    points: Vec<PhasePoint>,
    pub generator: Generator,
    /// Claimed per-step noise bound δ.
    pub noise_delta: f64,
}

impl PseudoOrbit {
    pub fn new(points: Vec<PhasePoint>, generator: Generator, noise_delta: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!("a pseudo-orbit needs at least 2 points, got {}", points.len())));
        }
        if !(noise_delta >= 0.0) {
            return Err(Error::invalid(format!("noise bound must be nonnegative, got {noise_delta}")));
        }
        Ok(Self { points, generator, noise_delta })
    }

    /// True orbit of `f⁰` or `f^ε` of `steps` steps from `x0`.
    pub fn true_orbit(spec: &MapSpec, x0: PhasePoint, steps: usize, map: TargetMap) -> Result<Self> {
        let kick = spec.kick_strength(map.perturbed());
        let mut points = Vec::with_capacity(steps + 1);
        let (mut q, mut p) = (x0.q, x0.p);
        points.push(x0);
        for _ in 0..steps {
            (q, p, _) = kick_drift(kick, q, p);
            points.push(PhasePoint { q, p });
        }
        let generator = match map {
            TargetMap::Perturbed => Generator::PerturbedMap,
            TargetMap::Unperturbed => Generator::UnperturbedMap,
        };
        Self::new(points, generator, 0.0)
    }

    /// Orbit of `f^ε` with independent uniform noise in `[−δ, δ)` added to each
    /// coordinate after every step.
    pub fn noisy_orbit(spec: &MapSpec, x0: PhasePoint, steps: usize, delta: f64, rng: &mut impl Rng) -> Result<Self> {
        let kick = spec.kick_strength(true);
        let mut points = Vec::with_capacity(steps + 1);
        let (mut q, mut p) = (x0.q, x0.p);
        points.push(x0);
        for _ in 0..steps {
            let (q1, p1, _) = kick_drift(kick, q, p);
            q = wrap(q1 + delta * (2.0 * rng.random::<f64>() - 1.0));
            p = wrap(p1 + delta * (2.0 * rng.random::<f64>() - 1.0));
            points.push(PhasePoint { q, p });
        }
        Self::new(points, Generator::Noisy, delta)
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult {
    pub shadow_points: Vec<PhasePoint>,
    /// `max_n |x_n − x̃_n|` in the torus sup metric.
    pub shadow_distance: f64,
    /// `max_n |x_{n+1} − f(x_n)|` of the returned points.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Per-step defects `x_{n+1} − f(x_n)`, wrapped to the shortest displacement.
fn defects(kick: f64, points: &[PhasePoint]) -> Vec<Vector2<f64>> {
    points
        .windows(2)
        .map(|w| {
            let (q, p, _) = kick_drift(kick, w[0].q, w[0].p);
            Vector2::new(wrap_centered(w[1].q - q), wrap_centered(w[1].p - p))
        })
        .collect()
}

fn sup_norm(defects: &[Vector2<f64>]) -> f64 {
    defects.iter().map(|d| d.amax()).fold(0.0, f64::max)
}

/// `max_n |x̃_{n+1} − f(x̃_n)|` against `f⁰` or `f^ε`.
pub fn pseudo_residual(spec: &MapSpec, orbit: &PseudoOrbit, against: TargetMap) -> f64 {
    sup_norm(&defects(spec.kick_strength(against.perturbed()), &orbit.points))
}

pub const REFINE_MAX_STEPS: usize = 10_000;
pub const REFINE_MIN_TOL: f64 = 1e-13;

/// Minimum-norm Newton correction `Δ = −Jᵀ (J Jᵀ)⁻¹ F` for the orbit equations.
///
/// `J Jᵀ` is symmetric positive definite and block tridiagonal with 2×2 blocks
/// `A_n = D_n D_nᵀ + I` on the diagonal and `−D_{n+1}` below it, where
/// `D_n = Df(x_n)`; it is solved by block forward elimination.
fn newton_correction(kick: f64, points: &[PhasePoint], f: &[Vector2<f64>]) -> Option<Vec<Vector2<f64>>> {
    let m = f.len();
    let d: Vec<Matrix2<f64>> = points.iter().map(|x| tangent(kick, x.q)).collect();
    let mut upper = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for n in 0..m {
        let mut diag = d[n] * d[n].transpose() + Matrix2::identity();
        let mut b = -f[n];
        if n > 0 {
            let lower = -d[n];
            diag -= lower * upper[n - 1];
            b -= lower * rhs[n - 1];
        }
        let inv = diag.try_inverse()?;
        // block (n, n+1) = −D_{n+1}ᵀ
        upper.push(if n + 1 < m { inv * (-d[n + 1].transpose()) } else { Matrix2::zeros() });
        rhs.push(inv * b);
    }
    let mut y = vec![Vector2::zeros(); m];
    for n in (0..m).rev() {
        y[n] = if n + 1 < m { rhs[n] - upper[n] * y[n + 1] } else { rhs[n] };
    }
    let mut dx = Vec::with_capacity(m + 1);
    for n in 0..=m {
        let mut v = Vector2::zeros();
        if n > 0 {
            v += y[n - 1];
        }
        if n < m {
            v -= d[n].transpose() * y[n];
        }
        dx.push(v);
    }
    Some(dx)
}

fn displaced(points: &[PhasePoint], dx: &[Vector2<f64>], scale: f64) -> Vec<PhasePoint> {
    points
        .iter()
        .zip(dx)
        .map(|(x, d)| PhasePoint { q: wrap(x.q + scale * d[0]), p: wrap(x.p + scale * d[1]) })
        .collect()
}

/// Searches for a true orbit of `target` near `orbit`.
///
/// Endpoints are free. A trial step that increases the residual is retried at
/// half the damping factor. Non-convergence is reported, not raised.
pub fn refine_shadow(
    spec: &MapSpec,
    orbit: &PseudoOrbit,
    target: TargetMap,
    tol: f64,
    max_iter: usize,
) -> Result<ShadowResult> {
    if orbit.steps() > REFINE_MAX_STEPS {
        return Err(Error::Capacity(format!(
            "shadow refinement is limited to {REFINE_MAX_STEPS} steps, got {}",
            orbit.steps()
        )));
    }
    if !(tol >= REFINE_MIN_TOL) {
        return Err(Error::invalid(format!("tolerance must be at least {REFINE_MIN_TOL:e}, got {tol}")));
    }
    let kick = spec.kick_strength(target.perturbed());
    let mut points = orbit.points.clone();
    let mut f = defects(kick, &points);
    let mut residual = sup_norm(&f);
    let mut damping: f64 = 1.0;
    let mut iterations = 0;

    while residual >= tol && iterations < max_iter {
        iterations += 1;
        let Some(dx) = newton_correction(kick, &points, &f) else { break };
        let mut accepted = false;
        while damping > 1e-6 {
            let trial = displaced(&points, &dx, damping);
            let trial_f = defects(kick, &trial);
            let trial_res = sup_norm(&trial_f);
            if trial_res < residual {
                (points, f, residual) = (trial, trial_f, trial_res);
                accepted = true;
                damping = (damping * 2.0).min(1.0);
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let shadow_distance = points.iter().zip(&orbit.points).map(|(a, b)| a.torus_distance(b)).fold(0.0, f64::max);
    Ok(ShadowResult { shadow_points: points, shadow_distance, residual, converged: residual < tol, iterations })
}

/// Rough shadowing horizon `t_S ∼ ε^{−1/2}`.
pub fn shadow_time_estimate(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("shadowing time needs epsilon > 0, got {epsilon}")));
    }
    Ok(epsilon.powf(-0.5))
}

/// Summary of refining many unperturbed orbits against `f^ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowingSurvey {
    pub orbits: usize,
    pub horizon: usize,
    pub tol: f64,
    /// Fraction of orbits refined to a true orbit within `tol`.
    pub shadowable_fraction: f64,
    pub median_distance: Option<f64>,
    pub max_distance: Option<f64>,
    pub estimated_shadow_time: Option<f64>,
}

/// Refines `orbits` random unperturbed orbits of length `horizon` against `f^ε`.
pub fn shadowing_survey(
    spec: &MapSpec,
    orbits: usize,
    horizon: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<ShadowingSurvey> {
    if orbits == 0 || horizon == 0 {
        return Err(Error::invalid("survey needs at least one orbit and one step"));
    }
    let results: Vec<ShadowResult> = (0..orbits as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let x0 = PhasePoint { q: rng.random(), p: rng.random() };
            let orbit = PseudoOrbit::true_orbit(spec, x0, horizon, TargetMap::Unperturbed)?;
            refine_shadow(spec, &orbit, TargetMap::Perturbed, tol, max_iter)
        })
        .collect::<Result<_>>()?;
    let mut distances: Vec<f64> = results.iter().filter(|r| r.converged).map(|r| r.shadow_distance).collect();
    distances.sort_by(f64::total_cmp);
    Ok(ShadowingSurvey {
        orbits,
        horizon,
        tol,
        shadowable_fraction: distances.len() as f64 / orbits as f64,
        median_distance: distances.get(distances.len() / 2).copied(),
        max_distance: distances.last().copied(),
        estimated_shadow_time: shadow_time_estimate(spec.epsilon().abs()).ok(),
    })
}
