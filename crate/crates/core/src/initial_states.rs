//! Weighted phase-space samples standing in for the initial quantum state.
//!
//! Every Monte Carlo sample is drawn from its own ChaCha stream keyed by
//! `(seed, index)`, so a sample set does not depend on how the index range is
//! split across workers.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap, MapSpec, PhasePoint};
use crate::error::{Error, Result};

/// Source of signed phase-space samples for the Wigner form of the estimator.
///
/// `draw` returns an unnormalized weight; sample sets divide by the count.
pub trait WignerSource: Send + Sync + fmt::Debug {
    fn draw(&self, rng: &mut ChaCha8Rng) -> WeightedSample;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone)]
pub enum InitialState {
    PositionEigenstate {
        q0: f64,
    },
    /// Periodized Gaussian with position-density width `sigma` and mean momentum `p0`.
    GaussianWavepacket {
        q0: f64,
        p0: f64,
        sigma: f64,
    },
    Wigner(Arc<dyn WignerSource>),
}

impl InitialState {
    pub fn describe(&self) -> String {
        match self {
            InitialState::PositionEigenstate { q0 } => format!("position(q0={q0})"),
            InitialState::GaussianWavepacket { q0, p0, sigma } => {
                format!("gaussian(q0={q0},p0={p0},sigma={sigma})")
            }
            InitialState::Wigner(src) => src.describe(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub point: PhasePoint,
    /// Signed; negative values are allowed for general Wigner functions.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Deterministic quadrature; carries no sampling error.
    Quadrature,
    MonteCarlo {
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<WeightedSample>,
    pub kind: SampleKind,
    pub descriptor: String,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        match self.kind {
            SampleKind::Quadrature => None,
            SampleKind::MonteCarlo { seed } => Some(seed),
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionMode {
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianMode {
    /// Positions from `|ψ(q)|²`, every momentum equal to `p0`.
    PositionOnly,
    /// Positions and momenta from the Gaussian Wigner function.
    Wigner,
}

/// Independent random stream for sample `index`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Grid index of `q0`, or an error if `q0·N` is not an integer.
pub fn grid_index(spec: &MapSpec, q0: f64) -> Result<usize> {
    let n = spec.dim();
    if !q0.is_finite() || !(0.0..1.0).contains(&q0) {
        return Err(Error::invalid(format!("position {q0} is not in [0, 1)")));
    }
    let scaled = q0 * n as f64;
    let idx = scaled.round();
    if (scaled - idx).abs() > 1e-9 {
        return Err(Error::invalid(format!("position {q0} is not aligned with the {n}-point grid")));
    }
    Ok(idx as usize % n)
}

/// Samples for a position eigenstate `|q0⟩`: fixed position, momenta spread over the torus.
///
/// `Grid` returns the `N` momenta `j/N` with weight `1/N` and requires `count == N`.
pub fn samples_position_state(
    spec: &MapSpec,
    q0: f64,
    count: usize,
    mode: PositionMode,
    seed: u64,
) -> Result<SampleSet> {
    let n = spec.dim();
    let q = grid_index(spec, q0)? as f64 / n as f64;
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let descriptor = format!("position(q0={q0})");
    match mode {
        PositionMode::Grid => {
            if count != n {
                return Err(Error::invalid(format!(
                    "grid mode uses one sample per momentum grid point: count must be {n}, got {count}"
                )));
            }
            let w = 1.0 / n as f64;
            let samples =
                (0..n).map(|j| WeightedSample { point: PhasePoint { q, p: j as f64 / n as f64 }, weight: w }).collect();
            Ok(SampleSet { samples, kind: SampleKind::Quadrature, descriptor })
        }
        PositionMode::MonteCarlo => {
            let w = 1.0 / count as f64;
            let samples = (0..count as u64)
                .into_par_iter()
                .map(|i| {
                    let p: f64 = substream(seed, i).random();
                    WeightedSample { point: PhasePoint { q, p }, weight: w }
                })
                .collect();
            Ok(SampleSet { samples, kind: SampleKind::MonteCarlo { seed }, descriptor })
        }
    }
}

/// Gaussian Wigner function on the torus: independent wrapped normals in `q` and `p`
/// with `σ_p = ħ / (2σ)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianWigner {
    q0: f64,
    p0: f64,
    position: Normal<f64>,
    momentum: Normal<f64>,
}

impl GaussianWigner {
    pub fn new(spec: &MapSpec, q0: f64, p0: f64, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        check_center(q0, p0)?;
        let sigma_p = spec.hbar() / (2.0 * sigma);
        Ok(Self {
            q0,
            p0,
            position: Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?,
            momentum: Normal::new(0.0, sigma_p).map_err(|e| Error::invalid(e.to_string()))?,
        })
    }

    pub fn momentum_width(&self) -> f64 {
        self.momentum.std_dev()
    }
}

impl WignerSource for GaussianWigner {
    fn draw(&self, rng: &mut ChaCha8Rng) -> WeightedSample {
        let q = wrap(self.q0 + self.position.sample(rng));
        let p = wrap(self.p0 + self.momentum.sample(rng));
        WeightedSample { point: PhasePoint { q, p }, weight: 1.0 }
    }

    fn describe(&self) -> String {
        format!("gaussian_wigner(q0={},p0={},sigma={})", self.q0, self.p0, self.position.std_dev())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 && sigma < 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(format!("wavepacket width sigma must lie in (0, 0.5), got {sigma}")))
    }
}

fn check_center(q0: f64, p0: f64) -> Result<()> {
    if q0.is_finite() && p0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("wavepacket center ({q0}, {p0}) must be finite")))
    }
}

/// Monte Carlo sample set from an arbitrary Wigner source, weights scaled by `1/count`.
pub fn samples_from_wigner(source: &dyn WignerSource, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let scale = 1.0 / count as f64;
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = source.draw(&mut substream(seed, i));
            WeightedSample { point: s.point, weight: s.weight * scale }
        })
        .collect();
    Ok(SampleSet { samples, kind: SampleKind::MonteCarlo { seed }, descriptor: source.describe() })
}

pub fn samples_gaussian(
    spec: &MapSpec,
    q0: f64,
    p0: f64,
    sigma: f64,
    count: usize,
    mode: GaussianMode,
    seed: u64,
) -> Result<SampleSet> {
    match mode {
        GaussianMode::Wigner => samples_from_wigner(&GaussianWigner::new(spec, q0, p0, sigma)?, count, seed),
        GaussianMode::PositionOnly => {
            check_sigma(sigma)?;
            check_center(q0, p0)?;
            if count == 0 {
                return Err(Error::invalid("sample count must be at least 1"));
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
            let w = 1.0 / count as f64;
            let p = wrap(p0);
            let samples = (0..count as u64)
                .into_par_iter()
                .map(|i| {
                    let q = wrap(q0 + normal.sample(&mut substream(seed, i)));
                    WeightedSample { point: PhasePoint { q, p }, weight: w }
                })
                .collect();
            Ok(SampleSet {
                samples,
                kind: SampleKind::MonteCarlo { seed },
                descriptor: format!("gaussian_position(q0={q0},p0={p0},sigma={sigma})"),
            })
        }
    }
}

/// Sum over integer images `f(x + m)`, truncated once both tails fall below 1e-16.
pub(crate) fn sum_images(x: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut total = f(x);
    for m in 1.. {
        let m = m as f64;
        let (a, b) = (f(x + m), f(x - m));
        total += a + b;
        if a.abs() < 1e-16 && b.abs() < 1e-16 {
            break;
        }
    }
    total
}

/// Density of a normal `(mu, sigma)` wrapped onto the unit circle.
pub fn wrapped_normal_density(x: f64, mu: f64, sigma: f64) -> f64 {
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    sum_images(x - mu, |d| norm * (-d * d / (2.0 * sigma * sigma)).exp())
}
