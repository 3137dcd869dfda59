//! Dephasing-representation estimator of the fidelity amplitude.
//!
//! `O_DR(t) = Σ_j w_j · exp(i ΔS_j(t) / ħ)`, with `ΔS_j(t)` accumulated along the
//! unperturbed orbit of sample `j`. No prefactors, no root search: each sample
//! contributes a unit-modulus phase.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{action_difference, kick_drift, MapSpec};
use crate::error::{Error, Result};
use crate::initial_states::{SampleKind, SampleSet, WeightedSample};

/// Samples per reduction chunk. Chunks are summed in index order, so results do
/// not depend on the number of workers.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dr,
    Exact,
    Dense,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dr => "dr",
            Method::Exact => "exact",
            Method::Dense => "dense",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(Method::Dr),
            "exact" => Ok(Method::Exact),
            "dense" => Ok(Method::Dense),
            other => Err(Error::invalid(format!("unknown method '{other}' (expected dr, exact or dense)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub spec: MapSpec,
    pub state: String,
    pub samples: usize,
    pub seed: Option<u64>,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub amplitude: Complex64,
    /// `M(t) = |O(t)|²`.
    pub fidelity: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

impl CurvePoint {
    pub fn exact(amplitude: Complex64) -> Self {
        Self { amplitude, fidelity: amplitude.norm_sqr(), stderr_re: 0.0, stderr_im: 0.0 }
    }

    /// First-order propagated standard error of `M`.
    pub fn fidelity_stderr(&self) -> f64 {
        2.0 * (self.amplitude.re * self.stderr_re).hypot(self.amplitude.im * self.stderr_im)
    }
}

/// Fidelity amplitude and fidelity at integer kicks `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityCurve {
    pub meta: CurveMeta,
    pub points: Vec<CurvePoint>,
}

impl FidelityCurve {
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fidelity).collect()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.amplitude).collect()
    }
}

/// Per-step weighted sums for one chunk of samples.
struct PhaseSums {
    weight: f64,
    re: Vec<f64>,
    im: Vec<f64>,
    re_sq: Vec<f64>,
    im_sq: Vec<f64>,
}

impl PhaseSums {
    fn zeros(len: usize) -> Self {
        Self { weight: 0.0, re: vec![0.0; len], im: vec![0.0; len], re_sq: vec![0.0; len], im_sq: vec![0.0; len] }
    }

    fn absorb(&mut self, other: &PhaseSums) {
        self.weight += other.weight;
        for (dst, src) in [
            (&mut self.re, &other.re),
            (&mut self.im, &other.im),
            (&mut self.re_sq, &other.re_sq),
            (&mut self.im_sq, &other.im_sq),
        ] {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }
}

fn chunk_sums(spec: &MapSpec, chunk: &[WeightedSample], steps: usize, count: f64) -> PhaseSums {
    let mut sums = PhaseSums::zeros(steps + 1);
    let (k, eps, hbar) = (spec.k(), spec.epsilon(), spec.hbar());
    for s in chunk {
        let w = s.weight;
        let nw = count * w;
        sums.weight += w;
        let (mut q, mut p) = (s.point.q, s.point.p);
        let mut cos_sum = 0.0;
        for t in 0..=steps {
            let phase = action_difference(eps, cos_sum) / hbar;
            let (sin, cos) = phase.sin_cos();
            sums.re[t] += w * cos;
            sums.im[t] += w * sin;
            sums.re_sq[t] += (nw * cos) * (nw * cos);
            sums.im_sq[t] += (nw * sin) * (nw * sin);
            if t < steps {
                let cos;
                (q, p, cos) = kick_drift(k, q, p);
                cos_sum += cos;
            }
        }
    }
    sums
}

fn standard_error(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return f64::NAN;
    }
    // y_j = n·w_j·(cos|sin); mean(y) = sum
    let var = ((sum_sq - n * sum * sum) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

/// Dephasing-representation fidelity curve over `steps` kicks.
///
/// The weighted phase sum is divided by the total weight, which is 1 for every
/// sampler in this crate up to rounding.
///
/// Work is `O(count · steps)`: each orbit is traced once and its phase read off
/// at every kick. Quadrature sample sets report zero standard error.
pub fn dr_curve(spec: &MapSpec, samples: &SampleSet, steps: usize) -> Result<FidelityCurve> {
    if samples.is_empty() {
        return Err(Error::invalid("dephasing estimate needs at least one sample"));
    }
    let n = samples.len() as f64;
    let partials: Vec<PhaseSums> =
        samples.samples.par_chunks(CHUNK).map(|chunk| chunk_sums(spec, chunk, steps, n)).collect();
    let mut total = PhaseSums::zeros(steps + 1);
    for part in &partials {
        total.absorb(part);
    }

    // Dividing by the weight total, accumulated in the same order as the phase
    // sums, makes O(0) and the ε = 0 curve exactly 1.
    let norm = total.weight;
    if !(norm.abs() > 0.0) {
        return Err(Error::invalid(format!("sample weights sum to {norm}")));
    }
    let monte_carlo = matches!(samples.kind, SampleKind::MonteCarlo { .. });
    let points = (0..=steps)
        .map(|t| {
            let amplitude = Complex64::new(total.re[t] / norm, total.im[t] / norm);
            let (stderr_re, stderr_im) = if monte_carlo {
                (
                    standard_error(total.re[t], total.re_sq[t], n) / norm.abs(),
                    standard_error(total.im[t], total.im_sq[t], n) / norm.abs(),
                )
            } else {
                (0.0, 0.0)
            };
            CurvePoint { amplitude, fidelity: amplitude.norm_sqr(), stderr_re, stderr_im }
        })
        .collect();

    Ok(FidelityCurve {
        meta: CurveMeta {
            spec: *spec,
            state: samples.descriptor.clone(),
            samples: samples.len(),
            seed: samples.seed(),
            method: Method::Dr,
        },
        points,
    })
}

/// Checks `O_B(t) = conj(O_A(t))` for two estimates that differ only in the sign of ε.
///
/// Errors if the curves were not produced from the same map, state and samples.
pub fn dr_conjugation_check(a: &FidelityCurve, b: &FidelityCurve) -> Result<bool> {
    let (ma, mb) = (&a.meta, &b.meta);
    let same_map = ma.spec.k() == mb.spec.k()
        && ma.spec.dim() == mb.spec.dim()
        && ma.spec.epsilon().abs() == mb.spec.epsilon().abs();
    if !same_map
        || ma.state != mb.state
        || ma.samples != mb.samples
        || ma.seed != mb.seed
        || ma.method != mb.method
        || a.points.len() != b.points.len()
    {
        return Err(Error::invalid("curves differ in more than the sign of epsilon"));
    }
    const TOL: f64 = 1e-15;
    Ok(a.points
        .iter()
        .zip(&b.points)
        .all(|(x, y)| (x.amplitude.re - y.amplitude.re).abs() <= TOL && (x.amplitude.im + y.amplitude.im).abs() <= TOL))
}
