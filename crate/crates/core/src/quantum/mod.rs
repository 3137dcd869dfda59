//! Exact quantum propagation of the kicked map on the `N`-point torus.
//!
//! One period is `U = exp(−i p̂²/2ħ) · exp(−i [W(q̂) + ε V(q̂)]/ħ)` (kick, then
//! drift) with `q_j = j/N`, `p_m = m/N` and `ħ = 1/(2πN)`. Both Bloch phases are
//! zero. The drift is applied in the momentum basis reached by a unitary DFT.

mod dense;

pub use dense::{dense_oracle, dense_step_matrix, DENSE_MAX_DIM};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dephasing::{CurveMeta, CurvePoint, FidelityCurve, Method};
use crate::dynamics::MapSpec;
use crate::error::{Error, Result};
use crate::initial_states::{grid_index, InitialState};

/// Amplitudes on the position grid `q_j = j/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<Complex64>,
    pub label: String,
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// Momentum eigenstate `|p_m⟩` expressed on the position grid.
    pub fn momentum_eigenstate(dim: usize, m: usize) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let amplitudes =
            (0..dim).map(|j| Complex64::from_polar(scale, 2.0 * PI * ((m * j) % dim) as f64 / dim as f64)).collect();
        Self { amplitudes, label: format!("momentum(m={m})") }
    }
}

/// `exp(iθ)` with `θ = π·r/N` for an integer residue `r`.
#[inline]
pub(crate) fn unit_phase(residue: u64, dim: usize) -> Complex64 {
    Complex64::from_polar(1.0, PI * residue as f64 / dim as f64)
}

/// Drift phases `exp(−iπ m²/N)`, reduced mod `2N` before conversion.
pub(crate) fn drift_phases(dim: usize) -> Vec<Complex64> {
    let two_n = 2 * dim as u64;
    (0..dim as u64).map(|m| unit_phase(m * m % two_n, dim).conj()).collect()
}

/// Kick phases `exp(−i [W(q_j) + ε V(q_j)] / ħ) = exp(i N (k+ε)/(2π) · cos(2π j/N))`.
pub(crate) fn kick_phases(dim: usize, kick: f64) -> Vec<Complex64> {
    let n = dim as f64;
    (0..dim).map(|j| Complex64::from_polar(1.0, n * kick / (2.0 * PI) * (2.0 * PI * j as f64 / n).cos())).collect()
}

pub fn build_state(spec: &MapSpec, state: &InitialState) -> Result<QuantumState> {
    let n = spec.dim();
    match state {
        InitialState::PositionEigenstate { q0 } => {
            let idx = grid_index(spec, *q0)?;
            let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
            amplitudes[idx] = Complex64::new(1.0, 0.0);
            Ok(QuantumState { amplitudes, label: state.describe() })
        }
        InitialState::GaussianWavepacket { q0, p0, sigma } => {
            if !(sigma.is_finite() && *sigma > 0.0 && *sigma < 0.5) {
                return Err(Error::invalid(format!("wavepacket width sigma must lie in (0, 0.5), got {sigma}")));
            }
            if !q0.is_finite() || !p0.is_finite() {
                return Err(Error::invalid("wavepacket center must be finite"));
            }
            let wavenumber = 2.0 * PI * n as f64 * p0;
            let mut amplitudes: Vec<Complex64> = (0..n)
                .map(|j| {
                    let x = j as f64 / n as f64 - q0;
                    let image = |d: f64| {
                        let env = (-d * d / (4.0 * sigma * sigma)).exp();
                        (env, Complex64::from_polar(env, wavenumber * d))
                    };
                    let (_, mut total) = image(x);
                    for m in 1.. {
                        let (ea, a) = image(x + m as f64);
                        let (eb, b) = image(x - m as f64);
                        total += a + b;
                        if ea < 1e-16 && eb < 1e-16 {
                            break;
                        }
                    }
                    total
                })
                .collect();
            let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            amplitudes.iter_mut().for_each(|a| *a /= norm);
            Ok(QuantumState { amplitudes, label: state.describe() })
        }
        InitialState::Wigner(src) => Err(Error::invalid(format!(
            "state '{}' has no wavefunction; the quantum route needs a position or Gaussian state",
            src.describe()
        ))),
    }
}

/// Reusable split-operator stepper for one map (`f⁰` or `f^ε`).
pub struct SplitOperator {
    kick: Vec<Complex64>,
    drift: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl SplitOperator {
    pub fn new(spec: &MapSpec, perturbed: bool) -> Self {
        let dim = spec.dim();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(dim);
        let inverse = planner.plan_fft_inverse(dim);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            kick: kick_phases(dim, spec.kick_strength(perturbed)),
            drift: drift_phases(dim),
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            scale: 1.0 / (dim as f64).sqrt(),
        }
    }

    fn check_dim(&self, psi: &QuantumState) -> Result<()> {
        if psi.dim() == self.kick.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!("state has dimension {}, map has {}", psi.dim(), self.kick.len())))
        }
    }

    fn forward_fft(&mut self, a: &mut [Complex64]) {
        self.forward.process_with_scratch(a, &mut self.scratch);
        a.iter_mut().for_each(|x| *x *= self.scale);
    }

    fn inverse_fft(&mut self, a: &mut [Complex64]) {
        self.inverse.process_with_scratch(a, &mut self.scratch);
        a.iter_mut().for_each(|x| *x *= self.scale);
    }

    /// `ψ ← U ψ`.
    pub fn apply(&mut self, psi: &mut QuantumState) -> Result<()> {
        self.check_dim(psi)?;
        let a = &mut psi.amplitudes;
        a.iter_mut().zip(&self.kick).for_each(|(x, k)| *x *= k);
        self.forward_fft(a);
        a.iter_mut().zip(&self.drift).for_each(|(x, d)| *x *= d);
        self.inverse_fft(a);
        Ok(())
    }

    /// `ψ ← U† ψ`.
    pub fn apply_adjoint(&mut self, psi: &mut QuantumState) -> Result<()> {
        self.check_dim(psi)?;
        let a = &mut psi.amplitudes;
        self.forward_fft(a);
        a.iter_mut().zip(&self.drift).for_each(|(x, d)| *x *= d.conj());
        self.inverse_fft(a);
        a.iter_mut().zip(&self.kick).for_each(|(x, k)| *x *= k.conj());
        Ok(())
    }
}

/// One period of the quantized map applied to `psi`.
pub fn step_quantum(spec: &MapSpec, psi: &QuantumState, perturbed: bool) -> Result<QuantumState> {
    let mut out = psi.clone();
    SplitOperator::new(spec, perturbed).apply(&mut out)?;
    Ok(out)
}

fn exact_meta(spec: &MapSpec, psi0: &QuantumState, method: Method) -> CurveMeta {
    CurveMeta { spec: *spec, state: psi0.label.clone(), samples: 0, seed: None, method }
}

/// Exact fidelity `O(t) = ⟨ψ_ε(t)|ψ_0(t)⟩` from two forward evolutions.
pub fn exact_fidelity_curve(spec: &MapSpec, psi0: &QuantumState, steps: usize) -> Result<FidelityCurve> {
    let mut unperturbed = SplitOperator::new(spec, false);
    let mut perturbed = SplitOperator::new(spec, true);
    let (mut a, mut b) = (psi0.clone(), psi0.clone());
    let mut points = Vec::with_capacity(steps + 1);
    points.push(CurvePoint::exact(Complex64::new(1.0, 0.0)));
    for _ in 0..steps {
        unperturbed.apply(&mut a)?;
        perturbed.apply(&mut b)?;
        points.push(CurvePoint::exact(b.inner(&a)));
    }
    Ok(FidelityCurve { meta: exact_meta(spec, psi0, Method::Exact), points })
}

/// Largest deviation over `t ≤ steps` between the forward-forward overlap and the
/// echo amplitude `⟨ψ| (U_ε†)^t U_0^t |ψ⟩`.
pub fn loschmidt_equivalence(spec: &MapSpec, psi0: &QuantumState, steps: usize) -> Result<f64> {
    let forward = exact_fidelity_curve(spec, psi0, steps)?;
    let mut unperturbed = SplitOperator::new(spec, false);
    let mut perturbed = SplitOperator::new(spec, true);
    let mut evolved = psi0.clone();
    let mut worst: f64 = 0.0;
    for t in 0..=steps {
        if t > 0 {
            unperturbed.apply(&mut evolved)?;
        }
        let mut echo = evolved.clone();
        for _ in 0..t {
            perturbed.apply_adjoint(&mut echo)?;
        }
        worst = worst.max((forward.points[t].amplitude - psi0.inner(&echo)).norm());
    }
    Ok(worst)
}
