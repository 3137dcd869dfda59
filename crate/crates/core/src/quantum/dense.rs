//! Dense `N×N` one-period unitary, assembled entry by entry without any FFT.
//! Only meant for cross-checking the split-operator route at small `N`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{kick_phases, unit_phase, QuantumState};
use crate::dephasing::{CurveMeta, CurvePoint, FidelityCurve, Method};
use crate::dynamics::MapSpec;
use crate::error::{Error, Result};

pub const DENSE_MAX_DIM: usize = 256;

/// `U_{jl} = K_l · (1/N) Σ_m exp(2πi m (j−l)/N − iπ m²/N)`.
pub fn dense_step_matrix(spec: &MapSpec, perturbed: bool) -> Result<DMatrix<Complex64>> {
    let n = spec.dim();
    if n > DENSE_MAX_DIM {
        return Err(Error::Capacity(format!("dense oracle is limited to N ≤ {DENSE_MAX_DIM}, got {n}")));
    }
    let two_n = 2 * n as u64;
    // The drift is circulant: kernel[r] depends only on r = (j − l) mod N.
    let kernel: Vec<Complex64> = (0..n as u64)
        .map(|r| {
            let sum: Complex64 = (0..n as u64)
                .map(|m| {
                    // π(2mr − m²)/N with the numerator reduced mod 2N
                    let residue = (2 * m * r % two_n + two_n - m * m % two_n) % two_n;
                    unit_phase(residue, n)
                })
                .sum();
            sum / n as f64
        })
        .collect();
    let kick = kick_phases(n, spec.kick_strength(perturbed));
    Ok(DMatrix::from_fn(n, n, |j, l| kernel[(j + n - l) % n] * kick[l]))
}

/// Fidelity curve from explicit matrix-vector products.
pub fn dense_oracle(spec: &MapSpec, psi0: &QuantumState, steps: usize) -> Result<FidelityCurve> {
    let u0 = dense_step_matrix(spec, false)?;
    let ue = dense_step_matrix(spec, true)?;
    if psi0.dim() != spec.dim() {
        return Err(Error::invalid(format!("state has dimension {}, map has {}", psi0.dim(), spec.dim())));
    }
    let mut a = DVector::from_vec(psi0.amplitudes.clone());
    let mut b = a.clone();
    let mut points = Vec::with_capacity(steps + 1);
    points.push(CurvePoint::exact(Complex64::new(1.0, 0.0)));
    for _ in 0..steps {
        a = &u0 * &a;
        b = &ue * &b;
        points.push(CurvePoint::exact(b.dotc(&a)));
    }
    Ok(FidelityCurve {
        meta: CurveMeta { spec: *spec, state: psi0.label.clone(), samples: 0, seed: None, method: Method::Dense },
        points,
    })
}
