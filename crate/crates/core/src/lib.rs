//! Quantum fidelity (Loschmidt echo) decay for perturbed kicked maps on the unit torus.
//!
//! Two independent routes to the fidelity amplitude `O(t)` are provided:
//!
//! - [`dephasing`]: the dephasing representation, a weighted average of pure phase
//!   factors `exp(i ΔS / ħ)` over initial conditions, where `ΔS` is the perturbation
//!   integrated along the *unperturbed* classical orbit ([`dynamics`]).
//! - [`quantum`]: exact propagation of the quantized map on an `N`-point grid by
//!   split-operator steps, plus a dense-matrix oracle for small `N`.
//!
//! [`shadowing`] checks pseudotrajectory bounds and refines true orbits near
//! computed ones; [`harness`] wires everything into configurable experiments that
//! emit CSV and JSON.

#![forbid(unsafe_code)]
// Guards written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dephasing;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod initial_states;
pub mod quantum;
pub mod shadowing;

pub use dephasing::{dr_conjugation_check, dr_curve, CurveMeta, CurvePoint, FidelityCurve, Method};
pub use dynamics::{jacobian, propagate, step, MapSpec, PhasePoint, TrajectoryRecord};
pub use error::{Error, Result};
pub use initial_states::{InitialState, SampleKind, SampleSet, WeightedSample};
pub use quantum::{build_state, dense_oracle, exact_fidelity_curve, loschmidt_equivalence, QuantumState};
pub use shadowing::{pseudo_residual, refine_shadow, shadow_time_estimate, PseudoOrbit, ShadowResult};
