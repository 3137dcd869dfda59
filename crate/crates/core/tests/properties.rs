use num_complex::Complex64;
use proptest::prelude::*;

use fidelity::harness::{compare, with_workers};
use fidelity::initial_states::{samples_gaussian, samples_position_state, GaussianMode, PositionMode};
use fidelity::quantum::{build_state, dense_oracle, exact_fidelity_curve, loschmidt_equivalence, SplitOperator};
use fidelity::shadowing::TargetMap;
use fidelity::{
    dr_conjugation_check, dr_curve, refine_shadow, FidelityCurve, InitialState, MapSpec, PhasePoint, PseudoOrbit,
};

fn grid_dr(spec: &MapSpec, q0: f64, steps: usize) -> FidelityCurve {
    let set = samples_position_state(spec, q0, spec.dim(), PositionMode::Grid, 0).unwrap();
    dr_curve(spec, &set, steps).unwrap()
}

fn exact(spec: &MapSpec, state: &InitialState, steps: usize) -> FidelityCurve {
    exact_fidelity_curve(spec, &build_state(spec, state).unwrap(), steps).unwrap()
}

#[test]
fn split_operator_matches_dense_matrix() {
    for n in [16, 64, 128] {
        for k in [0.8, 10.0] {
            let spec = MapSpec::new(k, 2e-2, n).unwrap();
            let psi = build_state(&spec, &InitialState::GaussianWavepacket { q0: 0.7, p0: 0.6, sigma: 0.12 }).unwrap();
            let a = exact_fidelity_curve(&spec, &psi, 30).unwrap();
            let b = dense_oracle(&spec, &psi, 30).unwrap();
            for (x, y) in a.points.iter().zip(&b.points) {
                assert!((x.amplitude - y.amplitude).norm() < 1e-9, "N={n} k={k}");
            }
        }
    }
}

#[test]
fn norm_preserved_over_long_runs() {
    let spec = MapSpec::new(10.0, 2e-3, 1000).unwrap();
    let mut psi = build_state(&spec, &InitialState::GaussianWavepacket { q0: 0.4, p0: 0.1, sigma: 0.03 }).unwrap();
    let mut u = SplitOperator::new(&spec, true);
    for _ in 0..1000 {
        u.apply(&mut psi).unwrap();
    }
    assert!((psi.norm() - 1.0).abs() < 1e-10, "drift {}", psi.norm() - 1.0);
}

#[test]
fn echo_equals_overlap() {
    let spec = MapSpec::new(10.0, 2e-3, 128).unwrap();
    let psi = build_state(&spec, &InitialState::PositionEigenstate { q0: 0.5 }).unwrap();
    assert!(loschmidt_equivalence(&spec, &psi, 50).unwrap() < 1e-10);
}

#[test]
fn first_kick_amplitudes_are_conjugate() {
    // One kick multiplies a position eigenstate by a phase; the two routes carry it
    // with opposite signs, so amplitudes are conjugate and M agrees.
    for (k, eps) in [(0.8, 5e-3), (10.0, 2e-3), (10.0, 0.1)] {
        let spec = MapSpec::new(k, eps, 1000).unwrap();
        let dr = grid_dr(&spec, 0.4, 1).points[1].amplitude;
        let ex = exact(&spec, &InitialState::PositionEigenstate { q0: 0.4 }, 1).points[1].amplitude;
        assert!((ex - dr.conj()).norm() < 1e-12, "k={k}: {ex} vs {dr}");
        let phase = eps / (4.0 * std::f64::consts::PI.powi(2)) * (2.0 * std::f64::consts::PI * 0.4).cos() / spec.hbar();
        assert!((dr - Complex64::from_polar(1.0, phase)).norm() < 1e-12);
    }
}

#[test]
fn agreement_improves_toward_classical_limit() {
    // ε·N fixed keeps the perturbation's quantum strength constant while ħ shrinks.
    let mads: Vec<f64> = [250, 500, 1000]
        .iter()
        .map(|&n| {
            let spec = MapSpec::new(0.8, 5.0 / n as f64, n).unwrap();
            let q0 = 0.4;
            let dr = grid_dr(&spec, q0, 50);
            let ex = exact(&spec, &InitialState::PositionEigenstate { q0 }, 50);
            compare(&dr, &ex).unwrap().mad
        })
        .collect();
    assert!(mads[2] < mads[0], "{mads:?}");
    assert!(mads.iter().all(|m| *m < 0.02), "{mads:?}");
}

#[test]
fn wavepacket_estimate_tracks_exact_curve() {
    for (k, eps) in [(10.0, 2e-3), (0.8, 5e-3)] {
        let spec = MapSpec::new(k, eps, 1000).unwrap();
        let (q0, p0, sigma) = (0.4, 0.1, 0.05);
        let ex = exact(&spec, &InitialState::GaussianWavepacket { q0, p0, sigma }, 50);
        for mode in [GaussianMode::Wigner, GaussianMode::PositionOnly] {
            let set = samples_gaussian(&spec, q0, p0, sigma, 20_000, mode, 7).unwrap();
            let mad = compare(&dr_curve(&spec, &set, 50).unwrap(), &ex).unwrap().mad;
            assert!(mad < 0.03, "k={k} {mode:?}: MAD {mad}");
        }
    }
}

#[test]
fn reduction_independent_of_worker_count() {
    let spec = MapSpec::new(10.0, 2e-3, 1000).unwrap();
    let set = samples_position_state(&spec, 0.4, 10_007, PositionMode::MonteCarlo, 21).unwrap();
    let one = with_workers(1, || dr_curve(&spec, &set, 60)).unwrap().unwrap();
    for threads in [2, 3, 8] {
        let many = with_workers(threads, || dr_curve(&spec, &set, 60)).unwrap().unwrap();
        assert_eq!(one, many, "{threads} workers");
    }
}

#[test]
fn shadow_of_perturbed_orbit_stays_close() {
    let spec = MapSpec::new(10.0, 2e-3, 1000).unwrap();
    let x0 = PhasePoint::new(0.31, 0.77).unwrap();
    let pseudo = PseudoOrbit::true_orbit(&spec, x0, 12, TargetMap::Perturbed).unwrap();
    let shadow = refine_shadow(&spec, &pseudo, TargetMap::Unperturbed, 1e-12, 50).unwrap();
    assert!(shadow.converged);
    assert!(shadow.residual < 1e-12);
    // Shadow distance is a modest multiple of the per-step defect for a hyperbolic orbit.
    let defect = 2e-3 * fidelity::dynamics::PERTURBATION_GRAD_BOUND;
    assert!(shadow.shadow_distance < 10.0 * defect, "distance {}", shadow.shadow_distance);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dr_is_conjugate_under_sign_flip(k in 0.1f64..12.0, eps in 1e-4f64..5e-2, j in 0usize..256, steps in 1usize..60) {
        let plus = MapSpec::new(k, eps, 256).unwrap();
        let minus = plus.with_epsilon(-eps).unwrap();
        let q0 = j as f64 / 256.0;
        prop_assert!(dr_conjugation_check(&grid_dr(&plus, q0, steps), &grid_dr(&minus, q0, steps)).unwrap());
    }

    #[test]
    fn fidelities_lie_in_unit_interval(k in 0.1f64..12.0, eps in -5e-2f64..5e-2, j in 0usize..128) {
        let spec = MapSpec::new(k, eps, 128).unwrap();
        let q0 = j as f64 / 128.0;
        let dr = grid_dr(&spec, q0, 40);
        let ex = exact(&spec, &InitialState::PositionEigenstate { q0 }, 40);
        for p in dr.points.iter().chain(&ex.points) {
            prop_assert!(p.fidelity >= 0.0 && p.fidelity <= 1.0 + 1e-12);
        }
    }
}
