use fidelity::initial_states::{
    samples_gaussian, samples_position_state, wrapped_normal_density, GaussianMode, PositionMode,
};
use fidelity::{MapSpec, SampleSet};

fn positions(set: &SampleSet) -> Vec<f64> {
    set.samples.iter().map(|s| s.point.q).collect()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Upper quantile of chi-squared via Wilson–Hilferty; `z` is the normal quantile.
fn chi2_quantile(df: f64, z: f64) -> f64 {
    let c = 2.0 / (9.0 * df);
    df * (1.0 - c + z * c.sqrt()).powi(3)
}

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn gaussian_positions_pass_chi_squared() {
    let spec = MapSpec::new(10.0, 2e-3, 1000).unwrap();
    let (q0, sigma, count) = (0.9, 0.08, 100_000);
    for mode in [GaussianMode::PositionOnly, GaussianMode::Wigner] {
        let set = samples_gaussian(&spec, q0, 0.3, sigma, count, mode, 3).unwrap();
        let bins = 50;
        let mut observed = vec![0.0; bins];
        for q in positions(&set) {
            observed[((q * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        let expected: Vec<f64> = (0..bins)
            .map(|b| {
                let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
                count as f64 * simpson(|x| wrapped_normal_density(x, q0, sigma), lo, hi, 40)
            })
            .collect();
        // Pool sparse tail bins so every cell expects at least 5 draws.
        let (mut stat, mut cells, mut pooled_o, mut pooled_e) = (0.0, 0usize, 0.0, 0.0);
        for (o, e) in observed.iter().zip(&expected) {
            if *e < 5.0 {
                pooled_o += o;
                pooled_e += e;
            } else {
                stat += (o - e) * (o - e) / e;
                cells += 1;
            }
        }
        if pooled_e > 0.0 {
            stat += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
            cells += 1;
        }
        let critical = chi2_quantile((cells - 1) as f64, 3.09);
        assert!(stat < critical, "{mode:?}: chi2 = {stat:.1} over {cells} cells, critical {critical:.1}");
    }
}

#[test]
fn wigner_marginal_matches_position_density() {
    let spec = MapSpec::new(0.8, 5e-3, 1000).unwrap();
    let n = 100_000;
    let wigner = samples_gaussian(&spec, 0.4, 0.1, 0.05, n, GaussianMode::Wigner, 11).unwrap();
    let position = samples_gaussian(&spec, 0.4, 0.1, 0.05, n, GaussianMode::PositionOnly, 12).unwrap();
    let d = ks_two_sample(positions(&wigner), positions(&position));
    let critical = 1.628 * (2.0 / n as f64).sqrt();
    assert!(d < critical, "KS D = {d:.5}, 1% critical {critical:.5}");
}

#[test]
fn wigner_momenta_spread_at_minimum_uncertainty() {
    let spec = MapSpec::new(0.8, 5e-3, 1000).unwrap();
    let sigma = 0.02;
    let set = samples_gaussian(&spec, 0.5, 0.5, sigma, 50_000, GaussianMode::Wigner, 5).unwrap();
    let ps: Vec<f64> = set.samples.iter().map(|s| s.point.p - 0.5).collect();
    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
    let sd = (ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (ps.len() - 1) as f64).sqrt();
    let target = spec.hbar() / (2.0 * sigma);
    assert!((sd / target - 1.0).abs() < 0.02, "sd {sd:.3e} vs {target:.3e}");
}

#[test]
fn gaussian_sample_mean_within_three_sigma() {
    let spec = MapSpec::new(0.8, 5e-3, 1000).unwrap();
    let (q0, sigma, count) = (0.5, 0.05, 100_000);
    let set = samples_gaussian(&spec, q0, 0.0, sigma, count, GaussianMode::PositionOnly, 8).unwrap();
    let mean = positions(&set).iter().sum::<f64>() / count as f64;
    assert!((mean - q0).abs() < 3.0 * sigma / (count as f64).sqrt(), "mean {mean}");
}

#[test]
fn uniform_momenta_for_monte_carlo_position_state() {
    let spec = MapSpec::new(10.0, 2e-3, 1000).unwrap();
    let set = samples_position_state(&spec, 0.4, 100_000, PositionMode::MonteCarlo, 2).unwrap();
    let ps: Vec<f64> = set.samples.iter().map(|s| s.point.p).collect();
    let uniform: Vec<f64> = (0..ps.len()).map(|i| (i as f64 + 0.5) / ps.len() as f64).collect();
    let d = ks_two_sample(ps, uniform);
    assert!(d < 1.628 * (2.0 / 100_000.0f64).sqrt(), "KS D = {d}");
    assert!(set.samples.iter().all(|s| s.point.q == 0.4));
    assert!((set.weight_sum() - 1.0).abs() < 1e-10);
}

#[test]
fn seeds_give_distinct_sets() {
    let spec = MapSpec::new(10.0, 2e-3, 1000).unwrap();
    let a = samples_gaussian(&spec, 0.4, 0.0, 0.05, 1000, GaussianMode::Wigner, 1).unwrap();
    let b = samples_gaussian(&spec, 0.4, 0.0, 0.05, 1000, GaussianMode::Wigner, 2).unwrap();
    let c = samples_gaussian(&spec, 0.4, 0.0, 0.05, 1000, GaussianMode::Wigner, 1).unwrap();
    assert_ne!(a.samples, b.samples);
    assert_eq!(a.samples, c.samples);
}
