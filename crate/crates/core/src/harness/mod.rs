//! Experiment runner: config in, curves and a comparison report out.

pub mod compare;
pub mod config;
pub mod output;

pub use compare::{compare, ComparisonReport};
pub use config::{ExperimentConfig, OutputFormat, SampleMode, StateKind};

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::dephasing::{dr_curve, FidelityCurve, Method};
use crate::error::{Error, Result};
use crate::initial_states::{samples_gaussian, samples_position_state, GaussianMode, InitialState, PositionMode};
use crate::quantum::{build_state, dense_oracle, exact_fidelity_curve};

/// Environment variable capping the number of worker threads.
pub const MAX_THREADS_ENV: &str = "FIDELITY_MAX_THREADS";

/// Threads to use for a requested count (0 = machine default), after the env cap.
pub fn worker_count(requested: usize) -> usize {
    let base =
        if requested == 0 { std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) } else { requested };
    let cap = std::env::var(MAX_THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&c| c > 0);
    cap.map_or(base, |c| base.min(c))
}

/// Runs `f` on a dedicated pool of `worker_count(requested)` threads.
pub fn with_workers<T: Send>(requested: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(requested))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ExperimentConfig,
}

/// Built-in configurations for a mixed and a chaotic regime: a position
/// eigenstate at `q0 = 0.4`, `N = 1000`, all 1000 grid momenta, 50 kicks.
pub fn presets() -> Vec<Preset> {
    let base = ExperimentConfig::default();
    vec![
        Preset {
            name: "fig1-mixed",
            description: "mixed phase space: k = 0.8, epsilon = 5e-3",
            config: ExperimentConfig { k: 0.8, epsilon: 5e-3, out: "fig1-mixed.csv".into(), ..base.clone() },
        },
        Preset {
            name: "fig1-chaotic",
            description: "chaotic phase space: k = 10, epsilon = 2e-3",
            config: ExperimentConfig { k: 10.0, epsilon: 2e-3, out: "fig1-chaotic.csv".into(), ..base },
        },
    ]
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    presets().into_iter().find(|p| p.name == name).map(|p| p.config).ok_or_else(|| {
        let names: Vec<_> = presets().iter().map(|p| p.name).collect();
        Error::invalid(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })
}

fn initial_state(cfg: &ExperimentConfig) -> InitialState {
    match cfg.state {
        StateKind::Position => InitialState::PositionEigenstate { q0: cfg.q0 },
        StateKind::Gaussian => InitialState::GaussianWavepacket { q0: cfg.q0, p0: cfg.p0, sigma: cfg.sigma },
    }
}

fn run_method(cfg: &ExperimentConfig, method: Method) -> Result<FidelityCurve> {
    let spec = cfg.map_spec()?;
    match method {
        Method::Dr => {
            let samples = match (cfg.state, cfg.mode) {
                (StateKind::Position, SampleMode::Grid) => {
                    samples_position_state(&spec, cfg.q0, cfg.samples, PositionMode::Grid, cfg.seed)?
                }
                (StateKind::Position, SampleMode::MonteCarlo) => {
                    samples_position_state(&spec, cfg.q0, cfg.samples, PositionMode::MonteCarlo, cfg.seed)?
                }
                (StateKind::Gaussian, SampleMode::PositionOnly) => samples_gaussian(
                    &spec,
                    cfg.q0,
                    cfg.p0,
                    cfg.sigma,
                    cfg.samples,
                    GaussianMode::PositionOnly,
                    cfg.seed,
                )?,
                (StateKind::Gaussian, SampleMode::Wigner) => {
                    samples_gaussian(&spec, cfg.q0, cfg.p0, cfg.sigma, cfg.samples, GaussianMode::Wigner, cfg.seed)?
                }
                (state, mode) => {
                    return Err(Error::invalid(format!("sampling mode {mode:?} does not apply to {state:?} states")))
                }
            };
            dr_curve(&spec, &samples, cfg.steps)
        }
        Method::Exact => exact_fidelity_curve(&spec, &build_state(&spec, &initial_state(cfg))?, cfg.steps),
        Method::Dense => dense_oracle(&spec, &build_state(&spec, &initial_state(cfg))?, cfg.steps),
    }
}

/// Computes every requested curve without touching the filesystem. Methods run
/// concurrently; the result is identical for any worker count.
pub fn compute_curves(cfg: &ExperimentConfig) -> Result<Vec<FidelityCurve>> {
    cfg.validate(&config::Origins::default())?;
    with_workers(cfg.threads, || cfg.methods.par_iter().map(|&m| run_method(cfg, m)).collect::<Result<Vec<_>>>())?
}

/// DR against the exact oracle when both ran; otherwise the first two methods.
pub fn default_comparison(curves: &[FidelityCurve]) -> Result<Option<ComparisonReport>> {
    let find = |m: Method| curves.iter().find(|c| c.meta.method == m);
    let pair = match (find(Method::Dr), find(Method::Exact), find(Method::Dense)) {
        (Some(dr), Some(exact), _) => Some((dr, exact)),
        (Some(dr), None, Some(dense)) => Some((dr, dense)),
        (None, Some(exact), Some(dense)) => Some((dense, exact)),
        _ => None,
    };
    pair.map(|(a, b)| compare(a, b)).transpose()
}

pub struct ExperimentOutcome {
    pub curves: Vec<FidelityCurve>,
    pub report: Option<ComparisonReport>,
    pub data_path: PathBuf,
    pub sidecar_path: PathBuf,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    generated_unix_seconds: u64,
    crate_version: &'static str,
    threads: usize,
    config: &'a ExperimentConfig,
    curves: Vec<&'a crate::dephasing::CurveMeta>,
    comparison: Option<&'a ComparisonReport>,
}

/// `<out>.meta.json` next to the data file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

/// Runs a configured experiment and writes the data file plus a JSON sidecar.
///
/// The data file depends only on the config; run timestamps live in the sidecar.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let curves = compute_curves(cfg)?;
    let report = default_comparison(&curves)?;

    let data_path = cfg.out.clone();
    let data = BufWriter::new(File::create(&data_path)?);
    match cfg.format {
        OutputFormat::Csv => output::write_csv(data, &curves)?,
        OutputFormat::Json => output::write_json(data, &curves)?,
    }

    let sidecar_path = sidecar_path(&data_path);
    let sidecar = Sidecar {
        generated_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        crate_version: env!("CARGO_PKG_VERSION"),
        threads: worker_count(cfg.threads),
        config: cfg,
        curves: curves.iter().map(|c| &c.meta).collect(),
        comparison: report.as_ref(),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(&sidecar_path)?), &sidecar)?;

    Ok(ExperimentOutcome { curves, report, data_path, sidecar_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_parameters() {
        let mixed = preset("fig1-mixed").unwrap();
        assert_eq!(
            (mixed.k, mixed.epsilon, mixed.n, mixed.q0, mixed.steps, mixed.samples),
            (0.8, 5e-3, 1000, 0.4, 50, 1000)
        );
        let chaotic = preset("fig1-chaotic").unwrap();
        assert_eq!((chaotic.k, chaotic.epsilon), (10.0, 2e-3));
        assert_eq!(chaotic.mode, SampleMode::Grid);
        assert!(preset("fig2").is_err());
    }

    #[test]
    fn sidecar_sits_next_to_data() {
        assert_eq!(sidecar_path(Path::new("/tmp/x/run.csv")), PathBuf::from("/tmp/x/run.csv.meta.json"));
    }

    #[test]
    fn zero_perturbation_config_is_flat() {
        let cfg = ExperimentConfig { epsilon: 0.0, n: 200, samples: 200, q0: 0.5, steps: 30, ..Default::default() };
        for c in compute_curves(&cfg).unwrap() {
            assert!(c.points.iter().all(|p| (p.fidelity - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn dense_beyond_capacity_is_a_capacity_error() {
        let cfg = ExperimentConfig { methods: vec![Method::Dense], ..Default::default() };
        assert!(matches!(compute_curves(&cfg), Err(Error::Capacity(_))));
    }

    #[test]
    fn worker_count_respects_request() {
        assert!(worker_count(0) >= 1);
        if std::env::var(MAX_THREADS_ENV).is_err() {
            assert_eq!(worker_count(3), 3);
        }
    }
}
