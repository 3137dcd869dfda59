use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fidelity::harness::{self, config::OutputFormat, ExperimentConfig};
use fidelity::initial_states::substream;
use fidelity::quantum::{build_state, dense_oracle, exact_fidelity_curve};
use fidelity::shadowing::{pseudo_residual, shadowing_survey, PseudoOrbit, ShadowingSurvey, TargetMap};
use fidelity::{dynamics::PERTURBATION_GRAD_BOUND, Error, InitialState, MapSpec, PhasePoint, Result};

/// Quantum fidelity decay of the kicked rotor: dephasing representation vs exact propagation.
#[derive(Parser)]
#[command(name = "fidelity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or preset and write CSV/JSON output.
    Run(ConfigArgs),
    /// List built-in presets, or print one as a config file.
    Presets {
        /// Preset to print; lists all presets when omitted.
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shadowing diagnostics: pseudotrajectory bounds and refinement survey.
    Shadow(ShadowArgs),
    /// Check a config without running it.
    Validate(ConfigArgs),
    /// Compare split-operator and dense-matrix propagation.
    OracleCheck(OracleArgs),
}

/// Config source plus one flag per config key.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    q0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated subset of dr, exact, dense.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        [
            ("k", &self.k),
            ("epsilon", &self.epsilon),
            ("n", &self.n),
            ("state", &self.state),
            ("q0", &self.q0),
            ("p0", &self.p0),
            ("sigma", &self.sigma),
            ("steps", &self.steps),
            ("samples", &self.samples),
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("methods", &self.methods),
            ("out", &self.out),
            ("format", &self.format),
            ("threads", &self.threads),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let text = match (&self.config, &self.preset) {
            (Some(path), _) => Some(fs::read_to_string(path)?),
            (None, Some(name)) => Some(harness::preset(name)?.to_toml()),
            (None, None) => None,
        };
        Ok(ExperimentConfig::load(text.as_deref(), &self.overrides())?.0)
    }
}

#[derive(Args)]
struct ShadowArgs {
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    k: f64,
    #[arg(long, default_value_t = 2e-3, allow_hyphen_values = true)]
    epsilon: f64,
    /// Number of random unperturbed orbits to refine.
    #[arg(long, default_value_t = 200)]
    orbits: usize,
    /// Orbit length in kicks.
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Per-step noise amplitude for the noisy-orbit bound.
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 64, 128])]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 10.0])]
    kicks: Vec<f64>,
    #[arg(long, default_value_t = 5e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 30)]
    steps: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Serialize)]
struct ShadowSummary {
    k: f64,
    epsilon: f64,
    /// Largest `f⁰`-residual of perturbed orbits, and its bound.
    perturbed_residual: f64,
    perturbed_bound: f64,
    delta: f64,
    noisy_residual: f64,
    noisy_bound: f64,
    survey: ShadowingSurvey,
}

fn shadow(args: &ShadowArgs) -> Result<()> {
    let format: OutputFormat = args.format.parse().map_err(Error::InvalidInput)?;
    let spec = MapSpec::new(args.k, args.epsilon, 1000)?;
    let summary = harness::with_workers(args.threads, || -> Result<ShadowSummary> {
        let mut perturbed: f64 = 0.0;
        let mut noisy_worst: f64 = 0.0;
        for i in 0..args.orbits as u64 {
            let mut rng = substream(args.seed ^ 0x5eed, i);
            let x0 = PhasePoint::new(rand::Rng::random(&mut rng), rand::Rng::random(&mut rng))?;
            let exact = PseudoOrbit::true_orbit(&spec, x0, args.horizon.max(1), TargetMap::Perturbed)?;
            perturbed = perturbed.max(pseudo_residual(&spec, &exact, TargetMap::Unperturbed));
            let noisy = PseudoOrbit::noisy_orbit(&spec, x0, args.horizon.max(1), args.delta, &mut rng)?;
            noisy_worst = noisy_worst.max(pseudo_residual(&spec, &noisy, TargetMap::Unperturbed));
        }
        let bound = args.epsilon.abs() * PERTURBATION_GRAD_BOUND;
        Ok(ShadowSummary {
            k: args.k,
            epsilon: args.epsilon,
            perturbed_residual: perturbed,
            perturbed_bound: bound,
            delta: args.delta,
            noisy_residual: noisy_worst,
            noisy_bound: args.delta + bound,
            survey: shadowing_survey(&spec, args.orbits, args.horizon, args.tol, args.max_iter, args.seed)?,
        })
    })??;

    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(io::stdout()),
    };
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, &summary)?;
            writeln!(sink)?;
        }
        OutputFormat::Csv => {
            let s = &summary.survey;
            let mut w = csv::Writer::from_writer(sink);
            w.write_record([
                "k",
                "epsilon",
                "orbits",
                "horizon",
                "tol",
                "shadowable_fraction",
                "median_distance",
                "max_distance",
                "estimated_shadow_time",
                "perturbed_residual",
                "perturbed_bound",
                "noisy_residual",
                "noisy_bound",
            ])?;
            let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.16e}"));
            w.write_record([
                summary.k.to_string(),
                summary.epsilon.to_string(),
                s.orbits.to_string(),
                s.horizon.to_string(),
                s.tol.to_string(),
                format!("{:.16e}", s.shadowable_fraction),
                opt(s.median_distance),
                opt(s.max_distance),
                opt(s.estimated_shadow_time),
                format!("{:.16e}", summary.perturbed_residual),
                format!("{:.16e}", summary.perturbed_bound),
                format!("{:.16e}", summary.noisy_residual),
                format!("{:.16e}", summary.noisy_bound),
            ])?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Returns false if any configuration exceeds the tolerance.
fn oracle_check(args: &OracleArgs) -> Result<bool> {
    let mut ok = true;
    for &n in &args.dims {
        for &k in &args.kicks {
            let spec = MapSpec::new(k, args.epsilon, n)?;
            let psi = build_state(&spec, &InitialState::PositionEigenstate { q0: 0.5 })?;
            let split = exact_fidelity_curve(&spec, &psi, args.steps)?;
            let dense = dense_oracle(&spec, &psi, args.steps)?;
            let worst = split
                .points
                .iter()
                .zip(&dense.points)
                .map(|(a, b)| (a.amplitude - b.amplitude).norm())
                .fold(0.0, f64::max);
            let pass = worst < args.tol;
            ok &= pass;
            println!("{} N={n:<4} k={k:<5} max|ΔO|={worst:.3e}", if pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let outcome = harness::run_experiment(&cfg)?;
            println!("wrote {}", outcome.data_path.display());
            println!("wrote {}", outcome.sidecar_path.display());
            if let Some(r) = outcome.report {
                println!(
                    "{} vs {}: MAD = {:.4e}, max = {:.4e} at t = {}",
                    r.candidate.as_str(),
                    r.reference.as_str(),
                    r.mad,
                    r.max_deviation,
                    r.step_of_max
                );
            }
        }
        Command::Presets { name: None, .. } => {
            for p in harness::presets() {
                println!("{:<14} {}", p.name, p.description);
            }
        }
        Command::Presets { name: Some(name), out } => {
            let text = harness::preset(&name)?.to_toml();
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Shadow(args) => shadow(&args)?,
        Command::Validate(args) => {
            args.load()?;
            println!("config OK");
        }
        Command::OracleCheck(args) => {
            if !oracle_check(&args)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
