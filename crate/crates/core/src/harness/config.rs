//! Flat key-value experiment configuration (TOML syntax).
//!
//! Every key can be overridden from the command line by a flag of the same name.
//! Loading reports every problem at once, each tagged with where the value came
//! from (file line, flag, or default).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::dephasing::Method;
use crate::dynamics::MapSpec;
use crate::error::{Error, Result};
use crate::initial_states::grid_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Position,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Grid,
    MonteCarlo,
    PositionOnly,
    Wigner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

macro_rules! keyword_enum {
    ($ty:ty, $($name:literal => $variant:expr),+ $(,)?) => {
        impl std::str::FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!("unknown value '{}' (expected one of: {})", other, [$($name),+].join(", "))),
                }
            }
        }
    };
}

keyword_enum!(StateKind, "position" => StateKind::Position, "gaussian" => StateKind::Gaussian);
keyword_enum!(
    SampleMode,
    "grid" => SampleMode::Grid,
    "monte_carlo" => SampleMode::MonteCarlo,
    "position_only" => SampleMode::PositionOnly,
    "wigner" => SampleMode::Wigner,
);
keyword_enum!(OutputFormat, "csv" => OutputFormat::Csv, "json" => OutputFormat::Json);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: f64,
    pub epsilon: f64,
    /// Hilbert dimension `N`.
    pub n: usize,
    pub state: StateKind,
    pub q0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub steps: usize,
    pub samples: usize,
    pub mode: SampleMode,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// Worker threads; 0 picks the machine default.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 10.0,
            epsilon: 2e-3,
            n: 1000,
            state: StateKind::Position,
            q0: 0.4,
            p0: 0.0,
            sigma: 0.05,
            steps: 50,
            samples: 1000,
            mode: SampleMode::Grid,
            seed: 0,
            methods: vec![Method::Dr, Method::Exact],
            out: PathBuf::from("fidelity.csv"),
            format: OutputFormat::Csv,
            threads: 0,
        }
    }
}

pub const KEYS: [&str; 15] = [
    "k", "epsilon", "n", "state", "q0", "p0", "sigma", "steps", "samples", "mode", "seed", "methods", "out", "format",
    "threads",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Default,
    Line(usize),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

/// Where each key's value came from, for error messages.
#[derive(Debug, Clone, Default)]
pub struct Origins(BTreeMap<String, Origin>);

impl Origins {
    pub fn get(&self, key: &str) -> Origin {
        self.0.get(key).copied().unwrap_or(Origin::Default)
    }

    pub fn set(&mut self, key: &str, origin: Origin) {
        self.0.insert(key.to_string(), origin);
    }

    fn issue(&self, key: &str, msg: impl fmt::Display) -> String {
        let origin = self.get(key);
        match origin {
            Origin::Flag => format!("{origin}: --{key}: {msg}"),
            _ => format!("{origin}: {key}: {msg}"),
        }
    }
}

/// 1-based line on which `key = ...` appears.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines()
        .position(|line| {
            let t = line.trim_start();
            [key, quoted.as_str()]
                .iter()
                .any(|k| t.strip_prefix(k).is_some_and(|rest| rest.trim_start().starts_with('=')))
        })
        .map(|i| i + 1)
}

fn as_f64(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(format!("expected a number, got {}", other.type_str())),
    }
}

fn as_count(v: &Value) -> std::result::Result<u64, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(format!("expected a nonnegative integer, got {i}")),
        other => Err(format!("expected an integer, got {}", other.type_str())),
    }
}

fn as_str(v: &Value) -> std::result::Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, got {}", v.type_str()))
}

pub fn parse_methods(items: &[&str]) -> std::result::Result<Vec<Method>, String> {
    items.iter().map(|s| s.trim().parse::<Method>().map_err(|e| e.to_string())).collect()
}

impl ExperimentConfig {
    /// Parses a config document on top of the defaults.
    pub fn from_toml_str(text: &str) -> Result<(Self, Origins)> {
        Self::load(Some(text), &[])
    }

    /// Builds a config from an optional document plus `(key, value)` flag overrides.
    ///
    /// Unknown keys, type errors and semantic violations are all collected into
    /// one [`Error::Validation`].
    pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<(Self, Origins)> {
        let mut cfg = Self::default();
        let mut origins = Origins::default();
        let mut issues = Vec::new();

        if let Some(text) = text {
            let table: Table = text.parse().map_err(|e: toml::de::Error| {
                let line = e.span().map(|s| text[..s.start].lines().count().max(1));
                Error::Validation(vec![match line {
                    Some(l) => format!("line {l}: syntax error: {}", e.message()),
                    None => format!("syntax error: {}", e.message()),
                }])
            })?;
            for (key, value) in &table {
                origins.set(key, key_line(text, key).map_or(Origin::Default, Origin::Line));
                if let Err(msg) = cfg.set_value(key, value) {
                    issues.push(origins.issue(key, msg));
                }
            }
        }
        for (key, raw) in overrides {
            origins.set(key, Origin::Flag);
            if let Err(msg) = cfg.set_text(key, raw) {
                issues.push(origins.issue(key, msg));
            }
        }

        issues.extend(cfg.violations(&origins));
        if issues.is_empty() {
            Ok((cfg, origins))
        } else {
            Err(Error::Validation(issues))
        }
    }

    fn set_text(&mut self, key: &str, raw: &str) -> std::result::Result<(), String> {
        let value = match key {
            "k" | "epsilon" | "q0" | "p0" | "sigma" => {
                Value::Float(raw.parse::<f64>().map_err(|_| format!("expected a number, got '{raw}'"))?)
            }
            "n" | "steps" | "samples" | "seed" | "threads" => {
                Value::Integer(raw.parse::<i64>().map_err(|_| format!("expected a nonnegative integer, got '{raw}'"))?)
            }
            _ => Value::String(raw.to_string()),
        };
        self.set_value(key, &value)
    }

    fn set_value(&mut self, key: &str, v: &Value) -> std::result::Result<(), String> {
        match key {
            "k" => self.k = as_f64(v)?,
            "epsilon" => self.epsilon = as_f64(v)?,
            "n" => self.n = as_count(v)? as usize,
            "state" => self.state = as_str(v)?.parse()?,
            "q0" => self.q0 = as_f64(v)?,
            "p0" => self.p0 = as_f64(v)?,
            "sigma" => self.sigma = as_f64(v)?,
            "steps" => self.steps = as_count(v)? as usize,
            "samples" => self.samples = as_count(v)? as usize,
            "mode" => self.mode = as_str(v)?.parse()?,
            "seed" => self.seed = as_count(v)?,
            "methods" => {
                let items = match v {
                    Value::Array(a) => a.iter().map(as_str).collect::<std::result::Result<Vec<_>, _>>()?,
                    Value::String(s) => s.split(',').collect(),
                    other => return Err(format!("expected a list of methods, got {}", other.type_str())),
                };
                self.methods = parse_methods(&items)?;
            }
            "out" => self.out = PathBuf::from(as_str(v)?),
            "format" => self.format = as_str(v)?.parse()?,
            "threads" => self.threads = as_count(v)? as usize,
            other => return Err(format!("unknown key '{other}' (known keys: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Semantic checks mirroring the library's preconditions.
    pub fn violations(&self, origins: &Origins) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |key: &str, msg: String| out.push(origins.issue(key, msg));
        if !self.k.is_finite() {
            bad("k", format!("kick strength must be finite, got {}", self.k));
        }
        if !self.epsilon.is_finite() {
            bad("epsilon", format!("perturbation must be finite, got {}", self.epsilon));
        }
        if self.n < 2 {
            bad("n", format!("Hilbert dimension must be at least 2, got {}", self.n));
        }
        if self.samples == 0 {
            bad("samples", "need at least one sample".into());
        }
        if self.methods.is_empty() {
            bad("methods", "at least one method is required".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                bad("methods", format!("method '{}' listed twice", m.as_str()));
            }
        }
        match self.state {
            StateKind::Position => {
                if !matches!(self.mode, SampleMode::Grid | SampleMode::MonteCarlo) {
                    bad("mode", "position states use mode 'grid' or 'monte_carlo'".into());
                }
                if self.n >= 2 {
                    let spec = MapSpec::new(0.0, 0.0, self.n).expect("n checked");
                    if let Err(e) = grid_index(&spec, self.q0) {
                        bad("q0", e.to_string());
                    }
                    if self.mode == SampleMode::Grid && self.samples != self.n {
                        bad(
                            "samples",
                            format!(
                                "grid mode uses one sample per grid momentum: expected {}, got {}",
                                self.n, self.samples
                            ),
                        );
                    }
                }
            }
            StateKind::Gaussian => {
                if !matches!(self.mode, SampleMode::PositionOnly | SampleMode::Wigner) {
                    bad("mode", "Gaussian states use mode 'position_only' or 'wigner'".into());
                }
                if !(self.sigma > 0.0 && self.sigma < 0.5) {
                    bad("sigma", format!("width must lie in (0, 0.5), got {}", self.sigma));
                }
                if !self.q0.is_finite() || !self.p0.is_finite() {
                    bad("q0", "wavepacket center must be finite".into());
                }
            }
        }
        out
    }

    pub fn validate(&self, origins: &Origins) -> Result<()> {
        let issues = self.violations(origins);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn map_spec(&self) -> Result<MapSpec> {
        MapSpec::new(self.k, self.epsilon, self.n)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_document() {
        let text = r#"
k = 0.8
epsilon = 5e-3
n = 1000
state = "position"
q0 = 0.4
steps = 50
samples = 1000
mode = "grid"
seed = 3
methods = ["dr", "exact"]
out = "mixed.csv"
format = "json"
threads = 2
"#;
        let (cfg, origins) = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.k, 0.8);
        assert_eq!(cfg.format, OutputFormat::Json);
        assert_eq!(cfg.methods, vec![Method::Dr, Method::Exact]);
        assert_eq!(origins.get("epsilon"), Origin::Line(3));
        assert_eq!(origins.get("sigma"), Origin::Default);
    }

    #[test]
    fn every_violation_reported_with_its_line() {
        let text = "k = \"strong\"\nn = 1000\nq0 = 0.4001\nbogus = 1\nmethods = [\"dr\", \"magic\"]\n";
        let Err(Error::Validation(issues)) = ExperimentConfig::from_toml_str(text) else {
            panic!("expected validation failure")
        };
        let joined = issues.join("\n");
        assert!(joined.contains("line 1: k:"), "{joined}");
        assert!(joined.contains("line 3: q0:"), "{joined}");
        assert!(joined.contains("line 4: bogus:"), "{joined}");
        assert!(joined.contains("line 5: methods:"), "{joined}");
        assert_eq!(issues.len(), 4);
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let Err(Error::Validation(issues)) = ExperimentConfig::from_toml_str("k = 1\nepsilon = = 2\n") else {
            panic!()
        };
        assert!(issues[0].starts_with("line 2"), "{issues:?}");
    }

    #[test]
    fn semantic_rules() {
        let mut cfg = ExperimentConfig { samples: 999, ..Default::default() };
        let o = Origins::default();
        assert_eq!(cfg.violations(&o).len(), 1);
        cfg.state = StateKind::Gaussian;
        cfg.sigma = 0.7;
        // grid mode is wrong for a Gaussian, and sigma is out of range
        assert_eq!(cfg.violations(&o).len(), 2);
        cfg.mode = SampleMode::Wigner;
        cfg.sigma = 0.1;
        assert!(cfg.violations(&o).is_empty());
        cfg.methods = vec![Method::Dr, Method::Dr];
        assert_eq!(cfg.violations(&o).len(), 1);
    }

    #[test]
    fn flags_override_file_values() {
        let text = "k = 0.8\nq0 = 0.4001\n";
        let flags = vec![("q0".to_string(), "0.5".to_string()), ("methods".to_string(), "exact,dr".to_string())];
        let (cfg, origins) = ExperimentConfig::load(Some(text), &flags).unwrap();
        assert_eq!(cfg.q0, 0.5);
        assert_eq!(cfg.k, 0.8);
        assert_eq!(cfg.methods, vec![Method::Exact, Method::Dr]);
        assert_eq!(origins.get("q0"), Origin::Flag);

        let flags = vec![("epsilon".to_string(), "lots".to_string())];
        let Err(Error::Validation(issues)) = ExperimentConfig::load(None, &flags) else { panic!() };
        assert_eq!(issues, vec!["command line: --epsilon: expected a number, got 'lots'".to_string()]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig { k: 0.8, epsilon: 5e-3, methods: vec![Method::Dense], ..Default::default() };
        let (back, _) = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
