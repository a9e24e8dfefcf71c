use std::path::Path;

use anyhow::{bail, Context, Result};
use gpsh_core::geom_domain::DomainConfig;
use serde::{Deserialize, Serialize};

/// Fully resolved run configuration; echoed verbatim into the manifest.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    /// Files read by the run.
    pub inputs: Vec<String>,
    /// Grassmannian subset in its JSON wire form.
    pub g: Option<serde_json::Value>,
    pub lattice: LatticeConfig,
    pub tol: f64,
    pub max_sweeps: usize,
    /// "sgs" or "jacobi"
    pub schedule: String,
    pub seed: u64,
    pub out: String,

    pub matrix: Option<String>,
    pub point: Option<Vec<f64>>,
    /// saddle | xsq | abs | custom-csv
    pub boundary: Option<String>,
    pub boundary_file: Option<String>,
    /// saddle | xsq | abs | double-well | custom-csv
    pub obstacle: Option<String>,
    pub obstacle_file: Option<String>,
    pub hull_points: Option<Vec<Vec<f64>>>,
    pub threshold: f64,
    pub domain: Option<DomainConfig>,
    pub grid_h: f64,
    pub strict_eta: f64,
    pub trials: usize,
    pub name: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// Box corners; default [-1, 1] in every coordinate.
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub h: f64,
    pub radius: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            lo: None,
            hi: None,
            h: 1.0 / 32.0,
            radius: 2,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            inputs: Vec::new(),
            g: None,
            lattice: LatticeConfig::default(),
            tol: 1e-10,
            max_sweeps: 100_000,
            schedule: "sgs".into(),
            seed: 0,
            out: "gpsh-out".into(),
            matrix: None,
            point: None,
            boundary: None,
            boundary_file: None,
            obstacle: None,
            obstacle_file: None,
            hull_points: None,
            threshold: 0.05,
            domain: None,
            grid_h: 0.05,
            strict_eta: 1e-6,
            trials: 200,
            name: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Inline JSON when the argument starts with '{', otherwise a path to a JSON file.
pub fn parse_json_arg<T: for<'de> Deserialize<'de>>(arg: &str, inputs: &mut Vec<String>) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        inputs.push(arg.to_string());
        std::fs::read_to_string(arg).with_context(|| format!("cannot read {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("invalid JSON: {text}"))
}

/// A domain builtin name or a JSON object such as {"builtin":"ball","dim":3}.
pub fn parse_domain(arg: &str, inputs: &mut Vec<String>) -> Result<DomainConfig> {
    if arg.trim_start().starts_with('{') || arg.ends_with(".json") {
        return parse_json_arg(arg, inputs);
    }
    serde_json::from_value(serde_json::json!({ "builtin": arg }))
        .with_context(|| format!("unknown domain builtin '{arg}'"))
}

/// "0.03125" or "1/32".
pub fn parse_step(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("step must be positive, got {s}"))
    }
}

pub fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

/// "x,y;x,y;..."
pub fn parse_points(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_vector).collect()
}

pub fn check_schedule(s: &str) -> Result<()> {
    match s {
        "sgs" | "jacobi" => Ok(()),
        _ => bail!("unknown schedule '{s}' (expected sgs or jacobi)"),
    }
}
