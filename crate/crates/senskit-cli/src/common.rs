//! Shared CLI plumbing: error-to-exit-code mapping, float formatting,
//! JSON/CSV file helpers, run metadata, and flag-string parsers.
//!
//! Exit codes are a stable contract: 0 success, 2 usage/parse/schema
//! errors, 3 I/O errors, 4 numerical failures. Every float written to
//! CSV goes through [`fmt_f64`] (17 significant digits, round-trip
//! exact); JSON numbers use serde_json's shortest round-trip encoding.
//! Data files are pure functions of the resolved configuration — the
//! only timestamp lives in the sibling `*.meta.json` files, which
//! determinism comparisons exclude.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use senskit::nnlab::{Optimizer, PsVariant};
use senskit::DpSgdParams;

/// CLI-level error with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unparsable expressions, schema mismatches → exit 2.
    Usage(String),
    /// Filesystem failures → exit 3.
    Io(String),
    /// Numerical failures (undefined values, overflow) → exit 4.
    Numeric(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> CliError {
        CliError::Io(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> CliError {
        CliError::Numeric(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

/// Formats a float with 17 significant digits — enough to round-trip
/// any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Partial-sensitivity variant flag, shared by `analyze` and
/// `ps-report`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Fractional,
    Gradient,
}

impl VariantArg {
    pub fn to_ps(self) -> PsVariant {
        match self {
            VariantArg::Fractional => PsVariant::Fractional,
            VariantArg::Gradient => PsVariant::Gradient,
        }
    }
}

/// Optimizer flag (`sgd` | `dpsgd`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Sgd,
    #[value(name = "dpsgd")]
    DpSgd,
}

impl OptimizerArg {
    pub fn to_optimizer(self) -> Optimizer {
        match self {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::DpSgd => Optimizer::DpSgd,
        }
    }
}

/// Dataset split flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
}

/// Schema of `weights.json`: the resolved training configuration plus
/// the initial and final weight vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsFile {
    pub optimizer: Optimizer,
    pub init_seed: u64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub convergence_tol: f64,
    pub dp: Option<DpSgdParams>,
    pub converged: bool,
    pub updates_applied: usize,
    pub weight_init: String,
    pub initial_weights: Vec<f64>,
    pub final_weights: Vec<f64>,
}

/// Sidecar metadata written next to every data artifact. The timestamp
/// makes meta files non-deterministic by design; byte-level replay
/// comparisons cover the data files only.
#[derive(Debug, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub timestamp_unix_ms: u128,
    pub seeds: BTreeMap<&'static str, u64>,
    pub config: serde_json::Value,
}

/// Writes `<dir>/<name>` with the resolved config and seeds.
pub fn write_metadata(
    dir: &Path,
    name: &str,
    command: &'static str,
    seeds: BTreeMap<&'static str, u64>,
    config: serde_json::Value,
) -> Result<(), CliError> {
    let meta = RunMetadata {
        tool: "senskit",
        version: env!("CARGO_PKG_VERSION"),
        command,
        timestamp_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        seeds,
        config,
    };
    write_json(&dir.join(name), &meta)
}

/// Loads an optional `--config` JSON file.
pub fn load_config<T: for<'de> Deserialize<'de> + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => read_json(p),
    }
}

/// Reads and deserializes a JSON file; missing files are I/O errors,
/// malformed content is a schema (usage) error.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", path.display())))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

/// Parses repeated `NAME=LO:HI` range flags and checks they cover the
/// expression's variables exactly, returning intervals in variable
/// order.
pub fn parse_ranges(
    specs: &[String],
    vars: &[String],
) -> Result<Vec<(String, f64, f64)>, CliError> {
    let mut map: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for spec in specs {
        let (name, interval) = spec
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--range must look like NAME=LO:HI, got {spec:?}")))?;
        let (lo, hi) = interval
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("--range must look like NAME=LO:HI, got {spec:?}")))?;
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("invalid lower bound in {spec:?}")))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("invalid upper bound in {spec:?}")))?;
        if map.insert(name.trim().to_string(), (lo, hi)).is_some() {
            return Err(CliError::usage(format!("duplicate --range for variable {name:?}")));
        }
    }
    for var in vars {
        if !map.contains_key(var) {
            return Err(CliError::usage(format!("missing --range for variable {var:?}")));
        }
    }
    for name in map.keys() {
        if !vars.iter().any(|v| v == name) {
            return Err(CliError::usage(format!(
                "--range given for {name:?}, which does not occur in the expression"
            )));
        }
    }
    Ok(vars
        .iter()
        .map(|v| {
            let (lo, hi) = map[v];
            (v.clone(), lo, hi)
        })
        .collect())
}

/// Parses repeated/comma-separated `NAME=VALUE` point flags into a
/// point in variable order; must cover the variables exactly.
pub fn parse_point(specs: &[String], vars: &[String]) -> Result<Vec<f64>, CliError> {
    let mut map: BTreeMap<String, f64> = BTreeMap::new();
    for group in specs {
        for spec in group.split(',') {
            let spec = spec.trim();
            if spec.is_empty() {
                continue;
            }
            let (name, value) = spec
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--at must look like NAME=VALUE, got {spec:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("invalid value in {spec:?}")))?;
            if map.insert(name.trim().to_string(), value).is_some() {
                return Err(CliError::usage(format!("duplicate --at for variable {name:?}")));
            }
        }
    }
    for var in vars {
        if !map.contains_key(var) {
            return Err(CliError::usage(format!("missing --at for variable {var:?}")));
        }
    }
    for name in map.keys() {
        if !vars.iter().any(|v| v == name) {
            return Err(CliError::usage(format!(
                "--at given for {name:?}, which does not occur in the expression"
            )));
        }
    }
    Ok(vars.iter().map(|v| map[v]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [
            0.0,
            1.0,
            -1.5,
            0.1,
            f64::MIN_POSITIVE,
            f64::MAX,
            1.0 / 3.0,
            5.000000000000001,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(2.0), "2.0000000000000000e0");
    }

    #[test]
    fn range_parsing_enforces_exact_cover() {
        let vars = vec!["a".to_string(), "b".to_string()];
        let ok = parse_ranges(
            &["b=-1:2".to_string(), "a=1e-3:2.5".to_string()],
            &vars,
        )
        .unwrap();
        assert_eq!(ok[0], ("a".to_string(), 1e-3, 2.5));
        assert_eq!(ok[1], ("b".to_string(), -1.0, 2.0));

        assert!(parse_ranges(&["a=1:2".to_string()], &vars).is_err());
        assert!(parse_ranges(
            &["a=1:2".to_string(), "b=0:1".to_string(), "c=0:1".to_string()],
            &vars
        )
        .is_err());
        assert!(parse_ranges(&["a=1".to_string(), "b=0:1".to_string()], &vars).is_err());
        assert!(parse_ranges(
            &["a=1:2".to_string(), "a=0:1".to_string(), "b=0:1".to_string()],
            &vars
        )
        .is_err());
    }

    #[test]
    fn point_parsing_accepts_commas_and_repeats() {
        let vars = vec!["a".to_string(), "b".to_string()];
        let p = parse_point(&["a=1,b=0.5".to_string()], &vars).unwrap();
        assert_eq!(p, vec![1.0, 0.5]);
        let q = parse_point(&["b=0.5".to_string(), "a=1".to_string()], &vars).unwrap();
        assert_eq!(q, vec![1.0, 0.5]);
        assert!(parse_point(&["a=1".to_string()], &vars).is_err());
        assert!(parse_point(&["a=1,b=2,c=3".to_string()], &vars).is_err());
    }
}
