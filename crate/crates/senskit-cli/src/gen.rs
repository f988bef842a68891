//! `senskit gen` — deterministic synthetic bar-image dataset.
//!
//! Writes `dataset.json` (the full [`SyntheticData`] value: spec, train
//! split, test split) plus `dataset.meta.json`. The dataset is a pure
//! function of the resolved spec, so re-running with the same flags
//! reproduces the file byte for byte.
//!
//! [`SyntheticData`]: senskit::nnlab::SyntheticData

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::json;

use senskit::nnlab::{gen_synthetic, DataSpec};

use crate::common::{self, CliError};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Training images per class (default 1000).
    #[arg(long)]
    n_train_per_class: Option<usize>,
    /// Test images per class (default 100).
    #[arg(long)]
    n_test_per_class: Option<usize>,
    /// Standard deviation of the per-pixel Gaussian noise (default 0.2).
    #[arg(long)]
    noise_std: Option<f64>,
    /// Data-generation seed (default 7).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file mirroring these flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n_train_per_class: Option<usize>,
    n_test_per_class: Option<usize>,
    noise_std: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let cfg: FileConfig = common::load_config(&args.config)?;
    let defaults = DataSpec::default();
    let spec = DataSpec {
        n_train_per_class: args
            .n_train_per_class
            .or(cfg.n_train_per_class)
            .unwrap_or(defaults.n_train_per_class),
        n_test_per_class: args
            .n_test_per_class
            .or(cfg.n_test_per_class)
            .unwrap_or(defaults.n_test_per_class),
        noise_std: args.noise_std.or(cfg.noise_std).unwrap_or(defaults.noise_std),
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
    };
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(CliError::usage(format!(
            "--noise-std must be ≥ 0 and finite, got {}",
            spec.noise_std
        )));
    }
    let out_dir = args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("."));

    let data = gen_synthetic(&spec);

    common::ensure_dir(&out_dir)?;
    common::write_json(&out_dir.join("dataset.json"), &data)?;

    let resolved = json!({
        "n_train_per_class": spec.n_train_per_class,
        "n_test_per_class": spec.n_test_per_class,
        "noise_std": spec.noise_std,
        "seed": spec.seed,
        "out": out_dir.display().to_string(),
    });
    let mut seeds = std::collections::BTreeMap::new();
    seeds.insert("data", spec.seed);
    common::write_metadata(&out_dir, "dataset.meta.json", "gen", seeds, resolved)
}
