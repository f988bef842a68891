//! `senskit train` — fit the bundled MLP on a generated dataset.
//!
//! Reads `--data` (a `dataset.json` from `senskit gen`), builds and
//! compiles the symbolic loss, trains with SGD or DP-SGD, and writes:
//!
//! * `weights.json` — resolved training configuration, initial and
//!   final weight vectors, convergence status;
//! * `training_log.csv` — `epoch,train_loss,test_accuracy`, one row per
//!   logged epoch (the last row always describes the final weights);
//! * `train.meta.json` — run metadata.
//!
//! Training is full batch: the DP-SGD batch size is pinned to the train
//! split size. A numerically undefined loss aborts with exit code 4 and
//! the offending epoch and sample in the message.

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::json;

use senskit::expr::ExprGraph;
use senskit::nnlab::{
    build_mlp, train_dpsgd, train_sgd, Optimizer, SyntheticData, TrainConfig, TrainError,
};
use senskit::DpSgdParams;

use crate::common::{self, CliError, OptimizerArg, WeightsFile};

/// Weight-initialization scheme identifier recorded in every artifact.
pub const WEIGHT_INIT_SCHEME: &str = "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); stream weight-init";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Path to dataset.json produced by `senskit gen`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Update rule (default sgd).
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Learning rate η ≥ 0 (default 0.1).
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Epoch cap (default 5000).
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Convergence threshold on |Δ train loss| (default 1e-7).
    #[arg(long)]
    convergence_tol: Option<f64>,
    /// Weight-initialization seed (default 42).
    #[arg(long)]
    init_seed: Option<u64>,
    /// DP-SGD per-sample clip bound C (default 0.1).
    #[arg(long)]
    clip_bound: Option<f64>,
    /// DP-SGD noise multiplier; noise std = multiplier·C (default 5).
    #[arg(long)]
    noise_multiplier: Option<f64>,
    /// DP-SGD noise seed (default 99).
    #[arg(long)]
    dp_seed: Option<u64>,
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
    data: Option<PathBuf>,
    optimizer: Option<OptimizerArg>,
    learning_rate: Option<f64>,
    max_epochs: Option<usize>,
    convergence_tol: Option<f64>,
    init_seed: Option<u64>,
    clip_bound: Option<f64>,
    noise_multiplier: Option<f64>,
    dp_seed: Option<u64>,
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let cfg: FileConfig = common::load_config(&args.config)?;
    let data_path = args
        .data
        .or(cfg.data)
        .ok_or_else(|| CliError::usage("--data is required (flag or config)"))?;
    let optimizer = args.optimizer.or(cfg.optimizer).unwrap_or(OptimizerArg::Sgd);
    let learning_rate = args.learning_rate.or(cfg.learning_rate).unwrap_or(0.1);
    let max_epochs = args.max_epochs.or(cfg.max_epochs).unwrap_or(5000);
    let convergence_tol = args.convergence_tol.or(cfg.convergence_tol).unwrap_or(1e-7);
    let init_seed = args.init_seed.or(cfg.init_seed).unwrap_or(42);
    let clip_bound = args.clip_bound.or(cfg.clip_bound).unwrap_or(0.1);
    let noise_multiplier = args.noise_multiplier.or(cfg.noise_multiplier).unwrap_or(5.0);
    let dp_seed = args.dp_seed.or(cfg.dp_seed).unwrap_or(99);
    let out_dir = args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("."));

    let data: SyntheticData = common::read_json(&data_path)?;
    validate_dataset(&data)?;

    let dp = match optimizer.to_optimizer() {
        Optimizer::Sgd => None,
        Optimizer::DpSgd => Some(DpSgdParams {
            clip_bound,
            noise_multiplier,
            learning_rate,
            batch_size: data.train.len(),
            seed: dp_seed,
        }),
    };
    let train_cfg = TrainConfig {
        optimizer: optimizer.to_optimizer(),
        learning_rate,
        max_epochs,
        convergence_tol,
        dp,
        init_seed,
    };

    let model = build_mlp(ExprGraph::new()).map_err(|e| CliError::numeric(e.to_string()))?;
    let compiled = model.compile().map_err(|e| CliError::numeric(e.to_string()))?;

    let outcome = match train_cfg.optimizer {
        Optimizer::Sgd => train_sgd(&compiled, &data, &train_cfg),
        Optimizer::DpSgd => train_dpsgd(&compiled, &data, &train_cfg),
    }
    .map_err(|e| match e {
        TrainError::UndefinedLoss { .. } | TrainError::UndefinedPrediction { .. } => {
            CliError::numeric(e.to_string())
        }
        TrainError::Exec(_) => CliError::numeric(e.to_string()),
        TrainError::EmptyTrainSplit
        | TrainError::InvalidConfig(_)
        | TrainError::Privacy(_) => CliError::usage(e.to_string()),
    })?;

    let weights = WeightsFile {
        optimizer: train_cfg.optimizer,
        init_seed,
        learning_rate,
        max_epochs,
        convergence_tol,
        dp: train_cfg.dp,
        converged: outcome.converged,
        updates_applied: outcome.updates_applied,
        weight_init: WEIGHT_INIT_SCHEME.to_string(),
        initial_weights: outcome.initial_weights.clone(),
        final_weights: outcome.final_weights.clone(),
    };

    let mut log_csv = String::from("epoch,train_loss,test_accuracy\n");
    for row in &outcome.log {
        log_csv.push_str(&format!(
            "{},{},{}\n",
            row.epoch,
            common::fmt_f64(row.train_loss),
            common::fmt_f64(row.test_accuracy)
        ));
    }

    common::ensure_dir(&out_dir)?;
    common::write_json(&out_dir.join("weights.json"), &weights)?;
    common::write_text(&out_dir.join("training_log.csv"), &log_csv)?;

    let resolved = json!({
        "data": data_path.display().to_string(),
        "optimizer": optimizer,
        "learning_rate": learning_rate,
        "max_epochs": max_epochs,
        "convergence_tol": convergence_tol,
        "init_seed": init_seed,
        "clip_bound": clip_bound,
        "noise_multiplier": noise_multiplier,
        "dp_seed": dp_seed,
        "out": out_dir.display().to_string(),
        "weight_init": WEIGHT_INIT_SCHEME,
        "data_seed": data.spec.seed,
    });
    let mut seeds = std::collections::BTreeMap::new();
    seeds.insert("init", init_seed);
    seeds.insert("data", data.spec.seed);
    if matches!(train_cfg.optimizer, Optimizer::DpSgd) {
        seeds.insert("dp-noise", dp_seed);
    }
    common::write_metadata(&out_dir, "train.meta.json", "train", seeds, resolved)
}

/// Structural checks on a loaded dataset beyond what serde enforces.
fn validate_dataset(data: &SyntheticData) -> Result<(), CliError> {
    for split in [&data.train, &data.test] {
        if split.images.len() != split.labels.len() {
            return Err(CliError::usage(format!(
                "malformed dataset: {} images but {} labels in one split",
                split.images.len(),
                split.labels.len()
            )));
        }
        if let Some(bad) = split.labels.iter().find(|&&l| l > 1) {
            return Err(CliError::usage(format!("malformed dataset: label {bad} out of range")));
        }
    }
    Ok(())
}
