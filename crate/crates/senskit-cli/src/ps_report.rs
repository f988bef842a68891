//! `senskit ps-report` — per-pixel partial-sensitivity aggregation of a
//! trained net over one dataset split.
//!
//! Reads `--data` (from `senskit gen`) and `--weights` (from
//! `senskit train`), evaluates the chosen variant's 25 pixel partial
//! sensitivities for every sample in `--split`, and writes:
//!
//! * `maxmap.csv` — `class,pixel_index,max_abs,min_signed,max_signed`
//!   (50 rows: both classes × 25 pixels);
//! * `hist.csv` — `pixel_index,bin_lo,bin_hi,count` (25 × bins rows,
//!   shared equal-width edges from the pooled defined values);
//! * `undefined_counts.csv` — `pixel_index,count`;
//! * `ps_report.meta.json` — run metadata.
//!
//! A summary JSON object (sample count, undefined total, pooled
//! dispersion statistics) is printed to stdout.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use senskit::expr::ExprGraph;
use senskit::nnlab::{build_mlp, dispersion_stats, ps_report, ReportError, PIXELS};

use crate::common::{self, CliError, SplitArg, VariantArg, WeightsFile};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Path to dataset.json produced by `senskit gen`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Path to weights.json produced by `senskit train`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Which split to aggregate over (default train).
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Partial-sensitivity variant (default fractional).
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Histogram bin count (default 50).
    #[arg(long)]
    bins: Option<usize>,
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
    weights: Option<PathBuf>,
    split: Option<SplitArg>,
    variant: Option<VariantArg>,
    bins: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary {
    variant: VariantArg,
    split: SplitArg,
    samples: usize,
    undefined_total: usize,
    pooled_mean_abs: f64,
    mean_normalized_std: f64,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let cfg: FileConfig = common::load_config(&args.config)?;
    let data_path = args
        .data
        .or(cfg.data)
        .ok_or_else(|| CliError::usage("--data is required (flag or config)"))?;
    let weights_path = args
        .weights
        .or(cfg.weights)
        .ok_or_else(|| CliError::usage("--weights is required (flag or config)"))?;
    let split = args.split.or(cfg.split).unwrap_or(SplitArg::Train);
    let variant = args.variant.or(cfg.variant).unwrap_or(VariantArg::Fractional);
    let bins = args.bins.or(cfg.bins).unwrap_or(50);
    let out_dir = args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("."));

    let data: senskit::nnlab::SyntheticData = common::read_json(&data_path)?;
    let weights: WeightsFile = common::read_json(&weights_path)?;
    let dataset = match split {
        SplitArg::Train => &data.train,
        SplitArg::Test => &data.test,
    };

    let model = build_mlp(ExprGraph::new()).map_err(|e| CliError::numeric(e.to_string()))?;
    let compiled = model.compile().map_err(|e| CliError::numeric(e.to_string()))?;

    let report = ps_report(&compiled, &weights.final_weights, dataset, variant.to_ps(), bins)
        .map_err(|e| match e {
            ReportError::Exec(_) => CliError::numeric(e.to_string()),
            ReportError::EmptySplit | ReportError::ZeroBins | ReportError::WeightArity(_) => {
                CliError::usage(e.to_string())
            }
        })?;

    let mut maxmap = String::from("class,pixel_index,max_abs,min_signed,max_signed\n");
    for class in 0..2 {
        for k in 0..PIXELS {
            maxmap.push_str(&format!(
                "{},{},{},{},{}\n",
                class,
                k,
                common::fmt_f64(report.max_abs_map[class][k]),
                common::fmt_f64(report.min_signed[class][k]),
                common::fmt_f64(report.max_signed[class][k]),
            ));
        }
    }

    let mut hist = String::from("pixel_index,bin_lo,bin_hi,count\n");
    for (k, h) in report.histograms.iter().enumerate() {
        for (b, &count) in h.counts.iter().enumerate() {
            hist.push_str(&format!(
                "{},{},{},{}\n",
                k,
                common::fmt_f64(h.edges[b]),
                common::fmt_f64(h.edges[b + 1]),
                count
            ));
        }
    }

    let mut undefined = String::from("pixel_index,count\n");
    for (k, &count) in report.undefined_counts.iter().enumerate() {
        undefined.push_str(&format!("{k},{count}\n"));
    }

    common::ensure_dir(&out_dir)?;
    common::write_text(&out_dir.join("maxmap.csv"), &maxmap)?;
    common::write_text(&out_dir.join("hist.csv"), &hist)?;
    common::write_text(&out_dir.join("undefined_counts.csv"), &undefined)?;

    let resolved = json!({
        "data": data_path.display().to_string(),
        "weights": weights_path.display().to_string(),
        "split": split,
        "variant": variant,
        "bins": bins,
        "out": out_dir.display().to_string(),
    });
    let mut seeds = std::collections::BTreeMap::new();
    seeds.insert("data", data.spec.seed);
    seeds.insert("init", weights.init_seed);
    common::write_metadata(&out_dir, "ps_report.meta.json", "ps-report", seeds, resolved)?;

    let stats = dispersion_stats(&report);
    let summary = Summary {
        variant,
        split,
        samples: dataset.len(),
        undefined_total: report.undefined_counts.iter().sum(),
        pooled_mean_abs: stats.pooled_mean_abs,
        mean_normalized_std: stats.mean_normalized_std,
    };
    let mut text =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    Ok(())
}
