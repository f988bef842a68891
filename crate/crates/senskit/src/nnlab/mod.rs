//! A small, fully symbolic neural-network laboratory.
//!
//! Everything here exists to answer one question end to end: *which
//! input pixels is a trained classifier's loss sensitive to, and how
//! does differentially private training change that?* The pieces:
//!
//! * [`data`] — deterministic synthetic 5×5 bar images (vertical bars
//!   are class 0, horizontal bars class 1) with Gaussian pixel noise;
//! * [`model`] — a 280-parameter sigmoid MLP whose binary cross-entropy
//!   loss is built as one expression graph over parameter, pixel, and
//!   label variables, then compiled into reusable evaluation programs
//!   (loss gradient, metrics, and both pixel partial-sensitivity
//!   bundles);
//! * [`train`] — full-batch SGD and DP-SGD driven by the compiled
//!   gradient program, bit-reproducible from the seeds alone;
//! * [`report`] — per-pixel partial-sensitivity aggregation: per-class
//!   max-|PS| maps, shared-edge histograms, and dispersion statistics.
//!
//! The model is deliberately tiny: every evaluation runs through the
//! same expression-graph machinery that the rest of the crate analyzes,
//! so training and sensitivity reporting exercise identical semantics —
//! there is no separate, hand-written neural-network implementation to
//! drift out of sync.

pub mod data;
pub mod model;
pub mod report;
pub mod train;

pub use data::{base_image, gen_synthetic, DataSpec, Dataset, Split, SyntheticData};
pub use data::{IMAGE_SIDE, LABEL_HORIZONTAL, LABEL_VERTICAL, PIXELS};
pub use model::{build_mlp, CompiledModel, ModelError, ModelGraph, LABEL_VAR, N_PARAMS};
pub use report::{
    dispersion_stats, pixel_partial_sensitivity, ps_report, DispersionStats, Histogram, PixelPs,
    PsReport, PsVariant, ReportError,
};
pub use train::{
    init_weights, train_dpsgd, train_sgd, EpochStats, Optimizer, TrainConfig, TrainError,
    TrainOutcome,
};
