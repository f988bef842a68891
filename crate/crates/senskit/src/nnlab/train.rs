//! Full-batch SGD and DP-SGD on the compiled loss.
//!
//! One engine drives both optimizers. Per epoch it evaluates the
//! per-sample gradient program over the whole training split (rows may
//! be evaluated in parallel; all reductions happen afterwards in fixed
//! row order), logs the mean loss at the **pre-update** weights together
//! with the test accuracy, checks convergence, and only then applies the
//! update:
//!
//! * SGD: `w ← w − η · (Σ_i g_i)/n`;
//! * DP-SGD: `w ← w − η · (Σ_i clip_C(g_i) + N(0, (m·C)² I)) / batch`,
//!   with the noise for epoch `t` drawn from the indexed substream
//!   `("dp-noise", t)` of the DP seed, so it is a pure function of
//!   `(seed, t)`.
//!
//! "Trained to convergence" means `|loss_t − loss_{t−1}| <
//! convergence_tol` measured at pre-update weights; the run stops
//! *before* applying the update of the converged epoch, so the reported
//! final weights are exactly the ones whose loss appears in the last log
//! row. When `max_epochs` runs out instead, one extra metrics pass logs
//! the final weights. Either way the last log row describes the weights
//! that are returned.
//!
//! An undefined loss (a sample whose cross-entropy hits `ln` of a
//! non-positive value, or any non-finite intermediate) aborts training
//! with the epoch and sample index — silently skipping or clamping such
//! samples would bias the very gradients this crate exists to analyze.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::ExecError;
use crate::privacy::{clip_l2, gaussian_noise, DpSgdParams, PrivacyError};
use crate::rng::CounterRng;

use super::data::{Dataset, SyntheticData};
use super::model::{CompiledModel, N_PARAMS};

/// Which update rule [`train`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    DpSgd,
}

/// Training configuration.
///
/// `learning_rate` may be zero (a degenerate run that logs metrics and
/// leaves the weights at their initialization); `dp` must be present
/// exactly when the optimizer is [`Optimizer::DpSgd`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub convergence_tol: f64,
    pub dp: Option<DpSgdParams>,
    pub init_seed: u64,
}

impl TrainConfig {
    /// Documented SGD defaults: η = 0.1, at most 5000 epochs,
    /// convergence at |Δloss| < 1e-7.
    pub fn sgd(init_seed: u64) -> Self {
        TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 0.1,
            max_epochs: 5000,
            convergence_tol: 1e-7,
            dp: None,
            init_seed,
        }
    }

    /// Documented DP-SGD defaults on top of the SGD ones: clip bound
    /// C = 0.1, noise multiplier 5.0.
    pub fn dpsgd(init_seed: u64, noise_seed: u64, batch_size: usize) -> Self {
        TrainConfig {
            optimizer: Optimizer::DpSgd,
            learning_rate: 0.1,
            max_epochs: 5000,
            convergence_tol: 1e-7,
            dp: Some(DpSgdParams {
                clip_bound: 0.1,
                noise_multiplier: 5.0,
                learning_rate: 0.1,
                batch_size,
                seed: noise_seed,
            }),
            init_seed,
        }
    }

    fn validate(&self, n_train: usize) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::InvalidConfig("max_epochs must be >= 1".into()));
        }
        if !(self.convergence_tol >= 0.0 && self.convergence_tol.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "convergence_tol must be finite and >= 0, got {}",
                self.convergence_tol
            )));
        }
        match (self.optimizer, &self.dp) {
            (Optimizer::Sgd, Some(_)) => Err(TrainError::InvalidConfig(
                "dp parameters given but optimizer is sgd".into(),
            )),
            (Optimizer::DpSgd, None) => Err(TrainError::InvalidConfig(
                "optimizer dpsgd requires dp parameters".into(),
            )),
            (Optimizer::DpSgd, Some(dp)) => {
                dp.validate()?;
                if dp.batch_size != n_train {
                    return Err(TrainError::InvalidConfig(format!(
                        "full-batch training requires batch_size == train size ({} != {})",
                        dp.batch_size, n_train
                    )));
                }
                Ok(())
            }
            (Optimizer::Sgd, None) => Ok(()),
        }
    }
}

/// One log row: metrics of the weights *before* that epoch's update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

/// Everything a training run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub initial_weights: Vec<f64>,
    pub final_weights: Vec<f64>,
    /// Weights after each applied update, in order.
    pub trajectory: Vec<Vec<f64>>,
    /// Per-epoch metrics; the last row always describes `final_weights`.
    pub log: Vec<EpochStats>,
    pub updates_applied: usize,
    pub converged: bool,
}

/// Errors from training.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("undefined loss at epoch {epoch}, train sample {sample}")]
    UndefinedLoss { epoch: usize, sample: usize },
    #[error("undefined prediction at epoch {epoch}, test sample {sample}")]
    UndefinedPrediction { epoch: usize, sample: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
}

/// Initial weights: uniform in ±1/√fan_in per layer (the bias vector
/// uses its layer's fan-in), drawn in parameter-layout order from the
/// `weight-init` substream of `init_seed`.
pub fn init_weights(init_seed: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(init_seed).substream("weight-init");
    let mut w = Vec::with_capacity(N_PARAMS);
    for (count, fan_in) in [(200, 25.0_f64), (64, 8.0), (8, 8.0), (8, 8.0)] {
        let bound = 1.0 / fan_in.sqrt();
        for _ in 0..count {
            w.push(rng.next_range(-bound, bound));
        }
    }
    w
}

/// Trains with plain SGD; `cfg.optimizer` must be [`Optimizer::Sgd`].
pub fn train_sgd(
    compiled: &CompiledModel,
    data: &SyntheticData,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if cfg.optimizer != Optimizer::Sgd {
        return Err(TrainError::InvalidConfig(
            "train_sgd called with a non-sgd configuration".into(),
        ));
    }
    train_from(compiled, data, cfg, init_weights(cfg.init_seed))
}

/// Trains with DP-SGD; `cfg.optimizer` must be [`Optimizer::DpSgd`].
pub fn train_dpsgd(
    compiled: &CompiledModel,
    data: &SyntheticData,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if cfg.optimizer != Optimizer::DpSgd {
        return Err(TrainError::InvalidConfig(
            "train_dpsgd called with a non-dpsgd configuration".into(),
        ));
    }
    train_from(compiled, data, cfg, init_weights(cfg.init_seed))
}

/// The shared engine, starting from explicit initial weights.
pub(crate) fn train_from(
    compiled: &CompiledModel,
    data: &SyntheticData,
    cfg: &TrainConfig,
    initial: Vec<f64>,
) -> Result<TrainOutcome, TrainError> {
    let n = data.train.len();
    if n == 0 {
        return Err(TrainError::EmptyTrainSplit);
    }
    cfg.validate(n)?;
    assert_eq!(initial.len(), N_PARAMS, "weight vector arity");

    let mut w = initial.clone();
    let mut train_rows = binding_rows(compiled, &data.train, &w);
    let mut test_rows = binding_rows(compiled, &data.test, &w);

    let mut log: Vec<EpochStats> = Vec::new();
    let mut trajectory: Vec<Vec<f64>> = Vec::new();
    let mut prev_loss: Option<f64> = None;
    let mut converged = false;
    let mut updates_applied = 0usize;

    for epoch in 0..cfg.max_epochs {
        set_weights(compiled, &mut train_rows, &w);
        let outs = compiled.grad.evaluate_batch(&train_rows)?;
        for (sample, o) in outs.iter().enumerate() {
            if !o.defined.iter().all(|&d| d) {
                return Err(TrainError::UndefinedLoss { epoch, sample });
            }
        }
        let mean_loss = outs.iter().map(|o| o.values[0]).sum::<f64>() / n as f64;
        let test_accuracy = accuracy(compiled, &mut test_rows, &data.test, &w, epoch)?;
        log.push(EpochStats { epoch, train_loss: mean_loss, test_accuracy });

        if let Some(prev) = prev_loss {
            if (mean_loss - prev).abs() < cfg.convergence_tol {
                converged = true;
                break; // stop before applying this epoch's update
            }
        }
        prev_loss = Some(mean_loss);

        // Aggregate per-sample gradients in fixed row order.
        let mut ghat = vec![0.0f64; N_PARAMS];
        match cfg.optimizer {
            Optimizer::Sgd => {
                for o in &outs {
                    for (k, acc) in ghat.iter_mut().enumerate() {
                        *acc += o.values[1 + k];
                    }
                }
                for acc in ghat.iter_mut() {
                    *acc /= n as f64;
                }
            }
            Optimizer::DpSgd => {
                let dp = cfg.dp.as_ref().expect("validated");
                for o in &outs {
                    let clipped = clip_l2(&o.values[1..], dp.clip_bound);
                    for (k, acc) in ghat.iter_mut().enumerate() {
                        *acc += clipped[k];
                    }
                }
                let mut noise_rng =
                    CounterRng::new(dp.seed).substream_indexed("dp-noise", epoch as u64);
                let noise = gaussian_noise(
                    N_PARAMS,
                    dp.noise_multiplier * dp.clip_bound,
                    &mut noise_rng,
                );
                for (acc, nz) in ghat.iter_mut().zip(&noise) {
                    *acc = (*acc + nz) / dp.batch_size as f64;
                }
            }
        }

        for (wk, gk) in w.iter_mut().zip(&ghat) {
            *wk -= cfg.learning_rate * gk;
        }
        trajectory.push(w.clone());
        updates_applied += 1;
    }

    if !converged {
        // max_epochs exhausted: the last update was never measured. Log
        // the final weights so the last row matches what is returned.
        set_weights(compiled, &mut train_rows, &w);
        let outs = compiled.metrics.evaluate_batch(&train_rows)?;
        for (sample, o) in outs.iter().enumerate() {
            if !o.defined[0] {
                return Err(TrainError::UndefinedLoss { epoch: cfg.max_epochs, sample });
            }
        }
        let mean_loss = outs.iter().map(|o| o.values[0]).sum::<f64>() / n as f64;
        let test_accuracy = accuracy(compiled, &mut test_rows, &data.test, &w, cfg.max_epochs)?;
        log.push(EpochStats { epoch: cfg.max_epochs, train_loss: mean_loss, test_accuracy });
    }

    Ok(TrainOutcome {
        initial_weights: initial,
        final_weights: w,
        trajectory,
        log,
        updates_applied,
        converged,
    })
}

fn binding_rows(compiled: &CompiledModel, split: &Dataset, w: &[f64]) -> Vec<Vec<f64>> {
    split
        .images
        .iter()
        .zip(&split.labels)
        .map(|(img, &label)| compiled.binding_row(w, img, label))
        .collect()
}

fn set_weights(compiled: &CompiledModel, rows: &mut [Vec<f64>], w: &[f64]) {
    for row in rows {
        compiled.set_row_weights(row, w);
    }
}

/// Fraction of test samples classified correctly (prediction: p > 0.5 ⇒
/// class 1). Empty test splits yield NaN. Only the prediction output
/// must be defined; an undefined test *loss* (a saturated but correct
/// prediction) is fine.
fn accuracy(
    compiled: &CompiledModel,
    test_rows: &mut [Vec<f64>],
    test: &Dataset,
    w: &[f64],
    epoch: usize,
) -> Result<f64, TrainError> {
    if test_rows.is_empty() {
        return Ok(f64::NAN);
    }
    set_weights(compiled, test_rows, w);
    let outs = compiled.metrics.evaluate_batch(&*test_rows)?;
    let mut correct = 0usize;
    for (sample, (o, &label)) in outs.iter().zip(&test.labels).enumerate() {
        if !o.defined[1] {
            return Err(TrainError::UndefinedPrediction { epoch, sample });
        }
        let predicted = u8::from(o.values[1] > 0.5);
        correct += usize::from(predicted == label);
    }
    Ok(correct as f64 / test_rows.len() as f64)
}
