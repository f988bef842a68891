//! Per-pixel partial-sensitivity reports over a dataset split.
//!
//! For a fixed weight vector, every sample's 25 pixel partial
//! sensitivities are evaluated with the precompiled bundle program and
//! aggregated three ways:
//!
//! * per-class maps of max |PS| per pixel (plus signed min/max, so both
//!   readings of "maximum" can be inspected),
//! * per-pixel histograms of the signed values with **shared** bin
//!   edges computed from the pooled min/max over all pixels and
//!   samples, and
//! * per-pixel counts of undefined entries, which are excluded from the
//!   histograms rather than clamped into them.
//!
//! Undefined entries are normal — an untrained net has φ = 0 on every
//! sample, making all fractional components 0/0 — so they are counted,
//! not fatal. [`dispersion_stats`] condenses a report into the two
//! pooled statistics used to compare training regimes: the mean
//! absolute PS and the per-pixel standard deviation normalized by that
//! pixel's mean |PS| (averaged over pixels with at least two defined
//! values and a nonzero mean).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::ExecError;

use super::data::{Dataset, PIXELS};
use super::model::{CompiledModel, N_PARAMS};

/// Which partial-sensitivity definition a report uses.
///
/// `Fractional` is the unit-norm share `(∂f/∂x_j)/φ`; `Gradient` is the
/// sensitivity of the gradient norm itself, `∂φ/∂x_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsVariant {
    Fractional,
    Gradient,
}

/// One sample's pixel partial sensitivities.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelPs {
    /// Gradient norm φ of the loss w.r.t. the pixels at this binding.
    pub phi: f64,
    pub phi_defined: bool,
    pub ps: [f64; PIXELS],
    pub defined: [bool; PIXELS],
}

/// Equal-width histogram; `edges` has `counts.len() + 1` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Aggregated partial-sensitivity report for one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsReport {
    pub variant: PsVariant,
    pub bins: usize,
    /// Signed PS per sample and pixel; meaningless where not defined.
    pub per_sample_ps: Vec<[f64; PIXELS]>,
    pub per_sample_defined: Vec<[bool; PIXELS]>,
    pub labels: Vec<u8>,
    /// Per class (index = label), per pixel: max |PS| over that class's
    /// defined entries; 0.0 where the class has no defined entry.
    pub max_abs_map: [[f64; PIXELS]; 2],
    pub min_signed: [[f64; PIXELS]; 2],
    pub max_signed: [[f64; PIXELS]; 2],
    /// Per-pixel histograms of signed values, all sharing one edge set.
    pub histograms: Vec<Histogram>,
    /// Per-pixel count of undefined entries over the whole split.
    pub undefined_counts: [usize; PIXELS],
}

/// Pooled dispersion statistics of a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionStats {
    /// Mean of |PS| over every defined (sample, pixel) entry.
    pub pooled_mean_abs: f64,
    /// Per-pixel sample standard deviation (n−1) of the signed values,
    /// divided by that pixel's mean |PS|, averaged over pixels with ≥ 2
    /// defined entries and a positive mean.
    pub mean_normalized_std: f64,
}

/// Errors from report construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("cannot build a report over an empty split")]
    EmptySplit,
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("weight vector has {0} entries, expected {expected}", expected = N_PARAMS)]
    WeightArity(usize),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Evaluates one sample's pixel partial sensitivities.
pub fn pixel_partial_sensitivity(
    compiled: &CompiledModel,
    weights: &[f64],
    pixels: &[f64; PIXELS],
    label: u8,
    variant: PsVariant,
) -> Result<PixelPs, ReportError> {
    if weights.len() != N_PARAMS {
        return Err(ReportError::WeightArity(weights.len()));
    }
    let program = match variant {
        PsVariant::Fractional => &compiled.ps_fractional,
        PsVariant::Gradient => &compiled.ps_gradient,
    };
    let row = compiled.binding_row(weights, pixels, label);
    let out = program.evaluate(&row)?;
    let mut ps = [0.0; PIXELS];
    let mut defined = [false; PIXELS];
    for k in 0..PIXELS {
        ps[k] = out.values[1 + k];
        defined[k] = out.defined[1 + k];
    }
    Ok(PixelPs { phi: out.values[0], phi_defined: out.defined[0], ps, defined })
}

/// Builds the aggregated report for one split at fixed weights.
pub fn ps_report(
    compiled: &CompiledModel,
    weights: &[f64],
    split: &Dataset,
    variant: PsVariant,
    bins: usize,
) -> Result<PsReport, ReportError> {
    if split.is_empty() {
        return Err(ReportError::EmptySplit);
    }
    if bins == 0 {
        return Err(ReportError::ZeroBins);
    }
    if weights.len() != N_PARAMS {
        return Err(ReportError::WeightArity(weights.len()));
    }

    let program = match variant {
        PsVariant::Fractional => &compiled.ps_fractional,
        PsVariant::Gradient => &compiled.ps_gradient,
    };
    let rows: Vec<Vec<f64>> = split
        .images
        .iter()
        .zip(&split.labels)
        .map(|(img, &label)| compiled.binding_row(weights, img, label))
        .collect();
    let outs = program.evaluate_batch(&rows)?;

    let n = split.len();
    let mut per_sample_ps = Vec::with_capacity(n);
    let mut per_sample_defined = Vec::with_capacity(n);
    let mut max_abs_map = [[0.0f64; PIXELS]; 2];
    let mut min_signed = [[0.0f64; PIXELS]; 2];
    let mut max_signed = [[0.0f64; PIXELS]; 2];
    let mut seen = [[false; PIXELS]; 2];
    let mut undefined_counts = [0usize; PIXELS];

    for (out, &label) in outs.iter().zip(&split.labels) {
        let class = usize::from(label);
        let mut ps = [0.0; PIXELS];
        let mut defined = [false; PIXELS];
        for k in 0..PIXELS {
            ps[k] = out.values[1 + k];
            defined[k] = out.defined[1 + k];
            if !defined[k] {
                undefined_counts[k] += 1;
                continue;
            }
            let v = ps[k];
            if seen[class][k] {
                max_abs_map[class][k] = max_abs_map[class][k].max(v.abs());
                min_signed[class][k] = min_signed[class][k].min(v);
                max_signed[class][k] = max_signed[class][k].max(v);
            } else {
                seen[class][k] = true;
                max_abs_map[class][k] = v.abs();
                min_signed[class][k] = v;
                max_signed[class][k] = v;
            }
        }
        per_sample_ps.push(ps);
        per_sample_defined.push(defined);
    }

    let histograms = build_histograms(&per_sample_ps, &per_sample_defined, bins);

    Ok(PsReport {
        variant,
        bins,
        per_sample_ps,
        per_sample_defined,
        labels: split.labels.clone(),
        max_abs_map,
        min_signed,
        max_signed,
        histograms,
        undefined_counts,
    })
}

/// Shared-edge histograms over the pooled defined values. With no
/// defined values the edges span [−0.5, 0.5]; a zero-width pool spans
/// value ± 0.5; values equal to the top edge land in the last bin.
fn build_histograms(
    ps: &[[f64; PIXELS]],
    defined: &[[bool; PIXELS]],
    bins: usize,
) -> Vec<Histogram> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (row, drow) in ps.iter().zip(defined) {
        for (v, &d) in row.iter().zip(drow) {
            if d {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
    }
    if lo > hi {
        lo = -0.5;
        hi = 0.5;
    } else if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    // The outer edges are pinned exactly; lo + (hi−lo)·bins/bins can
    // round below hi and would exclude the pooled maximum.
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
        .collect();
    let width = hi - lo;

    (0..PIXELS)
        .map(|k| {
            let mut counts = vec![0usize; bins];
            for (row, drow) in ps.iter().zip(defined) {
                if drow[k] {
                    let t = (row[k] - lo) / width * bins as f64;
                    let bin = (t as usize).min(bins - 1);
                    counts[bin] += 1;
                }
            }
            Histogram { edges: edges.clone(), counts }
        })
        .collect()
}

/// Pools a report into the two comparison statistics. Returns NaN
/// components when no entries qualify (e.g. an all-undefined report).
pub fn dispersion_stats(report: &PsReport) -> DispersionStats {
    let mut abs_sum = 0.0;
    let mut abs_count = 0usize;
    for (row, drow) in report.per_sample_ps.iter().zip(&report.per_sample_defined) {
        for (v, &d) in row.iter().zip(drow) {
            if d {
                abs_sum += v.abs();
                abs_count += 1;
            }
        }
    }
    let pooled_mean_abs = abs_sum / abs_count as f64;

    let mut normalized_sum = 0.0;
    let mut pixels_used = 0usize;
    for k in 0..PIXELS {
        let values: Vec<f64> = report
            .per_sample_ps
            .iter()
            .zip(&report.per_sample_defined)
            .filter(|(_, d)| d[k])
            .map(|(row, _)| row[k])
            .collect();
        if values.len() < 2 {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / n;
        if mean_abs <= 0.0 {
            continue;
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        normalized_sum += var.sqrt() / mean_abs;
        pixels_used += 1;
    }
    let mean_normalized_std = if pixels_used == 0 {
        f64::NAN
    } else {
        normalized_sum / pixels_used as f64
    };

    DispersionStats { pooled_mean_abs, mean_normalized_std }
}
