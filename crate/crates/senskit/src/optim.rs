//! Box-constrained global maximization and global L2 sensitivity.
//!
//! [`maximize`] runs a multistart scheme on a compiled scalar objective:
//!
//! 1. evaluate the objective on a `grid_per_dim^d` lattice spanning the
//!    closed box (corners exactly included);
//! 2. take the `top_k` best lattice points as seeds;
//! 3. refine each seed by projected gradient ascent — step along the
//!    compiled gradient, clamp back into the box, halve the step whenever
//!    the move does not strictly improve, stop when the step drops below
//!    `tol` or `ascent_steps` runs out;
//! 4. report the best point seen anywhere.
//!
//! Undefined objective values are treated as −∞, so partially defined
//! objectives are handled gracefully; if the objective is undefined on
//! the whole lattice the result carries value −∞ at the first lattice
//! point, which callers can detect. Ties are broken by a fixed candidate
//! order (lattice points by flat index, then refined seeds by seed
//! index), making results deterministic bit for bit.
//!
//! [`global_sensitivity`] specializes this to the L2 sensitivity of an
//! expression: for Lipschitz `f` the sensitivity equals the supremum of
//! the gradient norm over the attribute ranges, so it builds `φ` and
//! `∇φ` symbolically (via [`crate::sens`]), compiles both, and maximizes
//! `φ` over the box.

use serde::Serialize;
use thiserror::Error;

use crate::exec::{compile, EvalScratch, ExecError, Program};
use crate::expr::{ExprError, ExprGraph, NodeId};
use crate::sens::bundle;

/// Errors from domain construction or maximization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("invalid interval for {var:?}: [{lo}, {hi}] (need finite lo <= hi)")]
    InvalidInterval { var: String, lo: f64, hi: f64 },
    #[error("objective inputs {got:?} do not match box variables {expected:?}")]
    LayoutMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("objective must have exactly one output, got {0}")]
    NonScalarObjective(usize),
    #[error("gradient program must have one output per box variable ({expected}), got {got}")]
    GradientArity { expected: usize, got: usize },
    #[error("grid_per_dim must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Axis-aligned product of closed intervals, ordered by variable name.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    vars: Vec<String>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    /// Builds a box from `(name, lo, hi)` triples; every interval must be
    /// finite with `lo <= hi`.
    pub fn new<S: AsRef<str>>(intervals: &[(S, f64, f64)]) -> Result<BoxDomain, OptimError> {
        let mut vars = Vec::with_capacity(intervals.len());
        let mut lo = Vec::with_capacity(intervals.len());
        let mut hi = Vec::with_capacity(intervals.len());
        for (name, a, b) in intervals {
            if !a.is_finite() || !b.is_finite() || a > b {
                return Err(OptimError::InvalidInterval {
                    var: name.as_ref().to_string(),
                    lo: *a,
                    hi: *b,
                });
            }
            vars.push(name.as_ref().to_string());
            lo.push(*a);
            hi.push(*b);
        }
        Ok(BoxDomain { vars, lo, hi })
    }

    /// Variable names, in interval order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Number of dimensions.
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// Lower bounds, in variable order.
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    /// Upper bounds, in variable order.
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Componentwise inclusive membership.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    /// Projects a point onto the box (componentwise clamp).
    pub fn clamp(&self, point: &mut [f64]) {
        for (x, (&l, &h)) in point.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(l, h);
        }
    }

    /// Lattice coordinate `i/(n-1)` along dimension `d`, with the
    /// endpoints returned exactly.
    pub fn lattice_coord(&self, d: usize, i: usize, n: usize) -> f64 {
        if i == 0 {
            self.lo[d]
        } else if i + 1 == n {
            self.hi[d]
        } else {
            let t = i as f64 / (n - 1) as f64;
            (self.lo[d] + (self.hi[d] - self.lo[d]) * t).clamp(self.lo[d], self.hi[d])
        }
    }
}

/// Tuning for [`maximize`]; `Default` gives the documented values.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximizeConfig {
    /// Lattice resolution per dimension (≥ 2 so corners are included).
    pub grid_per_dim: usize,
    /// Number of best lattice points refined by ascent.
    pub top_k: usize,
    /// Maximum ascent iterations per seed.
    pub ascent_steps: usize,
    /// Initial ascent step; `None` means `0.1 ×` the smallest positive
    /// box width (no ascent if the box is a single point).
    pub step_init: Option<f64>,
    /// Ascent stops once the backtracked step falls below this.
    pub tol: f64,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        MaximizeConfig {
            grid_per_dim: 33,
            top_k: 8,
            ascent_steps: 200,
            step_init: None,
            tol: 1e-10,
        }
    }
}

/// Outcome of a maximization run.
///
/// `value` is the objective re-evaluated at `argmax` on construction
/// (−∞ when the objective was undefined everywhere it was probed);
/// `evaluations` counts objective-program evaluations, `seeds_used` the
/// seeds actually refined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub seeds_used: usize,
}

/// Value of a scalar program at `point`, with undefined mapped to −∞.
fn probe(p: &Program, point: &[f64], scratch: &mut EvalScratch) -> Result<f64, ExecError> {
    let mut value = [0.0];
    let mut defined = [false];
    p.evaluate_into(point, scratch, &mut value, &mut defined)?;
    Ok(if defined[0] && !value[0].is_nan() {
        value[0]
    } else {
        f64::NEG_INFINITY
    })
}

/// Maximizes a compiled scalar objective over a box.
///
/// `objective` and `objective_grad` must both take the box variables, in
/// box order, as inputs; `objective_grad` produces one output per
/// variable (the ascent direction). See the module docs for the
/// algorithm and determinism contract.
pub fn maximize(
    objective: &Program,
    objective_grad: &Program,
    domain: &BoxDomain,
    cfg: &MaximizeConfig,
) -> Result<MaxResult, OptimError> {
    if objective.output_count() != 1 {
        return Err(OptimError::NonScalarObjective(objective.output_count()));
    }
    if objective.inputs() != domain.vars() {
        return Err(OptimError::LayoutMismatch {
            expected: domain.vars().to_vec(),
            got: objective.inputs().to_vec(),
        });
    }
    if objective_grad.inputs() != domain.vars() {
        return Err(OptimError::LayoutMismatch {
            expected: domain.vars().to_vec(),
            got: objective_grad.inputs().to_vec(),
        });
    }
    if objective_grad.output_count() != domain.dim() {
        return Err(OptimError::GradientArity {
            expected: domain.dim(),
            got: objective_grad.output_count(),
        });
    }
    if cfg.grid_per_dim < 2 {
        return Err(OptimError::GridTooSmall(cfg.grid_per_dim));
    }

    let d = domain.dim();
    let n = cfg.grid_per_dim;
    let total = n.checked_pow(d as u32).expect("lattice size overflow");

    // Lattice rows in flat-index order: the first variable varies
    // slowest. This order is part of the tie-break contract.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(total);
    for flat in 0..total {
        let mut point = vec![0.0; d];
        let mut rem = flat;
        for dim in (0..d).rev() {
            point[dim] = domain.lattice_coord(dim, rem % n, n);
            rem /= n;
        }
        rows.push(point);
    }
    let lattice = objective.evaluate_batch(&rows)?;
    let mut evaluations = total;

    let values: Vec<f64> = lattice
        .iter()
        .map(|o| {
            if o.defined[0] && !o.values[0].is_nan() {
                o.values[0]
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();

    // Best lattice point: first flat index attaining the maximum.
    let mut best_idx = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best_idx] {
            best_idx = i;
        }
    }
    let mut best_point = rows[best_idx].clone();
    let mut best_value = values[best_idx];

    // Seeds: top_k lattice points by (value desc, flat index asc).
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("no NaN after -inf mapping")
            .then(a.cmp(&b))
    });
    let seeds: Vec<usize> = order
        .into_iter()
        .take(cfg.top_k)
        .filter(|&i| values[i] > f64::NEG_INFINITY)
        .collect();

    let default_step = {
        let w = domain
            .lo
            .iter()
            .zip(&domain.hi)
            .map(|(&l, &h)| h - l)
            .filter(|&w| w > 0.0)
            .fold(f64::INFINITY, f64::min);
        if w.is_finite() {
            0.1 * w
        } else {
            0.0 // single-point box: nothing to refine
        }
    };
    let step_init = cfg.step_init.unwrap_or(default_step);

    let mut scratch = EvalScratch::default();
    let mut grad_scratch = EvalScratch::default();
    let mut grad_vals = vec![0.0; d];
    let mut grad_def = vec![false; d];

    let mut seeds_used = 0usize;
    for &seed_idx in &seeds {
        seeds_used += 1;
        let mut x = rows[seed_idx].clone();
        let mut fx = values[seed_idx];
        let mut step = step_init;
        for _ in 0..cfg.ascent_steps {
            if step < cfg.tol || step == 0.0 {
                break;
            }
            objective_grad.evaluate_into(&x, &mut grad_scratch, &mut grad_vals, &mut grad_def)?;
            if !grad_def.iter().all(|&ok| ok) {
                break; // no usable ascent direction here
            }
            let mut cand: Vec<f64> = x
                .iter()
                .zip(&grad_vals)
                .map(|(&xi, &gi)| xi + step * gi)
                .collect();
            domain.clamp(&mut cand);
            if cand == x {
                break; // projection pinned every coordinate; no progress
            }
            let fc = probe(objective, &cand, &mut scratch)?;
            evaluations += 1;
            if fc > fx {
                x = cand;
                fx = fc;
            } else {
                step *= 0.5;
            }
        }
        // Candidate order: lattice first, then seeds — strict improvement
        // keeps the earliest candidate on ties.
        if fx > best_value {
            best_value = fx;
            best_point = x;
        }
    }

    // Re-check the reported value at the argmax (bit-identical to the
    // tracked value for defined points; −∞ stays −∞).
    let recheck = probe(objective, &best_point, &mut scratch)?;
    evaluations += 1;
    debug_assert!(recheck == best_value || best_value == f64::NEG_INFINITY);

    Ok(MaxResult {
        argmax: best_point,
        value: recheck,
        evaluations,
        seeds_used,
    })
}

/// Global L2 sensitivity of `f` over `domain`: the maximum of the
/// gradient norm `φ` over the box, found by [`maximize`] with `∇φ` (the
/// second-order bundle) as the ascent direction. `vars` fixes the
/// differentiation order and must match the box variables.
pub fn global_sensitivity(
    g: &mut ExprGraph,
    f: NodeId,
    vars: &[String],
    domain: &BoxDomain,
    cfg: &MaximizeConfig,
) -> Result<MaxResult, OptimError> {
    if vars != domain.vars() {
        return Err(OptimError::LayoutMismatch {
            expected: domain.vars().to_vec(),
            got: vars.to_vec(),
        });
    }
    let b = bundle(g, f, vars)?;
    let phi = compile(g, &[b.grad_norm], vars)?;
    let dphi = compile(g, b.ps_gradient.partials(), vars)?;
    maximize(&phi, &dphi, domain, cfg)
}
