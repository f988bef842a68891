//! Test support: reference interpreter, random expressions, finite
//! differences.
//!
//! This module exists so that the oracles checking the crate live in one
//! place and stay independent of the machinery they check. It is compiled
//! for unit tests and behind the non-default `testkit` feature for
//! integration and acceptance suites; it is not part of the regular API.

use std::collections::HashMap;

use crate::expr::{ExprGraph, NodeId, NodeKind};
use crate::rng::CounterRng;

/// Reference evaluation of a single root by direct recursion over the
/// graph (memoized per node, since the graph is a DAG).
///
/// Semantics mirror the evaluation tape's contract exactly: an output is
/// undefined when its value is non-finite or when any operation on the
/// path to it hit a domain violation (division by zero, `ln` of a
/// non-positive value, `sqrt` of a negative value), including non-finite
/// bindings. Values are computed with the same scalar primitives the tape
/// uses, so agreement is expected bit for bit.
pub fn naive_eval(g: &ExprGraph, root: NodeId, bindings: &HashMap<String, f64>) -> (f64, bool) {
    let mut values: Vec<Option<(f64, bool)>> = vec![None; root.index() + 1];
    let (v, poisoned) = eval_rec(g, root, bindings, &mut values);
    (v, !poisoned)
}

fn eval_rec(
    g: &ExprGraph,
    id: NodeId,
    bindings: &HashMap<String, f64>,
    memo: &mut Vec<Option<(f64, bool)>>,
) -> (f64, bool) {
    if let Some(hit) = memo[id.index()] {
        return hit;
    }
    let result = match g.kind(id) {
        NodeKind::Const(v) => (*v, false),
        NodeKind::Var(name) => {
            let v = *bindings
                .get(name)
                .unwrap_or_else(|| panic!("no binding for variable {name:?}"));
            (v, !v.is_finite())
        }
        kind => {
            let mut args = [0.0f64; 2];
            let mut poisoned = false;
            for (slot, &child) in args.iter_mut().zip(g.children(id)) {
                let (v, p) = eval_rec(g, child, bindings, memo);
                *slot = v;
                poisoned |= p;
            }
            let args = &args[..kind.arity()];
            let v = kind.eval(args);
            poisoned |= kind.domain_violation(args) || !v.is_finite();
            (v, poisoned)
        }
    };
    memo[id.index()] = Some(result);
    result
}

/// Convenience: reference evaluation against an ordered variable list.
pub fn naive_eval_ordered(
    g: &ExprGraph,
    root: NodeId,
    vars: &[String],
    values: &[f64],
) -> (f64, bool) {
    assert_eq!(vars.len(), values.len());
    let bindings: HashMap<String, f64> =
        vars.iter().cloned().zip(values.iter().copied()).collect();
    naive_eval(g, root, &bindings)
}

/// Configuration for the random expression generator.
#[derive(Clone, Debug)]
pub struct ExprGenConfig {
    /// Maximum tree depth.
    pub max_depth: usize,
    /// Variables to draw leaves from.
    pub vars: Vec<String>,
    /// When false, `ln`, `sqrt` and `/` get arguments that are safe by
    /// construction (`c + y^2` with `c >= 1`) and `exp` arguments are
    /// damped, so the expression is smooth and defined on moderate boxes.
    /// When true, raw compositions are allowed, exercising the undefined
    /// paths.
    pub allow_unsafe: bool,
}

impl Default for ExprGenConfig {
    fn default() -> Self {
        ExprGenConfig {
            max_depth: 6,
            vars: vec!["a".into(), "b".into()],
            allow_unsafe: false,
        }
    }
}

/// Deterministic random expression generator.
pub struct ExprGen {
    rng: CounterRng,
    cfg: ExprGenConfig,
}

impl ExprGen {
    pub fn new(seed: u64, cfg: ExprGenConfig) -> Self {
        ExprGen { rng: CounterRng::new(seed).substream("expr-gen"), cfg }
    }

    /// Builds one random expression into `g` and returns its root. All
    /// configured variables are registered in the graph even when the
    /// particular expression does not use them, so callers can always
    /// differentiate with respect to the full list.
    pub fn gen(&mut self, g: &mut ExprGraph) -> NodeId {
        for name in &self.cfg.vars.clone() {
            g.variable(name).expect("valid generator variable");
        }
        let depth = self.cfg.max_depth;
        self.gen_at(g, depth)
    }

    fn leaf(&mut self, g: &mut ExprGraph) -> NodeId {
        if !self.cfg.vars.is_empty() && self.rng.next_f64() < 0.7 {
            let i = self.rng.next_index(self.cfg.vars.len());
            let name = self.cfg.vars[i].clone();
            g.variable(&name).expect("generated variable")
        } else {
            // Round to keep printed forms short; range chosen to exercise
            // negatives and zero-ish values.
            let v = (self.rng.next_range(-2.0, 2.0) * 16.0).round() / 16.0;
            g.constant(v).expect("finite constant")
        }
    }

    fn gen_at(&mut self, g: &mut ExprGraph, depth: usize) -> NodeId {
        if depth == 0 {
            return self.leaf(g);
        }
        match self.rng.next_index(10) {
            0 => {
                let a = self.gen_at(g, depth - 1);
                let b = self.gen_at(g, depth - 1);
                g.add(a, b)
            }
            1 => {
                let a = self.gen_at(g, depth - 1);
                let b = self.gen_at(g, depth - 1);
                g.sub(a, b)
            }
            2 => {
                let a = self.gen_at(g, depth - 1);
                let b = self.gen_at(g, depth - 1);
                g.mul(a, b)
            }
            3 => {
                let a = self.gen_at(g, depth - 1);
                let b = self.gen_at(g, depth - 1);
                if self.cfg.allow_unsafe {
                    g.div(a, b)
                } else {
                    let d = self.positive_guard(g, b);
                    g.div(a, d)
                }
            }
            4 => {
                let a = self.gen_at(g, depth - 1);
                g.neg(a)
            }
            5 => {
                let a = self.gen_at(g, depth - 1);
                if self.cfg.allow_unsafe {
                    g.exp(a)
                } else {
                    // Damp the argument through a sigmoid so nesting cannot
                    // overflow: exp of a value in (-2, 2).
                    let s = g.sigmoid(a);
                    let four = g.constant(4.0).expect("const");
                    let two = g.constant(2.0).expect("const");
                    let scaled = g.mul(four, s);
                    let arg = g.sub(scaled, two);
                    g.exp(arg)
                }
            }
            6 => {
                let a = self.gen_at(g, depth - 1);
                if self.cfg.allow_unsafe {
                    g.ln(a)
                } else {
                    let arg = self.positive_guard(g, a);
                    g.ln(arg)
                }
            }
            7 => {
                let a = self.gen_at(g, depth - 1);
                if self.cfg.allow_unsafe {
                    g.sqrt(a)
                } else {
                    let arg = self.positive_guard(g, a);
                    g.sqrt(arg)
                }
            }
            8 => {
                let a = self.gen_at(g, depth - 1);
                g.sigmoid(a)
            }
            _ => {
                let a = self.gen_at(g, depth - 1);
                let k: f64 = [2.0, 3.0, 0.5, -1.0][self.rng.next_index(4)];
                if self.cfg.allow_unsafe || (k.fract() == 0.0 && k > 0.0) {
                    g.pow(a, k)
                } else {
                    // Fractional or negative exponents need a positive base.
                    let base = self.positive_guard(g, a);
                    g.pow(base, k)
                }
            }
        }
    }

    /// `c + x^2` with `c in [1, 2]`: strictly positive, smooth.
    fn positive_guard(&mut self, g: &mut ExprGraph, x: NodeId) -> NodeId {
        let c = (self.rng.next_range(1.0, 2.0) * 16.0).round() / 16.0;
        let c = g.constant(c).expect("finite constant");
        let sq = g.pow(x, 2.0);
        g.add(c, sq)
    }
}

/// Central finite difference of `f` along coordinate `i` at `x`.
///
/// Returns `None` when either stencil evaluation is undefined.
pub fn central_diff<F>(f: F, x: &[f64], i: usize, h: f64) -> Option<f64>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut hi = x.to_vec();
    let mut lo = x.to_vec();
    hi[i] += h;
    lo[i] -= h;
    Some((f(&hi)? - f(&lo)?) / (2.0 * h))
}

/// Brute-force maximization oracle: evaluates a scalar program at every
/// point of a `per_dim^d` lattice over the closed `intervals` (endpoints
/// exact) and returns the first point attaining the maximum, with its
/// value. Undefined or NaN evaluations count as −∞. Deliberately a plain
/// sequential nested loop, independent of the optimizer it checks.
pub fn dense_grid_max(
    p: &crate::exec::Program,
    intervals: &[(f64, f64)],
    per_dim: usize,
) -> (Vec<f64>, f64) {
    assert!(per_dim >= 2, "need at least the two endpoints per axis");
    let d = intervals.len();
    let total = per_dim.checked_pow(d as u32).expect("lattice size overflow");
    let coord = |dim: usize, i: usize| -> f64 {
        let (lo, hi) = intervals[dim];
        if i == 0 {
            lo
        } else if i + 1 == per_dim {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / (per_dim - 1) as f64)
        }
    };

    let mut scratch = crate::exec::EvalScratch::default();
    let mut value = [0.0f64];
    let mut defined = [false];
    let mut point = vec![0.0f64; d];
    let mut best_point = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for flat in 0..total {
        let mut rem = flat;
        for dim in (0..d).rev() {
            point[dim] = coord(dim, rem % per_dim);
            rem /= per_dim;
        }
        p.evaluate_into(&point, &mut scratch, &mut value, &mut defined)
            .expect("oracle binding arity");
        let v = if defined[0] && !value[0].is_nan() {
            value[0]
        } else {
            f64::NEG_INFINITY
        };
        if v > best || best_point.is_empty() {
            best = v;
            best_point = point.clone();
        }
    }
    (best_point, best)
}

/// Relative closeness with an absolute floor near zero: passes when
/// `|a - b| <= floor` or `|a - b| / max(|a|, |b|) <= rel`.
pub fn close_rel(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    let diff = (a - b).abs();
    diff <= floor || diff <= rel * a.abs().max(b.abs())
}
