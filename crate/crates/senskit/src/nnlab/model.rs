//! The Appendix MLP as one symbolic loss graph.
//!
//! Architecture: 25 inputs → 8 hidden → 8 hidden → 1 output, a sigmoid
//! after every layer, and a bias vector only on the middle layer:
//!
//! ```text
//! p = σ(W₃ᵀ σ(W₂ᵀ σ(W₁ᵀ x) + b₂))
//! loss = −( y·ln(p) + (1−y)·ln(1−p) )
//! ```
//!
//! Parameters are the 280 variables `w0..w279` in a frozen layout:
//! `W₁[i][j] = w(i·8+j)` for input `i`, unit `j` (0..=199); `W₂[j][k] =
//! w(200+j·8+k)` (200..=263); `b₂[k] = w(264+k)` (264..=271); `W₃[k] =
//! w(272+k)` (272..=279). Pixels are `x0..x24` (row-major), the label is
//! `y`. All dot products fold left in ascending index order, so the graph
//! — and every tape compiled from it — is deterministic.
//!
//! The cross-entropy `ln` arguments are deliberately unguarded: a
//! saturated output (`p` rounding to exactly 0 or 1) is a domain
//! violation that evaluation reports as undefined, and training treats
//! as a per-sample abort, rather than something to silently clamp.

use crate::diff::gradient;
use crate::exec::{compile, ExecError, Program};
use crate::expr::{ExprError, ExprGraph, NodeId};
use crate::sens::bundle;

use super::data::PIXELS;

/// Total number of trainable parameters.
pub const N_PARAMS: usize = PIXELS * 8 + 8 * 8 + 8 + 8;

/// Hidden width of both intermediate layers.
const HIDDEN: usize = 8;

/// Parameter variable names `w0..w279`, in layout order.
pub fn param_names() -> Vec<String> {
    (0..N_PARAMS).map(|i| format!("w{i}")).collect()
}

/// Pixel variable names `x0..x24`, row-major.
pub fn pixel_names() -> Vec<String> {
    (0..PIXELS).map(|i| format!("x{i}")).collect()
}

/// Label variable name.
pub const LABEL_VAR: &str = "y";

/// The symbolic model: loss and prediction roots in one graph.
#[derive(Clone, Debug)]
pub struct ModelGraph {
    pub graph: ExprGraph,
    pub loss_root: NodeId,
    pub logit_root: NodeId,
    pub param_vars: Vec<String>,
    pub input_vars: Vec<String>,
    pub label_var: String,
}

/// Builds the MLP loss into a fresh (or compatible) graph and returns
/// the graph together with its roots and variable groups.
pub fn build_mlp(mut g: ExprGraph) -> Result<ModelGraph, ExprError> {
    let param_vars = param_names();
    let input_vars = pixel_names();

    let params: Vec<NodeId> = param_vars
        .iter()
        .map(|n| g.variable(n))
        .collect::<Result<_, _>>()?;
    let pixels: Vec<NodeId> = input_vars
        .iter()
        .map(|n| g.variable(n))
        .collect::<Result<_, _>>()?;
    let y = g.variable(LABEL_VAR)?;

    // Ascending-index left fold: Σ terms in a fixed order.
    let dot = |g: &mut ExprGraph, terms: &[NodeId]| -> NodeId {
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = g.add(acc, t);
        }
        acc
    };

    // Layer 1: h1[j] = σ(Σ_i W1[i][j]·x_i), W1[i][j] = w(i·8+j).
    let mut h1 = Vec::with_capacity(HIDDEN);
    for j in 0..HIDDEN {
        let terms: Vec<NodeId> = (0..PIXELS)
            .map(|i| g.mul(params[i * HIDDEN + j], pixels[i]))
            .collect();
        let pre = dot(&mut g, &terms);
        h1.push(g.sigmoid(pre));
    }

    // Layer 2: h2[k] = σ(Σ_j W2[j][k]·h1_j + b2[k]),
    // W2[j][k] = w(200 + j·8 + k), b2[k] = w(264 + k).
    let w2_base = PIXELS * HIDDEN;
    let b2_base = w2_base + HIDDEN * HIDDEN;
    let mut h2 = Vec::with_capacity(HIDDEN);
    for k in 0..HIDDEN {
        let terms: Vec<NodeId> = (0..HIDDEN)
            .map(|j| g.mul(params[w2_base + j * HIDDEN + k], h1[j]))
            .collect();
        let pre = dot(&mut g, &terms);
        let pre = g.add(pre, params[b2_base + k]);
        h2.push(g.sigmoid(pre));
    }

    // Output: p = σ(Σ_k W3[k]·h2_k), W3[k] = w(272 + k).
    let w3_base = b2_base + HIDDEN;
    let terms: Vec<NodeId> = (0..HIDDEN)
        .map(|k| g.mul(params[w3_base + k], h2[k]))
        .collect();
    let pre = dot(&mut g, &terms);
    let p = g.sigmoid(pre);

    // Binary cross-entropy, ln unguarded (see module docs).
    let one = g.constant(1.0)?;
    let ln_p = g.ln(p);
    let pos = g.mul(y, ln_p);
    let one_m_y = g.sub(one, y);
    let one_m_p = g.sub(one, p);
    let ln_q = g.ln(one_m_p);
    let neg_part = g.mul(one_m_y, ln_q);
    let sum = g.add(pos, neg_part);
    let loss = g.neg(sum);

    Ok(ModelGraph {
        graph: g,
        loss_root: loss,
        logit_root: p,
        param_vars,
        input_vars,
        label_var: LABEL_VAR.to_string(),
    })
}

/// The model lowered to evaluation tapes over the shared input layout
/// `[w0..w279, x0..x24, y]`.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    /// Binding order for every program below.
    pub inputs: Vec<String>,
    /// Outputs `[loss, ∂loss/∂w0 .. ∂loss/∂w279]` (281 outputs).
    pub grad: Program,
    /// Outputs `[loss, p]`.
    pub metrics: Program,
    /// Outputs `[φ, ps_x0 .. ps_x24]` for the fractional variant, where
    /// φ is the norm of the pixel gradient of the loss.
    pub ps_fractional: Program,
    /// Same layout for the gradient (second-order) variant.
    pub ps_gradient: Program,
}

/// Errors from model compilation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl ModelGraph {
    /// Compiles the four programs. Construction order is fixed
    /// (parameter gradient, then the pixel-sensitivity bundle), so the
    /// emitted tapes are deterministic.
    pub fn compile(mut self) -> Result<CompiledModel, ModelError> {
        let mut inputs = self.param_vars.clone();
        inputs.extend(self.input_vars.iter().cloned());
        inputs.push(self.label_var.clone());

        let g = &mut self.graph;
        let param_grad = gradient(g, self.loss_root, &self.param_vars)?;
        let mut grad_roots = vec![self.loss_root];
        grad_roots.extend_from_slice(param_grad.partials());
        let grad = compile(g, &grad_roots, &inputs)?;

        let metrics = compile(g, &[self.loss_root, self.logit_root], &inputs)?;

        let pixel_bundle = bundle(g, self.loss_root, &self.input_vars)?;
        let mut frac_roots = vec![pixel_bundle.grad_norm];
        frac_roots.extend_from_slice(pixel_bundle.ps_fractional.partials());
        let ps_fractional = compile(g, &frac_roots, &inputs)?;
        let mut grad_var_roots = vec![pixel_bundle.grad_norm];
        grad_var_roots.extend_from_slice(pixel_bundle.ps_gradient.partials());
        let ps_gradient = compile(g, &grad_var_roots, &inputs)?;

        Ok(CompiledModel {
            inputs,
            grad,
            metrics,
            ps_fractional,
            ps_gradient,
        })
    }
}

impl CompiledModel {
    /// Total binding width: parameters, pixels, label.
    pub fn input_width(&self) -> usize {
        N_PARAMS + PIXELS + 1
    }

    /// Assembles one binding row `[weights..., pixels..., label]`.
    pub fn binding_row(&self, weights: &[f64], pixels: &[f64; PIXELS], label: u8) -> Vec<f64> {
        debug_assert_eq!(weights.len(), N_PARAMS);
        let mut row = Vec::with_capacity(self.input_width());
        row.extend_from_slice(weights);
        row.extend_from_slice(pixels);
        row.push(f64::from(label));
        row
    }

    /// Overwrites the weight prefix of an existing binding row.
    pub fn set_row_weights(&self, row: &mut [f64], weights: &[f64]) {
        row[..N_PARAMS].copy_from_slice(weights);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnlab::data::base_image;

    #[test]
    fn parameter_count_and_layout() {
        assert_eq!(N_PARAMS, 280);
        let names = param_names();
        assert_eq!(names.len(), 280);
        assert_eq!(names[0], "w0");
        assert_eq!(names[279], "w279");
        let model = build_mlp(ExprGraph::new()).unwrap();
        assert_eq!(model.param_vars.len(), 280);
        assert_eq!(model.input_vars.len(), 25);
    }

    #[test]
    fn zero_weights_give_ln2_loss_and_half_logit() {
        let model = build_mlp(ExprGraph::new()).unwrap();
        let compiled = model.compile().unwrap();
        let weights = vec![0.0; N_PARAMS];
        let img = base_image(1);
        let row = compiled.binding_row(&weights, &img, 1);
        let out = compiled.metrics.evaluate(&row).unwrap();
        assert!(out.defined.iter().all(|&d| d));
        assert_eq!(out.values[1], 0.5, "logit");
        assert!((out.values[0] - std::f64::consts::LN_2).abs() < 1e-15, "loss");

        // Same loss for the other label by symmetry at p = 0.5.
        let row = compiled.binding_row(&weights, &img, 0);
        let out = compiled.metrics.evaluate(&row).unwrap();
        assert!((out.values[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_program_has_full_output_arity() {
        let model = build_mlp(ExprGraph::new()).unwrap();
        let compiled = model.compile().unwrap();
        assert_eq!(compiled.grad.output_count(), 1 + N_PARAMS);
        assert_eq!(compiled.ps_fractional.output_count(), 1 + PIXELS);
        assert_eq!(compiled.ps_gradient.output_count(), 1 + PIXELS);
        assert_eq!(compiled.inputs.len(), compiled.input_width());
    }

    #[test]
    fn zero_weights_make_pixel_sensitivity_undefined() {
        // With all weights zero the input path is severed: every pixel
        // partial is 0, φ = 0, and both PS variants divide by φ.
        let model = build_mlp(ExprGraph::new()).unwrap();
        let compiled = model.compile().unwrap();
        let weights = vec![0.0; N_PARAMS];
        let row = compiled.binding_row(&weights, &base_image(0), 0);
        let out = compiled.ps_fractional.evaluate(&row).unwrap();
        assert_eq!(out.values[0], 0.0, "phi");
        assert!(out.defined[0]);
        assert!(out.defined[1..].iter().all(|&d| !d), "all PS undefined");
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        use crate::rng::CounterRng;
        use crate::testkit::close_rel;

        let model = build_mlp(ExprGraph::new()).unwrap();
        let compiled = model.compile().unwrap();
        let mut rng = CounterRng::new(4).substream("fd-weights");

        let loss_at = |row: &[f64]| {
            let o = compiled.metrics.evaluate(row).unwrap();
            assert!(o.defined[0]);
            o.values[0]
        };

        for pair in 0..20 {
            let weights: Vec<f64> = (0..N_PARAMS).map(|_| rng.next_range(-0.5, 0.5)).collect();
            let label = (pair % 2) as u8;
            let mut img = base_image(label);
            for px in img.iter_mut() {
                *px += 0.2 * rng.next_gaussian();
            }
            let row = compiled.binding_row(&weights, &img, label);
            let out = compiled.grad.evaluate(&row).unwrap();
            assert!(out.defined.iter().all(|&d| d));

            // Check a deterministic subset of coordinates per pair (all
            // 280 × 20 would be slow for no extra coverage).
            for k in 0..14 {
                let idx = (pair * 14 + k * 19) % N_PARAMS;
                let h = 1e-6;
                let mut rp = row.clone();
                rp[idx] += h;
                let mut rm = row.clone();
                rm[idx] -= h;
                let fd = (loss_at(&rp) - loss_at(&rm)) / (2.0 * h);
                let sym = out.values[1 + idx];
                assert!(
                    close_rel(sym, fd, 1e-5, 1e-9),
                    "pair {pair} w{idx}: symbolic {sym} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn saturated_output_is_reported_undefined() {
        // Huge output weights push p to exactly 1.0; ln(1-p) is then a
        // domain violation, so the loss must come back undefined.
        let model = build_mlp(ExprGraph::new()).unwrap();
        let compiled = model.compile().unwrap();
        let mut weights = vec![0.0; N_PARAMS];
        for w in weights[272..280].iter_mut() {
            *w = 1e5;
        }
        let row = compiled.binding_row(&weights, &base_image(0), 0);
        let out = compiled.metrics.evaluate(&row).unwrap();
        assert_eq!(out.values[1], 1.0, "saturated logit");
        assert!(!out.defined[0], "loss undefined at saturation");
    }

    #[test]
    fn compilation_is_deterministic() {
        let build = || {
            let model = build_mlp(ExprGraph::new()).unwrap();
            let c = model.compile().unwrap();
            (c.grad.dump(), c.ps_gradient.dump())
        };
        assert_eq!(build(), build());
    }
}
