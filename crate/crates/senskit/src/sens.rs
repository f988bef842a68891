//! Gradient norms and the two partial-sensitivity variants.
//!
//! For a scalar function `f` over variables `x_1..x_d`, this module builds
//! three symbolic objects on top of [`crate::diff::gradient`]:
//!
//! * the gradient norm `φ = sqrt(Σ_j (∂f/∂x_j)²)`, summed in the listed
//!   variable order;
//! * the **fractional** partial sensitivity, component `j` being
//!   `(∂f/∂x_j)/φ` — the normalized gradient, whose vector always has unit
//!   L2 norm wherever `φ > 0`;
//! * the **gradient** partial sensitivity, component `j` being `∂φ/∂x_j` —
//!   a genuine second-order construction obtained by differentiating the
//!   `φ` node itself.
//!
//! The two variants coincide only in special cases (for instance when the
//! Hessian at a point is proportional to the identity), so both are
//! first-class and named explicitly; nothing in the API is called plain
//! "partial sensitivity". Where `φ = 0` the fractional components divide
//! by zero and the gradient components divide by zero inside the sqrt
//! derivative; evaluation reports those points as undefined rather than
//! failing, so batch reports can count them.

use crate::diff::{gradient, GradientMap};
use crate::expr::{ExprError, ExprGraph, NodeId};

/// The full set of sensitivity objects for one function, sharing one
/// graph and one variable ordering.
#[derive(Clone, Debug)]
pub struct SensitivityBundle {
    /// The analyzed function.
    pub function: NodeId,
    /// First-order gradient, in variable order.
    pub grad: GradientMap,
    /// The gradient-norm node `φ`.
    pub grad_norm: NodeId,
    /// Fractional partial sensitivity `(∂f/∂x_j)/φ` per variable.
    pub ps_fractional: GradientMap,
    /// Gradient partial sensitivity `∂φ/∂x_j` per variable.
    pub ps_gradient: GradientMap,
}

fn grad_norm_of(g: &mut ExprGraph, grad: &GradientMap) -> Result<NodeId, ExprError> {
    let mut sum: Option<NodeId> = None;
    for &p in grad.partials() {
        let sq = g.pow(p, 2.0);
        sum = Some(match sum {
            None => sq,
            Some(acc) => g.add(acc, sq),
        });
    }
    let sum = match sum {
        Some(s) => s,
        None => g.constant(0.0)?,
    };
    Ok(g.sqrt(sum))
}

/// Builds `φ = sqrt(Σ_j (∂f/∂x_j)²)`, summing in the order of `vars`.
pub fn gradient_norm(
    g: &mut ExprGraph,
    f: NodeId,
    vars: &[String],
) -> Result<NodeId, ExprError> {
    let grad = gradient(g, f, vars)?;
    grad_norm_of(g, &grad)
}

/// Fractional variant: component `j` is `(∂f/∂x_j)/φ`.
pub fn partial_sensitivity_fractional(
    g: &mut ExprGraph,
    f: NodeId,
    vars: &[String],
) -> Result<GradientMap, ExprError> {
    Ok(bundle(g, f, vars)?.ps_fractional)
}

/// Gradient variant: component `j` is `∂φ/∂x_j` (second-order reverse
/// mode applied to the `φ` node — no explicit Hessian is ever formed).
pub fn partial_sensitivity_gradient(
    g: &mut ExprGraph,
    f: NodeId,
    vars: &[String],
) -> Result<GradientMap, ExprError> {
    Ok(bundle(g, f, vars)?.ps_gradient)
}

/// Builds the gradient, `φ`, and both partial-sensitivity variants in one
/// pass, sharing every intermediate node.
pub fn bundle(
    g: &mut ExprGraph,
    f: NodeId,
    vars: &[String],
) -> Result<SensitivityBundle, ExprError> {
    let grad = gradient(g, f, vars)?;
    let grad_norm = grad_norm_of(g, &grad)?;

    let fractional: Vec<NodeId> = grad
        .partials()
        .iter()
        .map(|&p| g.div(p, grad_norm))
        .collect();
    let ps_fractional = GradientMap::from_pairs(vars.to_vec(), fractional);

    let ps_gradient = gradient(g, grad_norm, vars)?;

    Ok(SensitivityBundle {
        function: f,
        grad,
        grad_norm,
        ps_fractional,
        ps_gradient,
    })
}
