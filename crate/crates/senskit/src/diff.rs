//! Reverse-mode symbolic differentiation on the expression graph.
//!
//! [`gradient`] walks the sub-DAG below a root once in reverse topological
//! order (descending node id — children always have smaller ids than their
//! parents) and accumulates adjoint *expressions* instead of numbers. The
//! result is a set of new graph nodes, one per requested variable, that
//! share structure with the original expression wherever the chain rule
//! allows: `d/dx exp(u)` reuses the forward `exp` node, `d/dx sqrt(u)`
//! divides by the forward `sqrt` node, and so on. Because derivative
//! construction goes through the ordinary builders it benefits from the
//! same hash-consing and local simplification as hand-built expressions.
//!
//! Only the *active* part of the graph is differentiated: a node is active
//! when at least one requested variable is reachable from it. Adjoints are
//! never propagated into inactive children, so constants and subtrees over
//! non-requested variables cost nothing. Accumulation order is fixed
//! (descending parent id, left child before right), making the produced
//! node ids — and therefore everything downstream, including compiled
//! tapes — deterministic.
//!
//! Derivatives are formal: the partial of `ln(x)` is `1/x` regardless of
//! the sign of `x`. Whether a derivative is *defined* at a point is
//! decided at evaluation time by the tape's poison rules, which is exactly
//! the same discipline as for the function itself.

use crate::expr::{ExprError, ExprGraph, NodeId, NodeKind};

/// Gradient of one root with respect to an ordered list of variables.
///
/// Produced by [`gradient`]; `vars()[k]` names the variable whose partial
/// derivative is the graph node `partials()[k]`.
#[derive(Clone, Debug)]
pub struct GradientMap {
    vars: Vec<String>,
    partials: Vec<NodeId>,
}

impl GradientMap {
    /// Assembles a map from pre-built nodes (used by the sensitivity
    /// layer, which derives per-variable nodes itself).
    pub(crate) fn from_pairs(vars: Vec<String>, partials: Vec<NodeId>) -> Self {
        debug_assert_eq!(vars.len(), partials.len());
        GradientMap { vars, partials }
    }

    /// Variable names, in the order they were requested.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Partial-derivative nodes, aligned with [`GradientMap::vars`].
    pub fn partials(&self) -> &[NodeId] {
        &self.partials
    }

    /// Partial derivative for a variable by name.
    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.vars
            .iter()
            .position(|v| v == name)
            .map(|i| self.partials[i])
    }

    /// Number of requested variables.
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    /// True when no variables were requested.
    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// `(name, partial)` pairs in request order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.vars.iter().map(String::as_str).zip(self.partials.iter().copied())
    }
}

/// Differentiates `root` with respect to each variable in `vars`.
///
/// All partials are computed in a single reverse sweep. Variables must be
/// registered in the graph (parse or [`ExprGraph::variable`] does that);
/// a registered variable that does not occur under `root` gets the
/// constant-zero partial. Errors: [`ExprError::ForeignNode`] if `root` is
/// not from this graph, [`ExprError::UnknownVariable`] for unregistered
/// names.
pub fn gradient(
    g: &mut ExprGraph,
    root: NodeId,
    vars: &[String],
) -> Result<GradientMap, ExprError> {
    if !g.contains(root) {
        return Err(ExprError::ForeignNode(root));
    }
    let n = root.index() + 1;
    let mut var_slots: Vec<Option<usize>> = vec![None; n];
    for (k, name) in vars.iter().enumerate() {
        let vid = g
            .var(name)
            .ok_or_else(|| ExprError::UnknownVariable(name.clone()))?;
        if vid.index() < n {
            var_slots[vid.index()] = Some(k);
        }
    }

    // Live: reachable from the root. Children precede parents, so one
    // descending sweep marks everything.
    let mut live = vec![false; n];
    live[root.index()] = true;
    for i in (0..n).rev() {
        if live[i] {
            for &c in g.children(NodeId::from_index(i)) {
                live[c.index()] = true;
            }
        }
    }

    // Active: some requested variable is reachable. Ascending sweep: a
    // node is active when it is a requested variable or any child is.
    let mut active = vec![false; n];
    for i in 0..n {
        active[i] = var_slots[i].is_some()
            || g.children(NodeId::from_index(i))
                .iter()
                .any(|c| active[c.index()]);
    }

    // Reverse sweep. adj[i] is final once every parent (all ids > i) has
    // been processed, which descending order guarantees.
    let mut adj: Vec<Option<NodeId>> = vec![None; n];
    if active[root.index()] {
        adj[root.index()] = Some(g.constant(1.0)?);
    }
    for i in (0..n).rev() {
        if !live[i] || !active[i] {
            continue;
        }
        let Some(a) = adj[i] else { continue };
        let id = NodeId::from_index(i);
        let ch: Vec<NodeId> = g.children(id).to_vec();
        match g.kind(id).clone() {
            NodeKind::Var(_) | NodeKind::Const(_) => {}
            NodeKind::Add => {
                accumulate(g, &mut adj, &active, ch[0], a);
                accumulate(g, &mut adj, &active, ch[1], a);
            }
            NodeKind::Sub => {
                accumulate(g, &mut adj, &active, ch[0], a);
                if active[ch[1].index()] {
                    let na = g.neg(a);
                    accumulate(g, &mut adj, &active, ch[1], na);
                }
            }
            NodeKind::Mul => {
                if active[ch[0].index()] {
                    let c = g.mul(a, ch[1]);
                    accumulate(g, &mut adj, &active, ch[0], c);
                }
                if active[ch[1].index()] {
                    let c = g.mul(a, ch[0]);
                    accumulate(g, &mut adj, &active, ch[1], c);
                }
            }
            NodeKind::Div => {
                // n = u/v: dn/du = 1/v, dn/dv = -n/v (reuses this node).
                if active[ch[0].index()] {
                    let c = g.div(a, ch[1]);
                    accumulate(g, &mut adj, &active, ch[0], c);
                }
                if active[ch[1].index()] {
                    let an = g.mul(a, id);
                    let q = g.div(an, ch[1]);
                    let c = g.neg(q);
                    accumulate(g, &mut adj, &active, ch[1], c);
                }
            }
            NodeKind::Neg => {
                let c = g.neg(a);
                accumulate(g, &mut adj, &active, ch[0], c);
            }
            NodeKind::Exp => {
                // d exp(u) = exp(u): reuse the forward node.
                let c = g.mul(a, id);
                accumulate(g, &mut adj, &active, ch[0], c);
            }
            NodeKind::Ln => {
                let c = g.div(a, ch[0]);
                accumulate(g, &mut adj, &active, ch[0], c);
            }
            NodeKind::Sqrt => {
                // d sqrt(u) = 1/(2 sqrt(u)): reuse the forward node.
                let two = g.constant(2.0)?;
                let d = g.mul(two, id);
                let c = g.div(a, d);
                accumulate(g, &mut adj, &active, ch[0], c);
            }
            NodeKind::Sigmoid => {
                // d s(u) = s(u)(1 - s(u)): reuses the forward node twice.
                let one = g.constant(1.0)?;
                let om = g.sub(one, id);
                let ds = g.mul(id, om);
                let c = g.mul(a, ds);
                accumulate(g, &mut adj, &active, ch[0], c);
            }
            NodeKind::Pow(k) => {
                // d u^k = k u^(k-1). k is a literal, so k-1 folds into
                // the new exponent; x^1 simplifies back to x.
                let kc = g.constant(k)?;
                let pm = g.pow(ch[0], k - 1.0);
                let kp = g.mul(kc, pm);
                let c = g.mul(a, kp);
                accumulate(g, &mut adj, &active, ch[0], c);
            }
        }
    }

    let zero = g.constant(0.0)?;
    let partials = vars
        .iter()
        .map(|name| {
            let vid = g.var(name).expect("checked above");
            if vid.index() < n {
                adj[vid.index()].unwrap_or(zero)
            } else {
                zero
            }
        })
        .collect();
    Ok(GradientMap { vars: vars.to_vec(), partials })
}

/// Adds `contrib` into the adjoint of `child` (left-to-right, descending
/// parent order — the accumulation order is part of the determinism
/// contract).
fn accumulate(
    g: &mut ExprGraph,
    adj: &mut [Option<NodeId>],
    active: &[bool],
    child: NodeId,
    contrib: NodeId,
) {
    if !active[child.index()] {
        return;
    }
    adj[child.index()] = Some(match adj[child.index()] {
        None => contrib,
        Some(prev) => g.add(prev, contrib),
    });
}
