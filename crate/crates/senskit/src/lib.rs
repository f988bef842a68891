//! Symbolic sensitivity analysis toolkit.
//!
//! The crate is organized around a hash-consed expression graph
//! ([`expr::ExprGraph`]) that every other layer builds on:
//!
//! * [`parse`] — a small expression language for building graphs from text.
//! * [`diff`] — reverse-mode symbolic differentiation at the graph level.
//! * [`sens`] — gradient norms and the two partial-sensitivity variants.
//! * [`exec`] — compilation of graph roots into a flat single-assignment
//!   evaluation tape, with deterministic batch evaluation.
//! * [`optim`] — multistart projected gradient ascent over box domains,
//!   used to bound the gradient norm (global L2 sensitivity).
//! * [`privacy`] — Rényi differential-privacy accounting for the Gaussian
//!   mechanism, gradient clipping and deterministic noise.
//! * [`nnlab`] — a small, fully deterministic neural-network lab: synthetic
//!   bar images, a sigmoid MLP expressed as a graph, (DP-)SGD training and
//!   per-pixel sensitivity reports.
//! * [`rng`] — the counter-based pseudo-random generator that makes every
//!   randomized component reproducible bit for bit.
//!
//! Determinism is a design requirement throughout: identical inputs and
//! seeds produce identical bytes in every output, independent of thread
//! count. Batch work is data-parallel (rayon, behind the default `parallel`
//! feature) with order-preserving maps and fixed-order reductions; the
//! sequential fallback produces the same bits.

pub mod diff;
pub mod exec;
pub mod expr;
pub mod nnlab;
pub mod optim;
pub mod parse;
pub mod privacy;
pub mod rng;
pub mod sens;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub(crate) mod par;

pub use diff::{gradient, GradientMap};
pub use exec::{compile, EvalOutcome, ExecError, Program};
pub use expr::{ExprError, ExprGraph, NodeId, NodeKind};
pub use optim::{global_sensitivity, maximize, BoxDomain, MaxResult, MaximizeConfig, OptimError};
pub use parse::{parse_expression, to_text, ParseError, ParseResult};
pub use privacy::{
    clip_l2, gaussian_noise, individual_rdp, rdp_compose, DpSgdParams, MechanismParams,
    PrivacyError, RdpPoint,
};
pub use rng::CounterRng;
pub use sens::{
    bundle, gradient_norm, partial_sensitivity_fractional, partial_sensitivity_gradient,
    SensitivityBundle,
};
