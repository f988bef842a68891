//! Order-preserving data-parallel helpers.
//!
//! All batch work in the crate funnels through this module so the
//! determinism story stays in one place: the map is applied element-wise
//! and results are collected in input order, which makes the parallel and
//! sequential paths bit-identical. Reductions over the mapped results are
//! always performed by the caller in fixed input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over indices `0..n` with a per-worker scratch value created by
/// `init`, preserving index order. The scratch is reused across items on
/// the same worker, which keeps hot loops allocation-free.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed_init<S, U, I, F>(n: usize, init: I, f: F) -> Vec<U>
where
    S: Send,
    U: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map_init(&init, |scratch, i| f(scratch, i)).collect()
}

/// Maps `f` over indices `0..n` with a reusable scratch value.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed_init<S, U, I, F>(n: usize, init: I, f: F) -> Vec<U>
where
    I: Fn() -> S,
    F: Fn(&mut S, usize) -> U,
{
    let mut scratch = init();
    (0..n).map(|i| f(&mut scratch, i)).collect()
}
