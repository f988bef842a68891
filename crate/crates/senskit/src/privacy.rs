//! Rényi differential-privacy accounting and DP-SGD primitives.
//!
//! The accounting here is deliberately small: the Gaussian mechanism at
//! noise standard deviation `σ`, applied to an aggregation with Lipschitz
//! constant `L`, gives an individual whose realized gradient norm is `g`
//! the Rényi-DP guarantee `(α, α·L²·g²/(2σ²))`. Guarantees at one common
//! order compose additively in sequence. Everything beyond that —
//! conversion to (ε, δ), subsampling amplification, odometers — is out of
//! scope.
//!
//! The DP-SGD side provides the two per-sample primitives: L2 clipping to
//! a bound `C` (vectors already inside the ball are returned bit-for-bit
//! unchanged) and mean-zero Gaussian noise drawn from the deterministic
//! counter PRNG, so a noise vector is a pure function of the consuming
//! stream's seed and position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::CounterRng;

/// Errors from privacy accounting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrivacyError {
    #[error("Renyi order must be > 1 and finite, got {0}")]
    AlphaOutOfRange(f64),
    #[error("noise standard deviation must be positive and finite, got {0}")]
    SigmaNotPositive(f64),
    #[error("aggregation Lipschitz constant must be >= 0 and finite, got {0}")]
    InvalidLipschitz(f64),
    #[error("gradient norm must be >= 0 and finite, got {0}")]
    InvalidGradNorm(f64),
    #[error("privacy loss overflowed to a non-finite value")]
    EpsilonOverflow,
    #[error("cannot compose an empty list of RDP points")]
    EmptyComposition,
    #[error("mixed Renyi orders in composition: {0} vs {1}")]
    MixedAlphas(f64, f64),
}

/// One Rényi-DP guarantee: the privacy loss `epsilon` at order `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdpPoint {
    pub alpha: f64,
    pub epsilon: f64,
}

/// Gaussian-mechanism parameters: absolute noise standard deviation, the
/// Lipschitz constant of the aggregation the mechanism protects, and the
/// seed of the noise stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    pub sigma: f64,
    pub lipschitz_agg: f64,
    pub seed: u64,
}

/// DP-SGD hyperparameters. The per-step noise standard deviation is
/// `noise_multiplier × clip_bound` (the conventional parameterization),
/// not an absolute σ.
///
/// `learning_rate` may be zero — a degenerate but well-defined setting
/// in which training leaves the weights at their initialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpSgdParams {
    pub clip_bound: f64,
    pub noise_multiplier: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl DpSgdParams {
    /// Validates the documented invariants.
    pub fn validate(&self) -> Result<(), PrivacyError> {
        if !(self.clip_bound > 0.0 && self.clip_bound.is_finite()) {
            return Err(PrivacyError::InvalidGradNorm(self.clip_bound));
        }
        if !(self.noise_multiplier >= 0.0 && self.noise_multiplier.is_finite()) {
            return Err(PrivacyError::SigmaNotPositive(self.noise_multiplier));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(PrivacyError::InvalidGradNorm(self.learning_rate));
        }
        if self.batch_size == 0 {
            return Err(PrivacyError::EmptyComposition);
        }
        Ok(())
    }
}

/// Individual RDP guarantee of the Gaussian mechanism:
/// `epsilon = alpha · L² · grad_norm² / (2 σ²)`.
///
/// Requires `alpha > 1` and `sigma > 0`; a zero σ would mean infinite
/// privacy loss and is rejected rather than returned as ∞.
pub fn individual_rdp(
    alpha: f64,
    params: &MechanismParams,
    grad_norm: f64,
) -> Result<RdpPoint, PrivacyError> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(PrivacyError::AlphaOutOfRange(alpha));
    }
    if !(params.sigma > 0.0 && params.sigma.is_finite()) {
        return Err(PrivacyError::SigmaNotPositive(params.sigma));
    }
    if !(params.lipschitz_agg >= 0.0 && params.lipschitz_agg.is_finite()) {
        return Err(PrivacyError::InvalidLipschitz(params.lipschitz_agg));
    }
    if !(grad_norm >= 0.0 && grad_norm.is_finite()) {
        return Err(PrivacyError::InvalidGradNorm(grad_norm));
    }
    let l = params.lipschitz_agg;
    let epsilon = alpha * l * l * grad_norm * grad_norm / (2.0 * params.sigma * params.sigma);
    if !epsilon.is_finite() {
        return Err(PrivacyError::EpsilonOverflow);
    }
    Ok(RdpPoint { alpha, epsilon })
}

/// Sequential composition at a single order: `(alpha, Σ epsilon_i)`,
/// summed in list order. All points must share the same `alpha`.
pub fn rdp_compose(points: &[RdpPoint]) -> Result<RdpPoint, PrivacyError> {
    let first = points.first().ok_or(PrivacyError::EmptyComposition)?;
    let mut epsilon = 0.0;
    for p in points {
        if p.alpha != first.alpha {
            return Err(PrivacyError::MixedAlphas(first.alpha, p.alpha));
        }
        epsilon += p.epsilon;
    }
    Ok(RdpPoint { alpha: first.alpha, epsilon })
}

/// `n` i.i.d. `N(0, sigma²)` samples from `rng` (Box–Muller under the
/// hood). `sigma = 0` returns zeros without consuming the stream, so a
/// noiseless run leaves the generator untouched.
///
/// Panics if `sigma` is negative or non-finite (programmer error; user
/// inputs are validated at the boundary).
pub fn gaussian_noise(n: usize, sigma: f64, rng: &mut CounterRng) -> Vec<f64> {
    assert!(
        sigma >= 0.0 && sigma.is_finite(),
        "noise standard deviation must be finite and >= 0, got {sigma}"
    );
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    (0..n).map(|_| sigma * rng.next_gaussian()).collect()
}

/// L2 clipping: `v · min(1, C/‖v‖₂)`. Vectors with `‖v‖₂ ≤ C` (and the
/// zero vector) are returned unchanged, bit for bit.
///
/// The norm is computed with the largest component factored out, so the
/// bound holds even for vectors whose naive sum of squares would
/// overflow. Panics if `C` is not positive and finite.
pub fn clip_l2(v: &[f64], c: f64) -> Vec<f64> {
    assert!(c > 0.0 && c.is_finite(), "clip bound must be finite and > 0, got {c}");
    let m = v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if m == 0.0 {
        return v.to_vec();
    }
    // norm = m · sqrt(Σ (x/m)²); scaling by the max component keeps the
    // intermediate sum in [1, n].
    let sum: f64 = v.iter().map(|&x| (x / m) * (x / m)).sum();
    let norm = m * sum.sqrt();
    if norm <= c {
        return v.to_vec();
    }
    let scale = c / norm;
    v.iter().map(|&x| x * scale).collect()
}
