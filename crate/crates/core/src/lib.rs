//! Indirect (remote) rate-distortion functions under f-separable distortion.
//!
//! The encoder observes `z`, a noisy version of a finite-alphabet memoryless
//! source `x`, and the decoder reconstructs `x̂` under the n-letter distortion
//! `f⁻¹((1/n) Σ f(d(xᵢ, x̂ᵢ)))`. The single-letter limit is the direct rate
//! distortion function of the amended distortion
//! `d̃(z, x̂) = Σₓ p(x|z) f(d(x, x̂))`, evaluated at `f(D)`.
//!
//! Modules:
//!
//! - [`source`]: joint source `p(x, z)`, marginals and posteriors.
//! - [`distortion`]: per-letter distortions, f-transforms, quasi-arithmetic
//!   means and the amended distortions `d̄`, `d̂`, `d̃`.
//! - [`solver`]: Blahut-Arimoto style alternating minimization at a fixed
//!   slope, slope bisection to hit a target distortion, curve sweeps.
//! - [`closed_form`]: analytic curves for the binary symmetric and binary
//!   erasure observation models.
//! - [`operational`]: exhaustive search over short block codes.
//!
//! All rates are in nats unless stated otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod distortion;
pub mod error;
pub mod operational;
pub mod solver;
pub mod source;

pub use error::{Error, Result};

/// Unit used when reporting rates. Internal computation is always in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    /// Converts a rate expressed in nats into this unit.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / std::f64::consts::LN_2,
        }
    }
}
