//! Analytic curves for a uniform bit observed through a binary symmetric or
//! binary erasure channel, Hamming distortion, arbitrary f-transform.
//!
//! With `f₀ = f(0)` and `f₁ = f(1)`:
//!
//! - BSC(β): `R = [ln 2 − h_b((f(D) − (1−β)f₀ − βf₁) / ((1−β)f₁ + βf₀ − (1−β)f₀ − βf₁))]⁺`
//!   for `f(D) ∈ [(1−β)f₀ + βf₁, (f₀+f₁)/2]`.
//! - BEC(δ): `R = [(1−δ)(ln 2 − h_b((f(D) − (δ/2)f₁ − (1−δ/2)f₀) / ((1−δ)(f₁−f₀))))]⁺`
//!   for `f(D) ∈ [(1−δ/2)f₀ + (δ/2)f₁, (f₀+f₁)/2]`.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::distortion::{DistortionMatrix, FTransform};
use crate::error::{Error, Result};
use crate::source::JointSource;

/// Slack within which arguments of [`binary_entropy`] are clamped to `[0, 1]`.
pub const ENTROPY_SLACK: f64 = 1e-12;

/// `−p ln p − (1−p) ln(1−p)` in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(-ENTROPY_SLACK..=1.0 + ENTROPY_SLACK).contains(&p) {
        return Err(Error::Domain(format!(
            "binary entropy needs p in [0, 1], got {p}"
        )));
    }
    let p = p.clamp(0.0, 1.0);
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Rate returned by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormRate {
    pub rate: f64,
    /// `dR/d f(D)`, the Lagrange slope at this point.
    pub slope: f64,
    /// `f(D)` lay above the zero-rate endpoint.
    pub above_max: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BscModel {
    pub beta: f64,
    pub f: FTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BecModel {
    pub delta: f64,
    pub f: FTransform,
}

impl BscModel {
    pub fn new(beta: f64, f: FTransform) -> Result<Self> {
        if !(0.0..0.5).contains(&beta) {
            return Err(Error::Domain(format!(
                "beta must lie in [0, 1/2), got {beta}"
            )));
        }
        f.validate_on(1.0)?;
        Ok(Self { beta, f })
    }

    pub fn source(&self) -> JointSource {
        JointSource::binary_symmetric(self.beta).expect("valid crossover")
    }

    /// `[(1−β)f(0) + βf(1), (f(0)+f(1))/2]`.
    pub fn f_domain(&self) -> (f64, f64) {
        let (f0, f1) = (self.f.apply(0.0), self.f.apply(1.0));
        ((1.0 - self.beta) * f0 + self.beta * f1, 0.5 * (f0 + f1))
    }
}

impl BecModel {
    pub fn new(delta: f64, f: FTransform) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        f.validate_on(1.0)?;
        Ok(Self { delta, f })
    }

    pub fn source(&self) -> JointSource {
        JointSource::binary_erasure(self.delta).expect("valid erasure probability")
    }

    /// `[(1−δ/2)f(0) + (δ/2)f(1), (f(0)+f(1))/2]`.
    pub fn f_domain(&self) -> (f64, f64) {
        let (f0, f1) = (self.f.apply(0.0), self.f.apply(1.0));
        let h = 0.5 * self.delta;
        ((1.0 - h) * f0 + h * f1, 0.5 * (f0 + f1))
    }
}

fn check_lower(fd: f64, lo: f64, hi: f64) -> Result<()> {
    let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
    if fd < lo - slack {
        return Err(Error::Domain(format!(
            "f(D) = {fd} is below the minimum {lo}"
        )));
    }
    Ok(())
}

/// `-ln((1-u)/u)`, the derivative of `ln 2 − h_b(u)`.
fn entropy_slope(u: f64) -> f64 {
    if u <= 0.0 {
        f64::NEG_INFINITY
    } else {
        -((1.0 - u) / u).ln()
    }
}

pub fn bsc_irdf(m: &BscModel, d: f64) -> Result<ClosedFormRate> {
    let (lo, hi) = m.f_domain();
    let fd = m.f.apply(d);
    check_lower(fd, lo, hi)?;
    if fd >= hi {
        return Ok(ClosedFormRate {
            rate: 0.0,
            slope: 0.0,
            above_max: fd > hi,
        });
    }
    let (f0, f1, b) = (m.f.apply(0.0), m.f.apply(1.0), m.beta);
    let width = (1.0 - b) * f1 + b * f0 - (1.0 - b) * f0 - b * f1;
    let u = ((fd - lo) / width).max(0.0);
    let rate = (LN_2 - binary_entropy(u)?).max(0.0);
    Ok(ClosedFormRate {
        rate,
        slope: entropy_slope(u) / width,
        above_max: false,
    })
}

pub fn bec_irdf(m: &BecModel, d: f64) -> Result<ClosedFormRate> {
    let (lo, hi) = m.f_domain();
    let fd = m.f.apply(d);
    check_lower(fd, lo, hi)?;
    if fd >= hi || m.delta >= 1.0 {
        return Ok(ClosedFormRate {
            rate: 0.0,
            slope: 0.0,
            above_max: fd > hi,
        });
    }
    let (f0, f1, dl) = (m.f.apply(0.0), m.f.apply(1.0), m.delta);
    let width = (1.0 - dl) * (f1 - f0);
    let u = ((fd - 0.5 * dl * f1 - f0 * (1.0 - 0.5 * dl)) / width).max(0.0);
    let rate = ((1.0 - dl) * (LN_2 - binary_entropy(u)?)).max(0.0);
    Ok(ClosedFormRate {
        rate,
        slope: entropy_slope(u) / (f1 - f0),
        above_max: false,
    })
}

/// Optimal test channel for the erasure model: `q(x̂|z)` indexed `[z][x̂]`
/// over `z ∈ {0, e, 1}`, and the output marginal `(1/2, 1/2)`.
pub fn bec_optimal_conditional(m: &BecModel, d: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (lo, hi) = m.f_domain();
    let fd = m.f.apply(d);
    check_lower(fd, lo, hi)?;
    if fd > hi + 1e-12 * hi.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "f(D) = {fd} is above the maximum {hi}"
        )));
    }
    let (f0, f1, dl) = (m.f.apply(0.0), m.f.apply(1.0), m.delta);
    let corner = if dl >= 1.0 {
        0.5
    } else {
        let v = (f1 * (1.0 - 0.5 * dl) + 0.5 * dl * f0 - fd) / ((1.0 - dl) * (f1 - f0));
        v.clamp(0.5, 1.0)
    };
    let q_cond = vec![
        vec![corner, 1.0 - corner],
        vec![0.5, 0.5],
        vec![1.0 - corner, corner],
    ];
    Ok((q_cond, vec![0.5, 0.5]))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExampleModel {
    Bsc(BscModel),
    Bec(BecModel),
}

impl ExampleModel {
    pub fn f(&self) -> &FTransform {
        match self {
            ExampleModel::Bsc(m) => &m.f,
            ExampleModel::Bec(m) => &m.f,
        }
    }

    pub fn f_domain(&self) -> (f64, f64) {
        match self {
            ExampleModel::Bsc(m) => m.f_domain(),
            ExampleModel::Bec(m) => m.f_domain(),
        }
    }

    pub fn rate(&self, d: f64) -> Result<ClosedFormRate> {
        match self {
            ExampleModel::Bsc(m) => bsc_irdf(m, d),
            ExampleModel::Bec(m) => bec_irdf(m, d),
        }
    }

    pub fn source(&self) -> JointSource {
        match self {
            ExampleModel::Bsc(m) => m.source(),
            ExampleModel::Bec(m) => m.source(),
        }
    }

    pub fn distortion(&self) -> DistortionMatrix {
        DistortionMatrix::hamming(2, 2)
    }
}

/// `(D_min, D_max)` in raw units: the f-domain endpoints mapped through `f⁻¹`.
pub fn domain_bounds_examples(model: &ExampleModel) -> Result<(f64, f64)> {
    let (lo, hi) = model.f_domain();
    Ok((model.f().invert(lo)?, model.f().invert(hi)?))
}
