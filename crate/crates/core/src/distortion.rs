//! Per-letter distortions, f-transforms and the distortions derived from them.
//!
//! The n-letter f-separable distortion of a sequence pair is the
//! quasi-arithmetic mean `f⁻¹((1/n) Σ f(d(xᵢ, x̂ᵢ)))` of its per-letter
//! distortions. For a remote source three single-letter matrices matter:
//!
//! - `d̄(x, x̂) = f(d(x, x̂))`
//! - `d̃(z, x̂) = Σₓ p(x|z) f(d(x, x̂))`
//! - `d̂(z, x̂) = f⁻¹(d̃(z, x̂))`

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::JointSource;

/// Points sampled when checking that an f-transform is strictly increasing.
pub const MONOTONE_SAMPLES: usize = 1024;

/// Width at which the tabulated inverse stops bisecting.
pub const TABLE_INVERSE_TOL: f64 = 1e-12;

/// Per-letter distortion `d(a, b) ≥ 0`, indexed `[a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMatrix {
    values: Vec<Vec<f64>>,
    max: f64,
}

impl DistortionMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let cols = values.first().map_or(0, Vec::len);
        if values.is_empty() || cols == 0 {
            return Err(Error::InvalidDistortion("matrix must be non-empty".into()));
        }
        if values.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistortion(
                "rows have different lengths".into(),
            ));
        }
        let mut max = 0.0f64;
        for &v in values.iter().flatten() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistortion(format!(
                    "entries must be finite and nonnegative, got {v}"
                )));
            }
            max = max.max(v);
        }
        Ok(Self { values, max })
    }

    /// `d(a, b) = 1` if `a != b`, else 0.
    pub fn hamming(rows: usize, cols: usize) -> Self {
        let values = (0..rows)
            .map(|a| (0..cols).map(|b| if a == b { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(values).expect("hamming matrix is valid")
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.values
                .iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a][b]
    }

    /// Largest entry; the working domain of `f` is `[0, max]`.
    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Distortion as written in problem files: `{"kind":"hamming"}` or
/// `{"kind":"matrix","values":[[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    Hamming,
    Matrix { values: Vec<Vec<f64>> },
}

impl DistortionSpec {
    pub fn build(&self, rows: usize, cols: usize) -> Result<DistortionMatrix> {
        let d = match self {
            DistortionSpec::Hamming => DistortionMatrix::hamming(rows, cols),
            DistortionSpec::Matrix { values } => DistortionMatrix::new(values.clone())?,
        };
        if d.rows() != rows || d.cols() != cols {
            return Err(Error::Dimension(format!(
                "distortion is {}x{}, expected {rows}x{cols}",
                d.rows(),
                d.cols()
            )));
        }
        Ok(d)
    }
}

impl std::str::FromStr for DistortionSpec {
    type Err = Error;

    /// `hamming`, or a JSON object such as `{"kind":"matrix","values":[[0,1],[1,0]]}`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("hamming") {
            return Ok(DistortionSpec::Hamming);
        }
        if t.starts_with('{') {
            return Ok(serde_json::from_str(t)?);
        }
        Err(Error::InvalidDistortion(format!(
            "unrecognized distortion descriptor {t:?}"
        )))
    }
}

/// Serialized form of an f-transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FSpec {
    Identity,
    Power { p: f64 },
    Sqrt,
    ShiftedCubic { a: f64 },
    Exponential { rho: f64 },
    Tabulated { points: Vec<[f64; 2]> },
}

/// A continuous, strictly increasing function on `[0, ∞)`.
///
/// Tabulated transforms interpolate linearly between their points, start at
/// `ξ = 0` and extrapolate the last segment past the final point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FSpec", into = "FSpec")]
pub struct FTransform {
    spec: FSpec,
}

impl FTransform {
    pub fn identity() -> Self {
        Self {
            spec: FSpec::Identity,
        }
    }

    pub fn sqrt() -> Self {
        Self { spec: FSpec::Sqrt }
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::from_spec(FSpec::Power { p })
    }

    pub fn shifted_cubic(a: f64) -> Result<Self> {
        Self::from_spec(FSpec::ShiftedCubic { a })
    }

    pub fn exponential(rho: f64) -> Result<Self> {
        Self::from_spec(FSpec::Exponential { rho })
    }

    pub fn tabulated(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_spec(FSpec::Tabulated { points })
    }

    pub fn from_spec(spec: FSpec) -> Result<Self> {
        match &spec {
            FSpec::Power { p } if !(p.is_finite() && *p > 0.0) => {
                return Err(Error::InvalidTransform(format!(
                    "power needs p > 0, got {p}"
                )))
            }
            FSpec::ShiftedCubic { a } if !a.is_finite() => {
                return Err(Error::InvalidTransform(format!(
                    "shift must be finite, got {a}"
                )))
            }
            FSpec::Exponential { rho } if !(rho.is_finite() && *rho > 0.0) => {
                return Err(Error::InvalidTransform(format!(
                    "exponential needs rho > 0, got {rho}"
                )))
            }
            FSpec::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidTransform(
                        "table needs at least two points".into(),
                    ));
                }
                if points[0][0] != 0.0 {
                    return Err(Error::InvalidTransform("table must start at xi = 0".into()));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidTransform(
                        "table entries must be finite".into(),
                    ));
                }
                if points
                    .windows(2)
                    .any(|w| !(w[1][0] > w[0][0] && w[1][1] > w[0][1]))
                {
                    return Err(Error::InvalidTransform(
                        "table must be strictly increasing in both columns".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &FSpec {
        &self.spec
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.spec, FSpec::Identity)
    }

    pub fn apply(&self, xi: f64) -> f64 {
        match &self.spec {
            FSpec::Identity => xi,
            FSpec::Power { p } => xi.powf(*p),
            FSpec::Sqrt => xi.sqrt(),
            FSpec::ShiftedCubic { a } => (xi - a).powi(3),
            FSpec::Exponential { rho } => (rho * xi).exp(),
            FSpec::Tabulated { points } => {
                let i = match points.iter().position(|p| p[0] >= xi) {
                    Some(0) => 1,
                    Some(i) => i,
                    None => points.len() - 1,
                };
                let ([x0, y0], [x1, y1]) = (points[i - 1], points[i]);
                y0 + (y1 - y0) * (xi - x0) / (x1 - x0)
            }
        }
    }

    /// Range of `f⁻¹`: `[f(0), hi]`, where `hi` is infinite except for tables.
    pub fn inverse_domain(&self) -> (f64, f64) {
        let hi = match &self.spec {
            FSpec::Tabulated { points } => points[points.len() - 1][1],
            _ => f64::INFINITY,
        };
        (self.apply(0.0), hi)
    }

    pub fn invert(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.inverse_domain();
        let slack = 1e-12 * lo.abs().max(1.0);
        if y.is_nan() || y < lo - slack || y > hi + 1e-12 * hi.abs().max(1.0) {
            return Err(Error::OutOfRange { value: y, lo, hi });
        }
        let y = y.clamp(lo, hi);
        let xi = match &self.spec {
            FSpec::Identity => y,
            FSpec::Power { p } => y.powf(1.0 / p),
            FSpec::Sqrt => y * y,
            FSpec::ShiftedCubic { a } => y.cbrt() + a,
            FSpec::Exponential { rho } => y.ln() / rho,
            FSpec::Tabulated { points } => {
                let (mut a, mut b) = (0.0, points[points.len() - 1][0]);
                while b - a > TABLE_INVERSE_TOL {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if self.apply(mid) < y {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            }
        };
        Ok(xi.max(0.0))
    }

    /// Checks strict monotonicity on `[0, d_max]` by sampling, and that a
    /// table covers the whole interval.
    pub fn validate_on(&self, d_max: f64) -> Result<()> {
        if let FSpec::Tabulated { points } = &self.spec {
            let last = points[points.len() - 1][0];
            if last < d_max {
                return Err(Error::InvalidTransform(format!(
                    "table ends at {last}, distortion reaches {d_max}"
                )));
            }
        }
        if d_max <= 0.0 {
            return Ok(());
        }
        let mut prev = self.apply(0.0);
        for i in 1..MONOTONE_SAMPLES {
            let xi = d_max * i as f64 / (MONOTONE_SAMPLES - 1) as f64;
            let v = self.apply(xi);
            if !(v > prev) || !v.is_finite() {
                return Err(Error::InvalidTransform(format!(
                    "{self} is not strictly increasing near xi = {xi}"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

impl Default for FTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<FSpec> for FTransform {
    type Error = Error;

    fn try_from(spec: FSpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl From<FTransform> for FSpec {
    fn from(f: FTransform) -> Self {
        f.spec
    }
}

impl fmt::Display for FTransform {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.spec {
            FSpec::Identity => write!(out, "identity"),
            FSpec::Power { p } => write!(out, "power:{p}"),
            FSpec::Sqrt => write!(out, "sqrt"),
            FSpec::ShiftedCubic { a } => write!(out, "shifted_cubic:{a}"),
            FSpec::Exponential { rho } => write!(out, "exponential:{rho}"),
            FSpec::Tabulated { points } => write!(out, "tabulated({} points)", points.len()),
        }
    }
}

/// Parses either a JSON fragment (`{"kind":"power","p":2}`) or a shorthand
/// such as `identity`, `sqrt`, `power:2`, `cubic:0.4`, `exp:9.2`.
impl FromStr for FTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::InvalidTransform(format!("{what} needs a parameter")))?
                .parse()
                .map_err(|_| Error::InvalidTransform(format!("bad parameter in {s:?}")))
        };
        match name {
            "identity" | "id" => Ok(Self::identity()),
            "sqrt" => Ok(Self::sqrt()),
            "quadratic" => Self::power(2.0),
            "power" | "pow" => Self::power(num("power")?),
            "shifted_cubic" | "cubic" => Self::shifted_cubic(num("shifted_cubic")?),
            "exponential" | "exp" => Self::exponential(num("exponential")?),
            _ => Err(Error::InvalidTransform(format!(
                "unknown f-transform {s:?}"
            ))),
        }
    }
}

/// Quasi-arithmetic mean `f⁻¹((1/n) Σ f(ξᵢ))`.
pub fn quasi_arithmetic_mean(f: &FTransform, xis: &[f64]) -> Result<f64> {
    if xis.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = xis.iter().map(|&x| f.apply(x)).sum::<f64>() / xis.len() as f64;
    f.invert(mean)
}

/// `(1/n) Σ f(d(xᵢ, x̂ᵢ))`, the separable distortion of the transformed letters.
pub fn f_domain_mean(
    f: &FTransform,
    d: &DistortionMatrix,
    xs: &[usize],
    xhats: &[usize],
) -> Result<f64> {
    if xs.len() != xhats.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: xhats.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = xs
        .iter()
        .zip(xhats)
        .map(|(&a, &b)| f.apply(d.get(a, b)))
        .sum();
    Ok(sum / xs.len() as f64)
}

/// n-letter f-separable distortion `f⁻¹((1/n) Σ f(d(xᵢ, x̂ᵢ)))`.
pub fn f_separable_n(
    f: &FTransform,
    d: &DistortionMatrix,
    xs: &[usize],
    xhats: &[usize],
) -> Result<f64> {
    f.invert(f_domain_mean(f, d, xs, xhats)?)
}

/// Outcome of random sub-additivity sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityReport {
    pub trials: usize,
    pub n: usize,
    pub all_passed: bool,
    /// Smallest observed `(1/n) Σ d − d_fⁿ`; negative means a violation.
    pub worst_margin: f64,
    pub worst_xs: Vec<usize>,
    pub worst_xhats: Vec<usize>,
}

/// Slack allowed before a negative sub-additivity margin counts as a violation.
pub const SUBADDITIVITY_SLACK: f64 = 1e-12;

/// `(1/n) Σ d(xᵢ, x̂ᵢ) − d_fⁿ(xⁿ, x̂ⁿ)`.
pub fn subadditivity_margin(
    f: &FTransform,
    d: &DistortionMatrix,
    xs: &[usize],
    xhats: &[usize],
) -> Result<f64> {
    let arithmetic = f_domain_mean(&FTransform::identity(), d, xs, xhats)?;
    Ok(arithmetic - f_separable_n(f, d, xs, xhats)?)
}

/// Draws `trials` uniform sequence pairs of length `n` and checks
/// `d_fⁿ ≤ (1/n) Σ d`.
pub fn is_subadditive_sample(
    f: &FTransform,
    d: &DistortionMatrix,
    trials: usize,
    n: usize,
    seed: u64,
) -> Result<SubadditivityReport> {
    if trials == 0 || n == 0 {
        return Err(Error::EmptyInput);
    }
    f.validate_on(d.max())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SubadditivityReport {
        trials,
        n,
        all_passed: true,
        worst_margin: f64::INFINITY,
        worst_xs: Vec::new(),
        worst_xhats: Vec::new(),
    };
    let mut xs = vec![0; n];
    let mut xhats = vec![0; n];
    for _ in 0..trials {
        xs.iter_mut().for_each(|x| *x = rng.gen_range(0..d.rows()));
        xhats
            .iter_mut()
            .for_each(|x| *x = rng.gen_range(0..d.cols()));
        let margin = subadditivity_margin(f, d, &xs, &xhats)?;
        if margin < -SUBADDITIVITY_SLACK {
            report.all_passed = false;
        }
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_xs.clone_from(&xs);
            report.worst_xhats.clone_from(&xhats);
        }
    }
    Ok(report)
}

/// The single-letter distortions that turn the remote problem into a direct one.
///
/// Rows of `d_tilde` and `d_hat` belonging to observation symbols with
/// `p(z) = 0` are filled with `f(0)` and `0` and marked unused.
#[derive(Debug, Clone, PartialEq)]
pub struct AmendedDistortions {
    pub f: FTransform,
    /// `f(d(x, x̂))`, indexed `[x][x̂]`.
    pub d_bar: Vec<Vec<f64>>,
    /// `f⁻¹(d̃(z, x̂))`, indexed `[z][x̂]`.
    pub d_hat: Vec<Vec<f64>>,
    /// `Σₓ p(x|z) f(d(x, x̂))`, indexed `[z][x̂]`.
    pub d_tilde: Vec<Vec<f64>>,
    pub z_used: Vec<bool>,
}

impl AmendedDistortions {
    /// `f(d̂(z, x̂))`, which equals `d̃` up to rounding.
    pub fn f_of_d_hat(&self) -> Vec<Vec<f64>> {
        self.d_hat
            .iter()
            .map(|r| r.iter().map(|&v| self.f.apply(v)).collect())
            .collect()
    }
}

pub fn build_amended(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
) -> Result<AmendedDistortions> {
    if d.rows() != src.x_alphabet().size() {
        return Err(Error::Dimension(format!(
            "distortion has {} rows, source alphabet has {} symbols",
            d.rows(),
            src.x_alphabet().size()
        )));
    }
    f.validate_on(d.max())?;
    let d_bar: Vec<Vec<f64>> = d
        .values()
        .iter()
        .map(|r| r.iter().map(|&v| f.apply(v)).collect())
        .collect();
    let posterior = src.posterior();
    let f0 = f.apply(0.0);
    let mut d_tilde = Vec::with_capacity(posterior.z_size());
    let mut d_hat = Vec::with_capacity(posterior.z_size());
    let mut z_used = Vec::with_capacity(posterior.z_size());
    for z in 0..posterior.z_size() {
        match posterior.column(z) {
            Some(col) => {
                let row: Vec<f64> = (0..d.cols())
                    .map(|b| col.iter().zip(&d_bar).map(|(p, r)| p * r[b]).sum())
                    .collect();
                d_hat.push(
                    row.iter()
                        .map(|&v| f.invert(v))
                        .collect::<Result<Vec<_>>>()?,
                );
                d_tilde.push(row);
                z_used.push(true);
            }
            None => {
                d_tilde.push(vec![f0; d.cols()]);
                d_hat.push(vec![0.0; d.cols()]);
                z_used.push(false);
            }
        }
    }
    Ok(AmendedDistortions {
        f: f.clone(),
        d_bar,
        d_hat,
        d_tilde,
        z_used,
    })
}
