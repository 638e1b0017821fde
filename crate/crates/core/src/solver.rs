//! Alternating minimization for the reduced direct problem.
//!
//! The f-separable indirect rate-distortion function at `D` equals
//! `min I(z; x̂)` subject to `E[d̃(z, x̂)] ≤ f(D)`. At a fixed slope `s ≤ 0`
//! the minimizer satisfies
//!
//! ```text
//! q(x̂|z) = e^{s d̃(z,x̂)} q(x̂) / Σ_x̂' e^{s d̃(z,x̂')} q(x̂'),   q(x̂) = Σ_z p(z) q(x̂|z)
//! ```
//!
//! and the rate is `s E[d̃] − Σ_z p(z) ln Σ_x̂ e^{s d̃(z,x̂)} q(x̂)`. Iterating
//! the two equations from a uniform `q(x̂)` is the Blahut-Arimoto scheme. A
//! target distortion is reached by bisecting on `s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::{build_amended, AmendedDistortions, DistortionMatrix, FTransform};
use crate::error::{Error, Result};
use crate::source::JointSource;
use crate::LogBase;

/// Output probabilities below this are pinned to zero for the rest of a run.
pub const SUPPORT_FLOOR: f64 = 1e-300;

/// Maximum route disagreement tolerated by [`characterize`].
pub const ROUTE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum SlopeSchedule {
    /// Evenly spaced distortion targets on `(D_min, D_max]`, each reached by bisection.
    Targets,
    /// Explicit slopes, all `≤ 0`.
    Explicit(Vec<f64>),
    /// `start · ratioᵏ` for `k = 0..count`.
    Geometric {
        start: f64,
        ratio: f64,
        count: usize,
    },
}

impl SlopeSchedule {
    fn slopes(&self) -> Vec<f64> {
        match self {
            SlopeSchedule::Targets => Vec::new(),
            SlopeSchedule::Explicit(s) => s.clone(),
            SlopeSchedule::Geometric {
                start,
                ratio,
                count,
            } => (0..*count).map(|k| start * ratio.powi(k as i32)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when the parametric rate moves by less than this (nats) ...
    pub convergence_tol: f64,
    /// ... and the output marginal moves by less than this in max-norm.
    pub marginal_tol: f64,
    /// Relative tolerance on the f-domain distortion when bisecting on `s`.
    pub bisection_tol: f64,
    pub slope_schedule: SlopeSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            convergence_tol: 1e-12,
            marginal_tol: 1e-12,
            bisection_tol: 1e-9,
            slope_schedule: SlopeSchedule::Targets,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        for (name, v) in [
            ("convergence_tol", self.convergence_tol),
            ("marginal_tol", self.marginal_tol),
            ("bisection_tol", self.bisection_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.slope_schedule.slopes().iter().any(|&s| !(s <= 0.0)) {
            return Err(Error::Config("slopes must be nonpositive".into()));
        }
        Ok(())
    }
}

/// One point of the parametric family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopePoint {
    pub s: f64,
    /// `q(x̂|z)`, indexed `[z][x̂]`.
    pub q_cond: Vec<Vec<f64>>,
    pub q_out: Vec<f64>,
    /// `max(0, I(z; x̂))` in nats.
    pub rate: f64,
    pub rate_mi: f64,
    pub rate_parametric: f64,
    /// `E[d̃(z, x̂)]`.
    pub f_distortion: f64,
    /// `f⁻¹(E[d̃])`. For a bare [`DirectProblem`] this equals `f_distortion`.
    pub distortion: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The mutual information came out negative and was clamped to zero.
    pub clamped: bool,
    /// The requested target lay above the zero-rate distortion.
    pub above_max: bool,
}

/// A direct rate-distortion problem: observation law `p(z)` and distortion
/// `[z][x̂]`. Rows with `p(z) = 0` never enter an expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectProblem {
    pz: Vec<f64>,
    dist: Vec<Vec<f64>>,
}

impl DirectProblem {
    pub fn new(pz: Vec<f64>, dist: Vec<Vec<f64>>) -> Result<Self> {
        if pz.len() != dist.len() || dist.is_empty() {
            return Err(Error::Dimension(format!(
                "p(z) has {} entries, distortion has {} rows",
                pz.len(),
                dist.len()
            )));
        }
        let cols = dist[0].len();
        if cols == 0 || dist.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension(
                "distortion rows must share a nonzero length".into(),
            ));
        }
        if pz.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::NegativeProbability {
                what: "p(z)".into(),
                value: -1.0,
            });
        }
        if dist
            .iter()
            .zip(&pz)
            .any(|(r, &p)| p > 0.0 && r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidDistortion("entries must be finite".into()));
        }
        Ok(Self { pz, dist })
    }

    pub fn pz(&self) -> &[f64] {
        &self.pz
    }

    pub fn distortion(&self) -> &[Vec<f64>] {
        &self.dist
    }

    fn outputs(&self) -> usize {
        self.dist[0].len()
    }

    fn used_rows(&self) -> impl Iterator<Item = (usize, f64, &Vec<f64>)> {
        self.pz
            .iter()
            .zip(&self.dist)
            .enumerate()
            .filter(|(_, (p, _))| **p > 0.0)
            .map(|(z, (&p, row))| (z, p, row))
    }

    /// `(Σ_z p(z) min_x̂ d(z,x̂), min_x̂ Σ_z p(z) d(z,x̂))`: the smallest
    /// feasible expected distortion and the zero-rate expected distortion.
    pub fn domain_bounds(&self) -> (f64, f64) {
        let lo = self
            .used_rows()
            .map(|(_, p, row)| p * row.iter().cloned().fold(f64::INFINITY, f64::min))
            .sum();
        (lo, self.zero_rate_choice().1)
    }

    fn zero_rate_choice(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for b in 0..self.outputs() {
            let v: f64 = self.used_rows().map(|(_, p, row)| p * row[b]).sum();
            if v < best.1 {
                best = (b, v);
            }
        }
        best
    }

    fn zero_rate_point(&self) -> SlopePoint {
        let (b, v) = self.zero_rate_choice();
        let mut q_out = vec![0.0; self.outputs()];
        q_out[b] = 1.0;
        SlopePoint {
            s: 0.0,
            q_cond: vec![q_out.clone(); self.pz.len()],
            q_out,
            rate: 0.0,
            rate_mi: 0.0,
            rate_parametric: 0.0,
            f_distortion: v,
            distortion: v,
            converged: true,
            iterations: 0,
            clamped: false,
            above_max: false,
        }
    }

    /// Fixed point of the alternating updates at slope `s`. With `s = 0` the
    /// exponent vanishes and the zero-rate point (all mass on the output with
    /// least expected distortion) is returned.
    pub fn solve_slope(&self, s: f64, cfg: &SolverConfig) -> Result<SlopePoint> {
        if !(s <= 0.0) {
            return Err(Error::Domain(format!("slope must be nonpositive, got {s}")));
        }
        if s == 0.0 {
            return Ok(self.zero_rate_point());
        }
        let m = self.outputs();
        let row_min: Vec<f64> = self
            .dist
            .iter()
            .map(|r| r.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let mut q_out = vec![1.0 / m as f64; m];
        let mut q_cond = vec![vec![0.0; m]; self.pz.len()];
        let mut prev_rate = f64::NAN;
        let mut rate_parametric = 0.0;
        let mut f_distortion = 0.0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < cfg.max_iters {
            iterations += 1;
            f_distortion = 0.0;
            let mut log_norm = 0.0;
            for (z, p, row) in self.used_rows() {
                let q = &mut q_cond[z];
                let mut total = 0.0;
                for b in 0..m {
                    q[b] = q_out[b] * (s * (row[b] - row_min[z])).exp();
                    total += q[b];
                }
                q.iter_mut().for_each(|v| *v /= total);
                f_distortion += p * q.iter().zip(row).map(|(a, d)| a * d).sum::<f64>();
                log_norm += p * (total.ln() + s * row_min[z]);
            }
            rate_parametric = s * f_distortion - log_norm;

            let mut next = vec![0.0; m];
            for (z, p, _) in self.used_rows() {
                for b in 0..m {
                    next[b] += p * q_cond[z][b];
                }
            }
            next.iter_mut()
                .filter(|v| **v < SUPPORT_FLOOR)
                .for_each(|v| *v = 0.0);
            let shift = next
                .iter()
                .zip(&q_out)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let rate_step = (rate_parametric - prev_rate).abs();
            q_out = next;
            prev_rate = rate_parametric;
            if rate_step < cfg.convergence_tol && shift < cfg.marginal_tol {
                converged = true;
                break;
            }
        }
        for (z, _) in self.pz.iter().enumerate().filter(|(_, p)| **p == 0.0) {
            q_cond[z].clone_from(&q_out);
        }
        let rate_mi = self.mutual_information(&q_cond, &q_out);
        Ok(SlopePoint {
            s,
            q_cond,
            q_out,
            rate: rate_mi.max(0.0),
            rate_mi,
            rate_parametric,
            f_distortion,
            distortion: f_distortion,
            converged,
            iterations,
            clamped: rate_mi < 0.0,
            above_max: false,
        })
    }

    /// `I(z; x̂) = Σ_z p(z) Σ_x̂ q(x̂|z) ln(q(x̂|z)/q(x̂))`.
    pub fn mutual_information(&self, q_cond: &[Vec<f64>], q_out: &[f64]) -> f64 {
        self.used_rows()
            .map(|(z, p, _)| {
                p * q_cond[z]
                    .iter()
                    .zip(q_out)
                    .filter(|(c, _)| **c > 0.0)
                    .map(|(c, o)| c * (c / o).ln())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Expected distortion `Σ_z p(z) Σ_x̂ q(x̂|z) d(z, x̂)` of an arbitrary conditional.
    pub fn expected_distortion(&self, q_cond: &[Vec<f64>]) -> f64 {
        self.used_rows()
            .map(|(z, p, row)| p * q_cond[z].iter().zip(row).map(|(a, d)| a * d).sum::<f64>())
            .sum()
    }

    fn tolerance(&self, target: f64, cfg: &SolverConfig) -> f64 {
        cfg.bisection_tol * target.abs().max(1.0)
    }

    /// Smallest rate with `E[d] ≤ target`, bisecting on the slope.
    pub fn solve_target(&self, target: f64, cfg: &SolverConfig) -> Result<SlopePoint> {
        let (lo, hi) = self.domain_bounds();
        let tol = self.tolerance(target, cfg);
        if target < lo - tol {
            return Err(Error::Domain(format!(
                "expected distortion {target} is below the feasible minimum {lo}"
            )));
        }
        if target >= hi - tol {
            let mut p = self.zero_rate_point();
            p.above_max = target > hi + tol;
            return Ok(p);
        }
        let mut s_hi = 0.0;
        let mut s_lo = -1.0;
        let mut p_lo = self.solve_slope(s_lo, cfg)?;
        while p_lo.f_distortion > target + tol {
            let next_s = 2.0 * s_lo;
            let next = self.solve_slope(next_s, cfg)?;
            let saturated = next.f_distortion >= p_lo.f_distortion || !next_s.is_finite();
            s_hi = s_lo;
            s_lo = next_s;
            p_lo = next;
            if saturated || s_lo < -1e300 {
                return Ok(p_lo);
            }
        }
        let mut best = p_lo;
        if (best.f_distortion - target).abs() <= tol {
            return Ok(best);
        }
        for _ in 0..400 {
            let mid = 0.5 * (s_lo + s_hi);
            if mid <= s_lo || mid >= s_hi {
                break;
            }
            let p = self.solve_slope(mid, cfg)?;
            let err = (p.f_distortion - target).abs();
            let better = err < (best.f_distortion - target).abs();
            if p.f_distortion > target {
                s_hi = mid;
            } else {
                s_lo = mid;
            }
            if better {
                best = p;
            }
            if err <= tol {
                break;
            }
        }
        Ok(best)
    }

    /// Smallest expected distortion achievable at `rate` nats, found by
    /// bisecting on the slope. Rates at or beyond the saturation rate return
    /// the minimum-distortion end of the curve.
    pub fn solve_rate(&self, rate: f64, cfg: &SolverConfig) -> Result<SlopePoint> {
        if !(rate >= 0.0) {
            return Err(Error::Domain(format!(
                "rate must be nonnegative, got {rate}"
            )));
        }
        if rate == 0.0 {
            return Ok(self.zero_rate_point());
        }
        let rate_tol = 1e-13;
        let mut s_hi = 0.0;
        let mut s_lo = -1.0;
        let mut p_lo = self.solve_slope(s_lo, cfg)?;
        while p_lo.rate < rate - rate_tol {
            let next_s = 2.0 * s_lo;
            let next = self.solve_slope(next_s, cfg)?;
            let saturated = next.rate <= p_lo.rate || !next_s.is_finite();
            s_hi = s_lo;
            s_lo = next_s;
            p_lo = next;
            if saturated || s_lo < -1e300 {
                return Ok(p_lo);
            }
        }
        let mut best = p_lo;
        for _ in 0..400 {
            if (best.rate - rate).abs() <= rate_tol {
                break;
            }
            let mid = 0.5 * (s_lo + s_hi);
            if mid <= s_lo || mid >= s_hi {
                break;
            }
            let p = self.solve_slope(mid, cfg)?;
            if p.rate >= rate {
                s_lo = mid;
                best = p;
            } else {
                s_hi = mid;
            }
        }
        Ok(best)
    }
}

/// `(f_domain_min, f_domain_max)` of the reduced problem defined by `d̃`.
pub fn f_domain_bounds(amended: &AmendedDistortions, pz: &[f64]) -> Result<(f64, f64)> {
    Ok(DirectProblem::new(pz.to_vec(), amended.d_tilde.clone())?.domain_bounds())
}

/// Fixed-slope solution of the reduced problem, with `D = f⁻¹(E[d̃])` filled in.
pub fn ba_fixed_slope(
    amended: &AmendedDistortions,
    pz: &[f64],
    s: f64,
    cfg: &SolverConfig,
) -> Result<SlopePoint> {
    let problem = DirectProblem::new(pz.to_vec(), amended.d_tilde.clone())?;
    let mut p = problem.solve_slope(s, cfg)?;
    p.distortion = amended.f.invert(p.f_distortion)?;
    Ok(p)
}

/// An indirect problem `(p(x,z), d, f)` with its amended distortions.
#[derive(Debug, Clone)]
pub struct IndirectProblem {
    source: JointSource,
    distortion: DistortionMatrix,
    amended: AmendedDistortions,
    reduced: DirectProblem,
}

impl IndirectProblem {
    pub fn new(source: &JointSource, d: &DistortionMatrix, f: &FTransform) -> Result<Self> {
        let amended = build_amended(source, d, f)?;
        let reduced = DirectProblem::new(source.z_marginal().to_vec(), amended.d_tilde.clone())?;
        Ok(Self {
            source: source.clone(),
            distortion: d.clone(),
            amended,
            reduced,
        })
    }

    pub fn source(&self) -> &JointSource {
        &self.source
    }

    pub fn distortion(&self) -> &DistortionMatrix {
        &self.distortion
    }

    pub fn f(&self) -> &FTransform {
        &self.amended.f
    }

    pub fn amended(&self) -> &AmendedDistortions {
        &self.amended
    }

    pub fn reduced(&self) -> &DirectProblem {
        &self.reduced
    }

    /// Bounds on the expected amended distortion `E[d̃]`.
    pub fn f_domain_bounds(&self) -> (f64, f64) {
        self.reduced.domain_bounds()
    }

    /// `(D_min, D_max)` in raw distortion units.
    pub fn distortion_bounds(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.f_domain_bounds();
        Ok((self.f().invert(lo)?, self.f().invert(hi)?))
    }

    fn finish(&self, mut p: SlopePoint) -> Result<SlopePoint> {
        p.distortion = self.f().invert(p.f_distortion)?;
        Ok(p)
    }

    pub fn solve_slope(&self, s: f64, cfg: &SolverConfig) -> Result<SlopePoint> {
        self.finish(self.reduced.solve_slope(s, cfg)?)
    }

    /// The f-separable indirect rate-distortion function at `d`.
    pub fn solve_at_distortion(&self, d: f64, cfg: &SolverConfig) -> Result<SlopePoint> {
        if !(d >= 0.0) {
            return Err(Error::Domain(format!(
                "distortion must be nonnegative, got {d}"
            )));
        }
        let p = self
            .reduced
            .solve_target(self.f().apply(d), cfg)
            .map_err(|e| match e {
                Error::Domain(_) => Error::Domain(format!(
                    "D = {d} is below D_min = {}",
                    self.distortion_bounds().map_or(f64::NAN, |b| b.0)
                )),
                other => other,
            })?;
        self.finish(p)
    }

    /// Distortion-rate: the smallest `D` reachable at `rate` nats.
    pub fn distortion_at_rate(&self, rate: f64, cfg: &SolverConfig) -> Result<SlopePoint> {
        self.finish(self.reduced.solve_rate(rate, cfg)?)
    }

    /// Curve on `(D_min, D_max]` with `n_points` evenly spaced raw distortions,
    /// or at the slopes listed in `cfg.slope_schedule`.
    pub fn sweep(&self, n_points: usize, cfg: &SolverConfig) -> Result<RdCurve> {
        cfg.validate()?;
        let (d_min, d_max) = self.distortion_bounds()?;
        let mut points: Vec<SlopePoint> = match &cfg.slope_schedule {
            SlopeSchedule::Targets => {
                if n_points < 2 {
                    return Err(Error::Config("a curve needs at least two points".into()));
                }
                let span = d_max - d_min;
                (1..=n_points)
                    .into_par_iter()
                    .map(|i| {
                        let d = if i == n_points {
                            d_max
                        } else {
                            d_min + span * i as f64 / n_points as f64
                        };
                        self.solve_at_distortion(d, cfg)
                    })
                    .collect::<Result<_>>()?
            }
            schedule => schedule
                .slopes()
                .into_par_iter()
                .map(|s| self.solve_slope(s, cfg))
                .collect::<Result<_>>()?,
        };
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
        points.dedup_by(|b, a| b.distortion <= a.distortion);
        Ok(RdCurve {
            points,
            d_min,
            d_max,
            f_domain: self.f_domain_bounds(),
            log_base: LogBase::Nats,
        })
    }

    /// Evaluates the rate at `d` through `d̃` at `f(d)` and through the
    /// f-separable direct problem of `d̂`, i.e. the separable problem of
    /// `f(d̂)` at `f(d)`.
    pub fn characterize(&self, d: f64, cfg: &SolverConfig) -> Result<Characterization> {
        let via_tilde = self.solve_at_distortion(d, cfg)?;
        let hat = DirectProblem::new(self.source.z_marginal().to_vec(), self.amended.f_of_d_hat())?;
        let via_hat = self.finish(hat.solve_target(self.f().apply(d), cfg)?)?;
        let out = Characterization {
            distortion: d,
            via_tilde,
            via_hat,
        };
        if out.route_gap() > ROUTE_TOL {
            return Err(Error::RouteMismatch {
                via_tilde: out.via_tilde.rate,
                via_hat: out.via_hat.rate,
            });
        }
        Ok(out)
    }
}

/// Rates from the equivalent characterizations at one distortion level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Characterization {
    pub distortion: f64,
    /// `R_{d̃}(f(D))`.
    pub via_tilde: SlopePoint,
    /// `R_{f, d̂}(D)`, the f-separable direct RDF of `d̂`.
    pub via_hat: SlopePoint,
}

impl Characterization {
    /// f-separable indirect RDF under the average criterion.
    pub fn irdf(&self) -> f64 {
        self.via_tilde.rate
    }

    /// f-separable indirect RDF under the excess criterion; identical by the
    /// excess/average equivalence, so it shares the `d̃` computation.
    pub fn irdf_excess(&self) -> f64 {
        self.via_tilde.rate
    }

    pub fn f_rdf_hat(&self) -> f64 {
        self.via_hat.rate
    }

    pub fn rdf_tilde(&self) -> f64 {
        self.via_tilde.rate
    }

    pub fn route_gap(&self) -> f64 {
        (self.via_tilde.rate - self.via_hat.rate).abs()
    }
}

/// Rate-distortion curve sorted by raw distortion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdCurve {
    pub points: Vec<SlopePoint>,
    pub d_min: f64,
    pub d_max: f64,
    pub f_domain: (f64, f64),
    pub log_base: LogBase,
}

impl RdCurve {
    pub fn distortions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.distortion).collect()
    }

    /// Rates in the curve's reporting unit.
    pub fn rates(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| self.log_base.from_nats(p.rate))
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

pub fn solve_at_distortion(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    target: f64,
    cfg: &SolverConfig,
) -> Result<SlopePoint> {
    IndirectProblem::new(src, d, f)?.solve_at_distortion(target, cfg)
}

pub fn sweep_curve(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    n_points: usize,
    cfg: &SolverConfig,
) -> Result<RdCurve> {
    IndirectProblem::new(src, d, f)?.sweep(n_points, cfg)
}

pub fn characterize(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    target: f64,
    cfg: &SolverConfig,
) -> Result<Characterization> {
    IndirectProblem::new(src, d, f)?.characterize(target, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    // independent of closed_form
    fn hb(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
        }
    }

    fn bsc_identity_oracle(beta: f64, d: f64) -> f64 {
        (LN_2 - hb((d - beta) / (1.0 - 2.0 * beta))).max(0.0)
    }

    fn bsc(beta: f64, f: FTransform) -> IndirectProblem {
        IndirectProblem::new(
            &JointSource::binary_symmetric(beta).unwrap(),
            &DistortionMatrix::hamming(2, 2),
            &f,
        )
        .unwrap()
    }

    fn bec(delta: f64, f: FTransform) -> IndirectProblem {
        IndirectProblem::new(
            &JointSource::binary_erasure(delta).unwrap(),
            &DistortionMatrix::hamming(2, 2),
            &f,
        )
        .unwrap()
    }

    #[test]
    fn bounds_examples() {
        let cfg_bounds = |p: &IndirectProblem| p.f_domain_bounds();
        let (lo, hi) = cfg_bounds(&bsc(0.15, FTransform::identity()));
        assert!((lo - 0.15).abs() < 1e-15 && (hi - 0.5).abs() < 1e-15);
        let (lo, hi) = cfg_bounds(&bec(0.4, FTransform::identity()));
        assert!((lo - 0.2).abs() < 1e-15 && (hi - 0.5).abs() < 1e-15);

        let f = FTransform::shifted_cubic(0.4).unwrap();
        let (f0, f1) = (f.apply(0.0), f.apply(1.0));
        let p = bsc(0.15, f);
        let am = p.amended();
        let (lo, hi) = f_domain_bounds(am, p.source().z_marginal()).unwrap();
        assert!((lo - (0.85 * f0 + 0.15 * f1)).abs() < 1e-15);
        assert!((hi - 0.5 * (f0 + f1)).abs() < 1e-15);
    }

    #[test]
    fn zero_slope() {
        let cfg = SolverConfig::default();
        let src =
            JointSource::from_prior_and_channel(&[0.3, 0.7], &[vec![0.9, 0.1], vec![0.2, 0.8]])
                .unwrap();
        let p = IndirectProblem::new(&src, &DistortionMatrix::hamming(2, 2), &FTransform::sqrt())
            .unwrap();
        let pt = p.solve_slope(0.0, &cfg).unwrap();
        assert_eq!(pt.rate, 0.0);
        assert_eq!(pt.q_cond[0], pt.q_cond[1]);
        assert_eq!(pt.f_distortion, p.f_domain_bounds().1);
        assert!(p.solve_slope(0.5, &cfg).is_err());
    }

    #[test]
    fn steep_slope_saturates() {
        let cfg = SolverConfig::default();
        let p = bsc(0.15, FTransform::identity());
        let pt = ba_fixed_slope(p.amended(), p.source().z_marginal(), -1e4, &cfg).unwrap();
        assert!((pt.f_distortion - 0.15).abs() < 1e-12);
        assert!((pt.rate - LN_2).abs() < 1e-12);
    }

    #[test]
    fn bsc_point_matches_oracle() {
        let cfg = SolverConfig::default();
        let p = bsc(0.15, FTransform::identity());
        let pt = p.solve_at_distortion(0.3, &cfg).unwrap();
        let want = LN_2 * (1.0 - hb(0.15 / 0.7) / LN_2);
        assert!((pt.rate - want).abs() < 1e-8, "{} vs {want}", pt.rate);
        assert!((pt.distortion - 0.3).abs() < 1e-8);
        assert!(pt.converged);
    }

    #[test]
    fn solve_at_distortion_examples() {
        let cfg = SolverConfig::default();
        let pt = bsc(0.25, FTransform::identity())
            .solve_at_distortion(0.25, &cfg)
            .unwrap();
        assert!((pt.rate - LN_2).abs() < 1e-7);
        let pt = bsc(0.0, FTransform::identity())
            .solve_at_distortion(0.25, &cfg)
            .unwrap();
        assert!((pt.rate - (LN_2 - hb(0.25))).abs() < 1e-8);
        let pt = bec(0.4, FTransform::identity())
            .solve_at_distortion(0.5, &cfg)
            .unwrap();
        assert_eq!(pt.rate, 0.0);
        assert!(!pt.above_max);
        let pt = bec(0.4, FTransform::identity())
            .solve_at_distortion(0.7, &cfg)
            .unwrap();
        assert_eq!(pt.rate, 0.0);
        assert!(pt.above_max);
        assert!(matches!(
            bec(0.4, FTransform::identity()).solve_at_distortion(0.1, &cfg),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn slope_map_is_monotone() {
        let cfg = SolverConfig::default();
        let src = JointSource::from_prior_and_channel(
            &[0.2, 0.5, 0.3],
            &[
                vec![0.7, 0.2, 0.1],
                vec![0.1, 0.8, 0.1],
                vec![0.25, 0.25, 0.5],
            ],
        )
        .unwrap();
        let d = DistortionMatrix::new(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ])
        .unwrap();
        for f in [
            FTransform::identity(),
            FTransform::exponential(1.5).unwrap(),
        ] {
            let p = IndirectProblem::new(&src, &d, &f).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let s = -0.05 * 1.3f64.powi(k);
                let pt = p.solve_slope(s, &cfg).unwrap();
                assert!(pt.f_distortion <= prev + 1e-12, "{f} s={s}");
                prev = pt.f_distortion;
                let mix: Vec<f64> = (0..3)
                    .map(|b| (0..3).map(|z| src.z_marginal()[z] * pt.q_cond[z][b]).sum())
                    .collect();
                for (a, b) in mix.iter().zip(&pt.q_out) {
                    assert!((a - b).abs() < 1e-10);
                }
                for row in &pt.q_cond {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                }
                if pt.converged && pt.rate > 0.0 {
                    assert!((pt.rate_mi - pt.rate_parametric).abs() < 1e-8, "{f} s={s}");
                }
            }
        }
    }

    #[test]
    fn bsc_curve_matches_oracle() {
        let cfg = SolverConfig::default();
        let curve = bsc(0.15, FTransform::identity()).sweep(30, &cfg).unwrap();
        assert_eq!(curve.points.len(), 30);
        assert!((curve.d_min - 0.15).abs() < 1e-15);
        assert!((curve.d_max - 0.5).abs() < 1e-15);
        for w in curve.points.windows(2) {
            assert!(w[1].distortion > w[0].distortion);
            assert!(w[1].rate <= w[0].rate + 1e-12);
        }
        for pt in &curve.points {
            let want = bsc_identity_oracle(0.15, pt.distortion);
            assert!((pt.rate - want).abs() < 1e-6);
        }
        assert!(curve.points.last().unwrap().rate.abs() < 1e-9);
    }

    #[test]
    fn geometric_schedule_sweep() {
        let cfg = SolverConfig {
            slope_schedule: SlopeSchedule::Geometric {
                start: -0.5,
                ratio: 1.5,
                count: 12,
            },
            ..SolverConfig::default()
        };
        let curve = bsc(0.1, FTransform::identity()).sweep(0, &cfg).unwrap();
        assert_eq!(curve.points.len(), 12);
        for pt in &curve.points {
            assert!((pt.rate - bsc_identity_oracle(0.1, pt.distortion)).abs() < 1e-8);
        }
        let bad = SolverConfig {
            slope_schedule: SlopeSchedule::Explicit(vec![0.5]),
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn characterize_routes_agree() {
        let cfg = SolverConfig::default();
        let c = bsc(0.15, FTransform::identity())
            .characterize(0.3, &cfg)
            .unwrap();
        let want = LN_2 - hb(0.15 / 0.7);
        assert!((c.irdf() - want).abs() < 1e-8);
        assert!((c.f_rdf_hat() - want).abs() < 1e-8);

        // noiseless: d̃ equals d̄
        let p = bsc(0.0, FTransform::exponential(2.0).unwrap());
        assert_eq!(p.amended().d_tilde, p.amended().d_bar);
        let c = p.characterize(0.3, &cfg).unwrap();
        assert!(c.route_gap() <= ROUTE_TOL);
    }

    #[test]
    fn distortion_at_rate_inverts_curve() {
        let cfg = SolverConfig::default();
        let p = bsc(0.15, FTransform::identity());
        let pt = p.distortion_at_rate(0.3, &cfg).unwrap();
        assert!((pt.rate - 0.3).abs() < 1e-10);
        assert!((bsc_identity_oracle(0.15, pt.distortion) - 0.3).abs() < 1e-9);
        let top = p.distortion_at_rate(LN_2, &cfg).unwrap();
        assert!((top.distortion - 0.15).abs() < 1e-12);
        let zero = p.distortion_at_rate(0.0, &cfg).unwrap();
        assert_eq!(zero.distortion, 0.5);
    }

    #[test]
    fn exponential_curve_not_convex() {
        let cfg = SolverConfig::default();
        let curve = bsc(0.01, FTransform::exponential(9.2).unwrap())
            .sweep(40, &cfg)
            .unwrap();
        let (ds, rs) = (curve.distortions(), curve.rates());
        let mut worst: f64 = 0.0;
        for i in 0..ds.len() {
            for k in i + 2..ds.len() {
                let j = (i + k) / 2;
                let t = (ds[j] - ds[i]) / (ds[k] - ds[i]);
                let chord = rs[i] + t * (rs[k] - rs[i]);
                worst = worst.max(rs[j] - chord);
            }
        }
        assert!(worst >= 1e-3, "largest chord excess {worst}");
    }

    #[test]
    fn unused_observation_symbols_are_ignored() {
        let cfg = SolverConfig::default();
        let src = JointSource::from_prior_and_channel(
            &[0.5, 0.5],
            &[vec![0.9, 0.0, 0.1], vec![0.1, 0.0, 0.9]],
        )
        .unwrap();
        let p = IndirectProblem::new(
            &src,
            &DistortionMatrix::hamming(2, 2),
            &FTransform::identity(),
        )
        .unwrap();
        let pt = p.solve_at_distortion(0.2, &cfg).unwrap();
        assert!((pt.rate - bsc_identity_oracle(0.1, 0.2)).abs() < 1e-8);
        assert_eq!(pt.q_cond[1], pt.q_out);
    }
}
