//! Exhaustive evaluation and search over short noisy lossy source codes.
//!
//! A code of blocklength `n` with `M` messages maps every observation
//! sequence `zⁿ` to a message and every message to a reconstruction `x̂ⁿ`.
//! Sequences are indexed little-endian: `idx = Σ sᵢ · |alphabet|ⁱ`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::{f_domain_mean, f_separable_n, DistortionMatrix, FTransform};
use crate::error::{Error, Result};
use crate::source::JointSource;

/// Largest number of joint sequences, or of candidate codes, enumerated.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// Draws used by the sampling evaluator unless told otherwise.
pub const DEFAULT_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// `distortion > threshold`
    #[default]
    Greater,
    /// `distortion ≥ threshold`
    GreaterEq,
}

impl Comparator {
    pub fn exceeds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Greater => value > threshold,
            Comparator::GreaterEq => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockCode {
    pub n: usize,
    pub m: usize,
    /// Message for each observation sequence index.
    pub encoder: Vec<usize>,
    /// Reconstruction symbols for each message.
    pub decoder: Vec<Vec<usize>>,
}

impl BlockCode {
    pub fn new(n: usize, m: usize, encoder: Vec<usize>, decoder: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Config(
                "blocklength and codebook size must be positive".into(),
            ));
        }
        if encoder.iter().any(|&w| w >= m) {
            return Err(Error::Config("encoder emits a message outside 0..M".into()));
        }
        if decoder.len() != m || decoder.iter().any(|c| c.len() != n) {
            return Err(Error::Config(format!(
                "decoder needs {m} codewords of length {n}"
            )));
        }
        Ok(Self {
            n,
            m,
            encoder,
            decoder,
        })
    }

    /// Blocklength-1 code reproducing the observation.
    pub fn identity(size: usize) -> Self {
        Self {
            n: 1,
            m: size,
            encoder: (0..size).collect(),
            decoder: (0..size).map(|s| vec![s]).collect(),
        }
    }

    /// Single-message code that always outputs `word`.
    pub fn constant(word: Vec<usize>, z_size: usize) -> Self {
        let n = word.len();
        Self {
            n,
            m: 1,
            encoder: vec![0; pow(z_size, n)],
            decoder: vec![word],
        }
    }

    /// `(1/n) ln M`.
    pub fn rate(&self) -> f64 {
        (self.m as f64).ln() / self.n as f64
    }

    fn check_against(&self, src: &JointSource, d: &DistortionMatrix) -> Result<()> {
        if self.encoder.len() != pow(src.z_alphabet().size(), self.n) {
            return Err(Error::Dimension(format!(
                "encoder covers {} sequences, expected |Z|^n = {}",
                self.encoder.len(),
                pow(src.z_alphabet().size(), self.n)
            )));
        }
        if self.decoder.iter().flatten().any(|&b| b >= d.cols()) {
            return Err(Error::Dimension(
                "decoder emits an unknown reconstruction symbol".into(),
            ));
        }
        if d.rows() != src.x_alphabet().size() {
            return Err(Error::Dimension(
                "distortion rows must match the source alphabet".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeEvaluation {
    /// `E[d_fⁿ(xⁿ, x̂ⁿ)]` in raw units.
    pub avg_distortion: f64,
    /// `E[(1/n) Σ f(d(xᵢ, x̂ᵢ))]`.
    pub avg_f_distortion: f64,
    /// `P[d_fⁿ(xⁿ, x̂ⁿ) > threshold]` (or `≥`, per the comparator).
    pub excess_prob: f64,
    pub threshold: f64,
}

fn pow(base: usize, exp: usize) -> usize {
    base.checked_pow(exp as u32).unwrap_or(usize::MAX)
}

fn digits(mut idx: usize, base: usize, len: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(len) {
        *slot = idx % base;
        idx /= base;
    }
}

/// A joint outcome `(xⁿ, zⁿ)` with nonzero probability.
struct Outcome {
    x_idx: usize,
    z_idx: usize,
    prob: f64,
}

/// All `(xⁿ, zⁿ)` with positive probability under `p(x,z)ⁿ`, in index order.
fn outcomes(src: &JointSource, n: usize) -> Result<Vec<Outcome>> {
    let (nx, nz) = (src.x_alphabet().size(), src.z_alphabet().size());
    let size = (nx as f64).powi(n as i32) * (nz as f64).powi(n as i32);
    if size > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let (xs_count, zs_count) = (pow(nx, n), pow(nz, n));
    let mut xs = vec![0; n];
    let mut zs = vec![0; n];
    let mut out = Vec::new();
    for z_idx in 0..zs_count {
        digits(z_idx, nz, n, &mut zs);
        for x_idx in 0..xs_count {
            digits(x_idx, nx, n, &mut xs);
            let prob: f64 = xs
                .iter()
                .zip(&zs)
                .map(|(&x, &z)| src.joint()[x][z])
                .product();
            if prob > 0.0 {
                out.push(Outcome { x_idx, z_idx, prob });
            }
        }
    }
    Ok(out)
}

/// Per-pair distortions `d_fⁿ` and f-domain means, indexed `[x_idx][xhat_idx]`.
struct PairTable {
    d_f: Vec<Vec<f64>>,
    f_mean: Vec<Vec<f64>>,
}

fn pair_table(nx: usize, d: &DistortionMatrix, f: &FTransform, n: usize) -> Result<PairTable> {
    let (xs_count, ys_count) = (pow(nx, n), pow(d.cols(), n));
    let mut xs = vec![0; n];
    let mut ys = vec![0; n];
    let mut d_f = Vec::with_capacity(xs_count);
    let mut f_mean = Vec::with_capacity(xs_count);
    for x_idx in 0..xs_count {
        digits(x_idx, nx, n, &mut xs);
        let mut row_df = Vec::with_capacity(ys_count);
        let mut row_fm = Vec::with_capacity(ys_count);
        for y_idx in 0..ys_count {
            digits(y_idx, d.cols(), n, &mut ys);
            row_fm.push(f_domain_mean(f, d, &xs, &ys)?);
            row_df.push(f_separable_n(f, d, &xs, &ys)?);
        }
        d_f.push(row_df);
        f_mean.push(row_fm);
    }
    Ok(PairTable { d_f, f_mean })
}

fn word_index(word: &[usize], base: usize) -> usize {
    word.iter().rev().fold(0, |acc, &s| acc * base + s)
}

fn evaluate_indexed(
    outcomes: &[Outcome],
    table: &PairTable,
    codeword_of_z: impl Fn(usize) -> usize,
    threshold: f64,
    cmp: Comparator,
) -> CodeEvaluation {
    let mut eval = CodeEvaluation {
        avg_distortion: 0.0,
        avg_f_distortion: 0.0,
        excess_prob: 0.0,
        threshold,
    };
    for o in outcomes {
        let y = codeword_of_z(o.z_idx);
        let v = table.d_f[o.x_idx][y];
        eval.avg_distortion += o.prob * v;
        eval.avg_f_distortion += o.prob * table.f_mean[o.x_idx][y];
        if cmp.exceeds(v, threshold) {
            eval.excess_prob += o.prob;
        }
    }
    eval
}

/// Exact distortion statistics of `code` under `p(x,z)ⁿ`, strict `>` events.
pub fn evaluate_code(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    code: &BlockCode,
    threshold: f64,
) -> Result<CodeEvaluation> {
    evaluate_code_with(src, d, f, code, threshold, Comparator::Greater)
}

pub fn evaluate_code_with(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    code: &BlockCode,
    threshold: f64,
    cmp: Comparator,
) -> Result<CodeEvaluation> {
    code.check_against(src, d)?;
    let outs = outcomes(src, code.n)?;
    let table = pair_table(src.x_alphabet().size(), d, f, code.n)?;
    let words: Vec<usize> = code
        .decoder
        .iter()
        .map(|w| word_index(w, d.cols()))
        .collect();
    Ok(evaluate_indexed(
        &outs,
        &table,
        |z| words[code.encoder[z]],
        threshold,
        cmp,
    ))
}

/// Monte Carlo estimate of the same statistics from `draws` seeded blocks.
pub fn evaluate_code_sampled(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    code: &BlockCode,
    threshold: f64,
    draws: usize,
    seed: u64,
) -> Result<CodeEvaluation> {
    code.check_against(src, d)?;
    if draws == 0 {
        return Err(Error::EmptyInput);
    }
    let nz = src.z_alphabet().size();
    let weights: Vec<f64> = src.joint().iter().flatten().copied().collect();
    let letter = WeightedIndex::new(&weights)
        .map_err(|e| Error::Config(format!("cannot sample the joint law: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut xs, mut zs) = (vec![0; code.n], vec![0; code.n]);
    let mut eval = CodeEvaluation {
        avg_distortion: 0.0,
        avg_f_distortion: 0.0,
        excess_prob: 0.0,
        threshold,
    };
    for _ in 0..draws {
        for i in 0..code.n {
            let k = letter.sample(&mut rng);
            xs[i] = k / nz;
            zs[i] = k % nz;
        }
        let word = &code.decoder[code.encoder[word_index(&zs, nz)]];
        let v = f_separable_n(f, d, &xs, word)?;
        eval.avg_distortion += v;
        eval.avg_f_distortion += f_domain_mean(f, d, &xs, word)?;
        if v > threshold {
            eval.excess_prob += 1.0;
        }
    }
    let scale = 1.0 / draws as f64;
    eval.avg_distortion *= scale;
    eval.avg_f_distortion *= scale;
    eval.excess_prob *= scale;
    Ok(eval)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessEventCheck {
    pub gamma: f64,
    pub delta_star: f64,
    /// `P[d_fⁿ ⋈ D + γ]`.
    pub f_separable_prob: f64,
    /// `P[d̄ⁿ ⋈ f(D) + δ*]`.
    pub separable_prob: f64,
    /// The two probabilities are bitwise equal.
    pub equal: bool,
}

/// Compares the f-separable excess event at `D + γ` with the separable
/// excess event of `d̄ = f∘d` at `f(D) + δ*`, `δ* = f(D+γ) − f(D)`.
pub fn excess_event_equivalence_check(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    code: &BlockCode,
    threshold: f64,
    gamma: f64,
    cmp: Comparator,
) -> Result<ExcessEventCheck> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    code.check_against(src, d)?;
    let outs = outcomes(src, code.n)?;
    let table = pair_table(src.x_alphabet().size(), d, f, code.n)?;
    let words: Vec<usize> = code
        .decoder
        .iter()
        .map(|w| word_index(w, d.cols()))
        .collect();
    let delta_star = f.apply(threshold + gamma) - f.apply(threshold);
    let f_level = f.apply(threshold) + delta_star;
    let (mut left, mut right) = (0.0, 0.0);
    for o in &outs {
        let y = words[code.encoder[o.z_idx]];
        if cmp.exceeds(table.d_f[o.x_idx][y], threshold + gamma) {
            left += o.prob;
        }
        if cmp.exceeds(table.f_mean[o.x_idx][y], f_level) {
            right += o.prob;
        }
    }
    Ok(ExcessEventCheck {
        gamma,
        delta_star,
        f_separable_prob: left,
        separable_prob: right,
        equal: left.to_bits() == right.to_bits(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Average,
    Excess { threshold: f64 },
}

/// Number of `(encoder, decoder)` pairs for the given sizes.
pub fn code_count(z_size: usize, xhat_size: usize, n: usize, m: usize) -> f64 {
    (m as f64).powf((z_size as f64).powi(n as i32)) * (xhat_size as f64).powi((n * m) as i32)
}

/// Calls `visit(code_index, encoder, decoder)` for every code in
/// lexicographic order. Encoder-major; digits little-endian.
pub fn for_each_code(
    z_size: usize,
    xhat_size: usize,
    n: usize,
    m: usize,
    mut visit: impl FnMut(usize, &[usize], &[Vec<usize>]),
) -> Result<()> {
    let count = code_count(z_size, xhat_size, n, m);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let (seqs, words) = (pow(z_size, n), pow(xhat_size, n));
    let (enc_count, dec_count) = (pow(m, seqs), pow(words, m));
    let mut encoder = vec![0; seqs];
    let mut word_ids = vec![0; m];
    let mut decoder = vec![vec![0; n]; m];
    for e in 0..enc_count {
        digits(e, m, seqs, &mut encoder);
        for c in 0..dec_count {
            digits(c, words, m, &mut word_ids);
            for (slot, &w) in decoder.iter_mut().zip(&word_ids) {
                digits(w, xhat_size, n, slot);
            }
            visit(e * dec_count + c, &encoder, &decoder);
        }
    }
    Ok(())
}

/// Exhaustive minimum of the average distortion, or of the excess
/// probability, over all codes with blocklength `n` and `m` messages. Ties
/// go to the earliest code in [`for_each_code`] order.
pub fn best_code_search(
    src: &JointSource,
    d: &DistortionMatrix,
    f: &FTransform,
    n: usize,
    m: usize,
    criterion: Criterion,
) -> Result<(BlockCode, CodeEvaluation)> {
    if n == 0 || m == 0 {
        return Err(Error::Config(
            "blocklength and codebook size must be positive".into(),
        ));
    }
    if d.rows() != src.x_alphabet().size() {
        return Err(Error::Dimension(
            "distortion rows must match the source alphabet".into(),
        ));
    }
    let (nz, nxh) = (src.z_alphabet().size(), d.cols());
    let count = code_count(nz, nxh, n, m);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    f.validate_on(d.max())?;
    let outs = outcomes(src, n)?;
    let table = pair_table(src.x_alphabet().size(), d, f, n)?;
    let (threshold, cmp) = match criterion {
        Criterion::Average => (f64::INFINITY, Comparator::Greater),
        Criterion::Excess { threshold } => (threshold, Comparator::Greater),
    };
    let score = |e: &CodeEvaluation| match criterion {
        Criterion::Average => e.avg_distortion,
        Criterion::Excess { .. } => e.excess_prob,
    };
    let (seqs, words) = (pow(nz, n), pow(nxh, n));
    let (enc_count, dec_count) = (pow(m, seqs), pow(words, m));

    let best = (0..enc_count)
        .into_par_iter()
        .map(|e| {
            let mut encoder = vec![0; seqs];
            digits(e, m, seqs, &mut encoder);
            let mut word_ids = vec![0; m];
            let mut best: Option<(f64, usize, CodeEvaluation)> = None;
            for c in 0..dec_count {
                digits(c, words, m, &mut word_ids);
                let eval =
                    evaluate_indexed(&outs, &table, |z| word_ids[encoder[z]], threshold, cmp);
                let v = score(&eval);
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, e * dec_count + c, eval));
                }
            }
            best.expect("at least one decoder")
        })
        .reduce_with(|a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one encoder");

    let (_, idx, mut eval) = best;
    if let Criterion::Average = criterion {
        eval.threshold = f64::INFINITY;
    }
    let (e, c) = (idx / dec_count, idx % dec_count);
    let mut encoder = vec![0; seqs];
    digits(e, m, seqs, &mut encoder);
    let mut word_ids = vec![0; m];
    digits(c, words, m, &mut word_ids);
    let decoder = word_ids
        .iter()
        .map(|&w| {
            let mut word = vec![0; n];
            digits(w, nxh, n, &mut word);
            word
        })
        .collect();
    Ok((
        BlockCode {
            n,
            m,
            encoder,
            decoder,
        },
        eval,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub d_max: f64,
    /// `(n, sup d_fⁿ)` for each enumerated blocklength.
    pub per_n: Vec<(usize, f64)>,
    /// Bound `Δ` on the n-letter distortion over all blocklengths.
    pub delta: f64,
}

/// Supremum of `d_fⁿ` over all sequence pairs for `n = 1..=n_max`.
///
/// Only the multiset of per-letter distortions matters, so each `n` is
/// enumerated over multisets of distinct matrix entries.
pub fn boundedness_check(
    d: &DistortionMatrix,
    f: &FTransform,
    n_max: usize,
) -> Result<BoundednessReport> {
    f.validate_on(d.max())?;
    let mut values: Vec<f64> = d.values().iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let fv: Vec<f64> = values.iter().map(|&v| f.apply(v)).collect();
    let mut per_n = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut sup = f64::NEG_INFINITY;
        let mut choice = vec![0usize; n];
        // nondecreasing index tuples enumerate multisets
        loop {
            let mean = choice.iter().map(|&i| fv[i]).sum::<f64>() / n as f64;
            sup = sup.max(f.invert(mean)?);
            let Some(pos) = (0..n).rev().find(|&p| choice[p] + 1 < fv.len()) else {
                break;
            };
            let next = choice[pos] + 1;
            choice[pos..].iter_mut().for_each(|c| *c = next);
        }
        per_n.push((n, sup));
    }
    let delta = per_n.iter().map(|p| p.1).fold(d.max(), f64::max);
    Ok(BoundednessReport {
        d_max: d.max(),
        per_n,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<FTransform> {
        vec![
            FTransform::identity(),
            FTransform::sqrt(),
            FTransform::power(2.0).unwrap(),
            FTransform::shifted_cubic(0.4).unwrap(),
            FTransform::exponential(9.2).unwrap(),
            FTransform::tabulated(vec![[0.0, 0.0], [0.5, 0.1], [1.0, 1.0]]).unwrap(),
        ]
    }

    #[test]
    fn identity_code_on_bsc() {
        let beta = 0.15;
        let src = JointSource::binary_symmetric(beta).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        let eval = evaluate_code(
            &src,
            &h,
            &FTransform::identity(),
            &BlockCode::identity(2),
            0.5,
        )
        .unwrap();
        assert!((eval.avg_distortion - beta).abs() < 1e-15);
        assert!((eval.excess_prob - beta).abs() < 1e-15);
        let high = evaluate_code(
            &src,
            &h,
            &FTransform::identity(),
            &BlockCode::identity(2),
            1.5,
        )
        .unwrap();
        assert_eq!(high.excess_prob, 0.0);
    }

    #[test]
    fn constant_decoder_on_fair_bit() {
        let src = JointSource::binary_symmetric(0.3).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        for n in 1..=3 {
            let code = BlockCode::constant(vec![0; n], 2);
            let eval = evaluate_code(&src, &h, &FTransform::identity(), &code, 2.0).unwrap();
            assert!((eval.avg_distortion - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn enumeration_size_guard() {
        let src = JointSource::binary_symmetric(0.1).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        assert!(matches!(
            best_code_search(&src, &h, &FTransform::identity(), 4, 2, Criterion::Average),
            Err(Error::TooLarge { .. })
        ));
        let code = BlockCode::constant(vec![0; 12], 2);
        assert!(matches!(
            evaluate_code(&src, &h, &FTransform::identity(), &code, 0.5),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn code_validation() {
        assert!(BlockCode::new(1, 2, vec![0, 2], vec![vec![0], vec![1]]).is_err());
        assert!(BlockCode::new(1, 2, vec![0, 1], vec![vec![0]]).is_err());
        let src = JointSource::binary_erasure(0.2).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        let code = BlockCode::identity(2);
        assert!(evaluate_code(&src, &h, &FTransform::identity(), &code, 0.5).is_err());
    }

    #[test]
    fn best_code_n1() {
        let src = JointSource::binary_symmetric(0.15).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        let id = FTransform::identity();
        let mut count = 0;
        for_each_code(2, 2, 1, 2, |_, _, _| count += 1).unwrap();
        assert_eq!(count, 16);
        let (code, eval) = best_code_search(&src, &h, &id, 1, 2, Criterion::Average).unwrap();
        assert!((eval.avg_distortion - 0.15).abs() < 1e-15);
        let rebuilt = evaluate_code(&src, &h, &id, &code, f64::INFINITY).unwrap();
        assert_eq!(rebuilt.avg_distortion, eval.avg_distortion);
        let (_, eval) = best_code_search(&src, &h, &id, 1, 1, Criterion::Average).unwrap();
        assert!((eval.avg_distortion - 0.5).abs() < 1e-15);
    }

    #[test]
    fn search_matches_brute_enumeration() {
        let src = JointSource::binary_erasure(0.3).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        let f = FTransform::sqrt();
        let (code, eval) = best_code_search(&src, &h, &f, 1, 2, Criterion::Average).unwrap();
        let mut best = (f64::INFINITY, usize::MAX);
        for_each_code(3, 2, 1, 2, |i, e, dcd| {
            let c = BlockCode::new(1, 2, e.to_vec(), dcd.to_vec()).unwrap();
            let v = evaluate_code(&src, &h, &f, &c, 0.5).unwrap().avg_distortion;
            if v < best.0 {
                best = (v, i);
            }
        })
        .unwrap();
        assert_eq!(eval.avg_distortion, best.0);
        assert_eq!(
            evaluate_code(&src, &h, &f, &code, 0.5)
                .unwrap()
                .avg_distortion,
            best.0
        );
    }

    #[test]
    fn more_messages_never_hurt() {
        let src = JointSource::binary_symmetric(0.1).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        for f in [FTransform::identity(), FTransform::power(2.0).unwrap()] {
            for n in 1..=2 {
                let mut prev_avg = f64::INFINITY;
                let mut prev_excess = f64::INFINITY;
                for m in 1..=3 {
                    if code_count(2, 2, n, m) > ENUMERATION_LIMIT {
                        continue;
                    }
                    let (_, a) = best_code_search(&src, &h, &f, n, m, Criterion::Average).unwrap();
                    let (_, e) =
                        best_code_search(&src, &h, &f, n, m, Criterion::Excess { threshold: 0.3 })
                            .unwrap();
                    assert!(a.avg_distortion <= prev_avg + 1e-15);
                    assert!(e.excess_prob <= prev_excess + 1e-15);
                    prev_avg = a.avg_distortion;
                    prev_excess = e.excess_prob;
                }
            }
        }
    }

    #[test]
    fn excess_event_identity_exhaustive_small() {
        let src = JointSource::binary_symmetric(0.15).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        let gamma = 0.01;
        for f in families() {
            for n in 1..=3 {
                let m = 2;
                let stride = if n == 3 { 211 } else { 1 };
                for_each_code(2, 2, n, m, |i, e, dcd| {
                    if i % stride != 0 {
                        return;
                    }
                    let code = BlockCode::new(n, m, e.to_vec(), dcd.to_vec()).unwrap();
                    for j in 0..20 {
                        let t = (j as f64 + 0.5) / 20.0;
                        for cmp in [Comparator::Greater, Comparator::GreaterEq] {
                            let r =
                                excess_event_equivalence_check(&src, &h, &f, &code, t, gamma, cmp)
                                    .unwrap();
                            assert!(r.equal, "{f} n={n} t={t} {r:?}");
                        }
                    }
                })
                .unwrap();
            }
        }
    }

    #[test]
    fn sampled_evaluation_tracks_exact() {
        let src = JointSource::binary_symmetric(0.2).unwrap();
        let h = DistortionMatrix::hamming(2, 2);
        let f = FTransform::sqrt();
        let code = BlockCode::new(2, 2, vec![0, 1, 1, 1], vec![vec![0, 0], vec![1, 1]]).unwrap();
        let exact = evaluate_code(&src, &h, &f, &code, 0.3).unwrap();
        let est = evaluate_code_sampled(&src, &h, &f, &code, 0.3, 200_000, 7).unwrap();
        assert!((exact.avg_distortion - est.avg_distortion).abs() < 5e-3);
        assert!((exact.excess_prob - est.excess_prob).abs() < 5e-3);
        let again = evaluate_code_sampled(&src, &h, &f, &code, 0.3, 200_000, 7).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn boundedness_examples() {
        let h = DistortionMatrix::hamming(2, 2);
        for f in families() {
            let r = boundedness_check(&h, &f, 6).unwrap();
            assert!((r.delta - 1.0).abs() < 1e-10, "{f}");
        }
        let scaled = h.scaled(3.0).unwrap();
        let r = boundedness_check(&scaled, &FTransform::sqrt(), 4).unwrap();
        assert!((r.delta - 3.0).abs() < 1e-12);
        let table = FTransform::tabulated(vec![[0.0, 0.0], [1.0, 0.5], [2.5, 4.0]]).unwrap();
        let d = DistortionMatrix::new(vec![vec![0.0, 2.5, 1.0], vec![1.0, 0.0, 2.0]]).unwrap();
        let r = boundedness_check(&d, &table, 5).unwrap();
        assert!((r.delta - 2.5).abs() < 1e-10);
        assert_eq!(r.per_n.len(), 5);
    }
}
