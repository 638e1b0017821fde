//! Finite-alphabet memoryless remote sources.
//!
//! A [`JointSource`] holds `p(x, z)` indexed `[x][z]`. Observation symbols
//! with `p(z) = 0` stay in the alphabet; their posterior column is reported
//! as unused and every expectation skips them.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distortion::{DistortionMatrix, DistortionSpec, FTransform};
use crate::error::{Error, Result};

/// Input tolerance on probability sums.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidAlphabet(
                "alphabet must have at least one symbol".into(),
            ));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidAlphabet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Alphabet `{"0", "1", ..., "size-1"}`.
    pub fn numbered(size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| i.to_string()))
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        Alphabet::new(labels)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

fn check_probabilities(what: &str, values: &[f64]) -> Result<f64> {
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeProbability {
                what: what.into(),
                value: v,
            });
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::NonStochastic {
            what: what.into(),
            sum,
        });
    }
    Ok(sum)
}

fn normalized(values: &[f64], sum: f64) -> Vec<f64> {
    values.iter().map(|v| v / sum).collect()
}

/// Joint law `p(x, z)` of a remote source and its noisy observation.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    x_alphabet: Alphabet,
    z_alphabet: Alphabet,
    joint: Vec<Vec<f64>>,
    pz: Vec<f64>,
}

/// Posterior `p(x|z)`. Column `z` is `None` when `p(z) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    columns: Vec<Option<Vec<f64>>>,
}

impl Posterior {
    /// `p(x|z)`, or `None` for an unused observation symbol.
    pub fn get(&self, x: usize, z: usize) -> Option<f64> {
        self.columns[z].as_ref().map(|c| c[x])
    }

    pub fn column(&self, z: usize) -> Option<&[f64]> {
        self.columns[z].as_deref()
    }

    pub fn is_used(&self, z: usize) -> bool {
        self.columns[z].is_some()
    }

    pub fn z_size(&self) -> usize {
        self.columns.len()
    }
}

impl JointSource {
    /// Builds the source from a joint matrix indexed `[x][z]`.
    pub fn from_joint(joint: Vec<Vec<f64>>) -> Result<Self> {
        let nx = joint.len();
        let nz = joint.first().map_or(0, Vec::len);
        Self::with_alphabets(Alphabet::numbered(nx)?, Alphabet::numbered(nz)?, joint)
    }

    pub fn with_alphabets(
        x_alphabet: Alphabet,
        z_alphabet: Alphabet,
        joint: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if joint.len() != x_alphabet.size() {
            return Err(Error::Dimension(format!(
                "joint has {} rows, x alphabet has {} symbols",
                joint.len(),
                x_alphabet.size()
            )));
        }
        if joint.iter().any(|row| row.len() != z_alphabet.size()) {
            return Err(Error::Dimension(format!(
                "every joint row must have {} entries",
                z_alphabet.size()
            )));
        }
        let flat: Vec<f64> = joint.iter().flatten().copied().collect();
        let sum = check_probabilities("joint distribution", &flat)?;
        let joint: Vec<Vec<f64>> = joint.iter().map(|row| normalized(row, sum)).collect();
        let pz = (0..z_alphabet.size())
            .map(|z| joint.iter().map(|row| row[z]).sum())
            .collect();
        Ok(Self {
            x_alphabet,
            z_alphabet,
            joint,
            pz,
        })
    }

    /// `joint[x][z] = prior[x] * channel[x][z]` with default numbered labels.
    pub fn from_prior_and_channel(prior: &[f64], channel: &[Vec<f64>]) -> Result<Self> {
        let nz = channel.first().map_or(0, Vec::len);
        Self::from_prior_and_channel_labeled(
            Alphabet::numbered(prior.len())?,
            Alphabet::numbered(nz)?,
            prior,
            channel,
        )
    }

    pub fn from_prior_and_channel_labeled(
        x_alphabet: Alphabet,
        z_alphabet: Alphabet,
        prior: &[f64],
        channel: &[Vec<f64>],
    ) -> Result<Self> {
        if prior.len() != channel.len() {
            return Err(Error::Dimension(format!(
                "prior has {} entries, channel has {} rows",
                prior.len(),
                channel.len()
            )));
        }
        let prior_sum = check_probabilities("prior", prior)?;
        let prior = normalized(prior, prior_sum);
        let mut joint = Vec::with_capacity(prior.len());
        for (x, row) in channel.iter().enumerate() {
            if row.len() != z_alphabet.size() {
                return Err(Error::Dimension(format!(
                    "channel row {x} has {} entries, z alphabet has {} symbols",
                    row.len(),
                    z_alphabet.size()
                )));
            }
            let row_sum = check_probabilities(&format!("channel row {x}"), row)?;
            joint.push(row.iter().map(|p| prior[x] * p / row_sum).collect());
        }
        Self::with_alphabets(x_alphabet, z_alphabet, joint)
    }

    /// Uniform bit observed through a binary symmetric channel with crossover `beta`.
    pub fn binary_symmetric(beta: f64) -> Result<Self> {
        Self::from_prior_and_channel_labeled(
            Alphabet::new(["0", "1"])?,
            Alphabet::new(["0", "1"])?,
            &[0.5, 0.5],
            &[vec![1.0 - beta, beta], vec![beta, 1.0 - beta]],
        )
    }

    /// Uniform bit observed through a binary erasure channel with erasure probability `delta`.
    pub fn binary_erasure(delta: f64) -> Result<Self> {
        Self::from_prior_and_channel_labeled(
            Alphabet::new(["0", "1"])?,
            Alphabet::new(["0", "e", "1"])?,
            &[0.5, 0.5],
            &[vec![1.0 - delta, delta, 0.0], vec![0.0, delta, 1.0 - delta]],
        )
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn z_alphabet(&self) -> &Alphabet {
        &self.z_alphabet
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn z_marginal(&self) -> &[f64] {
        &self.pz
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        self.joint.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn posterior(&self) -> Posterior {
        let columns = self
            .pz
            .iter()
            .enumerate()
            .map(|(z, &pz)| (pz > 0.0).then(|| self.joint.iter().map(|row| row[z] / pz).collect()))
            .collect();
        Posterior { columns }
    }
}

/// On-disk description of a problem instance.
///
/// Exactly one of `prior` + `channel` or `joint` must be present. The
/// reconstruction alphabet defaults to the source alphabet and the
/// distortion to Hamming.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub x_alphabet: Alphabet,
    pub z_alphabet: Alphabet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xhat_alphabet: Option<Alphabet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FTransform>,
}

impl SourceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn source(&self) -> Result<JointSource> {
        match (&self.prior, &self.channel, &self.joint) {
            (Some(prior), Some(channel), None) => JointSource::from_prior_and_channel_labeled(
                self.x_alphabet.clone(),
                self.z_alphabet.clone(),
                prior,
                channel,
            ),
            (None, None, Some(joint)) => JointSource::with_alphabets(
                self.x_alphabet.clone(),
                self.z_alphabet.clone(),
                joint.clone(),
            ),
            _ => Err(Error::Config(
                "source file needs exactly one of prior+channel or joint".into(),
            )),
        }
    }

    pub fn xhat_alphabet(&self) -> Alphabet {
        self.xhat_alphabet
            .clone()
            .unwrap_or_else(|| self.x_alphabet.clone())
    }

    pub fn distortion(&self) -> Result<DistortionMatrix> {
        let spec = self.distortion.clone().unwrap_or(DistortionSpec::Hamming);
        spec.build(self.x_alphabet.size(), self.xhat_alphabet().size())
    }
}
