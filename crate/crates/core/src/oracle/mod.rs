//! Sources of Monte-Carlo calibration bits.
//!
//! Every stream yields i.i.d. Bernoulli(`p*`) indicators `1{T(Y) >= T(x)}`
//! and can be checkpointed into a [`SampleState`] and resumed bit-for-bit.
//! Streams are single-owner state machines; a saved state is a plain value.

mod permutation;
mod rng;
mod scan;
mod scripted;
mod synthetic;

pub use permutation::{
    exact_permutation_pvalue, ExactPValue, PermutationDataset, PermutationStream, DEFAULT_ENUMERATION_CAP,
};
pub use rng::{derive_seed, StreamRng, RNG_ALGORITHM};
pub use scan::{sample_poisson, scan_statistic, ScanProblem, ScanStream, MAX_MU0};
pub use scripted::ScriptedStream;
pub use synthetic::SyntheticStream;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Which concrete stream a [`SampleState`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Synthetic,
    Permutation,
    Scan,
    Scripted,
}

impl std::fmt::Display for StreamKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StreamKind::Synthetic => "synthetic",
            StreamKind::Permutation => "permutation",
            StreamKind::Scan => "scan",
            StreamKind::Scripted => "scripted",
        };
        f.write_str(s)
    }
}

/// Serializable checkpoint of a stream: the sufficient statistic `(n, s)`
/// plus the generator position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleState {
    pub stream_kind: StreamKind,
    pub rng_algorithm: String,
    pub master_seed: u64,
    pub n: u64,
    pub s: u64,
    /// Hex-encoded generator state.
    pub rng_state: String,
    /// Hex SHA-256 of the problem instance the stream was built for.
    pub problem_digest: String,
}

impl SampleState {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: SampleState = serde_json::from_str(text)?;
        if state.s > state.n {
            return Err(Error::State(format!("corrupted state: s={} > n={}", state.s, state.n)));
        }
        Ok(state)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks kind and digest before a stream adopts this state.
    pub(crate) fn check(&self, kind: StreamKind, digest: &str) -> Result<()> {
        if self.stream_kind != kind {
            return Err(Error::State(format!(
                "state belongs to a {} stream, not {}",
                self.stream_kind, kind
            )));
        }
        if self.problem_digest != digest {
            return Err(Error::State("state was saved for a different problem instance".into()));
        }
        if self.s > self.n {
            return Err(Error::State(format!("corrupted state: s={} > n={}", self.s, self.n)));
        }
        Ok(())
    }
}

/// A resumable source of calibration bits.
pub trait OracleStream {
    /// Draws the next indicator.
    fn next_bit(&mut self) -> bool;
    /// Number of bits drawn so far.
    fn draws(&self) -> u64;
    /// Number of ones drawn so far.
    fn ones(&self) -> u64;
    fn kind(&self) -> StreamKind;
    fn save_state(&self) -> SampleState;
}

impl<T: OracleStream + ?Sized> OracleStream for Box<T> {
    fn next_bit(&mut self) -> bool {
        (**self).next_bit()
    }
    fn draws(&self) -> u64 {
        (**self).draws()
    }
    fn ones(&self) -> u64 {
        (**self).ones()
    }
    fn kind(&self) -> StreamKind {
        (**self).kind()
    }
    fn save_state(&self) -> SampleState {
        (**self).save_state()
    }
}

/// A problem instance from which streams are opened or resumed.
#[derive(Debug, Clone)]
pub enum StreamSource {
    Synthetic { p_true: f64 },
    Permutation(PermutationDataset),
    Scan(ScanProblem),
}

impl StreamSource {
    pub fn open(&self, seed: u64) -> Result<Box<dyn OracleStream + Send>> {
        Ok(match self {
            StreamSource::Synthetic { p_true } => Box::new(SyntheticStream::new(*p_true, seed)?),
            StreamSource::Permutation(data) => Box::new(PermutationStream::new(data.clone(), seed)),
            StreamSource::Scan(problem) => Box::new(ScanStream::new(problem.clone(), seed)?),
        })
    }

    pub fn resume(&self, state: &SampleState) -> Result<Box<dyn OracleStream + Send>> {
        Ok(match self {
            StreamSource::Synthetic { p_true } => Box::new(SyntheticStream::load(state, *p_true)?),
            StreamSource::Permutation(data) => Box::new(PermutationStream::load(state, data.clone())?),
            StreamSource::Scan(problem) => Box::new(ScanStream::load(state, problem.clone())?),
        })
    }
}

pub(crate) fn digest_hex(tag: &str, words: impl IntoIterator<Item = u64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    for w in words {
        hasher.update(w.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_json_roundtrip_and_corruption() {
        let stream = SyntheticStream::new(0.3, 9).unwrap();
        let state = stream.save_state();
        let text = state.to_json().unwrap();
        assert!(text.contains("\"stream_kind\": \"synthetic\""));
        assert!(text.contains(RNG_ALGORITHM));
        assert_eq!(SampleState::from_json(&text).unwrap(), state);
        let bad = text.replace("\"s\": 0", "\"s\": 5");
        assert!(SampleState::from_json(&bad).is_err());
    }

    #[test]
    fn source_resume_dispatch() {
        let src = StreamSource::Synthetic { p_true: 0.4 };
        let mut a = src.open(3).unwrap();
        for _ in 0..10 {
            a.next_bit();
        }
        let mut b = src.resume(&a.save_state()).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_bit(), b.next_bit());
        }
        let other = StreamSource::Synthetic { p_true: 0.5 };
        assert!(other.resume(&a.save_state()).is_err());
    }
}
