use super::{digest_hex, OracleStream, SampleState, StreamKind};
use crate::error::{domain, Error, Result};

/// Replays a fixed bit pattern, cycling when it runs out.
#[derive(Debug, Clone)]
pub struct ScriptedStream {
    pattern: Vec<bool>,
    n: u64,
    s: u64,
}

impl ScriptedStream {
    pub fn cycle(pattern: Vec<bool>) -> Result<Self> {
        if pattern.is_empty() {
            return domain("scripted pattern must be non-empty");
        }
        Ok(ScriptedStream { pattern, n: 0, s: 0 })
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let pattern = bits
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Domain(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::cycle(pattern)
    }

    pub fn zeros() -> Self {
        ScriptedStream {
            pattern: vec![false],
            n: 0,
            s: 0,
        }
    }

    pub fn ones_only() -> Self {
        ScriptedStream {
            pattern: vec![true],
            n: 0,
            s: 0,
        }
    }

    fn digest(&self) -> String {
        digest_hex("scripted", self.pattern.iter().map(|&b| b as u64))
    }

    pub fn load(state: &SampleState, pattern: Vec<bool>) -> Result<Self> {
        let mut stream = Self::cycle(pattern)?;
        state.check(StreamKind::Scripted, &stream.digest())?;
        stream.n = state.n;
        stream.s = state.s;
        Ok(stream)
    }
}

impl OracleStream for ScriptedStream {
    fn next_bit(&mut self) -> bool {
        let bit = self.pattern[(self.n % self.pattern.len() as u64) as usize];
        self.n += 1;
        self.s += bit as u64;
        bit
    }

    fn draws(&self) -> u64 {
        self.n
    }

    fn ones(&self) -> u64 {
        self.s
    }

    fn kind(&self) -> StreamKind {
        StreamKind::Scripted
    }

    fn save_state(&self) -> SampleState {
        SampleState {
            stream_kind: StreamKind::Scripted,
            rng_algorithm: "none".to_string(),
            master_seed: 0,
            n: self.n,
            s: self.s,
            rng_state: hex::encode(self.n.to_le_bytes()),
            problem_digest: self.digest(),
        }
    }
}
