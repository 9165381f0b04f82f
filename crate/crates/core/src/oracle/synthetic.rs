use super::{digest_hex, rng::StreamRng, OracleStream, SampleState, StreamKind, RNG_ALGORITHM};
use crate::error::{domain, Result};

/// Bernoulli(`p_true`) bits with a known success probability.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    p_true: f64,
    master_seed: u64,
    rng: StreamRng,
    n: u64,
    s: u64,
}

impl SyntheticStream {
    pub fn new(p_true: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_true) {
            return domain(format!("p_true must lie in [0, 1], got {p_true}"));
        }
        Ok(SyntheticStream {
            p_true,
            master_seed: seed,
            rng: StreamRng::from_seed(seed),
            n: 0,
            s: 0,
        })
    }

    pub fn p_true(&self) -> f64 {
        self.p_true
    }

    fn digest(p_true: f64) -> String {
        digest_hex("synthetic", [p_true.to_bits()])
    }

    pub fn load(state: &SampleState, p_true: f64) -> Result<Self> {
        let mut stream = Self::new(p_true, state.master_seed)?;
        state.check(StreamKind::Synthetic, &Self::digest(p_true))?;
        if state.rng_algorithm != RNG_ALGORITHM {
            return Err(crate::Error::State(format!("unsupported rng {}", state.rng_algorithm)));
        }
        stream.rng = StreamRng::from_hex(&state.rng_state)?;
        stream.n = state.n;
        stream.s = state.s;
        Ok(stream)
    }
}

impl OracleStream for SyntheticStream {
    fn next_bit(&mut self) -> bool {
        let bit = self.rng.uniform() < self.p_true;
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
        StreamKind::Synthetic
    }

    fn save_state(&self) -> SampleState {
        SampleState {
            stream_kind: StreamKind::Synthetic,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            master_seed: self.master_seed,
            n: self.n,
            s: self.s,
            rng_state: self.rng.to_hex(),
            problem_digest: Self::digest(self.p_true),
        }
    }
}
