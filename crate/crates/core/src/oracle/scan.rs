use super::{digest_hex, rng::StreamRng, OracleStream, SampleState, StreamKind, RNG_ALGORITHM};
use crate::error::{domain, Error, Result};
use rand_distr::{Distribution, Poisson};

/// Largest null mean accepted by the scan demo.
pub const MAX_MU0: f64 = 1e4;

/// Below this mean Poisson draws use plain inversion.
const INVERSION_LIMIT: f64 = 30.0;

/// Counts over a 1-D grid of cells, a null Poisson mean per cell and the
/// collection of windows scanned.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanProblem {
    observed_counts: Vec<u64>,
    mu0: f64,
    windows: Vec<Vec<usize>>,
}

impl ScanProblem {
    pub fn new(observed_counts: Vec<u64>, mu0: f64, windows: Vec<Vec<usize>>) -> Result<Self> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return domain(format!("mu0 must be positive, got {mu0}"));
        }
        if mu0 > MAX_MU0 {
            return domain(format!("mu0={mu0} exceeds the supported maximum {MAX_MU0}"));
        }
        if windows.is_empty() {
            return domain("scan needs at least one window");
        }
        for w in &windows {
            if w.is_empty() {
                return domain("scan windows must be non-empty");
            }
            if let Some(&bad) = w.iter().find(|&&i| i >= observed_counts.len()) {
                return domain(format!("window index {bad} outside {} cells", observed_counts.len()));
            }
        }
        Ok(ScanProblem {
            observed_counts,
            mu0,
            windows,
        })
    }

    /// All contiguous windows with length in `min_len..=max_len`.
    pub fn contiguous(observed_counts: Vec<u64>, mu0: f64, min_len: usize, max_len: usize) -> Result<Self> {
        let cells = observed_counts.len();
        let min_len = min_len.max(1);
        let max_len = max_len.min(cells);
        let mut windows = Vec::new();
        for len in min_len..=max_len {
            for start in 0..=cells - len {
                windows.push((start..start + len).collect());
            }
        }
        Self::new(observed_counts, mu0, windows)
    }

    pub fn observed_counts(&self) -> &[u64] {
        &self.observed_counts
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn windows(&self) -> &[Vec<usize>] {
        &self.windows
    }

    fn statistic_of(&self, counts: &[u64]) -> f64 {
        self.windows
            .iter()
            .map(|w| {
                let sum: u64 = w.iter().map(|&i| counts[i]).sum();
                let size = w.len() as f64;
                (sum as f64 - size * self.mu0) / size.sqrt()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn digest(&self) -> String {
        let mut words = vec![self.observed_counts.len() as u64];
        words.extend(&self.observed_counts);
        words.push(self.mu0.to_bits());
        for w in &self.windows {
            words.push(w.len() as u64);
            words.extend(w.iter().map(|&i| i as u64));
        }
        digest_hex("scan", words)
    }
}

/// `max_A (sum_{i in A} x_i - |A| mu0) / sqrt(|A|)` over the problem's windows.
pub fn scan_statistic(problem: &ScanProblem) -> Result<f64> {
    if problem.windows.is_empty() {
        return domain("scan needs at least one window");
    }
    Ok(problem.statistic_of(&problem.observed_counts))
}

/// One Poisson(`mu`) draw: inversion for small means, `rand_distr` above.
pub fn sample_poisson(rng: &mut StreamRng, mu: f64) -> u64 {
    if mu <= INVERSION_LIMIT {
        let u = rng.uniform();
        let mut k = 0u64;
        let mut pmf = (-mu).exp();
        let mut cdf = pmf;
        while u >= cdf {
            k += 1;
            pmf *= mu / k as f64;
            if pmf == 0.0 {
                break;
            }
            cdf += pmf;
        }
        k
    } else {
        let dist = Poisson::new(mu).expect("validated mean");
        dist.sample(rng.inner_mut()) as u64
    }
}

/// Bits `1{S(Y) >= S(x)}` for fields `Y` of i.i.d. Poisson(`mu0`) counts.
#[derive(Debug, Clone)]
pub struct ScanStream {
    problem: ScanProblem,
    observed: f64,
    field: Vec<u64>,
    master_seed: u64,
    rng: StreamRng,
    n: u64,
    s: u64,
}

impl ScanStream {
    pub fn new(problem: ScanProblem, seed: u64) -> Result<Self> {
        let observed = scan_statistic(&problem)?;
        Ok(ScanStream {
            field: vec![0; problem.observed_counts.len()],
            observed,
            problem,
            master_seed: seed,
            rng: StreamRng::from_seed(seed),
            n: 0,
            s: 0,
        })
    }

    pub fn load(state: &SampleState, problem: ScanProblem) -> Result<Self> {
        let mut stream = Self::new(problem, state.master_seed)?;
        state.check(StreamKind::Scan, &stream.problem.digest())?;
        if state.rng_algorithm != RNG_ALGORITHM {
            return Err(Error::State(format!("unsupported rng {}", state.rng_algorithm)));
        }
        stream.rng = StreamRng::from_hex(&state.rng_state)?;
        stream.n = state.n;
        stream.s = state.s;
        Ok(stream)
    }

    pub fn observed_statistic(&self) -> f64 {
        self.observed
    }
}

impl OracleStream for ScanStream {
    fn next_bit(&mut self) -> bool {
        for cell in self.field.iter_mut() {
            *cell = sample_poisson(&mut self.rng, self.problem.mu0);
        }
        let bit = self.problem.statistic_of(&self.field) >= self.observed;
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
        StreamKind::Scan
    }

    fn save_state(&self) -> SampleState {
        SampleState {
            stream_kind: StreamKind::Scan,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            master_seed: self.master_seed,
            n: self.n,
            s: self.s,
            rng_state: self.rng.to_hex(),
            problem_digest: self.problem.digest(),
        }
    }
}
