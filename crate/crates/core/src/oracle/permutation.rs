use super::{digest_hex, rng::StreamRng, OracleStream, SampleState, StreamKind, RNG_ALGORITHM};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

/// Default maximum number of splits [`exact_permutation_pvalue`] will visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

const PLANT_GROWTH_CSV: &str = include_str!("../../data/plant_growth_ctrl_trt2.csv");

/// Two-sample data for a label-permutation test of
/// `T = mean(group_b) - mean(group_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationDataset {
    group_a: Vec<f64>,
    group_b: Vec<f64>,
}

impl PermutationDataset {
    pub fn new(group_a: Vec<f64>, group_b: Vec<f64>) -> Result<Self> {
        if group_a.is_empty() || group_b.is_empty() {
            return Err(Error::Dataset("both groups must be non-empty".into()));
        }
        if group_a.iter().chain(&group_b).any(|x| !x.is_finite()) {
            return Err(Error::Dataset("all values must be finite".into()));
        }
        Ok(PermutationDataset { group_a, group_b })
    }

    /// Control (`ctrl`) versus treatment 2 (`trt2`) dried plant weights.
    pub fn plant_growth() -> Self {
        Self::from_csv_reader(PLANT_GROWTH_CSV.as_bytes()).expect("bundled dataset parses")
    }

    /// Reads `group_label,value` rows. The first label seen becomes
    /// `group_a`; exactly two labels are allowed. A header row is skipped
    /// when its value column is not numeric.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut labels: Vec<String> = Vec::new();
        let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Dataset(format!(
                    "row {} has {} columns, expected 2",
                    i + 1,
                    record.len()
                )));
            }
            let value: f64 = match record[1].parse() {
                Ok(v) => v,
                Err(_) if i == 0 => continue,
                Err(_) => return Err(Error::Dataset(format!("row {}: bad value {:?}", i + 1, &record[1]))),
            };
            let label = record[0].to_string();
            let idx = match labels.iter().position(|l| *l == label) {
                Some(idx) => idx,
                None if labels.len() < 2 => {
                    labels.push(label);
                    labels.len() - 1
                }
                None => return Err(Error::Dataset(format!("more than two group labels (found {label:?})"))),
            };
            groups[idx].push(value);
        }
        let [a, b] = groups;
        Self::new(a, b)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn group_a(&self) -> &[f64] {
        &self.group_a
    }

    pub fn group_b(&self) -> &[f64] {
        &self.group_b
    }

    pub fn len(&self) -> usize {
        self.group_a.len() + self.group_b.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `mean(group_b) - mean(group_a)`.
    pub fn statistic(&self) -> f64 {
        mean(&self.group_b) - mean(&self.group_a)
    }

    fn pooled(&self) -> Vec<f64> {
        self.group_a.iter().chain(&self.group_b).copied().collect()
    }

    // For fixed group sizes the statistic is strictly increasing in the sum
    // of group b, so splits are compared through that sum.
    fn observed_b_sum(&self) -> f64 {
        self.group_b.iter().sum()
    }

    /// Absolute slack under which two group-b sums count as tied.
    fn tie_slack(&self) -> f64 {
        1e-9 * self
            .group_a
            .iter()
            .chain(&self.group_b)
            .map(|x| x.abs())
            .sum::<f64>()
            .max(1.0)
    }

    fn digest(&self) -> String {
        let words = [self.group_a.len() as u64, self.group_b.len() as u64]
            .into_iter()
            .chain(self.group_a.iter().chain(&self.group_b).map(|x| x.to_bits()));
        digest_hex("permutation", words)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Result of complete enumeration of group-size-preserving splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactPValue {
    pub extreme: u128,
    pub total: u128,
    pub p_value: f64,
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(c)
}

/// Exact permutation p-value `P(T(relabelled) >= T(observed))` by visiting
/// every split; refuses when there are more than `cap` splits.
pub fn exact_permutation_pvalue(data: &PermutationDataset, cap: u128) -> Result<ExactPValue> {
    let n = data.len() as u64;
    let k = data.group_b.len() as u64;
    let total = binomial_u128(n, k).unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::EnumerationCap { splits: total, cap });
    }
    let pooled = data.pooled();
    let threshold = data.observed_b_sum() - data.tie_slack();
    let mut extreme: u128 = 0;
    let mut visited: u128 = 0;
    enumerate(&pooled, 0, k as usize, 0.0, threshold, &mut extreme, &mut visited);
    debug_assert_eq!(visited, total);
    Ok(ExactPValue {
        extreme,
        total,
        p_value: extreme as f64 / total as f64,
    })
}

fn enumerate(
    values: &[f64],
    start: usize,
    remaining: usize,
    sum: f64,
    threshold: f64,
    extreme: &mut u128,
    visited: &mut u128,
) {
    if remaining == 0 {
        *visited += 1;
        if sum >= threshold {
            *extreme += 1;
        }
        return;
    }
    for i in start..=values.len() - remaining {
        enumerate(
            values,
            i + 1,
            remaining - 1,
            sum + values[i],
            threshold,
            extreme,
            visited,
        );
    }
}

/// Bits `1{T(random relabelling) >= T(observed)}` with relabellings drawn
/// uniformly among those preserving both group sizes.
#[derive(Debug, Clone)]
pub struct PermutationStream {
    data: PermutationDataset,
    pooled: Vec<f64>,
    index: Vec<usize>,
    threshold: f64,
    master_seed: u64,
    rng: StreamRng,
    n: u64,
    s: u64,
}

impl PermutationStream {
    pub fn new(data: PermutationDataset, seed: u64) -> Self {
        let pooled = data.pooled();
        let threshold = data.observed_b_sum() - data.tie_slack();
        PermutationStream {
            index: (0..pooled.len()).collect(),
            pooled,
            threshold,
            data,
            master_seed: seed,
            rng: StreamRng::from_seed(seed),
            n: 0,
            s: 0,
        }
    }

    pub fn load(state: &SampleState, data: PermutationDataset) -> Result<Self> {
        let mut stream = Self::new(data, state.master_seed);
        state.check(StreamKind::Permutation, &stream.data.digest())?;
        if state.rng_algorithm != RNG_ALGORITHM {
            return Err(Error::State(format!("unsupported rng {}", state.rng_algorithm)));
        }
        stream.rng = StreamRng::from_hex(&state.rng_state)?;
        stream.n = state.n;
        stream.s = state.s;
        Ok(stream)
    }

    pub fn dataset(&self) -> &PermutationDataset {
        &self.data
    }
}

impl OracleStream for PermutationStream {
    fn next_bit(&mut self) -> bool {
        // Partial Fisher-Yates from the identity so each draw depends only
        // on the generator position.
        let total = self.pooled.len();
        for (i, slot) in self.index.iter_mut().enumerate() {
            *slot = i;
        }
        let mut sum_b = 0.0;
        for i in 0..self.data.group_b.len() {
            let j = self.rng.below(i, total);
            self.index.swap(i, j);
            sum_b += self.pooled[self.index[i]];
        }
        let bit = sum_b >= self.threshold;
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
        StreamKind::Permutation
    }

    fn save_state(&self) -> SampleState {
        SampleState {
            stream_kind: StreamKind::Permutation,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            master_seed: self.master_seed,
            n: self.n,
            s: self.s,
            rng_state: self.rng.to_hex(),
            problem_digest: self.data.digest(),
        }
    }
}
