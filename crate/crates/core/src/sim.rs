//! Synthetic chain datasets with optional confounders, order-error metrics,
//! and the trial harness that drives them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Method, SearchConfig};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::search::run_order;

/// Structural-noise family for the chain equations. Both are zero-mean;
/// non-Gaussianity is what makes the order identifiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    /// Uniform on [-scale, scale].
    Uniform,
    /// Laplace with the given scale parameter.
    Laplace,
}

impl NoiseFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseFamily::Uniform => "uniform",
            NoiseFamily::Laplace => "laplace",
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, scale: f64) -> f64 {
        match self {
            NoiseFamily::Uniform => scale * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::Laplace => {
                let u = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NoiseFamily::Uniform),
            "laplace" => Ok(NoiseFamily::Laplace),
            other => Err(Error::InvalidInput(format!(
                "unknown noise family '{other}' (expected uniform or laplace)"
            ))),
        }
    }
}

/// One latent confounder: `scale * f` with `f ~ 2U(0,1) - 1`, added to the
/// structural equations of both named variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confounder {
    pub first: usize,
    pub second: usize,
    pub scale: f64,
}

impl Confounder {
    pub fn new(first: usize, second: usize, scale: f64) -> Self {
        Self { first, second, scale }
    }
}

/// Named confounder layouts used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfounderPreset {
    None,
    /// Two confounders on a 6-variable chain: {x2,x3} and {x4,x5}.
    P6,
    /// Four confounders on a 15-variable chain.
    P15,
    /// Eight confounders on a 30-variable chain.
    P30,
}

impl ConfounderPreset {
    pub fn confounders(&self) -> Vec<Confounder> {
        let pairs: &[(usize, usize)] = match self {
            ConfounderPreset::None => &[],
            ConfounderPreset::P6 => &[(2, 3), (4, 5)],
            ConfounderPreset::P15 => &[(2, 3), (5, 6), (8, 9), (12, 13)],
            ConfounderPreset::P30 => &[
                (1, 2),
                (5, 6),
                (8, 9),
                (10, 11),
                (13, 14),
                (15, 16),
                (20, 21),
                (25, 26),
            ],
        };
        pairs.iter().map(|&(i, j)| Confounder::new(i, j, 1.0)).collect()
    }

    /// Smallest chain the preset fits on.
    pub fn min_p(&self) -> usize {
        self.confounders().iter().map(|c| c.second + 1).max().unwrap_or(2)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ConfounderPreset::None => "none",
            ConfounderPreset::P6 => "p6",
            ConfounderPreset::P15 => "p15",
            ConfounderPreset::P30 => "p30",
        }
    }
}

impl fmt::Display for ConfounderPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfounderPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ConfounderPreset::None),
            "p6" => Ok(ConfounderPreset::P6),
            "p15" => Ok(ConfounderPreset::P15),
            "p30" => Ok(ConfounderPreset::P30),
            other => Err(Error::InvalidInput(format!(
                "unknown preset '{other}' (expected none, p6, p15, or p30)"
            ))),
        }
    }
}

/// Full description of one synthetic chain dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub p: usize,
    pub n: usize,
    pub noise_scale: f64,
    pub confounders: Vec<Confounder>,
    pub seed: u64,
    pub noise_family: NoiseFamily,
}

impl ChainSpec {
    pub fn new(p: usize, n: usize, seed: u64) -> Self {
        Self {
            p,
            n,
            noise_scale: 1.0,
            confounders: Vec::new(),
            seed,
            noise_family: NoiseFamily::Uniform,
        }
    }

    pub fn with_preset(mut self, preset: ConfounderPreset) -> Self {
        self.confounders = preset.confounders();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidInput(format!("chain needs p >= 2, got {}", self.p)));
        }
        if self.n < 10 {
            return Err(Error::InvalidInput(format!("chain needs n >= 10, got {}", self.n)));
        }
        if self.noise_scale.is_nan() || self.noise_scale <= 0.0 {
            return Err(Error::InvalidInput("noise scale must be positive".into()));
        }
        for c in &self.confounders {
            if c.first >= c.second || c.second >= self.p {
                return Err(Error::InvalidInput(format!(
                    "confounder positions must satisfy 0 <= i < j < p, got ({}, {}) with p = {}",
                    c.first, c.second, self.p
                )));
            }
            if c.scale.is_nan() || c.scale <= 0.0 {
                return Err(Error::InvalidInput("confounder scale must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Generate the chain `X_0 = e_0`, `X_i = X_{i-1} + e_i`, with each
/// confounder adding `scale * f` (one draw of `2U(0,1) - 1` per sample) to
/// the structural equations of both its variables, so the disturbance
/// propagates downstream through the chain. Returns the data and the true
/// causal order `(0, 1, ..., p-1)`. Deterministic given the seed.
pub fn generate_chain(spec: &ChainSpec) -> Result<(DataMatrix, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<Vec<f64>> = (0..spec.p)
        .map(|_| (0..spec.n).map(|_| spec.noise_family.sample(&mut rng, spec.noise_scale)).collect())
        .collect();
    let latents: Vec<Vec<f64>> = spec
        .confounders
        .iter()
        .map(|_| (0..spec.n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(spec.p);
    for i in 0..spec.p {
        let mut col = noise[i].clone();
        if i > 0 {
            for (v, prev) in col.iter_mut().zip(&columns[i - 1]) {
                *v += prev;
            }
        }
        for (c, f) in spec.confounders.iter().zip(&latents) {
            if c.first == i || c.second == i {
                for (v, fv) in col.iter_mut().zip(f) {
                    *v += c.scale * fv;
                }
            }
        }
        columns.push(col);
    }

    let data = DataMatrix::new(
        columns
            .into_iter()
            .enumerate()
            .map(|(i, col)| (format!("x{i}"), col))
            .collect(),
    )?;
    Ok((data, (0..spec.p).collect()))
}

fn check_permutation_pair(truth: &[usize], estimated: &[usize]) -> Result<()> {
    if truth.len() != estimated.len() {
        return Err(Error::SizeMismatch { left: truth.len(), right: estimated.len() });
    }
    Ok(())
}

/// Whole-order error: 0 iff the estimated order matches exactly, else 1.
pub fn criterion_a(truth: &[usize], estimated: &[usize]) -> Result<u8> {
    check_permutation_pair(truth, estimated)?;
    Ok(if truth == estimated { 0 } else { 1 })
}

/// Pairwise error rate: the fraction of unordered variable pairs whose
/// relative order disagrees, out of `p(p-1)/2`.
pub fn criterion_b(truth: &[usize], estimated: &[usize]) -> Result<f64> {
    check_permutation_pair(truth, estimated)?;
    let p = truth.len();
    if p < 2 {
        return Err(Error::InvalidInput("pairwise error needs p >= 2".into()));
    }
    let mut pos = vec![0usize; p];
    for (rank, &v) in estimated.iter().enumerate() {
        if v >= p {
            return Err(Error::InvalidInput(format!("index {v} out of range for p = {p}")));
        }
        pos[v] = rank;
    }
    let mut inversions = 0usize;
    for a in 0..p {
        for b in a + 1..p {
            if pos[truth[a]] > pos[truth[b]] {
                inversions += 1;
            }
        }
    }
    Ok(inversions as f64 / (p * (p - 1) / 2) as f64)
}

/// One benchmark cell: a chain size, a sample size, and a confounder layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCell {
    pub p: usize,
    pub n: usize,
    pub preset: ConfounderPreset,
}

/// Outcome of a single (cell, method, trial) run.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Ok {
        criterion_a: u8,
        criterion_b: f64,
        mi_evaluations: u64,
        seconds: f64,
    },
    Failed {
        message: String,
        seconds: f64,
    },
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub p: usize,
    pub n: usize,
    pub preset: ConfounderPreset,
    pub trial: u32,
    pub method: Method,
    pub outcome: TrialOutcome,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed: a pure function of the base seed, the cell, and the trial
/// index, so any single record can be reproduced in isolation.
pub fn trial_seed(base: u64, cell: &BenchCell, trial: u32) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for word in [
        cell.p as u64,
        cell.n as u64,
        cell.preset.confounders().len() as u64,
        cell.preset
            .confounders()
            .iter()
            .fold(0u64, |acc, c| acc ^ ((c.first as u64) << 32 | c.second as u64)),
        trial as u64,
    ] {
        state ^= word;
        out = splitmix64(&mut state);
    }
    out
}

/// Run every (cell, method, trial) combination: generate a chain with the
/// derived per-trial seed, estimate the order, and score both criteria.
/// Methods within a trial share the same dataset, so comparisons are paired.
/// Trials run in parallel; records come back sorted by (cell, method, trial)
/// and everything except the timing field is deterministic.
pub fn run_benchmark(
    grid: &[BenchCell],
    methods: &[Method],
    trials: u32,
    noise_family: NoiseFamily,
    base: &SearchConfig,
) -> Result<Vec<TrialRecord>> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidInput("need at least one method".into()));
    }
    for cell in grid {
        ChainSpec::new(cell.p, cell.n, 0).with_preset(cell.preset).validate()?;
    }

    let jobs: Vec<(usize, u32)> = (0..grid.len())
        .flat_map(|ci| (0..trials).map(move |t| (ci, t)))
        .collect();

    let mut records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(ci, trial)| -> Result<Vec<TrialRecord>> {
            let cell = &grid[ci];
            let seed = trial_seed(base.seed, cell, trial);
            let mut spec = ChainSpec::new(cell.p, cell.n, seed).with_preset(cell.preset);
            spec.noise_family = noise_family;
            let (data, truth) = generate_chain(&spec)?;
            let mut out = Vec::with_capacity(methods.len());
            for &method in methods {
                let cfg = SearchConfig { method, seed, ..base.clone() };
                let start = Instant::now();
                let outcome = match run_order(&data, &cfg) {
                    Ok(result) => TrialOutcome::Ok {
                        criterion_a: criterion_a(&truth, &result.order)?,
                        criterion_b: criterion_b(&truth, &result.order)?,
                        mi_evaluations: result.mi_evaluations,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                    Err(err) => TrialOutcome::Failed {
                        message: err.to_string(),
                        seconds: start.elapsed().as_secs_f64(),
                    },
                };
                out.push(TrialRecord {
                    p: cell.p,
                    n: cell.n,
                    preset: cell.preset,
                    trial,
                    method,
                    outcome,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let cell_rank = |r: &TrialRecord| {
        grid.iter()
            .position(|c| c.p == r.p && c.n == r.n && c.preset == r.preset)
            .expect("record came from the grid")
    };
    let method_rank =
        |r: &TrialRecord| methods.iter().position(|m| *m == r.method).expect("known method");
    records.sort_by_key(|r| (cell_rank(r), method_rank(r), r.trial));
    Ok(records)
}
