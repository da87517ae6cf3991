//! QUBO samplers: native simulated annealing and simulated quantum
//! annealing, plus uniform-random and exhaustive reference samplers.
//!
//! A batch draws `num_reads` independent reads; read m consumes its own
//! deterministically derived RNG substream, so batches are reproducible
//! and reads may run in parallel without changing the result. Reported
//! energies are always recomputed from the matrix after sampling; the
//! recomputation is excluded from the measured sampling time.
//!
//! The `external` kind reserves a slot for a hardware sampler and returns
//! an error in this build.

mod sa;
mod sqa;

use std::collections::BinaryHeap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::BitVec;
use crate::surrogate::{qubo_energy, QuboMatrix};
use crate::{Error, Result};

pub use sa::sa_read;
pub use sqa::sqa_read;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Sa,
    Sqa,
    Random,
    Exhaustive,
    /// Reserved for a physical annealer; unimplemented here.
    External,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Sa => "sa",
            SamplerKind::Sqa => "sqa",
            SamplerKind::Random => "random",
            SamplerKind::Exhaustive => "exhaustive",
            SamplerKind::External => "external",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa" => Ok(SamplerKind::Sa),
            "sqa" => Ok(SamplerKind::Sqa),
            "random" => Ok(SamplerKind::Random),
            "exhaustive" => Ok(SamplerKind::Exhaustive),
            "external" => Ok(SamplerKind::External),
            other => Err(Error::InvalidConfig(format!("unknown sampler `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Reads per batch (M).
    pub num_reads: usize,
    /// Sweeps per read for sa/sqa.
    pub num_sweeps: usize,
    /// Replica count for sqa.
    pub trotter_slices: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            num_reads: 512,
            num_sweeps: 1000,
            trotter_slices: 4,
            seed: 0,
        }
    }
}

/// One batch of reads with recomputed energies (excluding the constant
/// shift) and the wall-clock time spent in the core sampling loop.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub samples: Vec<BitVec>,
    pub energies: Vec<f64>,
    pub sampling_time: f64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Read indices sorted by ascending energy, ties by read index.
    pub fn sorted_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.sort_by(|&a, &b| {
            self.energies[a]
                .total_cmp(&self.energies[b])
                .then(a.cmp(&b))
        });
        order
    }

    /// Mean and population standard deviation of the batch energies.
    pub fn energy_stats(&self) -> (f64, f64) {
        let m = self.energies.len() as f64;
        let mean = self.energies.iter().sum::<f64>() / m;
        let var = self
            .energies
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / m;
        (mean, var.sqrt())
    }
}

/// Symmetric view of an upper-triangular QUBO: per-variable fields (the
/// diagonal) and a dense symmetric coupling matrix with zero diagonal.
/// The effective field h_i + sum_j J_ij q_j gives single-flip energy
/// deltas in O(1) with O(n) updates per accepted flip.
pub(crate) struct Couplings {
    pub n: usize,
    pub fields: Vec<f64>,
    pub sym: Vec<f64>, // row-major n x n
}

impl Couplings {
    pub fn from_qubo(u: &QuboMatrix) -> Self {
        let n = u.size();
        let mut fields = vec![0.0; n];
        let mut sym = vec![0.0; n * n];
        for i in 0..n {
            fields[i] = u.get(i, i);
            for j in i + 1..n {
                let w = u.get(i, j);
                sym[i * n + j] = w;
                sym[j * n + i] = w;
            }
        }
        Self { n, fields, sym }
    }

    /// Effective fields and total energy of a state.
    pub fn fields_and_energy(&self, state: &BitVec) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut eff = self.fields.clone();
        let mut energy = 0.0;
        for i in state.iter_ones() {
            energy += self.fields[i];
            let row = &self.sym[i * n..(i + 1) * n];
            for j in state.iter_ones() {
                if j > i {
                    energy += row[j];
                }
            }
            for (j, w) in row.iter().enumerate() {
                if *w != 0.0 {
                    eff[j] += w;
                }
            }
        }
        // remove each variable's own contribution: eff must sum over j != i,
        // which the zero diagonal of `sym` already guarantees
        (eff, energy)
    }

    /// Per-variable bound on the single-flip energy magnitude:
    /// |field| plus the absolute row sum of couplings.
    fn flip_magnitudes(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.fields[i].abs()
                    + self.sym[i * self.n..(i + 1) * self.n]
                        .iter()
                        .map(|w| w.abs())
                        .sum::<f64>()
            })
            .collect()
    }

    /// Smallest nonzero |field| or |coupling|: the smallest positive
    /// single-flip energy change any state can realize.
    fn min_entry_magnitude(&self) -> f64 {
        self.fields
            .iter()
            .chain(self.sym.iter())
            .map(|v| v.abs())
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Inverse-temperature range for the geometric annealing schedule:
/// beta_hot = ln 2 / dE_max and beta_cold = ln(100 n) / dE_min. dE_max is
/// the largest per-variable single-flip magnitude bound (|field| plus
/// absolute coupling row sum); dE_min is the smallest positive single-flip
/// change any state can realize, i.e. the smallest nonzero entry magnitude.
pub fn beta_range(u: &QuboMatrix) -> (f64, f64) {
    beta_range_from(&Couplings::from_qubo(u))
}

fn beta_range_from(c: &Couplings) -> (f64, f64) {
    let de_max = c.flip_magnitudes().iter().fold(0.0f64, |m, &v| m.max(v));
    let de_min = c.min_entry_magnitude();
    let de_max = if de_max > 0.0 { de_max } else { 1.0 };
    let de_min = if de_min.is_finite() { de_min } else { 1.0 };
    let beta_hot = std::f64::consts::LN_2 / de_max;
    let beta_cold = (100.0 * c.n as f64).ln() / de_min;
    (beta_hot, beta_cold.max(beta_hot))
}

/// Geometric interpolation from beta_hot to beta_cold over `sweeps` values.
pub(crate) fn geometric_schedule(beta_hot: f64, beta_cold: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![beta_hot];
    }
    let log_hot = beta_hot.ln();
    let step = (beta_cold.ln() - log_hot) / (sweeps - 1) as f64;
    (0..sweeps)
        .map(|s| (log_hot + step * s as f64).exp())
        .collect()
}

/// RNG substream for read m of a batch.
pub(crate) fn read_rng(seed: u64, read: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read as u64);
    rng
}

/// Draws `config.num_reads` samples from the matrix. Deterministic given
/// `(u, config)` up to the measured `sampling_time`.
pub fn sample(u: &QuboMatrix, config: &SamplerConfig) -> Result<SampleBatch> {
    if config.num_reads == 0 {
        return Err(Error::InvalidConfig("num_reads must be at least 1".into()));
    }
    match config.kind {
        SamplerKind::External => Err(Error::UnimplementedSampler("external")),
        SamplerKind::Exhaustive => sample_exhaustive(u, config),
        SamplerKind::Random => {
            let n = u.size();
            let start = Instant::now();
            let samples: Vec<BitVec> = (0..config.num_reads)
                .into_par_iter()
                .map(|m| BitVec::random(n, &mut read_rng(config.seed, m)))
                .collect();
            finish_batch(u, samples, start)
        }
        SamplerKind::Sa => {
            check_sweeps(config)?;
            let start = Instant::now();
            let couplings = Couplings::from_qubo(u);
            let (beta_hot, beta_cold) = beta_range_from(&couplings);
            let betas = geometric_schedule(beta_hot, beta_cold, config.num_sweeps);
            let samples: Vec<BitVec> = (0..config.num_reads)
                .into_par_iter()
                .map(|m| sa::run_read(&couplings, &betas, &mut read_rng(config.seed, m)).0)
                .collect();
            finish_batch(u, samples, start)
        }
        SamplerKind::Sqa => {
            check_sweeps(config)?;
            if config.trotter_slices < 2 {
                return Err(Error::InvalidConfig(
                    "sqa needs at least 2 trotter slices".into(),
                ));
            }
            let start = Instant::now();
            let couplings = Couplings::from_qubo(u);
            let params = sqa::SqaParams::for_matrix(u, config.trotter_slices);
            let samples: Vec<BitVec> = (0..config.num_reads)
                .into_par_iter()
                .map(|m| {
                    sqa::run_read(
                        &couplings,
                        config.num_sweeps,
                        &params,
                        &mut read_rng(config.seed, m),
                    )
                    .0
                })
                .collect();
            finish_batch(u, samples, start)
        }
    }
}

fn check_sweeps(config: &SamplerConfig) -> Result<()> {
    if config.num_sweeps == 0 {
        return Err(Error::InvalidConfig("num_sweeps must be at least 1".into()));
    }
    Ok(())
}

fn finish_batch(u: &QuboMatrix, samples: Vec<BitVec>, start: Instant) -> Result<SampleBatch> {
    let sampling_time = start.elapsed().as_secs_f64();
    let energies = samples
        .iter()
        .map(|s| qubo_energy(u, s).expect("sample width matches matrix"))
        .collect();
    Ok(SampleBatch {
        samples,
        energies,
        sampling_time,
    })
}

/// (energy, state value) with max-heap ordering for bounded selection of
/// the lowest-energy states.
#[derive(PartialEq)]
struct HeapItem {
    energy: f64,
    value: u64,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.value.cmp(&other.value))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Enumerates all 2^n states along a Gray-code walk (one flip per step)
/// and keeps the `num_reads` lowest, ordered by energy then state value.
fn sample_exhaustive(u: &QuboMatrix, config: &SamplerConfig) -> Result<SampleBatch> {
    let n = u.size();
    if n > 24 {
        return Err(Error::StateSpaceTooLarge(n));
    }
    let start = Instant::now();
    let couplings = Couplings::from_qubo(u);
    let total: u64 = 1 << n;
    let keep = config.num_reads.min(total as usize);

    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(keep + 1);
    let mut value = 0u64;
    let mut energy = 0.0;
    let mut eff = couplings.fields.clone();

    for idx in 0..total {
        if heap.len() < keep {
            heap.push(HeapItem { energy, value });
        } else if heap
            .peek()
            .is_some_and(|worst| (HeapItem { energy, value }) < *worst)
        {
            heap.pop();
            heap.push(HeapItem { energy, value });
        }
        if idx + 1 < total {
            let bit = (idx + 1).trailing_zeros() as usize;
            let set = value >> bit & 1 == 1;
            let delta = if set { -eff[bit] } else { eff[bit] };
            energy += delta;
            value ^= 1 << bit;
            let sign = if set { -1.0 } else { 1.0 };
            let row = &couplings.sym[bit * n..(bit + 1) * n];
            for (j, w) in row.iter().enumerate() {
                eff[j] += sign * w;
            }
        }
    }

    let mut picked = heap.into_vec();
    picked.sort();
    let samples = picked
        .into_iter()
        .map(|item| BitVec::from_u64(n, item.value))
        .collect();
    finish_batch(u, samples, start)
}
