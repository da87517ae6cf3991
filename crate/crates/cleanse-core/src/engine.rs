//! The sequential optimization loop with postprocessing.
//!
//! Steps 1..=n_init accept uniform-random unseen selections. Every later
//! step refits the ridge surrogate on all prior (expansion, transformed
//! loss) pairs, samples the resulting QUBO, and accepts the lowest-energy
//! sample not seen before; if the whole batch has been seen, a random
//! unseen selection is accepted instead. Each accepted selection is scored
//! by training the base learner on the filtered subset and evaluating
//! log-loss on the validation split.

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base_learner::{log_loss, train, TrainSettings};
use crate::bits::BitVec;
use crate::samplers::{sample, SampleBatch, SamplerConfig};
use crate::surrogate::{expand, fit_ridge, to_qubo, ExpandedFeatures};
use crate::task_data::{filter_train, Dataset, SelectionVector};
use crate::{Error, Result};

/// Default floor for the log transform, aligned with the log-loss clamp.
pub const DEFAULT_TRANSFORM_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTransform {
    Log,
    Identity,
}

impl LossTransform {
    pub fn as_str(self) -> &'static str {
        match self {
            LossTransform::Log => "log",
            LossTransform::Identity => "identity",
        }
    }
}

impl std::str::FromStr for LossTransform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(LossTransform::Log),
            "identity" => Ok(LossTransform::Identity),
            other => Err(Error::InvalidConfig(format!("unknown transform `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Random initialization steps (N_0).
    pub n_init: usize,
    /// Total steps (N).
    pub n_total: usize,
    pub transform: LossTransform,
    pub transform_floor: f64,
    pub ridge_lambda: f64,
    /// Sampler settings; `num_reads` is the batch size M. The configured
    /// sampler seed is ignored inside a run: each step derives its own.
    pub sampler: SamplerConfig,
    pub learner: TrainSettings,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Optimize,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Optimize => "optimize",
        }
    }
}

/// How the accepted sample was obtained: the batch's energy argmin
/// (`Optimal`), a later entry of the sorted batch (`Suboptimal`), or a
/// random draw outside the batch (`Random`, also used for the whole
/// initialization phase).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    Random,
    Optimal,
    Suboptimal,
}

impl SampleType {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleType::Random => "random",
            SampleType::Optimal => "optimal",
            SampleType::Suboptimal => "suboptimal",
        }
    }
}

impl std::str::FromStr for SampleType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SampleType::Random),
            "optimal" => Ok(SampleType::Optimal),
            "suboptimal" => Ok(SampleType::Suboptimal),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown sample type `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    /// 1-based step index k.
    pub step: usize,
    pub phase: Phase,
    pub sample_type: SampleType,
    pub accepted: SelectionVector,
    /// QUBO energy of the accepted sample; absent for random draws.
    pub accepted_energy: Option<f64>,
    pub raw_loss: f64,
    pub transformed_loss: f64,
    /// Minimum transformed loss over steps <= k.
    pub best_so_far: f64,
    pub sampling_time: f64,
    pub eval_time: f64,
    /// Batch energy statistics; absent for init steps.
    pub batch_energy_mean: Option<f64>,
    pub batch_energy_std: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    /// 0-based index of the best record (first argmin of transformed loss).
    pub best_index: usize,
    pub best_selection: SelectionVector,
}

impl RunTrace {
    /// The accepted set S_N; always `records.len()` strong since accepted
    /// selections are pairwise distinct.
    pub fn accepted_set(&self) -> HashSet<BitVec> {
        self.records.iter().map(|r| r.accepted.clone()).collect()
    }

    /// CSV with columns step, phase, sample_type, accepted_energy (empty
    /// for random draws), raw_loss, transformed_loss, best_so_far,
    /// sampling_time_s, eval_time_s, selection_hex.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "step,phase,sample_type,accepted_energy,raw_loss,transformed_loss,\
             best_so_far,sampling_time_s,eval_time_s,selection_hex\n",
        );
        for r in &self.records {
            let energy = r.accepted_energy.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.step,
                r.phase.as_str(),
                r.sample_type.as_str(),
                energy,
                r.raw_loss,
                r.transformed_loss,
                r.best_so_far,
                r.sampling_time,
                r.eval_time,
                r.accepted.to_hex(),
            ));
        }
        out
    }

    /// Parses the format written by [`RunTrace::to_csv_string`] for
    /// selection vectors of length `n`. Batch energy statistics are not
    /// serialized and come back as `None`.
    pub fn from_csv_str(s: &str, n: usize) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in s.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 10 fields, got {}", fields.len()),
                });
            }
            let num = |v: &str, what: &str| -> Result<f64> {
                v.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad {what} `{v}`"),
                })
            };
            let phase = match fields[1] {
                "init" => Phase::Init,
                "optimize" => Phase::Optimize,
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("unknown phase `{other}`"),
                    })
                }
            };
            records.push(StepRecord {
                step: num(fields[0], "step")? as usize,
                phase,
                sample_type: fields[2].parse()?,
                accepted_energy: if fields[3].is_empty() {
                    None
                } else {
                    Some(num(fields[3], "accepted_energy")?)
                },
                raw_loss: num(fields[4], "raw_loss")?,
                transformed_loss: num(fields[5], "transformed_loss")?,
                best_so_far: num(fields[6], "best_so_far")?,
                sampling_time: num(fields[7], "sampling_time_s")?,
                eval_time: num(fields[8], "eval_time_s")?,
                accepted: BitVec::from_hex(fields[9], n).map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: e.to_string(),
                })?,
                batch_energy_mean: None,
                batch_energy_std: None,
            });
        }
        if records.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "trace has no records".into(),
            });
        }
        let best_index = argmin_transformed(&records);
        let best_selection = records[best_index].accepted.clone();
        Ok(RunTrace {
            records,
            best_index,
            best_selection,
        })
    }
}

fn argmin_transformed(records: &[StepRecord]) -> usize {
    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.transformed_loss < records[best].transformed_loss {
            best = i;
        }
    }
    best
}

/// g(L): natural log with a positive floor, or the identity.
pub fn transform_loss(raw: f64, transform: LossTransform, floor: f64) -> f64 {
    match transform {
        LossTransform::Log => raw.max(floor).ln(),
        LossTransform::Identity => raw,
    }
}

/// Trains the base learner on the selected subset and returns the
/// validation log-loss.
pub fn evaluate_selection(
    q: &SelectionVector,
    dataset: &Dataset,
    learner: &TrainSettings,
) -> Result<f64> {
    let subset = filter_train(dataset, q)?;
    let model = train(&subset, learner);
    log_loss(&model, &dataset.valid)
}

/// Draws a uniform-random selection not yet in `seen`. After a generous
/// retry budget the unseen states are enumerated deterministically (only
/// relevant in tiny search spaces; enumeration needs n <= 63, far above
/// any width where the retry cap can realistically be hit).
fn random_unseen(
    rng: &mut ChaCha8Rng,
    n: usize,
    seen: &HashSet<BitVec>,
) -> Result<SelectionVector> {
    if n <= 63 && seen.len() as u128 == 1u128 << n {
        return Err(Error::SearchSpaceExhausted(n));
    }
    let cap: u64 = 10 * (1u64 << n.min(20));
    for _ in 0..cap {
        let q = BitVec::random(n, rng);
        if !seen.contains(&q) {
            return Ok(q);
        }
    }
    if n <= 63 {
        for v in 0..1u64 << n {
            let q = BitVec::from_u64(n, v);
            if !seen.contains(&q) {
                return Ok(q);
            }
        }
        return Err(Error::SearchSpaceExhausted(n));
    }
    unreachable!("retry cap unreachable for n > 63");
}

/// Postprocessing acceptance: scans the batch in ascending energy order
/// (ties by read index) and returns the first sample absent from the
/// accepted set, typed `Optimal` when it is the head of the sorted batch
/// and `Suboptimal` otherwise. When every batch sample has been seen, a
/// random unseen selection is returned with type `Random` and no energy.
pub fn accept_candidate(
    batch: &SampleBatch,
    accepted: &HashSet<BitVec>,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<(SelectionVector, SampleType, Option<f64>)> {
    assert!(!batch.is_empty(), "acceptance needs a non-empty batch");
    for (position, &idx) in batch.sorted_order().iter().enumerate() {
        if !accepted.contains(&batch.samples[idx]) {
            let sample_type = if position == 0 {
                SampleType::Optimal
            } else {
                SampleType::Suboptimal
            };
            return Ok((
                batch.samples[idx].clone(),
                sample_type,
                Some(batch.energies[idx]),
            ));
        }
    }
    let q = random_unseen(rng, n, accepted)?;
    Ok((q, SampleType::Random, None))
}

/// Runs the full loop and returns the trace. Deterministic for a given
/// dataset and configuration, except for the measured wall-clock fields.
pub fn run(dataset: &Dataset, config: &EngineConfig) -> Result<RunTrace> {
    if config.n_init == 0 || config.n_init >= config.n_total {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= n_init < n_total, got n_init={} n_total={}",
            config.n_init, config.n_total
        )));
    }
    let n = dataset.n();
    if n == 0 {
        return Err(Error::InvalidConfig("dataset has no training split".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seen: HashSet<BitVec> = HashSet::with_capacity(config.n_total);
    let mut features: Vec<ExpandedFeatures> = Vec::with_capacity(config.n_total);
    let mut targets: Vec<f64> = Vec::with_capacity(config.n_total);
    let mut records: Vec<StepRecord> = Vec::with_capacity(config.n_total);
    let mut best = f64::INFINITY;

    for step in 1..=config.n_total {
        let init_phase = step <= config.n_init;
        let (accepted, sample_type, energy, sampling_time, batch_stats) = if init_phase {
            let start = Instant::now();
            let q = random_unseen(&mut rng, n, &seen)?;
            (
                q,
                SampleType::Random,
                None,
                start.elapsed().as_secs_f64(),
                None,
            )
        } else {
            // the refit at step k sees exactly the k-1 prior evaluations
            debug_assert_eq!(features.len(), step - 1);
            let coeffs = fit_ridge(&features, &targets, config.ridge_lambda)?;
            let matrix = to_qubo(&coeffs);
            let mut sampler = config.sampler.clone();
            sampler.seed = rng.random();
            let batch = sample(&matrix, &sampler)?;
            let stats = batch.energy_stats();
            let (q, ty, e) = accept_candidate(&batch, &seen, &mut rng, n)?;
            (q, ty, e, batch.sampling_time, Some(stats))
        };

        let start = Instant::now();
        let raw_loss = evaluate_selection(&accepted, dataset, &config.learner)?;
        let eval_time = start.elapsed().as_secs_f64();
        let transformed = transform_loss(raw_loss, config.transform, config.transform_floor);
        best = best.min(transformed);

        seen.insert(accepted.clone());
        features.push(expand(&accepted));
        targets.push(transformed);
        records.push(StepRecord {
            step,
            phase: if init_phase {
                Phase::Init
            } else {
                Phase::Optimize
            },
            sample_type,
            accepted,
            accepted_energy: energy,
            raw_loss,
            transformed_loss: transformed,
            best_so_far: best,
            sampling_time,
            eval_time,
            batch_energy_mean: batch_stats.map(|s| s.0),
            batch_energy_std: batch_stats.map(|s| s.1),
        });
    }

    let best_index = argmin_transformed(&records);
    let best_selection = records[best_index].accepted.clone();
    Ok(RunTrace {
        records,
        best_index,
        best_selection,
    })
}
