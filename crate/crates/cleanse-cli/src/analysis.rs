//! Post-hoc analyses over completed runs: instance characteristics,
//! removal probabilities, per-split model performance, solution quality
//! and sampling-time statistics.

use cleanse_core::base_learner::{log_loss, train, TrainSettings};
use cleanse_core::bits::BitVec;
use cleanse_core::engine::{Phase, RunTrace};
use cleanse_core::task_data::{filter_train, theoretical_solution, Dataset};

use crate::{CliError, CliResult};

/// Number of ones in the pattern (s_i).
pub fn summed_input(input: &BitVec) -> usize {
    input.count_ones()
}

/// Distance of the pattern's popcount from the majority threshold b/2;
/// |s - 4.5| for 9-bit inputs.
pub fn absolute_deviance(input: &BitVec) -> f64 {
    (summed_input(input) as f64 - input.len() as f64 / 2.0).abs()
}

/// Natural-log entropy of the pattern's one-rate, with 0 ln 0 = 0.
pub fn binary_entropy(input: &BitVec) -> f64 {
    let p = summed_input(input) as f64 / input.len() as f64;
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Count of differing bits; errors on length mismatch.
pub fn hamming_distance(a: &BitVec, b: &BitVec) -> CliResult<usize> {
    if a.len() != b.len() {
        return Err(CliError::Runtime(format!(
            "hamming distance over lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.hamming_distance(b))
}

/// Per-instance fraction of runs whose best selection excludes it.
pub fn removal_probabilities(traces: &[RunTrace], dataset: &Dataset) -> CliResult<Vec<f64>> {
    if traces.is_empty() {
        return Err(CliError::Runtime("no traces to analyze".into()));
    }
    let n = dataset.n();
    for trace in traces {
        if trace.best_selection.len() != n {
            return Err(CliError::Runtime(format!(
                "trace selection length {} does not match dataset n {}",
                trace.best_selection.len(),
                n
            )));
        }
    }
    let runs = traces.len() as f64;
    Ok((0..n)
        .map(|i| traces.iter().filter(|t| !t.best_selection.get(i)).count() as f64 / runs)
        .collect())
}

fn ranks_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks_with_ties(x);
    let ry = ranks_with_ties(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Best solution of one run and its quality.
#[derive(Debug, Clone)]
pub struct RunSolution {
    pub run: u64,
    pub best_raw_loss: f64,
    pub best_transformed_loss: f64,
    pub hamming_to_theoretical: usize,
}

/// Log-loss of one run's best model on the four evaluation sets.
#[derive(Debug, Clone)]
pub struct SplitLosses {
    pub run: u64,
    pub train_all: f64,
    pub train_optimized: f64,
    pub valid: f64,
    pub test: f64,
}

/// Characteristics and removal probability of one training instance.
#[derive(Debug, Clone)]
pub struct InstanceStats {
    pub index: usize,
    pub summed_input: usize,
    pub absolute_deviance: f64,
    pub entropy: f64,
    pub removal_probability: f64,
}

#[derive(Debug, Clone)]
pub struct AnalysisSummary {
    pub solutions: Vec<RunSolution>,
    pub losses: Vec<SplitLosses>,
    pub instances: Vec<InstanceStats>,
    /// Mean and population std of per-step sampling times pooled over the
    /// optimization phase of every run.
    pub sampling_time_mean: f64,
    pub sampling_time_std: f64,
}

/// Recomputes the full summary from a dataset and its per-seed traces.
/// The best model of each run is retrained from its best selection, so the
/// learner settings must match those of the original runs.
pub fn summarize(
    dataset: &Dataset,
    runs: &[(u64, RunTrace)],
    learner: &TrainSettings,
) -> CliResult<AnalysisSummary> {
    if runs.is_empty() {
        return Err(CliError::Runtime("no runs to analyze".into()));
    }
    let theoretical = theoretical_solution(dataset);
    let mut solutions = Vec::with_capacity(runs.len());
    let mut losses = Vec::with_capacity(runs.len());

    for (seed, trace) in runs {
        let best = &trace.records[trace.best_index];
        solutions.push(RunSolution {
            run: *seed,
            best_raw_loss: best.raw_loss,
            best_transformed_loss: best.transformed_loss,
            hamming_to_theoretical: hamming_distance(&trace.best_selection, &theoretical)?,
        });

        let subset = filter_train(dataset, &trace.best_selection)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let model = train(&subset, learner);
        let eval = |instances: &[cleanse_core::task_data::Instance]| -> CliResult<f64> {
            if instances.is_empty() {
                return Ok(f64::NAN);
            }
            log_loss(&model, instances).map_err(|e| CliError::Runtime(e.to_string()))
        };
        losses.push(SplitLosses {
            run: *seed,
            train_all: eval(&dataset.train)?,
            train_optimized: eval(&subset)?,
            valid: eval(&dataset.valid)?,
            test: eval(&dataset.test)?,
        });
    }

    let traces: Vec<RunTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
    let removal = removal_probabilities(&traces, dataset)?;
    let instances = dataset
        .train
        .iter()
        .enumerate()
        .map(|(index, inst)| InstanceStats {
            index,
            summed_input: summed_input(&inst.input),
            absolute_deviance: absolute_deviance(&inst.input),
            entropy: binary_entropy(&inst.input),
            removal_probability: removal[index],
        })
        .collect();

    let times: Vec<f64> = runs
        .iter()
        .flat_map(|(_, t)| {
            t.records
                .iter()
                .filter(|r| r.phase == Phase::Optimize)
                .map(|r| r.sampling_time)
        })
        .collect();
    let (sampling_time_mean, sampling_time_std) = if times.is_empty() {
        (0.0, 0.0)
    } else {
        let m = times.iter().sum::<f64>() / times.len() as f64;
        let var = times.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / times.len() as f64;
        (m, var.sqrt())
    };

    Ok(AnalysisSummary {
        solutions,
        losses,
        instances,
        sampling_time_mean,
        sampling_time_std,
    })
}
