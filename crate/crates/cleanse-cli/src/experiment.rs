//! Experiment orchestration: multi-seed execution with per-run trace
//! files, aggregate reports, re-analysis of stored traces, and the
//! exhaustive selection oracle for small training sets.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cleanse_core::base_learner::TrainSettings;
use cleanse_core::bits::BitVec;
use cleanse_core::engine::{evaluate_selection, run, transform_loss, RunTrace};
use cleanse_core::task_data::{generate_dataset, Dataset};

use crate::analysis::{summarize, AnalysisSummary};
use crate::config::ExperimentConfig;
use crate::report;
use crate::{CliError, CliResult};

pub struct ExperimentOutput {
    pub dataset: Dataset,
    pub runs: Vec<(u64, RunTrace)>,
    pub summary: AnalysisSummary,
}

fn runtime<T: std::fmt::Display>(e: T) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Writes via a temp file and rename so partially written outputs never
/// appear under the final name.
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| runtime(format!("write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| runtime(format!("rename {}: {e}", path.display())))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| runtime(format!("read {}: {e}", path.display())))
}

pub fn trace_filename(seed: u64) -> String {
    format!("trace_{seed}.csv")
}

/// Generates the dataset, runs every seed (in parallel), writes the
/// per-run traces plus `dataset.csv` and `run.meta`, then the aggregate
/// reports.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> CliResult<ExperimentOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| runtime(format!("create {}: {e}", out_dir.display())))?;

    let dataset = generate_dataset(
        config.b,
        config.n_real,
        config.n_valid,
        config.n_test,
        config.dataset_seed,
    )
    .map_err(runtime)?;
    write_atomic(&out_dir.join("dataset.csv"), &dataset.to_csv_string())?;
    write_atomic(&out_dir.join("run.meta"), &config.meta_string())?;

    let runs: Vec<(u64, RunTrace)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            run(&dataset, &config.engine_config(seed))
                .map(|trace| (seed, trace))
                .map_err(|e| CliError::Runtime(format!("run with seed {seed} failed: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;

    for (seed, trace) in &runs {
        write_atomic(&out_dir.join(trace_filename(*seed)), &trace.to_csv_string())?;
    }

    let summary = summarize(&dataset, &runs, &config.learner())?;
    write_aggregates(out_dir, &dataset, &runs, &summary, true)?;

    Ok(ExperimentOutput {
        dataset,
        runs,
        summary,
    })
}

fn write_aggregates(
    out_dir: &Path,
    dataset: &Dataset,
    runs: &[(u64, RunTrace)],
    summary: &AnalysisSummary,
    with_energies: bool,
) -> CliResult<()> {
    write_atomic(
        &out_dir.join("removal.csv"),
        &report::removal_csv(dataset, runs),
    )?;
    write_atomic(&out_dir.join("losses.csv"), &report::losses_csv(summary))?;
    write_atomic(
        &out_dir.join("instances.csv"),
        &report::instances_csv(summary),
    )?;
    write_atomic(
        &out_dir.join("solutions.csv"),
        &report::solutions_csv(summary),
    )?;
    if with_energies {
        write_atomic(&out_dir.join("energies.csv"), &report::energies_csv(runs))?;
    }
    write_atomic(&out_dir.join("timing.csv"), &report::timing_csv(runs))?;
    Ok(())
}

/// Learner settings stored in `run.meta`.
fn learner_from_meta(meta: &str) -> CliResult<TrainSettings> {
    let mut settings = TrainSettings::default();
    for line in meta.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "l2_strength" => settings.l2_strength = value.parse().map_err(runtime)?,
            "max_iterations" => settings.max_iterations = value.parse().map_err(runtime)?,
            "tolerance" => settings.convergence_tolerance = value.parse().map_err(runtime)?,
            _ => {}
        }
    }
    Ok(settings)
}

/// Reloads `dataset.csv`, `run.meta` and every `trace_*.csv` from a run
/// directory, recomputes the summary and rewrites the aggregate reports.
/// `energies.csv` is left untouched: batch energies live only in memory
/// during a run and are not part of the trace schema.
pub fn analyze_dir(dir: &Path) -> CliResult<AnalysisSummary> {
    let dataset = Dataset::from_csv_str(&read_file(&dir.join("dataset.csv"))?).map_err(runtime)?;
    let learner = learner_from_meta(&read_file(&dir.join("run.meta"))?)?;

    let mut trace_paths: Vec<(u64, PathBuf)> = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| runtime(format!("read {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(runtime)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name
            .strip_prefix("trace_")
            .and_then(|rest| rest.strip_suffix(".csv"))
        {
            let seed: u64 = seed
                .parse()
                .map_err(|_| runtime(format!("unexpected trace file name `{name}`")))?;
            trace_paths.push((seed, path));
        }
    }
    if trace_paths.is_empty() {
        return Err(CliError::Runtime(format!(
            "no trace_*.csv files in {}",
            dir.display()
        )));
    }
    trace_paths.sort_by_key(|(seed, _)| *seed);

    let mut runs = Vec::with_capacity(trace_paths.len());
    for (seed, path) in trace_paths {
        let trace = RunTrace::from_csv_str(&read_file(&path)?, dataset.n()).map_err(runtime)?;
        runs.push((seed, trace));
    }

    let summary = summarize(&dataset, &runs, &learner)?;
    write_aggregates(dir, &dataset, &runs, &summary, false)?;
    Ok(summary)
}

/// Exhaustively scores every selection of the configured training set
/// (n <= 16) and returns CSV rows `selection_hex,raw_loss,transformed_loss`
/// in state order.
pub fn oracle_csv(config: &ExperimentConfig) -> CliResult<String> {
    config.validate()?;
    let n = 2 * config.n_real;
    if n > 16 {
        return Err(CliError::Config(format!(
            "oracle enumerates 2^n selections and needs n <= 16, got n = {n}"
        )));
    }
    let dataset = generate_dataset(
        config.b,
        config.n_real,
        config.n_valid,
        config.n_test,
        config.dataset_seed,
    )
    .map_err(runtime)?;
    let learner = config.learner();

    let rows: Vec<String> = (0..1u64 << n)
        .into_par_iter()
        .map(|value| {
            let q = BitVec::from_u64(n, value);
            let raw = evaluate_selection(&q, &dataset, &learner).map_err(runtime)?;
            let transformed = transform_loss(raw, config.transform, config.transform_floor);
            Ok(format!("{},{raw},{transformed}\n", q.to_hex()))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut out = String::from("selection_hex,raw_loss,transformed_loss\n");
    out.extend(rows);
    Ok(out)
}
