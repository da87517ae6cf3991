//! Aggregate CSV builders. All files carry a header row and print floats
//! with Rust's shortest round-trip formatting.

use cleanse_core::engine::{Phase, RunTrace};
use cleanse_core::task_data::Dataset;

use crate::analysis::AnalysisSummary;

/// The removal grid: one row per (run, training instance) with the
/// selected flag of the run's best solution.
pub fn removal_csv(dataset: &Dataset, runs: &[(u64, RunTrace)]) -> String {
    let mut out = String::from("run,instance,provenance,selected\n");
    for (seed, trace) in runs {
        for i in 0..dataset.n() {
            out.push_str(&format!(
                "{seed},{i},{},{}\n",
                dataset.train_provenance[i].as_str(),
                trace.best_selection.get(i) as u8
            ));
        }
    }
    out
}

/// Per-run log-loss of the best model on the four evaluation sets.
pub fn losses_csv(summary: &AnalysisSummary) -> String {
    let mut out = String::from("run,split,log_loss\n");
    for l in &summary.losses {
        out.push_str(&format!("{},train_all,{}\n", l.run, l.train_all));
        out.push_str(&format!(
            "{},train_optimized,{}\n",
            l.run, l.train_optimized
        ));
        out.push_str(&format!("{},valid,{}\n", l.run, l.valid));
        out.push_str(&format!("{},test,{}\n", l.run, l.test));
    }
    out
}

/// Per-instance characteristics and removal probability.
pub fn instances_csv(summary: &AnalysisSummary) -> String {
    let mut out =
        String::from("instance,summed_input,absolute_deviance,entropy,removal_probability\n");
    for s in &summary.instances {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.index, s.summed_input, s.absolute_deviance, s.entropy, s.removal_probability
        ));
    }
    out
}

/// Per-run solution quality. Raw and transformed best losses are both
/// reported; the run's winner is picked on the transformed value.
pub fn solutions_csv(summary: &AnalysisSummary) -> String {
    let mut out = String::from("run,best_raw_loss,best_transformed_loss,hamming_distance\n");
    for s in &summary.solutions {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.run, s.best_raw_loss, s.best_transformed_loss, s.hamming_to_theoretical
        ));
    }
    out
}

/// Per-step batch energy statistics, averaged across runs: the mean of the
/// per-run batch means and the mean of the per-run batch standard
/// deviations. Only optimization-phase steps have batches.
pub fn energies_csv(runs: &[(u64, RunTrace)]) -> String {
    let mut out = String::from("step,energy_mean,energy_std\n");
    let steps: Vec<usize> = runs
        .first()
        .map(|(_, t)| {
            t.records
                .iter()
                .filter(|r| r.phase == Phase::Optimize)
                .map(|r| r.step)
                .collect()
        })
        .unwrap_or_default();
    for step in steps {
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for (_, trace) in runs {
            if let Some(r) = trace.records.iter().find(|r| r.step == step) {
                if let (Some(m), Some(s)) = (r.batch_energy_mean, r.batch_energy_std) {
                    means.push(m);
                    stds.push(s);
                }
            }
        }
        if means.is_empty() {
            continue;
        }
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let std = stds.iter().sum::<f64>() / stds.len() as f64;
        out.push_str(&format!("{step},{mean},{std}\n"));
    }
    out
}

/// Per-step sampling time across runs: mean and a 95% band from the
/// standard error. Only optimization-phase steps are listed.
pub fn timing_csv(runs: &[(u64, RunTrace)]) -> String {
    let mut out = String::from("step,sampling_time_mean_s,ci95_low_s,ci95_high_s\n");
    let steps: Vec<usize> = runs
        .first()
        .map(|(_, t)| {
            t.records
                .iter()
                .filter(|r| r.phase == Phase::Optimize)
                .map(|r| r.step)
                .collect()
        })
        .unwrap_or_default();
    for step in steps {
        let times: Vec<f64> = runs
            .iter()
            .filter_map(|(_, trace)| {
                trace
                    .records
                    .iter()
                    .find(|r| r.step == step && r.phase == Phase::Optimize)
                    .map(|r| r.sampling_time)
            })
            .collect();
        if times.is_empty() {
            continue;
        }
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        let se = if times.len() > 1 {
            let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        out.push_str(&format!(
            "{step},{mean},{},{}\n",
            mean - 1.96 * se,
            mean + 1.96 * se
        ));
    }
    out
}
