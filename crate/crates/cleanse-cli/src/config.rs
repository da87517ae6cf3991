//! Flat key=value experiment configuration with command-line overrides.

use cleanse_core::base_learner::TrainSettings;
use cleanse_core::engine::{EngineConfig, LossTransform, DEFAULT_TRANSFORM_FLOOR};
use cleanse_core::samplers::{SamplerConfig, SamplerKind};

use crate::{CliError, CliResult};

/// Everything one experiment needs: dataset shape, engine settings and the
/// list of run seeds. Defaults match the full-scale setup (9 input bits,
/// 64 real instances, 64 random then 256 optimized steps of 512 reads,
/// seeds 0..=31).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub b: usize,
    pub n_real: usize,
    pub n_valid: usize,
    pub n_test: usize,
    /// Seed for dataset generation; all runs share one dataset.
    pub dataset_seed: u64,
    pub n_init: usize,
    pub n_total: usize,
    pub transform: LossTransform,
    pub transform_floor: f64,
    pub ridge_lambda: f64,
    pub l2_strength: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub sampler: SamplerKind,
    pub num_reads: usize,
    pub num_sweeps: usize,
    pub trotter_slices: usize,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            b: 9,
            n_real: 64,
            n_valid: 128,
            n_test: 128,
            dataset_seed: 0,
            n_init: 64,
            n_total: 320,
            transform: LossTransform::Log,
            transform_floor: DEFAULT_TRANSFORM_FLOOR,
            ridge_lambda: 1.0,
            l2_strength: TrainSettings::default().l2_strength,
            max_iterations: 200,
            tolerance: 1e-8,
            sampler: SamplerKind::Sa,
            num_reads: 512,
            num_sweeps: 1000,
            trotter_slices: 4,
            seeds: (0..32).collect(),
        }
    }
}

fn bad<T>(message: String) -> CliResult<T> {
    Err(CliError::Config(message))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value `{value}` for key `{key}`")))
}

/// Seed lists accept `a..b` (half-open range) or comma-separated integers.
fn parse_seeds(value: &str) -> CliResult<Vec<u64>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = parse_num("seeds", lo.trim())?;
        let hi: u64 = parse_num("seeds", hi.trim())?;
        if lo >= hi {
            return bad(format!("empty seed range `{value}`"));
        }
        return Ok((lo..hi).collect());
    }
    value
        .split(',')
        .map(|s| parse_num("seeds", s.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Parses a config file body; unknown keys are rejected.
    pub fn parse_str(text: &str) -> CliResult<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return bad(format!("line {}: expected `key = value`", lineno + 1));
            };
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "b" => self.b = parse_num(key, value)?,
            "n_real" => self.n_real = parse_num(key, value)?,
            "n_valid" => self.n_valid = parse_num(key, value)?,
            "n_test" => self.n_test = parse_num(key, value)?,
            "dataset_seed" => self.dataset_seed = parse_num(key, value)?,
            "n_init" => self.n_init = parse_num(key, value)?,
            "n_total" => self.n_total = parse_num(key, value)?,
            "transform" => {
                self.transform = value
                    .parse()
                    .map_err(|e: cleanse_core::Error| CliError::Config(e.to_string()))?
            }
            "transform_floor" => self.transform_floor = parse_num(key, value)?,
            "ridge_lambda" => self.ridge_lambda = parse_num(key, value)?,
            "l2_strength" => self.l2_strength = parse_num(key, value)?,
            "max_iterations" => self.max_iterations = parse_num(key, value)?,
            "tolerance" => self.tolerance = parse_num(key, value)?,
            "sampler" => {
                self.sampler = value
                    .parse()
                    .map_err(|e: cleanse_core::Error| CliError::Config(e.to_string()))?
            }
            "num_reads" => self.num_reads = parse_num(key, value)?,
            "num_sweeps" => self.num_sweeps = parse_num(key, value)?,
            "trotter_slices" => self.trotter_slices = parse_num(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            other => return bad(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.b == 0 || self.b.is_multiple_of(2) {
            return bad(format!("b must be odd, got {}", self.b));
        }
        if self.n_real == 0 {
            return bad("n_real must be at least 1".into());
        }
        let patterns = self.n_real + self.n_valid + self.n_test;
        if self.b < 64 && patterns as u128 > 1u128 << self.b {
            return bad(format!(
                "{patterns} distinct patterns requested but 2^{} = {} exist",
                self.b,
                1u128 << self.b
            ));
        }
        if self.n_init == 0 || self.n_init >= self.n_total {
            return bad(format!(
                "need 1 <= n_init < n_total, got {} and {}",
                self.n_init, self.n_total
            ));
        }
        if self.num_reads == 0 {
            return bad("num_reads must be at least 1".into());
        }
        if self.num_sweeps == 0 {
            return bad("num_sweeps must be at least 1".into());
        }
        if self.trotter_slices < 2 {
            return bad("trotter_slices must be at least 2".into());
        }
        if self.ridge_lambda.is_nan() || self.ridge_lambda <= 0.0 {
            return bad(format!(
                "ridge_lambda must be positive, got {}",
                self.ridge_lambda
            ));
        }
        if self.transform_floor.is_nan() || self.transform_floor <= 0.0 {
            return bad("transform_floor must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        let distinct: std::collections::HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return bad("seed list has duplicates".into());
        }
        Ok(())
    }

    pub fn learner(&self) -> TrainSettings {
        TrainSettings {
            l2_strength: self.l2_strength,
            max_iterations: self.max_iterations,
            convergence_tolerance: self.tolerance,
        }
    }

    pub fn engine_config(&self, seed: u64) -> EngineConfig {
        EngineConfig {
            n_init: self.n_init,
            n_total: self.n_total,
            transform: self.transform,
            transform_floor: self.transform_floor,
            ridge_lambda: self.ridge_lambda,
            sampler: SamplerConfig {
                kind: self.sampler,
                num_reads: self.num_reads,
                num_sweeps: self.num_sweeps,
                trotter_slices: self.trotter_slices,
                seed: 0, // per-step seeds are derived inside the run
            },
            learner: self.learner(),
            seed,
        }
    }

    /// The `run.meta` sidecar: every config value plus the fixed algorithm
    /// constants, as deterministic key=value text.
    pub fn meta_string(&self) -> String {
        let seeds = self
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "# experiment configuration\n\
             b = {}\n\
             n_real = {}\n\
             n_valid = {}\n\
             n_test = {}\n\
             dataset_seed = {}\n\
             n_init = {}\n\
             n_total = {}\n\
             transform = {}\n\
             transform_floor = {}\n\
             ridge_lambda = {}\n\
             l2_strength = {}\n\
             max_iterations = {}\n\
             tolerance = {}\n\
             sampler = {}\n\
             num_reads = {}\n\
             num_sweeps = {}\n\
             trotter_slices = {}\n\
             seeds = {}\n\
             # fixed algorithm constants\n\
             log_loss_clamp = 1e-15\n\
             pairwise_order = row-major (1,2),(1,3),..,(n-1,n)\n\
             ridge_intercept_penalty = none\n\
             sa_beta_hot = ln(2) / max_i (|U_ii| + sum_j |U_ij|)\n\
             sa_beta_cold = ln(100 n) / min nonzero entry magnitude\n\
             sa_schedule = geometric over num_sweeps\n\
             sqa_gamma = linear from 10 max|U| to 1e-8\n\
             sqa_beta = sa_beta_cold\n\
             acceptance = lowest-energy unseen, ties by read index, random fallback\n\
             init_selections = uniform Bernoulli(0.5), deduplicated\n",
            self.b,
            self.n_real,
            self.n_valid,
            self.n_test,
            self.dataset_seed,
            self.n_init,
            self.n_total,
            self.transform.as_str(),
            self.transform_floor,
            self.ridge_lambda,
            self.l2_strength,
            self.max_iterations,
            self.tolerance,
            self.sampler.as_str(),
            self.num_reads,
            self.num_sweeps,
            self.trotter_slices,
            seeds,
        )
    }
}
