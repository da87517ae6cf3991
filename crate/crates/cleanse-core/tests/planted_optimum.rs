//! End-to-end check on a search space small enough to enumerate: the loss
//! landscape over all 2^8 selections is brute-forced first, and only then
//! is the optimizer asserted to land near its top.

use cleanse_core::base_learner::TrainSettings;
use cleanse_core::bits::BitVec;
use cleanse_core::engine::{evaluate_selection, run, EngineConfig, LossTransform};
use cleanse_core::samplers::{SamplerConfig, SamplerKind};
use cleanse_core::task_data::{generate_dataset, Dataset, Provenance};

// seed picked so the enumerated loss landscape genuinely rewards
// cleansing: its global argmin removes 3 of 4 fakes and keeps every real
fn planted_dataset() -> Dataset {
    generate_dataset(7, 4, 32, 32, 18).unwrap()
}

fn fake_removals(dataset: &Dataset, q: &BitVec) -> (usize, usize) {
    let mut removed_fake = 0;
    let mut removed_real = 0;
    for (i, prov) in dataset.train_provenance.iter().enumerate() {
        if !q.get(i) {
            match prov {
                Provenance::Fake => removed_fake += 1,
                Provenance::Real => removed_real += 1,
                Provenance::Clean => unreachable!(),
            }
        }
    }
    (removed_fake, removed_real)
}

#[test]
fn bbo_cleanses_a_landscape_confirmed_by_enumeration() {
    let dataset = planted_dataset();
    let settings = TrainSettings::default();

    // brute force all 256 selections
    let mut best_q = BitVec::zeros(8);
    let mut best_loss = f64::INFINITY;
    for v in 0..256u64 {
        let q = BitVec::from_u64(8, v);
        let loss = evaluate_selection(&q, &dataset, &settings).unwrap();
        if loss < best_loss {
            best_loss = loss;
            best_q = q;
        }
    }
    // the landscape rewards cleansing: its global optimum removes at least
    // 3 of the 4 fake instances and keeps at least 3 of the 4 real ones
    let (fake, real) = fake_removals(&dataset, &best_q);
    assert!(fake >= 3, "enumerated optimum removes only {fake} fakes");
    assert!(real <= 1, "enumerated optimum removes {real} reals");

    // now the optimizer, at a fraction of the 256 evaluations
    let mut cleansed = 0;
    for seed in 0..8 {
        let config = EngineConfig {
            n_init: 16,
            n_total: 80,
            transform: LossTransform::Log,
            transform_floor: 1e-15,
            ridge_lambda: 1.0,
            sampler: SamplerConfig {
                num_reads: 128,
                num_sweeps: 500,
                ..SamplerConfig::new(SamplerKind::Sa)
            },
            learner: settings.clone(),
            seed,
        };
        let trace = run(&dataset, &config).unwrap();
        let (fake, _) = fake_removals(&dataset, &trace.best_selection);
        if fake >= 3 {
            cleansed += 1;
        }
    }
    assert!(cleansed >= 7, "only {cleansed}/8 seeds removed >= 3 fakes");
}
