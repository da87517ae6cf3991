//! Single-spin-flip Metropolis simulated annealing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitVec;
use crate::surrogate::QuboMatrix;

use super::{beta_range, geometric_schedule, Couplings};

/// One read: sweeps visit every variable in index order under a geometric
/// inverse-temperature schedule, with incremental O(1) energy deltas via
/// cached effective fields. Returns the final state and its tracked energy.
pub fn sa_read(u: &QuboMatrix, num_sweeps: usize, rng: &mut ChaCha8Rng) -> (BitVec, f64) {
    let couplings = Couplings::from_qubo(u);
    let (beta_hot, beta_cold) = beta_range(u);
    let betas = geometric_schedule(beta_hot, beta_cold, num_sweeps.max(1));
    run_read(&couplings, &betas, rng)
}

pub(super) fn run_read(
    couplings: &Couplings,
    betas: &[f64],
    rng: &mut ChaCha8Rng,
) -> (BitVec, f64) {
    let n = couplings.n;
    let mut state = BitVec::random(n, rng);
    let (mut eff, mut energy) = couplings.fields_and_energy(&state);

    for &beta in betas {
        for i in 0..n {
            let set = state.get(i);
            let delta = if set { -eff[i] } else { eff[i] };
            let accept = delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp();
            if accept {
                state.flip(i);
                energy += delta;
                let sign = if set { -1.0 } else { 1.0 };
                let row = &couplings.sym[i * n..(i + 1) * n];
                for (j, w) in row.iter().enumerate() {
                    eff[j] += sign * w;
                }
            }
        }
    }
    (state, energy)
}
