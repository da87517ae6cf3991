//! Simulated quantum annealing: path-integral Monte Carlo over Trotter
//! replicas of the QUBO coupled along a ring in imaginary time, with a
//! linearly decreasing transverse field.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitVec;
use crate::surrogate::QuboMatrix;

use super::{beta_range, Couplings};

/// Fixed parameters of one SQA run.
pub(super) struct SqaParams {
    pub slices: usize,
    /// Inverse temperature of the classical replica system.
    pub beta: f64,
    /// Transverse field endpoints; interpolated linearly over sweeps.
    pub gamma_start: f64,
    pub gamma_end: f64,
}

impl SqaParams {
    pub fn for_matrix(u: &QuboMatrix, slices: usize) -> Self {
        let scale = u.max_abs();
        let gamma_start = if scale > 0.0 { 10.0 * scale } else { 1.0 };
        let (_, beta_cold) = beta_range(u);
        Self {
            slices,
            beta: beta_cold,
            gamma_start,
            gamma_end: 1e-8,
        }
    }

    /// Ferromagnetic coupling between adjacent replicas at field gamma.
    fn replica_coupling(&self, gamma: f64) -> f64 {
        let arg = (self.beta * gamma / self.slices as f64).tanh();
        -(0.5 / self.beta) * arg.ln()
    }
}

/// One read: Metropolis sweeps over all (variable, replica) pairs; each
/// flip weighs the replica's QUBO delta (divided by the slice count)
/// against the imaginary-time alignment term. Returns the lowest-energy
/// replica under the classical QUBO energy.
pub fn sqa_read(
    u: &QuboMatrix,
    num_sweeps: usize,
    trotter_slices: usize,
    rng: &mut ChaCha8Rng,
) -> (BitVec, f64) {
    assert!(trotter_slices >= 2, "sqa needs at least 2 trotter slices");
    let couplings = Couplings::from_qubo(u);
    let params = SqaParams::for_matrix(u, trotter_slices);
    run_read(&couplings, num_sweeps.max(1), &params, rng)
}

pub(super) fn run_read(
    couplings: &Couplings,
    num_sweeps: usize,
    params: &SqaParams,
    rng: &mut ChaCha8Rng,
) -> (BitVec, f64) {
    let n = couplings.n;
    let slices = params.slices;
    let mut states: Vec<BitVec> = (0..slices).map(|_| BitVec::random(n, rng)).collect();
    let mut eff = Vec::with_capacity(slices);
    let mut energies = Vec::with_capacity(slices);
    for state in &states {
        let (e, energy) = couplings.fields_and_energy(state);
        eff.push(e);
        energies.push(energy);
    }

    let slice_count = slices as f64;
    for sweep in 0..num_sweeps {
        let frac = if num_sweeps == 1 {
            0.0
        } else {
            sweep as f64 / (num_sweeps - 1) as f64
        };
        let gamma = params.gamma_start + (params.gamma_end - params.gamma_start) * frac;
        let jperp = params.replica_coupling(gamma);

        for i in 0..n {
            for r in 0..slices {
                let set = states[r].get(i);
                let qubo_delta = if set { -eff[r][i] } else { eff[r][i] };
                let spin = if set { 1.0 } else { -1.0 };
                let up = states[(r + 1) % slices].get(i);
                let down = states[(r + slices - 1) % slices].get(i);
                let neighbor_spins =
                    (if up { 1.0 } else { -1.0 }) + (if down { 1.0 } else { -1.0 });
                let delta = qubo_delta / slice_count + 2.0 * jperp * spin * neighbor_spins;

                let accept = delta <= 0.0 || rng.random::<f64>() < (-params.beta * delta).exp();
                if accept {
                    states[r].flip(i);
                    energies[r] += qubo_delta;
                    let sign = if set { -1.0 } else { 1.0 };
                    let row = &couplings.sym[i * n..(i + 1) * n];
                    for (j, w) in row.iter().enumerate() {
                        eff[r][j] += sign * w;
                    }
                }
            }
        }
    }

    let best = (0..slices)
        .min_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)))
        .unwrap();
    (states.swap_remove(best), energies[best])
}
