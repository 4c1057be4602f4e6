use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qubo::QuboModel;
use crate::scalar::Real;
use crate::solvers::{derive_seed, drift_tol, flip_sign, CompiledQubo, SolveResult};

/// Geometric inverse-temperature schedule for single-flip Metropolis
/// annealing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSchedule {
    pub beta0: f64,
    pub beta1: f64,
    pub sweeps: usize,
    pub reads: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { beta0: 0.1, beta1: 50.0, sweeps: 1000, reads: 100, seed: 0 }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(invalid(format!("beta0 must be positive, got {}", self.beta0)));
        }
        if !(self.beta1 > self.beta0 && self.beta1.is_finite()) {
            return Err(invalid(format!("beta1 must exceed beta0, got {} <= {}", self.beta1, self.beta0)));
        }
        if self.sweeps == 0 || self.reads == 0 {
            return Err(invalid("sweeps and reads must be at least 1"));
        }
        Ok(())
    }

    /// β for every sweep, interpolated geometrically from `beta0` to `beta1`.
    pub fn betas(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta1];
        }
        let ratio = (self.beta1 / self.beta0).ln();
        let last = (self.sweeps - 1) as f64;
        (0..self.sweeps).map(|t| self.beta0 * (ratio * t as f64 / last).exp()).collect()
    }
}

fn anneal_read<T: Real>(c: &CompiledQubo<T>, betas: &[f64], seed: u64) -> (Vec<bool>, T) {
    let n = c.num_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut field = c.local_fields(&bits);
    let mut tracked = c.energy(&bits);
    for &beta in betas {
        for i in 0..n {
            let delta = (flip_sign::<T>(bits[i]) * (c.diag[i] + field[i])).as_f64();
            let accept = delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp();
            if accept {
                tracked = tracked + T::lit(delta);
                bits[i] = !bits[i];
                let sign = flip_sign::<T>(!bits[i]);
                for &(j, v) in c.neighbors(i) {
                    field[j] = field[j] + sign * v;
                }
            }
        }
    }
    // full re-evaluation cancels accumulated drift
    let e = c.energy(&bits);
    debug_assert!(
        (tracked - e).abs().as_f64() <= drift_tol::<T>() * e.abs().as_f64().max(1.0),
        "incremental energy drifted: {tracked} vs {e}"
    );
    (bits, e)
}

/// Best of `reads` independent annealing runs. Read `r` draws from a
/// generator seeded with `derive_seed(seed, r)`; reads run in parallel and
/// are merged in read order, so results are identical to a serial run.
pub fn solve_sa<T: Real>(model: &QuboModel<T>, sched: &AnnealSchedule) -> Result<SolveResult<T>> {
    sched.validate()?;
    let start = Instant::now();
    let c = CompiledQubo::new(model);
    let betas = sched.betas();
    let runs: Vec<(Vec<bool>, T)> = (0..sched.reads as u64)
        .into_par_iter()
        .map(|r| anneal_read(&c, &betas, derive_seed(sched.seed, r)))
        .collect();
    let mut best_idx = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.1 < runs[best_idx].1 {
            best_idx = r;
        }
    }
    let read_energies = runs.iter().map(|r| r.1).collect();
    let (best, _) = runs.into_iter().nth(best_idx).expect("at least one read");
    let best_energy = model.energy(&best)?;
    Ok(SolveResult { best, best_energy, read_energies, wall_time: start.elapsed(), reads: sched.reads })
}
