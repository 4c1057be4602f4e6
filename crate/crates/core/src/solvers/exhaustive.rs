use std::time::Instant;

use crate::error::{Error, Result};
use crate::qubo::QuboModel;
use crate::scalar::Real;
use crate::solvers::{drift_tol, flip_sign, CompiledQubo, SolveResult};

pub const DEFAULT_MAX_BITS: usize = 24;

/// Global minimum by Gray-code enumeration with O(degree) incremental
/// energy updates.
///
/// Among assignments with equal tracked energy the one with the smallest
/// integer code `Σ b_i 2^i` wins.
pub fn solve_exhaustive<T: Real>(model: &QuboModel<T>, max_bits: usize) -> Result<SolveResult<T>> {
    let n = model.num_vars();
    if n > max_bits || n >= 63 {
        return Err(Error::TooManyVariables { num_vars: n, max_bits: max_bits.min(62) });
    }
    let start = Instant::now();
    let c = CompiledQubo::new(model);
    let mut bits = vec![false; n];
    let mut field = vec![T::zero(); n];
    let mut energy = model.offset();
    let mut code = 0u64;
    let mut best_code = 0u64;
    let mut best_energy = energy;

    for step in 1..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        energy = energy + flip_sign::<T>(bits[i]) * (c.diag[i] + field[i]);
        bits[i] = !bits[i];
        code ^= 1 << i;
        let sign = flip_sign::<T>(!bits[i]);
        for &(j, v) in c.neighbors(i) {
            field[j] = field[j] + sign * v;
        }
        if energy < best_energy || (energy == best_energy && code < best_code) {
            best_energy = energy;
            best_code = code;
        }
    }

    debug_assert!({
        let last: Vec<bool> = (0..n).map(|i| code >> i & 1 == 1).collect();
        let full = model.energy(&last)?;
        (full - energy).abs().as_f64() <= drift_tol::<T>() * full.abs().as_f64().max(1.0)
    });

    let best: Vec<bool> = (0..n).map(|i| best_code >> i & 1 == 1).collect();
    let best_energy = model.energy(&best)?;
    Ok(SolveResult {
        best,
        best_energy,
        read_energies: vec![best_energy],
        wall_time: start.elapsed(),
        reads: 1,
    })
}
