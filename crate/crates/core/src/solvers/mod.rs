//! QUBO minimizers.

mod anneal;
mod exhaustive;

pub use anneal::{solve_sa, AnnealSchedule};
pub use exhaustive::{solve_exhaustive, DEFAULT_MAX_BITS};

use std::time::Duration;

use crate::error::{dimension, Result};
use crate::qubo::QuboModel;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T: Real> {
    pub best: Vec<bool>,
    pub best_energy: T,
    /// Final energy of every read, in read order.
    pub read_energies: Vec<T>,
    pub wall_time: Duration,
    pub reads: usize,
}

/// Symmetric adjacency form of a model for O(degree) flip updates.
#[derive(Debug, Clone)]
pub struct CompiledQubo<T: Real> {
    diag: Vec<T>,
    start: Vec<usize>,
    neighbors: Vec<(usize, T)>,
    offset: T,
}

impl<T: Real> CompiledQubo<T> {
    pub fn new(model: &QuboModel<T>) -> Self {
        let n = model.num_vars();
        let mut diag = vec![T::zero(); n];
        let mut lists: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, j, v) in model.entries() {
            if i == j {
                diag[i] = v;
            } else {
                lists[i].push((j, v));
                lists[j].push((i, v));
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        start.push(0);
        for l in lists {
            neighbors.extend(l);
            start.push(neighbors.len());
        }
        Self { diag, start, neighbors, offset: model.offset() }
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    fn neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.neighbors[self.start[i]..self.start[i + 1]]
    }

    /// `Σ_{j≠i} Q_ij b_j` for every `i`.
    fn local_fields(&self, bits: &[bool]) -> Vec<T> {
        (0..self.num_vars())
            .map(|i| self.neighbors(i).iter().filter(|(j, _)| bits[*j]).map(|(_, v)| *v).sum())
            .collect()
    }

    pub fn energy(&self, bits: &[bool]) -> T {
        let mut e = self.offset;
        for i in 0..self.num_vars() {
            if !bits[i] {
                continue;
            }
            e = e + self.diag[i];
            for &(j, v) in self.neighbors(i) {
                if j > i && bits[j] {
                    e = e + v;
                }
            }
        }
        e
    }

    /// `E(b with bit i flipped) − E(b)`.
    pub fn flip_delta(&self, bits: &[bool], i: usize) -> Result<T> {
        if bits.len() != self.num_vars() {
            return Err(dimension(format!("assignment has {} bits, model has {} variables", bits.len(), self.num_vars())));
        }
        if i >= self.num_vars() {
            return Err(dimension(format!("variable {i} out of range for {} variables", self.num_vars())));
        }
        let field: T = self.neighbors(i).iter().filter(|(j, _)| bits[*j]).map(|(_, v)| *v).sum();
        Ok(flip_sign::<T>(bits[i]) * (self.diag[i] + field))
    }
}

#[inline]
fn flip_sign<T: Real>(bit: bool) -> T {
    if bit {
        -T::one()
    } else {
        T::one()
    }
}

/// Relative tolerance for incrementally tracked energies.
fn drift_tol<T: Real>() -> f64 {
    T::epsilon().as_f64().sqrt().max(1e-9)
}

/// Convenience wrapper compiling the model first; prefer
/// [`CompiledQubo::flip_delta`] in loops.
pub fn flip_delta<T: Real>(model: &QuboModel<T>, bits: &[bool], i: usize) -> Result<T> {
    CompiledQubo::new(model).flip_delta(bits, i)
}

/// SplitMix64 finalizer; derives independent sub-seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
