use std::collections::BTreeMap;

use crate::error::{dimension, Result};
use crate::qubo::QuboModel;
use crate::scalar::Real;

/// `H(s) = −Σ_{i<j} J_ij s_i s_j − Σ_i h_i s_i + offset` over spins `s ∈ {−1, 1}`.
///
/// Related to a QUBO by `b = (1 − s)/2`, so bit 1 is spin −1.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel<T: Real> {
    pub couplings: BTreeMap<(usize, usize), T>,
    pub fields: Vec<T>,
    pub offset: T,
}

impl<T: Real> IsingModel<T> {
    pub fn num_spins(&self) -> usize {
        self.fields.len()
    }

    pub fn energy(&self, spins: &[i8]) -> Result<T> {
        if spins.len() != self.fields.len() {
            return Err(dimension(format!("{} spins given, model has {}", spins.len(), self.fields.len())));
        }
        let s = |i: usize| T::from_i8(spins[i]).unwrap();
        let mut e = self.offset;
        for (&(i, j), &v) in &self.couplings {
            e = e - v * s(i) * s(j);
        }
        for (i, &h) in self.fields.iter().enumerate() {
            e = e - h * s(i);
        }
        Ok(e)
    }
}

/// Spin for a bit under `s = 1 − 2b`.
pub fn spin_of(bit: bool) -> i8 {
    if bit {
        -1
    } else {
        1
    }
}

pub fn qubo_to_ising<T: Real>(m: &QuboModel<T>) -> IsingModel<T> {
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut fields = vec![T::zero(); m.num_vars()];
    let mut couplings = BTreeMap::new();
    let mut offset = m.offset();
    for (i, j, q) in m.entries() {
        if i == j {
            // q b = q/2 − (q/2) s
            offset = offset + q * half;
            fields[i] = fields[i] + q * half;
        } else {
            // q b_i b_j = q/4 (1 − s_i − s_j + s_i s_j)
            offset = offset + q * quarter;
            fields[i] = fields[i] + q * quarter;
            fields[j] = fields[j] + q * quarter;
            let e = couplings.entry((i, j)).or_insert_with(T::zero);
            *e = *e - q * quarter;
        }
    }
    couplings.retain(|_, v| *v != T::zero());
    IsingModel { couplings, fields, offset }
}

pub fn ising_to_qubo<T: Real>(model: &IsingModel<T>) -> Result<QuboModel<T>> {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let mut q = QuboModel::new(model.num_spins());
    for (&(i, j), &v) in &model.couplings {
        // −J s_i s_j with s = 1 − 2b
        q.add_offset(-v)?;
        q.add_linear(i, two * v)?;
        q.add_linear(j, two * v)?;
        q.add(i, j, -four * v)?;
    }
    for (i, &h) in model.fields.iter().enumerate() {
        q.add_offset(-h)?;
        q.add_linear(i, two * h)?;
    }
    q.add_offset(model.offset)?;
    Ok(q)
}
