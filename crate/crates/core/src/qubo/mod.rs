//! QUBO models, their Ising form, the l0 compilers and the text file format.

mod build;
mod io;
mod ising;

pub use build::{
    build_group_l0_qubo, build_l0_qubo, constraint_violations, decode_solution, evaluate_group_l0_objective,
    evaluate_l0_objective, evaluate_l0_objective_real, penalty_terms, BuildParams, DecodedSignal, Gadget,
    GadgetKind, GroupLayout, Layout, VarRole, VariableRegistry, Violation,
};
pub use io::{export_qubo_file, import_qubo_file, read_qubo, write_qubo};
pub use ising::{ising_to_qubo, qubo_to_ising, spin_of, IsingModel};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{dimension, invalid, Result};
use crate::scalar::Real;

/// A binary variable or its negation `1 − b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Self { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Self { var, negated: true }
    }

    #[inline]
    pub fn eval(self, bits: &[bool]) -> bool {
        bits[self.var] != self.negated
    }

    /// `(constant, slope)` such that the literal equals `constant + slope * b`.
    fn affine<T: Real>(self) -> (T, T) {
        if self.negated {
            (T::one(), -T::one())
        } else {
            (T::zero(), T::one())
        }
    }
}

impl From<usize> for Literal {
    fn from(var: usize) -> Self {
        Literal::pos(var)
    }
}

/// `Σ_{i≤j} Q_ij b_i b_j + offset` over `n` binary variables.
///
/// Linear terms sit on the diagonal (`b² = b`). Only nonzero coefficients
/// are stored, keyed by `(i, j)` with `i ≤ j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel<T: Real> {
    num_vars: usize,
    coeffs: BTreeMap<(usize, usize), T>,
    offset: T,
}

impl<T: Real> QuboModel<T> {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, coeffs: BTreeMap::new(), offset: T::zero() }
    }

    /// Builds a model from `(i, j, value)` triples; entries for the same pair
    /// accumulate and pairs are normalized to `i ≤ j`.
    pub fn from_entries(num_vars: usize, entries: impl IntoIterator<Item = (usize, usize, T)>, offset: T) -> Result<Self> {
        let mut m = Self::new(num_vars);
        for (i, j, v) in entries {
            m.add(i, j, v)?;
        }
        m.add_offset(offset)?;
        Ok(m)
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn num_entries(&self) -> usize {
        self.coeffs.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.coeffs.get(&key).copied().unwrap_or_else(T::zero)
    }

    /// Stored entries in `(i, j)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.coeffs.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Grows the variable count; existing coefficients are unchanged.
    pub fn resize(&mut self, num_vars: usize) {
        assert!(num_vars >= self.num_vars, "models only grow");
        self.num_vars = num_vars;
    }

    pub fn add(&mut self, i: usize, j: usize, value: T) -> Result<()> {
        if !value.is_finite() {
            return Err(invalid("QUBO coefficients must be finite"));
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        if key.1 >= self.num_vars {
            return Err(dimension(format!("variable {} out of range for {} variables", key.1, self.num_vars)));
        }
        if value == T::zero() {
            return Ok(());
        }
        let entry = self.coeffs.entry(key).or_insert_with(T::zero);
        *entry = *entry + value;
        if *entry == T::zero() {
            self.coeffs.remove(&key);
        }
        Ok(())
    }

    pub fn add_linear(&mut self, i: usize, value: T) -> Result<()> {
        self.add(i, i, value)
    }

    pub fn add_offset(&mut self, value: T) -> Result<()> {
        if !value.is_finite() {
            return Err(invalid("QUBO offset must be finite"));
        }
        self.offset = self.offset + value;
        Ok(())
    }

    /// Adds `coef * lit`.
    pub fn add_literal(&mut self, coef: T, lit: Literal) -> Result<()> {
        let (c, s) = lit.affine::<T>();
        self.add_offset(coef * c)?;
        self.add_linear(lit.var, coef * s)
    }

    /// Adds `coef * a * b` for two literals, expanding negations into plain
    /// coefficients and the offset.
    pub fn add_product(&mut self, coef: T, a: Literal, b: Literal) -> Result<()> {
        let (ca, sa) = a.affine::<T>();
        let (cb, sb) = b.affine::<T>();
        self.add_offset(coef * ca * cb)?;
        self.add_linear(b.var, coef * ca * sb)?;
        self.add_linear(a.var, coef * sa * cb)?;
        // b_a * b_b; a repeated variable collapses to b (b² = b)
        self.add(a.var, b.var, coef * sa * sb)
    }

    /// Energy of an assignment including the offset.
    pub fn energy(&self, bits: &[bool]) -> Result<T> {
        if bits.len() != self.num_vars {
            return Err(dimension(format!("assignment has {} bits, model has {} variables", bits.len(), self.num_vars)));
        }
        let mut e = T::zero();
        for (&(i, j), &v) in &self.coeffs {
            if bits[i] && bits[j] {
                e = e + v;
            }
        }
        Ok(e + self.offset)
    }
}

/// `bᵀQb` plus offset.
pub fn evaluate_qubo<T: Real>(model: &QuboModel<T>, bits: &[bool]) -> Result<T> {
    model.energy(bits)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_model(n: usize, density: f64, rng: &mut ChaCha8Rng) -> QuboModel<f64> {
        let mut m = QuboModel::new(n);
        for i in 0..n {
            for j in i..n {
                if rng.random_bool(density) {
                    m.add(i, j, rng.random_range(-2.0..2.0)).unwrap();
                }
            }
        }
        m.add_offset(rng.random_range(-1.0..1.0)).unwrap();
        m
    }

    #[test]
    fn energy_examples() {
        let mut m = QuboModel::<f64>::new(3);
        m.add_offset(0.25).unwrap();
        assert_eq!(m.energy(&[false; 3]).unwrap(), 0.25);
        m.add_linear(0, 1.5).unwrap();
        assert_eq!(m.energy(&[true, false, false]).unwrap(), 1.75);
        assert!(m.energy(&[true]).is_err());
    }

    #[test]
    fn energy_matches_dense_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 7;
            let m = random_model(n, 0.6, &mut rng);
            let mut dense = vec![vec![0.0; n]; n];
            for (i, j, v) in m.entries() {
                dense[i][j] = v;
            }
            let b: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let x: Vec<f64> = b.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
            let mut dense_e = m.offset();
            for i in 0..n {
                for j in 0..n {
                    dense_e += x[i] * dense[i][j] * x[j];
                }
            }
            assert!((dense_e - m.energy(&b).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_entries_are_not_stored() {
        let mut m = QuboModel::<f64>::new(2);
        m.add(0, 1, 1.0).unwrap();
        m.add(1, 0, -1.0).unwrap();
        m.add(1, 1, 0.0).unwrap();
        assert_eq!(m.num_entries(), 0);
        assert!(m.add(0, 2, 1.0).is_err());
        assert!(m.add(0, 0, f64::NAN).is_err());
    }

    #[test]
    fn product_expansion_of_literals() {
        for a in [Literal::pos(0), Literal::neg(0)] {
            for b in [Literal::pos(1), Literal::neg(1), Literal::pos(0), Literal::neg(0)] {
                let mut m = QuboModel::<f64>::new(2);
                m.add_product(2.0, a, b).unwrap();
                for p in 0..4 {
                    let bits = [p & 1 == 1, p & 2 == 2];
                    let want = if a.eval(&bits) && b.eval(&bits) { 2.0 } else { 0.0 };
                    assert_eq!(m.energy(&bits).unwrap(), want);
                }
            }
        }
    }
}
