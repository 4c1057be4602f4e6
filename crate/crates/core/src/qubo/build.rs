//! Compilation of quantized l0 objectives into QUBO form.
//!
//! The l0 count of one entry is `1 − Π_k (1 − b_k)`. Products longer than two
//! factors are reduced with a chain of auxiliaries `c_k = c_{k−1} (1 − b_{k+1})`
//! starting from the literal `c_0 = 1 − b_1`; each link is enforced by the
//! penalty `p(a, b, c) = 3c + ab − 2ac − 2bc`, which is zero exactly when
//! `c = ab` and at least one otherwise.
//!
//! Variable order: signal bits first (row major, then member, then bit),
//! then bit-chain auxiliaries, then row-chain auxiliaries.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, invalid, Error, Result};
use crate::model::{complex_squared_norm, squared_norm, ComplexMatrix, Quantizer, RealMatrix};
use crate::qubo::{Literal, QuboModel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct BuildParams<T: Real> {
    /// l0 regularization γ₀; the fidelity term is scaled by `1/(2γ₀)`.
    pub gamma0: T,
    /// Penalty weight of bit-chain gadgets.
    pub lambda_c: T,
    /// Penalty weight of row-chain gadgets (group objective only).
    pub lambda_d: T,
}

impl<T: Real> BuildParams<T> {
    pub fn new(gamma0: T, lambda_c: T, lambda_d: T) -> Result<Self> {
        let p = Self { gamma0, lambda_c, lambda_d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma0", self.gamma0), ("lambda_c", self.lambda_c), ("lambda_d", self.lambda_d)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Build(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Weights below one let a single violated gadget pay for itself with
    /// one unit of l0 gain.
    pub fn warnings(&self) -> Vec<String> {
        [("lambda_c", self.lambda_c), ("lambda_d", self.lambda_d)]
            .into_iter()
            .filter(|(_, v)| *v < T::one())
            .map(|(name, v)| format!("{name} = {v} is below 1; chain constraints may be violated at the optimum"))
            .collect()
    }
}

impl<T: Real> Default for BuildParams<T> {
    fn default() -> Self {
        Self { gamma0: T::lit(0.001), lambda_c: T::lit(1.5), lambda_d: T::lit(1.5) }
    }
}

/// How the members of a row group map onto the real least-squares problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLayout {
    /// Member `l` of row `i` is coefficient `i` of observation column `l`.
    Real,
    /// Block-lifted complex coefficients: member `2c` / `2c + 1` of row `i`
    /// is the real / imaginary part of entry `i` in observation column `c`,
    /// i.e. lifted coefficient `i` / `M + i`.
    ComplexPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Single,
    Group(GroupLayout),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRole {
    SignalBit { row: usize, column: usize, bit: usize },
    ChainAux { row: usize, column: usize, position: usize },
    RowAux { row: usize, position: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetKind {
    BitChain { row: usize, column: usize, position: usize },
    RowChain { row: usize, position: usize },
}

/// Constraint `out = a · b` enforced by a penalty gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gadget {
    pub a: Literal,
    pub b: Literal,
    pub out: usize,
    pub kind: GadgetKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub gadget: usize,
    pub output: usize,
    pub kind: GadgetKind,
}

/// Role of every variable of a compiled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariableRegistry<T: Real> {
    pub layout: Layout,
    /// Signal entries (row groups).
    pub rows: usize,
    /// Members per row: 1 for the single objective, `L_r` for groups.
    pub columns: usize,
    pub quantizer: Quantizer<T>,
    pub roles: Vec<VarRole>,
    /// Gadgets in dependency order: inputs are produced before outputs.
    pub gadgets: Vec<Gadget>,
}

impl<T: Real> VariableRegistry<T> {
    pub fn num_vars(&self) -> usize {
        self.roles.len()
    }

    pub fn bit_length(&self) -> usize {
        self.quantizer.bit_length()
    }

    pub fn num_signal_bits(&self) -> usize {
        self.rows * self.columns * self.bit_length()
    }

    #[inline]
    pub fn signal_var(&self, row: usize, column: usize, bit: usize) -> usize {
        (row * self.columns + column) * self.bit_length() + bit
    }

    /// Sets every auxiliary to the value its constraint demands, given the
    /// signal bits already in place.
    pub fn complete_assignment(&self, bits: &mut [bool]) -> Result<()> {
        self.check_len(bits)?;
        for g in &self.gadgets {
            bits[g.out] = g.a.eval(bits) && g.b.eval(bits);
        }
        Ok(())
    }

    /// Assignment whose signal bits quantize `values` (rows × columns, row
    /// major) and whose auxiliaries satisfy every constraint.
    pub fn encode(&self, values: &[T]) -> Result<Vec<bool>> {
        if values.len() != self.rows * self.columns {
            return Err(dimension(format!("expected {} values, got {}", self.rows * self.columns, values.len())));
        }
        let mut bits = vec![false; self.num_vars()];
        for row in 0..self.rows {
            for col in 0..self.columns {
                let pattern = self.quantizer.quantize(values[row * self.columns + col]);
                for (k, b) in pattern.into_iter().enumerate() {
                    bits[self.signal_var(row, col, k)] = b;
                }
            }
        }
        self.complete_assignment(&mut bits)?;
        Ok(bits)
    }

    fn check_len(&self, bits: &[bool]) -> Result<()> {
        if bits.len() != self.num_vars() {
            return Err(dimension(format!("assignment has {} bits, registry has {} variables", bits.len(), self.num_vars())));
        }
        Ok(())
    }
}

/// Signal decoded from an assignment: `rows × columns` member values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecodedSignal<T: Real> {
    pub layout: Layout,
    pub rows: usize,
    pub columns: usize,
    /// Row-major member values.
    pub values: Vec<T>,
}

impl<T: Real> DecodedSignal<T> {
    pub fn get(&self, row: usize, column: usize) -> T {
        self.values[row * self.columns + column]
    }

    pub fn column(&self, column: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, column)).collect()
    }

    /// Number of observation columns the members span.
    pub fn observation_columns(&self) -> usize {
        match self.layout {
            Layout::Group(GroupLayout::ComplexPairs) => self.columns / 2,
            _ => self.columns,
        }
    }

    /// Real coefficient vector multiplying the lifted operator for
    /// observation column `c`.
    pub fn coefficient_column(&self, c: usize) -> Vec<T> {
        match self.layout {
            Layout::Group(GroupLayout::ComplexPairs) => {
                let mut v = self.column(2 * c);
                v.extend(self.column(2 * c + 1));
                v
            }
            _ => self.column(c),
        }
    }

    /// Complex entries for observation column `c`; real layouts have zero
    /// imaginary part.
    pub fn complex_column(&self, c: usize) -> Vec<Complex<T>> {
        match self.layout {
            Layout::Group(GroupLayout::ComplexPairs) => (0..self.rows)
                .map(|r| Complex::new(self.get(r, 2 * c), self.get(r, 2 * c + 1)))
                .collect(),
            _ => self.column(c).into_iter().map(|v| Complex::new(v, T::zero())).collect(),
        }
    }

    /// Rows with any nonzero member.
    pub fn nonzero_rows(&self) -> usize {
        (0..self.rows)
            .filter(|&r| (0..self.columns).any(|c| self.get(r, c) != T::zero()))
            .count()
    }
}

/// Adds `weight · (3c + ab − 2ac − 2bc)`, the penalty enforcing `c = a · b`.
pub fn penalty_terms<T: Real>(
    model: &mut QuboModel<T>,
    a: impl Into<Literal>,
    b: impl Into<Literal>,
    c: usize,
    weight: T,
) -> Result<()> {
    let (a, b) = (a.into(), b.into());
    if a.var == b.var || a.var == c || b.var == c {
        return Err(Error::Build(format!(
            "penalty gadget needs three distinct variables, got {}, {}, {c}",
            a.var, b.var
        )));
    }
    if !(weight > T::zero()) {
        return Err(Error::Build(format!("penalty weight must be positive, got {weight}")));
    }
    let out = Literal::pos(c);
    let two = T::lit(2.0);
    model.add_literal(T::lit(3.0) * weight, out)?;
    model.add_product(weight, a, b)?;
    model.add_product(-two * weight, a, out)?;
    model.add_product(-two * weight, b, out)
}

struct FidelityTerm<T> {
    var: usize,
    coef_row: usize,
    weight: T,
}

/// Adds `scale · Σ_c ‖x_c − A z_c‖²` with `z_c[p] = Σ weight · b` over the
/// terms of column `c`.
fn add_fidelity<T: Real>(
    model: &mut QuboModel<T>,
    a: &RealMatrix<T>,
    x_cols: &[Vec<T>],
    terms: &[Vec<FidelityTerm<T>>],
    scale: T,
) -> Result<()> {
    let gram = a.gram();
    let two = T::lit(2.0);
    for (x, col_terms) in x_cols.iter().zip(terms) {
        let atx = a.tr_mul_vec(x)?;
        model.add_offset(scale * squared_norm(x))?;
        for (u, tu) in col_terms.iter().enumerate() {
            let g = gram.get(tu.coef_row, tu.coef_row);
            model.add_linear(tu.var, scale * (g * tu.weight * tu.weight - two * tu.weight * atx[tu.coef_row]))?;
            for tv in &col_terms[u + 1..] {
                let g = gram.get(tu.coef_row, tv.coef_row);
                model.add(tu.var, tv.var, scale * two * g * tu.weight * tv.weight)?;
            }
        }
    }
    Ok(())
}

struct Allocator {
    roles: Vec<VarRole>,
}

impl Allocator {
    fn push(&mut self, role: VarRole) -> usize {
        self.roles.push(role);
        self.roles.len() - 1
    }
}

/// Compiles `(1/2γ₀)‖x − A·decode(B)‖² + ‖decode(B)‖₀` for one real
/// observation.
///
/// Entry `i` uses `K − 2` chain auxiliaries (none for `K ≤ 2`) and the term
/// `1 − c_{K−2}(1 − b_K)`.
pub fn build_l0_qubo<T: Real>(
    a_real: &RealMatrix<T>,
    x_real: &[T],
    q: &Quantizer<T>,
    params: &BuildParams<T>,
) -> Result<(QuboModel<T>, VariableRegistry<T>)> {
    params.validate()?;
    if x_real.len() != a_real.rows() {
        return Err(dimension(format!("operator has {} rows, observation has {}", a_real.rows(), x_real.len())));
    }
    let m = a_real.cols();
    let k = q.bit_length();
    let mut alloc = Allocator { roles: Vec::with_capacity(m * k + m * k.saturating_sub(2)) };
    for row in 0..m {
        for bit in 0..k {
            alloc.push(VarRole::SignalBit { row, column: 0, bit });
        }
    }
    let sig = |row: usize, bit: usize| row * k + bit;

    let mut chains = Vec::with_capacity(m);
    for row in 0..m {
        let aux: Vec<usize> = (1..k.saturating_sub(1))
            .map(|position| alloc.push(VarRole::ChainAux { row, column: 0, position }))
            .collect();
        chains.push(aux);
    }

    let mut model = QuboModel::new(alloc.roles.len());
    let scale = T::one() / (T::lit(2.0) * params.gamma0);
    let terms: Vec<FidelityTerm<T>> = (0..m)
        .flat_map(|row| (0..k).map(move |bit| (row, bit)))
        .map(|(row, bit)| FidelityTerm { var: sig(row, bit), coef_row: row, weight: q.weights()[bit] })
        .collect();
    add_fidelity(&mut model, a_real, &[x_real.to_vec()], &[terms], scale)?;

    let mut gadgets = Vec::new();
    for row in 0..m {
        match k {
            1 => model.add_linear(sig(row, 0), T::one())?,
            _ => {
                let mut prev = Literal::neg(sig(row, 0));
                for (idx, &c) in chains[row].iter().enumerate() {
                    let position = idx + 1;
                    let a = Literal::neg(sig(row, position));
                    penalty_terms(&mut model, a, prev, c, params.lambda_c)?;
                    gadgets.push(Gadget { a, b: prev, out: c, kind: GadgetKind::BitChain { row, column: 0, position } });
                    prev = Literal::pos(c);
                }
                model.add_offset(T::one())?;
                model.add_product(-T::one(), prev, Literal::neg(sig(row, k - 1)))?;
            }
        }
    }

    let registry = VariableRegistry {
        layout: Layout::Single,
        rows: m,
        columns: 1,
        quantizer: q.clone(),
        roles: alloc.roles,
        gadgets,
    };
    Ok((model, registry))
}

/// Compiles `(1/2γ₀)‖X − A·Z‖² + (number of nonzero rows of Z)`.
///
/// Each (row, member) chain reduces `Π_k (1 − b_k)` to one auxiliary
/// (`K − 1` of them, none for `K = 1` where the literal `1 − b` serves);
/// each row then chains its member indicators into one variable with
/// `L_r − 1` row auxiliaries, and the objective adds `1 − d_last`.
pub fn build_group_l0_qubo<T: Real>(
    a_real: &RealMatrix<T>,
    x_cols: &[Vec<T>],
    q: &Quantizer<T>,
    params: &BuildParams<T>,
    layout: GroupLayout,
) -> Result<(QuboModel<T>, VariableRegistry<T>)> {
    params.validate()?;
    if x_cols.is_empty() {
        return Err(invalid("group objective needs at least one observation column"));
    }
    if x_cols.iter().any(|x| x.len() != a_real.rows()) {
        return Err(dimension(format!("every observation column must have {} entries", a_real.rows())));
    }
    let (rows, members) = match layout {
        GroupLayout::Real => (a_real.cols(), x_cols.len()),
        GroupLayout::ComplexPairs => {
            if a_real.cols() % 2 != 0 {
                return Err(dimension("complex-pair layout needs a block-lifted operator with an even column count"));
            }
            (a_real.cols() / 2, 2 * x_cols.len())
        }
    };
    let placement = |row: usize, member: usize| -> (usize, usize) {
        match layout {
            GroupLayout::Real => (row, member),
            GroupLayout::ComplexPairs => (row + (member % 2) * rows, member / 2),
        }
    };

    let k = q.bit_length();
    let mut alloc = Allocator { roles: Vec::new() };
    for row in 0..rows {
        for column in 0..members {
            for bit in 0..k {
                alloc.push(VarRole::SignalBit { row, column, bit });
            }
        }
    }
    let sig = |row: usize, column: usize, bit: usize| (row * members + column) * k + bit;
    let mut bit_chains = vec![Vec::new(); rows * members];
    for row in 0..rows {
        for column in 0..members {
            bit_chains[row * members + column] = (1..k)
                .map(|position| alloc.push(VarRole::ChainAux { row, column, position }))
                .collect::<Vec<_>>();
        }
    }
    let mut row_chains = Vec::with_capacity(rows);
    for row in 0..rows {
        let aux: Vec<usize> = (1..members).map(|position| alloc.push(VarRole::RowAux { row, position })).collect();
        row_chains.push(aux);
    }

    let mut model = QuboModel::new(alloc.roles.len());
    let scale = T::one() / (T::lit(2.0) * params.gamma0);
    let mut terms: Vec<Vec<FidelityTerm<T>>> = (0..x_cols.len()).map(|_| Vec::new()).collect();
    for row in 0..rows {
        for column in 0..members {
            let (coef_row, obs_col) = placement(row, column);
            for bit in 0..k {
                terms[obs_col].push(FidelityTerm { var: sig(row, column, bit), coef_row, weight: q.weights()[bit] });
            }
        }
    }
    add_fidelity(&mut model, a_real, x_cols, &terms, scale)?;

    let mut gadgets = Vec::new();
    for row in 0..rows {
        let mut indicators = Vec::with_capacity(members);
        for column in 0..members {
            let mut prev = Literal::neg(sig(row, column, 0));
            for (idx, &c) in bit_chains[row * members + column].iter().enumerate() {
                let position = idx + 1;
                let a = Literal::neg(sig(row, column, position));
                penalty_terms(&mut model, a, prev, c, params.lambda_c)?;
                gadgets.push(Gadget { a, b: prev, out: c, kind: GadgetKind::BitChain { row, column, position } });
                prev = Literal::pos(c);
            }
            indicators.push(prev);
        }
        let mut prev = indicators[0];
        for (idx, &d) in row_chains[row].iter().enumerate() {
            let position = idx + 1;
            let a = indicators[position];
            penalty_terms(&mut model, a, prev, d, params.lambda_d)?;
            gadgets.push(Gadget { a, b: prev, out: d, kind: GadgetKind::RowChain { row, position } });
            prev = Literal::pos(d);
        }
        model.add_offset(T::one())?;
        model.add_literal(-T::one(), prev)?;
    }

    let registry = VariableRegistry {
        layout: Layout::Group(layout),
        rows,
        columns: members,
        quantizer: q.clone(),
        roles: alloc.roles,
        gadgets,
    };
    Ok((model, registry))
}

/// Decodes the signal bits of an assignment; auxiliaries are ignored.
pub fn decode_solution<T: Real>(reg: &VariableRegistry<T>, bits: &[bool]) -> Result<DecodedSignal<T>> {
    reg.check_len(bits)?;
    let k = reg.bit_length();
    let values = (0..reg.rows * reg.columns)
        .map(|member| reg.quantizer.decode(&bits[member * k..(member + 1) * k]))
        .collect::<Result<Vec<T>>>()?;
    Ok(DecodedSignal { layout: reg.layout, rows: reg.rows, columns: reg.columns, values })
}

/// Every gadget whose output differs from the product of its inputs.
pub fn constraint_violations<T: Real>(reg: &VariableRegistry<T>, bits: &[bool]) -> Result<Vec<Violation>> {
    reg.check_len(bits)?;
    Ok(reg
        .gadgets
        .iter()
        .enumerate()
        .filter(|(_, g)| bits[g.out] != (g.a.eval(bits) && g.b.eval(bits)))
        .map(|(gadget, g)| Violation { gadget, output: g.out, kind: g.kind })
        .collect())
}

fn check_gamma<T: Real>(gamma0: T) -> Result<()> {
    if !(gamma0 > T::zero()) {
        return Err(invalid(format!("gamma0 must be positive, got {gamma0}")));
    }
    Ok(())
}

/// `(1/2γ₀)‖x − Az‖² + ‖z‖₀` for a complex operator and coefficients.
pub fn evaluate_l0_objective<T: Real>(
    a: &ComplexMatrix<T>,
    x: &[Complex<T>],
    z: &[Complex<T>],
    gamma0: T,
) -> Result<T> {
    check_gamma(gamma0)?;
    if x.len() != a.rows() {
        return Err(dimension("observation length must equal operator rows"));
    }
    let az = a.mul_vec(z)?;
    let r: Vec<Complex<T>> = x.iter().zip(&az).map(|(p, q)| p - q).collect();
    let l0 = z.iter().filter(|c| c.re != T::zero() || c.im != T::zero()).count();
    Ok(complex_squared_norm(&r) / (T::lit(2.0) * gamma0) + T::from_usize(l0).unwrap())
}

/// Real-lifted form of [`evaluate_l0_objective`].
pub fn evaluate_l0_objective_real<T: Real>(a: &RealMatrix<T>, x: &[T], z: &[T], gamma0: T) -> Result<T> {
    check_gamma(gamma0)?;
    if x.len() != a.rows() {
        return Err(dimension("observation length must equal operator rows"));
    }
    let az = a.mul_vec(z)?;
    let r: Vec<T> = x.iter().zip(&az).map(|(&p, &q)| p - q).collect();
    let l0 = z.iter().filter(|v| **v != T::zero()).count();
    Ok(squared_norm(&r) / (T::lit(2.0) * gamma0) + T::from_usize(l0).unwrap())
}

/// `(1/2γ₀) Σ_c ‖x_c − A z_c‖² + (nonzero rows)` in the lifted coordinates
/// the group compiler uses.
pub fn evaluate_group_l0_objective<T: Real>(
    a_real: &RealMatrix<T>,
    x_cols: &[Vec<T>],
    z: &DecodedSignal<T>,
    gamma0: T,
) -> Result<T> {
    check_gamma(gamma0)?;
    if x_cols.len() != z.observation_columns() {
        return Err(dimension(format!(
            "signal spans {} observation columns, got {}",
            z.observation_columns(),
            x_cols.len()
        )));
    }
    let mut fid = T::zero();
    for (c, x) in x_cols.iter().enumerate() {
        let az = a_real.mul_vec(&z.coefficient_column(c))?;
        if az.len() != x.len() {
            return Err(dimension("observation length must equal operator rows"));
        }
        fid = fid + x.iter().zip(&az).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>();
    }
    Ok(fid / (T::lit(2.0) * gamma0) + T::from_usize(z.nonzero_rows()).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(gamma0: f64) -> BuildParams<f64> {
        BuildParams::new(gamma0, 1.5, 1.5).unwrap()
    }

    fn bits_of(pattern: usize, n: usize) -> Vec<bool> {
        (0..n).map(|b| pattern >> b & 1 == 1).collect()
    }

    /// Integer truth table of `3c + ab − 2ac − 2bc`.
    fn gadget_value(a: i64, b: i64, c: i64) -> i64 {
        3 * c + a * b - 2 * a * c - 2 * b * c
    }

    #[test]
    fn penalty_truth_table() {
        let mut table = Vec::new();
        for p in 0..8 {
            let (a, b, c) = (p & 1, p >> 1 & 1, p >> 2 & 1);
            let v = gadget_value(a, b, c);
            assert!(v >= 0);
            assert_eq!(v == 0, c == a * b);
            table.push(v);
        }
        // (0,0,0), (1,1,0), (1,1,1), (0,0,1)
        assert_eq!(gadget_value(0, 0, 0), 0);
        assert_eq!(gadget_value(1, 1, 0), 1);
        assert_eq!(gadget_value(1, 1, 1), 0);
        assert_eq!(gadget_value(0, 0, 1), 3);

        let mut m = QuboModel::<f64>::new(3);
        penalty_terms(&mut m, 0, 1, 2, 1.0).unwrap();
        for p in 0..8 {
            assert_eq!(m.energy(&bits_of(p, 3)).unwrap(), table[p] as f64);
        }
    }

    #[test]
    fn penalty_rejects_duplicates_and_bad_weight() {
        let mut m = QuboModel::<f64>::new(3);
        assert!(penalty_terms(&mut m, 0, 0, 2, 1.0).is_err());
        assert!(penalty_terms(&mut m, 0, 1, 1, 1.0).is_err());
        assert!(penalty_terms(&mut m, 0, 1, 2, 0.0).is_err());
    }

    #[test]
    fn negated_literal_expansion_is_exact() {
        // p(1 − b, c0, c1) on variables (b, c0, c1) = (0, 1, 2)
        let mut m = QuboModel::<f64>::new(3);
        penalty_terms(&mut m, Literal::neg(0), 1, 2, 1.0).unwrap();
        for p in 0..8 {
            let bits = bits_of(p, 3);
            let (b, c0, c1) = (bits[0] as i64, bits[1] as i64, bits[2] as i64);
            assert_eq!(m.energy(&bits).unwrap(), gadget_value(1 - b, c0, c1) as f64);
        }
        // b = 1 behaves as p(0, c0, c1) = 3c1 − 2 c0 c1
        for (c0, c1) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let e = m.energy(&[true, c0 == 1, c1 == 1]).unwrap();
            assert_eq!(e, (3 * c1 - 2 * c0 * c1) as f64);
        }
    }

    #[test]
    fn single_k1_zero_observation() {
        let a = RealMatrix::new(1, 1, vec![1.0]).unwrap();
        let q = Quantizer::new(vec![1.0]).unwrap();
        let (m, reg) = build_l0_qubo(&a, &[0.0], &q, &params(1.0)).unwrap();
        assert_eq!(reg.num_vars(), 1);
        assert_eq!(m.energy(&[false]).unwrap(), 0.0);
        // (1/2)(1)^2 + 1
        assert_eq!(m.energy(&[true]).unwrap(), 1.5);
    }

    #[test]
    fn single_k2_enumeration() {
        let a = RealMatrix::new(1, 1, vec![1.0]).unwrap();
        let q = Quantizer::new(vec![0.5, 0.25]).unwrap();
        let (m, reg) = build_l0_qubo(&a, &[0.75], &q, &params(0.001)).unwrap();
        assert_eq!(reg.num_vars(), 2);
        let energies: Vec<f64> = (0..4).map(|p| m.energy(&bits_of(p, 2)).unwrap()).collect();
        assert!((energies[3] - 1.0).abs() < 1e-9);
        assert!((energies[0] - 281.25).abs() < 1e-9);
        let argmin = (0..4).min_by(|&i, &j| energies[i].total_cmp(&energies[j])).unwrap();
        assert_eq!(argmin, 3);
    }

    #[test]
    fn variable_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a2 = RealMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let q3 = Quantizer::<f64>::unsigned(3).unwrap();
        let (_, reg) = build_l0_qubo(&a2, &[0.1, 0.2], &q3, &params(0.001)).unwrap();
        assert_eq!(reg.num_vars(), 8);

        let a32 = RealMatrix::from_fn(16, 32, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let q4 = Quantizer::<f64>::unsigned(4).unwrap();
        let (_, reg) = build_l0_qubo(&a32, &[0.0; 16], &q4, &params(0.001)).unwrap();
        assert_eq!(reg.num_vars(), 192);

        let q2 = Quantizer::<f64>::unsigned(2).unwrap();
        let (_, reg) =
            build_group_l0_qubo(&a2, &[vec![0.1, 0.2], vec![0.0, 0.3]], &q2, &params(0.001), GroupLayout::Real).unwrap();
        assert_eq!(reg.num_vars(), 14);
    }

    #[test]
    fn signal_bits_precede_auxiliaries() {
        let a = RealMatrix::from_fn(2, 3, |r, c| (r + c) as f64).unwrap();
        let q = Quantizer::<f64>::unsigned(4).unwrap();
        let (_, reg) = build_l0_qubo(&a, &[1.0, 0.0], &q, &params(0.01)).unwrap();
        let first_aux = reg.roles.iter().position(|r| !matches!(r, VarRole::SignalBit { .. })).unwrap();
        assert_eq!(first_aux, reg.num_signal_bits());
        assert!(reg.roles[first_aux..].iter().all(|r| !matches!(r, VarRole::SignalBit { .. })));
    }

    #[test]
    fn group_single_member_k1() {
        // M = 1, L_r = 2, K = 1, w = (1): l0 term = 1 − (1 − b1)(1 − b2)
        let a = RealMatrix::new(1, 1, vec![0.0]).unwrap();
        let q = Quantizer::new(vec![1.0]).unwrap();
        let (m, reg) =
            build_group_l0_qubo(&a, &[vec![0.0], vec![0.0]], &q, &params(1.0), GroupLayout::Real).unwrap();
        assert_eq!(reg.num_vars(), 3);
        for p in 0..4 {
            let mut bits = bits_of(p, 3);
            reg.complete_assignment(&mut bits).unwrap();
            let want = if p == 0 { 0.0 } else { 1.0 };
            assert_eq!(m.energy(&bits).unwrap(), want);
        }
    }

    #[test]
    fn group_with_one_column_matches_single_constrained_energies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = RealMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let q = Quantizer::<f64>::unsigned(3).unwrap();
        let p = params(0.05);
        let (ms, rs) = build_l0_qubo(&a, &x, &q, &p).unwrap();
        let (mg, rg) = build_group_l0_qubo(&a, &[x.clone()], &q, &p, GroupLayout::Real).unwrap();
        for pattern in 0..64usize {
            let values: Vec<f64> = (0..2).map(|row| q.levels()[pattern >> (3 * row) & 7]).collect();
            let es = ms.energy(&rs.encode(&values).unwrap()).unwrap();
            let eg = mg.energy(&rg.encode(&values).unwrap()).unwrap();
            assert!((es - eg).abs() < 1e-9, "{es} vs {eg}");
        }
    }

    #[test]
    fn decode_examples() {
        let a = RealMatrix::new(1, 1, vec![1.0]).unwrap();
        let q = Quantizer::<f64>::unsigned(4).unwrap();
        let (_, reg) = build_l0_qubo(&a, &[0.0], &q, &params(0.01)).unwrap();
        let zero = decode_solution(&reg, &vec![false; reg.num_vars()]).unwrap();
        assert_eq!(zero.values, vec![0.0]);
        let mut bits = vec![false; reg.num_vars()];
        bits[0] = true;
        bits[2] = true;
        assert_eq!(decode_solution(&reg, &bits).unwrap().values, vec![0.625]);
        assert!(decode_solution(&reg, &[true]).is_err());
    }

    #[test]
    fn group_decode_matches_per_column_decode() {
        let a = RealMatrix::from_fn(2, 2, |r, c| (1 + r + c) as f64).unwrap();
        let q = Quantizer::<f64>::unsigned(2).unwrap();
        let (_, reg) =
            build_group_l0_qubo(&a, &[vec![0.0; 2], vec![0.0; 2]], &q, &params(0.1), GroupLayout::Real).unwrap();
        let values = vec![0.25, 0.5, 0.75, 0.0];
        let bits = reg.encode(&values).unwrap();
        let z = decode_solution(&reg, &bits).unwrap();
        assert_eq!(z.column(0), vec![0.25, 0.75]);
        assert_eq!(z.column(1), vec![0.5, 0.0]);
        for row in 0..2 {
            for col in 0..2 {
                let k = reg.bit_length();
                let start = reg.signal_var(row, col, 0);
                assert_eq!(q.decode(&bits[start..start + k]).unwrap(), z.get(row, col));
            }
        }
    }

    #[test]
    fn violations_examples() {
        let a = RealMatrix::from_fn(2, 2, |r, c| (r * 2 + c) as f64).unwrap();
        let q = Quantizer::<f64>::unsigned(4).unwrap();
        let (_, reg) = build_l0_qubo(&a, &[0.5, 0.5], &q, &params(0.01)).unwrap();
        let good = reg.encode(&[0.625, 0.0]).unwrap();
        assert!(constraint_violations(&reg, &good).unwrap().is_empty());

        // flip c_{0,1}: breaks the gadget producing it; the next one only
        // notices when its other input is 1
        let c01 = reg.roles.iter().position(|r| *r == VarRole::ChainAux { row: 0, column: 0, position: 1 }).unwrap();
        let mut bad = good.clone();
        bad[c01] = !bad[c01];
        let v = constraint_violations(&reg, &bad).unwrap();
        let mut expected = Vec::new();
        for (i, g) in reg.gadgets.iter().enumerate() {
            if g.out == c01 || ((g.a.var == c01 || g.b.var == c01) && bad[g.out] != (g.a.eval(&bad) && g.b.eval(&bad))) {
                expected.push(i);
            }
        }
        assert_eq!(v.iter().map(|x| x.gadget).collect::<Vec<_>>(), expected);
        assert!(v.iter().any(|x| x.output == c01));

        // zero signal needs all-ones chains
        let zeros = vec![false; reg.num_vars()];
        assert_eq!(constraint_violations(&reg, &zeros).unwrap().len(), 2);
        let mut fixed = zeros.clone();
        reg.complete_assignment(&mut fixed).unwrap();
        assert!(fixed[reg.num_signal_bits()..].iter().all(|&b| b));
    }

    #[test]
    fn objective_examples() {
        let a = ComplexMatrix::<f64>::new(1, 2, vec![Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)]).unwrap();
        let z = [Complex::new(0.5, 0.0), Complex::new(0.0, 0.0)];
        let x = a.mul_vec(&z).unwrap();
        assert_eq!(evaluate_l0_objective(&a, &x, &z, 0.001).unwrap(), 1.0);
        let zero = [Complex::new(0.0, 0.0); 2];
        assert!((evaluate_l0_objective(&a, &x, &zero, 0.001).unwrap() - 0.25 / 0.002).abs() < 1e-9);
        assert!(evaluate_l0_objective(&a, &x, &z, 0.0).is_err());
    }

    #[test]
    fn objective_matches_hand_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = ComplexMatrix::from_fn(3, 4, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .unwrap();
            let x: Vec<Complex<f64>> =
                (0..3).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let z: Vec<f64> = (0..4).map(|i| if i % 2 == 0 { rng.random_range(0.1..1.0) } else { 0.0 }).collect();
            let mut fid = 0.0;
            for r in 0..3 {
                let (mut re, mut im) = (x[r].re, x[r].im);
                for c in 0..4 {
                    re -= a.get(r, c).re * z[c];
                    im -= a.get(r, c).im * z[c];
                }
                fid += re * re + im * im;
            }
            let want = fid / 0.02 + 2.0;
            let zc: Vec<_> = z.iter().map(|&v| Complex::new(v, 0.0)).collect();
            let got = evaluate_l0_objective(&a, &x, &zc, 0.01).unwrap();
            assert!((got - want).abs() < 1e-12 * want.max(1.0));
            let (ar, xr) = crate::model::realify_for_real_signal(&a, &x).unwrap();
            let lifted = evaluate_l0_objective_real(&ar, &xr, &z, 0.01).unwrap();
            assert!((lifted - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = RealMatrix::new(1, 1, vec![1.0]).unwrap();
        let q = Quantizer::<f64>::unsigned(2).unwrap();
        let bad = BuildParams { gamma0: 0.0, lambda_c: 1.5, lambda_d: 1.5 };
        assert!(build_l0_qubo(&a, &[0.0], &q, &bad).is_err());
        assert!(build_l0_qubo(&a, &[0.0, 1.0], &q, &params(0.1)).is_err());
        assert!(build_group_l0_qubo(&a, &[], &q, &params(0.1), GroupLayout::Real).is_err());
        assert!(build_group_l0_qubo(&a, &[vec![0.0], vec![0.0, 1.0]], &q, &params(0.1), GroupLayout::Real).is_err());
        assert!(build_group_l0_qubo(&a, &[vec![0.0]], &q, &params(0.1), GroupLayout::ComplexPairs).is_err());
    }

    #[test]
    fn low_penalty_weights_warn() {
        assert!(BuildParams::<f64>::default().warnings().is_empty());
        assert_eq!(BuildParams::new(0.1, 0.5, 2.0).unwrap().warnings().len(), 1);
    }
}
