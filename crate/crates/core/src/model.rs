//! Signals, observation operators and bit quantization.
//!
//! Every downstream objective is a real quadratic form. Complex operators are
//! lifted to real ones here, either for a real coefficient vector (stack real
//! and imaginary rows) or for a complex one (2x2 block form, coefficient
//! `i` and `M + i` hold the real and imaginary part of entry `i`).

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, invalid, Result};
use crate::scalar::Real;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "ComplexMatrixRepr<T>")]
pub struct ComplexMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
struct ComplexMatrixRepr<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> TryFrom<ComplexMatrixRepr<T>> for ComplexMatrix<T> {
    type Error = crate::Error;

    fn try_from(r: ComplexMatrixRepr<T>) -> Result<Self> {
        ComplexMatrix::new(r.rows, r.cols, r.data)
    }
}

impl<T: Real> ComplexMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_real(m: &RealMatrix<T>) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, z: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if z.len() != self.cols {
            return Err(dimension(format!("operator has {} columns, vector has {}", self.cols, z.len())));
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(z).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b))
            .collect())
    }

    pub fn mul_real_vec(&self, z: &[T]) -> Result<Vec<Complex<T>>> {
        let lifted: Vec<Complex<T>> = z.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.mul_vec(&lifted)
    }

    /// Conjugate transpose times a vector.
    pub fn adjoint_mul_vec(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.rows {
            return Err(dimension(format!("operator has {} rows, vector has {}", self.rows, x.len())));
        }
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (r, row) in self.data.chunks(self.cols).enumerate() {
            for (o, a) in out.iter_mut().zip(row) {
                *o = *o + a.conj() * x[r];
            }
        }
        Ok(out)
    }
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "RealMatrixRepr<T>")]
pub struct RealMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
struct RealMatrixRepr<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> TryFrom<RealMatrixRepr<T>> for RealMatrix<T> {
    type Error = crate::Error;

    fn try_from(r: RealMatrixRepr<T>) -> Result<Self> {
        RealMatrix::new(r.rows, r.cols, r.data)
    }
}

impl<T: Real> RealMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(dimension("columns have inconsistent lengths"));
        }
        Self::from_fn(rows, cols, |r, c| columns[c][r])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn mul_vec(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.cols {
            return Err(dimension(format!("operator has {} columns, vector has {}", self.cols, z.len())));
        }
        Ok(self
            .data
            .chunks(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(z).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Transpose times a vector.
    pub fn tr_mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.rows {
            return Err(dimension(format!("operator has {} rows, vector has {}", self.rows, x.len())));
        }
        let mut out = vec![T::zero(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * xr;
            }
        }
        Ok(out)
    }

    /// `AᵀA`.
    pub fn gram(&self) -> RealMatrix<T> {
        let mut g = RealMatrix::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                if row[i] == T::zero() {
                    continue;
                }
                for j in i..self.cols {
                    let v = g.get(i, j) + row[i] * row[j];
                    g.set(i, j, v);
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                let v = g.get(j, i);
                g.set(i, j, v);
            }
        }
        g
    }
}

fn check_finite<T: Real>(x: &[Complex<T>]) -> Result<()> {
    if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(invalid("vector entries must be finite"));
    }
    Ok(())
}

/// Stacks real and imaginary parts: `[Re A; Im A]` and `[Re x; Im x]`, so that
/// `‖x − Az‖²` for real `z` is an ordinary real least-squares residual.
pub fn realify_for_real_signal<T: Real>(a: &ComplexMatrix<T>, x: &[Complex<T>]) -> Result<(RealMatrix<T>, Vec<T>)> {
    if x.len() != a.rows() {
        return Err(dimension(format!("operator has {} rows, observation has {}", a.rows(), x.len())));
    }
    check_finite(x)?;
    let n = a.rows();
    let lifted = RealMatrix::from_fn(2 * n, a.cols(), |r, c| if r < n { a.get(r, c).re } else { a.get(r - n, c).im })?;
    Ok((lifted, stack_complex(x)))
}

/// Block lifting `[[Re A, −Im A], [Im A, Re A]]` for complex coefficients
/// `z = u + iv` laid out as `(u; v)`.
pub fn realify_for_complex_signal<T: Real>(a: &ComplexMatrix<T>) -> RealMatrix<T> {
    let (n, m) = (a.rows(), a.cols());
    RealMatrix::from_fn(2 * n, 2 * m, |r, c| {
        let e = a.get(r % n, c % m);
        match (r < n, c < m) {
            (true, true) => e.re,
            (true, false) => -e.im,
            (false, true) => e.im,
            (false, false) => e.re,
        }
    })
    .expect("lifted entries of a finite matrix are finite")
}

/// `[Re x; Im x]`.
pub fn stack_complex<T: Real>(x: &[Complex<T>]) -> Vec<T> {
    x.iter().map(|c| c.re).chain(x.iter().map(|c| c.im)).collect()
}

/// Inverse of [`stack_complex`] for a coefficient vector of even length.
pub fn unstack_complex<T: Real>(v: &[T]) -> Vec<Complex<T>> {
    let m = v.len() / 2;
    (0..m).map(|i| Complex::new(v[i], v[m + i])).collect()
}

pub fn squared_norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum()
}

pub fn complex_squared_norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Bit decomposition `z = Σ_k w_k b_k` of one signal entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "QuantizerRepr<T>", into = "QuantizerRepr<T>")]
pub struct Quantizer<T: Real> {
    weights: Vec<T>,
    /// Decoded value of every bit pattern, indexed by pattern (bit k = weight k).
    levels: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct QuantizerRepr<T: Real> {
    weights: Vec<T>,
}

impl<T: Real> TryFrom<QuantizerRepr<T>> for Quantizer<T> {
    type Error = crate::Error;

    fn try_from(r: QuantizerRepr<T>) -> Result<Self> {
        Quantizer::new(r.weights)
    }
}

impl<T: Real> From<Quantizer<T>> for QuantizerRepr<T> {
    fn from(q: Quantizer<T>) -> Self {
        QuantizerRepr { weights: q.weights }
    }
}

impl<T: Real> Quantizer<T> {
    /// Largest bit length accepted; construction enumerates all patterns.
    pub const MAX_BITS: usize = 20;

    pub fn new(weights: Vec<T>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || k > Self::MAX_BITS {
            return Err(invalid(format!("bit length must be in 1..={}, got {k}", Self::MAX_BITS)));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("quantizer weights must be finite"));
        }
        if weights.iter().all(|w| *w == T::zero()) {
            return Err(invalid("quantizer weights must not all be zero"));
        }
        let levels: Vec<T> = (0..1usize << k)
            .map(|p| (0..k).filter(|&b| p >> b & 1 == 1).map(|b| weights[b]).sum())
            .collect();
        let zeros = levels.iter().filter(|v| **v == T::zero()).count();
        if zeros != 1 {
            return Err(invalid(format!(
                "quantizer must decode only the all-zero pattern to 0, found {zeros} zero patterns"
            )));
        }
        Ok(Self { weights, levels })
    }

    /// Weights `2^-k`, covering `[0, 1)` with `2^K` levels.
    pub fn unsigned(bits: usize) -> Result<Self> {
        Self::new((1..=bits).map(|k| T::lit(0.5f64.powi(k as i32))).collect())
    }

    /// Weights `-2^-1, 2^-2, …`, covering `[-0.5, 0.5)`.
    pub fn signed(bits: usize) -> Result<Self> {
        let mut q: Vec<T> = (1..=bits).map(|k| T::lit(0.5f64.powi(k as i32))).collect();
        if let Some(first) = q.first_mut() {
            *first = -*first;
        }
        Self::new(q)
    }

    #[inline]
    pub fn bit_length(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Decoded value of every bit pattern.
    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn decode(&self, bits: &[bool]) -> Result<T> {
        if bits.len() != self.weights.len() {
            return Err(dimension(format!("expected {} bits, got {}", self.weights.len(), bits.len())));
        }
        Ok(self.weights.iter().zip(bits).filter(|(_, &b)| b).map(|(&w, _)| w).sum())
    }

    /// Nearest grid pattern; ties go to the smaller decoded magnitude, then to
    /// the lower pattern index.
    pub fn quantize_pattern(&self, value: T) -> usize {
        let mut best = 0usize;
        let mut best_dist = T::infinity();
        for (p, &level) in self.levels.iter().enumerate() {
            let dist = (level - value).abs();
            let better = dist < best_dist || (dist == best_dist && level.abs() < self.levels[best].abs());
            if better {
                best = p;
                best_dist = dist;
            }
        }
        best
    }

    pub fn quantize(&self, value: T) -> Vec<bool> {
        self.pattern_bits(self.quantize_pattern(value))
    }

    /// Grid value nearest to `value`.
    pub fn round(&self, value: T) -> T {
        self.levels[self.quantize_pattern(value)]
    }

    pub fn pattern_bits(&self, pattern: usize) -> Vec<bool> {
        (0..self.bit_length()).map(|b| pattern >> b & 1 == 1).collect()
    }
}

/// Real sparse vector; the support is every exactly nonzero entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "SparseSignalRepr<T>")]
pub struct SparseSignal<T: Real> {
    values: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
struct SparseSignalRepr<T: Real> {
    values: Vec<T>,
}

impl<T: Real> TryFrom<SparseSignalRepr<T>> for SparseSignal<T> {
    type Error = crate::Error;

    fn try_from(r: SparseSignalRepr<T>) -> Result<Self> {
        SparseSignal::new(r.values)
    }
}

impl<T: Real> SparseSignal<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("signal values must be finite"));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(|(i, _)| i).collect()
    }

    pub fn l0(&self) -> usize {
        self.values.iter().filter(|v| **v != T::zero()).count()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Indices with `|v_i| > threshold`.
pub fn support<T: Real>(v: &[T], threshold: T) -> Result<Vec<usize>> {
    if !(threshold >= T::zero()) {
        return Err(invalid("support threshold must be non-negative"));
    }
    Ok(v.iter().enumerate().filter(|(_, x)| x.abs() > threshold).map(|(i, _)| i).collect())
}

/// Indices of complex entries with either part above the threshold.
pub fn complex_support<T: Real>(v: &[Complex<T>], threshold: T) -> Result<Vec<usize>> {
    if !(threshold >= T::zero()) {
        return Err(invalid("support threshold must be non-negative"));
    }
    Ok(v.iter()
        .enumerate()
        .filter(|(_, c)| c.re.abs() > threshold || c.im.abs() > threshold)
        .map(|(i, _)| i)
        .collect())
}

fn relative_mismatch<T: Real>(lhs: &[Complex<T>], rhs: &[Complex<T>]) -> T {
    let diff: Vec<Complex<T>> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let scale = complex_squared_norm(lhs).sqrt().max(T::one());
    complex_squared_norm(&diff).sqrt() / scale
}

/// One observation `x = Az + n` of a sparse signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", try_from = "SparseInstanceRepr<T>")]
pub struct SparseInstance<T: Real> {
    operator: ComplexMatrix<T>,
    observation: Vec<Complex<T>>,
    truth: SparseSignal<T>,
    noise: Vec<Complex<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
struct SparseInstanceRepr<T: Real> {
    operator: ComplexMatrix<T>,
    observation: Vec<Complex<T>>,
    truth: SparseSignal<T>,
    noise: Vec<Complex<T>>,
}

impl<T: Real> TryFrom<SparseInstanceRepr<T>> for SparseInstance<T> {
    type Error = crate::Error;

    fn try_from(r: SparseInstanceRepr<T>) -> Result<Self> {
        SparseInstance::new(r.operator, r.observation, r.truth, r.noise)
    }
}

impl<T: Real> SparseInstance<T> {
    pub fn new(
        operator: ComplexMatrix<T>,
        observation: Vec<Complex<T>>,
        truth: SparseSignal<T>,
        noise: Vec<Complex<T>>,
    ) -> Result<Self> {
        if observation.len() != operator.rows() || noise.len() != operator.rows() {
            return Err(dimension("observation and noise must have one entry per operator row"));
        }
        check_finite(&observation)?;
        check_finite(&noise)?;
        let clean = operator.mul_real_vec(truth.values())?;
        let expected: Vec<Complex<T>> = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
        if relative_mismatch(&observation, &expected) > T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) {
            return Err(invalid("observation does not equal operator * truth + noise"));
        }
        Ok(Self { operator, observation, truth, noise })
    }

    pub fn operator(&self) -> &ComplexMatrix<T> {
        &self.operator
    }

    pub fn observation(&self) -> &[Complex<T>] {
        &self.observation
    }

    pub fn truth(&self) -> &SparseSignal<T> {
        &self.truth
    }

    pub fn noise(&self) -> &[Complex<T>] {
        &self.noise
    }
}

/// `S` observations of per-shot perturbations of one sparse signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", try_from = "MultiShotInstanceRepr<T>")]
pub struct MultiShotInstance<T: Real> {
    operator: ComplexMatrix<T>,
    shots: Vec<Vec<Complex<T>>>,
    truth: SparseSignal<T>,
    signals: Vec<SparseSignal<T>>,
    noise: Vec<Vec<Complex<T>>>,
}

#[derive(Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
struct MultiShotInstanceRepr<T: Real> {
    operator: ComplexMatrix<T>,
    shots: Vec<Vec<Complex<T>>>,
    truth: SparseSignal<T>,
    signals: Vec<SparseSignal<T>>,
    noise: Vec<Vec<Complex<T>>>,
}

impl<T: Real> TryFrom<MultiShotInstanceRepr<T>> for MultiShotInstance<T> {
    type Error = crate::Error;

    fn try_from(r: MultiShotInstanceRepr<T>) -> Result<Self> {
        MultiShotInstance::new(r.operator, r.shots, r.truth, r.signals, r.noise)
    }
}

impl<T: Real> MultiShotInstance<T> {
    pub fn new(
        operator: ComplexMatrix<T>,
        shots: Vec<Vec<Complex<T>>>,
        truth: SparseSignal<T>,
        signals: Vec<SparseSignal<T>>,
        noise: Vec<Vec<Complex<T>>>,
    ) -> Result<Self> {
        if shots.is_empty() || shots.len() != signals.len() || shots.len() != noise.len() {
            return Err(dimension("need at least one shot and one signal and noise record per shot"));
        }
        let base = truth.support();
        for ((x, z), n) in shots.iter().zip(&signals).zip(&noise) {
            if z.support() != base {
                return Err(invalid("every shot signal must share the support of the original signal"));
            }
            if x.len() != operator.rows() || n.len() != operator.rows() {
                return Err(dimension("shot length must equal operator rows"));
            }
            let clean = operator.mul_real_vec(z.values())?;
            let expected: Vec<Complex<T>> = clean.iter().zip(n).map(|(a, b)| a + b).collect();
            if relative_mismatch(x, &expected) > T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) {
                return Err(invalid("shot does not equal operator * signal + noise"));
            }
        }
        Ok(Self { operator, shots, truth, signals, noise })
    }

    pub fn operator(&self) -> &ComplexMatrix<T> {
        &self.operator
    }

    pub fn shots(&self) -> &[Vec<Complex<T>>] {
        &self.shots
    }

    pub fn truth(&self) -> &SparseSignal<T> {
        &self.truth
    }

    pub fn signals(&self) -> &[SparseSignal<T>] {
        &self.signals
    }

    pub fn noise(&self) -> &[Vec<Complex<T>>] {
        &self.noise
    }

    /// Entry-wise mean of the observations.
    pub fn averaged_observation(&self) -> Vec<Complex<T>> {
        let s = T::from_usize(self.shots.len()).unwrap();
        (0..self.operator.rows())
            .map(|r| self.shots.iter().fold(Complex::new(T::zero(), T::zero()), |acc, x| acc + x[r]) / s)
            .collect()
    }
}
