//! Direction-of-arrival operators and synthetic sparse instances.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, invalid, Error, Result};
use crate::linalg::complex_svd;
use crate::model::{ComplexMatrix, MultiShotInstance, Quantizer, SparseInstance, SparseSignal};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `φ_m = −π/2 + π m / M`
    UniformAngle,
    /// `φ_m = arcsin(2m/M − 1)`
    Arcsin,
}

/// Uniform linear array looking at `M` candidate azimuths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaGrid {
    pub sensors: usize,
    pub grid_size: usize,
    /// Element spacing over wavelength.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub kind: GridKind,
}

fn default_spacing() -> f64 {
    0.5
}

impl DoaGrid {
    pub fn new(sensors: usize, grid_size: usize, kind: GridKind) -> Result<Self> {
        let g = Self { sensors, grid_size, spacing: default_spacing(), kind };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 || self.grid_size == 0 {
            return Err(invalid("grid needs at least one sensor and one azimuth"));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(invalid(format!("element spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        if self.sensors >= self.grid_size {
            vec![format!(
                "{} sensors for {} azimuths: the problem is not underdetermined",
                self.sensors, self.grid_size
            )]
        } else {
            Vec::new()
        }
    }

    /// Azimuths in radians, ascending.
    pub fn angles(&self) -> Vec<f64> {
        let m = self.grid_size as f64;
        (0..self.grid_size)
            .map(|i| match self.kind {
                GridKind::UniformAngle => -PI / 2.0 + PI * i as f64 / m,
                GridKind::Arcsin => (2.0 * i as f64 / m - 1.0).asin(),
            })
            .collect()
    }
}

/// `a_nm = exp(2πi n (d/λ) sin φ_m)`, `n = 0..N−1`.
pub fn steering_matrix_uniform<T: Real>(g: &DoaGrid) -> Result<ComplexMatrix<T>> {
    g.validate()?;
    let phi = g.angles();
    ComplexMatrix::from_fn(g.sensors, g.grid_size, |n, m| {
        let theta = 2.0 * PI * n as f64 * g.spacing * phi[m].sin();
        Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
    })
}

/// `a_nm = (−1)^n exp(2πi n m / M)`: the top rows of a sign-modulated DFT,
/// equal to the uniform form on the arcsin grid at half-wavelength spacing.
pub fn steering_matrix_arcsin<T: Real>(sensors: usize, grid_size: usize) -> Result<ComplexMatrix<T>> {
    if sensors == 0 || grid_size == 0 {
        return Err(invalid("grid needs at least one sensor and one azimuth"));
    }
    ComplexMatrix::from_fn(sensors, grid_size, |n, m| {
        // reduce n·m mod M first so large products keep full precision
        let r = (n * m % grid_size) as f64 / grid_size as f64;
        let theta = 2.0 * PI * r;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Complex::new(T::lit(sign * theta.cos()), T::lit(sign * theta.sin()))
    })
}

/// Distribution of the nonzero signal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ValueDistribution {
    /// Uniform on `(0, 1]`.
    Uniform,
    /// Uniform over the nonzero levels of the unsigned `bits`-bit quantizer,
    /// so the truth is exactly representable.
    GridExact { bits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    /// Signal length.
    pub m: usize,
    /// Sensors.
    pub n: usize,
    /// Nonzero count.
    pub k: usize,
    #[serde(default = "default_values")]
    pub values: ValueDistribution,
    /// Observation noise std per real and imaginary component.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_shots")]
    pub shots: usize,
    /// Relative std of the per-shot fluctuation.
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_values() -> ValueDistribution {
    ValueDistribution::Uniform
}

fn default_shots() -> usize {
    1
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(invalid("m and n must be positive"));
        }
        if self.k > self.m {
            return Err(invalid(format!("k = {} exceeds m = {}", self.k, self.m)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(format!("sigma must be finite and non-negative, got {}", self.sigma)));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(invalid(format!("rho must be finite and non-negative, got {}", self.rho)));
        }
        if self.shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        if let ValueDistribution::GridExact { bits } = self.values {
            if bits == 0 || bits > Quantizer::<f64>::MAX_BITS {
                return Err(invalid(format!("grid-exact values need 1..={} bits, got {bits}", Quantizer::<f64>::MAX_BITS)));
            }
        }
        Ok(())
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// `k` distinct positions chosen uniformly, values from the configured
/// distribution, zeros elsewhere.
pub fn gen_sparse_signal<T: Real, R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<SparseSignal<T>> {
    cfg.validate()?;
    let levels: Vec<f64> = match cfg.values {
        ValueDistribution::Uniform => Vec::new(),
        ValueDistribution::GridExact { bits } => {
            let q = Quantizer::<f64>::unsigned(bits)?;
            let mut l: Vec<f64> = q.levels().iter().copied().filter(|&v| v != 0.0).collect();
            l.sort_by(f64::total_cmp);
            l
        }
    };
    let mut values = vec![T::zero(); cfg.m];
    let mut picks = index::sample(rng, cfg.m, cfg.k).into_vec();
    picks.sort_unstable();
    for i in picks {
        let v = match cfg.values {
            // 1 − u maps [0, 1) onto (0, 1] so every picked entry is nonzero
            ValueDistribution::Uniform => 1.0 - rng.random::<f64>(),
            ValueDistribution::GridExact { .. } => levels[rng.random_range(0..levels.len())],
        };
        values[i] = T::lit(v);
    }
    SparseSignal::new(values)
}

fn complex_noise<T: Real, R: Rng + ?Sized>(len: usize, sigma: f64, rng: &mut R) -> Vec<Complex<T>> {
    if sigma == 0.0 {
        return vec![Complex::new(T::zero(), T::zero()); len];
    }
    (0..len)
        .map(|_| {
            let re = sigma * gaussian(rng);
            let im = sigma * gaussian(rng);
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect()
}

/// `x = Az + n`, `n` i.i.d. Gaussian with std `sigma` per component.
pub fn gen_single_instance<T: Real, R: Rng + ?Sized>(
    a: &ComplexMatrix<T>,
    z: &SparseSignal<T>,
    sigma: f64,
    rng: &mut R,
) -> Result<SparseInstance<T>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    let noise = complex_noise(a.rows(), sigma, rng);
    let x: Vec<Complex<T>> = a.mul_real_vec(z.values())?.iter().zip(&noise).map(|(p, q)| p + q).collect();
    SparseInstance::new(a.clone(), x, z.clone(), noise)
}

/// `shots` perturbed copies `ζ_i + N(0, ρ ζ_i)` of `zeta`, each observed
/// with independent noise.
pub fn gen_multishot<T: Real, R: Rng + ?Sized>(
    a: &ComplexMatrix<T>,
    zeta: &SparseSignal<T>,
    shots: usize,
    rho: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<MultiShotInstance<T>> {
    if shots == 0 {
        return Err(invalid("shots must be at least 1"));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(invalid(format!("rho must be finite and non-negative, got {rho}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    let mut xs = Vec::with_capacity(shots);
    let mut signals = Vec::with_capacity(shots);
    let mut noises = Vec::with_capacity(shots);
    for _ in 0..shots {
        let values: Vec<T> = zeta
            .values()
            .iter()
            .map(|&v| {
                if v == T::zero() || rho == 0.0 {
                    return v;
                }
                let base = v.as_f64();
                loop {
                    let draw = base + rho * base.abs() * gaussian(rng);
                    if draw != 0.0 {
                        return T::lit(draw);
                    }
                }
            })
            .collect();
        let z = SparseSignal::new(values)?;
        let noise = complex_noise(a.rows(), sigma, rng);
        let x: Vec<Complex<T>> = a.mul_real_vec(z.values())?.iter().zip(&noise).map(|(p, q)| p + q).collect();
        xs.push(x);
        signals.push(z);
        noises.push(noise);
    }
    MultiShotInstance::new(a.clone(), xs, zeta.clone(), signals, noises)
}

/// Leading singular triplets of a shot matrix.
#[derive(Debug, Clone)]
pub struct SvdBasis<T: Real> {
    /// `L` leading left singular vectors (length `N` each).
    pub columns: Vec<Vec<Complex<T>>>,
    /// Their singular values, descending.
    pub singular_values: Vec<T>,
    /// Matching right singular vectors (length `S` each).
    pub right: Vec<Vec<Complex<T>>>,
}

/// Singular values at most this fraction of the largest count as zero.
pub const SVD_RANK_TOL: f64 = 1e-10;

impl<T: Real> SvdBasis<T> {
    /// Whether `σ_l` is numerically zero relative to `σ_1`.
    pub fn is_degenerate(&self, l: usize) -> bool {
        let top = self.singular_values[0].as_f64();
        let s = self.singular_values[l].as_f64();
        s <= SVD_RANK_TOL * top || top == 0.0
    }

    /// Left vectors worth fitting: those of numerically nonzero singular
    /// values, or one zero column when there are none. Dropped vectors are
    /// arbitrary directions orthogonal to every shot and carry no signal.
    pub fn signal_columns(&self) -> Vec<Vec<Complex<T>>> {
        let kept: Vec<Vec<Complex<T>>> =
            (0..self.columns.len()).filter(|&l| !self.is_degenerate(l)).map(|l| self.columns[l].clone()).collect();
        if kept.is_empty() {
            vec![vec![Complex::new(T::zero(), T::zero()); self.columns[0].len()]]
        } else {
            kept
        }
    }
}

/// `L` leading left singular vectors of `X = (x_1 … x_S)`.
///
/// Each vector is determined up to a unit phase; it is rotated so that its
/// inner product with `Σ_s x_s` is real and positive (or, when that product
/// vanishes, so that its largest-modulus entry is). The right vector gets the
/// same rotation, keeping `X = Σ σ_l u_l v_lᴴ`.
pub fn svd_preprocess<T: Real>(shots: &[Vec<Complex<T>>], l: usize) -> Result<SvdBasis<T>> {
    let s = shots.len();
    if s == 0 {
        return Err(invalid("need at least one shot"));
    }
    let n = shots[0].len();
    if shots.iter().any(|x| x.len() != n) {
        return Err(dimension("all shots must have the same length"));
    }
    if l == 0 || l > n.min(s) {
        return Err(invalid(format!("L = {l} must be in 1..={}", n.min(s))));
    }
    let x = ComplexMatrix::from_fn(n, s, |r, c| shots[c][r])?;
    let svd = complex_svd(&x)?;
    let total: Vec<Complex<f64>> = (0..n)
        .map(|r| shots.iter().fold(Complex::new(0.0, 0.0), |acc, x| acc + Complex::new(x[r].re.as_f64(), x[r].im.as_f64())))
        .collect();
    let scale = total.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    let mut columns = Vec::with_capacity(l);
    let mut right = Vec::with_capacity(l);
    for idx in 0..l {
        let u: Vec<Complex<f64>> = svd.u[idx].iter().map(|c| Complex::new(c.re.as_f64(), c.im.as_f64())).collect();
        let p: Complex<f64> = u.iter().zip(&total).map(|(a, b)| a.conj() * b).sum();
        let phase = if p.norm() > 1e-12 * scale {
            p / p.norm()
        } else {
            let big = u
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()).then(b.0.cmp(&a.0)))
                .map(|(_, c)| *c)
                .unwrap_or(Complex::new(1.0, 0.0));
            if big.norm() > 0.0 { big / big.norm() } else { Complex::new(1.0, 0.0) }
        };
        let rot = |c: &Complex<T>| {
            let v = Complex::new(c.re.as_f64(), c.im.as_f64()) * phase;
            Complex::new(T::lit(v.re), T::lit(v.im))
        };
        columns.push(svd.u[idx].iter().map(rot).collect());
        right.push(svd.v[idx].iter().map(rot).collect());
    }
    Ok(SvdBasis { columns, singular_values: svd.singular_values[..l].to_vec(), right })
}

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum InstanceData<T: Real> {
    Single(SparseInstance<T>),
    Multishot(MultiShotInstance<T>),
}

/// Versioned replay document; complex entries are `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct InstanceDocument<T: Real> {
    pub schema_version: u32,
    pub instance: InstanceData<T>,
}

impl<T: Real> InstanceDocument<T> {
    pub fn new(instance: InstanceData<T>) -> Self {
        Self { schema_version: INSTANCE_SCHEMA_VERSION, instance }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported instance schema_version {}, expected {INSTANCE_SCHEMA_VERSION}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
