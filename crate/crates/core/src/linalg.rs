//! Dense decompositions backed by nalgebra, computed in double precision.

use nalgebra::{Complex as NaComplex, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{ComplexMatrix, RealMatrix};
use crate::scalar::Real;

fn real_to_na<T: Real>(a: &RealMatrix<T>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), cols.len(), |r, c| a.get(r, cols[c]).as_f64())
}

/// Least-squares coefficients over the selected columns with pseudo-inverse
/// semantics. The flag reports a rank-deficient selection.
pub fn lstsq_columns<T: Real>(a: &RealMatrix<T>, cols: &[usize], x: &[T]) -> Result<(Vec<T>, bool)> {
    if cols.is_empty() {
        return Ok((Vec::new(), false));
    }
    let sub = real_to_na(a, cols);
    let rhs = DVector::from_iterator(x.len(), x.iter().map(|v| v.as_f64()));
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = f64::EPSILON * (a.rows().max(cols.len()) as f64) * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::Decomposition(format!("least squares failed: {e}")))?;
    Ok((sol.iter().map(|&v| T::lit(v)).collect(), rank < cols.len()))
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(a: &RealMatrix<T>) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    let all: Vec<usize> = (0..a.cols()).collect();
    T::lit(real_to_na(a, &all).singular_values().max())
}

/// Thin SVD of a complex matrix, singular values in descending order.
pub struct ComplexSvd<T: Real> {
    /// Left singular vectors as columns.
    pub u: Vec<Vec<Complex<T>>>,
    pub singular_values: Vec<T>,
    /// Right singular vectors as columns, so `X = Σ_l σ_l u_l v_lᴴ`.
    pub v: Vec<Vec<Complex<T>>>,
}

type NaSvd = nalgebra::SVD<NaComplex<f64>, nalgebra::Dyn, nalgebra::Dyn>;

/// Convergence thresholds tried in turn. The bidiagonal iteration can
/// return an inaccurate factorization of rank-deficient input at one
/// threshold and an exact one at another.
const SVD_EPS_LADDER: [f64; 4] = [5.0 * f64::EPSILON, f64::EPSILON, 1e-14, 1e-13];

fn try_decompose(m: &DMatrix<NaComplex<f64>>, eps: f64) -> Option<NaSvd> {
    let svd = m.clone().try_svd(true, true, eps, 0)?;
    let rec = svd.clone().recompose().ok()?;
    let scale = m.norm().max(f64::MIN_POSITIVE);
    ((rec - m).norm() <= SVD_RESIDUAL_TOL * scale).then_some(svd)
}

/// Relative Frobenius residual a decomposition must meet to be accepted.
pub const SVD_RESIDUAL_TOL: f64 = 1e-10;

/// Thin SVD, checked by recomposition. A decomposition that misses the
/// residual bound is retried on the adjoint and at other thresholds.
pub fn complex_svd<T: Real>(x: &ComplexMatrix<T>) -> Result<ComplexSvd<T>> {
    let m = DMatrix::from_fn(x.rows(), x.cols(), |r, c| {
        let e = x.get(r, c);
        NaComplex::new(e.re.as_f64(), e.im.as_f64())
    });
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Decomposition("matrix has non-finite entries".into()));
    }
    // columns of (u, v) for X
    let adj = m.adjoint();
    let mut found = None;
    for eps in SVD_EPS_LADDER {
        if let Some(svd) = try_decompose(&m, eps) {
            found = Some((svd.u, svd.singular_values, svd.v_t.map(|v| v.adjoint())));
            break;
        }
        if let Some(svd) = try_decompose(&adj, eps) {
            // Xᴴ = U S Vᴴ  ⇒  X = V S Uᴴ
            found = Some((svd.v_t.map(|v| v.adjoint()), svd.singular_values, svd.u));
            break;
        }
    }
    let (u, s, v) = match found {
        Some((Some(u), s, Some(v))) => (u, s, v),
        _ => return Err(Error::Decomposition("SVD did not reach the residual bound".into())),
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let to_t = |c: &NaComplex<f64>| Complex::new(T::lit(c.re), T::lit(c.im));
    Ok(ComplexSvd {
        u: order.iter().map(|&l| u.column(l).iter().map(to_t).collect()).collect(),
        singular_values: order.iter().map(|&l| T::lit(s[l])).collect(),
        v: order.iter().map(|&l| v.column(l).iter().map(to_t).collect()).collect(),
    })
}
