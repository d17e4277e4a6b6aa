//! Thin helpers over `faer` used by every module.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, MatRef, Scale};

use crate::{Error, Result, C64};

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn scale(m: MatRef<'_, C64>, s: C64) -> Mat<C64> {
    m * Scale(s)
}

pub(crate) fn identity(n: usize) -> Mat<C64> {
    Mat::identity(n, n)
}

pub(crate) fn conj(m: MatRef<'_, C64>) -> Mat<C64> {
    m.conjugate().to_owned()
}

pub(crate) fn adjoint(m: MatRef<'_, C64>) -> Mat<C64> {
    m.adjoint().to_owned()
}

pub(crate) fn transpose(m: MatRef<'_, C64>) -> Mat<C64> {
    m.transpose().to_owned()
}

pub(crate) fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub(crate) fn frobenius(m: MatRef<'_, C64>) -> f64 {
    m.norm_l2()
}

pub(crate) fn all_finite(m: MatRef<'_, C64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

pub(crate) fn hermiticity_deviation(m: MatRef<'_, C64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn require_square(m: MatRef<'_, C64>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Largest singular value.
pub fn spectral_norm(m: MatRef<'_, C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    match singular_values(m) {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => f64::NAN,
    }
}

pub(crate) fn singular_values(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let s = m
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("singular values: {e:?}")))?;
    Ok(s)
}

pub(crate) fn rank(m: MatRef<'_, C64>, rel_tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let s = singular_values(m)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

/// Orthonormal basis of the right null space, singular values below
/// `rel_tol * sigma_max` count as zero. A zero matrix has a full kernel.
pub(crate) fn kernel(m: MatRef<'_, C64>, rel_tol: f64) -> Result<Mat<C64>> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(identity(n));
    }
    let svd = m
        .svd()
        .map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let smax = if k > 0 { s[0].re } else { 0.0 };
    let nonzero = if smax == 0.0 {
        0
    } else {
        (0..k).filter(|&i| s[i].re > rel_tol * smax).count()
    };
    let v = svd.V();
    Ok(v.subcols(nonzero, n - nonzero).to_owned())
}

/// Moore-Penrose pseudoinverse with relative singular-value cutoff.
pub(crate) fn pinv(m: MatRef<'_, C64>, rel_tol: f64) -> Result<Mat<C64>> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0].re } else { 0.0 };
    let u = svd.U();
    let v = svd.V();
    let mut vs = v.to_owned();
    for k in 0..s.nrows() {
        let inv = if smax > 0.0 && s[k].re > rel_tol * smax {
            1.0 / s[k].re
        } else {
            0.0
        };
        for i in 0..vs.nrows() {
            vs[(i, k)] *= inv;
        }
    }
    Ok(&vs * u.adjoint())
}

/// Smallest / largest singular value.
pub(crate) fn inverse_condition(m: MatRef<'_, C64>) -> Result<f64> {
    let s = singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    Ok(if smax == 0.0 { 0.0 } else { smin / smax })
}

pub(crate) fn solve(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    a.partial_piv_lu().solve(b)
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.eigenvalues()
        .map_err(|e| Error::Decomposition(format!("eigenvalues: {e:?}")))
}

/// Eigenvalues and right eigenvectors (columns).
pub(crate) fn eig(m: MatRef<'_, C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let e = m
        .eigen()
        .map_err(|e| Error::Decomposition(format!("eigen: {e:?}")))?;
    let s = e.S();
    let vals = (0..m.nrows()).map(|k| s[k]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub(crate) fn hermitian_eig(m: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let e = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Decomposition(format!("self-adjoint eigen: {e:?}")))?;
    let s = e.S();
    let vals = (0..m.nrows()).map(|k| s[k].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub(crate) fn col_to_mat(v: &Col<C64>) -> Mat<C64> {
    Mat::from_fn(v.nrows(), 1, |i, _| v[i])
}

pub(crate) fn mat_to_col(m: MatRef<'_, C64>) -> Col<C64> {
    Col::from_fn(m.nrows(), |i| m[(i, 0)])
}

/// Nearest entry of `values` to `z`.
pub(crate) fn nearest(values: &[C64], z: C64) -> Option<C64> {
    values
        .iter()
        .copied()
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
}
