//! Small dense helpers on top of nalgebra used across the numeric modules.

use nalgebra::{Complex, DVector};

use crate::error::{Error, Result};
use crate::scalar::{real, CMat, CVec, Real};

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// nonincreasing order.
#[derive(Debug, Clone)]
pub struct EigenInfo<T: Real> {
    pub eigenvalues: Vec<T>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: CMat<T>,
}

impl<T: Real> EigenInfo<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> CVec<T> {
        self.eigenvectors.column(k).into_owned()
    }

    /// Number of eigenvalues below `rel_tol * scale`.
    pub fn count_below(&self, rel_tol: T, scale: T) -> usize {
        let thresh = rel_tol * scale;
        self.eigenvalues.iter().filter(|&&l| l <= thresh).count()
    }
}

pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * real(T::lit(0.5))
}

/// Hermitian eigen-decomposition, sorted descending.
pub fn hermitian_eigen<T: Real>(m: &CMat<T>) -> EigenInfo<T> {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    EigenInfo {
        eigenvalues,
        eigenvectors,
    }
}

/// Principal eigenpair of a Hermitian matrix.
pub fn principal_eigen<T: Real>(m: &CMat<T>) -> (T, CVec<T>) {
    let e = hermitian_eigen(m);
    (e.eigenvalues[0], e.vector(0))
}

/// Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky<T: Real>(m: &CMat<T>, what: &str) -> Result<nalgebra::Cholesky<Complex<T>, nalgebra::Dyn>> {
    hermitian_part(m)
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(format!("{what} is not positive definite")))
}

/// `log2 det(A)` for Hermitian positive definite `A`.
pub fn log2_det_hpd<T: Real>(m: &CMat<T>, what: &str) -> Result<T> {
    let chol = cholesky(m, what)?;
    let l = chol.l();
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        if d <= T::zero() {
            return Err(Error::RankDeficient(format!("{what} has a vanishing pivot")));
        }
        acc += d.ln();
    }
    Ok(acc * T::lit(2.0) / T::lit(std::f64::consts::LN_2))
}

/// `x^H A y`.
pub fn quad_form<T: Real>(x: &CVec<T>, a: &CMat<T>, y: &CVec<T>) -> Complex<T> {
    x.dotc(&(a * y))
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = crate::scalar::cabs(*z);
        if a > acc {
            a
        } else {
            acc
        }
    })
}

pub fn frobenius_sq<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// Rows of `m` selected (and ordered) by `rows`.
pub fn select_rows<T: Real>(m: &CMat<T>, rows: &[usize]) -> CMat<T> {
    CMat::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Singular values of `m` in nonincreasing order.
pub fn singular_values<T: Real>(m: &CMat<T>) -> Vec<T> {
    let sv = m.clone().svd(false, false).singular_values;
    let mut v: Vec<T> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Checks that the rows of `m` are linearly independent:
/// smallest singular value above `rel * largest`.
pub fn check_full_row_rank<T: Real>(m: &CMat<T>, rel: T, what: &str) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{what} has no rows")));
    }
    if m.nrows() > m.ncols() {
        return Err(Error::RankDeficient(format!(
            "{what} has {} rows but only {} columns",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite_val() || !z.im.is_finite_val()) {
        return Err(Error::InvalidArgument(format!("{what} has non-finite entries")));
    }
    let sv = singular_values(m);
    let largest = sv[0];
    let smallest = sv[m.nrows() - 1];
    if largest <= T::zero() || smallest <= rel * largest {
        return Err(Error::RankDeficient(format!(
            "{what}: smallest singular value {} vs largest {}",
            smallest.as_f64(),
            largest.as_f64()
        )));
    }
    Ok(())
}

pub fn real_vec<T: Real>(v: &[T]) -> DVector<T> {
    DVector::from_column_slice(v)
}

/// Euclidean norm of every row.
pub fn row_norms<T: Real>(m: &CMat<T>) -> Vec<T> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt())
        .collect()
}
