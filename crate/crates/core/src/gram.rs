//! Gram-matrix decomposition `H H^H = C + D tb tb^H D^H` and the DPC sum rate.
//!
//! With `P = I - b b^H`, `C = H_d P H_d^H` collects everything the RIS cannot
//! influence, `D = [H_c, H_d b]` maps the extended phase vector
//! `tb = [theta; 1]` into the single direction the rank-one link adds.

use nalgebra::Complex;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{self, frobenius_sq, hermitian_eigen, identity, select_rows, EigenInfo};
use crate::scalar::{cabs, real, CMat, CVec, Real};

/// Relative threshold below which an eigenvalue of `C` counts as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Tolerance on `|theta_n| = 1`.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GramDecomposition<T: Real> {
    /// `K x K`, Hermitian PSD.
    pub c_mat: CMat<T>,
    /// `K x (N_R + 1)`, last column `H_d b`.
    pub d_mat: CMat<T>,
    /// Global user id of every row.
    pub user_index_map: Vec<usize>,
    /// `||H_d||_F^2` of the selected rows; reference scale for rank decisions.
    pub scale: T,
    pub eigen: EigenInfo<T>,
}

impl<T: Real> GramDecomposition<T> {
    pub fn n_users(&self) -> usize {
        self.c_mat.nrows()
    }

    pub fn n_ris(&self) -> usize {
        self.d_mat.ncols() - 1
    }

    /// Eigenvalues of `C` that are zero relative to [`RANK_TOL`].
    pub fn zero_eigen_count(&self) -> usize {
        let scale = if self.eigen.eigenvalues[0] > self.scale {
            self.eigen.eigenvalues[0]
        } else {
            self.scale
        };
        self.eigen.count_below(T::tol(RANK_TOL), scale)
    }

    /// `D tb`.
    pub fn project(&self, theta_bar: &CVec<T>) -> CVec<T> {
        &self.d_mat * theta_bar
    }

    /// `C + D tb tb^H D^H`.
    pub fn gram(&self, theta_bar: &CVec<T>) -> CMat<T> {
        let z = self.project(theta_bar);
        &self.c_mat + &z * z.adjoint()
    }
}

/// Builds `C` and `D` for the rows `users` of a realization.
pub fn decompose<T: Real>(real_: &ChannelRealization<T>, users: &[usize]) -> Result<GramDecomposition<T>> {
    real_.check_users(users)?;
    let hd = select_rows(&real_.h_direct, users);
    let hc = select_rows(&real_.h_cascaded, users);
    let b = &real_.b_vec;
    let hd_b = &hd * b;
    // H_d P with P idempotent, so C = (H_d P)(H_d P)^H stays PSD
    let hd_proj = &hd - &hd_b * b.adjoint();
    let c_mat = &hd_proj * hd_proj.adjoint();
    let k = users.len();
    let n_ris = hc.ncols();
    let mut d_mat = CMat::zeros(k, n_ris + 1);
    d_mat.columns_mut(0, n_ris).copy_from(&hc);
    d_mat.column_mut(n_ris).copy_from(&hd_b);
    let eigen = hermitian_eigen(&c_mat);
    Ok(GramDecomposition {
        c_mat,
        d_mat,
        user_index_map: users.to_vec(),
        scale: frobenius_sq(&hd),
        eigen,
    })
}

/// Checks `|theta_n| = 1` for every entry.
pub fn check_unit_modulus<T: Real>(theta: &CVec<T>) -> Result<()> {
    let tol = T::tol(UNIT_MODULUS_TOL);
    for (n, z) in theta.iter().enumerate() {
        if (cabs(*z) - T::one()).abs() > tol || !z.re.is_finite_val() {
            return Err(Error::Precondition(format!(
                "phase entry {n} has modulus {}, expected 1",
                cabs(*z).as_f64()
            )));
        }
    }
    Ok(())
}

/// `[theta; 1]`.
pub fn extend_theta<T: Real>(theta: &CVec<T>) -> CVec<T> {
    let n = theta.len();
    CVec::from_fn(n + 1, |i, _| if i < n { theta[i] } else { real(T::one()) })
}

/// Effective channel `H_d + H_c theta b^H` of the selected users.
pub fn effective_channel<T: Real>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    theta: &CVec<T>,
) -> Result<CMat<T>> {
    real_.check_users(users)?;
    if theta.len() != real_.n_ris() {
        return Err(Error::InvalidArgument(format!(
            "theta has length {}, expected {}",
            theta.len(),
            real_.n_ris()
        )));
    }
    check_unit_modulus(theta)?;
    let hd = select_rows(&real_.h_direct, users);
    let hc = select_rows(&real_.h_cascaded, users);
    Ok(hd + (hc * theta) * real_.b_vec.adjoint())
}

fn check_theta_bar<T: Real>(gram: &GramDecomposition<T>, theta_bar: &CVec<T>) -> Result<()> {
    if theta_bar.len() != gram.d_mat.ncols() {
        return Err(Error::InvalidArgument(format!(
            "extended phase vector has length {}, expected {}",
            theta_bar.len(),
            gram.d_mat.ncols()
        )));
    }
    let last = theta_bar[theta_bar.len() - 1];
    if cabs(last - real(T::one())) > T::tol(UNIT_MODULUS_TOL) {
        return Err(Error::Precondition("last entry of the extended phase vector must be 1".into()));
    }
    Ok(())
}

fn check_power<T: Real>(p_bar: T) -> Result<()> {
    if !(p_bar > T::zero() && p_bar.is_finite_val()) {
        return Err(Error::Domain(format!("per-user power must be positive, got {}", p_bar.as_f64())));
    }
    Ok(())
}

/// `tb^H D^H (I/p + C)^{-1} D tb` via a Cholesky solve.
pub(crate) fn regularized_quadratic<T: Real>(gram: &GramDecomposition<T>, theta_bar: &CVec<T>, p_bar: T) -> Result<T> {
    let k = gram.n_users();
    let a = identity::<T>(k) * real(T::one() / p_bar) + &gram.c_mat;
    let chol = linalg::cholesky(&a, "I/p + C")?;
    let z = gram.project(theta_bar);
    let y = chol.solve(&z);
    Ok(z.dotc(&y).re)
}

/// DPC sum rate `log2 det(I + p C) + log2(1 + tb^H D^H (I/p + C)^{-1} D tb)` in bits.
pub fn dpc_sum_se<T: Real>(gram: &GramDecomposition<T>, theta_bar: &CVec<T>, p_bar: T) -> Result<T> {
    check_power(p_bar)?;
    check_theta_bar(gram, theta_bar)?;
    let k = gram.n_users();
    let a = identity::<T>(k) + &gram.c_mat * real(p_bar);
    let first = linalg::log2_det_hpd(&a, "I + pC")?;
    let q = regularized_quadratic(gram, theta_bar, p_bar)?;
    Ok(first + (T::one() + q).log2())
}

/// Direct `log2 det(I + p H H^H)` evaluation; reference for [`dpc_sum_se`].
pub fn dpc_sum_se_direct<T: Real>(h: &CMat<T>, p_bar: T) -> Result<T> {
    check_power(p_bar)?;
    let k = h.nrows();
    let a = identity::<T>(k) + h * h.adjoint() * real(p_bar);
    linalg::log2_det_hpd(&a, "I + pHH^H")
}

/// High-power asymptote of the DPC sum rate.
///
/// Full-rank `C`: `log2 det(p C) + log2(tb^H D^H C^{-1} D tb)`. One zero
/// eigenvalue: `sum_{k<K} log2(p l_k) + log2(p |u_K^H D tb|^2)`.
pub fn dpc_asymptote<T: Real>(gram: &GramDecomposition<T>, theta_bar: &CVec<T>, p_bar: T) -> Result<T> {
    check_power(p_bar)?;
    check_theta_bar(gram, theta_bar)?;
    let k = gram.n_users();
    let z = gram.project(theta_bar);
    let eig = &gram.eigen;
    match gram.zero_eigen_count() {
        0 => {
            let mut logdet = T::zero();
            let mut quad = T::zero();
            for i in 0..k {
                let l = eig.eigenvalues[i];
                logdet += (p_bar * l).log2();
                let proj = eig.eigenvectors.column(i).dotc(&z);
                quad += proj.norm_sqr() / l;
            }
            Ok(logdet + quad.log2())
        }
        1 => {
            let mut acc = T::zero();
            for i in 0..k - 1 {
                acc += (eig.eigenvalues[i] * p_bar).log2();
            }
            let proj: Complex<T> = eig.eigenvectors.column(k - 1).dotc(&z);
            Ok(acc + (p_bar * proj.norm_sqr()).log2())
        }
        n => Err(Error::Degenerate(format!("C has {n} zero eigenvalues; the asymptote is undefined"))),
    }
}
