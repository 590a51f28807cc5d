//! Zero-forcing distributed Tomlinson-Harashima precoding.
//!
//! For an ordered channel `H = L Q` (LQ decomposition, positive diagonal)
//! the feedback filter is `B = diag(l)^{-1} L`, the transmit filter
//! `P = beta Q^H` and each receiver scales by `1 / (beta L_kk)` before its
//! modulo. With `v` uniform on the unit square, `E|v_k|^2 = 1/6` and
//! `beta = sqrt(6 P_tx / K)` meets the power constraint with equality.
//! User `k` then sees a scalar modulo channel with complex noise variance
//! `1 / (6 p L_kk^2)`, `p = P_tx / K`.

use std::f64::consts::{E, PI};

use nalgebra::Complex;
use rand::Rng;

use crate::channel::complex_normal;
use crate::error::{Error, Result};
use crate::linalg::{self, check_full_row_rank, select_rows};
use crate::quad::adaptive_simpson;
use crate::scalar::{cabs, real, CMat, CVec, Real, C};

/// Relative singular-value threshold for full row rank.
pub const ROW_RANK_TOL: f64 = 1e-10;

/// `log2(pi e / 6)`: per-user shaping loss of uniform signaling, in bits.
pub fn shaping_loss_bits() -> f64 {
    (PI * E / 6.0).log2()
}

/// `t - floor(t + 1/2)`, mapped into `[-1/2, 1/2)`.
#[inline]
pub fn modulo_real<T: Real>(t: T) -> T {
    let half = T::lit(0.5);
    let mut r = t - (t + half).floor();
    if r < -half {
        r += T::one();
    }
    if r >= half {
        r -= T::one();
    }
    r
}

/// Component-wise modulo of a complex number onto the unit square.
#[inline]
pub fn modulo<T: Real>(z: C<T>) -> C<T> {
    Complex::new(modulo_real(z.re), modulo_real(z.im))
}

pub fn modulo_vec<T: Real>(v: &CVec<T>) -> CVec<T> {
    v.map(modulo)
}

/// LQ decomposition `H = L Q` of a full-row-rank `K x N` matrix: `L` lower
/// triangular with positive real diagonal, `Q` with orthonormal rows.
///
/// Rows are orthogonalized by modified Gram-Schmidt with one
/// re-orthogonalization pass.
pub fn lq_decompose<T: Real>(h: &CMat<T>) -> Result<(CMat<T>, CMat<T>)> {
    check_full_row_rank(h, T::tol(ROW_RANK_TOL), "channel")?;
    let (k, n) = h.shape();
    let mut l = CMat::<T>::zeros(k, k);
    let mut q = CMat::<T>::zeros(k, n);
    for i in 0..k {
        let mut v = h.row(i).into_owned();
        for _pass in 0..2 {
            for j in 0..i {
                // projection coefficient <h_i, q_j> = h_i q_j^H
                let coef = v.dotc(&q.row(j).into_owned()).conj();
                let qj = q.row(j).into_owned();
                v -= qj * coef;
                l[(i, j)] += coef;
            }
        }
        let norm = v.norm();
        if norm <= T::zero() {
            return Err(Error::RankDeficient(format!("row {i} is dependent on earlier rows")));
        }
        l[(i, i)] = real(norm);
        q.row_mut(i).copy_from(&(v / real(norm)));
    }
    Ok((l, q))
}

/// Filters of one ordered user set.
#[derive(Debug, Clone)]
pub struct ThpFilters<T: Real> {
    pub l_mat: CMat<T>,
    pub q_mat: CMat<T>,
    /// Unit lower triangular `diag(l)^{-1} L`.
    pub b_feedback: CMat<T>,
    /// `beta Q^H`, `N_B x K`.
    pub p_forward: CMat<T>,
    /// `diag(l)^{-1} / beta`.
    pub f_receive: CMat<T>,
    pub beta: T,
    /// Position `i` is encoded `i`-th and holds row `order[i]` of the input channel.
    pub order: Vec<usize>,
    pub diag_l: Vec<T>,
    pub tx_power: T,
}

impl<T: Real> ThpFilters<T> {
    pub fn n_users(&self) -> usize {
        self.order.len()
    }
}

fn check_permutation(order: &[usize], k: usize) -> Result<()> {
    if order.len() != k {
        return Err(Error::InvalidArgument(format!(
            "order has {} entries, channel has {k} rows",
            order.len()
        )));
    }
    let mut seen = vec![false; k];
    for &o in order {
        if o >= k || seen[o] {
            return Err(Error::InvalidArgument(format!("order {order:?} is not a permutation")));
        }
        seen[o] = true;
    }
    Ok(())
}

/// Builds the ZF-THP filters for `h` with rows encoded in `order`.
pub fn build_filters<T: Real>(h: &CMat<T>, order: &[usize], tx_power: T) -> Result<ThpFilters<T>> {
    let k = h.nrows();
    check_permutation(order, k)?;
    if !(tx_power > T::zero() && tx_power.is_finite_val()) {
        return Err(Error::Domain("transmit power must be positive".into()));
    }
    let h_ord = select_rows(h, order);
    let (l_mat, q_mat) = lq_decompose(&h_ord)?;
    let diag_l: Vec<T> = (0..k).map(|i| l_mat[(i, i)].re).collect();
    let beta = (T::lit(6.0) * tx_power / T::from_usize_lossy(k)).sqrt();
    let inv_diag = CMat::from_diagonal(&CVec::from_iterator(k, diag_l.iter().map(|&d| real(T::one() / d))));
    let b_feedback = &inv_diag * &l_mat;
    let p_forward = q_mat.adjoint() * real(beta);
    let f_receive = inv_diag * real(T::one() / beta);
    Ok(ThpFilters {
        l_mat,
        q_mat,
        b_feedback,
        p_forward,
        f_receive,
        beta,
        order: order.to_vec(),
        diag_l,
        tx_power,
    })
}

/// Differential entropy in bits of a real Gaussian of variance `var`
/// wrapped onto `[-1/2, 1/2)`.
pub fn wrapped_gaussian_entropy_real(var: f64) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Domain(format!("variance must be positive and finite, got {var}")));
    }
    let s = var.sqrt();
    // image sum converges fast for narrow densities, the Fourier series for wide ones
    let density = move |y: f64| -> f64 {
        if s <= 0.3 {
            let norm = 1.0 / (s * (2.0 * PI).sqrt());
            let mut acc = 0.0;
            for k in -20i32..=20 {
                let t = (y + k as f64) / s;
                acc += (-0.5 * t * t).exp();
            }
            acc * norm
        } else {
            let mut acc = 1.0;
            for n in 1..=20 {
                let nf = n as f64;
                let a = (-2.0 * PI * PI * var * nf * nf).exp();
                if a < 1e-300 {
                    break;
                }
                acc += 2.0 * a * (2.0 * PI * nf * y).cos();
            }
            acc
        }
    };
    let integrand = |y: f64| {
        let f = density(y);
        if f > 0.0 {
            -f * f.log2()
        } else {
            0.0
        }
    };
    // symmetric density: integrate [0, 1/2] with panels refined towards the peak
    let mut breaks = vec![0.0];
    let mut g = s / 64.0;
    while g < 0.5 {
        breaks.push(g);
        g *= 2.0;
    }
    breaks.push(0.5);
    let panel_tol = 1e-10 / (2.0 * breaks.len() as f64);
    let half: f64 = breaks
        .windows(2)
        .map(|w| adaptive_simpson(&integrand, w[0], w[1], panel_tol))
        .sum();
    Ok(2.0 * half)
}

/// Entropy in bits of a circular complex Gaussian with total variance
/// `var_complex` wrapped onto the unit square.
pub fn wrapped_noise_entropy(var_complex: f64) -> Result<f64> {
    if !(var_complex > 0.0) {
        return Err(Error::Domain(format!("variance must be positive, got {var_complex}")));
    }
    Ok(2.0 * wrapped_gaussian_entropy_real(0.5 * var_complex)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMode {
    /// Rate of the scalar modulo channel.
    Exact,
    /// `log2(6 p L^2 / (pi e))`, may be negative.
    Asymptote,
}

/// Spectral efficiency of one user's modulo channel.
pub fn per_user_se(l_kk: f64, p_bar: f64, mode: SeMode) -> Result<f64> {
    if !(l_kk > 0.0 && p_bar > 0.0) {
        return Err(Error::Domain(format!(
            "L_kk and p must be positive, got {l_kk} and {p_bar}"
        )));
    }
    let snr = 6.0 * p_bar * l_kk * l_kk;
    match mode {
        SeMode::Asymptote => Ok((snr / (PI * E)).log2()),
        SeMode::Exact => {
            if snr.is_infinite() {
                return Ok(f64::INFINITY);
            }
            Ok(-wrapped_noise_entropy(1.0 / snr)?)
        }
    }
}

/// High-power THP sum rate `log2 det(p H H^H) - K log2(pi e / 6)`.
pub fn sum_se_asymptote<T: Real>(h: &CMat<T>, p_bar: T) -> Result<T> {
    check_full_row_rank(h, T::tol(ROW_RANK_TOL), "channel")?;
    if !(p_bar > T::zero()) {
        return Err(Error::Domain("per-user power must be positive".into()));
    }
    let k = h.nrows();
    let g = h * h.adjoint() * real(p_bar);
    let logdet = linalg::log2_det_hpd(&g, "p H H^H")?;
    Ok(logdet - T::from_usize_lossy(k) * T::lit(shaping_loss_bits()))
}

/// `E||d_hat - d||^2 = K / (6 P_tx) * sum 1/L_kk^2`.
pub fn thp_mse<T: Real>(diag_l: &[T], tx_power: T, k_alloc: usize) -> Result<T> {
    if diag_l.iter().any(|&l| !(l > T::zero())) {
        return Err(Error::Domain("diagonal of L must be positive".into()));
    }
    let s = diag_l.iter().fold(T::zero(), |acc, &l| acc + T::one() / (l * l));
    Ok(T::from_usize_lossy(k_alloc) / (T::lit(6.0) * tx_power) * s)
}

/// Encoding order built from the last position backwards: each step places
/// the remaining user with the largest channel component orthogonal to the
/// other remaining users, which is the `L_kk` that user would get there.
pub fn order_users<T: Real>(h: &CMat<T>) -> Result<Vec<usize>> {
    check_full_row_rank(h, T::tol(ROW_RANK_TOL), "channel")?;
    let k = h.nrows();
    let mut remaining: Vec<usize> = (0..k).collect();
    let mut order = vec![0usize; k];
    for pos in (0..k).rev() {
        let hr = select_rows(h, &remaining);
        let gram = &hr * hr.adjoint();
        let chol = linalg::cholesky(&gram, "remaining Gram matrix")?;
        // orthogonal residual norm^2 of row i = 1 / [(H H^H)^{-1}]_ii
        let inv = chol.inverse();
        let mut best = 0usize;
        let mut best_val = T::zero();
        for i in 0..remaining.len() {
            let val = T::one() / inv[(i, i)].re;
            if i == 0 || val > best_val {
                best = i;
                best_val = val;
            }
        }
        order[pos] = remaining.remove(best);
    }
    Ok(order)
}

/// Per-symbol signals of one THP transmission.
#[derive(Debug, Clone)]
pub struct ModuloSymbols<T: Real> {
    /// Data, real and imaginary parts uniform on `[-1/2, 1/2)`, in encoding order.
    pub s: CVec<T>,
    /// Output of the modulo feedback chain.
    pub v: CVec<T>,
    /// Gaussian-integer perturbation with `v = s + (I - B) v + a`.
    pub a_perturb: CVec<T>,
    pub x: CVec<T>,
    /// Receiver output after the modulo.
    pub y: CVec<T>,
    pub n: CVec<T>,
    /// `s + a`.
    pub d: CVec<T>,
    /// Receive signal before the modulo.
    pub d_hat: CVec<T>,
}

/// Runs the modulo feedback chain, transmitter and receivers for one data vector.
///
/// `h_ordered` must have its rows in encoding order.
pub fn transmit_symbol<T: Real>(
    filters: &ThpFilters<T>,
    h_ordered: &CMat<T>,
    s: CVec<T>,
    n: CVec<T>,
) -> ModuloSymbols<T> {
    let k = filters.n_users();
    let mut v = CVec::<T>::zeros(k);
    let mut a = CVec::<T>::zeros(k);
    for i in 0..k {
        let mut acc = s[i];
        for j in 0..i {
            acc -= filters.b_feedback[(i, j)] * v[j];
        }
        v[i] = modulo(acc);
        a[i] = v[i] - acc;
    }
    let x = &filters.p_forward * &v;
    let d_hat = &filters.f_receive * (h_ordered * &x + &n);
    let y = modulo_vec(&d_hat);
    let d = &s + &a;
    ModuloSymbols {
        s,
        v,
        a_perturb: a,
        x,
        y,
        n,
        d,
        d_hat,
    }
}

/// Empirical statistics of a simulated transmission.
#[derive(Debug, Clone)]
pub struct TransmissionStats<T: Real> {
    pub n_symbols: usize,
    /// `E|v_i|^2` per encoding position.
    pub v_power: Vec<T>,
    pub x_power: T,
    /// `E||d_hat - d||^2`.
    pub mse: T,
    /// `E|mod(y_k - s_k)|^2` per position.
    pub symbol_error: Vec<T>,
    /// Largest `|mod(y_k - s_k)|` seen.
    pub max_symbol_error: T,
    /// Real parts of `v`, one vector per position.
    pub v_real: Vec<Vec<T>>,
}

/// Symbol-level simulation of `n_symbols` transmissions over `h` (rows in
/// the original user order; the filters' order is applied here). With
/// `noiseless` the AWGN is zero.
pub fn simulate_transmission<T: Real, R: Rng + ?Sized>(
    filters: &ThpFilters<T>,
    h: &CMat<T>,
    n_symbols: usize,
    noiseless: bool,
    rng: &mut R,
) -> Result<TransmissionStats<T>> {
    let k = filters.n_users();
    check_permutation(&filters.order, h.nrows())?;
    if h.ncols() != filters.p_forward.nrows() {
        return Err(Error::InvalidArgument("channel and filters disagree on N_B".into()));
    }
    let h_ord = select_rows(h, &filters.order);
    let mut v_power = vec![T::zero(); k];
    let mut symbol_error = vec![T::zero(); k];
    let mut v_real = vec![Vec::with_capacity(n_symbols); k];
    let mut x_power = T::zero();
    let mut mse = T::zero();
    let mut max_err = T::zero();
    let to_c = |z: Complex<f64>| Complex::new(T::lit(z.re), T::lit(z.im));
    for _ in 0..n_symbols {
        let s = CVec::from_fn(k, |_, _| {
            Complex::new(T::lit(rng.random::<f64>() - 0.5), T::lit(rng.random::<f64>() - 0.5))
        });
        let n = if noiseless {
            CVec::zeros(k)
        } else {
            CVec::from_fn(k, |_, _| to_c(complex_normal(rng)))
        };
        let sym = transmit_symbol(filters, &h_ord, s, n);
        for i in 0..k {
            v_power[i] += sym.v[i].norm_sqr();
            v_real[i].push(sym.v[i].re);
            let e = modulo(sym.y[i] - sym.s[i]);
            symbol_error[i] += e.norm_sqr();
            if cabs(e) > max_err {
                max_err = cabs(e);
            }
        }
        x_power += sym.x.norm_squared();
        mse += (&sym.d_hat - &sym.d).norm_squared();
    }
    let inv = T::one() / T::from_usize_lossy(n_symbols.max(1));
    Ok(TransmissionStats {
        n_symbols,
        v_power: v_power.into_iter().map(|p| p * inv).collect(),
        x_power: x_power * inv,
        mse: mse * inv,
        symbol_error: symbol_error.into_iter().map(|p| p * inv).collect(),
        max_symbol_error: max_err,
        v_real,
    })
}
