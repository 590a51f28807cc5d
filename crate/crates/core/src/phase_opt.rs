//! RIS phase optimization.
//!
//! Every objective here has the form `f(tb) = (D tb)^H W (D tb)` with a
//! Hermitian PSD weight `W`: `W = (I/p + C)^{-1}` for the regularized rate
//! term and `W = u_K u_K^H` when `C` has a zero eigenvalue. Closed-form
//! alignment covers the zero-eigenvalue case, the principal-eigenvector
//! heuristic the general one, and element-wise coordinate ascent refines
//! either result for continuous or binary alphabets.

use nalgebra::Complex;
use rand::Rng;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::gram::{self, decompose, GramDecomposition};
use crate::linalg::{self, hermitian_eigen, principal_eigen, row_norms, select_rows};
use crate::scalar::{arg0, cabs, cis, real, CMat, CVec, Real};

pub const DEFAULT_MAX_SWEEPS: usize = 50;
/// Continuous sweeps stop once a sweep improves the objective by less than this (relative).
pub const REFINE_REL_TOL: f64 = 1e-10;
/// A direct row below this fraction of the median unblocked row norm counts as blocked.
pub const BLOCKAGE_REL_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alphabet {
    Continuous,
    /// `theta_n in {-1, +1}`.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig<T: Real> {
    pub theta: CVec<T>,
    pub alphabet: Alphabet,
}

impl<T: Real> PhaseConfig<T> {
    /// Unit-modulus phases; entries are renormalized onto the unit circle.
    pub fn continuous(theta: CVec<T>) -> Result<Self> {
        gram::check_unit_modulus(&theta)?;
        let theta = theta.map(|z| z / real(cabs(z)));
        Ok(Self {
            theta,
            alphabet: Alphabet::Continuous,
        })
    }

    pub fn binary(signs: &[bool]) -> Self {
        Self {
            theta: CVec::from_iterator(
                signs.len(),
                signs.iter().map(|&s| real(if s { T::one() } else { -T::one() })),
            ),
            alphabet: Alphabet::Binary,
        }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            theta: CVec::from_element(n, real(T::one())),
            alphabet: Alphabet::Continuous,
        }
    }

    /// I.i.d. uniform phases.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let two_pi = T::two_pi();
        Self {
            theta: CVec::from_fn(n, |_, _| cis(T::lit(rng.random::<f64>()) * two_pi)),
            alphabet: Alphabet::Continuous,
        }
    }

    /// Closest binary pattern entry-wise: the sign of the real part (`+1` on ties).
    pub fn to_binary(&self) -> Self {
        Self {
            theta: self.theta.map(|z| real(if z.re >= T::zero() { T::one() } else { -T::one() })),
            alphabet: Alphabet::Binary,
        }
    }

    pub fn theta_bar(&self) -> CVec<T> {
        gram::extend_theta(&self.theta)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Checks the alphabet invariant.
    pub fn validate(&self) -> Result<()> {
        match self.alphabet {
            Alphabet::Continuous => {
                let tol = T::tol(1e-12);
                if self.theta.iter().any(|z| (cabs(*z) - T::one()).abs() > tol) {
                    return Err(Error::Precondition("continuous phases must have unit modulus".into()));
                }
            }
            Alphabet::Binary => {
                if self.theta.iter().any(|z| z.im != T::zero() || (z.re != T::one() && z.re != -T::one())) {
                    return Err(Error::Precondition("binary phases must be exactly +1 or -1".into()));
                }
            }
        }
        Ok(())
    }
}

/// `f(tb) = (D tb)^H W (D tb)`, stored as `D` and `W D`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective<T: Real> {
    d_mat: CMat<T>,
    wd_mat: CMat<T>,
}

impl<T: Real> QuadraticObjective<T> {
    /// `W = (I/p + C)^{-1}`, applied through a Cholesky solve.
    pub fn regularized(gram: &GramDecomposition<T>, p_bar: T) -> Result<Self> {
        if !(p_bar > T::zero()) {
            return Err(Error::Domain("per-user power must be positive".into()));
        }
        let k = gram.n_users();
        let a = linalg::identity::<T>(k) * real(T::one() / p_bar) + &gram.c_mat;
        let chol = linalg::cholesky(&a, "I/p + C")?;
        Ok(Self {
            d_mat: gram.d_mat.clone(),
            wd_mat: chol.solve(&gram.d_mat),
        })
    }

    /// `W = u u^H`, i.e. `f = |u^H D tb|^2`.
    pub fn zero_eig(gram: &GramDecomposition<T>, u: &CVec<T>) -> Self {
        let ud = u.adjoint() * &gram.d_mat;
        Self {
            d_mat: gram.d_mat.clone(),
            wd_mat: u * ud,
        }
    }

    pub fn value(&self, theta_bar: &CVec<T>) -> T {
        let z = &self.d_mat * theta_bar;
        let wz = &self.wd_mat * theta_bar;
        z.dotc(&wz).re
    }

    pub fn value_of(&self, phases: &PhaseConfig<T>) -> T {
        self.value(&phases.theta_bar())
    }

    /// Coordinate ascent over the RIS elements in index order.
    pub fn refine(&self, init: &PhaseConfig<T>, max_sweeps: usize) -> Result<PhaseConfig<T>> {
        if max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be positive".into()));
        }
        let n_ris = self.d_mat.ncols() - 1;
        if init.len() != n_ris {
            return Err(Error::InvalidArgument(format!(
                "phase vector has length {}, expected {n_ris}",
                init.len()
            )));
        }
        init.validate()?;
        let mut tb = init.theta_bar();
        // d_n^H W d_n, real and constant over the sweeps
        let self_terms: Vec<Complex<T>> = (0..n_ris)
            .map(|n| self.d_mat.column(n).dotc(&self.wd_mat.column(n)))
            .collect();
        let rel_tol = T::tol(REFINE_REL_TOL);
        let mut current = self.value(&tb);
        for _ in 0..max_sweeps {
            let mut z = &self.d_mat * &tb;
            let mut wz = &self.wd_mat * &tb;
            let mut changed = false;
            for n in 0..n_ris {
                let d_n = self.d_mat.column(n);
                let wd_n = self.wd_mat.column(n);
                let old = tb[n];
                // coefficient of theta_n in 2 Re(theta_n c)
                let c = z.dotc(&wd_n) - old.conj() * self_terms[n];
                let new = match init.alphabet {
                    Alphabet::Continuous => {
                        let m = cabs(c);
                        if m > T::zero() {
                            c.conj() / real(m)
                        } else {
                            old
                        }
                    }
                    Alphabet::Binary => {
                        if c.re > T::zero() {
                            real(T::one())
                        } else if c.re < T::zero() {
                            real(-T::one())
                        } else {
                            old
                        }
                    }
                };
                if new != old {
                    let delta = new - old;
                    z.axpy(delta, &d_n, real(T::one()));
                    wz.axpy(delta, &wd_n, real(T::one()));
                    tb[n] = new;
                    changed = true;
                }
            }
            let next = self.value(&tb);
            let improvement = next - current;
            current = next;
            if !changed {
                break;
            }
            if init.alphabet == Alphabet::Continuous && improvement <= rel_tol * next.abs() {
                break;
            }
        }
        Ok(PhaseConfig {
            theta: tb.rows(0, n_ris).into_owned(),
            alphabet: init.alphabet,
        })
    }
}

/// `tb^H D^H (I/p + C)^{-1} D tb`.
pub fn rayleigh_objective<T: Real>(gram: &GramDecomposition<T>, theta_bar: &CVec<T>, p_bar: T) -> Result<T> {
    if !(p_bar > T::zero()) {
        return Err(Error::Domain("per-user power must be positive".into()));
    }
    if theta_bar.len() != gram.d_mat.ncols() {
        return Err(Error::InvalidArgument("extended phase vector has the wrong length".into()));
    }
    gram::regularized_quadratic(gram, theta_bar, p_bar)
}

/// Element-wise refinement of `init` on [`rayleigh_objective`]; the alphabet
/// of `init` selects continuous or binary updates.
pub fn refine_elementwise<T: Real>(
    gram: &GramDecomposition<T>,
    init: &PhaseConfig<T>,
    p_bar: T,
    max_sweeps: usize,
) -> Result<PhaseConfig<T>> {
    QuadraticObjective::regularized(gram, p_bar)?.refine(init, max_sweeps)
}

/// Eigenvector of `C` for its zero eigenvalue.
///
/// A user whose direct channel is negligible yields the canonical basis
/// vector of that user; otherwise `H_d^{+,H} b` normalized, falling back to
/// the eigen-decomposition when `b` is not in the row space of `H_d`.
pub fn zero_eig_direction<T: Real>(real_: &ChannelRealization<T>, users: &[usize]) -> Result<CVec<T>> {
    let gram = decompose(real_, users)?;
    zero_eig_direction_with(real_, users, &gram)
}

pub(crate) fn zero_eig_direction_with<T: Real>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    gram: &GramDecomposition<T>,
) -> Result<CVec<T>> {
    let k = users.len();
    match gram.zero_eigen_count() {
        0 => {
            return Err(Error::NotApplicable(
                "C has no zero eigenvalue; use the eigenvector heuristic".into(),
            ))
        }
        1 => {}
        n => return Err(Error::Degenerate(format!("C has {n} zero eigenvalues"))),
    }
    let hd = select_rows(&real_.h_direct, users);
    let norms = row_norms(&hd);
    if let Some(l) = blocked_user(&norms, users.iter().map(|&u| real_.users[u].blocked)) {
        let mut e = CVec::zeros(k);
        e[l] = real(T::one());
        return Ok(e);
    }

    let svd = hd.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| if s > a { s } else { a });
    let pinv = svd
        .pseudo_inverse(T::tol(1e-12) * smax)
        .map_err(|e| Error::Degenerate(format!("pseudo-inverse failed: {e}")))?;
    let v = pinv.adjoint() * &real_.b_vec;
    let vn = v.norm();
    if vn > T::zero() {
        let u = &v / real(vn);
        let residual = (&gram.c_mat * &u).norm();
        let scale = if gram.eigen.eigenvalues[0] > gram.scale {
            gram.eigen.eigenvalues[0]
        } else {
            gram.scale
        };
        if residual <= T::tol(1e-8) * scale {
            return Ok(u);
        }
    }
    Ok(gram.eigen.vector(k - 1))
}

/// Index of a user whose direct row norm is negligible against the median
/// unblocked row norm (the largest norm when no user is flagged unblocked).
fn blocked_user<T: Real>(norms: &[T], flagged: impl Iterator<Item = bool>) -> Option<usize> {
    let mut reference: Vec<T> = norms
        .iter()
        .zip(flagged)
        .filter(|(_, blocked)| !blocked)
        .map(|(n, _)| *n)
        .collect();
    if reference.is_empty() {
        reference = norms.to_vec();
    }
    reference.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let len = reference.len();
    let median = if len % 2 == 1 {
        reference[len / 2]
    } else {
        (reference[len / 2 - 1] + reference[len / 2]) * T::lit(0.5)
    };
    let (idx, min) = norms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    let thresh = T::lit(BLOCKAGE_REL_THRESHOLD) * median;
    if *min < thresh || *min == T::zero() {
        Some(idx)
    } else {
        None
    }
}

/// Phases maximizing `|u^H D tb|` by aligning every term with the direct one.
pub fn align_phases<T: Real>(
    u: &CVec<T>,
    real_: &ChannelRealization<T>,
    users: &[usize],
) -> Result<PhaseConfig<T>> {
    real_.check_users(users)?;
    if u.len() != users.len() {
        return Err(Error::InvalidArgument(format!(
            "direction has length {}, expected {}",
            u.len(),
            users.len()
        )));
    }
    let hd = select_rows(&real_.h_direct, users);
    let hc = select_rows(&real_.h_cascaded, users);
    let v = hc.adjoint() * u;
    let s = (hd * &real_.b_vec).dotc(u);
    let ref_angle = arg0(s);
    Ok(PhaseConfig {
        theta: v.map(|z| cis(arg0(z) - ref_angle)),
        alphabet: Alphabet::Continuous,
    })
}

/// `|u^H D tb|^2`.
pub fn zero_eig_objective<T: Real>(gram: &GramDecomposition<T>, u: &CVec<T>, theta_bar: &CVec<T>) -> T {
    u.dotc(&gram.project(theta_bar)).norm_sqr()
}

/// Principal-eigenvector phases.
///
/// The principal eigenvector of the `(N_R+1)`-dimensional `D^H (I/p + C)^{-1} D`
/// is obtained as `D^H w'` from the principal eigenvector `w'` of the
/// `K x K` matrix `(I/p + C)^{-1} D D^H`; the latter is computed through the
/// similar Hermitian matrix `L^{-1} D D^H L^{-H}` with `L L^H = I/p + C`.
pub fn heuristic_phases<T: Real>(gram: &GramDecomposition<T>, p_bar: T) -> Result<PhaseConfig<T>> {
    if !(p_bar > T::zero()) {
        return Err(Error::Domain("per-user power must be positive".into()));
    }
    let k = gram.n_users();
    let a = linalg::identity::<T>(k) * real(T::one() / p_bar) + &gram.c_mat;
    let chol = linalg::cholesky(&a, "I/p + C")?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&gram.d_mat)
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    let s = &x * x.adjoint();
    let (lambda, y) = principal_eigen(&s);
    // D^H w' with w' = L^{-H} y equals X^H y
    let w_bar = x.adjoint() * y;
    if !(lambda > T::zero()) || w_bar.norm() == T::zero() {
        return Err(Error::Degenerate("D D^H vanishes; no principal direction".into()));
    }
    Ok(phases_from_eigenvector(&w_bar))
}

/// `theta_n = exp(j (arg w_n - arg w_last))`.
pub fn phases_from_eigenvector<T: Real>(w_bar: &CVec<T>) -> PhaseConfig<T> {
    let n = w_bar.len() - 1;
    let ref_angle = arg0(w_bar[n]);
    PhaseConfig {
        theta: CVec::from_fn(n, |i, _| cis(arg0(w_bar[i]) - ref_angle)),
        alphabet: Alphabet::Continuous,
    }
}

/// Reference path for [`heuristic_phases`]: eigen-solve in `N_R + 1` dimensions.
pub fn heuristic_phases_direct<T: Real>(gram: &GramDecomposition<T>, p_bar: T) -> Result<PhaseConfig<T>> {
    let k = gram.n_users();
    let a = linalg::identity::<T>(k) * real(T::one() / p_bar) + &gram.c_mat;
    let chol = linalg::cholesky(&a, "I/p + C")?;
    let m = gram.d_mat.adjoint() * chol.solve(&gram.d_mat);
    let e = hermitian_eigen(&m);
    Ok(phases_from_eigenvector(&e.vector(0)))
}
