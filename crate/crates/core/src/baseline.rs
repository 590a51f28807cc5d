//! Linear zero-forcing reference with equal power split.
//!
//! `SE_k = log2(1 + p_k / [(H H^H)^{-1}]_kk)`: the ZF beam of user `k` is
//! column `k` of `H^+ = H^H (H H^H)^{-1}` normalized, and that column has
//! squared norm `[(H H^H)^{-1}]_kk`.

use rand::Rng;

use crate::alloc::{choose_phases, GreedyOptions, GreedyStart, PhaseMode};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::gram::{decompose, effective_channel};
use crate::linalg::{self, check_full_row_rank, select_rows};
use crate::phase_opt::{Alphabet, PhaseConfig};
use crate::scalar::{cis, real, CMat, CVec, Real, C};
use crate::thp::ROW_RANK_TOL;

/// Default number of element-wise sweeps on the linear sum rate.
pub const LINEAR_MAX_SWEEPS: usize = 3;
/// Candidate phases per element in continuous sweeps.
pub const PHASE_GRID: usize = 16;

#[derive(Debug, Clone)]
pub struct LinearSolution<T: Real> {
    /// Global user ids, ascending.
    pub users: Vec<usize>,
    pub theta: PhaseConfig<T>,
    /// `N_B x |users|`, unit-norm columns.
    pub precoder: CMat<T>,
    pub powers: Vec<T>,
    pub per_user_se: Vec<T>,
}

impl<T: Real> LinearSolution<T> {
    pub fn sum_se(&self) -> T {
        self.per_user_se.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    fn empty(n_ris: usize, n_bs: usize) -> Self {
        Self {
            users: Vec::new(),
            theta: PhaseConfig::ones(n_ris),
            precoder: CMat::zeros(n_bs, 0),
            powers: Vec::new(),
            per_user_se: Vec::new(),
        }
    }
}

/// ZF precoder and rates for `users` under phases `theta`.
pub fn zf_linear<T: Real>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    theta: &PhaseConfig<T>,
    tx_power: T,
) -> Result<LinearSolution<T>> {
    if !(tx_power > T::zero()) {
        return Err(Error::Domain("transmit power must be positive".into()));
    }
    let h = effective_channel(real_, users, &theta.theta)?;
    zf_from_channel(&h, users, theta, tx_power)
}

fn zf_from_channel<T: Real>(
    h: &CMat<T>,
    users: &[usize],
    theta: &PhaseConfig<T>,
    tx_power: T,
) -> Result<LinearSolution<T>> {
    check_full_row_rank(h, T::tol(ROW_RANK_TOL), "effective channel")?;
    let k = h.nrows();
    let g = h * h.adjoint();
    let chol = linalg::cholesky(&g, "H H^H")?;
    let pinv = h.adjoint() * chol.inverse();
    let p_k = tx_power / T::from_usize_lossy(k);
    let mut precoder = pinv.clone();
    let mut per_user_se = Vec::with_capacity(k);
    for j in 0..k {
        let n2 = pinv.column(j).norm_squared();
        let n = n2.sqrt();
        precoder.column_mut(j).unscale_mut(n);
        per_user_se.push((T::one() + p_k / n2).log2());
    }
    Ok(LinearSolution {
        users: users.to_vec(),
        theta: theta.clone(),
        precoder,
        powers: vec![p_k; k],
        per_user_se,
    })
}

/// Sum rate as a function of `g = H_c theta`, with `H = H_d + g b^H`.
struct LinearObjective<T: Real> {
    /// `H_d H_d^H`.
    a: CMat<T>,
    /// `H_d b`.
    s: CVec<T>,
    /// Columns of `H_c`.
    hc: CMat<T>,
    p_k: T,
}

impl<T: Real> LinearObjective<T> {
    fn new(real_: &ChannelRealization<T>, users: &[usize], tx_power: T) -> Self {
        let hd = select_rows(&real_.h_direct, users);
        Self {
            a: &hd * hd.adjoint(),
            s: &hd * &real_.b_vec,
            hc: select_rows(&real_.h_cascaded, users),
            p_k: tx_power / T::from_usize_lossy(users.len()),
        }
    }

    fn value(&self, g: &CVec<T>) -> T {
        let gram = &self.a + &self.s * g.adjoint() + g * self.s.adjoint() + g * g.adjoint();
        let Ok(chol) = linalg::cholesky(&gram, "H H^H") else {
            return T::lit(f64::NEG_INFINITY);
        };
        let inv = chol.inverse();
        let mut acc = T::zero();
        for k in 0..gram.nrows() {
            let d = inv[(k, k)].re;
            if !(d > T::zero()) || !d.is_finite_val() {
                return T::lit(f64::NEG_INFINITY);
            }
            acc += (T::one() + self.p_k / d).log2();
        }
        acc
    }

    /// Element-wise ascent; continuous sweeps pick the best of
    /// [`PHASE_GRID`] phases per element, binary sweeps the better sign.
    fn refine(&self, init: &PhaseConfig<T>, max_sweeps: usize) -> PhaseConfig<T> {
        let n_ris = init.len();
        let mut theta = init.theta.clone();
        let mut g = &self.hc * &theta;
        let mut current = self.value(&g);
        let candidates: Vec<C<T>> = match init.alphabet {
            Alphabet::Binary => vec![real(T::one()), real(-T::one())],
            Alphabet::Continuous => (0..PHASE_GRID)
                .map(|i| cis(T::two_pi() * T::from_usize_lossy(i) / T::from_usize_lossy(PHASE_GRID)))
                .collect(),
        };
        for _ in 0..max_sweeps {
            let mut changed = false;
            for n in 0..n_ris {
                let col = self.hc.column(n);
                let base = &g - col * theta[n];
                let mut best = (current, theta[n]);
                for &c in &candidates {
                    if c == theta[n] {
                        continue;
                    }
                    let trial = &base + col * c;
                    let v = self.value(&trial);
                    if v > best.0 {
                        best = (v, c);
                    }
                }
                if best.1 != theta[n] {
                    theta[n] = best.1;
                    g = &base + col * best.1;
                    current = best.0;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        PhaseConfig {
            theta,
            alphabet: init.alphabet,
        }
    }
}

/// Phases for a linear allocation: the same initial phases as for THP,
/// then element-wise ascent on the ZF sum rate.
fn linear_phases<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    tx_power: T,
    mode: PhaseMode,
    max_sweeps: usize,
    rng: &mut R,
) -> Result<PhaseConfig<T>> {
    let n_ris = real_.n_ris();
    match mode {
        PhaseMode::Unit => Ok(PhaseConfig::ones(n_ris)),
        PhaseMode::Random => Ok(PhaseConfig::random(n_ris, rng)),
        PhaseMode::Continuous | PhaseMode::Binary => {
            if n_ris == 0 {
                return Ok(PhaseConfig::ones(0));
            }
            let gram = decompose(real_, users)?;
            let p_bar = tx_power / T::from_usize_lossy(users.len());
            let init = choose_phases(
                real_,
                users,
                &gram,
                p_bar,
                PhaseMode::Continuous,
                crate::phase_opt::DEFAULT_MAX_SWEEPS,
                rng,
            )?;
            let objective = LinearObjective::new(real_, users, tx_power);
            let cont = objective.refine(&init, max_sweeps);
            if mode == PhaseMode::Continuous {
                return Ok(cont);
            }
            Ok(objective.refine(&cont.to_binary(), max_sweeps))
        }
    }
}

fn evaluate_linear<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    tx_power: T,
    mode: PhaseMode,
    fixed: Option<&PhaseConfig<T>>,
    max_sweeps: usize,
    rng: &mut R,
) -> Result<Option<LinearSolution<T>>> {
    let mut users = users.to_vec();
    users.sort_unstable();
    real_.check_users(&users)?;
    let theta = match fixed {
        Some(t) => t.clone(),
        None => match linear_phases(real_, &users, tx_power, mode, max_sweeps, rng) {
            Ok(t) => t,
            Err(Error::Degenerate(_)) | Err(Error::RankDeficient(_)) => return Ok(None),
            Err(e) => return Err(e),
        },
    };
    match zf_linear(real_, &users, &theta, tx_power) {
        Ok(s) => Ok(Some(s)),
        Err(Error::RankDeficient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Greedy allocation on the ZF sum rate; mirrors
/// [`crate::alloc::greedy_allocate`] including the handling of random and
/// binary phases. `options.max_sweeps` bounds the linear phase sweeps.
pub fn greedy_allocate_linear<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    tx_power: T,
    mode: PhaseMode,
    options: &GreedyOptions,
    rng: &mut R,
) -> Result<LinearSolution<T>> {
    if !(tx_power > T::zero()) {
        return Err(Error::Domain("transmit power must be positive".into()));
    }
    let k = real_.n_users();
    let max_users = k.min(real_.n_bs());
    let fixed = match mode {
        PhaseMode::Random => Some(PhaseConfig::random(real_.n_ris(), rng)),
        _ => None,
    };
    let search_mode = if mode == PhaseMode::Binary {
        PhaseMode::Continuous
    } else {
        mode
    };
    let eval = |users: &[usize], rng: &mut R| {
        evaluate_linear(real_, users, tx_power, search_mode, fixed.as_ref(), options.max_sweeps, rng)
    };
    let better = |a: &LinearSolution<T>, b: &Option<LinearSolution<T>>| {
        b.as_ref().is_none_or(|b| a.sum_se() > b.sum_se())
    };

    let mut best: Option<LinearSolution<T>> = None;
    match options.start {
        GreedyStart::FirstIndex => best = eval(&[0], rng)?,
        GreedyStart::BestSingle => {
            for u in 0..k {
                if let Some(a) = eval(&[u], rng)? {
                    if better(&a, &best) {
                        best = Some(a);
                    }
                }
            }
        }
    }
    let Some(mut current) = best else {
        return Ok(LinearSolution::empty(real_.n_ris(), real_.n_bs()));
    };
    while current.len() < max_users {
        let mut step: Option<LinearSolution<T>> = None;
        for u in (0..k).filter(|u| !current.users.contains(u)) {
            let mut s = current.users.clone();
            s.push(u);
            if let Some(a) = eval(&s, rng)? {
                if better(&a, &step) {
                    step = Some(a);
                }
            }
        }
        match step {
            Some(s) if s.sum_se() > current.sum_se() => current = s,
            _ => break,
        }
    }
    if mode == PhaseMode::Binary {
        let users = current.users.clone();
        if let Some(a) = evaluate_linear(real_, &users, tx_power, PhaseMode::Binary, None, options.max_sweeps, rng)? {
            current = a;
        }
    }
    Ok(current)
}
