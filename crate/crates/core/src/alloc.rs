//! Greedy user allocation for ZF-THP.
//!
//! Each candidate set `S` gets its own phases and decoding order and is
//! scored with `sum_k max(0, SE_k)`, where `SE_k` is the high-power per-user
//! rate `log2(6 p L_kk^2 / (pi e))` at `p = P_tx / |S|`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::gram::{decompose, effective_channel, GramDecomposition};
use crate::linalg::{self, principal_eigen};
use crate::phase_opt::{
    align_phases, heuristic_phases, zero_eig_direction_with, Alphabet, PhaseConfig, QuadraticObjective,
    DEFAULT_MAX_SWEEPS,
};
use crate::scalar::{CMat, Real};
use crate::thp::{build_filters, order_users, per_user_se, SeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// I.i.d. uniform phases.
    Random,
    /// Closed-form alignment or eigenvector heuristic, then element-wise ascent.
    Continuous,
    /// Continuous result rounded to `{-1, +1}`, then binary element-wise ascent.
    Binary,
    /// All phases `1`, no optimization (used when the RIS is switched off).
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyStart {
    /// Best single user under the bound.
    #[default]
    BestSingle,
    /// User `0`.
    FirstIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    pub start: GreedyStart,
    pub max_sweeps: usize,
    /// Evaluate only this many candidate additions per step, ranked by the
    /// two-norm relaxation.
    pub relaxation_prune: Option<usize>,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            start: GreedyStart::BestSingle,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            relaxation_prune: None,
        }
    }
}

/// A scored user set.
#[derive(Debug, Clone)]
pub struct Allocation<T: Real> {
    /// Global user ids, ascending.
    pub users: Vec<usize>,
    pub theta: PhaseConfig<T>,
    /// Global user ids in encoding order.
    pub order: Vec<usize>,
    /// `L_kk` in encoding order.
    pub diag_l: Vec<T>,
    pub p_bar: T,
    /// `sum max(0, SE_k)`; `-inf` for an infeasible set.
    pub se_bound: T,
    /// Sum of the exact modulo-channel rates; `NaN` until computed.
    pub se_exact: T,
}

impl<T: Real> Allocation<T> {
    pub fn is_feasible(&self) -> bool {
        self.se_bound.is_finite_val()
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    fn infeasible(users: Vec<usize>, theta: PhaseConfig<T>, p_bar: T) -> Self {
        Self {
            users,
            theta,
            order: Vec::new(),
            diag_l: Vec::new(),
            p_bar,
            se_bound: T::lit(f64::NEG_INFINITY),
            se_exact: T::zero(),
        }
    }

    fn empty(n_ris: usize) -> Self {
        Self {
            users: Vec::new(),
            theta: PhaseConfig::ones(n_ris),
            order: Vec::new(),
            diag_l: Vec::new(),
            p_bar: T::zero(),
            se_bound: T::zero(),
            se_exact: T::zero(),
        }
    }

    /// Fills `se_exact` from `diag_l`.
    pub fn compute_exact(&mut self) -> Result<()> {
        if self.diag_l.is_empty() {
            self.se_exact = T::zero();
            return Ok(());
        }
        let p = self.p_bar.as_f64();
        let mut acc = 0.0;
        for &l in &self.diag_l {
            acc += per_user_se(l.as_f64(), p, SeMode::Exact)?;
        }
        self.se_exact = T::lit(acc);
        Ok(())
    }
}

/// Phases for `users` under `mode`.
pub fn choose_phases<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    gram: &GramDecomposition<T>,
    p_bar: T,
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
            let (init, objective) = if gram.zero_eigen_count() == 1 {
                let u = zero_eig_direction_with(real_, users, gram)?;
                (align_phases(&u, real_, users)?, QuadraticObjective::zero_eig(gram, &u))
            } else {
                (heuristic_phases(gram, p_bar)?, QuadraticObjective::regularized(gram, p_bar)?)
            };
            let cont = objective.refine(&init, max_sweeps)?;
            if mode == PhaseMode::Continuous {
                return Ok(cont);
            }
            objective.refine(&cont.to_binary(), max_sweeps)
        }
    }
}

fn score<T: Real>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    theta: PhaseConfig<T>,
    p_bar: T,
) -> Result<Allocation<T>> {
    let h = effective_channel(real_, users, &theta.theta)?;
    let local_order = match order_users(&h) {
        Ok(o) => o,
        Err(Error::RankDeficient(_)) => return Ok(Allocation::infeasible(users.to_vec(), theta, p_bar)),
        Err(e) => return Err(e),
    };
    let filters = match build_filters(&h, &local_order, p_bar * T::from_usize_lossy(users.len())) {
        Ok(f) => f,
        Err(Error::RankDeficient(_)) => return Ok(Allocation::infeasible(users.to_vec(), theta, p_bar)),
        Err(e) => return Err(e),
    };
    let p = p_bar.as_f64();
    let mut bound = 0.0;
    for &l in &filters.diag_l {
        bound += per_user_se(l.as_f64(), p, SeMode::Asymptote)?.max(0.0);
    }
    Ok(Allocation {
        users: users.to_vec(),
        theta,
        order: local_order.iter().map(|&i| users[i]).collect(),
        diag_l: filters.diag_l,
        p_bar,
        se_bound: T::lit(bound),
        se_exact: T::lit(f64::NAN),
    })
}

fn evaluate_inner<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    p_bar: T,
    mode: PhaseMode,
    fixed: Option<&PhaseConfig<T>>,
    max_sweeps: usize,
    rng: &mut R,
) -> Result<Allocation<T>> {
    let mut users = users.to_vec();
    users.sort_unstable();
    real_.check_users(&users)?;
    if users.len() > real_.n_bs() {
        return Err(Error::InvalidArgument(format!(
            "{} users exceed N_B = {}",
            users.len(),
            real_.n_bs()
        )));
    }
    let theta = match fixed {
        Some(t) => t.clone(),
        None => {
            let gram = decompose(real_, &users)?;
            match choose_phases(real_, &users, &gram, p_bar, mode, max_sweeps, rng) {
                Ok(t) => t,
                Err(Error::Degenerate(_)) | Err(Error::RankDeficient(_)) => {
                    return Ok(Allocation::infeasible(users, PhaseConfig::ones(real_.n_ris()), p_bar))
                }
                Err(e) => return Err(e),
            }
        }
    };
    score(real_, &users, theta, p_bar)
}

/// Phases, decoding order, bound and exact rate of one user set.
pub fn evaluate_allocation<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    users: &[usize],
    p_bar: T,
    mode: PhaseMode,
    rng: &mut R,
) -> Result<Allocation<T>> {
    if !(p_bar > T::zero()) {
        return Err(Error::Domain("per-user power must be positive".into()));
    }
    let mut a = evaluate_inner(real_, users, p_bar, mode, None, DEFAULT_MAX_SWEEPS, rng)?;
    a.compute_exact()?;
    Ok(a)
}

/// `N_R lambda_max(C^{-1} D D^H)`, from the `K x K` Hermitian form
/// `L^{-1} D D^H L^{-H}` with `C = L L^H`.
pub fn relaxation_metric<T: Real>(gram: &GramDecomposition<T>, n_ris: usize) -> Result<T> {
    if gram.zero_eigen_count() > 0 {
        return Err(Error::NotApplicable("C is singular on this user set".into()));
    }
    let chol = linalg::cholesky(&gram.c_mat, "C").map_err(|_| Error::NotApplicable("C is not invertible".into()))?;
    let x: CMat<T> = chol
        .l()
        .solve_lower_triangular(&gram.d_mat)
        .ok_or_else(|| Error::NotApplicable("singular Cholesky factor".into()))?;
    let (lambda, _) = principal_eigen(&(&x * x.adjoint()));
    Ok(T::from_usize_lossy(n_ris) * lambda)
}

/// Cheap ranking score of a set: `log2 det(p C) + log2(relaxation metric)`.
fn relaxation_score<T: Real>(real_: &ChannelRealization<T>, users: &[usize], p_bar: T) -> T {
    let Ok(gram) = decompose(real_, users) else {
        return T::lit(f64::INFINITY);
    };
    let Ok(metric) = relaxation_metric(&gram, real_.n_ris()) else {
        // singular C: the closed-form case, always worth an exact look
        return T::lit(f64::INFINITY);
    };
    let logdet = gram.eigen.eigenvalues.iter().fold(T::zero(), |acc, &l| acc + (l * p_bar).log2());
    logdet + metric.max(T::lit(f64::MIN_POSITIVE)).log2()
}

/// Greedy allocation with `p = P_tx / |S|` for every candidate set.
///
/// Binary phases follow the continuous allocation: the set is chosen with
/// continuous phases and only the final set is re-optimized on `{-1, +1}`.
/// Random phases are drawn once and shared by all candidate sets.
pub fn greedy_allocate<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    tx_power: T,
    mode: PhaseMode,
    options: &GreedyOptions,
    rng: &mut R,
) -> Result<Allocation<T>> {
    if !(tx_power > T::zero()) {
        return Err(Error::Domain("transmit power must be positive".into()));
    }
    if options.max_sweeps == 0 {
        return Err(Error::InvalidArgument("max_sweeps must be positive".into()));
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
    let p_of = |n: usize| tx_power / T::from_usize_lossy(n);
    let eval = |users: &[usize], rng: &mut R| {
        evaluate_inner(real_, users, p_of(users.len()), search_mode, fixed.as_ref(), options.max_sweeps, rng)
    };

    let mut current = match options.start {
        GreedyStart::FirstIndex => eval(&[0], rng)?,
        GreedyStart::BestSingle => {
            let mut best: Option<Allocation<T>> = None;
            for u in 0..k {
                let a = eval(&[u], rng)?;
                if best.as_ref().is_none_or(|b| a.se_bound > b.se_bound) {
                    best = Some(a);
                }
            }
            best.expect("at least one user")
        }
    };
    if !current.is_feasible() {
        return Ok(Allocation::empty(real_.n_ris()));
    }

    while current.len() < max_users {
        let mut candidates: Vec<usize> = (0..k).filter(|u| !current.users.contains(u)).collect();
        if let Some(m) = options.relaxation_prune {
            let p = p_of(current.len() + 1);
            let mut scored: Vec<(T, usize)> = candidates
                .iter()
                .map(|&u| {
                    let mut s = current.users.clone();
                    s.push(u);
                    (relaxation_score(real_, &s, p), u)
                })
                .collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            candidates = scored.into_iter().take(m.max(1)).map(|(_, u)| u).collect();
            candidates.sort_unstable();
        }
        let mut best: Option<Allocation<T>> = None;
        for u in candidates {
            let mut s = current.users.clone();
            s.push(u);
            let a = eval(&s, rng)?;
            if best.as_ref().is_none_or(|b| a.se_bound > b.se_bound) {
                best = Some(a);
            }
        }
        match best {
            Some(b) if b.se_bound > current.se_bound => current = b,
            _ => break,
        }
    }

    if mode == PhaseMode::Binary {
        let users = current.users.clone();
        let p = p_of(users.len());
        let a = evaluate_inner(real_, &users, p, PhaseMode::Binary, None, options.max_sweeps, rng)?;
        current = if a.is_feasible() { a } else { current };
        debug_assert!(current.theta.alphabet == Alphabet::Binary || !current.is_feasible());
    }
    current.compute_exact()?;
    Ok(current)
}

/// Exhaustive search over all nonempty sets of at most `min(K, N_B)` users.
/// Exponential; meant for checking [`greedy_allocate`] on small problems.
pub fn exhaustive_allocate<T: Real, R: Rng + ?Sized>(
    real_: &ChannelRealization<T>,
    tx_power: T,
    mode: PhaseMode,
    rng: &mut R,
) -> Result<Allocation<T>> {
    let k = real_.n_users();
    if k > 16 {
        return Err(Error::InvalidArgument("exhaustive search is limited to 16 users".into()));
    }
    let max_users = k.min(real_.n_bs());
    let fixed = match mode {
        PhaseMode::Random => Some(PhaseConfig::random(real_.n_ris(), rng)),
        _ => None,
    };
    let mut best: Option<Allocation<T>> = None;
    for mask in 1u32..(1 << k) {
        let users: Vec<usize> = (0..k).filter(|&u| mask & (1 << u) != 0).collect();
        if users.len() > max_users {
            continue;
        }
        let p = tx_power / T::from_usize_lossy(users.len());
        let a = evaluate_inner(real_, &users, p, mode, fixed.as_ref(), DEFAULT_MAX_SWEEPS, rng)?;
        if best.as_ref().is_none_or(|b| a.se_bound > b.se_bound) {
            best = Some(a);
        }
    }
    let mut best = best.expect("K >= 1");
    best.compute_exact()?;
    Ok(best)
}

/// Effective channel rows of an allocation in encoding order.
pub fn ordered_channel<T: Real>(real_: &ChannelRealization<T>, alloc: &Allocation<T>) -> Result<CMat<T>> {
    effective_channel(real_, &alloc.order, &alloc.theta.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::extend_theta;
    use crate::linalg::hermitian_eigen;
    use crate::phase_opt::zero_eig_objective;
    use crate::scalar::{cis, CVec};
    use nalgebra::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, PI};

    fn cm(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat<f64> {
        CMat::from_fn(r, c, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn realization(rng: &mut ChaCha8Rng, k: usize, nb: usize, nr: usize) -> ChannelRealization<f64> {
        let b = cm(rng, nb, 1).column(0).into_owned();
        let b = &b / Complex::new(b.norm(), 0.0);
        ChannelRealization::from_parts(cm(rng, k, nb), cm(rng, k, nr), b).unwrap()
    }

    #[test]
    fn single_user_bound_is_channel_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = realization(&mut rng, 3, 4, 5);
        for mode in [PhaseMode::Random, PhaseMode::Continuous, PhaseMode::Binary] {
            let p = 50.0;
            let a = evaluate_allocation(&r, &[1], p, mode, &mut rng).unwrap();
            assert_eq!(a.order, vec![1]);
            let h = effective_channel(&r, &[1], &a.theta.theta).unwrap();
            let n2 = h.norm_squared();
            let expect = (6.0 * p * n2 / (PI * E)).log2().max(0.0);
            assert!((a.se_bound - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn random_mode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let r = realization(&mut rng, 4, 4, 6);
        let run = |seed| {
            let mut g = ChaCha8Rng::seed_from_u64(seed);
            greedy_allocate(&r, 100.0, PhaseMode::Random, &GreedyOptions::default(), &mut g).unwrap()
        };
        let a = run(5);
        let b = run(5);
        assert_eq!(a.users, b.users);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.se_exact, b.se_exact);
    }

    #[test]
    fn zero_eig_continuous_keeps_alignment_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let r = realization(&mut rng, 4, 4, 6);
        let users = [0, 1, 2, 3];
        let gram = decompose(&r, &users).unwrap();
        assert_eq!(gram.zero_eigen_count(), 1);
        let u = zero_eig_direction_with(&r, &users, &gram).unwrap();
        let aligned = align_phases(&u, &r, &users).unwrap();
        let a = evaluate_allocation(&r, &users, 10.0, PhaseMode::Continuous, &mut rng).unwrap();
        let f_align = zero_eig_objective(&gram, &u, &aligned.theta_bar());
        let f_alloc = zero_eig_objective(&gram, &u, &a.theta.theta_bar());
        assert!((f_alloc - f_align).abs() <= 1e-9 * f_align);
    }

    #[test]
    fn relaxation_metric_single_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let r = realization(&mut rng, 2, 3, 4);
        let g = decompose(&r, &[0]).unwrap();
        let c = g.c_mat[(0, 0)].re;
        let d2 = g.d_mat.norm_squared();
        let m = relaxation_metric(&g, 4).unwrap();
        assert!((m - 4.0 * d2 / c).abs() < 1e-10 * m);
    }

    #[test]
    fn relaxation_metric_matches_large_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..10 {
            let r = realization(&mut rng, 3, 5, 6);
            let g = decompose(&r, &[0, 1, 2]).unwrap();
            let m = relaxation_metric(&g, 6).unwrap();
            let cinv = g.c_mat.clone().try_inverse().unwrap();
            let big = g.d_mat.adjoint() * cinv * &g.d_mat;
            let lmax = hermitian_eigen(&big).eigenvalues[0];
            assert!((m - 6.0 * lmax).abs() < 1e-9 * m);
            for _ in 0..20 {
                let th = CVec::from_fn(6, |_, _| cis(rng.random::<f64>() * std::f64::consts::TAU));
                let tb = extend_theta(&th);
                let q = (tb.adjoint() * g.d_mat.adjoint() * g.c_mat.clone().try_inverse().unwrap() * &g.d_mat * &tb)[0].re;
                assert!(m >= q * 6.0 / 7.0 - 1e-9);
            }
        }
    }

    #[test]
    fn relaxation_metric_rejects_singular_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let r = realization(&mut rng, 3, 3, 4);
        let g = decompose(&r, &[0, 1, 2]).unwrap();
        assert!(matches!(relaxation_metric(&g, 4), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn low_power_allocates_one_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let r = realization(&mut rng, 4, 4, 4);
        let a = greedy_allocate(&r, 2.0, PhaseMode::Continuous, &GreedyOptions::default(), &mut rng).unwrap();
        let ex = exhaustive_allocate(&r, 2.0, PhaseMode::Continuous, &mut rng).unwrap();
        assert!(a.len() <= 1 || ex.len() > 1);
        assert!(a.se_bound <= ex.se_bound + 1e-9);
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..5 {
            let r = realization(&mut rng, 4, 4, 4);
            let g = greedy_allocate(&r, 1e4, PhaseMode::Continuous, &GreedyOptions::default(), &mut rng).unwrap();
            let ex = exhaustive_allocate(&r, 1e4, PhaseMode::Continuous, &mut rng).unwrap();
            assert!(g.se_bound <= ex.se_bound + 1e-9);
            assert!(g.len() <= 4);
        }
    }

    #[test]
    fn prune_and_first_index_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let r = realization(&mut rng, 5, 4, 4);
        let opts = GreedyOptions {
            start: GreedyStart::FirstIndex,
            relaxation_prune: Some(2),
            ..GreedyOptions::default()
        };
        let a = greedy_allocate(&r, 1e3, PhaseMode::Continuous, &opts, &mut rng).unwrap();
        assert!(a.users.contains(&0));
        assert!(a.se_exact.is_finite());
    }

    #[test]
    fn binary_mode_yields_binary_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let r = realization(&mut rng, 4, 4, 8);
        let a = greedy_allocate(&r, 1e3, PhaseMode::Binary, &GreedyOptions::default(), &mut rng).unwrap();
        a.theta.validate().unwrap();
        assert_eq!(a.theta.alphabet, Alphabet::Binary);
    }
}
