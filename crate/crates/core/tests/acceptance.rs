//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run alone with `cargo test -p ris-thp --test acceptance`.

use std::f64::consts::{E, PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_thp::alloc::{exhaustive_allocate, greedy_allocate, GreedyOptions, PhaseMode};
use ris_thp::channel::{draw_realization, ChannelRealization, ScenarioConfig};
use ris_thp::gram::{decompose, effective_channel, extend_theta};
use ris_thp::linalg::{log2_det_hpd, max_abs};
use ris_thp::phase_opt::{
    align_phases, heuristic_phases, heuristic_phases_direct, rayleigh_objective, zero_eig_direction,
    zero_eig_objective, PhaseConfig, QuadraticObjective,
};
use ris_thp::scalar::{cis, CMat, CVec};
use ris_thp::sim::{self, uniformity_test, Method, RunConfig, Sweep};
use ris_thp::thp::{build_filters, order_users, per_user_se, simulate_transmission, thp_mse, SeMode};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn cm(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat<f64> {
    CMat::from_fn(r, c, |_, _| {
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        let h: f64 = rng.sample(rand_distr::StandardNormal);
        Complex::new(g, h) * std::f64::consts::FRAC_1_SQRT_2
    })
}

fn realization(rng: &mut ChaCha8Rng, k: usize, nb: usize, nr: usize) -> ChannelRealization<f64> {
    let b = cm(rng, nb, 1).column(0).into_owned();
    let b = &b / Complex::new(b.norm(), 0.0);
    ChannelRealization::from_parts(cm(rng, k, nb), cm(rng, k, nr), b).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, n: usize) -> CVec<f64> {
    CVec::from_fn(n, |_, _| cis(rng.random::<f64>() * TAU))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn describe(xs: &mut [f64]) -> String {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    format!(
        "min {:.4} / p10 {:.4} / median {:.4} / mean {:.4} / max {:.4}",
        xs[0],
        xs[n / 10],
        xs[n / 2],
        mean,
        xs[n - 1]
    )
}

/// Sum of per-user asymptotes equals `log2 det(p H H^H) - 4 log2(pi e / 6)`.
fn shaping_loss_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = realization(&mut rng, 4, 4, 8);
        let th = random_theta(&mut rng, 8);
        let h = effective_channel(&r, &[0, 1, 2, 3], &th).map_err(|e| e.to_string())?;
        let p = 10f64.powf(rng.random::<f64>() * 4.0);
        let order = order_users(&h).map_err(|e| e.to_string())?;
        let f = build_filters(&h, &order, 4.0 * p).map_err(|e| e.to_string())?;
        let sum: f64 = f.diag_l.iter().map(|&l| per_user_se(l, p, SeMode::Asymptote).unwrap()).sum();
        let g = &h * h.adjoint() * Complex::new(p, 0.0);
        let expect = log2_det_hpd(&g, "p H H^H").unwrap() - 4.0 * (PI * E / 6.0).log2();
        worst = worst.max((sum - expect).abs());
    }
    check(worst < 1e-9, format!("max abs error {worst:.2e} over 100 channels"))
}

/// Exact modulo-channel rate against its high-power asymptote and its low-power limit.
fn exact_rate_convergence() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let snr = 10f64.powf(4.0 + 4.0 * i as f64 / 19.0);
        let exact = per_user_se(1.0, snr, SeMode::Exact).map_err(|e| e.to_string())?;
        let asym = per_user_se(1.0, snr, SeMode::Asymptote).unwrap();
        worst = worst.max((exact - asym).abs());
    }
    let low = per_user_se(1.0, 1e-3, SeMode::Exact).map_err(|e| e.to_string())?.abs();
    check(
        worst < 0.01 && low < 0.01,
        format!("max gap {worst:.2e} bits for p L^2 in [1e4, 1e8]; rate {low:.2e} bits at p L^2 = 1e-3"),
    )
}

/// `H H^H = C + D tb tb^H D^H`.
fn gram_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let nb = 2 + i % 6;
        let k = 1 + (i / 6) % nb;
        let nr = 1 + (i * 7) % 32;
        let r = realization(&mut rng, k, nb, nr);
        let users: Vec<usize> = (0..k).collect();
        let g = decompose(&r, &users).unwrap();
        let th = random_theta(&mut rng, nr);
        let h = effective_channel(&r, &users, &th).unwrap();
        let err = max_abs(&(g.gram(&extend_theta(&th)) - &h * h.adjoint()));
        worst = worst.max(err);
    }
    check(worst < 1e-10, format!("max abs error {worst:.2e} over 1000 pairs"))
}

/// Closed-form alignment against a 64^3 grid of phases.
fn alignment_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let grid: Vec<Complex<f64>> = (0..64).map(|i| cis(TAU * i as f64 / 64.0)).collect();
    let bound = 2.0 * PI / 64.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut closest = f64::INFINITY;
    for _ in 0..20 {
        // K = N_B forces one zero eigenvalue of C
        let r = realization(&mut rng, 3, 3, 3);
        let users = [0, 1, 2];
        let g = decompose(&r, &users).unwrap();
        if g.zero_eigen_count() != 1 {
            return Err("fixture without a single zero eigenvalue".into());
        }
        let u = zero_eig_direction(&r, &users).map_err(|e| e.to_string())?;
        let cf = zero_eig_objective(&g, &u, &align_phases(&u, &r, &users).unwrap().theta_bar());
        // |u^H D tb|^2 = |sum_n c_n theta_n + c_last|^2
        let c = g.d_mat.adjoint() * &u;
        let c: Vec<Complex<f64>> = c.iter().map(|z| z.conj()).collect();
        let mut best: f64 = 0.0;
        for a in &grid {
            let s0 = c[0] * a + c[3];
            for b in &grid {
                let s1 = s0 + c[1] * b;
                for d in &grid {
                    best = best.max((s1 + c[2] * d).norm_sqr());
                }
            }
        }
        worst_excess = worst_excess.max(best / cf - 1.0);
        closest = closest.min(cf / best - 1.0);
    }
    check(
        worst_excess <= bound,
        format!("max relative excess of the grid over the closed form {worst_excess:.2e} (allowed {bound:.3}); closed form ahead by at least {closest:.2e}"),
    )
}

/// K-dimensional eigenvector route against the direct `(N_R+1)`-dimensional
/// eigen-solve, and against closed-form alignment when `C` is singular.
fn heuristic_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst_direct: f64 = 0.0;
    for i in 0..50 {
        let nr = 1 + i % 11;
        let nb = 4 + i % 3;
        let k = 1 + i % 3;
        let r = realization(&mut rng, k, nb, nr);
        let users: Vec<usize> = (0..k).collect();
        let g = decompose(&r, &users).unwrap();
        let p = 10f64.powf(1.0 + 2.0 * rng.random::<f64>());
        let a = heuristic_phases(&g, p).map_err(|e| e.to_string())?;
        let b = heuristic_phases_direct(&g, p).map_err(|e| e.to_string())?;
        let fa = rayleigh_objective(&g, &a.theta_bar(), p).unwrap();
        let fb = rayleigh_objective(&g, &b.theta_bar(), p).unwrap();
        worst_direct = worst_direct.max((fa - fb).abs() / fb.abs().max(1e-300));
    }
    let mut worst_zero: f64 = 0.0;
    for i in 0..20 {
        let nr = 2 + i % 10;
        let r = realization(&mut rng, 3, 3, nr);
        let users = [0, 1, 2];
        let g = decompose(&r, &users).unwrap();
        let u = zero_eig_direction(&r, &users).map_err(|e| e.to_string())?;
        let cf = zero_eig_objective(&g, &u, &align_phases(&u, &r, &users).unwrap().theta_bar());
        let h = heuristic_phases(&g, 1e12).map_err(|e| e.to_string())?;
        let fh = zero_eig_objective(&g, &u, &h.theta_bar());
        worst_zero = worst_zero.max((cf - fh).abs() / cf);
    }
    check(
        worst_direct < 1e-9 && worst_zero < 1e-8,
        format!("direct solve rel. diff {worst_direct:.2e} (50 fixtures); singular-C rel. diff {worst_zero:.2e} at p = 1e12 (20 fixtures)"),
    )
}

/// Binary element-wise ascent: single-flip optimal and never above the exhaustive maximum.
fn binary_phases() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut ratios = Vec::with_capacity(200);
    let mut locally_optimal = 0;
    let mut above_max = 0;
    for _ in 0..200 {
        let r = realization(&mut rng, 3, 4, 10);
        let g = decompose(&r, &[0, 1, 2]).unwrap();
        let p = 100.0;
        let obj = QuadraticObjective::regularized(&g, p).unwrap();
        let cont = obj.refine(&heuristic_phases(&g, p).unwrap(), 50).unwrap();
        let bin = obj.refine(&cont.to_binary(), 50).unwrap();
        let f = obj.value_of(&bin);
        let mut is_local = true;
        for n in 0..10 {
            let mut t = bin.clone();
            t.theta[n] = -t.theta[n];
            if obj.value_of(&t) > f * (1.0 + 1e-12) {
                is_local = false;
            }
        }
        locally_optimal += is_local as usize;
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..1024 {
            let signs: Vec<bool> = (0..10).map(|n| mask & (1 << n) != 0).collect();
            best = best.max(obj.value_of(&PhaseConfig::binary(&signs)));
        }
        above_max += (f > best * (1.0 + 1e-12)) as usize;
        ratios.push(f / best);
    }
    let hits = ratios.iter().filter(|&&x| x >= 1.0 - 1e-12).count();
    check(
        locally_optimal == 200 && above_max == 0,
        format!(
            "{locally_optimal}/200 single-flip optimal, {above_max} above exhaustive max; achieved/optimal {}; {hits}/200 reach the optimum",
            describe(&mut ratios)
        ),
    )
}

/// Modulo-loop output is uniform and the transmit powers match the design.
fn appendix_uniformity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let scenario = ScenarioConfig::ris_weak();
    let real_: ChannelRealization<f64> = draw_realization(&scenario, &mut rng).unwrap();
    let p_tx = scenario.tx_mw();
    let alloc = greedy_allocate(&real_, p_tx, PhaseMode::Continuous, &GreedyOptions::default(), &mut rng)
        .map_err(|e| e.to_string())?;
    let h = effective_channel(&real_, &alloc.order, &alloc.theta.theta).unwrap();
    let k = alloc.order.len();
    let f = build_filters(&h, &(0..k).collect::<Vec<_>>(), p_tx).map_err(|e| e.to_string())?;
    let stats = simulate_transmission(&f, &h, 100_000, false, &mut rng).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut ks_parts = Vec::new();
    for i in 0..k {
        let t = uniformity_test(&stats.v_real[i], 0.01).map_err(|e| e.to_string())?;
        ok &= t.passed;
        ks_parts.push(format!("{:.4}", t.statistic));
    }
    let crit = sim::ks_critical_value(100_000, 0.01);
    let worst_v = stats
        .v_power
        .iter()
        .map(|p| (p * 6.0 - 1.0).abs())
        .fold(0.0, f64::max);
    let x_err = (stats.x_power / p_tx - 1.0).abs();
    ok &= worst_v < 0.01 && x_err < 0.01;
    check(
        ok,
        format!(
            "{k} users; KS [{}] < {crit:.4}; max |6 E|v|^2 - 1| = {worst_v:.4}; |E||x||^2 / P - 1| = {x_err:.4}",
            ks_parts.join(", ")
        ),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Analytic MSE against Monte Carlo, and greedy order against all orders.
fn order_and_mse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst_mc: f64 = 0.0;
    for _ in 0..10 {
        let h = cm(&mut rng, 4, 5);
        let p_tx = 100.0;
        let order = order_users(&h).unwrap();
        let f = build_filters(&h, &order, p_tx).unwrap();
        let analytic = thp_mse(&f.diag_l, p_tx, 4).unwrap();
        let stats = simulate_transmission(&f, &h, 100_000, false, &mut rng).unwrap();
        worst_mc = worst_mc.max((stats.mse / analytic - 1.0).abs());
    }
    let perms = permutations(4);
    let mut ratios = Vec::with_capacity(100);
    let mut beaten = 0;
    for _ in 0..100 {
        let h = cm(&mut rng, 4, 4);
        let greedy = build_filters(&h, &order_users(&h).unwrap(), 1.0).unwrap();
        let g_mse = thp_mse(&greedy.diag_l, 1.0, 4).unwrap();
        let best = perms
            .iter()
            .map(|o| thp_mse(&build_filters(&h, o, 1.0).unwrap().diag_l, 1.0, 4).unwrap())
            .fold(f64::INFINITY, f64::min);
        beaten += (g_mse < best * (1.0 - 1e-12)) as usize;
        ratios.push(g_mse / best);
    }
    check(
        worst_mc < 0.02 && beaten == 0,
        format!(
            "max Monte Carlo deviation {:.2}%; greedy/optimal MSE {}",
            100.0 * worst_mc,
            describe(&mut ratios)
        ),
    )
}

/// More RIS elements help THP with random phases but barely help linear ZF.
fn rank_improvement_trend() -> Outcome {
    let mut c = RunConfig::new(
        ScenarioConfig::very_strong_impact(),
        200,
        vec![Method::Thp, Method::ThpRandom, Method::LinearZfRandom],
    );
    c.scenario.tx_dbm = 30.0;
    c.sweep = Sweep::NRis(vec![64, 512]);
    c.options.timing = false;
    let records = sim::run(&c).map_err(|e| e.to_string())?;
    let mean = |m: Method, nr: f64| {
        let xs: Vec<f64> = records
            .iter()
            .filter(|r| r.method == m && r.sweep_value == nr)
            .map(|r| r.sum_se_bits)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let thp_gain = mean(Method::ThpRandom, 512.0) - mean(Method::ThpRandom, 64.0);
    let lin_gain = mean(Method::LinearZfRandom, 512.0) - mean(Method::LinearZfRandom, 64.0);
    let ordered = [64.0, 512.0]
        .iter()
        .all(|&nr| mean(Method::Thp, nr) >= mean(Method::ThpRandom, nr));
    check(
        thp_gain >= 1.0 && lin_gain < thp_gain && ordered,
        format!(
            "THP-random {:.2} -> {:.2} (+{thp_gain:.2}); linear-ZF-random {:.2} -> {:.2} ({lin_gain:+.2}); THP {:.2} / {:.2}",
            mean(Method::ThpRandom, 64.0),
            mean(Method::ThpRandom, 512.0),
            mean(Method::LinearZfRandom, 64.0),
            mean(Method::LinearZfRandom, 512.0),
            mean(Method::Thp, 64.0),
            mean(Method::Thp, 512.0)
        ),
    )
}

/// Greedy against exhaustive allocation, and blocked users in the default scenario.
fn greedy_allocation_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut ratios = Vec::with_capacity(100);
    let mut exceeded = 0;
    for _ in 0..100 {
        let r = realization(&mut rng, 4, 4, 6);
        let p_tx = 10f64.powf(1.0 + 3.0 * rng.random::<f64>());
        let g = greedy_allocate(&r, p_tx, PhaseMode::Continuous, &GreedyOptions::default(), &mut rng)
            .map_err(|e| e.to_string())?;
        let ex = exhaustive_allocate(&r, p_tx, PhaseMode::Continuous, &mut rng).map_err(|e| e.to_string())?;
        exceeded += (g.se_bound > ex.se_bound + 1e-9) as usize;
        ratios.push(g.se_bound / ex.se_bound);
    }
    // rank-improvement fixture: blocked direct paths are effectively gone, so
    // the blocked users share the single BS-RIS dimension
    let mut fixture = ScenarioConfig::ris_weak();
    fixture.blockage_extra_db = 200.0;
    let (violations, hist) = blocked_counts(&fixture)?;
    // the default 60 dB blockage leaves a weak direct path that can carry a
    // second blocked user at high power; reported, not asserted
    let (_, hist_60) = blocked_counts(&ScenarioConfig::ris_weak())?;
    check(
        exceeded == 0 && violations == 0,
        format!(
            "{exceeded}/100 above exhaustive; greedy/exhaustive bound {}; blocked users allocated (0/1/2/3) over 200 trials: {hist:?} at 200 dB blockage, {hist_60:?} at 60 dB",
            describe(&mut ratios),
        ),
    )
}

/// Histogram of allocated blocked users over 200 greedy runs, and the number
/// of runs with more than one.
fn blocked_counts(scenario: &ScenarioConfig) -> Result<(usize, [usize; 4]), String> {
    let mut hist = [0usize; 4];
    for t in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(sim::cell_seed(scenario.seed, 0, t));
        let real_: ChannelRealization<f64> = draw_realization(scenario, &mut rng).map_err(|e| e.to_string())?;
        let a = greedy_allocate(&real_, scenario.tx_mw(), PhaseMode::Continuous, &GreedyOptions::default(), &mut rng)
            .map_err(|e| e.to_string())?;
        let blocked = a.users.iter().filter(|&&u| real_.users[u].blocked).count();
        hist[blocked.min(3)] += 1;
    }
    Ok((hist[2] + hist[3], hist))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("shaping-loss identity", shaping_loss_identity),
        ("exact rate convergence", exact_rate_convergence),
        ("Gram identity", gram_identity),
        ("phase-alignment optimality", alignment_optimality),
        ("heuristic equivalence", heuristic_equivalence),
        ("binary phases", binary_phases),
        ("modulo output uniformity", appendix_uniformity),
        ("decoding order and MSE", order_and_mse),
        ("rank-improvement trend", rank_improvement_trend),
        ("greedy allocation sanity", greedy_allocation_sanity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name} ({secs:.1} s): {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
