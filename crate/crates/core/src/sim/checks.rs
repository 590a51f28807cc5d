//! Fast invariant checks run by `ris-thp validate`.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run, stats::uniformity_test, Method, RunConfig};
use crate::alloc::{exhaustive_allocate, greedy_allocate, GreedyOptions, PhaseMode};
use crate::baseline::zf_linear;
use crate::channel::{ChannelRealization, ScenarioConfig};
use crate::gram::{decompose, effective_channel, extend_theta};
use crate::linalg::{identity, log2_det_hpd, max_abs};
use crate::phase_opt::PhaseConfig;
use crate::scalar::{cis, CMat};
use crate::thp::{build_filters, lq_decompose, per_user_se, shaping_loss_bits, simulate_transmission, SeMode};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn cm(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat<f64> {
    CMat::from_fn(r, c, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn realization(rng: &mut ChaCha8Rng, k: usize, nb: usize, nr: usize) -> ChannelRealization<f64> {
    let b = cm(rng, nb, 1).column(0).into_owned();
    let b = &b / Complex::new(b.norm(), 0.0);
    ChannelRealization::from_parts(cm(rng, k, nb), cm(rng, k, nr), b).expect("valid fixture")
}

fn outcome(name: &'static str, result: crate::Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn gram_identity(rng: &mut ChaCha8Rng) -> crate::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = realization(rng, 4, 6, 8);
        let g = decompose(&r, &[0, 1, 2, 3])?;
        let th = PhaseConfig::random(8, rng);
        let h = effective_channel(&r, &[0, 1, 2, 3], &th.theta)?;
        worst = worst.max(max_abs(&(g.gram(&th.theta_bar()) - &h * h.adjoint())));
    }
    Ok((worst < 1e-10, format!("max error {worst:.2e}")))
}

fn shaping_identity(rng: &mut ChaCha8Rng) -> crate::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let h = cm(rng, 4, 4);
        let p = 100.0;
        let f = build_filters(&h, &[0, 1, 2, 3], 4.0 * p)?;
        let sum: f64 = f
            .diag_l
            .iter()
            .map(|&l| per_user_se(l, p, SeMode::Asymptote))
            .sum::<crate::Result<f64>>()?;
        let g = &h * h.adjoint() * Complex::new(p, 0.0);
        let expect = log2_det_hpd(&g, "p H H^H")? - 4.0 * shaping_loss_bits();
        worst = worst.max((sum - expect).abs());
    }
    Ok((worst < 1e-9, format!("max error {worst:.2e}")))
}

fn exact_rate_limits() -> crate::Result<(bool, String)> {
    let hi = (per_user_se(1.0, 1e4, SeMode::Exact)? - per_user_se(1.0, 1e4, SeMode::Asymptote)?).abs();
    let lo = per_user_se(1.0, 1e-3, SeMode::Exact)?;
    Ok((hi < 0.01 && lo < 0.01, format!("gap at 40 dB {hi:.2e}, rate at -30 dB {lo:.2e}")))
}

fn lq_and_modulo_loop(rng: &mut ChaCha8Rng) -> crate::Result<(bool, String)> {
    let h = cm(rng, 4, 6);
    let (l, q) = lq_decompose(&h)?;
    let rec = max_abs(&(&l * &q - &h));
    let orth = max_abs(&(&q * q.adjoint() - identity::<f64>(4)));
    let f = build_filters(&h, &[3, 1, 0, 2], 10.0)?;
    let noiseless = simulate_transmission(&f, &h, 2000, true, rng)?;
    let noisy = simulate_transmission(&f, &h, 20_000, false, rng)?;
    let ks = uniformity_test(&noisy.v_real[3], 0.01)?;
    let ok = rec < 1e-12 && orth < 1e-12 && noiseless.max_symbol_error < 1e-9 && ks.passed;
    Ok((
        ok,
        format!(
            "LQ {rec:.1e}/{orth:.1e}, noiseless error {:.1e}, KS {:.4} < {:.4}",
            noiseless.max_symbol_error, ks.statistic, ks.critical_value
        ),
    ))
}

fn zf_interference(rng: &mut ChaCha8Rng) -> crate::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let r = realization(rng, 3, 4, 5);
        let th = PhaseConfig::random(5, rng);
        let s = zf_linear(&r, &[0, 1, 2], &th, 5.0)?;
        let h = effective_channel(&r, &[0, 1, 2], &th.theta)?;
        let mut e = &h * &s.precoder;
        let scale = max_abs(&e);
        e.fill_diagonal(Complex::new(0.0, 0.0));
        worst = worst.max(max_abs(&e) / scale);
    }
    Ok((worst < 1e-9, format!("max relative residual {worst:.2e}")))
}

fn greedy_vs_exhaustive(rng: &mut ChaCha8Rng) -> crate::Result<(bool, String)> {
    let mut ok = true;
    let mut ratio_min: f64 = 1.0;
    for _ in 0..5 {
        let r = realization(rng, 4, 4, 4);
        let g = greedy_allocate(&r, 1e3, PhaseMode::Continuous, &GreedyOptions::default(), rng)?;
        let ex = exhaustive_allocate(&r, 1e3, PhaseMode::Continuous, rng)?;
        ok &= g.se_bound <= ex.se_bound + 1e-9;
        ratio_min = ratio_min.min(g.se_bound / ex.se_bound);
    }
    Ok((ok, format!("min greedy/exhaustive ratio {ratio_min:.3}")))
}

fn unit_modulus_random_phases(rng: &mut ChaCha8Rng) -> crate::Result<(bool, String)> {
    let th: Vec<_> = (0..64).map(|_| cis(rng.random::<f64>() * 6.0)).collect();
    let tb = extend_theta(&nalgebra::DVector::from_vec(th));
    let worst = tb.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("max modulus deviation {worst:.1e}")))
}

fn run_determinism() -> crate::Result<(bool, String)> {
    let mut scenario = ScenarioConfig::ris_weak();
    scenario.n_ris = 8;
    let mut c = RunConfig::new(scenario, 2, vec![Method::Thp, Method::LinearZfRandom]);
    c.options.timing = false;
    c.options.threads = Some(1);
    let a = run(&c)?;
    c.options.threads = Some(2);
    let b = run(&c)?;
    Ok((a == b, format!("{} records", a.len())))
}

/// Runs every check; takes a few seconds.
pub fn self_check() -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    vec![
        outcome("gram identity", gram_identity(&mut rng)),
        outcome("shaping-loss identity", shaping_identity(&mut rng)),
        outcome("exact rate limits", exact_rate_limits()),
        outcome("LQ and modulo loop", lq_and_modulo_loop(&mut rng)),
        outcome("ZF interference", zf_interference(&mut rng)),
        outcome("greedy vs exhaustive", greedy_vs_exhaustive(&mut rng)),
        outcome("unit-modulus phases", unit_modulus_random_phases(&mut rng)),
        outcome("run determinism", run_determinism()),
    ]
}
