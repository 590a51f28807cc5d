use crate::error::{Error, Result};

/// Minimum sample count accepted by [`uniformity_test`].
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityResult {
    /// Kolmogorov-Smirnov distance to the uniform CDF on `[-1/2, 1/2)`.
    pub statistic: f64,
    pub critical_value: f64,
    pub passed: bool,
}

/// Asymptotic KS critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// One-sample KS test of `samples` against the uniform law on `[-1/2, 1/2)`.
pub fn uniformity_test(samples: &[f64], alpha: f64) -> Result<UniformityResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(x) = samples.iter().find(|x| !(-0.5..0.5).contains(*x)) {
        return Err(Error::Precondition(format!("sample {x} outside [-0.5, 0.5)")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = x + 0.5;
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let critical_value = ks_critical_value(s.len(), alpha);
    Ok(UniformityResult {
        statistic: d,
        critical_value,
        passed: d < critical_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_samples_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let s: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() - 0.5).collect();
        assert!(uniformity_test(&s, 0.01).unwrap().passed);
    }

    #[test]
    fn narrow_wrapped_gaussian_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s: Vec<f64> = (0..100_000)
            .map(|_| {
                let g: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.05;
                (g + 0.5).rem_euclid(1.0) - 0.5
            })
            .collect();
        assert!(!uniformity_test(&s, 0.01).unwrap().passed);
    }

    #[test]
    fn critical_value_reference() {
        // 1.628 / sqrt(n) is the tabulated asymptotic value at alpha = 0.01
        assert!((ks_critical_value(10_000, 0.01) - 0.016_276).abs() < 1e-5);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(uniformity_test(&[0.0; 10], 0.01), Err(Error::Precondition(_))));
        let mut s = vec![0.0; 2000];
        s[5] = 0.5;
        assert!(matches!(uniformity_test(&s, 0.01), Err(Error::Precondition(_))));
        assert!(matches!(uniformity_test(&vec![0.0; 2000], 0.0), Err(Error::Domain(_))));
    }
}
