use nalgebra::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_thp::channel::ChannelRealization;
use ris_thp::gram::{decompose, effective_channel, extend_theta};
use ris_thp::linalg::{identity, max_abs};
use ris_thp::phase_opt::{heuristic_phases, PhaseConfig, QuadraticObjective};
use ris_thp::scalar::{CMat, CVec};
use ris_thp::thp::{lq_decompose, modulo, modulo_real};

fn cmat(r: usize, c: usize) -> impl Strategy<Value = CMat<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * c)
        .prop_map(move |v| CMat::from_iterator(r, c, v.into_iter().map(|(a, b)| Complex::new(a, b))))
}

fn realization(k: usize, nb: usize, nr: usize) -> impl Strategy<Value = ChannelRealization<f64>> {
    (cmat(k, nb), cmat(k, nr), cmat(nb, 1)).prop_filter_map("zero BS vector", |(hd, hc, b)| {
        let b: CVec<f64> = b.column(0).into_owned();
        let n = b.norm();
        (n > 1e-3).then(|| ChannelRealization::from_parts(hd, hc, b / Complex::new(n, 0.0)).unwrap())
    })
}

proptest! {
    #[test]
    fn modulo_lands_in_half_open_box(re in -1e6f64..1e6, im in -1e6f64..1e6) {
        let m = modulo(Complex::new(re, im));
        prop_assert!((-0.5..0.5).contains(&m.re));
        prop_assert!((-0.5..0.5).contains(&m.im));
        // differs from the input by a Gaussian integer
        let d = re - m.re;
        prop_assert!((d - d.round()).abs() < 1e-6);
        prop_assert_eq!(modulo_real(m.re), m.re);
    }

    #[test]
    fn lq_reconstructs(h in cmat(3, 5)) {
        let (l, q) = lq_decompose(&h).unwrap();
        prop_assert!(max_abs(&(&l * &q - &h)) < 1e-12);
        prop_assert!(max_abs(&(&q * q.adjoint() - identity::<f64>(3))) < 1e-12);
        for i in 0..3 {
            prop_assert!(l[(i, i)].im == 0.0 && l[(i, i)].re > 0.0);
            for j in i + 1..3 {
                prop_assert_eq!(l[(i, j)], Complex::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn gram_matches_effective_channel(r in realization(3, 4, 6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let th = PhaseConfig::<f64>::random(6, &mut rng);
        let g = decompose(&r, &[0, 1, 2]).unwrap();
        let h = effective_channel(&r, &[0, 1, 2], &th.theta).unwrap();
        prop_assert!(max_abs(&(g.gram(&extend_theta(&th.theta)) - &h * h.adjoint())) < 1e-12);
    }

    #[test]
    fn optimized_phases_have_unit_modulus(r in realization(2, 4, 5), p in 1.0f64..1e4) {
        let g = decompose(&r, &[0, 1]).unwrap();
        let init = heuristic_phases(&g, p).unwrap();
        let obj = QuadraticObjective::regularized(&g, p).unwrap();
        let refined = obj.refine(&init, 50).unwrap();
        for z in refined.theta.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(obj.value_of(&refined) >= obj.value_of(&init) * (1.0 - 1e-12));
        let bin = obj.refine(&refined.to_binary(), 50).unwrap();
        prop_assert!(bin.validate().is_ok());
    }
}
