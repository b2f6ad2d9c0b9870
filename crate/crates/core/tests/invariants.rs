mod common;

use anosov_core::maps::map_distance;
use anosov_core::perturb::{KernelMember, RandomKernel};
use anosov_core::stats::clt_variance_map;
use anosov_core::transfer::galerkin;
use anosov_core::{TorusMap, TrigObservable};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn obs(seed: u64, n: usize) -> TrigObservable {
    TrigObservable::random_real(&mut ChaCha8Rng::seed_from_u64(seed), n, 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn inverse_undoes_map(t in -0.3f64..0.3, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let m = TorusMap::cat_dissipative(t);
        let back = m.invert(m.eval([x, y])).unwrap();
        for i in 0..2 {
            let d = (back[i] - [x, y][i]).rem_euclid(1.0);
            prop_assert!(d.min(1.0 - d) < 1e-12);
        }
    }

    #[test]
    fn grid_roundtrip(seed in any::<u64>(), n in 1usize..6) {
        let h = obs(seed, n);
        let g = 4 * n + 4;
        let back = TrigObservable::from_grid(&h.grid_values(g), g, n);
        for (a, b) in h.coefs().iter().zip(back.coefs()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn transfer_preserves_mass(t in -0.3f64..0.3) {
        let op = galerkin(&TorusMap::cat_dissipative(t), 5).unwrap();
        prop_assert!(op.row0_defect() < 1e-10, "{}", op.row0_defect());
    }

    #[test]
    fn duality_for_random_pairs(t in -0.3f64..0.3, s1 in any::<u64>(), s2 in any::<u64>()) {
        let m = TorusMap::cat_dissipative(t);
        let (l, r) = common::duality_sides(&m, &obs(s1, 2), &obs(s2, 2), 48);
        prop_assert!((l - r).norm() < 1e-8, "{l} {r}");
    }

    #[test]
    fn distance_is_symmetric(a in -0.3f64..0.3, b in -0.3f64..0.3) {
        let (ma, mb) = (TorusMap::cat_area_preserving(a), TorusMap::cat_area_preserving(b));
        let (d1, d2) = (map_distance(&ma, &mb, 2), map_distance(&mb, &ma, 2));
        prop_assert!((d1 - d2).abs() <= 1e-12 * d1.max(1.0));
        prop_assert_eq!(map_distance(&ma, &ma, 2), 0.0);
        prop_assert!(d1 >= 0.0);
    }

    #[test]
    fn variance_ignores_constants(t in -0.2f64..0.2, seed in any::<u64>(), c in -5.0f64..5.0) {
        let m = TorusMap::cat_dissipative(t);
        let f = obs(seed, 2);
        let a = clt_variance_map(&m, &f, 5).unwrap().sigma2;
        let b = clt_variance_map(&m, &f.add_constant(c), 5).unwrap().sigma2;
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} {b}");
        prop_assert!(a > -1e-9);
    }

    #[test]
    fn variance_scales_quadratically(seed in any::<u64>(), c in 0.1f64..4.0) {
        let m = TorusMap::cat_dissipative(0.1);
        let f = obs(seed, 2);
        let a = clt_variance_map(&m, &f, 5).unwrap().sigma2;
        let b = clt_variance_map(&m, &f.scaled(Complex64::new(c, 0.0)), 5).unwrap().sigma2;
        prop_assert!((b - c * c * a).abs() < 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn kernel_weights_must_sum_to_one(w in 0.05f64..0.95, eps in 1e-6f64..0.1) {
        let one = TrigObservable::constant(1.0);
        let member = |weight: f64| KernelMember { weight, map: TorusMap::cat(), g: one.clone() };
        prop_assert!(RandomKernel::new(vec![member(w), member(1.0 - w)]).is_ok());
        prop_assert!(RandomKernel::new(vec![member(w), member(1.0 - w + eps)]).is_err());
    }

    #[test]
    fn residual_density_balances(a in 0.0f64..0.9, w in 0.2f64..0.8) {
        let g = TrigObservable::constant(1.0).add(&TrigObservable::cos_mode([1, 0]).scaled(Complex64::new(a, 0.0)));
        let k = RandomKernel::with_residual(vec![TorusMap::cat(), TorusMap::cat()], vec![w, 1.0 - w], vec![g.clone()]);
        // the residual density is (1 - w g) / (1 - w); nonnegative iff w (1 + a) ≤ 1
        prop_assert_eq!(k.is_ok(), w * (1.0 + a) <= 1.0 + 1e-12);
        if let Ok(k) = k {
            prop_assert!(k.scaled_densities(0.5).is_ok());
        }
    }
}
