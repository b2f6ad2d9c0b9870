mod common;

use std::sync::Arc;

use anosov_core::observable::Observable;
use anosov_core::transfer::*;
use anosov_core::{TorusMap, TrigObservable};
use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[test]
fn transfer_of_constant_on_area_preserving_map() {
    let t = TorusMap::cat_area_preserving(0.3);
    let l = apply_transfer(&t, Arc::new(TrigObservable::constant(1.0)));
    for x in [[0.1, 0.2], [0.7, 0.35], [0.99, 0.01]] {
        assert!((l.value(x).unwrap() - one()).norm() < 1e-12);
    }
}

#[test]
fn linear_cat_permutes_modes() {
    let t = TorusMap::cat();
    let l = apply_transfer(&t, Arc::new(TrigObservable::mode([1, 0])));
    let target = TrigObservable::mode([1, -1]);
    assert_eq!(mode_image([[2, 1], [1, 1]], [1, 0]), [1, -1]);
    for x in [[0.13, 0.8], [0.5, 0.25]] {
        assert!((l.value(x).unwrap() - target.value(x)).norm() < 1e-12);
    }
}

#[test]
fn duality_on_perturbed_map() {
    let t = TorusMap::cat_dissipative(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let h = TrigObservable::random_real(&mut rng, 2, 1.0);
        let u = TrigObservable::random_real(&mut rng, 2, 1.0);
        let (a, b) = duality_sides(&t, &h, &u, 96);
        worst = worst.max((a - b).norm());
    }
    assert!(worst <= 1e-8, "{worst}");
}

#[test]
fn linear_cat_matrix_is_a_partial_permutation() {
    let a = [[2, 1], [1, 1]];
    let op = galerkin(&TorusMap::cat(), 16).unwrap();
    let proto = TrigObservable::zeros(16);
    for j in 0..op.dim() {
        let img = mode_image(a, proto.mode_at(j));
        let mut ones = 0;
        for i in 0..op.dim() {
            let v = op.matrix[[i, j]];
            let expected = if proto.mode_at(i) == img { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-12);
            ones += usize::from(expected == 1.0);
        }
        assert_eq!(ones, usize::from(proto.index(img).is_some()));
    }
    assert!(op.row0_defect() < 1e-10);
}

#[test]
fn linear_cat_spectrum_and_srb() {
    let op = galerkin(&TorusMap::cat(), 16).unwrap();
    let ev = op.eigenvalues().unwrap();
    assert!((ev[0] - one()).norm() < 1e-10);
    assert!(ev[1..].iter().all(|l| l.norm() < 1e-10));
    let h = srb(&op).unwrap();
    let flat = TrigObservable::constant(1.0).resized(16);
    assert!(h.coefs().iter().zip(flat.coefs()).all(|(a, b)| (a - b).norm() < 1e-10));
}

#[test]
fn perturbed_assembly_is_bounded_and_refines() {
    for t in [TorusMap::cat_dissipative(0.3), TorusMap::cat_area_preserving(0.3)] {
        let op8 = galerkin(&t, 8).unwrap();
        let op16 = galerkin(&t, 16).unwrap();
        assert!(op8.row0_defect() < 1e-10 && op16.row0_defect() < 1e-10);
        assert!(op16.max_column_l1() <= 10.0);
        let (a, b) = (op8.eigenvalues().unwrap(), op16.eigenvalues().unwrap());
        for i in 0..5 {
            assert!((a[i] - b[i]).norm() < 1e-4 || (a[i] - b[i].conj()).norm() < 1e-4, "{i}: {} vs {}", a[i], b[i]);
        }
        assert!(a.iter().all(|l| l.norm() <= 1.0 + 1e-6));
    }
}

#[test]
fn perturbed_spectrum_has_simple_peripheral_eigenvalue() {
    let op = galerkin(&TorusMap::cat_dissipative(0.3), 8).unwrap();
    let sp = spectrum(&op, 6).unwrap();
    assert!((sp.eigenvalues[0] - one()).norm() < 1e-8);
    assert!(sp.simple[0]);
    assert!(sp.eigenvalues[1..].iter().all(|l| l.norm() < 1.0 - 1e-3));
    assert!(sp.residuals.iter().all(|r| *r < 1e-8), "{:?}", sp.residuals);
    // conjugate pairs
    for l in &sp.eigenvalues {
        if l.norm() > 1e-8 {
            assert!(sp.eigenvalues.iter().any(|m| (m - l.conj()).norm() < 1e-8));
        }
    }
    assert!(sp.essential_radius < 1.0);
}

#[test]
fn srb_of_area_preserving_map_is_lebesgue() {
    let op = galerkin(&TorusMap::cat_area_preserving(0.3), 8).unwrap();
    let h = srb(&op).unwrap();
    let z = op.zero_index();
    for (i, c) in h.coefs().iter().enumerate() {
        let expected = if i == z { 1.0 } else { 0.0 };
        assert!((c - Complex64::new(expected, 0.0)).norm() < 1e-10);
    }
}

#[test]
fn srb_of_dissipative_map_matches_birkhoff_averages() {
    let t = TorusMap::cat_dissipative(0.3);
    let op = galerkin(&t, 16).unwrap();
    let h = srb(&op).unwrap();
    assert!((h.integral() - one()).norm() < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(min_positive_pairing(&h, &mut rng, 100, 64) >= -1e-6);

    let f = TrigObservable::cos_mode([1, -1]);
    let exact = h.pair(&f).re;
    let avgs: Vec<f64> = (0..10_000).map(|_| birkhoff(&t, &f, [rng.gen(), rng.gen()], 1000)).collect();
    let mean = avgs.iter().sum::<f64>() / avgs.len() as f64;
    let var = avgs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (avgs.len() - 1) as f64;
    let se = (var / avgs.len() as f64).sqrt();
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
    assert!(exact.abs() > 10.0 * se, "observable should see the density");
}

#[test]
fn linear_cat_correlations_vanish() {
    let f = TrigObservable::cos_mode([1, 1]);
    let c = correlation(&TorusMap::cat(), &f, &f, 30, 16).unwrap();
    assert!((c[0] - f.pair(&f)).norm() < 1e-15);
    assert!(c[1..].iter().all(|v| v.norm() == 0.0));
}

#[test]
fn correlations_decay_at_the_first_resonance() {
    let t = TorusMap::cat_area_preserving(0.3);
    let op = galerkin(&t, 16).unwrap();
    let ev = op.eigenvalues().unwrap();
    let f = TrigObservable::cos_mode([1, 0]).add(&TrigObservable::cos_mode([0, 1]));
    let g = f.add_constant(0.5);
    let c = correlation_with(&op, &f, &g, 25);
    let a = resonance_fit(&c, &ev[..6], &jordan_orders(&ev[..6], 1e-8), 5..=25).unwrap();
    let resid: Vec<f64> = c.iter().enumerate().map(|(n, v)| (v - a[0] * ev[0].powu(n as u32)).norm()).collect();
    let pts: Vec<(f64, f64)> = (5..=25).filter(|n| resid[*n] > 1e-13).map(|n| (n as f64, resid[n].ln())).collect();
    assert!(pts.len() >= 5, "{resid:?}");
    let slope = anosov_core::fit::linear_fit(&pts).0;
    assert!((slope - ev[1].norm().ln()).abs() <= 0.1, "{slope} vs {}", ev[1].norm().ln());
}

#[test]
fn integral_is_preserved() {
    let op = galerkin(&TorusMap::cat_dissipative(0.3), 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut h = TrigObservable::random_real(&mut rng, 4, 1.0);
    let i0 = h.integral();
    for _ in 0..30 {
        h = op.apply(&h);
        assert!((h.integral() - i0).norm() < 1e-9);
    }
}

#[test]
fn jordan_detection_defaults_to_semisimple() {
    let l = [one(), Complex64::new(0.3, 0.0), Complex64::new(0.3 + 1e-10, 0.0)];
    assert_eq!(jordan_orders(&l, 1e-8), vec![0, 1, 1]);
}
