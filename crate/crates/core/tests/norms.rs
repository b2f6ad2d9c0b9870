use std::sync::Arc;
use std::time::Instant;

use anosov_core::fit::loglog_slope;
use anosov_core::norms::{cq_norm, cq_norm_torus, ly_experiment, norm_pq, seminorm, unstable_leaf_density, NormParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use anosov_core::observable::Obs;
use anosov_core::{TorusMap, TrigObservable};

fn params(p: usize, q: f64, n_leaves: usize) -> NormParams {
    NormParams { p, q, n_leaves, ..NormParams::for_map(&TorusMap::cat()).unwrap() }
}

#[test]
fn constant_pairs_with_widest_plateau() {
    let one = TrigObservable::constant(1.0);
    let est = norm_pq(&one, &params(0, 0.0, 1000)).unwrap();
    let full = 2.0 * 0.05;
    assert!(est.value <= full + 1e-12);
    assert!(est.value > 0.98 * full, "{} vs {}", est.value, full);
}

#[test]
fn estimate_is_monotone_in_budget() {
    let h = TrigObservable::cos_mode([2, -1]);
    let small = norm_pq(&h, &params(1, 0.5, 8)).unwrap();
    let large = norm_pq(&h, &params(1, 0.5, 24)).unwrap();
    assert!(large.value >= small.value);
    assert_eq!(&large.history[..8], &small.history[..]);
    assert!(large.history.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn strong_norm_dominates_weak() {
    let h = TrigObservable::cos_mode([3, 1]);
    let strong = norm_pq(&h, &params(1, 0.5, 16)).unwrap();
    let weak = norm_pq(&h, &params(0, 1.5, 16)).unwrap();
    assert!(weak.value <= strong.value * (1.0 + 1e-12), "{} > {}", weak.value, strong.value);
}

#[test]
fn seminorm_decreases_in_class() {
    let h = TrigObservable::cos_mode([5, 2]);
    let p = params(0, 0.5, 16);
    let lo = seminorm(&h, 0, 0.5, &[1.5], &p).unwrap();
    let hi = seminorm(&h, 0, 1.5, &[], &p).unwrap();
    assert!(hi.value <= lo.value * (1.0 + 1e-12));
}

#[test]
fn scale_covariance() {
    let h = TrigObservable::cos_mode([2, 3]);
    let p = params(1, 0.5, 8);
    let base = norm_pq(&h, &p).unwrap().value;
    for c in [2.0, -3.0, 0.125] {
        let v = norm_pq(&h.scaled(c.into()), &p).unwrap().value;
        assert!((v - c.abs() * base).abs() <= 1e-12 * c.abs() * base, "{c}: {v} vs {}", c.abs() * base);
    }
}

#[test]
fn witness_reproduces_value() {
    let h = TrigObservable::cos_mode([1, 4]);
    let est = norm_pq(&h, &params(0, 0.5, 8)).unwrap();
    let w = est.witness.unwrap();
    assert!((w.value_at(w.test.class) - est.value).abs() < 1e-12 * est.value);
}

#[test]
fn stable_modes_decay_like_negative_power() {
    let t = TorusMap::cat();
    let (_, _, _, es) = t.linear_eigen().unwrap();
    let start = Instant::now();
    let p = params(0, 0.5, 24);
    let mut freq = Vec::new();
    let mut vals = Vec::new();
    for s in [16.0, 32.0, 64.0, 128.0, 256.0] {
        let k = [(s * es[0]).round() as i32, (s * es[1]).round() as i32];
        let h: Obs = Arc::new(TrigObservable::mode(k));
        freq.push(((k[0] * k[0] + k[1] * k[1]) as f64).sqrt());
        vals.push(norm_pq(h.as_ref(), &p).unwrap().value);
    }
    let slope = loglog_slope(&freq, &vals);
    println!("anisotropy values {vals:?} slope {slope} in {:?}", start.elapsed());
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}");
}

#[test]
fn rejects_p_plus_q_at_least_r() {
    let h = TrigObservable::constant(1.0);
    let err = norm_pq(&h, &params(2, 1.0, 4)).unwrap_err();
    assert!(err.to_string().contains("p+q must be < r"));
}

#[test]
fn product_convention_on_mean_zero_trig_polys() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    use rand::Rng;
    for _ in 0..100 {
        let poly = |rng: &mut ChaCha8Rng| {
            let terms: Vec<(f64, f64, f64)> =
                (0..3).map(|_| (rng.gen_range(1..6) as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3))).collect();
            move |x: f64, j: usize| -> f64 {
                terms.iter().map(|(k, a, ph)| a * (std::f64::consts::TAU * k).powi(j as i32) * (std::f64::consts::TAU * k * x + ph + j as f64 * std::f64::consts::FRAC_PI_2).cos()).sum()
            }
        };
        let f = poly(&mut rng);
        let g = poly(&mut rng);
        let q = rng.gen_range(0.0..2.0);
        let fg = |x: f64, j: usize| -> f64 {
            (0..=j).map(|i| (1..=i).fold(1.0, |b, m| b * (j - m + 1) as f64 / m as f64) * f(x, i) * g(x, j - i)).sum()
        };
        let lhs = cq_norm(fg, 0.0, 1.0, q);
        let rhs = cq_norm(&f, 0.0, 1.0, q) * cq_norm(&g, 0.0, 1.0, q);
        assert!(lhs <= rhs * (1.0 + 1e-9), "q={q}: {lhs} > {rhs}");
    }
}

#[test]
fn bounded_by_smooth_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = params(1, 0.5, 6);
    let ratios: Vec<f64> = (0..50)
        .map(|i| {
            let h = TrigObservable::random_real(&mut rng, 1 + i % 4, 1.0);
            norm_pq(&h, &p).unwrap().value / cq_norm_torus(&h, 3.0, 48)
        })
        .collect();
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    println!("smooth-norm constant {c}");
    assert!(c < 2.0 * 0.05 * 1.01, "{c}");
}

#[test]
fn lasota_yorke_on_cat() {
    let t = TorusMap::cat();
    let h: Obs = Arc::new(TrigObservable::mode([1, 0]));
    let start = Instant::now();
    let base = params(0, 0.5, 24);
    let eq1 = ly_experiment(&t, h.clone(), &base, 6).unwrap();
    let r0 = eq1.rows[0].strong;
    let ratios: Vec<f64> = eq1.rows.iter().map(|r| r.strong / r0).collect();
    let sup = ratios.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = ratios.iter().enumerate().map(|(n, r)| (n as f64, *r)).collect();
    let slope = anosov_core::fit::linear_fit(&pts).0;
    let eq2 = ly_experiment(&t, h, &params(1, 0.5, 24), 6).unwrap();
    let lam = 0.5 * (3.0 + 5f64.sqrt());
    let bound = lam.recip().max(lam.recip().powf(0.5));
    println!("eq1 {ratios:?} slope {slope}; eq2 rho {} rate {} A {} B {} in {:?}", eq2.rho_fit, eq2.residual_rate, eq2.a_fit, eq2.b_fit, start.elapsed());
    assert!(sup <= 3.0 && slope <= 0.01);
    assert!(eq2.residual_rate <= bound + 0.1, "{}", eq2.residual_rate);
}

#[test]
fn invariant_constant_on_area_preserving_map() {
    let t = TorusMap::cat_area_preserving(0.3);
    let one: Obs = Arc::new(TrigObservable::constant(1.0));
    let table = ly_experiment(&t, one, &NormParams { n_leaves: 8, ..NormParams::for_map(&t).unwrap() }, 3).unwrap();
    for r in &table.rows {
        assert!((r.strong - table.rows[0].strong).abs() < 1e-10, "{:?}", table.rows);
    }
}

#[test]
fn unstable_leaf_densities() {
    let t = TorusMap::cat();
    let p = NormParams::for_map(&t).unwrap();
    let bump = |xi: f64| if xi.abs() < 0.15 { (-1.0 / (1.0 - (xi / 0.15).powi(2))).exp() } else { 0.0 };
    let make = |eps: f64| {
        unstable_leaf_density([0.3, 0.6], p.stable, |xi: f64| 0.05 * xi * xi, |xi: f64| 0.1 * xi, bump, 0.2, eps, p.cone).unwrap()
    };
    let mass: f64 = {
        let d = make(1.0);
        d.limit_pair(|_| 1.0)
    };
    let h = make(1e-3);
    assert!((h.pair(|_| 1.0) - mass).abs() < 1e-6);
    let phi = |x: [f64; 2]| (std::f64::consts::TAU * x[0]).cos() + (std::f64::consts::TAU * x[1]).sin();
    assert!((h.pair(phi) - h.limit_pair(phi)).abs() < 1e-3);

    let eps: Vec<f64> = (4..=10).map(|j| 2f64.powi(-j)).collect();
    let sups: Vec<f64> = eps.iter().map(|e| make(*e).sup_norm()).collect();
    let inv: Vec<f64> = eps.iter().map(|e| e.recip()).collect();
    let c0 = loglog_slope(&inv, &sups);
    assert!((c0 - 1.0).abs() <= 0.1, "{c0}");

    let np = NormParams { p: 0, q: 0.5, n_leaves: 12, ..p.clone() };
    let start = Instant::now();
    let hints = make(1e-3).hints();
    let norms: Vec<f64> = eps.iter().map(|e| anosov_core::norms::norm_pq_hinted(&make(*e), &np, &hints).unwrap().value).collect();
    let diffs: Vec<f64> = eps
        .windows(2)
        .map(|w| {
            let d = anosov_core::observable::Combination::difference(Arc::new(make(w[0])), Arc::new(make(w[1])));
            anosov_core::norms::norm_pq_hinted(&d, &np, &hints).unwrap().value
        })
        .collect();
    println!("norms {norms:?} diffs {diffs:?} in {:?}", start.elapsed());
    assert!(norms.iter().cloned().fold(0.0, f64::max) < 10.0 * norms[0]);
    assert!(diffs.windows(2).all(|w| w[1] <= w[0]), "{diffs:?}");
}

#[test]
fn transversality_is_checked() {
    let p = NormParams::default();
    let err = unstable_leaf_density([0.0, 0.0], p.stable, |xi: f64| 5.0 * xi, |_| 5.0, |_| 1.0, 0.1, 1e-2, p.cone);
    assert!(matches!(err, Err(anosov_core::Error::NotTransverse(_))));
}
