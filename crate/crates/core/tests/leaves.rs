use anosov_core::geom;
use anosov_core::leaves::*;
use anosov_core::TorusMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nu_cat() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

#[test]
fn linear_transform_keeps_stable_axis() {
    let t = TorusMap::cat();
    let g = LeafGeometry::default_for(&t).unwrap();
    let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
    let out = graph_transform(&t, &g, &w).unwrap();
    assert_eq!(out.len(), 3);
    for o in &out {
        let c0 = o.xi(o.center);
        for i in 0..=20 {
            let x = o.chi.a + (o.chi.b - o.chi.a) * i as f64 / 20.0;
            assert!((o.xi(x) - c0).abs() < 1e-12);
        }
    }
    let e = base_expansion(&t, &g, &w, 1).unwrap();
    assert!((e - 1.0 / nu_cat()).abs() < 1e-6, "{e}");
}

#[test]
fn random_graphs_contract() {
    let t = TorusMap::cat_area_preserving(0.3);
    let g = LeafGeometry::default_for(&t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let w = AdmissibleGraph::random(&mut rng, &g);
        assert!(w.is_admissible(&g));
        for o in graph_transform(&t, &g, &w).unwrap() {
            assert!(o.slope_sup <= g.cone(), "slope {}", o.slope_sup);
            worst = worst.max(o.crp1);
        }
    }
    println!("K' = {worst}");
    assert!(worst < g.k_bound);
}

#[test]
fn cover_counts_follow_expansion() {
    let t = TorusMap::cat();
    let g = LeafGeometry::default_for(&t).unwrap();
    let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
    let counts: Vec<usize> = (1..=4).map(|n| leaf_cover(&t, &g, &w, n, 1.0).unwrap().leaves.len()).collect();
    assert_eq!(counts, vec![3, 7, 18, 47]);
}

#[test]
fn partition_of_unity_on_perturbed_map() {
    let t = TorusMap::cat_dissipative(0.3);
    let g = LeafGeometry::default_for(&t).unwrap();
    let w = AdmissibleGraph::flat(1, 0.01, 0.02, &g);
    for n in 1..=4 {
        let c = leaf_cover(&t, &g, &w, n, 1.0).unwrap();
        assert!(c.supports_inside());
        assert!(c.overlap <= g.c_overlap);
        for (eta, x) in c.sample_preimages(&t, &g, 200).unwrap() {
            assert!((c.partition_sum(eta) - 1.0).abs() < 1e-8);
            let graphs: Vec<_> = c.leaves.iter().map(|l| l.graph.clone()).collect();
            let d = distance_to_leaves(&g, &graphs, geom::wrap(x));
            assert!(d < 1e-8, "n={n} d={d}");
        }
    }
}

#[test]
fn decomposition_linear_eigenfields() {
    let t = TorusMap::cat();
    let g = LeafGeometry::default_for(&t).unwrap();
    let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
    let (_, _, eu, es) = t.linear_eigen().unwrap();
    let d = decompose_vector_field(&t, &g, 2, &w, |_| eu, 1e-3, 1.5).unwrap();
    for ws in &d.w_s {
        assert!(geom::norm(*ws) < 1e-12);
    }
    let d = decompose_vector_field(&t, &g, 2, &w, |_| es, 1e-3, 1.5).unwrap();
    for wu in &d.w_u {
        assert!(geom::norm(*wu) < 1e-12);
    }
}

#[test]
fn decomposition_perturbed_rates() {
    let t = TorusMap::cat_area_preserving(0.3);
    let g = LeafGeometry::default_for(&t).unwrap();
    let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
    let v = |x: [f64; 2]| {
        let s = (2.0 * std::f64::consts::PI * x[0]).sin();
        [0.3 + 0.1 * s, 0.5 - 0.1 * s]
    };
    for n in 1..=5 {
        let cover = leaf_cover(&t, &g, &w, n, 1.0).unwrap();
        let wj = &cover.leaves[cover.leaves.len() / 2].graph;
        let d = decompose_vector_field(&t, &g, n, wj, v, 1e-4, 1.5).unwrap();
        println!("n={n} pull={} norm={} ws={}", d.wu_pull_sup, d.wu_pull_norm, d.ws_cr);
        assert!(d.reconstruction_error < 1e-10);
        assert!(d.normal_component < 1e-10);
    }
}

fn pullback_rate(t: &TorusMap, v: impl Fn([f64; 2]) -> [f64; 2] + Copy) -> f64 {
    let g = LeafGeometry::default_for(t).unwrap();
    let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
    let pts: Vec<(f64, f64)> = (1..=5)
        .map(|n| {
            let cover = leaf_cover(t, &g, &w, n, 1.0).unwrap();
            let wj = &cover.leaves[cover.leaves.len() / 2].graph;
            let d = decompose_vector_field(t, &g, n, wj, v, 1e-4, 1.5).unwrap();
            assert!(d.reconstruction_error < 1e-10);
            (n as f64, d.wu_pull_sup.ln())
        })
        .collect();
    anosov_core::fit::linear_fit(&pts).0
}

fn tilted(x: [f64; 2]) -> [f64; 2] {
    let s = (2.0 * std::f64::consts::PI * x[0]).sin();
    [0.3 + 0.1 * s, 0.5 - 0.1 * s]
}

#[test]
fn pullback_decays_at_expansion_rate() {
    let lam = 1.0 / nu_cat();
    let rate = pullback_rate(&TorusMap::cat(), tilted);
    assert!((rate + lam.ln()).abs() < 0.1, "{rate} vs {}", -lam.ln());
    let t = TorusMap::cat_area_preserving(0.3);
    let lam_min = anosov_core::maps::hyperbolicity_constants(&t, 32).unwrap().lambda;
    let rate = pullback_rate(&t, tilted);
    assert!(rate <= -lam_min.ln() + 0.1, "{rate} vs {}", -lam_min.ln());
}

fn tent(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

fn step(x: f64) -> f64 {
    if x.abs() < 0.5 {
        1.0
    } else {
        0.0
    }
}

const EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[test]
fn mollified_plateau_is_unchanged() {
    let phi = |x: f64| if x.abs() <= 0.8 { 2.5 } else { 0.0 };
    for eps in EPS {
        let m = mollify(phi, eps).with_breaks(vec![-0.8, 0.8]);
        for i in 0..=20 {
            let x = -0.8 + eps + (1.6 - 2.0 * eps) * i as f64 / 20.0;
            assert!((m.value(x) - 2.5).abs() < 1e-12, "ε={eps} x={x}: {}", m.value(x));
        }
    }
}

#[test]
fn mollifier_inequalities() {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    let mut grow = Vec::new();
    for eps in EPS {
        // |A_ε φ - φ|_{C⁰} ≤ C ε |φ|_{C¹} on the tent, whose C¹ norm is 2
        let m = mollify(tent, eps).with_breaks(vec![-1.0, 0.0, 1.0]);
        let err = (0..=4000).map(|i| -1.2 + 2.4 * i as f64 / 4000.0).chain([0.0]).map(|x| (m.value(x) - tent(x)).abs()).fold(0.0, f64::max);
        c0.push(err / (eps * 2.0));
        // |A_ε φ|_{C⁰} ≤ |φ|_{C⁰}
        let s = mollify(step, eps).with_breaks(vec![-0.5, 0.5]);
        let (sup, dsup) = s.sups(-0.6, -0.4, 400);
        assert!(sup <= 1.0 + 1e-12);
        c1.push(dsup * eps);
        grow.push(dsup);
    }
    for c in [&c0, &c1] {
        let (lo, hi) = c.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(hi / lo < 1.05, "{c:?}");
    }
    let inv: Vec<f64> = EPS.iter().map(|e| 1.0 / e).collect();
    let exponent = anosov_core::fit::loglog_slope(&inv, &grow);
    assert!((exponent - 1.0).abs() <= 0.1, "{exponent}");
}
