#![allow(dead_code)]

use anosov_core::{TorusMap, TrigObservable};
use num_complex::Complex64;

/// Trapezoid sums on a `g×g` grid of `∫ Lh·u` and `∫ h·u∘T`.
pub fn duality_sides(t: &TorusMap, h: &TrigObservable, u: &TrigObservable, g: usize) -> (Complex64, Complex64) {
    let mut lhs = Complex64::default();
    let mut rhs = Complex64::default();
    for i in 0..g {
        for j in 0..g {
            let x = [i as f64 / g as f64, j as f64 / g as f64];
            let y = t.invert(x).unwrap();
            lhs += h.value(y) / t.jacobian_det(y).abs() * u.value(x);
            rhs += h.value(x) * u.value(t.eval(x));
        }
    }
    let w = 1.0 / (g * g) as f64;
    (lhs * w, rhs * w)
}

/// Integer orbit of a mode under the inverse transpose of `a`.
pub fn mode_image(a: [[i64; 2]; 2], k: [i32; 2]) -> [i32; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    // A^{-T} k = (1/det) [[a11, -a10], [-a01, a00]] k
    let k0 = (a[1][1] * k[0] as i64 - a[1][0] * k[1] as i64) / det;
    let k1 = (-a[0][1] * k[0] as i64 + a[0][0] * k[1] as i64) / det;
    [k0 as i32, k1 as i32]
}

/// Birkhoff average of `f` along one forward orbit, after a burn-in.
pub fn birkhoff(t: &TorusMap, f: &TrigObservable, x0: [f64; 2], len: usize) -> f64 {
    let mut x = x0;
    for _ in 0..20 {
        x = t.eval(x);
    }
    let mut acc = 0.0;
    for _ in 0..len {
        acc += f.value(x).re;
        x = t.eval(x);
    }
    acc / len as f64
}
