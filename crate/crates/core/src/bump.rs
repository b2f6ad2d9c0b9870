//! Polynomial plateau bumps and the exponential mollifier kernel.

use std::sync::OnceLock;

use crate::quad::gauss_legendre;

/// Order of the smoothstep: derivatives 1..=ORDER vanish at both ends.
pub const SMOOTH_ORDER: usize = 8;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Monomial coefficients of the order-8 smoothstep and its derivatives.
fn smoothstep_tables() -> &'static Vec<Vec<f64>> {
    static T: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    T.get_or_init(|| {
        let n = SMOOTH_ORDER;
        let mut c = vec![0.0; 2 * n + 2];
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            c[n + 1 + k] = sign * binom(n + k, k) * binom(2 * n + 1, n - k);
        }
        let mut tables = vec![c];
        for _ in 0..(2 * n + 1) {
            let prev = tables.last().unwrap();
            let d: Vec<f64> = prev.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a).collect();
            tables.push(d);
        }
        tables
    })
}

/// j-th derivative of the smoothstep `S` on [0, 1] (clamped outside).
pub fn smoothstep(u: f64, j: usize) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if u > 0.5 {
        // S(u) = 1 - S(1-u) keeps the expansion near its small end
        let m = smoothstep(1.0 - u, j);
        return match j {
            0 => 1.0 - m,
            _ if j % 2 == 1 => m,
            _ => -m,
        };
    }
    let t = smoothstep_tables();
    if j >= t.len() {
        return 0.0;
    }
    t[j].iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// Plateau bump on [-1, 1]: 1 on `|s| ≤ plateau`, smoothstep falloff to 0 at `|s| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plateau {
    pub plateau: f64,
}

impl Plateau {
    pub fn new(plateau: f64) -> Self {
        assert!((0.0..1.0).contains(&plateau));
        Plateau { plateau }
    }

    pub fn deriv(&self, s: f64, j: usize) -> f64 {
        let a = s.abs();
        if a >= 1.0 {
            return 0.0;
        }
        if a <= self.plateau {
            return if j == 0 { 1.0 } else { 0.0 };
        }
        let w = 1.0 - self.plateau;
        let u = (1.0 - a) / w;
        let sign = if s > 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
        sign * smoothstep(u, j) / w.powi(j as i32)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.deriv(s, 0)
    }
}

/// Compact bump `exp(-1/(1-u²))` normalized to unit mass on [-1, 1].
pub fn kernel(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    (-1.0 / (1.0 - u * u)).exp() / kernel_mass()
}

pub fn kernel_deriv(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - u * u;
    kernel(u) * (-2.0 * u / (d * d))
}

fn kernel_mass() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| {
        let (x, w) = gauss_legendre(24);
        let panels = 64;
        let h = 2.0 / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let lo = -1.0 + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let u: f64 = lo + 0.5 * h * (xi + 1.0);
                s += 0.5 * h * wi * (-1.0 / (1.0 - u * u)).exp();
            }
        }
        s
    })
}
