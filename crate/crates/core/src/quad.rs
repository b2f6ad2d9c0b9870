//! Gauss–Legendre rules and Chebyshev series on intervals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite rule: `panels` equal panels on [a, b], `order` points each.
#[derive(Clone, Debug)]
pub struct Composite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Composite {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Composite { nodes, weights }
    }
}

/// Chebyshev series `Σ c_j T_j(s)` with `s` the affine image of [a, b] in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cheb {
    pub a: f64,
    pub b: f64,
    pub coefs: Vec<f64>,
}

impl Cheb {
    /// Interpolant of `f` at the `deg+1` Chebyshev points of the first kind.
    pub fn fit(a: f64, b: f64, deg: usize, f: impl Fn(f64) -> f64) -> Self {
        let vals: Vec<f64> = Self::nodes(a, b, deg).into_iter().map(f).collect();
        Self::from_values(a, b, &vals)
    }

    /// Chebyshev points of the first kind used by [`Cheb::fit`].
    pub fn nodes(a: f64, b: f64, deg: usize) -> Vec<f64> {
        let m = deg + 1;
        (0..m)
            .map(|k| {
                let s = (PI * (k as f64 + 0.5) / m as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * s
            })
            .collect()
    }

    /// Interpolant from values at [`Cheb::nodes`].
    pub fn from_values(a: f64, b: f64, vals: &[f64]) -> Self {
        let m = vals.len();
        let coefs = (0..m)
            .map(|j| {
                let sum: f64 = vals
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (PI * j as f64 * (k as f64 + 0.5) / m as f64).cos())
                    .sum();
                if j == 0 {
                    sum / m as f64
                } else {
                    2.0 * sum / m as f64
                }
            })
            .collect();
        Cheb { a, b, coefs }
    }

    pub fn zero(a: f64, b: f64) -> Self {
        Cheb { a, b, coefs: vec![0.0] }
    }

    /// `c0 + c1·(η − mid)` exactly.
    pub fn affine(a: f64, b: f64, value_at_mid: f64, slope: f64) -> Self {
        Cheb { a, b, coefs: vec![value_at_mid, slope * 0.5 * (b - a)] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coefs.iter().skip(1).rev() {
            let b0 = c + 2.0 * s * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coefs[0] + s * b1 - b2
    }

    pub fn derivative(&self) -> Cheb {
        let n = self.coefs.len();
        if n <= 1 {
            return Cheb::zero(self.a, self.b);
        }
        let mut d = vec![0.0; n];
        for j in (0..n - 1).rev() {
            let next = if j + 2 < n { d[j + 2] } else { 0.0 };
            d[j] = next + 2.0 * (j + 1) as f64 * self.coefs[j + 1];
        }
        d[0] *= 0.5;
        d.truncate(n - 1);
        let scale = 2.0 / (self.b - self.a);
        Cheb { a: self.a, b: self.b, coefs: d.into_iter().map(|c| c * scale).collect() }
    }

    pub fn nth_derivative(&self, k: usize) -> Cheb {
        (0..k).fold(self.clone(), |c, _| c.derivative())
    }

    /// C^s norm from derivative sups on a uniform grid plus a Hölder quotient.
    pub fn cq_norm(&self, s: f64, m: usize) -> f64 {
        let top = s.floor() as usize;
        let ders: Vec<Cheb> = (0..=top).map(|j| self.nth_derivative(j)).collect();
        crate::smooth::cq_norm_interval(|x, j| ders[j].eval(x), self.a, self.b, s, m)
    }

    /// Max of `|f|` over a dense uniform sample including the endpoints.
    pub fn sup_abs(&self, m: usize) -> f64 {
        (0..=m)
            .map(|i| self.eval(self.a + (self.b - self.a) * i as f64 / m as f64).abs())
            .fold(0.0, f64::max)
    }
}
