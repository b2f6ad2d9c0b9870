//! Trigonometric polynomials: real ones for map perturbations, complex
//! coefficient tables for observables.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

const TAU: f64 = 2.0 * PI;

/// One term `coef_cos·cos(2π k·x) + coef_sin·sin(2π k·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub mode: [i32; 2],
    pub coef_cos: f64,
    pub coef_sin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealTrig(pub Vec<TrigTerm>);

impl RealTrig {
    pub fn zero() -> Self {
        RealTrig(Vec::new())
    }

    pub fn cos(mode: [i32; 2], coef: f64) -> Self {
        RealTrig(vec![TrigTerm { mode, coef_cos: coef, coef_sin: 0.0 }])
    }

    pub fn sin(mode: [i32; 2], coef: f64) -> Self {
        RealTrig(vec![TrigTerm { mode, coef_cos: 0.0, coef_sin: coef }])
    }

    pub fn max_mode(&self) -> i32 {
        self.0.iter().map(|t| t.mode[0].abs().max(t.mode[1].abs())).max().unwrap_or(0)
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.partial(x, [0, 0])
    }

    /// Exact partial derivative ∂₁^a ∂₂^b.
    pub fn partial(&self, x: [f64; 2], order: [u32; 2]) -> f64 {
        let shift = (order[0] + order[1]) as f64 * FRAC_PI_2;
        self.0
            .iter()
            .map(|t| {
                let k = [t.mode[0] as f64, t.mode[1] as f64];
                let fac = (TAU * k[0]).powi(order[0] as i32) * (TAU * k[1]).powi(order[1] as i32);
                if fac == 0.0 && order != [0, 0] {
                    return 0.0;
                }
                let th = TAU * (k[0] * x[0] + k[1] * x[1]) + shift;
                fac * (t.coef_cos * th.cos() + t.coef_sin * th.sin())
            })
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        RealTrig(
            self.0
                .iter()
                .map(|t| TrigTerm { mode: t.mode, coef_cos: c * t.coef_cos, coef_sin: c * t.coef_sin })
                .collect(),
        )
    }

    pub fn plus(&self, other: &RealTrig) -> Self {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        RealTrig(v)
    }
}

/// A vector field `(g₁, g₂)` of real trigonometric polynomials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigField(pub [RealTrig; 2]);

impl TrigField {
    pub fn zero() -> Self {
        TrigField([RealTrig::zero(), RealTrig::zero()])
    }

    /// `v · f(w·x)` with `f` a single cos or sin mode scaled by `1/(2π)`.
    pub fn shear(v: [f64; 2], mode: [i32; 2], use_sin: bool) -> Self {
        let c = 1.0 / TAU;
        let term = |a: f64| {
            if use_sin {
                RealTrig::sin(mode, a * c)
            } else {
                RealTrig::cos(mode, a * c)
            }
        };
        TrigField([term(v[0]), term(v[1])])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.0.iter().all(|t| t.coef_cos == 0.0 && t.coef_sin == 0.0))
    }

    pub fn max_mode(&self) -> i32 {
        self.0[0].max_mode().max(self.0[1].max_mode())
    }

    pub fn value(&self, x: [f64; 2]) -> [f64; 2] {
        [self.0[0].value(x), self.0[1].value(x)]
    }

    pub fn jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let d = |c: usize, o: [u32; 2]| self.0[c].partial(x, o);
        [[d(0, [1, 0]), d(0, [0, 1])], [d(1, [1, 0]), d(1, [0, 1])]]
    }

    pub fn partial(&self, x: [f64; 2], order: [u32; 2]) -> [f64; 2] {
        [self.0[0].partial(x, order), self.0[1].partial(x, order)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        TrigField([self.0[0].scaled(c), self.0[1].scaled(c)])
    }

    pub fn plus(&self, other: &TrigField) -> Self {
        TrigField([self.0[0].plus(&other.0[0]), self.0[1].plus(&other.0[1])])
    }
}

/// Finite Fourier series `Σ c_k e^{2πi k·x}` over the box `|k|∞ ≤ n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrigObservable {
    n: usize,
    coefs: Vec<Complex64>,
    /// Indices of nonzero coefficients, filled on first evaluation.
    #[serde(skip)]
    support: OnceLock<Vec<usize>>,
}

impl PartialEq for TrigObservable {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.coefs == other.coefs
    }
}

impl TrigObservable {
    pub fn zeros(n: usize) -> Self {
        let w = 2 * n + 1;
        TrigObservable { n, coefs: vec![Complex64::new(0.0, 0.0); w * w], support: OnceLock::new() }
    }

    pub fn constant(c: f64) -> Self {
        let mut o = Self::zeros(0);
        o.coefs[0] = Complex64::new(c, 0.0);
        o
    }

    /// The character `e_k`.
    pub fn mode(k: [i32; 2]) -> Self {
        let n = k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize;
        let mut o = Self::zeros(n);
        o.set(k, Complex64::new(1.0, 0.0));
        o
    }

    /// `cos(2π k·x)`.
    pub fn cos_mode(k: [i32; 2]) -> Self {
        let n = k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize;
        let mut o = Self::zeros(n);
        *o.get_mut(k) += 0.5;
        *o.get_mut([-k[0], -k[1]]) += 0.5;
        o
    }

    pub fn from_coefs(n: usize, coefs: Vec<Complex64>) -> Self {
        assert_eq!(coefs.len(), (2 * n + 1) * (2 * n + 1));
        TrigObservable { n, coefs, support: OnceLock::new() }
    }

    /// Random real polynomial with coefficients decaying like `decay^{|k|₁}`.
    pub fn random_real<R: Rng>(rng: &mut R, n: usize, decay: f64) -> Self {
        let mut o = Self::zeros(n);
        let n = n as i32;
        for k1 in -n..=n {
            for k2 in -n..=n {
                if (k1, k2) <= (-k1, -k2) && (k1, k2) != (0, 0) {
                    continue;
                }
                let amp = decay.powi(k1.abs() + k2.abs());
                let c = if (k1, k2) == (0, 0) {
                    Complex64::new(amp * rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp * 0.5
                };
                o.set([k1, k2], c);
                o.set([-k1, -k2], c.conj());
            }
        }
        o
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        2 * self.n + 1
    }

    pub fn coefs(&self) -> &[Complex64] {
        &self.coefs
    }

    pub fn index(&self, k: [i32; 2]) -> Option<usize> {
        let n = self.n as i32;
        if k[0].abs() > n || k[1].abs() > n {
            return None;
        }
        Some(((k[0] + n) as usize) * self.width() + (k[1] + n) as usize)
    }

    pub fn mode_at(&self, idx: usize) -> [i32; 2] {
        let w = self.width();
        let n = self.n as i32;
        [(idx / w) as i32 - n, (idx % w) as i32 - n]
    }

    pub fn get(&self, k: [i32; 2]) -> Complex64 {
        self.index(k).map(|i| self.coefs[i]).unwrap_or_default()
    }

    pub fn set(&mut self, k: [i32; 2], c: Complex64) {
        let i = self.index(k).expect("mode outside the box");
        self.support = OnceLock::new();
        self.coefs[i] = c;
    }

    fn get_mut(&mut self, k: [i32; 2]) -> &mut Complex64 {
        let i = self.index(k).expect("mode outside the box");
        self.support = OnceLock::new();
        &mut self.coefs[i]
    }

    pub fn integral(&self) -> Complex64 {
        self.get([0, 0])
    }

    pub fn is_real(&self, tol: f64) -> bool {
        (0..self.coefs.len()).all(|i| {
            let k = self.mode_at(i);
            (self.coefs[i] - self.get([-k[0], -k[1]]).conj()).norm() <= tol
        })
    }

    /// Re-embed in the box of cutoff `n`, dropping modes outside.
    pub fn resized(&self, n: usize) -> Self {
        let mut o = Self::zeros(n);
        for (i, c) in self.coefs.iter().enumerate() {
            let k = self.mode_at(i);
            if let Some(j) = o.index(k) {
                o.coefs[j] = *c;
            }
        }
        o
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        TrigObservable { n: self.n, coefs: self.coefs.iter().map(|z| z * c).collect(), support: OnceLock::new() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.n.max(other.n);
        let mut o = self.resized(n);
        for (i, c) in other.coefs.iter().enumerate() {
            *o.get_mut(other.mode_at(i)) += c;
        }
        o
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut o = self.clone();
        *o.get_mut([0, 0]) += c;
        o
    }

    /// Product, truncated to the box of cutoff `n`.
    pub fn mul(&self, other: &Self, n: usize) -> Self {
        let mut o = Self::zeros(n);
        for (i, a) in self.coefs.iter().enumerate() {
            if *a == Complex64::default() {
                continue;
            }
            let k = self.mode_at(i);
            for (j, b) in other.coefs.iter().enumerate() {
                if *b == Complex64::default() {
                    continue;
                }
                let l = other.mode_at(j);
                if let Some(m) = o.index([k[0] + l[0], k[1] + l[1]]) {
                    o.coefs[m] += a * b;
                }
            }
        }
        o
    }

    /// `∫ u·v` over the torus.
    pub fn pair(&self, other: &Self) -> Complex64 {
        self.coefs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let k = self.mode_at(i);
                a * other.get([-k[0], -k[1]])
            })
            .sum()
    }

    fn nonzero(&self) -> &[usize] {
        self.support.get_or_init(|| {
            self.coefs.iter().enumerate().filter(|(_, c)| **c != Complex64::default()).map(|(i, _)| i).collect()
        })
    }

    pub fn value(&self, x: [f64; 2]) -> Complex64 {
        self.partial(x, [0, 0])
    }

    /// Exact ∂₁^a ∂₂^b.
    pub fn partial(&self, x: [f64; 2], order: [u32; 2]) -> Complex64 {
        let i2pi = Complex64::new(0.0, TAU);
        self.nonzero()
            .iter()
            .map(|&i| {
                let c = &self.coefs[i];
                let k = self.mode_at(i);
                let fac = (i2pi * k[0] as f64).powu(order[0]) * (i2pi * k[1] as f64).powu(order[1]);
                let th = TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                c * fac * Complex64::from_polar(1.0, th)
            })
            .sum()
    }

    /// Exact derivative along the given directions in sequence.
    pub fn directional(&self, x: [f64; 2], dirs: &[[f64; 2]]) -> Complex64 {
        let i2pi = Complex64::new(0.0, TAU);
        self.nonzero()
            .iter()
            .map(|&i| {
                let c = &self.coefs[i];
                let k = self.mode_at(i);
                let kf = [k[0] as f64, k[1] as f64];
                let fac: Complex64 = dirs.iter().map(|d| i2pi * (kf[0] * d[0] + kf[1] * d[1])).product();
                let th = TAU * (kf[0] * x[0] + kf[1] * x[1]);
                c * fac * Complex64::from_polar(1.0, th)
            })
            .sum()
    }

    /// Largest frequency magnitude `max |k|₂` with a nonzero coefficient.
    pub fn max_frequency(&self) -> f64 {
        self.coefs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(i, _)| {
                let k = self.mode_at(i);
                ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Values on the uniform `g×g` grid `x = (i/g, j/g)`, row-major in `i`.
    pub fn grid_values(&self, g: usize) -> Vec<Complex64> {
        assert!(g > 2 * self.n, "grid too coarse for the cutoff");
        let mut buf = vec![Complex64::default(); g * g];
        for (idx, c) in self.coefs.iter().enumerate() {
            let k = self.mode_at(idx);
            let i = k[0].rem_euclid(g as i32) as usize;
            let j = k[1].rem_euclid(g as i32) as usize;
            buf[i * g + j] = *c;
        }
        fft2(&mut buf, g, false);
        buf
    }

    /// Projection of grid samples onto the box of cutoff `n`.
    pub fn from_grid(values: &[Complex64], g: usize, n: usize) -> Self {
        let mut buf = values.to_vec();
        fft2(&mut buf, g, true);
        let scale = 1.0 / (g * g) as f64;
        let mut o = Self::zeros(n);
        for idx in 0..o.coefs.len() {
            let k = o.mode_at(idx);
            let i = k[0].rem_euclid(g as i32) as usize;
            let j = k[1].rem_euclid(g as i32) as usize;
            o.coefs[idx] = buf[i * g + j] * scale;
        }
        o
    }
}

/// In-place 2-D DFT of a row-major `g×g` array. `forward` uses `e^{-2πi}`.
pub fn fft2(buf: &mut [Complex64], g: usize, forward: bool) {
    let mut planner = FftPlanner::new();
    let fft = if forward { planner.plan_fft_forward(g) } else { planner.plan_fft_inverse(g) };
    fft.process(buf);
    let mut col = vec![Complex64::default(); g];
    for j in 0..g {
        for i in 0..g {
            col[i] = buf[i * g + j];
        }
        fft.process(&mut col);
        for i in 0..g {
            buf[i * g + j] = col[i];
        }
    }
}
