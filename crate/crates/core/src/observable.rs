//! Pointwise-evaluable functions on the torus.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;
use crate::geom::{self, Vec2};
use crate::maps::TorusMap;
use crate::trig::TrigObservable;

/// A function on T² that can be sampled, with directional derivatives.
pub trait Observable: Send + Sync {
    fn value(&self, x: Vec2) -> Result<Complex64>;

    /// Smallest length scale of variation; sets difference steps and quadrature resolution.
    fn feature_scale(&self) -> f64;

    /// Derivative along each unit direction in `dirs`, in sequence.
    fn directional(&self, x: Vec2, dirs: &[Vec2]) -> Result<Complex64> {
        fd_directional(self, x, dirs, 2e-3 * self.feature_scale())
    }
}

/// Fourth-order central differences, nested once per direction.
pub fn fd_directional<O: Observable + ?Sized>(o: &O, x: Vec2, dirs: &[Vec2], h: f64) -> Result<Complex64> {
    match dirs.split_last() {
        None => o.value(x),
        Some((d, rest)) => {
            let at = |s: f64| fd_directional(o, geom::add(x, geom::scale(s * h, *d)), rest, h);
            let v = -at(2.0)? + at(1.0)? * 8.0 - at(-1.0)? * 8.0 + at(-2.0)?;
            Ok(v / (12.0 * h))
        }
    }
}

pub type Obs = Arc<dyn Observable>;

impl Observable for TrigObservable {
    fn value(&self, x: Vec2) -> Result<Complex64> {
        Ok(TrigObservable::value(self, x))
    }

    fn feature_scale(&self) -> f64 {
        1.0 / (2.0 * PI * self.max_frequency().max(1.0))
    }

    fn directional(&self, x: Vec2, dirs: &[Vec2]) -> Result<Complex64> {
        Ok(TrigObservable::directional(self, x, dirs))
    }
}

/// `Lⁿh(x) = h(T⁻ⁿx) / Π|det DT|` along the inverse orbit.
pub struct Transferred {
    pub map: TorusMap,
    pub inner: Obs,
    pub n: usize,
    scale: f64,
}

impl Transferred {
    pub fn new(map: &TorusMap, inner: Obs, n: usize) -> Self {
        let stretch = sup_inverse_stretch(map);
        let scale = inner.feature_scale() / stretch.powi(n as i32);
        Transferred { map: map.clone(), inner, n, scale }
    }
}

/// Largest operator norm of `DT⁻¹` over a grid.
pub fn sup_inverse_stretch(map: &TorusMap) -> f64 {
    let n = 32;
    let mut s: f64 = 1.0;
    for i in 0..n * n {
        let x = [(i / n) as f64 / n as f64, (i % n) as f64 / n as f64];
        let m = geom::inv(&map.differential(x));
        // operator 2-norm of a 2×2 matrix
        let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
        let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
        let c = m[0][1] * m[0][1] + m[1][1] * m[1][1];
        let top = 0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt();
        s = s.max(top.sqrt());
    }
    s
}

impl Observable for Transferred {
    fn value(&self, x: Vec2) -> Result<Complex64> {
        let (y, jac) = self.map.inverse_orbit(x, self.n)?;
        Ok(self.inner.value(y)? / jac)
    }

    fn feature_scale(&self) -> f64 {
        self.scale
    }
}

/// `Σ c_i h_i`.
pub struct Combination {
    pub terms: Vec<(Complex64, Obs)>,
}

impl Combination {
    pub fn difference(a: Obs, b: Obs) -> Self {
        Combination { terms: vec![(Complex64::new(1.0, 0.0), a), (Complex64::new(-1.0, 0.0), b)] }
    }

    pub fn scaled(c: Complex64, a: Obs) -> Self {
        Combination { terms: vec![(c, a)] }
    }
}

impl Observable for Combination {
    fn value(&self, x: Vec2) -> Result<Complex64> {
        let mut s = Complex64::default();
        for (c, h) in &self.terms {
            s += c * h.value(x)?;
        }
        Ok(s)
    }

    fn feature_scale(&self) -> f64 {
        self.terms.iter().map(|(_, h)| h.feature_scale()).fold(f64::INFINITY, f64::min)
    }

    fn directional(&self, x: Vec2, dirs: &[Vec2]) -> Result<Complex64> {
        let mut s = Complex64::default();
        for (c, h) in &self.terms {
            s += c * h.directional(x, dirs)?;
        }
        Ok(s)
    }
}

/// Closure-backed observable.
pub struct FnObservable<F> {
    pub f: F,
    pub scale: f64,
}

impl<F> Observable for FnObservable<F>
where
    F: Fn(Vec2) -> Complex64 + Send + Sync,
{
    fn value(&self, x: Vec2) -> Result<Complex64> {
        Ok((self.f)(x))
    }

    fn feature_scale(&self) -> f64 {
        self.scale
    }
}
