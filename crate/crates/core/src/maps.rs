//! Perturbed hyperbolic toral automorphisms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Mat2, Vec2};
use crate::trig::TrigField;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const CONE_MARGIN: f64 = 1e-6;
pub const KAPPA_MAX: f64 = 0.2;

/// `x ↦ A x + t·g(x) mod 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusMap {
    #[serde(rename = "matrix")]
    pub linear: [[i64; 2]; 2],
    pub perturbation: TrigField,
    pub strength: f64,
}

impl TorusMap {
    pub fn new(linear: [[i64; 2]; 2], perturbation: TrigField, strength: f64) -> Result<Self> {
        let d = linear[0][0] * linear[1][1] - linear[0][1] * linear[1][0];
        if d.abs() != 1 {
            return Err(Error::InvalidParams(format!("linear part has determinant {d}, need ±1")));
        }
        Ok(TorusMap { linear, perturbation, strength })
    }

    pub fn linear(linear: [[i64; 2]; 2]) -> Result<Self> {
        Self::new(linear, TrigField::zero(), 0.0)
    }

    pub fn cat() -> Self {
        Self::linear([[2, 1], [1, 1]]).unwrap()
    }

    /// Cat map with the shear `t·(1,1) sin(2πx₁)/2π`; area preserving for every `t`.
    pub fn cat_area_preserving(t: f64) -> Self {
        Self::new([[2, 1], [1, 1]], TrigField::shear([1.0, 1.0], [1, 0], true), t).unwrap()
    }

    /// Cat map with `t·(1,0) sin(2πx₁)/2π`; Jacobian `1 + t cos 2πx₁`.
    pub fn cat_dissipative(t: f64) -> Self {
        Self::new([[2, 1], [1, 1]], TrigField::shear([1.0, 0.0], [1, 0], true), t).unwrap()
    }

    pub fn with_strength(&self, t: f64) -> Self {
        TorusMap { strength: t, ..self.clone() }
    }

    pub fn linear_f64(&self) -> Mat2 {
        let a = self.linear;
        [[a[0][0] as f64, a[0][1] as f64], [a[1][0] as f64, a[1][1] as f64]]
    }

    pub fn linear_inverse(&self) -> Mat2 {
        geom::inv(&self.linear_f64())
    }

    pub fn is_linear(&self) -> bool {
        self.strength == 0.0 || self.perturbation.is_zero()
    }

    /// `A x + t g(x)` without reduction.
    pub fn lift(&self, x: Vec2) -> Vec2 {
        let ax = geom::mat_vec(&self.linear_f64(), x);
        if self.is_linear() {
            return ax;
        }
        let g = self.perturbation.value(x);
        [ax[0] + self.strength * g[0], ax[1] + self.strength * g[1]]
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        geom::wrap(self.lift(x))
    }

    pub fn differential(&self, x: Vec2) -> Mat2 {
        let mut m = self.linear_f64();
        if !self.is_linear() {
            let j = self.perturbation.jacobian(x);
            for (i, row) in m.iter_mut().enumerate() {
                for (k, v) in row.iter_mut().enumerate() {
                    *v += self.strength * j[i][k];
                }
            }
        }
        m
    }

    pub fn jacobian_det(&self, x: Vec2) -> f64 {
        geom::det(&self.differential(x))
    }

    /// Gradient of `det DT` (needs second derivatives of the perturbation).
    pub fn jacobian_det_gradient(&self, x: Vec2) -> Vec2 {
        if self.is_linear() {
            return [0.0, 0.0];
        }
        let d = self.differential(x);
        let t = self.strength;
        let mut grad = [0.0; 2];
        for (l, g) in grad.iter_mut().enumerate() {
            let o = |a: u32, b: u32| -> [u32; 2] { if l == 0 { [a + 1, b] } else { [a, b + 1] } };
            let h = |c: usize, ord: [u32; 2]| t * self.perturbation.0[c].partial(x, ord);
            let d00 = h(0, o(1, 0));
            let d01 = h(0, o(0, 1));
            let d10 = h(1, o(1, 0));
            let d11 = h(1, o(0, 1));
            *g = d00 * d[1][1] + d[0][0] * d11 - d01 * d[1][0] - d[0][1] * d10;
        }
        grad
    }

    /// Partial derivative of order `[a, b]` of component `c` of the lifted map.
    pub fn lift_partial(&self, x: Vec2, c: usize, order: [u32; 2]) -> f64 {
        let lin = match order {
            [0, 0] => {
                let a = self.linear_f64();
                a[c][0] * x[0] + a[c][1] * x[1]
            }
            [1, 0] => self.linear[c][0] as f64,
            [0, 1] => self.linear[c][1] as f64,
            _ => 0.0,
        };
        if self.is_linear() {
            return lin;
        }
        lin + self.strength * self.perturbation.0[c].partial(x, order)
    }

    /// Preimage in [0,1)², Newton seeded with `A⁻¹y`.
    pub fn invert(&self, y: Vec2) -> Result<Vec2> {
        let seed = geom::mat_vec(&self.linear_inverse(), y);
        if self.is_linear() {
            return Ok(geom::wrap(seed));
        }
        let x = self.newton(y, seed, true)?;
        Ok(geom::wrap(x))
    }

    /// Solves `lift(x) = y` in the plane, starting at `seed`.
    pub fn lift_invert(&self, y: Vec2, seed: Vec2) -> Result<Vec2> {
        if self.is_linear() {
            return Ok(geom::mat_vec(&self.linear_inverse(), y));
        }
        self.newton(y, seed, false)
    }

    fn newton(&self, y: Vec2, seed: Vec2, modular: bool) -> Result<Vec2> {
        let mut x = seed;
        let mut res = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let mut r = geom::sub(self.lift(x), y);
            if modular {
                r = geom::wrap_centered(r);
            }
            res = r[0].abs().max(r[1].abs());
            if res < NEWTON_TOL {
                // one more step polishes to rounding level
                let dx = geom::solve(&self.differential(x), r);
                return Ok(geom::sub(x, dx));
            }
            let dx = geom::solve(&self.differential(x), r);
            if !dx[0].is_finite() || !dx[1].is_finite() {
                break;
            }
            x = geom::sub(x, dx);
        }
        Err(Error::NoConvergence { residual: res, point: y })
    }

    /// `T⁻ⁿ y` together with `Π |det DT|` along the inverse orbit.
    pub fn inverse_orbit(&self, y: Vec2, n: usize) -> Result<(Vec2, f64)> {
        let mut x = y;
        let mut jac = 1.0;
        for _ in 0..n {
            x = self.invert(x)?;
            jac *= self.jacobian_det(x).abs();
        }
        Ok((x, jac))
    }

    /// `DT⁻¹` at `y`, i.e. `DT(T⁻¹y)⁻¹`.
    pub fn inverse_differential(&self, y: Vec2) -> Result<Mat2> {
        let x = self.invert(y)?;
        Ok(geom::inv(&self.differential(x)))
    }

    /// Linear eigen-data: (|μ_u|, |μ_s|, e_u, e_s) of the integer matrix.
    pub fn linear_eigen(&self) -> Result<(f64, f64, Vec2, Vec2)> {
        let a = self.linear_f64();
        let tr = a[0][0] + a[1][1];
        let d = geom::det(&a);
        let disc = tr * tr - 4.0 * d;
        if disc <= 0.0 {
            return Err(Error::NotAnosov("linear part has complex or repeated eigenvalues".into()));
        }
        let s = disc.sqrt();
        let (m1, m2) = ((tr + s) / 2.0, (tr - s) / 2.0);
        let (mu, ms) = if m1.abs() > m2.abs() { (m1, m2) } else { (m2, m1) };
        if (mu.abs() - 1.0).abs() < 1e-12 || (ms.abs() - 1.0).abs() < 1e-12 {
            return Err(Error::NotAnosov("linear part has an eigenvalue on the unit circle".into()));
        }
        let ev = |m: f64| -> Vec2 {
            let v = if a[0][1].abs() > 1e-14 {
                [a[0][1], m - a[0][0]]
            } else if a[1][0].abs() > 1e-14 {
                [m - a[1][1], a[1][0]]
            } else if (a[0][0] - m).abs() < 1e-12 {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            };
            geom::normalize(v)
        };
        Ok((mu.abs(), ms.abs(), ev(mu), ev(ms)))
    }

    /// Unit stable eigendirection of the linear part, oriented with non-negative first coordinate.
    pub fn stable_direction(&self) -> Result<Vec2> {
        let (_, _, _, es) = self.linear_eigen()?;
        Ok(if es[0] < 0.0 || (es[0] == 0.0 && es[1] < 0.0) { geom::scale(-1.0, es) } else { es })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub lambda: f64,
    pub nu: f64,
    pub kappa: f64,
    pub valid: bool,
}

impl HyperbolicityReport {
    /// `max(λ^{-p}, ν^q)`.
    pub fn essential_radius(&self, p: usize, q: f64) -> f64 {
        self.lambda.powi(-(p as i32)).max(self.nu.powf(q))
    }
}

fn grid_points(n: usize) -> Vec<Vec2> {
    (0..n * n).map(|i| [(i / n) as f64 / n as f64, (i % n) as f64 / n as f64]).collect()
}

const ORBIT_PUSH: usize = 40;

/// Unstable direction at `x`: push the linear unstable vector forward along a backward orbit.
fn unstable_at(t: &TorusMap, x: Vec2, eu: Vec2) -> Result<Vec2> {
    let mut orbit = vec![x];
    for _ in 0..ORBIT_PUSH {
        let prev = t.invert(*orbit.last().unwrap())?;
        orbit.push(prev);
    }
    let mut v = eu;
    for k in (1..orbit.len()).rev() {
        v = geom::normalize(geom::mat_vec(&t.differential(orbit[k]), v));
    }
    Ok(v)
}

/// Stable direction at `x`: pull the linear stable vector back along a forward orbit.
fn stable_at(t: &TorusMap, x: Vec2, es: Vec2) -> Vec2 {
    let mut orbit = vec![x];
    for _ in 0..ORBIT_PUSH {
        orbit.push(t.eval(*orbit.last().unwrap()));
    }
    let mut v = es;
    for k in (0..ORBIT_PUSH).rev() {
        v = geom::normalize(geom::solve(&t.differential(orbit[k]), v));
    }
    v
}

/// Slope `|b/a|` of `v` in the frame `(e_s, e_s^⊥)`.
fn cone_slope(v: Vec2, es: Vec2) -> f64 {
    let a = geom::dot(v, es);
    let b = geom::dot(v, geom::perp(es));
    (b / a).abs()
}

/// Strict invariance of the constant cone `|b| ≤ κ|a|` under `DT⁻¹`, checked at the given points.
pub fn cone_invariant(t: &TorusMap, points: &[Vec2], kappa: f64) -> Result<bool> {
    let es = t.stable_direction()?;
    let en = geom::perp(es);
    let edges = [geom::add(es, geom::scale(kappa, en)), geom::sub(es, geom::scale(kappa, en)), es];
    let ok: Result<Vec<bool>> = points
        .par_iter()
        .map(|&y| {
            let m = t.inverse_differential(y)?;
            let imgs: Vec<Vec2> = edges.iter().map(|e| geom::mat_vec(&m, *e)).collect();
            let sign = geom::dot(imgs[2], es).signum();
            Ok(imgs.iter().all(|v| geom::dot(*v, es) * sign > 0.0 && cone_slope(*v, es) < kappa - CONE_MARGIN))
        })
        .collect();
    Ok(ok?.into_iter().all(|b| b))
}

/// λ, ν from the invariant splitting on a grid, κ by grid scan plus bisection.
pub fn hyperbolicity_constants(t: &TorusMap, grid_n: usize) -> Result<HyperbolicityReport> {
    if grid_n < 16 {
        return Err(Error::InvalidParams("grid_n must be at least 16".into()));
    }
    let (_, _, eu, es) = t.linear_eigen()?;
    let pts = grid_points(grid_n);
    let rates: Result<Vec<(f64, f64)>> = pts
        .par_iter()
        .map(|&x| {
            let d = t.differential(x);
            let u = unstable_at(t, x, eu)?;
            let s = stable_at(t, x, es);
            Ok((geom::norm(geom::mat_vec(&d, u)), geom::norm(geom::mat_vec(&d, s))))
        })
        .collect();
    let rates = rates?;
    let lambda = rates.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let nu = rates.iter().map(|r| r.1).fold(0.0, f64::max);

    let steps = 20;
    let mut best = 0.0;
    let mut first_fail = None;
    for j in 1..=steps {
        let k = KAPPA_MAX * j as f64 / steps as f64;
        if cone_invariant(t, &pts, k)? {
            best = k;
        } else if best > 0.0 {
            first_fail = Some(k);
            break;
        }
    }
    if let Some(mut hi) = first_fail {
        let mut lo = best;
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if cone_invariant(t, &pts, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = lo;
    }
    let valid = best > 0.0 && lambda > 1.0 && nu < 1.0;
    if !valid {
        return Err(Error::NotAnosov(format!("no invariant cone (λ={lambda:.4}, ν={nu:.4})")));
    }
    Ok(HyperbolicityReport { lambda, nu, kappa: best, valid })
}

/// Sup over a 64² grid of all partial derivatives up to `order` of the lifted difference.
pub fn map_distance(a: &TorusMap, b: &TorusMap, order: u32) -> f64 {
    let pts = grid_points(64);
    let mut orders = Vec::new();
    for s in 0..=order {
        for i in 0..=s {
            orders.push([i, s - i]);
        }
    }
    pts.par_iter()
        .map(|&x| {
            let mut m: f64 = 0.0;
            for o in &orders {
                for c in 0..2 {
                    m = m.max((a.lift_partial(x, c, *o) - b.lift_partial(x, c, *o)).abs());
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

/// Affine charts: one rotation `[e_s, e_s^⊥]` and a square lattice of translations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartAtlas {
    pub rotation: Mat2,
    pub centers: Vec<Vec2>,
    pub radius: f64,
    pub cone: f64,
}

impl ChartAtlas {
    pub fn new(t: &TorusMap, radius: f64, kappa: f64) -> Result<Self> {
        let es = t.stable_direction()?;
        let en = geom::perp(es);
        let rotation = [[es[0], en[0]], [es[1], en[1]]];
        // half-radius discs cover the torus when the spacing is below r/√2
        let per_side = (std::f64::consts::SQRT_2 / radius).ceil() as usize;
        let centers = grid_points(per_side)
            .into_iter()
            .map(|c| geom::add(c, [0.5 / per_side as f64, 0.5 / per_side as f64]))
            .collect();
        Ok(ChartAtlas { rotation, centers, radius, cone: 1.5 * kappa })
    }

    pub fn stable(&self) -> Vec2 {
        [self.rotation[0][0], self.rotation[1][0]]
    }

    pub fn normal(&self) -> Vec2 {
        [self.rotation[0][1], self.rotation[1][1]]
    }

    /// Lifted chart map `ψ_i(η, ξ) = c_i + η e_s + ξ e_n`.
    pub fn to_torus(&self, i: usize, p: Vec2) -> Vec2 {
        geom::add(self.centers[i], geom::mat_vec(&self.rotation, p))
    }

    /// Chart coordinates of a lifted point.
    pub fn from_torus(&self, i: usize, x: Vec2) -> Vec2 {
        let d = geom::sub(x, self.centers[i]);
        [geom::dot(d, self.stable()), geom::dot(d, self.normal())]
    }

    /// Chart whose center is nearest to `x` on the torus.
    pub fn nearest(&self, x: Vec2) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = geom::norm(geom::wrap_centered(geom::sub(x, *c)));
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Every sampled point lies within half a radius of some center.
    pub fn covers(&self, n: usize) -> bool {
        grid_points(n).into_iter().all(|x| {
            let i = self.nearest(x);
            geom::norm(geom::wrap_centered(geom::sub(x, self.centers[i]))) < 0.5 * self.radius
        })
    }

    /// The stable direction of `t` lies in the chart cone at the sampled points.
    pub fn cone_aligned(&self, t: &TorusMap, n: usize) -> Result<bool> {
        let (_, _, _, es) = t.linear_eigen()?;
        Ok(grid_points(n).into_iter().all(|x| cone_slope(stable_at(t, x, es), self.stable()) < self.cone))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_eval_examples() {
        let t = TorusMap::cat();
        assert_eq!(t.eval([0.5, 0.5]), [0.5, 0.0]);
        assert_eq!(t.eval([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn linear_inverse_is_exact() {
        let t = TorusMap::cat();
        let x = t.invert([0.3, 0.7]).unwrap();
        let expect = geom::wrap([0.3 - 0.7, -0.3 + 2.0 * 0.7]);
        assert!((x[0] - expect[0]).abs() < 1e-15 && (x[1] - expect[1]).abs() < 1e-15);
    }

    #[test]
    fn det_gradient_matches_difference() {
        let t = TorusMap::cat_dissipative(0.3);
        let x = [0.21, 0.64];
        let h = 1e-6;
        let g = t.jacobian_det_gradient(x);
        let fd0 = (t.jacobian_det([x[0] + h, x[1]]) - t.jacobian_det([x[0] - h, x[1]])) / (2.0 * h);
        assert!((g[0] - fd0).abs() < 1e-7);
        assert!(g[1].abs() < 1e-12);
    }

    #[test]
    fn atlas_covers_and_is_isometric() {
        let t = TorusMap::cat();
        let atlas = ChartAtlas::new(&t, 0.2, 0.2).unwrap();
        assert!(atlas.covers(64));
        let r = atlas.rotation;
        let rtr = geom::mat_mul(&[[r[0][0], r[1][0]], [r[0][1], r[1][1]]], &r);
        assert!((rtr[0][0] - 1.0).abs() < 1e-15 && rtr[0][1].abs() < 1e-15);
    }
}
