use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Mutex;

use ndarray::Array2;
use num_complex::Complex64;

use super::PerturbationFamily;
use crate::error::{Error, Result};
use crate::geom;
use crate::transfer::{assemble, assembly_grid, galerkin, InverseGrid};

/// `(offsets, weights)` of the second-order central stencil for the `k`-th derivative.
fn central_stencil(k: usize) -> Result<(Vec<i32>, Vec<f64>, f64)> {
    Ok(match k {
        1 => (vec![1, -1], vec![1.0, -1.0], 2.0),
        2 => (vec![1, 0, -1], vec![1.0, -2.0, 1.0], 1.0),
        3 => (vec![2, 1, -1, -2], vec![1.0, -2.0, 2.0, -1.0], 2.0),
        4 => (vec![2, 1, 0, -1, -2], vec![1.0, -4.0, 6.0, -4.0, 1.0], 1.0),
        _ => return Err(Error::InvalidParams(format!("derivative order {k} unsupported"))),
    })
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Richardson-extrapolated central differences of a matrix-valued function.
pub struct Differentiator<'a> {
    f: Box<dyn Fn(f64) -> Result<Array2<Complex64>> + Sync + 'a>,
    cache: Mutex<HashMap<u64, Array2<Complex64>>>,
    pub h0: f64,
    pub tol: f64,
}

impl<'a> Differentiator<'a> {
    pub fn new(f: impl Fn(f64) -> Result<Array2<Complex64>> + Sync + 'a, h0: f64, tol: f64) -> Self {
        Differentiator { f: Box::new(f), cache: Mutex::new(HashMap::new()), h0, tol }
    }

    fn eval(&self, t: f64) -> Result<Array2<Complex64>> {
        if let Some(m) = self.cache.lock().unwrap().get(&t.to_bits()) {
            return Ok(m.clone());
        }
        let m = (self.f)(t)?;
        self.cache.lock().unwrap().insert(t.to_bits(), m.clone());
        Ok(m)
    }

    fn stencil(&self, k: usize, h: f64) -> Result<Array2<Complex64>> {
        let (offs, w, den) = central_stencil(k)?;
        let mut acc: Option<Array2<Complex64>> = None;
        for (o, c) in offs.iter().zip(&w) {
            let m = self.eval(*o as f64 * h)? * Complex64::new(*c, 0.0);
            acc = Some(match acc {
                None => m,
                Some(a) => a + m,
            });
        }
        Ok(acc.unwrap() / Complex64::new(den * h.powi(k as i32), 0.0))
    }

    fn richardson(&self, k: usize, h: f64) -> Result<Array2<Complex64>> {
        let coarse = self.stencil(k, h)?;
        let fine = self.stencil(k, 0.5 * h)?;
        Ok((fine * Complex64::new(4.0, 0.0) - coarse) / Complex64::new(3.0, 0.0))
    }

    /// `d^k/dt^k f(0)`; halves the step until successive estimates agree to `tol`.
    pub fn derivative(&self, k: usize) -> Result<Array2<Complex64>> {
        let mut h = self.h0;
        let mut prev = self.richardson(k, h)?;
        let mut best: Option<(f64, Array2<Complex64>)> = None;
        while h >= 1e-6 {
            h *= 0.5;
            let next = self.richardson(k, h)?;
            let change = max_abs(&(&next - &prev));
            if change <= self.tol * max_abs(&next).max(1.0) {
                return Ok(next);
            }
            if best.as_ref().is_none_or(|b| change < b.0) {
                best = Some((change, next.clone()));
            }
            prev = next;
        }
        Err(Error::StepUnderflow(best.map_or(f64::INFINITY, |b| b.0)))
    }
}

/// `Q_1 = d/dt L_{T_t}|_{t=0}` on the Galerkin box, from the derivative of `h(y)/|det DT(y)|` along `ẏ = -DT(y)⁻¹ g₁(y)`.
pub fn taylor_q1(family: &PerturbationFamily, n: usize) -> Result<Array2<Complex64>> {
    let t0 = family.at(0.0);
    let g = assembly_grid(n);
    let grid = InverseGrid::new(&t0, g)?;
    let g1 = &family.directions[0];
    // per grid point: (y, ẏ, 1/|J|, ∂_t J / J)
    let data: Vec<([f64; 2], [f64; 2], f64, f64)> = grid
        .points
        .iter()
        .zip(&grid.inv_jac)
        .map(|(&y, &ij)| {
            let d = t0.differential(y);
            let dinv = geom::inv(&d);
            let v = g1.value(y);
            let ydot = geom::scale(-1.0, geom::mat_vec(&dinv, v));
            let jac = geom::det(&d);
            let dg = g1.jacobian(y);
            let tr = (0..2).map(|i| (0..2).map(|k| dinv[i][k] * dg[k][i]).sum::<f64>()).sum::<f64>();
            let djdt = geom::dot(t0.jacobian_det_gradient(y), ydot) + jac * tr;
            (y, ydot, ij, djdt / jac)
        })
        .collect();
    Ok(assemble(n, g, |k| {
        let kf = [k[0] as f64, k[1] as f64];
        data.iter()
            .map(|(y, ydot, ij, rel)| {
                let e = Complex64::from_polar(*ij, TAU * (kf[0] * y[0] + kf[1] * y[1]));
                e * (Complex64::new(0.0, TAU * geom::dot(kf, *ydot)) - rel)
            })
            .collect()
    }))
}

/// `Q_k = (1/k!) d^k/dt^k L_{T_t}|_{t=0}`: closed form for `k = 1`, differences otherwise.
pub fn taylor_q(family: &PerturbationFamily, k: usize, n: usize) -> Result<Array2<Complex64>> {
    if k == 0 || k + 1 > family.order {
        return Err(Error::InvalidParams(format!("need 1 ≤ k ≤ s-1 = {}", family.order.saturating_sub(1))));
    }
    if k == 1 {
        return taylor_q1(family, n);
    }
    taylor_q_fd(family, k, n)
}

/// Finite-difference `Q_k` on the Galerkin family.
pub fn taylor_q_fd(family: &PerturbationFamily, k: usize, n: usize) -> Result<Array2<Complex64>> {
    let d = Differentiator::new(|t| Ok(galerkin(&family.at(t), n)?.matrix), 0.02, 1e-9);
    Ok(d.derivative(k)? / Complex64::new(factorial(k), 0.0))
}
