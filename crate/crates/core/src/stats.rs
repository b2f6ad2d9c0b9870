//! CLT variance of Birkhoff sums: resolvent formula, Monte Carlo and curves along families.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::{singular_values, PerturbationFamily};
use crate::transfer::{galerkin, srb, GalerkinOperator};
use crate::trig::TrigObservable;
use crate::TorusMap;

pub const BURN_IN: usize = 100;
pub const BATCHES: usize = 100;
const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceReport {
    pub sigma2_formula: f64,
    pub sigma2_mc: Option<f64>,
    pub mc_se: Option<f64>,
    pub observable: String,
    pub map: String,
    /// `‖(I - L̃)x - f̄h‖_∞` of the linear solve.
    pub residual: f64,
    pub condition: f64,
}

impl VarianceReport {
    /// `|formula - mc| / se`, when a Monte Carlo estimate is attached.
    pub fn z_score(&self) -> Option<f64> {
        Some((self.sigma2_formula - self.sigma2_mc?).abs() / self.mc_se?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Variance {
    pub sigma2: f64,
    pub residual: f64,
    pub condition: f64,
    pub centered_mean: f64,
}

fn vector(h: &TrigObservable, n: usize) -> Array1<Complex64> {
    Array1::from(h.resized(n).coefs().to_vec())
}

/// `σ² = -μ(f̄²) + 2 ⟨(I - L̃)⁻¹(f̄ h), f̄⟩` with `L̃ = L - h ⊗ ∫`.
pub fn clt_variance(op: &GalerkinOperator, h: &TrigObservable, f: &TrigObservable) -> Result<Variance> {
    let n = op.n;
    let h = h.resized(n);
    let mean = f.pair(&h).re;
    let fbar = f.add_constant(-mean).resized(n);
    let u = fbar.mul(&h, n);
    let z = op.zero_index();
    let hv = vector(&h, n);
    let mut a = Array2::<Complex64>::eye(op.dim()) - &op.matrix;
    for i in 0..op.dim() {
        a[[i, z]] += hv[i];
    }
    let sv = singular_values(&a)?;
    let condition = sv[0] / sv[sv.len() - 1];
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SolveFailure(format!("I - L̃ has condition {condition:.3e}")));
    }
    let uv = vector(&u, n);
    let x = a.solve(&uv).map_err(|e| Error::SolveFailure(e.to_string()))?;
    let residual = (a.dot(&x) - &uv).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let xo = TrigObservable::from_coefs(n, x.to_vec());
    let sigma2 = 2.0 * fbar.pair(&xo).re - fbar.pair(&u).re;
    Ok(Variance { sigma2, residual, condition, centered_mean: mean })
}

/// Variance for a map at Galerkin cutoff `n`, SRB density included.
pub fn clt_variance_map(t: &TorusMap, f: &TrigObservable, n: usize) -> Result<Variance> {
    let op = galerkin(t, n)?;
    let h = srb(&op)?;
    clt_variance(&op, &h, f)
}

/// Partial Green-Kubo sums `-μ(f̄²) + 2 Σ_{k ≤ n*} μ(f̄∘Tᵏ·f̄)` for `n* = 0..=n_max`.
pub fn green_kubo(op: &GalerkinOperator, h: &TrigObservable, f: &TrigObservable, n_max: usize) -> Vec<f64> {
    let n = op.n;
    let h = h.resized(n);
    let fbar = f.add_constant(-f.pair(&h).re).resized(n);
    let mut u = fbar.mul(&h, n);
    let base = fbar.pair(&u).re;
    let mut acc = -base;
    let mut out = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        acc += 2.0 * fbar.pair(&u).re;
        out.push(acc);
        u = op.apply(&u);
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub sigma2: f64,
    pub se: f64,
    pub mean: f64,
}

/// Variance of `S_n/√n` over `n_orbits` Lebesgue-random starts after a burn-in;
/// the standard error comes from `BATCHES` contiguous batches of orbits.
pub fn clt_variance_mc(t: &TorusMap, f: &TrigObservable, n_orbits: usize, orbit_len: usize, seed: u64) -> Result<MonteCarlo> {
    if orbit_len < 1000 {
        return Err(Error::InvalidParams("orbit_len must be at least 1000".into()));
    }
    if n_orbits < BATCHES || !n_orbits.is_multiple_of(BATCHES) {
        return Err(Error::InvalidParams(format!("n_orbits must be a positive multiple of {BATCHES}")));
    }
    let sums: Vec<f64> = (0..n_orbits)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x = [rng.gen::<f64>(), rng.gen::<f64>()];
            for _ in 0..BURN_IN {
                x = t.eval(x);
            }
            let mut s = 0.0;
            for _ in 0..orbit_len {
                s += f.value(x).re;
                x = t.eval(x);
            }
            s
        })
        .collect();
    let len = orbit_len as f64;
    let mean = sums.iter().sum::<f64>() / (n_orbits as f64 * len);
    let y2: Vec<f64> = sums.iter().map(|s| (s - len * mean).powi(2) / len).collect();
    let sigma2 = y2.iter().sum::<f64>() / n_orbits as f64;
    let per = n_orbits / BATCHES;
    let batch: Vec<f64> = y2.chunks(per).map(|c| c.iter().sum::<f64>() / per as f64).collect();
    let bm = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(MonteCarlo { sigma2, se: (var / BATCHES as f64).sqrt(), mean })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub ts: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Central divided differences of `σ` at interior grid points, orders `1..s`.
    pub derivatives: Vec<Vec<f64>>,
    /// Relative change of the first derivative at the middle point when the step is halved.
    pub refinement_change: f64,
}

fn divided(values: &[f64], h: f64, order: usize) -> Vec<f64> {
    match order {
        1 => values.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h)).collect(),
        2 => values.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h)).collect(),
        _ => values.windows(5).map(|w| (w[4] - 2.0 * w[3] + 2.0 * w[1] - w[0]) / (2.0 * h.powi(3))).collect(),
    }
}

/// `σ(t)` on a uniform grid, re-centering `f` at each `t`.
pub fn variance_curve(family: &PerturbationFamily, f: &TrigObservable, t_grid: &[f64], n: usize) -> Result<VarianceCurve> {
    if t_grid.len() < 3 {
        return Err(Error::InvalidParams("need at least three grid points".into()));
    }
    let h = t_grid[1] - t_grid[0];
    if t_grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300)) {
        return Err(Error::InvalidParams("grid must be uniform".into()));
    }
    let at = |t: f64| clt_variance_map(&family.at(t), f, n).map(|v| v.sigma2);
    let sigma2 = t_grid.iter().map(|&t| at(t)).collect::<Result<Vec<f64>>>()?;
    let sigma: Vec<f64> = sigma2.iter().map(|s| s.max(0.0).sqrt()).collect();
    let derivatives = (1..family.order.max(2)).map(|k| divided(&sigma, h, k.min(3))).collect();
    let mid = t_grid[t_grid.len() / 2];
    let d = |step: f64| -> Result<f64> { Ok((at(mid + step)?.max(0.0).sqrt() - at(mid - step)?.max(0.0).sqrt()) / (2.0 * step)) };
    let (coarse, fine) = (d(h)?, d(0.5 * h)?);
    let refinement_change = if fine.abs() < 1e-9 && coarse.abs() < 1e-9 { 0.0 } else { (coarse - fine).abs() / fine.abs().max(1e-12) };
    Ok(VarianceCurve { ts: t_grid.to_vec(), sigma2, sigma, derivatives, refinement_change })
}
