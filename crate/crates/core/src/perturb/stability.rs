use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{delta_size, galerkin_random, identity, norm2, projector_adaptive, Contour, KernelMember, PerturbationFamily, RandomKernel};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::maps::{hyperbolicity_constants, TorusMap};
use crate::transfer::galerkin;
use crate::trig::TrigObservable;

const IDEMPOTENCY: f64 = 1e-10;
const MAX_NODES: usize = 1024;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityRow {
    pub delta: f64,
    /// Rank of the projector onto the spectrum outside `|z| = ρ`.
    pub rank: usize,
    pub rank_base: usize,
    pub projector_diff: f64,
    pub idempotency: f64,
    /// `max_{n ≤ 20} ‖Lⁿ Π^{(ρ)}‖ / ρⁿ`.
    pub k2: f64,
    /// `‖Lⁿ Π^{(ρ)}‖` for `n = 0..=20`.
    pub decay: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rho: f64,
    pub essential: f64,
    pub eta: f64,
    pub rows: Vec<StabilityRow>,
    pub fitted_exponent: f64,
    /// Largest `Δ` below which every tested kernel keeps the base rank.
    pub epsilon0: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityParams {
    pub p: usize,
    pub q: f64,
    pub r: usize,
    pub rho: f64,
    pub cutoff: usize,
}

fn powers_decay(l: &Array2<Complex64>, pi_in: &Array2<Complex64>, rho: f64) -> Result<(Vec<f64>, f64)> {
    let mut m = pi_in.clone();
    let mut decay = Vec::with_capacity(21);
    let mut k2: f64 = 0.0;
    for n in 0..=20 {
        if n > 0 {
            m = l.dot(&m);
        }
        let v = norm2(&m)?;
        k2 = k2.max(v / rho.powi(n));
        decay.push(v);
    }
    Ok((decay, k2))
}

/// Projector stability along a ladder of kernels with shrinking `Δ`.
pub fn stability_experiment(base: &TorusMap, kernels: &[RandomKernel], sp: &StabilityParams) -> Result<StabilityReport> {
    let hyp = hyperbolicity_constants(base, 32)?;
    let essential = hyp.essential_radius(sp.p, sp.q);
    if !(sp.rho > essential && sp.rho < 1.0) {
        return Err(Error::InvalidParams(format!("ρ = {} must lie in ({essential:.4}, 1)", sp.rho)));
    }
    let eta = 1.0 - sp.rho.ln() / essential.ln();
    let contour = Contour::circle(0.0, sp.rho);
    let l0 = galerkin(base, sp.cutoff)?.matrix;
    let id = identity(l0.nrows());
    let (p0, _) = projector_adaptive(&l0, &contour, IDEMPOTENCY, MAX_NODES)?;
    let out0 = &id - &p0.matrix;
    let rank_base = l0.nrows() - p0.rank;
    let mut rows = Vec::with_capacity(kernels.len());
    for k in kernels {
        let delta = delta_size(k, base, sp.p, sp.q, sp.r);
        let l = galerkin_random(k, sp.cutoff)?.matrix;
        let (p, _) = projector_adaptive(&l, &contour, IDEMPOTENCY, MAX_NODES)?;
        let out = &id - &p.matrix;
        let (decay, k2) = powers_decay(&l, &p.matrix, sp.rho)?;
        rows.push(StabilityRow {
            delta,
            rank: l.nrows() - p.rank,
            rank_base,
            projector_diff: norm2(&(&out - &out0))?,
            idempotency: p.idempotency,
            k2,
            decay,
        });
    }
    let pts: Vec<&StabilityRow> = rows.iter().filter(|r| r.delta > 0.0 && r.projector_diff > 0.0).collect();
    let fitted_exponent = loglog_slope(
        &pts.iter().map(|r| r.delta).collect::<Vec<_>>(),
        &pts.iter().map(|r| r.projector_diff).collect::<Vec<_>>(),
    );
    let mut sorted: Vec<&StabilityRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let mut epsilon0 = 0.0;
    for r in sorted {
        if r.rank != r.rank_base {
            break;
        }
        epsilon0 = r.delta;
    }
    Ok(StabilityReport { rho: sp.rho, essential, eta, rows, fitted_exponent, epsilon0 })
}

/// Kernels `½δ_{T_d} + ½δ_{T_{2d}}` along a family, with `d` scaled so that `Δ` hits each target.
///
/// `Δ` is linear in `d` to first order; one probe at `d = 1e-3` fixes the scale.
pub fn calibrated_ladder(family: &PerturbationFamily, targets: &[f64], p: usize, q: f64, r: usize) -> Result<Vec<RandomKernel>> {
    let base = family.at(0.0);
    let pair = |d: f64| {
        let one = TrigObservable::constant(1.0);
        RandomKernel::new(vec![
            KernelMember { weight: 0.5, map: family.at(d), g: one.clone() },
            KernelMember { weight: 0.5, map: family.at(2.0 * d), g: one },
        ])
    };
    let per = delta_size(&pair(1e-3)?, &base, p, q, r) / 1e-3;
    if !(per.is_finite() && per > 0.0) {
        return Err(Error::InvalidParams("family does not move the map".into()));
    }
    targets.iter().map(|&t| pair(t / per)).collect()
}
