//! Perturbations of the transfer operator: random kernels, spectral projectors
//! and their stability, Taylor coefficients, resolvent expansions on weighted
//! scales and linear response.

mod kernel;
mod projector;
mod response;
mod scale;
mod stability;
mod taylor;

pub use kernel::*;
pub use projector::*;
pub use response::*;
pub use scale::*;
pub use stability::*;
pub use taylor::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{hyperbolicity_constants, TorusMap};
use crate::trig::TrigField;

/// `t ↦ A x + g₀(x) + Σ_k t^k g_k(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationFamily {
    pub base: TorusMap,
    pub directions: Vec<TrigField>,
    /// Smoothness order `s` of the family.
    pub order: usize,
}

impl PerturbationFamily {
    pub fn new(base: TorusMap, directions: Vec<TrigField>, order: usize) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidParams("a family needs at least one direction".into()));
        }
        Ok(PerturbationFamily { base, directions, order })
    }

    /// `T_t = T_{t₀+t}` inside the dissipative cat family.
    pub fn dissipative(t0: f64) -> Self {
        let base = TorusMap::cat_dissipative(t0);
        let dir = base.perturbation.clone();
        PerturbationFamily { base, directions: vec![dir], order: 3 }
    }

    pub fn area_preserving(t0: f64) -> Self {
        let base = TorusMap::cat_area_preserving(t0);
        let dir = base.perturbation.clone();
        PerturbationFamily { base, directions: vec![dir], order: 3 }
    }

    pub fn at(&self, t: f64) -> TorusMap {
        let mut field = self.base.perturbation.scaled(self.base.strength);
        let mut tk = 1.0;
        for d in &self.directions {
            tk *= t;
            field = field.plus(&d.scaled(tk));
        }
        TorusMap { linear: self.base.linear, perturbation: field, strength: 1.0 }
    }

    /// Largest `t` on a bisection grid in `[0, t_hi]` for which both `T_{±t}` pass the cone check.
    pub fn cone_threshold(&self, t_hi: f64) -> f64 {
        let ok = |t: f64| {
            hyperbolicity_constants(&self.at(t), 16).is_ok_and(|r| r.valid)
                && hyperbolicity_constants(&self.at(-t), 16).is_ok_and(|r| r.valid)
        };
        if ok(t_hi) {
            return t_hi;
        }
        let (mut lo, mut hi) = (0.0, t_hi);
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}
