use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{contour_solve, taylor_q1, Contour, PerturbationFamily};
use crate::error::{Error, Result};
use crate::transfer::{galerkin, srb, GalerkinOperator};
use crate::trig::TrigObservable;

/// Step for the symmetric difference of `∫ f h_t`.
pub const RESPONSE_STEP: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResponseReport {
    /// `∫ f h'` from the projector derivative.
    pub formula: f64,
    /// `(∫ f h_ε - ∫ f h_{-ε}) / 2ε`.
    pub finite_difference: f64,
    /// `|formula - fd| / max(|fd|, 1e-12)`.
    pub relative_error: f64,
    /// Total mass of `h'`, zero up to roundoff.
    pub mass: f64,
    #[serde(skip)]
    pub derivative: Option<TrigObservable>,
}

/// `h' = Π'(0) h₀` with `Π'(0) = (1/2πi)∮ (z - L₀)⁻¹ Q₁ (z - L₀)⁻¹ dz` around `1`.
///
/// `(z - L₀)⁻¹ h₀ = h₀ / (z - 1)`, so each node needs a single solve.
pub fn srb_derivative(family: &PerturbationFamily, n: usize, contour: &Contour) -> Result<TrigObservable> {
    let op: GalerkinOperator = galerkin(&family.at(0.0), n)?;
    let h0 = srb(&op)?;
    let q1 = taylor_q1(family, n)?;
    let b = q1.dot(&Array1::from(h0.resized(n).coefs().to_vec()));
    let v = contour_solve(&op.matrix, contour, &b, |z| 1.0 / (z - 1.0))?;
    Ok(TrigObservable::from_coefs(n, v.to_vec()))
}

/// Derivative of `t ↦ ∫ f h_t` at `t = 0`, checked against a symmetric difference.
pub fn response(family: &PerturbationFamily, f: &TrigObservable, n: usize) -> Result<ResponseReport> {
    if !f.is_real(1e-12) {
        return Err(Error::InvalidParams("observable must be real".into()));
    }
    let h1 = srb_derivative(family, n, &Contour::circle(1.0, 0.5))?;
    let formula = f.pair(&h1).re;
    let at = |t: f64| -> Result<f64> { Ok(f.pair(&srb(&galerkin(&family.at(t), n)?)?).re) };
    let fd = (at(RESPONSE_STEP)? - at(-RESPONSE_STEP)?) / (2.0 * RESPONSE_STEP);
    Ok(ResponseReport {
        formula,
        finite_difference: fd,
        relative_error: (formula - fd).abs() / fd.abs().max(1e-12),
        mass: h1.integral().norm(),
        derivative: Some(h1),
    })
}

/// `t ↦ ∫ f h_t` on a grid, for plotting.
pub fn response_curve(family: &PerturbationFamily, f: &TrigObservable, ts: &[f64], n: usize) -> Result<Vec<(f64, f64)>> {
    ts.iter().map(|&t| Ok((t, f.pair(&srb(&galerkin(&family.at(t), n)?)?).re))).collect()
}

/// Top eigenvalues of `L_t` along the family, for smoothness checks.
pub fn eigenvalue_track(family: &PerturbationFamily, ts: &[f64], n: usize, k: usize) -> Result<Vec<Vec<Complex64>>> {
    ts.iter()
        .map(|&t| {
            let mut ev = galerkin(&family.at(t), n)?.eigenvalues()?;
            ev.truncate(k);
            Ok(ev)
        })
        .collect()
}
