use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, Inverse, Solve, SVD};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A circle `|z - center| = radius` discretized with `nodes` trapezoid points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl Contour {
    pub fn new(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if nodes < 16 {
            return Err(Error::InvalidParams("a contour needs at least 16 nodes".into()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidParams("contour radius must be positive".into()));
        }
        Ok(Contour { center, radius, nodes })
    }

    pub fn circle(center: f64, radius: f64) -> Self {
        Contour { center: Complex64::new(center, 0.0), radius, nodes: 64 }
    }

    pub fn with_nodes(self, nodes: usize) -> Self {
        Contour { nodes, ..self }
    }

    /// `(z_j, w_j)` with `Σ w_j f(z_j) ≈ (1/2πi)∮ f(z) dz`.
    pub fn quadrature(&self) -> Vec<(Complex64, Complex64)> {
        (0..self.nodes)
            .map(|j| {
                let e = Complex64::from_polar(1.0, TAU * (j as f64 + 0.5) / self.nodes as f64);
                (self.center + e * self.radius, e * self.radius / self.nodes as f64)
            })
            .collect()
    }

    /// Smallest distance from the circle to the given eigenvalues.
    pub fn gap(&self, eigenvalues: &[Complex64]) -> f64 {
        eigenvalues.iter().map(|l| ((l - self.center).norm() - self.radius).abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn encloses(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

#[derive(Clone, Debug)]
pub struct Projector {
    pub matrix: Array2<Complex64>,
    pub rank: usize,
    /// `max |Π² - Π|`.
    pub idempotency: f64,
}

pub fn identity(n: usize) -> Array2<Complex64> {
    Array2::from_diag_elem(n, Complex64::new(1.0, 0.0))
}

pub fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    let (_, s, _) = a.svd(false, false).map_err(|e| Error::SolveFailure(e.to_string()))?;
    Ok(s.to_vec())
}

/// Spectral norm.
pub fn norm2(a: &Array2<Complex64>) -> Result<f64> {
    Ok(singular_values(a)?.into_iter().fold(0.0, f64::max))
}

pub fn numerical_rank(a: &Array2<Complex64>, tol: f64) -> Result<usize> {
    Ok(singular_values(a)?.into_iter().filter(|s| *s > tol).count())
}

/// `(z - L)⁻¹`.
pub fn resolvent(l: &Array2<Complex64>, z: Complex64) -> Result<Array2<Complex64>> {
    let a = identity(l.nrows()) * z - l;
    a.inv().map_err(|e| Error::SolveFailure(e.to_string()))
}

/// Contour integrals `Σ w_j F((z_j - L)⁻¹)` with the resolvent computed once per node.
pub fn contour_integral<F>(l: &Array2<Complex64>, c: &Contour, f: F) -> Result<Array2<Complex64>>
where
    F: Fn(&Array2<Complex64>) -> Array2<Complex64> + Sync,
{
    let ev = l.eigvals().map_err(|e| Error::SolveFailure(e.to_string()))?;
    let gap = c.gap(&ev.to_vec());
    if gap <= 1e-6 {
        return Err(Error::ContourHitsSpectrum(gap));
    }
    let parts: Vec<Array2<Complex64>> = c
        .quadrature()
        .into_par_iter()
        .map(|(z, w)| Ok(f(&resolvent(l, z)?) * w))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().reduce(|a, b| a + b).unwrap())
}

/// `Σ_j w_j s(z_j) (z_j - L)⁻¹ b`: one LU solve per node.
pub fn contour_solve<S>(l: &Array2<Complex64>, c: &Contour, b: &Array1<Complex64>, s: S) -> Result<Array1<Complex64>>
where
    S: Fn(Complex64) -> Complex64 + Sync,
{
    let ev = l.eigvals().map_err(|e| Error::SolveFailure(e.to_string()))?;
    let gap = c.gap(&ev.to_vec());
    if gap <= 1e-6 {
        return Err(Error::ContourHitsSpectrum(gap));
    }
    let parts: Vec<Array1<Complex64>> = c
        .quadrature()
        .into_par_iter()
        .map(|(z, w)| {
            let a = identity(l.nrows()) * z - l;
            let x = a.solve(b).map_err(|e| Error::SolveFailure(e.to_string()))?;
            Ok(x * (w * s(z)))
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().reduce(|a, b| a + b).unwrap())
}

/// `L[-k,-l] = conj L[k,l]` in the symmetric mode layout, as for real maps and densities.
fn reflection_symmetric(l: &Array2<Complex64>) -> bool {
    let n = l.nrows();
    let scale = l.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    l.indexed_iter().all(|((i, j), v)| (l[[n - 1 - i, n - 1 - j]].conj() - v).norm() <= 1e-14 * scale)
}

/// `(1/2πi)∮ (z - L)⁻¹ dz` by the trapezoid rule; rank from singular values above `1e-6`.
///
/// On real-centred contours a reflection-symmetric `L` has `R(z̄) = P conj(R(z)) P`,
/// so only the upper half of the nodes is inverted.
pub fn projector(l: &Array2<Complex64>, c: &Contour) -> Result<Projector> {
    let n = l.nrows();
    let matrix = if c.center.im == 0.0 && c.nodes.is_multiple_of(2) && reflection_symmetric(l) {
        let ev = l.eigvals().map_err(|e| Error::SolveFailure(e.to_string()))?;
        let gap = c.gap(&ev.to_vec());
        if gap <= 1e-6 {
            return Err(Error::ContourHitsSpectrum(gap));
        }
        let upper: Vec<Array2<Complex64>> = c
            .quadrature()
            .into_iter()
            .take(c.nodes / 2)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(z, w)| Ok(resolvent(l, z)? * w))
            .collect::<Result<_>>()?;
        let s = upper.into_iter().reduce(|a, b| a + b).unwrap();
        Array2::from_shape_fn((n, n), |(i, j)| s[[i, j]] + s[[n - 1 - i, n - 1 - j]].conj())
    } else {
        contour_integral(l, c, |r| r.clone())?
    };
    let sq = matrix.dot(&matrix);
    let idempotency = (&sq - &matrix).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let rank = numerical_rank(&matrix, 1e-6)?;
    Ok(Projector { matrix, rank, idempotency })
}

/// [`projector`] with the node count doubled until `‖Π² - Π‖ ≤ tol` or `max_nodes` is reached.
pub fn projector_adaptive(l: &Array2<Complex64>, c: &Contour, tol: f64, max_nodes: usize) -> Result<(Projector, Contour)> {
    let mut c = *c;
    loop {
        let p = projector(l, &c)?;
        if p.idempotency <= tol || c.nodes * 2 > max_nodes {
            return Ok((p, c));
        }
        c = c.with_nodes(c.nodes * 2);
    }
}
