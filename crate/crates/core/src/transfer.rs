//! Transfer operator, its Fourier–Galerkin matrix, resonances, SRB density and correlations.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigVals, LeastSquaresSvd, Solve};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bump::Plateau;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::maps::TorusMap;
use crate::observable::{Obs, Transferred};
use crate::trig::TrigObservable;

/// Assembly grid size per unit of cutoff.
pub const OVERSAMPLE: usize = 8;
/// Assembled entries below this modulus are set to zero.
pub const CHOP: f64 = 1e-13;
pub const MAX_CUTOFF: usize = 64;

/// `x ↦ h(T⁻¹x) / |det DT(T⁻¹x)|`.
pub fn apply_transfer(t: &TorusMap, h: Obs) -> Transferred {
    Transferred::new(t, h, 1)
}

/// Preimages and inverse Jacobians on a uniform `g×g` grid.
pub struct InverseGrid {
    pub g: usize,
    pub points: Vec<Vec2>,
    pub inv_jac: Vec<f64>,
}

impl InverseGrid {
    pub fn new(t: &TorusMap, g: usize) -> Result<Self> {
        let rows: Vec<Vec<(Vec2, f64)>> = (0..g)
            .into_par_iter()
            .map(|i| {
                (0..g)
                    .map(|j| {
                        let y = t.invert([i as f64 / g as f64, j as f64 / g as f64])?;
                        Ok((y, 1.0 / t.jacobian_det(y).abs()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let (points, inv_jac) = rows.into_iter().flatten().unzip();
        Ok(InverseGrid { g, points, inv_jac })
    }
}

/// `M[k, k'] = ⟨e_k, L e_{k'}⟩` over modes `|k|∞ ≤ n`, indexed as in [`TrigObservable`].
#[derive(Clone, Debug)]
pub struct GalerkinOperator {
    pub n: usize,
    pub matrix: Array2<Complex64>,
    pub map: TorusMap,
}

fn fft2_with(buf: &mut [Complex64], g: usize, fft: &dyn rustfft::Fft<f64>, col: &mut [Complex64]) {
    fft.process(buf);
    for j in 0..g {
        for i in 0..g {
            col[i] = buf[i * g + j];
        }
        fft.process(col);
        for i in 0..g {
            buf[i * g + j] = col[i];
        }
    }
}

/// Projects grid functions `column(k')` (sampled on a `g×g` grid) onto the modes `|k|∞ ≤ n`.
pub fn assemble<F>(n: usize, g: usize, column: F) -> Array2<Complex64>
where
    F: Fn([i32; 2]) -> Vec<Complex64> + Sync,
{
    let proto = TrigObservable::zeros(n);
    let dim = proto.coefs().len();
    let fft = FftPlanner::new().plan_fft_forward(g);
    let scale = 1.0 / (g * g) as f64;
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|col_idx| {
            let mut buf = column(proto.mode_at(col_idx));
            let mut scratch = vec![Complex64::default(); g];
            fft2_with(&mut buf, g, fft.as_ref(), &mut scratch);
            (0..dim)
                .map(|row| {
                    let m = proto.mode_at(row);
                    let v = buf[m[0].rem_euclid(g as i32) as usize * g + m[1].rem_euclid(g as i32) as usize] * scale;
                    if v.norm() < CHOP {
                        Complex64::default()
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let mut matrix = Array2::zeros((dim, dim));
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            matrix[[i, j]] = v;
        }
    }
    matrix
}

pub fn assembly_grid(n: usize) -> usize {
    (OVERSAMPLE * n).max(8)
}

/// Galerkin matrix from an `8n×8n` assembly grid.
pub fn galerkin(t: &TorusMap, n: usize) -> Result<GalerkinOperator> {
    galerkin_weighted(t, None, n)
}

/// Galerkin matrix of `h ↦ (w·h / |det DT|)∘T⁻¹`.
pub fn galerkin_weighted(t: &TorusMap, weight: Option<&TrigObservable>, n: usize) -> Result<GalerkinOperator> {
    if n > MAX_CUTOFF {
        return Err(Error::InvalidParams(format!("cutoff {n} exceeds {MAX_CUTOFF}")));
    }
    let g = assembly_grid(n);
    let mut grid = InverseGrid::new(t, g)?;
    if let Some(w) = weight {
        for (y, j) in grid.points.iter().zip(grid.inv_jac.iter_mut()) {
            *j *= w.value(*y).re;
        }
    }
    let matrix = assemble(n, g, |k| {
        grid.points
            .iter()
            .zip(&grid.inv_jac)
            .map(|(y, w)| Complex64::from_polar(*w, std::f64::consts::TAU * (k[0] as f64 * y[0] + k[1] as f64 * y[1])))
            .collect()
    });
    Ok(GalerkinOperator { n, matrix, map: t.clone() })
}

impl GalerkinOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn zero_index(&self) -> usize {
        self.dim() / 2
    }

    /// `max_{k'} |M[0, k'] - δ_{0,k'}|`.
    pub fn row0_defect(&self) -> f64 {
        let z = self.zero_index();
        self.matrix
            .row(z)
            .iter()
            .enumerate()
            .map(|(j, v)| (v - if j == z { Complex64::new(1.0, 0.0) } else { Complex64::default() }).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_column_l1(&self) -> f64 {
        self.matrix.columns().into_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn apply(&self, h: &TrigObservable) -> TrigObservable {
        let v = Array1::from(h.resized(self.n).coefs().to_vec());
        TrigObservable::from_coefs(self.n, self.matrix.dot(&v).to_vec())
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let ev = self.matrix.eigvals().map_err(|e| Error::SolveFailure(e.to_string()))?;
        let mut v = ev.to_vec();
        sort_by_modulus(&mut v);
        Ok(v)
    }
}

fn sort_by_modulus(v: &mut [Complex64]) {
    v.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralData {
    /// All eigenvalues, by decreasing modulus.
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors of the first `k_top` eigenvalues.
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub simple: Vec<bool>,
    pub essential_radius: f64,
}

impl SpectralData {
    pub fn top(&self, k: usize) -> &[Complex64] {
        &self.eigenvalues[..k.min(self.eigenvalues.len())]
    }
}

/// Dense eigendecomposition; the first `k_top` pairs carry vectors and residuals.
pub fn spectrum(op: &GalerkinOperator, k_top: usize) -> Result<SpectralData> {
    spectrum_with_radius(op, k_top, 1, 0.5)
}

pub fn spectrum_with_radius(op: &GalerkinOperator, k_top: usize, p: usize, q: f64) -> Result<SpectralData> {
    let (vals, vecs) = op.matrix.eig().map_err(|e| Error::SolveFailure(e.to_string()))?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].norm().total_cmp(&vals[a].norm()).then(vals[b].im.total_cmp(&vals[a].im)));
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| vals[i]).collect();
    let k_top = k_top.min(eigenvalues.len());
    let mut vectors = Vec::with_capacity(k_top);
    let mut residuals = Vec::with_capacity(k_top);
    let mut simple = Vec::with_capacity(k_top);
    for (rank, &i) in order.iter().take(k_top).enumerate() {
        let v = vecs.column(i).to_owned();
        let r = op.matrix.dot(&v) - &v * vals[i];
        let vn = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        residuals.push(r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() / vn);
        vectors.push(v.to_vec());
        let lam = eigenvalues[rank];
        simple.push(eigenvalues.iter().enumerate().all(|(j, mu)| j == rank || (mu - lam).norm() > 1e-6));
    }
    let essential_radius = crate::maps::hyperbolicity_constants(&op.map, 16)?.essential_radius(p, q);
    Ok(SpectralData { eigenvalues, vectors, residuals, simple, essential_radius })
}

/// Fixed density of the Galerkin matrix, normalized to integral one.
///
/// Row zero of the matrix is the zero indicator, so the fixed point solves
/// `(I - M') c' = b` on the nonzero modes with `c_0 = 1`.
pub fn srb(op: &GalerkinOperator) -> Result<TrigObservable> {
    let ev = op.eigenvalues()?;
    let near_one = ev.iter().filter(|l| (*l - Complex64::new(1.0, 0.0)).norm() < 1e-6).count();
    if near_one != 1 {
        let gap = ev.iter().map(|l| (l - Complex64::new(1.0, 0.0)).norm()).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
        return Err(Error::NotSimple(gap));
    }
    srb_unchecked(op)
}

/// [`srb`] without the eigenvalue gap test.
pub fn srb_unchecked(op: &GalerkinOperator) -> Result<TrigObservable> {
    let z = op.zero_index();
    let dim = op.dim();
    let rest: Vec<usize> = (0..dim).filter(|&i| i != z).collect();
    let mut a = Array2::<Complex64>::zeros((dim - 1, dim - 1));
    let mut b = Array1::<Complex64>::zeros(dim - 1);
    for (ii, &i) in rest.iter().enumerate() {
        b[ii] = op.matrix[[i, z]];
        for (jj, &j) in rest.iter().enumerate() {
            a[[ii, jj]] = -op.matrix[[i, j]];
        }
        a[[ii, ii]] += Complex64::new(1.0, 0.0);
    }
    let x = if dim > 1 { a.solve(&b).map_err(|e| Error::SolveFailure(e.to_string()))? } else { b };
    let mut coefs = vec![Complex64::default(); dim];
    coefs[z] = Complex64::new(1.0, 0.0);
    for (ii, &i) in rest.iter().enumerate() {
        coefs[i] = x[ii];
    }
    Ok(TrigObservable::from_coefs(op.n, coefs))
}

/// Smallest pairing of `h` with `count` random nonnegative plateau bumps of unit mass, on a `g×g` grid.
pub fn min_positive_pairing<R: Rng>(h: &TrigObservable, rng: &mut R, count: usize, g: usize) -> f64 {
    let vals = h.grid_values(g);
    (0..count)
        .map(|_| {
            let c = [rng.gen::<f64>(), rng.gen::<f64>()];
            let w = rng.gen_range(0.05..0.3);
            let bump = Plateau::new(rng.gen_range(0.0..0.8));
            let (mut acc, mut mass) = (0.0, 0.0);
            for i in 0..g {
                for j in 0..g {
                    let d = crate::geom::wrap_centered([i as f64 / g as f64 - c[0], j as f64 / g as f64 - c[1]]);
                    let phi = bump.value(d[0] / w) * bump.value(d[1] / w);
                    acc += vals[i * g + j].re * phi;
                    mass += phi;
                }
            }
            acc / mass
        })
        .fold(f64::INFINITY, f64::min)
}

/// `c_n = ∫ f · g∘Tⁿ = ⟨Lⁿf, g⟩` for `n = 0..=n_max`.
pub fn correlation(t: &TorusMap, f: &TrigObservable, g: &TrigObservable, n_max: usize, n: usize) -> Result<Vec<Complex64>> {
    if n_max > 30 {
        return Err(Error::InvalidParams("n_max must be at most 30".into()));
    }
    Ok(correlation_with(&galerkin(t, n)?, f, g, n_max))
}

pub fn correlation_with(op: &GalerkinOperator, f: &TrigObservable, g: &TrigObservable, n_max: usize) -> Vec<Complex64> {
    let mut v = f.resized(op.n);
    let mut out = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        if step > 0 {
            v = op.apply(&v);
        }
        out.push(v.pair(g));
    }
    out
}

/// Least-squares `c_n ≈ Σ a_k n^{r_k} λ_k^n` over `n ∈ range`.
pub fn resonance_fit(c: &[Complex64], lambdas: &[Complex64], orders: &[u32], range: std::ops::RangeInclusive<usize>) -> Result<Vec<Complex64>> {
    let rows: Vec<usize> = range.filter(|n| *n < c.len()).collect();
    let mut a = Array2::<Complex64>::zeros((rows.len(), lambdas.len()));
    let mut b = Array1::<Complex64>::zeros(rows.len());
    for (i, &n) in rows.iter().enumerate() {
        b[i] = c[n];
        for (k, lam) in lambdas.iter().enumerate() {
            let r = orders.get(k).copied().unwrap_or(0);
            a[[i, k]] = lam.powu(n as u32) * (n as f64).powi(r as i32);
        }
    }
    let sol = a.least_squares(&b).map_err(|e| Error::SolveFailure(e.to_string()))?;
    Ok(sol.solution.to_vec())
}

/// Jordan orders: `1` for eigenvalues with another one within `gap`, else `0`.
pub fn jordan_orders(lambdas: &[Complex64], gap: f64) -> Vec<u32> {
    lambdas
        .iter()
        .enumerate()
        .map(|(i, l)| u32::from(lambdas.iter().enumerate().any(|(j, m)| j != i && (l - m).norm() < gap)))
        .collect()
}

/// Wraps a Galerkin density as a pointwise observable.
pub fn as_observable(h: &TrigObservable) -> Obs {
    Arc::new(h.clone())
}
