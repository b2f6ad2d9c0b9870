use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{EigVals, Inverse};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{identity, norm2, taylor_q, PerturbationFamily};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::transfer::galerkin;

type Remainder = Arc<dyn Fn(f64) -> Array2<f64> + Send + Sync>;

/// Finite-dimensional scale `B⁰ ⊃ … ⊃ Bˢ` with `‖x‖_i = max_j w^i_j |x_j|` and weights increasing in `i`.
#[derive(Clone)]
pub struct WeightedScale {
    pub weights: Vec<Vec<f64>>,
    pub l0: Array2<f64>,
    /// `Q_1, …, Q_{s-1}`.
    pub q: Vec<Array2<f64>>,
    /// Part of `L_t` beyond the Taylor polynomial.
    pub remainder: Remainder,
    pub alpha: f64,
    pub m: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaleAssumptions {
    /// `max ‖L_tⁿ‖_{0→0} / Mⁿ`.
    pub c_lypert1: f64,
    /// Smallest `C` with `‖L_tⁿ f‖_1 ≤ C αⁿ ‖f‖_1 + C Mⁿ ‖f‖_0` on sampled `f`.
    pub c_lypert2: f64,
    /// `max ‖Q_j‖_{i→i-j}`.
    pub c_qbound: f64,
    /// `max ‖Δ_j(t)‖_{i→i-j} / t^j`.
    pub c_cksmooth: f64,
}

impl ScaleAssumptions {
    pub fn max(&self) -> f64 {
        self.c_lypert1.max(self.c_lypert2).max(self.c_qbound).max(self.c_cksmooth)
    }
}

impl WeightedScale {
    /// Chains of `depth+1` levels descending with coefficient `α`, a source fed by `Q_1`
    /// and a perturbation that injects `min(t/w, 1)` from the source into every chain level.
    pub fn synthetic(alpha: f64, m: f64, chains: usize, depth: usize, big: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha < m) {
            return Err(Error::InvalidParams("need 0 < α < M".into()));
        }
        let r = alpha / m;
        let n = 2 + chains * (depth + 1);
        let idx = move |c: usize, lvl: usize| 2 + c * (depth + 1) + lvl;
        let mut w0 = vec![1.0; n];
        let w1 = vec![1.0; n];
        let mut w2 = vec![1.0; n];
        w2[1] = big;
        for c in 0..chains {
            for lvl in 0..=depth {
                w0[idx(c, lvl)] = r.powf(lvl as f64 + c as f64 / chains as f64);
                w2[idx(c, lvl)] = big;
            }
        }
        let mut l0 = Array2::zeros((n, n));
        for c in 0..chains {
            for lvl in 1..=depth {
                l0[[idx(c, lvl - 1), idx(c, lvl)]] = alpha;
            }
        }
        let mut q1 = Array2::zeros((n, n));
        q1[[1, 0]] = 1.0;
        let inject = w0.clone();
        let remainder: Remainder = Arc::new(move |t: f64| {
            let mut e = Array2::zeros((n, n));
            for c in 0..chains {
                for lvl in 0..=depth {
                    let i = idx(c, lvl);
                    e[[i, 1]] = (t / inject[i]).min(1.0);
                }
            }
            e
        });
        Ok(WeightedScale { weights: vec![w0, w1, w2], l0, q: vec![q1], remainder, alpha, m })
    }

    pub fn dim(&self) -> usize {
        self.l0.nrows()
    }

    pub fn levels(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn q_k(&self, k: usize) -> Option<&Array2<f64>> {
        if k == 0 {
            Some(&self.l0)
        } else {
            self.q.get(k - 1)
        }
    }

    pub fn l_t(&self, t: f64) -> Array2<f64> {
        let mut l = self.l0.clone();
        let mut tk = 1.0;
        for q in &self.q {
            tk *= t;
            l = l + q * tk;
        }
        l + (self.remainder)(t)
    }

    /// Operator norm from level `from` to level `to`.
    pub fn op_norm(&self, e: &Array2<f64>, from: usize, to: usize) -> f64 {
        let (win, wout) = (&self.weights[from], &self.weights[to]);
        e.outer_iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v.abs() * wout[i] / win[j]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn op_norm_c(&self, e: &Array2<Complex64>, from: usize, to: usize) -> f64 {
        let (win, wout) = (&self.weights[from], &self.weights[to]);
        e.outer_iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v.norm() * wout[i] / win[j]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn vec_norm(&self, x: &ndarray::Array1<f64>, level: usize) -> f64 {
        x.iter().zip(&self.weights[level]).map(|(v, w)| v.abs() * w).fold(0.0, f64::max)
    }

    /// Re-measures the standing assumptions on `samples` values of `t` in `[t_min, t_max]`.
    pub fn verify(&self, t_min: f64, t_max: f64, samples: usize, seed: u64) -> ScaleAssumptions {
        let ts: Vec<f64> = (0..samples)
            .map(|i| t_min * (t_max / t_min).powf(i as f64 / (samples.max(2) - 1) as f64))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs: Vec<ndarray::Array1<f64>> =
            (0..64).map(|_| ndarray::Array1::from_iter((0..self.dim()).map(|_| rng.gen_range(-1.0..1.0)))).collect();
        let (mut c1, mut c2): (f64, f64) = (0.0, 0.0);
        let mut ck: f64 = 0.0;
        for &t in &ts {
            let lt = self.l_t(t);
            let mut pow = Array2::<f64>::eye(self.dim());
            for n in 0..=12 {
                if n > 0 {
                    pow = lt.dot(&pow);
                }
                c1 = c1.max(self.op_norm(&pow, 0, 0) / self.m.powi(n));
                for f in &fs {
                    let g = pow.dot(f);
                    let bound = self.alpha.powi(n) * self.vec_norm(f, 1) + self.m.powi(n) * self.vec_norm(f, 0);
                    c2 = c2.max(self.vec_norm(&g, 1) / bound);
                }
            }
            let mut taylor = Array2::<f64>::zeros((self.dim(), self.dim()));
            for j in 1..=self.levels() {
                if let Some(q) = self.q_k(j - 1) {
                    taylor = taylor + q * t.powi(j as i32 - 1);
                }
                let dj = &lt - &taylor;
                for i in j..=self.levels() {
                    ck = ck.max(self.op_norm(&dj, i, i - j) / t.powi(j as i32));
                }
            }
        }
        let mut cq: f64 = 0.0;
        for (j, q) in self.q.iter().enumerate() {
            for i in (j + 1)..=self.levels() {
                cq = cq.max(self.op_norm(q, i, i - j - 1));
            }
        }
        ScaleAssumptions { c_lypert1: c1, c_lypert2: c2, c_qbound: cq, c_cksmooth: ck }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResolventDomain {
    pub delta: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeReport {
    pub s: usize,
    pub eta: f64,
    pub expected: f64,
    pub slope: f64,
    pub t_grid: Vec<f64>,
    pub errors: Vec<f64>,
}

fn to_complex(a: &Array2<f64>) -> Array2<Complex64> {
    a.mapv(|v| Complex64::new(v, 0.0))
}

fn inverse(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    a.inv().map_err(|e| Error::SolveFailure(e.to_string()))
}

/// `Σ_{k<s} t^k Σ_{ℓ₁+…+ℓ_j=k} R Q_{ℓ₁} R ⋯ Q_{ℓ_j} R` with `R = (z - L₀)⁻¹`.
pub fn truncated_expansion(r0: &Array2<Complex64>, q: &[Array2<Complex64>], s: usize, t: f64) -> Array2<Complex64> {
    // terms[k] = Σ over compositions of k
    let mut terms: Vec<Array2<Complex64>> = vec![r0.clone()];
    for k in 1..s {
        let mut acc = Array2::<Complex64>::zeros(r0.raw_dim());
        for l in 1..=k {
            if let Some(ql) = q.get(l - 1) {
                acc = acc + r0.dot(&ql.dot(&terms[k - l]));
            }
        }
        terms.push(acc);
    }
    terms.iter().enumerate().fold(Array2::zeros(r0.raw_dim()), |acc, (k, m)| acc + m * Complex64::new(t.powi(k as i32), 0.0))
}

/// Slope of `‖(z - L_t)⁻¹ - R_s(t)‖_{Bˢ→B⁰}` against `t` on the synthetic scale.
pub fn resolvent_expansion_validate(
    scale: &WeightedScale,
    z: Complex64,
    s: usize,
    t_grid: &[f64],
    domain: ResolventDomain,
) -> Result<SlopeReport> {
    if s == 0 || s > scale.levels() {
        return Err(Error::InvalidParams(format!("s must be in 1..={}", scale.levels())));
    }
    let ev = to_complex(&scale.l0).eigvals().map_err(|e| Error::SolveFailure(e.to_string()))?;
    let dist = ev.iter().map(|l| (z - l).norm()).fold(f64::INFINITY, f64::min);
    if dist < domain.delta || z.norm() < domain.rho {
        return Err(Error::DomainViolation(format!("distance {dist:.3e} to the spectrum, |z| = {:.3e}", z.norm())));
    }
    let id = identity(scale.dim());
    let r0 = inverse(&(&id * z - &to_complex(&scale.l0)))?;
    let q: Vec<Array2<Complex64>> = scale.q.iter().map(to_complex).collect();
    let errors = t_grid
        .iter()
        .map(|&t| {
            let rt = inverse(&(&id * z - &to_complex(&scale.l_t(t))))?;
            Ok(scale.op_norm_c(&(rt - truncated_expansion(&r0, &q, s, t)), s, 0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let eta = (domain.rho / scale.alpha).ln() / (scale.m / scale.alpha).ln();
    Ok(SlopeReport {
        s,
        eta,
        expected: s as f64 - 1.0 + eta,
        slope: loglog_slope(t_grid, &errors),
        t_grid: t_grid.to_vec(),
        errors,
    })
}

/// The same harness on Galerkin matrices of a map family, in the spectral norm.
pub fn resolvent_expansion_galerkin(family: &PerturbationFamily, z: Complex64, s: usize, t_grid: &[f64], n: usize) -> Result<SlopeReport> {
    let l0 = galerkin(&family.at(0.0), n)?.matrix;
    let id = identity(l0.nrows());
    let r0 = inverse(&(&id * z - &l0))?;
    let q = (1..s).map(|k| taylor_q(family, k, n)).collect::<Result<Vec<_>>>()?;
    let errors = t_grid
        .iter()
        .map(|&t| {
            let rt = inverse(&(&id * z - &galerkin(&family.at(t), n)?.matrix))?;
            norm2(&(rt - truncated_expansion(&r0, &q, s, t)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SlopeReport { s, eta: 1.0, expected: s as f64, slope: loglog_slope(t_grid, &errors), t_grid: t_grid.to_vec(), errors })
}
