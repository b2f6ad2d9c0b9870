use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::maps::{map_distance, TorusMap};
use crate::norms::{cq_norm_torus, geometric_rate, norm_pq, NormParams};
use crate::observable::{sup_inverse_stretch, Obs, Observable, Transferred};
use crate::transfer::{galerkin_weighted, GalerkinOperator};
use crate::trig::TrigObservable;

const CHECK_GRID: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelMember {
    pub weight: f64,
    pub map: TorusMap,
    pub g: TrigObservable,
}

/// Finite random walk: map `T_i` is chosen with probability `w_i g_i(x)` at `x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomKernel {
    pub members: Vec<KernelMember>,
}

fn grid_points() -> impl Iterator<Item = Vec2> {
    (0..CHECK_GRID * CHECK_GRID).map(|i| [(i / CHECK_GRID) as f64 / CHECK_GRID as f64, (i % CHECK_GRID) as f64 / CHECK_GRID as f64])
}

impl RandomKernel {
    pub fn new(members: Vec<KernelMember>) -> Result<Self> {
        let k = RandomKernel { members };
        k.validate()?;
        Ok(k)
    }

    pub fn deterministic(map: TorusMap) -> Self {
        RandomKernel { members: vec![KernelMember { weight: 1.0, map, g: TrigObservable::constant(1.0) }] }
    }

    /// Builds `g_m` as the residual `(1 - Σ_{i<m} w_i g_i) / w_m`; fails if it goes negative.
    pub fn with_residual(maps: Vec<TorusMap>, weights: Vec<f64>, gs: Vec<TrigObservable>) -> Result<Self> {
        if maps.len() != weights.len() || gs.len() + 1 != maps.len() {
            return Err(Error::InvalidParams("need m maps, m weights and m-1 densities".into()));
        }
        let wm = *weights.last().unwrap();
        if wm <= 0.0 {
            return Err(Error::InvalidParams("last weight must be positive".into()));
        }
        let mut rest = TrigObservable::constant(1.0);
        for (w, g) in weights.iter().zip(&gs) {
            rest = rest.add(&g.scaled(Complex64::new(-w, 0.0)));
        }
        let last = rest.scaled(Complex64::new(1.0 / wm, 0.0));
        let mut all = gs;
        all.push(last);
        let members =
            maps.into_iter().zip(weights).zip(all).map(|((map, weight), g)| KernelMember { weight, map, g }).collect();
        Self::new(members)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidParams("empty kernel".into()));
        }
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        if self.members.iter().any(|m| m.weight < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("weights must be nonnegative and sum to 1 (sum {total})")));
        }
        for x in grid_points() {
            let mut s = 0.0;
            for m in &self.members {
                let g = m.g.value(x).re;
                if g < -1e-12 {
                    return Err(Error::InvalidParams(format!("density negative ({g}) at {x:?}")));
                }
                s += m.weight * g;
            }
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParams(format!("Σ w g = {s} at {x:?}")));
            }
        }
        Ok(())
    }

    /// Same maps with `g_i ↦ 1 + c (g_i - 1)`.
    pub fn scaled_densities(&self, c: f64) -> Result<Self> {
        let members = self
            .members
            .iter()
            .map(|m| KernelMember { g: m.g.add_constant(-1.0).scaled(Complex64::new(c, 0.0)).add_constant(1.0), ..m.clone() })
            .collect();
        Self::new(members)
    }
}

/// `Σ_i w_i |g_i|_{C^{p+q}} d_{C^{r+1}}(T_i, T)`.
pub fn delta_size(k: &RandomKernel, base: &TorusMap, p: usize, q: f64, r: usize) -> f64 {
    k.members
        .iter()
        .map(|m| {
            let d = map_distance(&m.map, base, r as u32 + 1);
            if d == 0.0 {
                0.0
            } else {
                m.weight * cq_norm_torus(&m.g, p as f64 + q, 48) * d
            }
        })
        .sum()
}

/// `L^n_{μ,g} h` evaluated by recursion over the members.
pub struct RandomTransferred {
    pub kernel: RandomKernel,
    pub inner: Obs,
    pub n: usize,
    scale: f64,
}

impl RandomTransferred {
    pub fn new(kernel: &RandomKernel, inner: Obs, n: usize) -> Self {
        let stretch = kernel.members.iter().map(|m| sup_inverse_stretch(&m.map)).fold(0.0, f64::max).max(1.0);
        let gscale = kernel
            .members
            .iter()
            .map(|m| 1.0 / (std::f64::consts::TAU * m.g.max_frequency().max(1.0)))
            .fold(f64::INFINITY, f64::min);
        let scale = (inner.feature_scale() / stretch.powi(n as i32)).min(gscale);
        RandomTransferred { kernel: kernel.clone(), inner, n, scale }
    }

    fn eval(&self, x: Vec2, n: usize) -> Result<Complex64> {
        if n == 0 {
            return self.inner.value(x);
        }
        let mut acc = Complex64::default();
        for m in &self.kernel.members {
            let y = m.map.invert(x)?;
            let g = m.g.value(y).re;
            if g == 0.0 {
                continue;
            }
            acc += self.eval(y, n - 1)? * (m.weight * g / m.map.jacobian_det(y).abs());
        }
        Ok(acc)
    }
}

impl Observable for RandomTransferred {
    fn value(&self, x: Vec2) -> Result<Complex64> {
        self.eval(x, self.n)
    }

    fn feature_scale(&self) -> f64 {
        self.scale
    }
}

pub fn transfer_random(k: &RandomKernel, h: Obs) -> RandomTransferred {
    RandomTransferred::new(k, h, 1)
}

/// Averaged Galerkin matrix `Σ_i w_i M(T_i, g_i)`.
pub fn galerkin_random(k: &RandomKernel, n: usize) -> Result<GalerkinOperator> {
    let mut acc: Option<GalerkinOperator> = None;
    for m in &k.members {
        let op = galerkin_weighted(&m.map, Some(&m.g), n)?;
        let scaled = op.matrix * Complex64::new(m.weight, 0.0);
        acc = Some(match acc {
            None => GalerkinOperator { n, matrix: scaled, map: m.map.clone() },
            Some(mut a) => {
                a.matrix = a.matrix + scaled;
                a
            }
        });
    }
    acc.ok_or_else(|| Error::InvalidParams("empty kernel".into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomLyTable {
    pub values: Vec<f64>,
    pub rate: f64,
    pub m_target: f64,
    pub within_target: bool,
}

/// `‖L^n_{μ,g} h‖_{0,q}` for `n ≤ n_max` and its geometric growth rate.
pub fn random_ly_experiment(k: &RandomKernel, h: Obs, params: &NormParams, n_max: usize, m_target: f64) -> Result<RandomLyTable> {
    if n_max > 5 {
        return Err(Error::InvalidParams("n_max must be at most 5".into()));
    }
    let p0 = params.with_pq(0, params.q);
    let values = (0..=n_max)
        .map(|n| {
            let ln: Obs = if n == 0 { h.clone() } else { Arc::new(RandomTransferred::new(k, h.clone(), n)) };
            Ok(norm_pq(ln.as_ref(), &p0)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rate = geometric_rate(&values);
    Ok(RandomLyTable { values, rate, m_target, within_target: rate <= m_target })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapDistRow {
    pub observable: usize,
    pub numerator: f64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapDistTable {
    pub distance: f64,
    pub rows: Vec<MapDistRow>,
    pub fitted_c: f64,
}

/// `‖L_T h - L_T̃ h‖_{p-1,q+1} / (d_{C^{r+1}}(T, T̃) ‖h‖_{p,q})` over a corpus.
pub fn mapdist_experiment(t: &TorusMap, tt: &TorusMap, corpus: &[Obs], params: &NormParams) -> Result<MapDistTable> {
    params.validate()?;
    if params.p == 0 {
        return Err(Error::InvalidParams("the weak norm needs p ≥ 1".into()));
    }
    let distance = map_distance(t, tt, params.r as u32 + 1);
    let weak = params.with_pq(params.p - 1, params.q + 1.0);
    let mut rows = Vec::with_capacity(corpus.len());
    for (i, h) in corpus.iter().enumerate() {
        let diff = crate::observable::Combination::difference(
            Arc::new(Transferred::new(t, h.clone(), 1)),
            Arc::new(Transferred::new(tt, h.clone(), 1)),
        );
        let numerator = if distance == 0.0 { 0.0 } else { norm_pq(&diff, &weak)?.value };
        let norm = norm_pq(h.as_ref(), params)?.value;
        let ratio = if distance == 0.0 { 0.0 } else { numerator / (distance * norm) };
        rows.push(MapDistRow { observable: i, numerator, norm, ratio });
    }
    let fitted_c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(MapDistTable { distance, rows, fitted_c })
}
