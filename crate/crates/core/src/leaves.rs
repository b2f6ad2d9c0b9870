//! Admissible graphs, the graph transform, leaf covers and the decomposition of vector fields.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bump::{kernel, kernel_deriv, Plateau};
use crate::error::{Error, Result};
use crate::geom::{self, Mat2, Vec2};
use crate::maps::{cone_invariant, hyperbolicity_constants, ChartAtlas, HyperbolicityReport, TorusMap};
use crate::quad::{gauss_legendre, Cheb};

/// Geometric constants shared by graphs and covers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafGeometry {
    pub delta: f64,
    pub a_ratio: f64,
    pub k_bound: f64,
    pub r: usize,
    pub degree: usize,
    pub c_overlap: usize,
    pub hyp: HyperbolicityReport,
    pub atlas: ChartAtlas,
}

impl LeafGeometry {
    pub fn new(t: &TorusMap, delta: f64, a_ratio: f64, k_bound: f64, r: usize) -> Result<Self> {
        let hyp = hyperbolicity_constants(t, 32)?;
        Self::with_report(t, hyp, delta, a_ratio, k_bound, r)
    }

    pub fn with_report(
        t: &TorusMap,
        hyp: HyperbolicityReport,
        delta: f64,
        a_ratio: f64,
        k_bound: f64,
        r: usize,
    ) -> Result<Self> {
        if delta <= 0.0 || a_ratio <= 1.0 || k_bound <= 0.0 {
            return Err(Error::InvalidParams("need δ > 0, A > 1, K > 0".into()));
        }
        // chart radius chosen so that Aδ < r_i/6
        let radius = 6.0 * a_ratio * delta * 1.05;
        let nu = hyp.nu;
        let holds = |k: f64| threshold(nu, k) * (a_ratio - 1.0) > a_ratio;
        let mut hyp = hyp;
        if !holds(hyp.kappa) {
            // narrow the cone until the A-condition holds, then re-check invariance
            let (mut lo, mut hi) = (0.0, hyp.kappa);
            if !holds(1e-9) {
                return Err(Error::InvalidParams(format!(
                    "A = {a_ratio} too small for ν = {:.4} at any cone aperture",
                    hyp.nu
                )));
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if holds(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let k = 0.95 * lo;
            let pts: Vec<Vec2> = (0..32 * 32).map(|i| [(i / 32) as f64 / 32.0, (i % 32) as f64 / 32.0]).collect();
            if !cone_invariant(t, &pts, k)? {
                return Err(Error::InvalidParams(format!(
                    "A = {a_ratio} needs cone aperture below {k:.4}, where the cone is no longer invariant"
                )));
            }
            hyp.kappa = k;
        }
        let atlas = ChartAtlas::new(t, radius, hyp.kappa)?;
        let g = LeafGeometry { delta, a_ratio, k_bound, r, degree: 16, c_overlap: 3, hyp, atlas };
        Ok(g)
    }

    pub fn default_for(t: &TorusMap) -> Result<Self> {
        Self::new(t, 0.05, 3.0, 10.0, 3)
    }

    /// `ν⁻¹ / ((1+κ)² √(1+4κ²))`.
    pub fn expansion_threshold(&self) -> f64 {
        threshold(self.hyp.nu, self.hyp.kappa)
    }

    pub fn cone(&self) -> f64 {
        self.atlas.cone
    }

    /// Half-width of the chart box `(-2r/3, 2r/3)`.
    pub fn box_half(&self) -> f64 {
        2.0 * self.atlas.radius / 3.0
    }
}

fn threshold(nu: f64, k: f64) -> f64 {
    1.0 / nu / ((1.0 + k).powi(2) * (1.0 + 4.0 * k * k).sqrt())
}

/// Graph `ξ = χ(η)` in chart `chart`, over `[center - full_radius, center + full_radius]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleGraph {
    pub chart: usize,
    pub center: f64,
    pub radius: f64,
    pub full_radius: f64,
    pub chi: Cheb,
    pub slope_sup: f64,
    pub crp1: f64,
}

const SUP_SAMPLES: usize = 200;

fn slope_sup(chi: &Cheb) -> f64 {
    let d = chi.derivative();
    let mut pts = Cheb::nodes(chi.a, chi.b, 64);
    pts.extend([chi.a, chi.b]);
    pts.into_iter().map(|x| d.eval(x).abs()).fold(0.0, f64::max)
}

/// `max(sup|χ - χ(center)|, sup|χ'|, …, sup|χ^{(order)}|)`.
fn graph_cr_norm(chi: &Cheb, center: f64, order: usize) -> f64 {
    let c0 = chi.eval(center);
    let mut m = (0..=SUP_SAMPLES)
        .map(|i| {
            let x = chi.a + (chi.b - chi.a) * i as f64 / SUP_SAMPLES as f64;
            (chi.eval(x) - c0).abs()
        })
        .fold(0.0, f64::max);
    let mut d = chi.clone();
    for _ in 0..order {
        d = d.derivative();
        m = m.max(d.sup_abs(SUP_SAMPLES));
    }
    m
}

impl AdmissibleGraph {
    pub fn new(chart: usize, center: f64, radius: f64, full_radius: f64, chi: Cheb, r: usize) -> Self {
        let slope_sup = slope_sup(&chi);
        let crp1 = graph_cr_norm(&chi, center, r + 1);
        AdmissibleGraph { chart, center, radius, full_radius, chi, slope_sup, crp1 }
    }

    /// Horizontal graph at height `offset`.
    pub fn flat(chart: usize, center: f64, offset: f64, g: &LeafGeometry) -> Self {
        let full = g.a_ratio * g.delta;
        let chi = Cheb::affine(center - full, center + full, offset, 0.0);
        Self::new(chart, center, g.delta, full, chi, g.r)
    }

    /// Random cubic graph well inside the cone and the `C^{r+1}` bound.
    pub fn random<R: Rng>(rng: &mut R, g: &LeafGeometry) -> Self {
        let chart = rng.gen_range(0..g.atlas.centers.len());
        let full = g.a_ratio * g.delta;
        let lim = g.box_half() / 4.0;
        let center = rng.gen_range(-lim..lim);
        let offset = rng.gen_range(-lim..lim);
        let c = 0.8 * g.cone();
        let a = rng.gen_range(-0.4..0.4) * c;
        let b = rng.gen_range(-0.2..0.2) * c / full;
        let cc = rng.gen_range(-0.1..0.1) * c / (full * full);
        let chi = Cheb::fit(center - full, center + full, g.degree, |x| {
            let d = x - center;
            offset + a * d + b * d * d + cc * d * d * d
        });
        Self::new(chart, center, g.delta, full, chi, g.r)
    }

    pub fn xi(&self, eta: f64) -> f64 {
        self.chi.eval(eta)
    }

    /// Lifted torus point of the graph at parameter `eta`.
    pub fn point(&self, atlas: &ChartAtlas, eta: f64) -> Vec2 {
        atlas.to_torus(self.chart, [eta, self.xi(eta)])
    }

    /// Unit tangent in torus coordinates.
    pub fn tangent(&self, atlas: &ChartAtlas, eta: f64) -> Vec2 {
        let s = self.chi.derivative().eval(eta);
        geom::normalize(geom::add(atlas.stable(), geom::scale(s, atlas.normal())))
    }

    pub fn is_admissible(&self, g: &LeafGeometry) -> bool {
        let b = g.box_half();
        let in_box = self.center.abs() + self.full_radius < b + 1e-12
            && (0..=20).all(|i| {
                let x = self.chi.a + (self.chi.b - self.chi.a) * i as f64 / 20.0;
                self.chi.eval(x).abs() < b
            });
        self.slope_sup <= g.cone() && self.crp1 <= g.k_bound && in_box
    }

    /// Leaf part `[center - radius, center + radius]`.
    pub fn leaf_interval(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }
}

/// Gauss–Legendre quadrature over the leaf of `f∘(Id, χ)·√(1+χ'²)`; `f` takes chart coordinates.
pub fn leaf_integrate(w: &AdmissibleGraph, f: impl Fn(Vec2) -> Complex64, quad_n: usize) -> Complex64 {
    let (x, wt) = gauss_legendre(quad_n);
    let d = w.chi.derivative();
    let (lo, hi) = w.leaf_interval();
    let half = 0.5 * (hi - lo);
    x.iter()
        .zip(&wt)
        .map(|(s, q)| {
            let eta = lo + half * (s + 1.0);
            let sl = d.eval(eta);
            f([eta, w.xi(eta)]) * (q * half * (1.0 + sl * sl).sqrt())
        })
        .sum()
}

/// `T⁻ⁿ` of the full leaf of `w`, in the rotated frame based at the preimage of its center.
struct Preimage<'a> {
    map: &'a TorusMap,
    atlas: &'a ChartAtlas,
    w: &'a AdmissibleGraph,
    n: usize,
    origin: Vec2,
    slope: Cheb,
}

impl<'a> Preimage<'a> {
    fn new(map: &'a TorusMap, atlas: &'a ChartAtlas, w: &'a AdmissibleGraph, n: usize) -> Result<Self> {
        let slope = w.chi.derivative();
        let mut pc = Preimage { map, atlas, w, n, origin: [0.0, 0.0], slope };
        pc.origin = pc.lifted(w.center)?.0;
        Ok(pc)
    }

    /// Lifted `T⁻ⁿ(point(σ))` and its σ-derivative.
    fn lifted(&self, sigma: f64) -> Result<(Vec2, Vec2)> {
        let mut x = self.w.point(self.atlas, sigma);
        let mut v = geom::add(self.atlas.stable(), geom::scale(self.slope.eval(sigma), self.atlas.normal()));
        let ainv = self.map.linear_inverse();
        for _ in 0..self.n {
            x = self.map.lift_invert(x, geom::mat_vec(&ainv, x))?;
            v = geom::solve(&self.map.differential(x), v);
        }
        Ok((x, v))
    }

    /// `(F, G)` and `(F', G')` in the frame `(e_s, e_n)` at `origin`.
    fn coords(&self, sigma: f64) -> Result<(Vec2, Vec2)> {
        let (x, v) = self.lifted(sigma)?;
        let d = geom::sub(x, self.origin);
        let (es, en) = (self.atlas.stable(), self.atlas.normal());
        Ok(([geom::dot(d, es), geom::dot(d, en)], [geom::dot(v, es), geom::dot(v, en)]))
    }

    fn sigma_range(&self) -> (f64, f64) {
        (self.w.center - self.w.full_radius, self.w.center + self.w.full_radius)
    }

    /// Solves `F(σ) = eta` by safeguarded Newton on the full leaf.
    fn invert_f(&self, eta: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.sigma_range();
        let f_lo = self.coords(lo)?.0[0] - eta;
        let f_hi = self.coords(hi)?.0[0] - eta;
        if f_lo.signum() == f_hi.signum() {
            return Err(Error::ExpansionTooWeak { measured: f64::NAN, required: f64::NAN });
        }
        let increasing = f_hi > f_lo;
        let mut s = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (c, d) = self.coords(s)?;
            let f = c[0] - eta;
            if f.abs() < 1e-14 {
                return Ok(s);
            }
            if (f > 0.0) == increasing {
                hi = s;
            } else {
                lo = s;
            }
            let step = s - f / d[0];
            s = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(s)
    }

    /// Geometric-mean per-step expansion `min |F'|^{1/n}` over samples of the full leaf.
    fn expansion(&self) -> Result<f64> {
        let (lo, hi) = self.sigma_range();
        let m = 32;
        let mut e = f64::INFINITY;
        for i in 0..=m {
            let s = lo + (hi - lo) * i as f64 / m as f64;
            e = e.min(self.coords(s)?.1[0].abs());
        }
        Ok(e.powf(1.0 / self.n as f64))
    }
}

/// Minimal per-step expansion of `F` along `T⁻ⁿ` of the full leaf.
pub fn base_expansion(map: &TorusMap, g: &LeafGeometry, w: &AdmissibleGraph, n: usize) -> Result<f64> {
    Preimage::new(map, &g.atlas, w, n)?.expansion()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub half_width: f64,
    pub plateau: f64,
}

impl BumpSpec {
    pub fn value(&self, eta: f64) -> f64 {
        Plateau::new(self.plateau).value((eta - self.center) / self.half_width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverLeaf {
    pub graph: AdmissibleGraph,
    pub bump: BumpSpec,
    /// Own-chart `η` minus the common-frame `η`.
    pub shift: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafCover {
    pub source: AdmissibleGraph,
    pub n: usize,
    pub gamma: f64,
    pub leaves: Vec<CoverLeaf>,
    pub overlap: usize,
    /// `T⁻ⁿW` in the common frame.
    pub range: (f64, f64),
    pub expansion: f64,
}

fn check_expansion(g: &LeafGeometry, measured: f64) -> Result<()> {
    let required = g.expansion_threshold();
    if measured < required {
        return Err(Error::ExpansionTooWeak { measured, required });
    }
    Ok(())
}

fn build_cover(map: &TorusMap, g: &LeafGeometry, w: &AdmissibleGraph, n: usize, gamma: f64) -> Result<LeafCover> {
    if n == 0 {
        return Err(Error::InvalidParams("cover needs n ≥ 1".into()));
    }
    if gamma < 1.0 {
        return Err(Error::InvalidParams("γ must be at least 1".into()));
    }
    let pc = Preimage::new(map, &g.atlas, w, n)?;
    let expansion = pc.expansion()?;
    check_expansion(g, expansion)?;
    let (a, b) = (pc.coords(w.center - w.radius)?.0[0], pc.coords(w.center + w.radius)?.0[0]);
    let (lo, hi) = (a.min(b), a.max(b));
    let len = hi - lo;
    let rad = g.delta / gamma;
    let full = g.a_ratio * rad;
    let count = (len / (2.0 * rad)).floor() as usize + 1;
    let half_spacing = len / (2.0 * count as f64);
    let half_width = 0.5 * (half_spacing + rad);
    let plateau = ((2.0 * half_spacing - half_width) / half_width).clamp(0.0, 0.9);
    let (es, en) = (g.atlas.stable(), g.atlas.normal());
    let mut leaves = Vec::with_capacity(count);
    for j in 0..count {
        let c = lo + (2 * j + 1) as f64 * half_spacing;
        let sc = pc.invert_f(c)?;
        let p = geom::add(pc.origin, geom::add(geom::scale(c, es), geom::scale(pc.coords(sc)?.0[1], en)));
        let chart = g.atlas.nearest(geom::wrap(p));
        let cc = g.atlas.centers[chart];
        let q = geom::add(cc, geom::wrap_centered(geom::sub(p, cc)));
        let int_shift = geom::sub(p, q);
        let base = geom::sub(geom::sub(pc.origin, int_shift), cc);
        let (d_eta, d_xi) = (geom::dot(base, es), geom::dot(base, en));
        let own = c + d_eta;
        let nodes = Cheb::nodes(own - full, own + full, g.degree);
        let mut vals = Vec::with_capacity(nodes.len());
        for eta in nodes {
            let s = pc.invert_f(eta - d_eta)?;
            vals.push(pc.coords(s)?.0[1] + d_xi);
        }
        let chi = Cheb::from_values(own - full, own + full, &vals);
        let graph = AdmissibleGraph::new(chart, own, rad, full, chi, g.r);
        leaves.push(CoverLeaf { graph, bump: BumpSpec { center: own, half_width, plateau }, shift: d_eta });
    }
    let mut cover = LeafCover { source: w.clone(), n, gamma, leaves, overlap: 0, range: (lo, hi), expansion };
    cover.overlap = cover.max_overlap(400);
    Ok(cover)
}

/// Graphs covering `T⁻¹W`, contained in `T⁻¹` of the full leaf.
pub fn graph_transform(map: &TorusMap, g: &LeafGeometry, w: &AdmissibleGraph) -> Result<Vec<AdmissibleGraph>> {
    Ok(build_cover(map, g, w, 1, 1.0)?.leaves.into_iter().map(|l| l.graph).collect())
}

/// `γ`-admissible leaves covering `T⁻ⁿW` with a subordinate partition of unity.
pub fn leaf_cover(map: &TorusMap, g: &LeafGeometry, w: &AdmissibleGraph, n: usize, gamma: f64) -> Result<LeafCover> {
    build_cover(map, g, w, n, gamma)
}

impl LeafCover {
    fn raw(&self, j: usize, eta_common: f64) -> f64 {
        let l = &self.leaves[j];
        l.bump.value(eta_common + l.shift)
    }

    pub fn partition_sum(&self, eta_common: f64) -> f64 {
        (0..self.leaves.len()).map(|j| self.rho_common(j, eta_common)).sum()
    }

    fn rho_common(&self, j: usize, eta_common: f64) -> f64 {
        let total: f64 = (0..self.leaves.len()).map(|i| self.raw(i, eta_common)).sum();
        if total == 0.0 {
            0.0
        } else {
            self.raw(j, eta_common) / total
        }
    }

    /// `ρ_j` in the own chart coordinate of leaf `j`.
    pub fn rho(&self, j: usize, eta_own: f64) -> f64 {
        self.rho_common(j, eta_own - self.leaves[j].shift)
    }

    /// Largest number of bumps that are positive at a common point of `T⁻ⁿW`.
    pub fn max_overlap(&self, m: usize) -> usize {
        (0..=m)
            .map(|i| {
                let e = self.range.0 + (self.range.1 - self.range.0) * i as f64 / m as f64;
                (0..self.leaves.len()).filter(|&j| self.raw(j, e) > 0.0).count()
            })
            .max()
            .unwrap_or(0)
    }

    /// Support of `ρ_j` lies strictly inside the leaf `W_j`.
    pub fn supports_inside(&self) -> bool {
        self.leaves.iter().all(|l| l.bump.half_width < l.graph.radius)
    }

    /// Sampled `C^{r+1}` size of `ρ_j` along its leaf.
    pub fn rho_norm(&self, j: usize, order: usize) -> f64 {
        let l = &self.leaves[j];
        let (a, b) = (l.bump.center - l.bump.half_width, l.bump.center + l.bump.half_width);
        let m = 2000;
        let h = (b - a) / m as f64;
        let mut vals: Vec<f64> = (0..=m).map(|i| self.rho(j, a + i as f64 * h)).collect();
        let mut best = vals.iter().fold(0.0f64, |x, v| x.max(v.abs()));
        for _ in 0..order {
            vals = vals.windows(2).map(|w| (w[1] - w[0]) / h).collect();
            best = best.max(vals.iter().fold(0.0f64, |x, v| x.max(v.abs())));
        }
        best
    }

    /// Exact preimages `T⁻ⁿ(W)` of `m` points of the source leaf, paired with their common `η`.
    pub fn sample_preimages(&self, map: &TorusMap, g: &LeafGeometry, m: usize) -> Result<Vec<(f64, Vec2)>> {
        let pc = Preimage::new(map, &g.atlas, &self.source, self.n)?;
        let (lo, hi) = self.source.leaf_interval();
        (0..m)
            .map(|i| {
                let s = lo + (hi - lo) * (i as f64 + 0.5) / m as f64;
                let (x, _) = pc.lifted(s)?;
                let d = geom::sub(x, pc.origin);
                Ok((geom::dot(d, g.atlas.stable()), x))
            })
            .collect()
    }
}

/// Vertical distance from a torus point to the nearest leaf part of `graphs`.
pub fn distance_to_leaves(g: &LeafGeometry, graphs: &[AdmissibleGraph], x: Vec2) -> f64 {
    graphs
        .iter()
        .filter_map(|w| {
            let c = g.atlas.centers[w.chart];
            let q = geom::add(c, geom::wrap_centered(geom::sub(x, c)));
            let p = g.atlas.from_torus(w.chart, q);
            let (lo, hi) = w.leaf_interval();
            (p[0] >= lo - 1e-12 && p[0] <= hi + 1e-12).then(|| (p[1] - w.xi(p[0])).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Splitting `v = w^u + w^s` along `Tⁿ(W_j)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorFieldDecomposition {
    pub leaf: AdmissibleGraph,
    pub n: usize,
    pub eps: f64,
    pub sigma: Vec<f64>,
    pub points: Vec<Vec2>,
    pub w_u: Vec<Vec2>,
    pub w_s: Vec<Vec2>,
    /// `DTⁿ(x)⁻¹ w^u(Tⁿx)`.
    pub pullback: Vec<Vec2>,
    pub reconstruction_error: f64,
    pub normal_component: f64,
    pub ws_cr: f64,
    pub wu_pull_sup: f64,
    pub wu_pull_norm: f64,
}

/// Forward lifted orbit: `(Tⁿx, DTⁿ(x))`.
fn forward(map: &TorusMap, x: Vec2, n: usize) -> (Vec2, Mat2) {
    let mut y = x;
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..n {
        m = geom::mat_mul(&map.differential(y), &m);
        y = map.lift(y);
    }
    (y, m)
}

/// `(B/D, D, A, τ_y)` for `DTⁿ(x)` in the frames `(τ_x, e_n)` and `(τ_y, e_n)`.
fn frame_coeffs(m: &Mat2, tau_x: Vec2, en: Vec2) -> Result<(f64, f64, f64, Vec2)> {
    let img = geom::mat_vec(m, tau_x);
    let a = geom::norm(img);
    let tau_y = geom::scale(1.0 / a, img);
    let me = geom::mat_vec(m, en);
    let basis = [[tau_y[0], en[0]], [tau_y[1], en[1]]];
    let bd = geom::solve(&basis, me);
    let d = bd[1];
    if !d.is_finite() || d.abs() < 1e-300 || !a.is_finite() || a < 1e-300 {
        return Err(Error::SingularFrame(d));
    }
    Ok((bd[0] / d, d, a, tau_y))
}

/// Decomposes `v` along `Tⁿ(W_j)` into a part tangent to the leaf and a part in the mollified `DTⁿ` vertical.
///
/// `smooth` is the Hölder order `p+q` used for the pulled-back unstable part.
pub fn decompose_vector_field(
    map: &TorusMap,
    g: &LeafGeometry,
    n: usize,
    wj: &AdmissibleGraph,
    v: impl Fn(Vec2) -> Vec2,
    eps: f64,
    smooth: f64,
) -> Result<VectorFieldDecomposition> {
    let atlas = &g.atlas;
    let en = atlas.normal();
    let slope = wj.chi.derivative();
    let u_at = |s: f64| -> Result<f64> {
        let x = wj.point(atlas, s);
        let tau = geom::normalize(geom::add(atlas.stable(), geom::scale(slope.eval(s), en)));
        let (_, m) = forward(map, x, n);
        Ok(frame_coeffs(&m, tau, en)?.0)
    };
    let (gx, gw) = gauss_legendre(24);
    let u_eps = |s: f64| -> Result<f64> {
        // ∫ U(s - εu) θ(u) du over two panels split at u = 0
        let mut acc = 0.0;
        for (lo, hi) in [(-1.0, 0.0), (0.0, 1.0)] {
            let half = 0.5 * (hi - lo);
            for (x, w) in gx.iter().zip(&gw) {
                let u = lo + half * (x + 1.0);
                acc += w * half * kernel(u) * u_at(s - eps * u)?;
            }
        }
        Ok(acc)
    };

    let (lo, hi) = wj.leaf_interval();
    let deg = 24;
    let sigma = Cheb::nodes(lo, hi, deg);
    let mut points = Vec::new();
    let (mut w_u, mut w_s, mut pullback) = (Vec::new(), Vec::new(), Vec::new());
    let (mut rec, mut nrm) = (0.0f64, 0.0f64);
    for &s in &sigma {
        let x = wj.point(atlas, s);
        let tau_x = geom::normalize(geom::add(atlas.stable(), geom::scale(slope.eval(s), en)));
        let (y, m) = forward(map, x, n);
        let (u, _, _, tau_y) = frame_coeffs(&m, tau_x, en)?;
        let ue = if n == 0 { u } else { u_eps(s)? };
        let vy = v(geom::wrap(y));
        let basis = [[tau_y[0], en[0]], [tau_y[1], en[1]]];
        let c = geom::solve(&basis, vy);
        let wu = geom::add(geom::scale(ue * c[1], tau_y), geom::scale(c[1], en));
        let ws = geom::scale(c[0] - ue * c[1], tau_y);
        let pb = geom::solve(&m, wu);
        rec = rec.max(geom::norm(geom::sub(geom::add(wu, ws), vy)));
        nrm = nrm.max(geom::dot(ws, geom::perp(tau_y)).abs());
        points.push(y);
        w_u.push(wu);
        w_s.push(ws);
        pullback.push(pb);
    }
    let comp_norm = |vals: &[Vec2], s: f64| -> f64 {
        (0..2)
            .map(|k| {
                let c: Vec<f64> = vals.iter().map(|v| v[k]).collect();
                Cheb::from_values(lo, hi, &c).cq_norm(s, 400)
            })
            .fold(0.0, f64::max)
    };
    let ws_cr = comp_norm(&w_s, g.r as f64);
    let wu_pull_norm = comp_norm(&pullback, smooth);
    let wu_pull_sup = pullback.iter().map(|p| geom::norm(*p)).fold(0.0, f64::max);
    Ok(VectorFieldDecomposition {
        leaf: wj.clone(),
        n,
        eps,
        sigma,
        points,
        w_u,
        w_s,
        pullback,
        reconstruction_error: rec,
        normal_component: nrm,
        ws_cr,
        wu_pull_sup,
        wu_pull_norm,
    })
}

/// `A_ε φ = θ_ε * φ` for a function on an interval, with optional break points of `φ`.
pub struct Mollified<F> {
    phi: F,
    pub eps: f64,
    breaks: Vec<f64>,
}

pub fn mollify<F: Fn(f64) -> f64>(phi: F, eps: f64) -> Mollified<F> {
    Mollified { phi, eps, breaks: Vec::new() }
}

impl<F: Fn(f64) -> f64> Mollified<F> {
    /// Points where `φ` or its derivative jumps; quadrature panels are split there.
    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    /// `(∫ k(u) φ(x - εu) du, ∫ θ(u) du)` on the same nodes.
    fn integrate(&self, x: f64, k: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut cuts: Vec<f64> = (0..=8).map(|i| -1.0 + 0.25 * i as f64).collect();
        for b in &self.breaks {
            let u = (x - b) / self.eps;
            if u > -1.0 && u < 1.0 {
                cuts.push(u);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (gx, gw) = gauss_legendre(24);
        let (mut acc, mut mass) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            if half <= 0.0 {
                continue;
            }
            for (t, q) in gx.iter().zip(&gw) {
                let u = w[0] + half * (t + 1.0);
                acc += q * half * k(u) * (self.phi)(x - self.eps * u);
                mass += q * half * kernel(u);
            }
        }
        (acc, mass)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (v, mass) = self.integrate(x, kernel);
        v / mass
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.integrate(x, kernel_deriv).0 / self.eps
    }

    /// Sup of `|A_ε φ|` and `|(A_ε φ)'|` over `[a, b]`: grid plus golden refinement.
    pub fn sups(&self, a: f64, b: f64, m: usize) -> (f64, f64) {
        let refine = |f: &dyn Fn(f64) -> f64| -> f64 {
            let h = (b - a) / m as f64;
            let (mut bi, mut bv) = (0, 0.0f64);
            for i in 0..=m {
                let v = f(a + i as f64 * h).abs();
                if v > bv {
                    bv = v;
                    bi = i;
                }
            }
            let (mut lo, mut hi) = ((a + (bi as f64 - 1.0) * h).max(a), (a + (bi as f64 + 1.0) * h).min(b));
            for _ in 0..60 {
                let m1 = lo + (hi - lo) * 0.382;
                let m2 = lo + (hi - lo) * 0.618;
                if f(m1).abs() > f(m2).abs() {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            bv.max(f(0.5 * (lo + hi)).abs())
        };
        (refine(&|x| self.value(x)), refine(&|x| self.deriv(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_leaf_length() {
        let t = TorusMap::cat();
        let g = LeafGeometry::default_for(&t).unwrap();
        let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
        let v = leaf_integrate(&w, |_| Complex64::new(1.0, 0.0), 8);
        assert!((v.re - 2.0 * g.delta).abs() < 1e-15);
    }

    #[test]
    fn tilted_line_length() {
        let t = TorusMap::cat();
        let g = LeafGeometry::default_for(&t).unwrap();
        let a = 0.2;
        let chi = Cheb::affine(-0.15, 0.15, 0.0, a);
        let w = AdmissibleGraph::new(0, 0.0, g.delta, 0.15, chi, g.r);
        let v = leaf_integrate(&w, |_| Complex64::new(1.0, 0.0), 8);
        assert!((v.re - 2.0 * g.delta * (1.0 + a * a).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mollified_constant_is_constant() {
        let m = mollify(|_| 3.0, 1e-2);
        assert!((m.value(0.4) - 3.0).abs() < 1e-10);
    }
}
