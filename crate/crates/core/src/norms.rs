//! Sampled-witness lower bounds for the anisotropic norms `‖h‖_{p,q}`.
//!
//! A witness is a short curve close to the stable direction, a multi-index of
//! chart derivatives and a normalized test function on the curve. Every
//! estimate is a lower bound of the supremum over all witnesses.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bump::Plateau;
use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::maps::TorusMap;
use crate::observable::{Obs, Observable, Transferred};
use crate::quad::Composite;
use crate::smooth::{cq_norm_interval, holder_quotient};
use crate::trig::TrigObservable;

const TAU: f64 = 2.0 * PI;
const NORM_SAMPLES: usize = 400;
const MAX_PLATEAU: f64 = 0.98;
const BOUNDARY_GAP: f64 = 1e-3;
const IMPROVE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub p: usize,
    pub q: f64,
    pub r: usize,
    pub delta: f64,
    pub a_ratio: f64,
    pub k_bound: f64,
    pub gamma0: f64,
    /// Cone aperture for the leaves.
    pub cone: f64,
    /// Stable direction of the chart rotation.
    pub stable: Vec2,
    /// Number of search rounds; each draws a fresh leaf.
    pub n_leaves: usize,
    /// Random test functions tried per leaf before climbing.
    pub n_testfn: usize,
    /// Multi-indices cycled through per level (capped at `k+1`).
    pub n_vf: usize,
    pub seed: u64,
}

impl Default for NormParams {
    fn default() -> Self {
        let s5 = 5f64.sqrt();
        let es = geom::normalize([1.0, -(1.0 + s5) / 2.0]);
        NormParams {
            p: 1,
            q: 0.5,
            r: 3,
            delta: 0.05,
            a_ratio: 3.0,
            k_bound: 10.0,
            gamma0: 1.0,
            cone: 0.3,
            stable: if es[0] < 0.0 { geom::scale(-1.0, es) } else { es },
            n_leaves: 32,
            n_testfn: 8,
            n_vf: 3,
            seed: 1,
        }
    }
}

impl NormParams {
    pub fn for_map(t: &TorusMap) -> Result<Self> {
        Ok(NormParams { stable: t.stable_direction()?, ..Self::default() })
    }

    pub fn with_pq(&self, p: usize, q: f64) -> Self {
        NormParams { p, q, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p as f64 + self.q >= self.r as f64 {
            return Err(Error::InvalidParams("p+q must be < r".into()));
        }
        if self.q < 0.0 {
            return Err(Error::InvalidParams("q must be non-negative".into()));
        }
        if self.n_leaves == 0 || self.n_testfn == 0 || self.n_vf == 0 {
            return Err(Error::InvalidParams("witness budgets must be at least 1".into()));
        }
        if self.delta <= 0.0 || self.cone <= 0.0 {
            return Err(Error::InvalidParams("δ and the cone aperture must be positive".into()));
        }
        Ok(())
    }

    fn normal(&self) -> Vec2 {
        geom::perp(self.stable)
    }
}

/// `C^s` norm of a function on `[a, b]` given by a derivative oracle `f(x, j)`.
pub fn cq_norm(f: impl Fn(f64, usize) -> f64, a: f64, b: f64, s: f64) -> f64 {
    cq_norm_interval(f, a, b, s, NORM_SAMPLES)
}

/// `C^s` norm of a trigonometric polynomial on T², sampled on a `grid×grid` lattice.
pub fn cq_norm_torus(h: &TrigObservable, s: f64, grid: usize) -> f64 {
    let top = s.floor() as u32;
    let frac = s - top as f64;
    let step = 1.0 / grid as f64;
    let mut best: f64 = 0.0;
    let mut top_part: f64 = 0.0;
    for order in 0..=top {
        for i in 0..=order {
            let a = [order - i, i];
            let vals: Vec<f64> = (0..grid * grid)
                .map(|idx| h.partial([(idx / grid) as f64 * step, (idx % grid) as f64 * step], a).re)
                .collect();
            best = best.max(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if order == top && frac > 1e-12 {
                for line in 0..grid {
                    let row: Vec<f64> = (0..grid).map(|j| vals[line * grid + j]).collect();
                    let col: Vec<f64> = (0..grid).map(|j| vals[j * grid + line]).collect();
                    top_part = top_part.max(holder_quotient(&row, step, frac));
                    top_part = top_part.max(holder_quotient(&col, step, frac));
                }
            }
        }
    }
    best + top_part
}

/// Plateau bump times `cos(2πω(η-c) + θ)`, divided by its `C^{class}` norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub half_width: f64,
    pub plateau: f64,
    pub freq: f64,
    pub phase: f64,
    pub class: f64,
    pub norm: f64,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl TestFunction {
    pub fn new(center: f64, half_width: f64, plateau: f64, freq: f64, phase: f64, class: f64) -> Self {
        let mut tf = TestFunction { center, half_width, plateau, freq, phase, class, norm: 1.0 };
        tf.norm = tf.raw_cq(class);
        tf
    }

    /// j-th derivative of the unnormalized function.
    pub fn raw_deriv(&self, eta: f64, j: usize) -> f64 {
        let s = (eta - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let bump = Plateau::new(self.plateau);
        let om = TAU * self.freq;
        let arg = om * (eta - self.center) + self.phase;
        (0..=j)
            .map(|i| {
                let pb = bump.deriv(s, i) / self.half_width.powi(i as i32);
                if pb == 0.0 {
                    return 0.0;
                }
                let m = j - i;
                let osc = if m == 0 { arg.cos() } else { om.powi(m as i32) * (arg + m as f64 * PI / 2.0).cos() };
                binom(j, i) * pb * osc
            })
            .sum()
    }

    pub fn raw_cq(&self, s: f64) -> f64 {
        let (a, b) = self.support();
        cq_norm(|x, j| self.raw_deriv(x, j), a, b, s)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn value(&self, eta: f64) -> f64 {
        self.raw_deriv(eta, 0) / self.norm
    }

    /// Same shape normalized for another class.
    pub fn renormalized(&self, class: f64) -> Self {
        Self::new(self.center, self.half_width, self.plateau, self.freq, self.phase, class)
    }
}

/// A leaf `η ↦ x0 + η e_s + (tilt·η + curvature·η²) e_n`, `|η| ≤ δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafWitness {
    pub x0: Vec2,
    pub tilt: f64,
    pub curvature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub level: usize,
    pub alpha: [usize; 2],
    pub leaf: LeafWitness,
    pub test: TestFunction,
    /// `|∫ ∂^α h · φ_raw|` before normalization.
    pub raw: f64,
}

impl Witness {
    pub fn value_at(&self, class: f64) -> f64 {
        self.raw / self.test.raw_cq(class)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: Option<Witness>,
    pub budget: usize,
    /// Running maximum after each round.
    pub history: Vec<f64>,
}

struct LeafSamples {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    g: Vec<Complex64>,
}

struct Search<'a> {
    h: &'a dyn Observable,
    params: &'a NormParams,
    hints: &'a [Vec2],
    level: usize,
    class: f64,
}

#[derive(Clone, Debug)]
struct Candidate {
    tf: [f64; 4],
    phase: f64,
    raw: f64,
    value: f64,
}

fn canonical_class(s: f64) -> f64 {
    (s * 1e9).round() / 1e9
}

impl<'a> Search<'a> {
    fn alphas(&self) -> Vec<[usize; 2]> {
        let all: Vec<[usize; 2]> = (0..=self.level).map(|i| [self.level - i, i]).collect();
        all.into_iter().take(self.params.n_vf.max(1)).collect()
    }

    fn max_freq(&self) -> f64 {
        1.0 / (TAU * self.h.feature_scale()) * 1.5 + 4.0 / self.params.delta
    }

    fn clamp_leaf(&self, l: &mut LeafWitness) {
        let full = self.params.a_ratio * self.params.delta;
        let c = self.params.cone;
        l.tilt = l.tilt.clamp(-c, c);
        let room = (c - l.tilt.abs()).max(0.0) / (2.0 * full);
        let kcap = 0.5 * self.params.k_bound;
        l.curvature = l.curvature.clamp(-room.min(kcap), room.min(kcap));
        l.x0 = geom::wrap(l.x0);
    }

    fn sample(&self, leaf: &LeafWitness, alpha: [usize; 2]) -> Result<LeafSamples> {
        let d = self.params.delta;
        let scale = self.h.feature_scale();
        let panels = ((2.0 * d / (PI * scale)).ceil() as usize).clamp(8, 2000);
        let rule = Composite::new(-d, d, panels, 8);
        let es = self.params.stable;
        let en = self.params.normal();
        let mut dirs = vec![es; alpha[0]];
        dirs.extend(std::iter::repeat_n(en, alpha[1]));
        let mut g = Vec::with_capacity(rule.nodes.len());
        for &eta in &rule.nodes {
            let xi = leaf.tilt * eta + leaf.curvature * eta * eta;
            let p = geom::add(leaf.x0, geom::add(geom::scale(eta, es), geom::scale(xi, en)));
            g.push(self.h.directional(geom::wrap(p), &dirs)?);
        }
        Ok(LeafSamples { nodes: rule.nodes, weights: rule.weights, g })
    }

    fn clamp_tf(&self, t: &mut [f64; 4]) {
        let d = self.params.delta;
        let lim = d * (1.0 - BOUNDARY_GAP);
        t[1] = t[1].clamp(0.02 * d, lim);
        let room = lim - t[1];
        t[0] = t[0].clamp(-room, room);
        t[2] = t[2].clamp(0.0, MAX_PLATEAU);
        t[3] = t[3].clamp(0.0, self.max_freq());
    }

    /// Best phase and value for shape parameters `[center, half width, plateau, freq]`.
    fn evaluate(&self, s: &LeafSamples, t: [f64; 4]) -> Candidate {
        let [c, w, pl, om] = t;
        let bump = Plateau::new(pl);
        let (mut gp, mut gm) = (Complex64::default(), Complex64::default());
        for ((eta, wt), g) in s.nodes.iter().zip(&s.weights).zip(&s.g) {
            let u = (eta - c) / w;
            if u.abs() >= 1.0 {
                continue;
            }
            let b = bump.value(u) * wt;
            if b == 0.0 {
                continue;
            }
            let e = Complex64::from_polar(1.0, TAU * om * (eta - c));
            gp += g * e * b;
            gm += g * e.conj() * b;
        }
        let phase = if om == 0.0 { 0.0 } else { 0.5 * (gm.arg() - gp.arg()) };
        let raw = 0.5 * (Complex64::from_polar(1.0, phase) * gp + Complex64::from_polar(1.0, -phase) * gm).norm();
        let tf = TestFunction::new(c, w, pl, om, phase, self.class);
        Candidate { tf: t, phase, raw, value: raw / tf.norm }
    }

    /// Frequency maximizing the windowed Fourier transform of the samples.
    fn peak_frequency(&self, s: &LeafSamples) -> f64 {
        let d = self.params.delta;
        let step = 1.0 / (8.0 * d);
        let count = ((self.max_freq() / step) as usize).clamp(1, 512);
        let bump = Plateau::new(0.5);
        let win: Vec<Complex64> =
            s.nodes.iter().zip(&s.weights).zip(&s.g).map(|((eta, wt), g)| g * bump.value(eta / d) * *wt).collect();
        let mut best = (0.0, -1.0);
        for j in 0..=count {
            let om = j as f64 * self.max_freq() / count as f64;
            let (mut gp, mut gm) = (Complex64::default(), Complex64::default());
            for (eta, v) in s.nodes.iter().zip(&win) {
                let e = Complex64::from_polar(1.0, TAU * om * eta);
                gp += v * e;
                gm += v * e.conj();
            }
            let m = gp.norm() + gm.norm();
            if m > best.1 * (1.0 + IMPROVE) {
                best = (om, m);
            }
        }
        best.0
    }

    fn climb_tf(&self, s: &LeafSamples, start: Candidate) -> Candidate {
        let d = self.params.delta;
        let mut best = start;
        let mut steps = [0.1 * d, 0.1 * d, 0.1, (0.05 * best.tf[3]).max(1.0 / (8.0 * d))];
        for _ in 0..6 {
            let mut improved = true;
            while improved {
                improved = false;
                for i in 0..4 {
                    for sign in [1.0, -1.0] {
                        let mut t = best.tf;
                        t[i] += sign * steps[i];
                        self.clamp_tf(&mut t);
                        let c = self.evaluate(s, t);
                        if c.value > best.value * (1.0 + IMPROVE) {
                            best = c;
                            improved = true;
                        }
                    }
                }
            }
            steps.iter_mut().for_each(|x| *x *= 0.5);
        }
        best
    }

    fn random_leaf(&self, rng: &mut ChaCha8Rng) -> LeafWitness {
        let d = self.params.delta;
        let c = self.params.cone;
        let full = self.params.a_ratio * d;
        let x0 = if !self.hints.is_empty() && rng.gen_bool(0.5) {
            let hnt = self.hints[rng.gen_range(0..self.hints.len())];
            let es = self.params.stable;
            let en = self.params.normal();
            geom::add(hnt, geom::add(geom::scale(rng.gen_range(-d..d), es), geom::scale(rng.gen_range(-d..d), en)))
        } else {
            [rng.gen::<f64>(), rng.gen::<f64>()]
        };
        let mut l = LeafWitness {
            x0,
            tilt: rng.gen_range(-0.5..0.5) * c,
            curvature: rng.gen_range(-1.0..1.0) * c / (4.0 * full),
        };
        self.clamp_leaf(&mut l);
        l
    }

    fn random_tf(&self, rng: &mut ChaCha8Rng, peak: f64) -> [f64; 4] {
        let d = self.params.delta;
        let c = rng.gen_range(-0.5..0.5) * d;
        let w = rng.gen_range(0.2..1.0) * (d - c.abs());
        let om = match rng.gen_range(0..4) {
            0 | 1 => peak,
            2 => 0.0,
            _ => rng.gen_range(0.0..self.max_freq()),
        };
        let mut t = [c, w, rng.gen_range(0.0..0.9), om];
        self.clamp_tf(&mut t);
        t
    }

    fn round(&self, round: usize) -> Result<Option<Witness>> {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.params.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(round as u64 + 1)) ^ ((self.level as u64) << 48),
        );
        let alphas = self.alphas();
        let alpha = alphas[round % alphas.len()];
        let mut leaf = self.random_leaf(&mut rng);
        let mut samples = self.sample(&leaf, alpha)?;
        let peak = self.peak_frequency(&samples);
        let mut best: Option<Candidate> = None;
        for _ in 0..self.params.n_testfn {
            let c = self.evaluate(&samples, self.random_tf(&mut rng, peak));
            if best.as_ref().is_none_or(|b| c.value > b.value * (1.0 + IMPROVE)) {
                best = Some(c);
            }
        }
        let mut best = self.climb_tf(&samples, best.unwrap());

        let d = self.params.delta;
        let mut lsteps = [0.3 * d, 0.3 * d, 0.3 * self.params.cone, 0.3 * self.params.cone / (self.params.a_ratio * d)];
        for _ in 0..2 {
            for i in 0..4 {
                for sign in [1.0, -1.0] {
                    let mut l = leaf.clone();
                    let es = self.params.stable;
                    let en = self.params.normal();
                    match i {
                        0 => l.x0 = geom::add(l.x0, geom::scale(sign * lsteps[0], en)),
                        1 => l.x0 = geom::add(l.x0, geom::scale(sign * lsteps[1], es)),
                        2 => l.tilt += sign * lsteps[2],
                        _ => l.curvature += sign * lsteps[3],
                    }
                    self.clamp_leaf(&mut l);
                    let s = self.sample(&l, alpha)?;
                    let c = self.evaluate(&s, best.tf);
                    if c.value > best.value * (1.0 + IMPROVE) {
                        best = c;
                        leaf = l;
                        samples = s;
                    }
                }
            }
            lsteps.iter_mut().for_each(|x| *x *= 0.5);
        }
        let best = self.climb_tf(&samples, best);
        if best.value <= 0.0 || !best.value.is_finite() {
            return Ok(None);
        }
        let [c, w, pl, om] = best.tf;
        let test = TestFunction::new(c, w, pl, om, best.phase, self.class);
        Ok(Some(Witness { level: self.level, alpha, leaf, test, raw: best.raw }))
    }

    fn run(&self) -> Result<Vec<Option<Witness>>> {
        (0..self.params.n_leaves).into_par_iter().map(|i| self.round(i)).collect()
    }
}

/// Round witnesses for level `k` searched with test class `class`.
fn search(h: &dyn Observable, params: &NormParams, hints: &[Vec2], k: usize, class: f64) -> Result<Vec<Option<Witness>>> {
    Search { h, params, hints, level: k, class: canonical_class(class) }.run()
}

/// Combines per-round witnesses of several searches, all renormalized to `class`.
fn combine(rounds: &[Vec<Option<Witness>>], class: f64, budget: usize) -> NormEstimate {
    let mut best: Option<(f64, Witness)> = None;
    let mut history = Vec::with_capacity(budget);
    for r in 0..budget {
        for s in rounds {
            if let Some(w) = &s[r] {
                let v = w.value_at(class);
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, w.clone()));
                }
            }
        }
        history.push(best.as_ref().map_or(0.0, |b| b.0));
    }
    let value = best.as_ref().map_or(0.0, |b| b.0);
    let witness = best.map(|b| {
        let mut w = b.1;
        w.test = w.test.renormalized(class);
        w
    });
    NormEstimate { value, witness, budget, history }
}

/// `‖h‖⁻_{k,s}`: level `k`, test class `s`, also reusing witnesses found for the classes in `extra` (each ≥ s).
pub fn seminorm(h: &dyn Observable, k: usize, s: f64, extra: &[f64], params: &NormParams) -> Result<NormEstimate> {
    seminorm_hinted(h, k, s, extra, params, &[])
}

pub fn seminorm_hinted(
    h: &dyn Observable,
    k: usize,
    s: f64,
    extra: &[f64],
    params: &NormParams,
    hints: &[Vec2],
) -> Result<NormEstimate> {
    params.validate()?;
    let mut rounds = vec![search(h, params, hints, k, s)?];
    for e in extra {
        rounds.push(search(h, params, hints, k, *e)?);
    }
    Ok(combine(&rounds, canonical_class(s), params.n_leaves))
}

/// `‖h‖_{p,q} = max_{k ≤ p} ‖h‖⁻_{k,q+k}`.
///
/// Level `k` also reuses the witnesses searched at classes `q+k+1, …, q+p`, so
/// the estimate of `‖h‖_{p-1,q+1}` never exceeds this one at equal budgets.
pub fn norm_pq(h: &dyn Observable, params: &NormParams) -> Result<NormEstimate> {
    norm_pq_hinted(h, params, &[])
}

pub fn norm_pq_hinted(h: &dyn Observable, params: &NormParams, hints: &[Vec2]) -> Result<NormEstimate> {
    params.validate()?;
    let mut best: Option<NormEstimate> = None;
    let mut history = vec![0.0f64; params.n_leaves];
    for k in 0..=params.p {
        let base = params.q + k as f64;
        let extra: Vec<f64> = (1..=(params.p - k)).map(|j| base + j as f64).collect();
        let est = seminorm_hinted(h, k, base, &extra, params, hints)?;
        for (hv, e) in history.iter_mut().zip(&est.history) {
            *hv = hv.max(*e);
        }
        if best.as_ref().is_none_or(|b| est.value > b.value) {
            best = Some(est);
        }
    }
    let mut out = best.unwrap();
    out.history = history;
    Ok(out)
}

/// One row of a Lasota–Yorke table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyRow {
    pub n: usize,
    pub strong: f64,
    pub weak: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyTable {
    pub p: usize,
    pub q: f64,
    pub rows: Vec<LyRow>,
    pub a_fit: f64,
    pub b_fit: f64,
    pub rho_fit: f64,
    /// Geometric decay rate of `strong_n - B_fit·weak_0`.
    pub residual_rate: f64,
}

/// Fits `y_n ≈ A ρⁿ y_0 + B w_0` with `A, B ≥ 0` by a grid over `ρ` and relative least squares.
pub fn fit_ly(y: &[f64], w0: f64) -> (f64, f64, f64) {
    let y0 = y[0].max(1e-300);
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 1..=300 {
        let rho = i as f64 * 0.005;
        // two-column nonnegative least squares on relative residuals
        let cols: Vec<(f64, f64, f64)> =
            y.iter().enumerate().map(|(n, v)| (rho.powi(n as i32) * y0 / v.max(1e-300), w0 / v.max(1e-300), 1.0)).collect();
        let solve1 = |which: usize| -> (f64, f64) {
            let (num, den) = cols.iter().fold((0.0, 0.0), |(a, b), c| {
                let x = if which == 0 { c.0 } else { c.1 };
                (a + x * c.2, b + x * x)
            });
            ((num / den).max(0.0), 0.0)
        };
        let (s00, s01, s11, r0, r1) = cols.iter().fold((0.0, 0.0, 0.0, 0.0, 0.0), |acc, c| {
            (acc.0 + c.0 * c.0, acc.1 + c.0 * c.1, acc.2 + c.1 * c.1, acc.3 + c.0, acc.4 + c.1)
        });
        let det = s00 * s11 - s01 * s01;
        let mut cands = vec![(solve1(0).0, 0.0), (0.0, solve1(1).0)];
        if det.abs() > 1e-300 {
            let a = (r0 * s11 - r1 * s01) / det;
            let b = (s00 * r1 - s01 * r0) / det;
            if a >= 0.0 && b >= 0.0 {
                cands.push((a, b));
            }
        }
        for (a, b) in cands {
            let err: f64 = cols.iter().map(|c| (a * c.0 + b * c.1 - 1.0).powi(2)).sum();
            if err < best.0 {
                best = (err, rho, a, b);
            }
        }
    }
    (best.2, best.3, best.1)
}

/// Geometric rate from a log-linear regression of the positive entries.
pub fn geometric_rate(vals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        vals.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(n, v)| (n as f64, v.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    crate::fit::linear_fit(&pts).0.exp()
}

/// `‖Lⁿh‖_{p,q}` for `n = 0..=n_max`, evaluated through inverse orbits.
pub fn ly_experiment(t: &TorusMap, h: Obs, params: &NormParams, n_max: usize) -> Result<LyTable> {
    if n_max > 6 {
        return Err(Error::InvalidParams("n_max must be at most 6".into()));
    }
    params.validate()?;
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let ln: Obs = if n == 0 { h.clone() } else { std::sync::Arc::new(Transferred::new(t, h.clone(), n)) };
        let strong = norm_pq(ln.as_ref(), params)?.value;
        let weak = if params.p >= 1 {
            norm_pq(ln.as_ref(), &params.with_pq(params.p - 1, params.q + 1.0))?.value
        } else {
            0.0
        };
        rows.push(LyRow { n, strong, weak });
    }
    let y: Vec<f64> = rows.iter().map(|r| r.strong).collect();
    let (a_fit, b_fit, rho_fit) = fit_ly(&y, rows[0].weak);
    let resid: Vec<f64> = y.iter().map(|v| v - b_fit * rows[0].weak).collect();
    let residual_rate = geometric_rate(&resid);
    Ok(LyTable { p: params.p, q: params.q, rows, a_fit, b_fit, rho_fit, residual_rate })
}

/// Mollified distribution supported near an unstable curve `η = ζ(ξ)` in the chart at `x0`.
pub struct UnstableDensity<Z, F> {
    pub x0: Vec2,
    pub stable: Vec2,
    pub zeta: Z,
    pub dzeta: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub density: F,
    /// `ξ` range of the curve; `f` vanishes near its ends.
    pub half_length: f64,
    pub eps: f64,
}

/// `h_ε(η, ξ) = θ_ε(η - ζ(ξ)) f(ξ)` in the isometric chart at `x0`; `NotTransverse` if the curve enters the cone.
pub fn unstable_leaf_density<Z, F>(
    x0: Vec2,
    stable: Vec2,
    zeta: Z,
    dzeta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    density: F,
    half_length: f64,
    eps: f64,
    cone: f64,
) -> Result<UnstableDensity<Z, F>>
where
    Z: Fn(f64) -> f64 + Send + Sync,
    F: Fn(f64) -> f64 + Send + Sync,
{
    // the tangent (ζ', 1) lies in the stable cone when |ζ'| ≥ 1/cone
    for i in 0..=200 {
        let xi = -half_length + 2.0 * half_length * i as f64 / 200.0;
        if dzeta(xi).abs() * cone >= 1.0 {
            return Err(Error::NotTransverse(xi));
        }
    }
    Ok(UnstableDensity { x0, stable, zeta, dzeta: Box::new(dzeta), density, half_length, eps })
}

impl<Z, F> UnstableDensity<Z, F>
where
    Z: Fn(f64) -> f64 + Send + Sync,
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn chart(&self, x: Vec2) -> Vec2 {
        let d = geom::wrap_centered(geom::sub(x, self.x0));
        [geom::dot(d, self.stable), geom::dot(d, geom::perp(self.stable))]
    }

    pub fn torus_point(&self, eta: f64, xi: f64) -> Vec2 {
        geom::wrap(geom::add(self.x0, geom::add(geom::scale(eta, self.stable), geom::scale(xi, geom::perp(self.stable)))))
    }

    /// `∫ h_ε φ` over the torus, by Gauss–Legendre in `ξ` and in `u = (η - ζ)/ε`.
    pub fn pair(&self, phi: impl Fn(Vec2) -> f64) -> f64 {
        let xr = Composite::new(-self.half_length, self.half_length, 32, 12);
        let ur = Composite::new(-1.0, 1.0, 8, 24);
        let mut acc = 0.0;
        for (xi, wx) in xr.nodes.iter().zip(&xr.weights) {
            let f = (self.density)(*xi);
            if f == 0.0 {
                continue;
            }
            let z = (self.zeta)(*xi);
            for (u, wu) in ur.nodes.iter().zip(&ur.weights) {
                acc += wx * wu * crate::bump::kernel(*u) * f * phi(self.torus_point(z + self.eps * u, *xi));
            }
        }
        acc
    }

    /// `∫_W φ f dξ`, the limit of [`Self::pair`] as `ε → 0`.
    pub fn limit_pair(&self, phi: impl Fn(Vec2) -> f64) -> f64 {
        let xr = Composite::new(-self.half_length, self.half_length, 32, 12);
        xr.nodes
            .iter()
            .zip(&xr.weights)
            .map(|(xi, w)| w * (self.density)(*xi) * phi(self.torus_point((self.zeta)(*xi), *xi)))
            .sum()
    }

    /// Sup of `h_ε` sampled along the curve.
    pub fn sup_norm(&self) -> f64 {
        (0..=400)
            .map(|i| {
                let xi = -self.half_length + 2.0 * self.half_length * i as f64 / 400.0;
                crate::bump::kernel(0.0) / self.eps * (self.density)(xi).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Points on the curve, used to seed leaf searches.
    pub fn hints(&self) -> Vec<Vec2> {
        (0..16)
            .map(|i| {
                let xi = -0.8 * self.half_length + 1.6 * self.half_length * i as f64 / 15.0;
                self.torus_point((self.zeta)(xi), xi)
            })
            .collect()
    }
}

impl<Z, F> Observable for UnstableDensity<Z, F>
where
    Z: Fn(f64) -> f64 + Send + Sync,
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, x: Vec2) -> Result<Complex64> {
        let [eta, xi] = self.chart(x);
        if xi.abs() >= self.half_length {
            return Ok(Complex64::default());
        }
        let u = (eta - (self.zeta)(xi)) / self.eps;
        Ok(Complex64::new(crate::bump::kernel(u) / self.eps * (self.density)(xi), 0.0))
    }

    fn feature_scale(&self) -> f64 {
        self.eps
    }
}
