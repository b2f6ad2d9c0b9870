//! One runner per subcommand; each returns tables, a JSON report and optional figures.

use std::sync::Arc;

use anosov_core::io::{svg_heatmap, svg_lines, Axes, Cell, Provenance, Series, Table};
use anosov_core::leaves::{leaf_cover, AdmissibleGraph, LeafGeometry};
use anosov_core::maps::hyperbolicity_constants;
use anosov_core::norms::{ly_experiment, norm_pq};
use anosov_core::observable::Obs;
use anosov_core::perturb::{
    calibrated_ladder, mapdist_experiment, random_ly_experiment, resolvent_expansion_validate, response,
    stability_experiment, ResolventDomain, StabilityParams, WeightedScale,
};
use anosov_core::stats::{clt_variance_map, clt_variance_mc};
use anosov_core::transfer::{correlation, galerkin, spectrum_with_radius, srb};
use anosov_core::{Error, Result};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::Resolved;

pub struct Output {
    pub tables: Vec<Table>,
    pub report: Value,
    /// `(file stem, svg)`, built only when asked for.
    pub figures: Vec<(String, String)>,
}

fn obs(h: &anosov_core::TrigObservable) -> Obs {
    Arc::new(h.clone())
}

fn series(label: &str, xs: &[f64], ys: &[f64]) -> Series {
    Series { label: label.into(), points: xs.iter().copied().zip(ys.iter().copied()).collect() }
}

pub fn run(command: &str, cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let out = match command {
        "constants" => constants(cfg)?,
        "leafcover" => leafcover(cfg, prov, svg)?,
        "norm" => norm(cfg)?,
        "ly" => ly(cfg, prov, svg)?,
        "spectrum" => spectrum(cfg, prov, svg)?,
        "srb" => srb_cmd(cfg, prov, svg)?,
        "correlations" => correlations(cfg, prov, svg)?,
        "mapdist" => mapdist(cfg)?,
        "random-ly" => random_ly(cfg, prov, svg)?,
        "stability" => stability(cfg, prov, svg)?,
        "resolvent-order" => resolvent_order(cfg, prov, svg)?,
        "response" => response_cmd(cfg)?,
        "variance" => variance(cfg)?,
        other => return Err(Error::InvalidParams(format!("unknown command {other}"))),
    };
    Ok(out)
}

fn constants(cfg: &Resolved) -> Result<Output> {
    let t = cfg.map()?;
    let np = cfg.norm_params()?;
    let rep = hyperbolicity_constants(&t, cfg.rest.grid.unwrap_or(32))?;
    let essential = rep.essential_radius(np.p, np.q);
    let mut tab = Table::new("constants", &["lambda", "nu", "kappa", "valid", "essential_radius"]);
    tab.push(vec![rep.lambda.into(), rep.nu.into(), rep.kappa.into(), rep.valid.into(), essential.into()]);
    Ok(Output { tables: vec![tab], report: json!({ "hyperbolicity": rep, "essential_radius": essential }), figures: vec![] })
}

fn leafcover(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let t = cfg.map()?;
    let g = LeafGeometry::default_for(&t)?;
    let w = AdmissibleGraph::flat(0, 0.0, 0.0, &g);
    let mut tab = Table::new("leafcover", &["n", "leaves", "overlap", "expansion", "partition_error", "supports_inside"]);
    for n in 1..=cfg.rest.n_max.unwrap_or(4) {
        let c = leaf_cover(&t, &g, &w, n, cfg.rest.gamma.unwrap_or(1.0))?;
        let err = c
            .sample_preimages(&t, &g, 200)?
            .iter()
            .map(|(eta, _)| (c.partition_sum(*eta) - 1.0).abs())
            .fold(0.0, f64::max);
        tab.push(vec![n.into(), c.leaves.len().into(), c.overlap.into(), c.expansion.into(), err.into(), c.supports_inside().into()]);
    }
    let figures = if svg {
        let ns = tab.column("n").unwrap();
        let counts = tab.column("leaves").unwrap();
        vec![("leafcover".into(), svg_lines("leaf count", &[series("leaves", &ns, &counts)], Axes { log_x: false, log_y: true }, prov))]
    } else {
        vec![]
    };
    Ok(Output { report: json!({ "geometry": { "delta": g.delta, "a_ratio": g.a_ratio, "k_bound": g.k_bound }, "rows": tab.rows }), tables: vec![tab], figures })
}

fn norm(cfg: &Resolved) -> Result<Output> {
    let np = cfg.norm_params()?;
    let mut tab = Table::new("norm", &["observable", "p", "q", "value", "budget"]);
    let mut reports = Vec::new();
    for o in cfg.observables() {
        let est = norm_pq(&o.build(), &np)?;
        tab.push(vec![o.to_string().into(), np.p.into(), np.q.into(), est.value.into(), est.budget.into()]);
        reports.push(json!({ "observable": o.to_string(), "estimate": est }));
    }
    Ok(Output { tables: vec![tab], report: json!({ "params": np, "estimates": reports }), figures: vec![] })
}

fn ly(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let t = cfg.map()?;
    let np = cfg.norm_params()?;
    let h = cfg.observables()[0].build();
    let table = ly_experiment(&t, obs(&h), &np, cfg.rest.n_max.unwrap_or(6))?;
    let mut tab = Table::new("ly", &["n", "strong", "weak"]);
    for r in &table.rows {
        tab.push(vec![r.n.into(), r.strong.into(), r.weak.into()]);
    }
    let figures = if svg {
        let ns = tab.column("n").unwrap();
        let s = [series("strong", &ns, &tab.column("strong").unwrap()), series("weak", &ns, &tab.column("weak").unwrap())];
        vec![("ly".into(), svg_lines("norms of L^n h", &s, Axes { log_x: false, log_y: true }, prov))]
    } else {
        vec![]
    };
    Ok(Output { tables: vec![tab], report: serde_json::to_value(&table)?, figures })
}

fn spectrum(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let t = cfg.map()?;
    let np = cfg.norm_params()?;
    let op = galerkin(&t, cfg.rest.cutoff)?;
    let k_top = cfg.rest.k_top.unwrap_or(20).min(op.dim());
    let data = spectrum_with_radius(&op, k_top, np.p, np.q)?;
    let mut tab = Table::new("eigenvalues", &["index", "re", "im", "modulus"]);
    for (i, l) in data.eigenvalues.iter().take(k_top).enumerate() {
        tab.push(vec![i.into(), l.re.into(), l.im.into(), l.norm().into()]);
    }
    let figures = if svg {
        let pts = series("eigenvalues", &tab.column("re").unwrap(), &tab.column("im").unwrap());
        vec![("eigenvalues".into(), svg_lines("Galerkin eigenvalues", &[pts], Axes::default(), prov))]
    } else {
        vec![]
    };
    let report = json!({
        "cutoff": op.n,
        "dimension": op.dim(),
        "essential_radius": data.essential_radius,
        "eigenvalues": data.eigenvalues.iter().take(k_top).map(|l| [l.re, l.im]).collect::<Vec<_>>(),
        "residuals": data.residuals,
        "simple": data.simple,
    });
    Ok(Output { tables: vec![tab], report, figures })
}

fn srb_cmd(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let t = cfg.map()?;
    let h = srb(&galerkin(&t, cfg.rest.cutoff)?)?;
    let g = cfg.rest.grid.unwrap_or(32);
    if g <= 2 * h.cutoff() {
        return Err(Error::InvalidParams(format!("grid must exceed twice the cutoff {}", h.cutoff())));
    }
    let vals: Vec<f64> = h.grid_values(g).iter().map(|v| v.re).collect();
    let mut tab = Table::new("srb", &["x", "y", "density"]);
    for (i, v) in vals.iter().enumerate() {
        tab.push(vec![((i / g) as f64 / g as f64).into(), ((i % g) as f64 / g as f64).into(), (*v).into()]);
    }
    let modes: Vec<Value> = (0..h.coefs().len())
        .filter(|&i| h.coefs()[i].norm() > 1e-12)
        .map(|i| json!({ "k": h.mode_at(i), "re": h.coefs()[i].re, "im": h.coefs()[i].im }))
        .collect();
    let figures = if svg { vec![("srb".into(), svg_heatmap("SRB density", &vals, g, prov))] } else { vec![] };
    Ok(Output { tables: vec![tab], report: json!({ "cutoff": h.cutoff(), "modes": modes }), figures })
}

fn correlations(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let t = cfg.map()?;
    let list = cfg.observables();
    let f = list[0].build();
    let g = list.get(1).map_or_else(|| f.clone(), |o| o.build());
    let c = correlation(&t, &f, &g, cfg.rest.n_max.unwrap_or(20), cfg.rest.cutoff)?;
    let mut tab = Table::new("correlations", &["n", "re", "im", "modulus"]);
    for (n, v) in c.iter().enumerate() {
        tab.push(vec![n.into(), v.re.into(), v.im.into(), v.norm().into()]);
    }
    let figures = if svg {
        let s = series("|c_n|", &tab.column("n").unwrap(), &tab.column("modulus").unwrap());
        vec![("correlations".into(), svg_lines("correlations", &[s], Axes { log_x: false, log_y: true }, prov))]
    } else {
        vec![]
    };
    let report = json!({ "f": list[0].to_string(), "g": list.get(1).unwrap_or(&list[0]).to_string(), "values": c.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>() });
    Ok(Output { tables: vec![tab], report, figures })
}

fn mapdist(cfg: &Resolved) -> Result<Output> {
    let (t, tt) = (cfg.map()?, cfg.other_map()?);
    let np = cfg.norm_params()?;
    let list = cfg.observables();
    let corpus: Vec<Obs> = list.iter().map(|o| obs(&o.build())).collect();
    let table = mapdist_experiment(&t, &tt, &corpus, &np)?;
    let mut tab = Table::new("mapdist", &["observable", "numerator", "norm", "ratio"]);
    for r in &table.rows {
        tab.push(vec![list[r.observable].to_string().into(), r.numerator.into(), r.norm.into(), r.ratio.into()]);
    }
    Ok(Output { tables: vec![tab], report: serde_json::to_value(&table)?, figures: vec![] })
}

fn random_ly(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let k = cfg.kernel()?;
    let np = cfg.norm_params()?;
    let h = cfg.observables()[0].build();
    let table = random_ly_experiment(&k, obs(&h), &np, cfg.rest.n_max.unwrap_or(3), cfg.rest.m_target.unwrap_or(1.1))?;
    let mut tab = Table::new("random_ly", &["n", "norm"]);
    for (n, v) in table.values.iter().enumerate() {
        tab.push(vec![n.into(), (*v).into()]);
    }
    let figures = if svg {
        let s = series("norm", &tab.column("n").unwrap(), &table.values);
        vec![("random_ly".into(), svg_lines("random kernel iterates", &[s], Axes { log_x: false, log_y: true }, prov))]
    } else {
        vec![]
    };
    Ok(Output { tables: vec![tab], report: serde_json::to_value(&table)?, figures })
}

fn stability(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let fam = cfg.family()?;
    let np = cfg.norm_params()?;
    let s = &cfg.rest.stability;
    let kernels = calibrated_ladder(&fam, &s.deltas, np.p, np.q, np.r)?;
    let sp = StabilityParams { p: np.p, q: np.q, r: np.r, rho: s.rho, cutoff: s.cutoff };
    let rep = stability_experiment(&fam.at(0.0), &kernels, &sp)?;
    let mut tab = Table::new("stability", &["delta", "rank", "rank_base", "projector_diff", "idempotency", "k2"]);
    for r in &rep.rows {
        tab.push(vec![r.delta.into(), r.rank.into(), r.rank_base.into(), r.projector_diff.into(), r.idempotency.into(), r.k2.into()]);
    }
    let figures = if svg {
        let s = series("projector difference", &tab.column("delta").unwrap(), &tab.column("projector_diff").unwrap());
        vec![("stability".into(), svg_lines("projector stability", &[s], Axes { log_x: true, log_y: true }, prov))]
    } else {
        vec![]
    };
    Ok(Output { tables: vec![tab], report: serde_json::to_value(&rep)?, figures })
}

fn resolvent_order(cfg: &Resolved, prov: &Provenance, svg: bool) -> Result<Output> {
    let r = &cfg.rest.resolvent;
    if r.points < 2 || !(r.t_min > 0.0 && r.t_max > r.t_min) {
        return Err(Error::InvalidParams("need points ≥ 2 and 0 < t_min < t_max".into()));
    }
    let scale = WeightedScale::synthetic(r.alpha, r.m, r.chains, r.depth, r.big)?;
    let ts: Vec<f64> =
        (0..r.points).map(|i| r.t_max * (r.t_min / r.t_max).powf(i as f64 / (r.points - 1) as f64)).collect();
    let dom = ResolventDomain { delta: r.delta, rho: r.rho };
    let z = Complex64::new(r.z[0], r.z[1]);
    let mut tab = Table::new("resolvent_order", &["s", "t", "error"]);
    let mut reports = Vec::new();
    let mut lines = Vec::new();
    for s in 1..=r.s_max {
        let rep = resolvent_expansion_validate(&scale, z, s, &ts, dom)?;
        for (t, e) in rep.t_grid.iter().zip(&rep.errors) {
            tab.push(vec![s.into(), (*t).into(), (*e).into()]);
        }
        lines.push(series(&format!("s = {s}"), &rep.t_grid, &rep.errors));
        reports.push(rep);
    }
    let figures = if svg {
        vec![("resolvent_order".into(), svg_lines("expansion error", &lines, Axes { log_x: true, log_y: true }, prov))]
    } else {
        vec![]
    };
    Ok(Output { tables: vec![tab], report: json!({ "assumptions": scale.verify(r.t_min, r.t_max, 20, cfg.seed), "slopes": reports }), figures })
}

fn response_cmd(cfg: &Resolved) -> Result<Output> {
    let fam = cfg.family()?;
    let mut tab = Table::new("response", &["observable", "formula", "finite_difference", "relative_error"]);
    let mut reports = Vec::new();
    for o in cfg.observables() {
        let rep = response(&fam, &o.build(), cfg.rest.cutoff)?;
        tab.push(vec![o.to_string().into(), rep.formula.into(), rep.finite_difference.into(), rep.relative_error.into()]);
        reports.push(json!({ "observable": o.to_string(), "report": rep }));
    }
    Ok(Output { tables: vec![tab], report: Value::Array(reports), figures: vec![] })
}

fn variance(cfg: &Resolved) -> Result<Output> {
    let v = &cfg.rest.variance;
    let maps: Vec<(f64, anosov_core::TorusMap)> = if v.t_grid.is_empty() {
        vec![(0.0, cfg.map()?)]
    } else {
        let fam = cfg.family()?;
        v.t_grid.iter().map(|&t| (t, fam.at(t))).collect()
    };
    let mut tab = Table::new("variance", &["observable", "t", "sigma2", "sigma2_mc", "se"]);
    let mut reports = Vec::new();
    for o in cfg.observables() {
        let f = o.build();
        for (t, map) in &maps {
            let formula = clt_variance_map(map, &f, cfg.rest.cutoff)?;
            let mc = if v.n_orbits > 0 { Some(clt_variance_mc(map, &f, v.n_orbits, v.orbit_len, cfg.seed)?) } else { None };
            let nan = f64::NAN;
            tab.push(vec![
                o.to_string().into(),
                (*t).into(),
                formula.sigma2.into(),
                mc.as_ref().map_or(nan, |m| m.sigma2).into(),
                mc.as_ref().map_or(nan, |m| m.se).into(),
            ]);
            reports.push(json!({ "observable": o.to_string(), "t": t, "formula": formula, "monte_carlo": mc }));
        }
    }
    Ok(Output { tables: vec![tab], report: Value::Array(reports), figures: vec![] })
}

pub fn cells_to_json(tab: &Table) -> Value {
    let rows: Vec<Value> = tab
        .rows
        .iter()
        .map(|r| Value::Object(tab.headers.iter().cloned().zip(r.iter().map(cell_value)).collect()))
        .collect();
    Value::Array(rows)
}

fn cell_value(c: &Cell) -> Value {
    match c {
        Cell::Num(v) => json!(v),
        Cell::Int(v) => json!(v),
        Cell::Text(s) => json!(s),
    }
}
