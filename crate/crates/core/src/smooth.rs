//! Sampled C^s norms: derivative sups plus a Hölder quotient of the top derivative.

/// Largest `|f(x)-f(y)|/|x-y|^s` over pairs of uniform samples with spacing `h`.
pub fn holder_quotient(vals: &[f64], h: f64, s: f64) -> f64 {
    if s <= 0.0 || vals.len() < 2 {
        return 0.0;
    }
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best: f64 = 0.0;
    for d in 1..vals.len() {
        let dist = (d as f64 * h).powf(s);
        if 2.0 * sup / dist <= best {
            break;
        }
        for i in 0..vals.len() - d {
            best = best.max((vals[i + d] - vals[i]).abs() / dist);
        }
    }
    best
}

/// `max_{j ≤ ⌊s⌋} sup|f^{(j)}|` plus the Hölder quotient of `f^{(⌊s⌋)}` for the fractional part.
///
/// `derivs[j]` holds uniform samples of `f^{(j)}` with spacing `h`; at least `⌊s⌋+1` rows.
pub fn cq_from_samples(derivs: &[Vec<f64>], h: f64, s: f64) -> f64 {
    let top = s.floor() as usize;
    assert!(derivs.len() > top, "need derivatives up to order {top}");
    let sup = derivs[..=top]
        .iter()
        .map(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    let frac = s - top as f64;
    if frac > 1e-12 {
        sup + holder_quotient(&derivs[top], h, frac)
    } else {
        sup
    }
}

/// C^s norm of a function on [a, b] given by its derivative oracle `f(x, j)`.
pub fn cq_norm_interval(f: impl Fn(f64, usize) -> f64, a: f64, b: f64, s: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let top = s.floor() as usize;
    let derivs: Vec<Vec<f64>> =
        (0..=top).map(|j| (0..=m).map(|i| f(a + i as f64 * h, j)).collect()).collect();
    cq_from_samples(&derivs, h, s)
}
