//! Explicit-sum forms of the momentum and energy recurrences, and finite
//! differences for gradient checks.

use crate::C64;

/// `m_t = sum_{tau=1..t} beta^(t - tau) a_tau` over the whole history.
pub fn explicit_momentum(history: &[Vec<C64>], beta: f64) -> Vec<C64> {
    let t = history.len();
    let mut out = vec![C64::new(0.0, 0.0); history[0].len()];
    for (tau, a) in history.iter().enumerate() {
        let weight = beta.powi((t - 1 - tau) as i32);
        for (o, v) in out.iter_mut().zip(a) {
            *o += v * weight;
        }
    }
    out
}

/// `v_t = sum_{tau=1..t} beta^(t - tau) |a_tau|^2` pointwise.
pub fn explicit_energy(history: &[Vec<C64>], beta: f64) -> Vec<f64> {
    let t = history.len();
    let mut out = vec![0.0; history[0].len()];
    for (tau, a) in history.iter().enumerate() {
        let weight = beta.powi((t - 1 - tau) as i32);
        for (o, v) in out.iter_mut().zip(a) {
            *o += v.norm_sqr() * weight;
        }
    }
    out
}

/// `(f(x + h d) - f(x - h d)) / (2 h)`.
pub fn central_difference(f: impl Fn(&[C64]) -> f64, x: &[C64], d: &[C64], h: f64) -> f64 {
    let shifted = |s: f64| -> Vec<C64> { x.iter().zip(d).map(|(a, b)| a + b * s).collect() };
    (f(&shifted(h)) - f(&shifted(-h))) / (2.0 * h)
}

/// Directional derivative of a real function from its conjugate-Wirtinger
/// gradient: `2 Re <g, d>`.
pub fn wirtinger_directional(g: &[C64], d: &[C64]) -> f64 {
    2.0 * g.iter().zip(d).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
}
