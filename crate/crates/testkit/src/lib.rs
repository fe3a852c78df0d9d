//! Slow, literal reference implementations used as test oracles.
//!
//! Nothing here shares code with `speckle-core`: every routine works on
//! plain slices and follows the textbook definition as directly as
//! possible, trading speed for obviousness.

pub mod metrics;
pub mod optics;
pub mod solver;

pub use num_complex::Complex64 as C64;

/// `|a - b|_2 / |b|_2`, or `|a - b|_2` when `b` is zero.
pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// `sum conj(a) b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
