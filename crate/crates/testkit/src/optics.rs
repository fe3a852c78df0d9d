//! Direct evaluations of Fresnel propagation.

use std::f64::consts::PI;

use crate::C64;

/// Riemann sum of the Fresnel convolution integral
/// `U(x) = exp(ikz)/(i lambda z) * sum U0(x') exp(i pi |x - x'|^2 / (lambda z)) p^2`,
/// output sampled on the input grid. Cost O(N^2).
pub fn direct_fresnel(u0: &[C64], w: usize, h: usize, pitch: f64, lambda: f64, z: f64) -> Vec<C64> {
    assert_eq!(u0.len(), w * h);
    assert!(z > 0.0);
    let k = 2.0 * PI / lambda;
    let prefactor = C64::from_polar(1.0, k * z) / C64::new(0.0, lambda * z) * (pitch * pitch);
    let mut out = Vec::with_capacity(w * h);
    for oy in 0..h {
        for ox in 0..w {
            let mut acc = C64::new(0.0, 0.0);
            for sy in 0..h {
                for sx in 0..w {
                    let dx = (ox as f64 - sx as f64) * pitch;
                    let dy = (oy as f64 - sy as f64) * pitch;
                    acc += u0[sy * w + sx] * C64::from_polar(1.0, PI * (dx * dx + dy * dy) / (lambda * z));
                }
            }
            out.push(acc * prefactor);
        }
    }
    out
}

fn signed(j: usize, n: usize) -> f64 {
    if j < n.div_ceil(2) {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

/// Unitary 2-D DFT by the explicit double sum; `sign = -1` forward, `+1` inverse.
pub fn dft2(data: &[C64], w: usize, h: usize, sign: f64) -> Vec<C64> {
    let scale = 1.0 / ((w * h) as f64).sqrt();
    let mut out = Vec::with_capacity(w * h);
    for ky in 0..h {
        for kx in 0..w {
            let mut acc = C64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = 2.0 * PI * (((kx * x) % w) as f64 / w as f64 + ((ky * y) % h) as f64 / h as f64);
                    acc += data[y * w + x] * C64::from_polar(1.0, sign * phase);
                }
            }
            out.push(acc * scale);
        }
    }
    out
}

/// Band-limited transfer-function propagation with explicit DFT sums:
/// multiply by `exp(-i pi lambda z |f|^2)` where `|f|^2 <= 1/(lambda z)`, zero elsewhere.
pub fn dense_propagate(u0: &[C64], w: usize, h: usize, pitch: f64, lambda: f64, z: f64) -> Vec<C64> {
    let mut spec = dft2(u0, w, h, -1.0);
    if z > 0.0 {
        for ky in 0..h {
            for kx in 0..w {
                let fx = signed(kx, w) / (w as f64 * pitch);
                let fy = signed(ky, h) / (h as f64 * pitch);
                let f2 = fx * fx + fy * fy;
                let s = &mut spec[ky * w + kx];
                *s = if f2 * lambda * z <= 1.0 {
                    *s * C64::from_polar(1.0, -PI * lambda * z * f2)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
        }
    }
    dft2(&spec, w, h, 1.0)
}

/// Gaussian-beam 1/e^2 intensity radius `w0 sqrt(1 + (z/z_R)^2)`, `z_R = pi w0^2 / lambda`.
pub fn beam_radius(w0: f64, lambda: f64, z: f64) -> f64 {
    let zr = PI * w0 * w0 / lambda;
    w0 * (1.0 + (z / zr).powi(2)).sqrt()
}

/// `2 sqrt(<r_x^2>)` of an intensity image about its centroid, which equals the
/// 1/e^2 radius for a Gaussian beam.
pub fn second_moment_radius(intensity: &[f64], w: usize, h: usize, pitch: f64) -> f64 {
    let total: f64 = intensity.iter().sum();
    let (mut cx, mut cy) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            cx += x as f64 * intensity[y * w + x];
            cy += y as f64 * intensity[y * w + x];
        }
    }
    cx /= total;
    cy /= total;
    let mut m2 = 0.0;
    for y in 0..h {
        for x in 0..w {
            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            m2 += r2 * intensity[y * w + x];
        }
    }
    // <x^2> + <y^2> = w^2 / 2 for exp(-2 r^2 / w^2)
    (2.0 * m2 / total).sqrt() * pitch
}
