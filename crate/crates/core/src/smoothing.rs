//! Truncated, unit-mass Gaussian kernels and zero-padded separable convolution.

use crate::error::{Error, Result};
use crate::field::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    /// 1-D taps for offsets `-radius..=radius`, summing to one.
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("{sigma} must be positive")));
        }
        let raw: Vec<f64> = (-(radius as isize)..=radius as isize)
            .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        Ok(Self {
            sigma,
            radius,
            taps: raw.into_iter().map(|t| t / total).collect(),
        })
    }

    /// Kernel truncated at `ceil(3 sigma)`.
    pub fn three_sigma(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("{sigma} must be positive")));
        }
        Self::new(sigma, (3.0 * sigma).ceil() as usize)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// 2-D weight at offset `(dx, dy)`; zero outside the square footprint.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.taps[(dx + r) as usize] * self.taps[(dy + r) as usize]
    }

    pub fn mass(&self) -> f64 {
        let s: f64 = self.taps.iter().sum();
        s * s
    }

    pub fn convolve_real(&self, data: &[f64], width: usize, height: usize) -> Vec<f64> {
        self.separable(data, width, height, 0.0)
    }

    pub fn convolve_complex(&self, data: &[C64], width: usize, height: usize) -> Vec<C64> {
        self.separable(data, width, height, C64::new(0.0, 0.0))
    }

    fn separable<T>(&self, data: &[T], width: usize, height: usize, zero: T) -> Vec<T>
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        assert_eq!(data.len(), width * height);
        let r = self.radius as isize;
        let mut rows = vec![zero; data.len()];
        for y in 0..height {
            let line = &data[y * width..(y + 1) * width];
            for x in 0..width {
                let mut acc = zero;
                for (k, &t) in self.taps.iter().enumerate() {
                    let sx = x as isize + k as isize - r;
                    if sx >= 0 && (sx as usize) < width {
                        acc = acc + line[sx as usize] * t;
                    }
                }
                rows[y * width + x] = acc;
            }
        }
        let mut out = vec![zero; data.len()];
        for y in 0..height {
            for x in 0..width {
                let mut acc = zero;
                for (k, &t) in self.taps.iter().enumerate() {
                    let sy = y as isize + k as isize - r;
                    if sy >= 0 && (sy as usize) < height {
                        acc = acc + rows[sy as usize * width + x] * t;
                    }
                }
                out[y * width + x] = acc;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass() {
        for &s in &[0.01, 0.5, 1.0, 1.5, 3.7] {
            let k = GaussianKernel::three_sigma(s).unwrap();
            assert!((k.mass() - 1.0).abs() <= 1e-12);
        }
        let k = GaussianKernel::new(1.5, 3).unwrap();
        let mut total = 0.0;
        for dy in -3..=3 {
            for dx in -3..=3 {
                total += k.weight(dx, dy);
            }
        }
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn impulse_response_matches_weights() {
        let k = GaussianKernel::new(1.0, 3).unwrap();
        let (w, h) = (9, 9);
        let mut img = vec![0.0; w * h];
        img[4 * w + 4] = 1.0;
        let out = k.convolve_real(&img, w, h);
        for y in 0..h {
            for x in 0..w {
                let expect = k.weight(x as isize - 4, y as isize - 4);
                assert!((out[y * w + x] - expect).abs() < 1e-15);
            }
        }
        assert!((out[4 * w + 5] / out[4 * w + 4] - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(GaussianKernel::new(0.0, 1).is_err());
        assert!(GaussianKernel::three_sigma(-1.0).is_err());
    }
}
