//! Frequency-selective multi-branch filtering, attention fusion and
//! cross-layer compensation over real `C x H x W` feature maps.
//!
//! Every stage is a pure function of its inputs and a [`Weights`] set. The
//! stages run in a fixed order by [`run_pipeline`]; [`run_pipeline_traced`]
//! also returns the intermediate maps under the names in [`STAGES`].

mod stages;
mod weights;

use crate::error::{Error, Result};
use crate::field::C64;
use crate::smoothing::GaussianKernel;
use crate::wpcf::Stack;

pub use stages::*;
pub use weights::{Activation, AttentionConfig, BranchWeights, Sigmas, Weights, DILATIONS};

/// Real feature map, channel-major: sample `(c, y, x)` is at `c*H*W + y*W + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::param("shape", format!("{channels}x{height}x{width} map is empty")));
        }
        if data.len() != channels * height * width {
            return Err(Error::param(
                "data",
                format!("{} samples for a {channels}x{height}x{width} map", data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_planes(planes: &[Vec<f64>], height: usize, width: usize) -> Result<Self> {
        Self::new(planes.len(), height, width, planes.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }

    pub(crate) fn ensure_same_shape(&self, other: &FeatureMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::param(
                "feature map",
                format!(
                    "shape {}x{}x{} does not match {}x{}x{}",
                    other.channels, other.height, other.width, self.channels, self.height, self.width
                ),
            ))
        }
    }

    pub(crate) fn with_data(&self, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * self.plane_len());
        Self {
            channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_data(self.channels, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn add(&self, other: &FeatureMap) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(self.with_data(
            self.channels,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn relu(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Channels of several same-sized maps stacked in order.
    pub fn concat(maps: &[&FeatureMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::param("maps", "nothing to concatenate"))?;
        let mut data = Vec::new();
        let mut channels = 0;
        for m in maps {
            if (m.height, m.width) != (first.height, first.width) {
                return Err(Error::param("maps", "spatial shapes differ"));
            }
            data.extend_from_slice(&m.data);
            channels += m.channels;
        }
        Ok(first.with_data(channels, data))
    }

    /// Channel `c` of a single-channel map repeated `channels` times.
    pub(crate) fn broadcast(&self, channels: usize) -> Self {
        debug_assert_eq!(self.channels, 1);
        self.with_data(channels, self.data.repeat(channels))
    }

    pub fn to_stack(&self, pitch: f64) -> Stack {
        Stack {
            width: self.width,
            height: self.height,
            channels: self.channels,
            pitch,
            wavelength: None,
            data: self.data.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    /// Real planes of a stack; imaginary parts must be zero.
    pub fn from_stack(stack: &Stack) -> Result<Self> {
        if let Some(index) = stack.data.iter().position(|c| c.im != 0.0) {
            return Err(Error::Format {
                format: "WPCF",
                reason: format!("sample {index} of a feature map has a nonzero imaginary part"),
            });
        }
        Self::new(
            stack.channels,
            stack.height,
            stack.width,
            stack.data.iter().map(|c| c.re).collect(),
        )
    }
}

/// Dense row-major matrix used for channel mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param("matrix", format!("{} entries for {rows}x{cols}", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// `out_i = sum_j M[i][j] f_j` over channels.
pub fn mix_channels(m: &Matrix, f: &FeatureMap) -> Result<FeatureMap> {
    if m.cols != f.channels {
        return Err(Error::param(
            "matrix",
            format!("{}x{} mixing matrix applied to {} channels", m.rows, m.cols, f.channels),
        ));
    }
    let n = f.plane_len();
    let mut out = vec![0.0; m.rows * n];
    for i in 0..m.rows {
        let dst = &mut out[i * n..(i + 1) * n];
        for j in 0..m.cols {
            let a = m.get(i, j);
            if a == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(f.plane(j)) {
                *d += a * s;
            }
        }
    }
    Ok(f.with_data(m.rows, out))
}

/// Per-pixel row vector times `m`: `out_k = sum_c f_c M[c][k]`.
pub fn project_channels(f: &FeatureMap, m: &Matrix) -> Result<FeatureMap> {
    mix_channels(&m.transpose(), f)
}

/// Per-channel zero-padded convolution with the unit-mass Gaussian truncated
/// at `ceil(3 sigma)`.
pub fn gaussian_conv(f: &FeatureMap, sigma: f64) -> Result<FeatureMap> {
    let kernel = GaussianKernel::three_sigma(sigma)?;
    let mut data = Vec::with_capacity(f.data.len());
    for c in 0..f.channels {
        data.extend(kernel.convolve_real(f.plane(c), f.width, f.height));
    }
    Ok(f.with_data(f.channels, data))
}
