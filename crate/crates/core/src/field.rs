//! Sampled complex fields and the unitary 2-D spectral transform.
//!
//! Fields are stored row-major (`data[y * width + x]`). Spectra share the
//! same container; bin `(kx, ky)` is laid out in transform order, DC first
//! and negative frequencies in the upper half of each axis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    pitch: f64,
    data: Vec<C64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, pitch: f64, data: Vec<C64>) -> Result<Self> {
        check_dims(width, height)?;
        check_pitch(pitch)?;
        if data.len() != width * height {
            return Err(Error::param(
                "data",
                format!("length {} != {}x{}", data.len(), width, height),
            ));
        }
        if let Some(index) = data.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            pitch,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, pitch: f64) -> Result<Self> {
        Self::new(width, height, pitch, vec![C64::new(0.0, 0.0); width * height])
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel index.
    pub fn from_fn(
        width: usize,
        height: usize,
        pitch: f64,
        mut f: impl FnMut(usize, usize) -> C64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, pitch, data)
    }

    pub fn from_real(width: usize, height: usize, pitch: f64, values: &[f64]) -> Result<Self> {
        Self::new(
            width,
            height,
            pitch,
            values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        )
    }

    /// Same grid as `self`, new samples. Samples are not re-validated.
    pub(crate) fn with_data(&self, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            width: self.width,
            height: self.height,
            pitch: self.pitch,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> C64 {
        self.data[y * self.width + x]
    }

    /// Rejects the field if any sample is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn ensure_same_shape(&self, other: &ComplexField) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Hermitian inner product `sum(conj(self) * other)`.
    pub fn inner_product(&self, other: &ComplexField) -> Result<C64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn pointwise_multiply(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: C64) -> ComplexField {
        self.map(|c| c * factor)
    }

    pub fn conj(&self) -> ComplexField {
        self.map(|c| c.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> ComplexField {
        self.with_data(self.data.iter().map(|&c| f(c)).collect())
    }

    pub fn zip_with(
        &self,
        other: &ComplexField,
        f: impl Fn(C64, C64) -> C64,
    ) -> Result<ComplexField> {
        self.ensure_same_shape(other)?;
        Ok(self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// `|u|^2` per pixel.
    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn frequency_grid(&self) -> FrequencyGrid {
        FrequencyGrid::new_unchecked(self.width, self.height, self.pitch)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param(
            "shape",
            format!("{width}x{height} has no samples"),
        ));
    }
    Ok(())
}

fn check_pitch(pitch: f64) -> Result<()> {
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(Error::param("pitch", format!("{pitch} is not a positive finite length")));
    }
    Ok(())
}

/// Per-axis spatial frequencies (cycles/meter) in transform order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(width: usize, height: usize, pitch: f64) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::param(
                "shape",
                format!("frequency grid needs at least 2x2 samples, got {width}x{height}"),
            ));
        }
        check_pitch(pitch)?;
        Ok(Self::new_unchecked(width, height, pitch))
    }

    pub(crate) fn new_unchecked(width: usize, height: usize, pitch: f64) -> Self {
        Self {
            fx: axis_frequencies(width, pitch),
            fy: axis_frequencies(height, pitch),
        }
    }

    pub fn width(&self) -> usize {
        self.fx.len()
    }

    pub fn height(&self) -> usize {
        self.fy.len()
    }

    /// `|f|^2` at bin `(kx, ky)`.
    pub fn radius_sqr(&self, kx: usize, ky: usize) -> f64 {
        self.fx[kx] * self.fx[kx] + self.fy[ky] * self.fy[ky]
    }
}

/// Signed bin index of sample `j` on an `n`-point axis.
pub fn signed_bin(j: usize, n: usize) -> isize {
    if j < n.div_ceil(2) {
        j as isize
    } else {
        j as isize - n as isize
    }
}

fn axis_frequencies(n: usize, pitch: f64) -> Vec<f64> {
    (0..n)
        .map(|j| signed_bin(j, n) as f64 / (n as f64 * pitch))
        .collect()
}

/// Convenience wrapper around [`FrequencyGrid::new`].
pub fn frequency_grid(width: usize, height: usize, pitch: f64) -> Result<FrequencyGrid> {
    FrequencyGrid::new(width, height, pitch)
}

/// Planned unitary 2-D DFT for one grid shape.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn forward_in_place(&self, data: &mut [C64]) {
        self.transform(data, true);
    }

    pub fn inverse_in_place(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [C64], forward: bool) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h, "buffer does not match planned shape");
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process(data);

        let mut columns = vec![C64::new(0.0, 0.0); w * h];
        for y in 0..h {
            for x in 0..w {
                columns[x * h + y] = data[y * w + x];
            }
        }
        col.process(&mut columns);

        let scale = 1.0 / ((w * h) as f64).sqrt();
        for x in 0..w {
            for y in 0..h {
                data[y * w + x] = columns[x * h + y] * scale;
            }
        }
    }

    pub fn forward(&self, field: &ComplexField) -> Result<ComplexField> {
        self.apply(field, true)
    }

    pub fn inverse(&self, spectrum: &ComplexField) -> Result<ComplexField> {
        self.apply(spectrum, false)
    }

    fn apply(&self, field: &ComplexField, forward: bool) -> Result<ComplexField> {
        if field.shape() != (self.width, self.height) {
            return Err(Error::ShapeMismatch {
                expected: (self.width, self.height),
                found: field.shape(),
            });
        }
        field.check_finite()?;
        let mut data = field.data.clone();
        self.transform(&mut data, forward);
        Ok(field.with_data(data))
    }
}

/// Unitary forward transform (scale `1/sqrt(width*height)`).
pub fn forward_spectrum(field: &ComplexField) -> Result<ComplexField> {
    Fft2::new(field.width, field.height).forward(field)
}

/// Exact inverse of [`forward_spectrum`].
pub fn inverse_spectrum(spectrum: &ComplexField) -> Result<ComplexField> {
    Fft2::new(spectrum.width, spectrum.height).inverse(spectrum)
}
