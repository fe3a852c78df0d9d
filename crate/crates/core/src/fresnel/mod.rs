//! Band-limited Fresnel propagation.
//!
//! The forward operator multiplies the unitary spectrum by
//! `chi(f) * exp(-i pi lambda z |f|^2)`, where `chi` is the indicator of the
//! disk `|f|^2 <= 1/(lambda z)`. Inside the disk the multiplier is a pure
//! phase, so the operator is an isometry on band-limited fields and
//! `adjoint(propagate(u))` is the orthogonal projection of `u` onto the
//! band-limited subspace.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Fft2, FrequencyGrid, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSpec {
    #[serde(rename = "wavelength_m")]
    pub wavelength: f64,
    #[serde(rename = "distance_m")]
    pub distance: f64,
}

impl PropagationSpec {
    pub fn new(wavelength: f64, distance: f64) -> Result<Self> {
        let spec = Self {
            wavelength,
            distance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::param(
                "wavelength_m",
                format!("{} must be positive", self.wavelength),
            ));
        }
        if !(self.distance.is_finite() && self.distance >= 0.0) {
            return Err(Error::param(
                "distance_m",
                format!("{} must be non-negative", self.distance),
            ));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// `1/(lambda z)`; infinite at `z = 0`, where every frequency passes.
    pub fn passband_radius_sqr(&self) -> f64 {
        if self.distance == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (self.wavelength * self.distance)
        }
    }

    pub fn passband_radius(&self) -> f64 {
        self.passband_radius_sqr().sqrt()
    }

    pub fn sampling(&self, width: usize, height: usize, pitch: f64) -> SamplingAdvisory {
        let n = width.min(height) as f64;
        let critical_distance = n * pitch * pitch / self.wavelength;
        SamplingAdvisory {
            undersampled: n * pitch * pitch < self.wavelength * self.distance,
            critical_distance,
        }
    }
}

/// Transfer-function sampling check: the quadratic-phase multiplier is
/// adequately sampled while `N * pitch^2 >= lambda * z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingAdvisory {
    pub undersampled: bool,
    /// Largest distance (m) at which the multiplier is still adequately sampled.
    pub critical_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferMask {
    width: usize,
    height: usize,
    values: Vec<C64>,
    passband: Vec<bool>,
}

impl TransferMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn passband(&self) -> &[bool] {
        &self.passband
    }

    pub fn value(&self, kx: usize, ky: usize) -> C64 {
        self.values[ky * self.width + kx]
    }

    pub fn in_band(&self, kx: usize, ky: usize) -> bool {
        self.passband[ky * self.width + kx]
    }
}

pub fn transfer_mask(spec: &PropagationSpec, grid: &FrequencyGrid) -> TransferMask {
    let (width, height) = (grid.width(), grid.height());
    let mut values = Vec::with_capacity(width * height);
    let mut passband = Vec::with_capacity(width * height);
    let limit = spec.passband_radius_sqr();
    for ky in 0..height {
        for kx in 0..width {
            let f2 = grid.radius_sqr(kx, ky);
            let inside = spec.distance == 0.0 || f2 <= limit;
            passband.push(inside);
            values.push(if !inside {
                C64::new(0.0, 0.0)
            } else if spec.distance == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(1.0, -PI * spec.wavelength * spec.distance * f2)
            });
        }
    }
    TransferMask {
        width,
        height,
        values,
        passband,
    }
}

/// Precomputed operator for one grid and one propagation distance.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: PropagationSpec,
    pitch: f64,
    mask: TransferMask,
    fft: Fft2,
    sampling: SamplingAdvisory,
}

impl Propagator {
    pub fn new(spec: PropagationSpec, width: usize, height: usize, pitch: f64) -> Result<Self> {
        spec.validate()?;
        let grid = FrequencyGrid::new(width, height, pitch)?;
        Ok(Self {
            mask: transfer_mask(&spec, &grid),
            fft: Fft2::new(width, height),
            sampling: spec.sampling(width, height, pitch),
            spec,
            pitch,
        })
    }

    pub fn for_field(spec: PropagationSpec, like: &ComplexField) -> Result<Self> {
        Self::new(spec, like.width(), like.height(), like.pitch())
    }

    pub fn spec(&self) -> &PropagationSpec {
        &self.spec
    }

    pub fn mask(&self) -> &TransferMask {
        &self.mask
    }

    pub fn sampling(&self) -> SamplingAdvisory {
        self.sampling
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mask.width, self.mask.height)
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        if field.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: field.shape(),
            });
        }
        // Pitches are compared exactly; the mask was sampled for this pitch.
        if field.pitch() != self.pitch {
            return Err(Error::param(
                "pitch",
                format!("field pitch {} != operator pitch {}", field.pitch(), self.pitch),
            ));
        }
        field.check_finite()
    }

    fn filter(&self, field: &ComplexField, multiplier: impl Fn(usize) -> C64) -> Result<ComplexField> {
        self.check(field)?;
        let mut data = field.data().to_vec();
        self.fft.forward_in_place(&mut data);
        for (i, s) in data.iter_mut().enumerate() {
            *s *= multiplier(i);
        }
        self.fft.inverse_in_place(&mut data);
        Ok(field.with_data(data))
    }

    /// `T_z u`.
    pub fn propagate(&self, field: &ComplexField) -> Result<ComplexField> {
        self.filter(field, |i| self.mask.values[i])
    }

    /// `T_z^dagger u`.
    pub fn adjoint(&self, field: &ComplexField) -> Result<ComplexField> {
        self.filter(field, |i| self.mask.values[i].conj())
    }

    /// `T_z^dagger T_z u`, the ideal band-limit.
    pub fn project(&self, field: &ComplexField) -> Result<ComplexField> {
        self.filter(field, |i| {
            if self.mask.passband[i] {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `u - P u`.
    pub fn reject(&self, field: &ComplexField) -> Result<ComplexField> {
        self.filter(field, |i| {
            if self.mask.passband[i] {
                C64::new(0.0, 0.0)
            } else {
                C64::new(1.0, 0.0)
            }
        })
    }

    /// L2 norm of the spectrum restricted to (`inside = true`) or outside the passband.
    pub fn band_mass(&self, field: &ComplexField, inside: bool) -> Result<f64> {
        self.check(field)?;
        let mut data = field.data().to_vec();
        self.fft.forward_in_place(&mut data);
        Ok(data
            .iter()
            .zip(&self.mask.passband)
            .filter(|(_, &p)| p == inside)
            .map(|(s, _)| s.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn out_of_band_mass(&self, field: &ComplexField) -> Result<f64> {
        self.band_mass(field, false)
    }

    pub fn in_band_mass(&self, field: &ComplexField) -> Result<f64> {
        self.band_mass(field, true)
    }
}

pub fn propagate(field: &ComplexField, spec: &PropagationSpec) -> Result<ComplexField> {
    Propagator::for_field(*spec, field)?.propagate(field)
}

pub fn adjoint_propagate(field: &ComplexField, spec: &PropagationSpec) -> Result<ComplexField> {
    Propagator::for_field(*spec, field)?.adjoint(field)
}

pub fn project_subspace(field: &ComplexField, spec: &PropagationSpec) -> Result<ComplexField> {
    Propagator::for_field(*spec, field)?.project(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward_spectrum, frequency_grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PITCH: f64 = 10e-6;
    const LAMBDA: f64 = 633e-9;

    fn random_field(w: usize, h: usize, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ComplexField::from_fn(w, h, PITCH, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap();
        let n = f.l2_norm();
        f.scale(C64::new(1.0 / n, 0.0))
    }

    fn rel(a: &ComplexField, b: &ComplexField) -> f64 {
        a.sub(b).unwrap().l2_norm() / b.l2_norm()
    }

    #[test]
    fn mask_values() {
        let g = frequency_grid(8, 8, 1.0).unwrap();
        let spec = PropagationSpec::new(2.0, 2.0).unwrap();
        let m = transfer_mask(&spec, &g);
        assert_eq!(m.value(0, 0), C64::new(1.0, 0.0));
        // |f|^2 = 0.25 = 1/(lambda z): boundary is inclusive, exp(-i pi) = -1
        let g = frequency_grid(4, 4, 1.0).unwrap();
        let m = transfer_mask(&spec, &g);
        assert!(m.in_band(2, 0));
        assert!((m.value(2, 0) - C64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(!m.in_band(2, 2));
        assert_eq!(m.value(2, 2), C64::new(0.0, 0.0));
        for (v, &p) in m.values().iter().zip(m.passband()) {
            if p {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn passband_radius_arithmetic() {
        let spec = PropagationSpec::new(1e-6, 0.1).unwrap();
        assert!((spec.passband_radius() - 3162.2776601683795).abs() < 1e-9);
    }

    #[test]
    fn zero_distance_is_identity() {
        let u = random_field(12, 10, 1);
        let spec = PropagationSpec::new(LAMBDA, 0.0).unwrap();
        let p = Propagator::for_field(spec, &u).unwrap();
        assert!(p.mask().passband().iter().all(|&b| b));
        assert!(rel(&p.propagate(&u).unwrap(), &u) < 1e-14);
        assert!(rel(&p.adjoint(&u).unwrap(), &u) < 1e-14);
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(PropagationSpec::new(0.0, 1.0).is_err());
        assert!(PropagationSpec::new(1e-6, -1.0).is_err());
        assert!(PropagationSpec::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn adjoint_identity_and_recovery() {
        let spec = PropagationSpec::new(LAMBDA, 0.01).unwrap();
        let u = random_field(32, 32, 2);
        let v = random_field(32, 32, 3);
        let p = Propagator::for_field(spec, &u).unwrap();
        let lhs = p.propagate(&u).unwrap().inner_product(&v).unwrap();
        let rhs = u.inner_product(&p.adjoint(&v).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-10);

        let back = p.adjoint(&p.propagate(&u).unwrap()).unwrap();
        assert!(back.sub(&p.project(&u).unwrap()).unwrap().l2_norm() < 1e-10);
    }

    #[test]
    fn projector_properties() {
        let spec = PropagationSpec::new(LAMBDA, 0.02).unwrap();
        let u = random_field(24, 20, 4);
        let p = Propagator::for_field(spec, &u).unwrap();
        let pu = p.project(&u).unwrap();
        assert!(rel(&p.project(&pu).unwrap(), &pu) < 1e-12);
        assert!(pu.l2_norm() <= u.l2_norm());
        let rest = u.sub(&pu).unwrap();
        assert!(pu.inner_product(&rest).unwrap().norm() < 1e-10);
        assert!(p.out_of_band_mass(&pu).unwrap() <= 1e-12);
        assert!(p.in_band_mass(&p.reject(&u).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn out_of_band_sinusoid_is_annihilated() {
        let spec = PropagationSpec::new(LAMBDA, 0.05).unwrap();
        // passband radius ~ 5620 /m; bin 20 on 32 px at 10 um is 62500 /m.
        let u = ComplexField::from_fn(32, 32, PITCH, |x, _| {
            C64::from_polar(1.0, 2.0 * PI * 20.0 * x as f64 / 32.0)
        })
        .unwrap();
        let out = project_subspace(&u, &spec).unwrap();
        assert!(out.l2_norm() <= 1e-12 * u.l2_norm());
    }

    #[test]
    fn band_limited_isometry() {
        let spec = PropagationSpec::new(LAMBDA, 0.01).unwrap();
        let u = project_subspace(&random_field(32, 32, 5), &spec).unwrap();
        let out = propagate(&u, &spec).unwrap();
        assert!((out.l2_norm() - u.l2_norm()).abs() <= 1e-10 * u.l2_norm());
        let s = forward_spectrum(&out).unwrap();
        let p = Propagator::for_field(spec, &u).unwrap();
        let leak: f64 = s
            .data()
            .iter()
            .zip(p.mask().passband())
            .filter(|(_, &b)| !b)
            .map(|(c, _)| c.norm_sqr())
            .sum();
        assert!(leak.sqrt() <= 1e-12);
    }

    #[test]
    fn pitch_or_shape_mismatch_rejected() {
        let spec = PropagationSpec::new(LAMBDA, 0.01).unwrap();
        let p = Propagator::new(spec, 8, 8, PITCH).unwrap();
        let other = ComplexField::zeros(8, 8, 2.0 * PITCH).unwrap();
        assert!(p.propagate(&other).is_err());
        let other = ComplexField::zeros(8, 9, PITCH).unwrap();
        assert!(matches!(p.propagate(&other), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn sampling_flag() {
        let spec = PropagationSpec::new(LAMBDA, 0.05).unwrap();
        // 256 * (10 um)^2 = 2.56e-8 < 633e-9 * 0.05 = 3.165e-8
        assert!(spec.sampling(256, 256, PITCH).undersampled);
        assert!(!spec.sampling(512, 512, PITCH).undersampled);
    }

    #[test]
    fn serde_keys() {
        let spec: PropagationSpec =
            serde_json::from_str(r#"{"wavelength_m": 5e-7, "distance_m": 0.1}"#).unwrap();
        assert_eq!(spec, PropagationSpec::new(5e-7, 0.1).unwrap());
    }
}
