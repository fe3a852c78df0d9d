//! Synthetic occluded-scene forward model.
//!
//! A real amplitude object is propagated to a rough relay wall, multiplied by
//! a unit-modulus random phase screen, propagated again and detected as noisy
//! intensity:
//!
//! ```text
//! E = T_z2[ screen * T_z1[mask] ],   I = |E|^2 + noise, clamped at 0
//! ```
//!
//! All randomness comes from ChaCha8 seeded with the scene seed; the object,
//! the screen and the noise each draw from their own stream, so changing the
//! noise model does not change the screen.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{signed_bin, ComplexField, Fft2, C64};
use crate::fresnel::{PropagationSpec, Propagator};
use crate::image_io::load_gray;

const STREAM_OBJECT: u64 = 0;
const STREAM_SCREEN: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSpec {
    /// Centered disk.
    Disk { radius_px: f64 },
    /// Centered axis-aligned rectangle.
    Rectangle { width_px: f64, height_px: f64 },
    /// Union of `count` disks at seeded random positions.
    RandomBlobs { count: usize, radius_px: f64 },
    /// Grayscale image file (PGM or PNG) with the scene's dimensions.
    Image { path: PathBuf },
    /// Explicit amplitudes, row-major.
    Mask { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    #[default]
    None,
    /// Additive `N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// Additive Gaussian with `sigma^2 = mean(I^2) / 10^(snr_db/10)`.
    GaussianSnr { snr_db: f64 },
    /// `Poisson(scale * I) / scale`.
    Poisson { scale: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, v: f64| Err(Error::param(name, format!("{v} is not allowed")));
        match *self {
            NoiseModel::Gaussian { sigma } if !(sigma.is_finite() && sigma >= 0.0) => bad("sigma", sigma),
            NoiseModel::GaussianSnr { snr_db } if !snr_db.is_finite() => bad("snr_db", snr_db),
            NoiseModel::Poisson { scale } if !(scale.is_finite() && scale > 0.0) => bad("scale", scale),
            _ => Ok(()),
        }
    }

    /// Nominal noise variance for a clean intensity image.
    pub fn variance(&self, clean: &[f64]) -> f64 {
        let n = clean.len() as f64;
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::GaussianSnr { snr_db } => signal_power(clean) / 10f64.powf(snr_db / 10.0),
            NoiseModel::Poisson { scale } => clean.iter().sum::<f64>() / n / scale,
        }
    }
}

fn signal_power(clean: &[f64]) -> f64 {
    clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub pitch_m: f64,
    pub wavelength_m: f64,
    pub z1_m: f64,
    pub z2_m: f64,
    pub object: ObjectSpec,
    pub screen_correlation_length_m: f64,
    pub screen_phase_std_rad: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            pitch_m: 10e-6,
            wavelength_m: 633e-9,
            z1_m: 2e-3,
            z2_m: 3e-3,
            object: ObjectSpec::Disk { radius_px: 12.0 },
            screen_correlation_length_m: 40e-6,
            screen_phase_std_rad: 0.2,
            noise: NoiseModel::GaussianSnr { snr_db: 20.0 },
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::param("width", "scene must be at least 2x2"));
        }
        if !(self.pitch_m.is_finite() && self.pitch_m > 0.0) {
            return Err(Error::param("pitch_m", format!("{} must be positive", self.pitch_m)));
        }
        PropagationSpec::new(self.wavelength_m, self.z1_m)?;
        PropagationSpec::new(self.wavelength_m, self.z2_m)?;
        let l = self.screen_correlation_length_m;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::param("screen_correlation_length_m", format!("{l} must be positive")));
        }
        let s = self.screen_phase_std_rad;
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::param("screen_phase_std_rad", format!("{s} must be non-negative")));
        }
        match &self.object {
            ObjectSpec::Disk { radius_px } if radius_px.is_nan() || *radius_px < 0.0 => {
                return Err(Error::param("radius_px", "must be non-negative"))
            }
            ObjectSpec::Rectangle { width_px, height_px } if !(*width_px >= 0.0 && *height_px >= 0.0) => {
                return Err(Error::param("width_px", "rectangle sides must be non-negative"))
            }
            ObjectSpec::RandomBlobs { radius_px, .. } if radius_px.is_nan() || *radius_px < 0.0 => {
                return Err(Error::param("radius_px", "must be non-negative"))
            }
            _ => {}
        }
        self.noise.validate()
    }

    pub fn spec_z1(&self) -> Result<PropagationSpec> {
        PropagationSpec::new(self.wavelength_m, self.z1_m)
    }

    pub fn spec_z2(&self) -> Result<PropagationSpec> {
        PropagationSpec::new(self.wavelength_m, self.z2_m)
    }

    /// The single propagation from object to wall when the screen is ignored.
    pub fn spec_total(&self) -> Result<PropagationSpec> {
        PropagationSpec::new(self.wavelength_m, self.z1_m + self.z2_m)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn disk(values: &mut [f64], w: usize, h: usize, cx: f64, cy: f64, radius: f64) {
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= radius * radius {
                values[y * w + x] = 1.0;
            }
        }
    }
}

/// Object amplitude in `[0, 1]`.
pub fn object_mask(cfg: &SceneConfig) -> Result<Vec<f64>> {
    let (w, h) = (cfg.width, cfg.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut values = vec![0.0; w * h];
    match &cfg.object {
        ObjectSpec::Disk { radius_px } => disk(&mut values, w, h, cx, cy, *radius_px),
        ObjectSpec::Rectangle { width_px, height_px } => {
            for y in 0..h {
                for x in 0..w {
                    if (x as f64 - cx).abs() <= width_px / 2.0 && (y as f64 - cy).abs() <= height_px / 2.0 {
                        values[y * w + x] = 1.0;
                    }
                }
            }
        }
        ObjectSpec::RandomBlobs { count, radius_px } => {
            let mut rng = cfg.rng(STREAM_OBJECT);
            for _ in 0..*count {
                let bx = rng.random_range(0.25..0.75) * w as f64;
                let by = rng.random_range(0.25..0.75) * h as f64;
                disk(&mut values, w, h, bx, by, *radius_px);
            }
        }
        ObjectSpec::Image { path } => {
            let img = load_gray(path)?;
            if (img.width, img.height) != (w, h) {
                return Err(Error::ShapeMismatch {
                    expected: (w, h),
                    found: (img.width, img.height),
                });
            }
            values = img.values;
        }
        ObjectSpec::Mask { values: v } => {
            if v.len() != w * h {
                return Err(Error::param("values", format!("{} samples for {w}x{h}", v.len())));
            }
            values = v.clone();
        }
    }
    if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::param("object", format!("sample {i} = {} outside [0, 1]", values[i])));
    }
    Ok(values)
}

/// `exp(i phi)` with `phi` a Gaussian random field of correlation
/// `exp(-r^2 / l^2)` and the configured standard deviation.
pub fn make_phase_screen(cfg: &SceneConfig) -> Result<ComplexField> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = cfg.rng(STREAM_SCREEN);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut buf: Vec<C64> = (0..w * h).map(|_| C64::new(normal.sample(&mut rng), 0.0)).collect();
    if cfg.screen_phase_std_rad == 0.0 {
        return ComplexField::new(w, h, cfg.pitch_m, vec![C64::new(1.0, 0.0); w * h]);
    }
    let fft = Fft2::new(w, h);
    fft.forward_in_place(&mut buf);
    let l = cfg.screen_correlation_length_m;
    let mut filter = Vec::with_capacity(w * h);
    for ky in 0..h {
        let fy = signed_bin(ky, h) as f64 / (h as f64 * cfg.pitch_m);
        for kx in 0..w {
            let fx = signed_bin(kx, w) as f64 / (w as f64 * cfg.pitch_m);
            filter.push((-PI * PI * l * l * (fx * fx + fy * fy) / 2.0).exp());
        }
    }
    let norm = (filter.iter().map(|f| f * f).sum::<f64>() / (w * h) as f64).sqrt();
    for (b, f) in buf.iter_mut().zip(&filter) {
        *b *= f / norm;
    }
    fft.inverse_in_place(&mut buf);
    let std = cfg.screen_phase_std_rad;
    ComplexField::new(
        w,
        h,
        cfg.pitch_m,
        buf.iter().map(|b| C64::from_polar(1.0, std * b.re)).collect(),
    )
}

/// Adds noise and clamps at zero. `seed` selects the noise stream's key.
pub fn add_noise(intensity: &[f64], model: &NoiseModel, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    if let Some(i) = intensity.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("intensity", format!("sample {i} = {} is not a finite intensity", intensity[i])));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_NOISE);
    let out = match *model {
        NoiseModel::None => intensity.to_vec(),
        NoiseModel::Gaussian { .. } | NoiseModel::GaussianSnr { .. } => {
            let sigma = model.variance(intensity).sqrt();
            if sigma == 0.0 {
                return Ok(intensity.to_vec());
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("sigma", e.to_string()))?;
            intensity.iter().map(|&v| (v + normal.sample(&mut rng)).max(0.0)).collect()
        }
        NoiseModel::Poisson { scale } => intensity
            .iter()
            .map(|&v| {
                let lambda = scale * v;
                if lambda == 0.0 {
                    return Ok(0.0);
                }
                let p = Poisson::new(lambda).map_err(|e| Error::param("scale", e.to_string()))?;
                Ok(p.sample(&mut rng) / scale)
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimInstance {
    /// Object amplitude as a real field.
    pub ground_truth_field: ComplexField,
    pub clean_intensity: Vec<f64>,
    pub measured_intensity: Vec<f64>,
    /// `10 log10(mean(I^2) / noise variance)`; `+inf` without noise.
    pub snr_db: f64,
}

pub fn forward_model(cfg: &SceneConfig) -> Result<SimInstance> {
    cfg.validate()?;
    let (w, h, p) = (cfg.width, cfg.height, cfg.pitch_m);
    let u0 = ComplexField::from_real(w, h, p, &object_mask(cfg)?)?;
    let screen = make_phase_screen(cfg)?;
    let wall = Propagator::new(cfg.spec_z1()?, w, h, p)?
        .propagate(&u0)?
        .pointwise_multiply(&screen)?;
    let field = Propagator::new(cfg.spec_z2()?, w, h, p)?.propagate(&wall)?;
    let clean = field.intensity();
    let variance = cfg.noise.variance(&clean);
    let snr_db = if variance == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal_power(&clean) / variance).log10()
    };
    let measured = add_noise(&clean, &cfg.noise, cfg.seed)?;
    Ok(SimInstance {
        ground_truth_field: u0,
        clean_intensity: clean,
        measured_intensity: measured,
        snr_db,
    })
}
