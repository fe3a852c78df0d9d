//! Saliency evaluation: MAE, max/mean F-measure, weighted F-measure,
//! S-measure and adaptive E-measure.
//!
//! Constants follow the usual saliency-benchmark conventions:
//!
//! | metric        | constants                                                   |
//! |---------------|-------------------------------------------------------------|
//! | Max-F, Mean-F | beta^2 = 0.3, thresholds t = 0..=255 on `floor(255 p)`      |
//! | Fbw           | beta^2 = 1, 7x7 Gaussian sigma = 5, decay ln(0.5)/5         |
//! | S-measure     | alpha = 0.5, quadrants split at the rounded gt centroid + 1 |
//! | E-measure     | threshold `min(2 mean(p), 1)`, mean over all N pixels       |
//!
//! `EPS` is the f64 machine epsilon wherever a denominator is guarded.

mod batch;
mod enhanced;
mod fmeasure;
mod structure;
mod weighted;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use batch::{evaluate_directories, evaluate_files, pair_from_images, BatchReport, ImageReport, MeanScores};
pub use enhanced::e_measure;
pub use fmeasure::{f_measures, F_BETA_SQ, THRESHOLDS};
pub use structure::{s_measure, S_ALPHA};
pub use weighted::{nearest_foreground, weighted_fbw, FBW_BETA_SQ, FBW_KERNEL_SIGMA, FBW_KERNEL_SIZE};

pub const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    width: usize,
    height: usize,
    prediction: Vec<f64>,
    ground_truth: Vec<bool>,
}

impl MaskPair {
    pub fn new(width: usize, height: usize, prediction: Vec<f64>, ground_truth: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(Error::param("shape", "masks must be non-empty"));
        }
        if prediction.len() != n || ground_truth.len() != n {
            return Err(Error::param(
                "masks",
                format!(
                    "{} prediction and {} ground-truth samples for {width}x{height}",
                    prediction.len(),
                    ground_truth.len()
                ),
            ));
        }
        if let Some(index) = prediction.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param(
                "prediction",
                format!("sample {index} = {} outside [0, 1]", prediction[index]),
            ));
        }
        Ok(Self {
            width,
            height,
            prediction,
            ground_truth,
        })
    }

    /// Ground truth given as reals: must be exactly 0 or 1.
    pub fn from_real_gt(width: usize, height: usize, prediction: Vec<f64>, gt: &[f64]) -> Result<Self> {
        if let Some(index) = gt.iter().position(|&g| g != 0.0 && g != 1.0) {
            return Err(Error::param(
                "ground_truth",
                format!("sample {index} = {} is not binary", gt[index]),
            ));
        }
        Self::new(width, height, prediction, gt.iter().map(|&g| g == 1.0).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    pub fn ground_truth(&self) -> &[bool] {
        &self.ground_truth
    }

    pub fn foreground_count(&self) -> usize {
        self.ground_truth.iter().filter(|&&g| g).count()
    }

    /// Copy with the prediction stretched to `[0, 1]`; constant predictions are kept.
    pub fn normalized(&self) -> Self {
        let (lo, hi) = self
            .prediction
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        let mut out = self.clone();
        if hi > lo {
            for p in &mut out.prediction {
                *p = (*p - lo) / (hi - lo);
            }
        }
        out
    }
}

pub fn mae(pair: &MaskPair) -> f64 {
    let total: f64 = pair
        .prediction
        .iter()
        .zip(&pair.ground_truth)
        .map(|(&p, &g)| (p - if g { 1.0 } else { 0.0 }).abs())
        .sum();
    total / pair.prediction.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Min-max normalize each prediction before scoring.
    pub normalize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { normalize: true }
    }
}

/// The six scores. F-based scores are `None` when the ground truth has no
/// foreground, where precision and recall are undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub max_f: Option<f64>,
    pub mean_f: Option<f64>,
    pub fbw: Option<f64>,
    pub mae: f64,
    pub s_measure: f64,
    pub e_measure: f64,
}

pub fn evaluate(pair: &MaskPair, options: &EvalOptions) -> EvalReport {
    let normalized;
    let pair = if options.normalize {
        normalized = pair.normalized();
        &normalized
    } else {
        pair
    };
    let f = f_measures(pair).ok();
    EvalReport {
        max_f: f.map(|f| f.0),
        mean_f: f.map(|f| f.1),
        fbw: weighted_fbw(pair).ok(),
        mae: mae(pair),
        s_measure: s_measure(pair),
        e_measure: e_measure(pair),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(w: usize, h: usize, p: &[f64], g: &[u8]) -> MaskPair {
        MaskPair::new(w, h, p.to_vec(), g.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn mae_cases() {
        let gt = [1, 0, 1, 1];
        let p = pair(2, 2, &[1.0, 0.0, 1.0, 1.0], &gt);
        assert_eq!(mae(&p), 0.0);
        let p = pair(2, 2, &[0.5; 4], &[0, 0, 0, 0]);
        assert_eq!(mae(&p), 0.5);
        let p = pair(
            4,
            4,
            &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.0, 0.0, 0.25, 0.75, 0.5, 0.5],
            &[0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0],
        );
        let expect = (0.1 + 0.2 + 0.7 + 0.6 + 0.5 + 0.4 + 0.7 + 0.2 + 0.1 + 0.0 + 0.0 + 1.0 + 0.25 + 0.75 + 0.5 + 0.5) / 16.0;
        assert!((mae(&p) - expect).abs() < 1e-15);
    }

    #[test]
    fn invalid_pairs() {
        assert!(MaskPair::new(2, 2, vec![0.0; 3], vec![false; 4]).is_err());
        assert!(MaskPair::new(1, 1, vec![1.5], vec![false]).is_err());
        assert!(MaskPair::from_real_gt(1, 1, vec![0.5], &[0.5]).is_err());
    }

    #[test]
    fn identity_scores_one() {
        let gt = [0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0];
        let p = pair(4, 4, &gt.map(|g| g as f64), &gt);
        let r = evaluate(&p, &EvalOptions::default());
        assert_eq!(r.mae, 0.0);
        assert!((r.max_f.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.fbw.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.s_measure - 1.0).abs() < 1e-12);
        assert!((r.e_measure - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_ground_truth_is_undefined_for_f_scores() {
        let p = pair(3, 3, &[0.2; 9], &[0; 9]);
        let r = evaluate(&p, &EvalOptions::default());
        assert!(r.max_f.is_none() && r.mean_f.is_none() && r.fbw.is_none());
        assert!((r.s_measure - 0.8).abs() < 1e-15);
        let json = serde_json::to_value(r).unwrap();
        assert!(json["max_f"].is_null());
    }

    #[test]
    fn normalization_toggle() {
        let p = pair(2, 1, &[0.2, 0.4], &[0, 1]);
        assert_eq!(p.normalized().prediction(), &[0.0, 1.0]);
        let off = evaluate(&p, &EvalOptions { normalize: false });
        assert!((off.mae - 0.4).abs() < 1e-15);
        let on = evaluate(&p, &EvalOptions::default());
        assert_eq!(on.mae, 0.0);
        let flat = pair(2, 1, &[0.5, 0.5], &[0, 1]);
        assert_eq!(flat.normalized(), flat);
    }
}
