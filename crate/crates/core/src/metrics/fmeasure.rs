use super::MaskPair;
use crate::error::{Error, Result};

pub const F_BETA_SQ: f64 = 0.3;
pub const THRESHOLDS: usize = 256;

/// 8-bit quantization used by the threshold sweep.
pub(crate) fn quantize(p: f64) -> usize {
    ((p * 255.0).floor() as usize).min(255)
}

pub(crate) fn f_score(tp: usize, fp: usize, positives: usize, beta_sq: f64) -> f64 {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = tp as f64 / positives as f64;
    let denom = beta_sq * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / denom
    }
}

/// `(max_f, mean_f)` over thresholds `t = 0..=255`, a pixel counting as
/// positive when `floor(255 p) > t`. An all-zero prediction selects nothing
/// at any threshold.
pub fn f_measures(pair: &MaskPair) -> Result<(f64, f64)> {
    let positives = pair.foreground_count();
    if positives == 0 {
        return Err(Error::Undefined("F-measure needs a non-empty ground truth"));
    }
    let mut fg = [0usize; THRESHOLDS];
    let mut bg = [0usize; THRESHOLDS];
    for (&p, &g) in pair.prediction().iter().zip(pair.ground_truth()) {
        let q = quantize(p);
        if g {
            fg[q] += 1;
        } else {
            bg[q] += 1;
        }
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut scores = [0.0; THRESHOLDS];
    for t in (0..THRESHOLDS).rev() {
        scores[t] = f_score(tp, fp, positives, F_BETA_SQ);
        tp += fg[t];
        fp += bg[t];
    }
    let max = scores.iter().cloned().fold(0.0, f64::max);
    let mean = scores.iter().sum::<f64>() / THRESHOLDS as f64;
    Ok((max, mean))
}
