//! Directory-level evaluation: predictions and ground truths paired by file stem.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalOptions, EvalReport, MaskPair};
use crate::error::{Error, Result};
use crate::image_io::{load_gray, GrayImage};

const EXTENSIONS: [&str; 3] = ["pgm", "png", "wpcf"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub name: String,
    pub width: usize,
    pub height: usize,
    #[serde(flatten)]
    pub scores: EvalReport,
}

/// Means skip images where a score is undefined; a mean with no defined
/// inputs is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub max_f: Option<f64>,
    pub mean_f: Option<f64>,
    pub fbw: Option<f64>,
    pub mae: Option<f64>,
    pub s_measure: Option<f64>,
    pub e_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub images: Vec<ImageReport>,
    pub mean: MeanScores,
    pub unmatched_predictions: Vec<String>,
    pub unmatched_ground_truths: Vec<String>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MeanScores {
    pub fn of(images: &[ImageReport]) -> Self {
        let col = |f: fn(&EvalReport) -> Option<f64>| mean_of(images.iter().map(|r| f(&r.scores)));
        Self {
            max_f: col(|s| s.max_f),
            mean_f: col(|s| s.mean_f),
            fbw: col(|s| s.fbw),
            mae: col(|s| Some(s.mae)),
            s_measure: col(|s| Some(s.s_measure)),
            e_measure: col(|s| Some(s.e_measure)),
        }
    }
}

fn by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !path.is_file() || !ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if let Some(previous) = out.insert(stem.to_string(), path.clone()) {
                return Err(Error::param(
                    "directory",
                    format!("{} and {} share a stem", previous.display(), path.display()),
                ));
            }
        }
    }
    Ok(out)
}

/// Builds a pair from a raw prediction and a ground truth binarized at 0.5.
/// With `normalize` the prediction may have any finite range.
pub fn pair_from_images(pred: &GrayImage, gt: &GrayImage, options: &EvalOptions) -> Result<MaskPair> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::ShapeMismatch {
            expected: (gt.width, gt.height),
            found: (pred.width, pred.height),
        });
    }
    if let Some(index) = pred.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut values = pred.values.clone();
    if options.normalize {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        if hi > lo {
            values.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
        } else {
            values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        }
    }
    MaskPair::new(gt.width, gt.height, values, gt.values.iter().map(|&g| g > 0.5).collect())
}

pub fn evaluate_files(pred: &Path, gt: &Path, options: &EvalOptions) -> Result<ImageReport> {
    let pair = pair_from_images(&load_gray(pred)?, &load_gray(gt)?, options)?;
    let name = pred
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    Ok(ImageReport {
        name,
        width: pair.width(),
        height: pair.height(),
        scores: evaluate(&pair, &EvalOptions { normalize: false }),
    })
}

pub fn evaluate_directories(pred_dir: &Path, gt_dir: &Path, options: &EvalOptions) -> Result<BatchReport> {
    let preds = by_stem(pred_dir)?;
    let gts = by_stem(gt_dir)?;
    let mut images = Vec::new();
    let mut unmatched_predictions = Vec::new();
    for (stem, path) in &preds {
        match gts.get(stem) {
            Some(gt) => {
                let mut report = evaluate_files(path, gt, options)?;
                report.name = stem.clone();
                images.push(report);
            }
            None => unmatched_predictions.push(stem.clone()),
        }
    }
    let unmatched_ground_truths = gts.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    Ok(BatchReport {
        mean: MeanScores::of(&images),
        images,
        unmatched_predictions,
        unmatched_ground_truths,
    })
}
