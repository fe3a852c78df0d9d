//! Weighted F-measure (Fbw).
//!
//! Errors are spread with a Gaussian over the neighbourhood of the nearest
//! foreground pixel and background errors are amplified with distance from
//! the foreground. Distances come from an exact Euclidean transform; among
//! equidistant foreground pixels the one with the smallest column, then the
//! smallest row, is taken.

use super::{MaskPair, EPS};
use crate::error::{Error, Result};
use crate::smoothing::GaussianKernel;

pub const FBW_BETA_SQ: f64 = 1.0;
pub const FBW_KERNEL_SIZE: usize = 7;
pub const FBW_KERNEL_SIGMA: f64 = 5.0;

/// For every pixel, `(distance, index)` of the nearest foreground pixel.
/// `None` when the mask has no foreground.
pub fn nearest_foreground(mask: &[bool], width: usize, height: usize) -> Option<Vec<(f64, usize)>> {
    if !mask.iter().any(|&m| m) {
        return None;
    }
    // per column: squared row distance and row of the nearest foreground pixel
    let mut col = vec![(usize::MAX, 0usize); width * height];
    for x in 0..width {
        let rows: Vec<usize> = (0..height).filter(|&y| mask[y * width + x]).collect();
        if rows.is_empty() {
            continue;
        }
        let mut k = 0;
        for y in 0..height {
            while k + 1 < rows.len() && rows[k + 1].abs_diff(y) < rows[k].abs_diff(y) {
                k += 1;
            }
            let d = rows[k].abs_diff(y);
            col[y * width + x] = (d * d, rows[k]);
        }
    }
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let mut best = (usize::MAX, 0usize);
            for c in 0..width {
                let (dy2, r) = col[y * width + c];
                if dy2 == usize::MAX {
                    continue;
                }
                let d2 = dy2 + x.abs_diff(c).pow(2);
                if d2 < best.0 {
                    best = (d2, r * width + c);
                }
            }
            out.push(((best.0 as f64).sqrt(), best.1));
        }
    }
    Some(out)
}

pub fn weighted_fbw(pair: &MaskPair) -> Result<f64> {
    let (w, h) = (pair.width(), pair.height());
    let gt = pair.ground_truth();
    let nearest = nearest_foreground(gt, w, h).ok_or(Error::Undefined("Fbw needs a non-empty ground truth"))?;
    let err: Vec<f64> = pair
        .prediction()
        .iter()
        .zip(gt)
        .map(|(&p, &g)| (if g { 1.0 } else { 0.0 } - p).abs())
        .collect();
    let et: Vec<f64> = nearest.iter().map(|&(_, i)| err[i]).collect();
    let kernel = GaussianKernel::new(FBW_KERNEL_SIGMA, FBW_KERNEL_SIZE / 2)?;
    let ea = kernel.convolve_real(&et, w, h);

    let decay = 0.5f64.ln() / 5.0;
    let (mut sum_fg, mut sum_bg, mut n_fg) = (0.0, 0.0, 0usize);
    for i in 0..w * h {
        if gt[i] {
            sum_fg += err[i].min(ea[i]);
            n_fg += 1;
        } else {
            sum_bg += err[i] * (2.0 - (decay * nearest[i].0).exp());
        }
    }
    let tp = n_fg as f64 - sum_fg;
    let recall = 1.0 - sum_fg / n_fg as f64;
    let precision = tp / (tp + sum_bg + EPS);
    Ok((1.0 + FBW_BETA_SQ) * recall * precision / (recall + FBW_BETA_SQ * precision + EPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_tie_break() {
        // foreground at (0,0) and (2,2); pixel (1,1) is equidistant, next (2,0)
        // is equidistant between (2,2) and (0,0) as well.
        let mut m = vec![false; 9];
        m[0] = true;
        m[8] = true;
        let n = nearest_foreground(&m, 3, 3).unwrap();
        assert_eq!(n[4], (2f64.sqrt(), 0));
        assert_eq!(n[2], (2.0, 0));
        assert_eq!(n[6], (2.0, 0));
        assert_eq!(n[8], (0.0, 8));
        assert!(nearest_foreground(&[false; 4], 2, 2).is_none());
    }

    #[test]
    fn perfect_and_empty() {
        let gt = vec![false, true, true, false];
        let pair = MaskPair::new(2, 2, vec![0.0, 1.0, 1.0, 0.0], gt).unwrap();
        assert!((weighted_fbw(&pair).unwrap() - 1.0).abs() < 1e-12);
        let pair = MaskPair::new(2, 1, vec![0.3, 0.3], vec![false, false]).unwrap();
        assert!(weighted_fbw(&pair).is_err());
    }

    #[test]
    fn worse_predictions_score_lower() {
        // 8x8 with a 4x4 foreground square
        let gt: Vec<bool> = (0..64).map(|i| (2..6).contains(&(i % 8)) && (2..6).contains(&(i / 8))).collect();
        let score = |pred: Vec<f64>| weighted_fbw(&MaskPair::new(8, 8, pred, gt.clone()).unwrap()).unwrap();
        let exact: Vec<f64> = gt.iter().map(|&g| g as u8 as f64).collect();
        let blurred: Vec<f64> = exact.iter().map(|v| 0.25 + 0.5 * v).collect();
        let inverted: Vec<f64> = exact.iter().map(|v| 1.0 - v).collect();
        let (a, b, c) = (score(exact), score(blurred), score(inverted));
        assert!(a > b && b > c, "{a} {b} {c}");
    }
}
