//! S-measure: mix of object-aware and region-aware structural similarity.
//!
//! Small-sample conventions:
//! * a sample standard deviation over fewer than two pixels is 0;
//! * a quadrant with fewer than two pixels has zero (co)variances;
//! * an empty quadrant scores 0 (its weight is 0 anyway).

use super::{MaskPair, EPS};

pub const S_ALPHA: f64 = 0.5;

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn object_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (x, sigma) = mean_std(values);
    2.0 * x / (x * x + 1.0 + sigma + EPS)
}

fn object_term(pair: &MaskPair) -> f64 {
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for (&p, &g) in pair.prediction().iter().zip(pair.ground_truth()) {
        if g {
            fg.push(p);
        } else {
            bg.push(1.0 - p);
        }
    }
    let u = fg.len() as f64 / pair.prediction().len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

/// Split point `(x, y)`: rounded foreground centroid (half to even) plus one.
pub(crate) fn split_point(pair: &MaskPair) -> (usize, usize) {
    let (w, h) = (pair.width(), pair.height());
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            if pair.ground_truth()[y * w + x] {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    let (cx, cy) = if n == 0 {
        ((w as f64 / 2.0).round_ties_even(), (h as f64 / 2.0).round_ties_even())
    } else {
        ((sx / n as f64).round_ties_even(), (sy / n as f64).round_ties_even())
    };
    (cx as usize + 1, cy as usize + 1)
}

fn ssim(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let x = pred.iter().sum::<f64>() / nf;
    let y = gt.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    if n > 1 {
        for (&p, &g) in pred.iter().zip(gt) {
            sxx += (p - x) * (p - x);
            syy += (g - y) * (g - y);
            sxy += (p - x) * (g - y);
        }
        sxx /= nf - 1.0;
        syy /= nf - 1.0;
        sxy /= nf - 1.0;
    }
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn region_term(pair: &MaskPair) -> f64 {
    let (w, h) = (pair.width(), pair.height());
    let (sx, sy) = split_point(pair);
    let (sx, sy) = (sx.min(w), sy.min(h));
    let area = (w * h) as f64;
    let block = |x0: usize, x1: usize, y0: usize, y1: usize| {
        let mut p = Vec::new();
        let mut g = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                p.push(pair.prediction()[y * w + x]);
                g.push(if pair.ground_truth()[y * w + x] { 1.0 } else { 0.0 });
            }
        }
        ssim(&p, &g)
    };
    let w1 = (sx * sy) as f64 / area;
    let w2 = ((w - sx) * sy) as f64 / area;
    let w3 = (sx * (h - sy)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    w1 * block(0, sx, 0, sy)
        + w2 * block(sx, w, 0, sy)
        + w3 * block(0, sx, sy, h)
        + w4 * block(sx, w, sy, h)
}

pub fn s_measure(pair: &MaskPair) -> f64 {
    let n = pair.prediction().len() as f64;
    let fg = pair.foreground_count();
    let mean_pred = pair.prediction().iter().sum::<f64>() / n;
    if fg == 0 {
        1.0 - mean_pred
    } else if fg == pair.prediction().len() {
        mean_pred
    } else {
        (S_ALPHA * object_term(pair) + (1.0 - S_ALPHA) * region_term(pair)).clamp(0.0, 1.0)
    }
}
