//! Literal saliency metrics on row-major `w x h` masks.
//!
//! Conventions match the production code: thresholds `t = 0..=255` with
//! a positive pixel when `floor(255 p) > t`, beta^2 = 0.3 for F and 1 for
//! Fbw, S-measure alpha = 0.5 with sample (N - 1) statistics, E-measure
//! averaged over all N pixels.

const EPS: f64 = f64::EPSILON;

pub fn mae(pred: &[f64], gt: &[bool]) -> f64 {
    let mut s = 0.0;
    for i in 0..pred.len() {
        let g = if gt[i] { 1.0 } else { 0.0 };
        s += (pred[i] - g).abs();
    }
    s / pred.len() as f64
}

/// F-beta at every threshold, each counted from scratch.
pub fn f_curve(pred: &[f64], gt: &[bool]) -> Vec<f64> {
    let beta2 = 0.3;
    let positives = gt.iter().filter(|&&g| g).count() as f64;
    let mut curve = Vec::new();
    for t in 0..256 {
        let (mut tp, mut fp) = (0.0, 0.0);
        for i in 0..pred.len() {
            let level = (pred[i] * 255.0).floor() as i64;
            if level > t {
                if gt[i] {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = tp / positives;
        curve.push(if beta2 * p + r > 0.0 { (1.0 + beta2) * p * r / (beta2 * p + r) } else { 0.0 });
    }
    curve
}

pub fn max_mean_f(pred: &[f64], gt: &[bool]) -> (f64, f64) {
    let c = f_curve(pred, gt);
    let max = c.iter().cloned().fold(0.0, f64::max);
    (max, c.iter().sum::<f64>() / c.len() as f64)
}

/// Nearest foreground pixel by exhaustive search, ties broken by smallest
/// column then smallest row. Returns `(squared distance, index)`.
pub fn nearest(gt: &[bool], w: usize, h: usize, x: usize, y: usize) -> (usize, usize) {
    let mut best: Option<(usize, usize, usize)> = None;
    for gy in 0..h {
        for gx in 0..w {
            if !gt[gy * w + gx] {
                continue;
            }
            let d2 = (gx as isize - x as isize).pow(2) as usize + (gy as isize - y as isize).pow(2) as usize;
            let key = (d2, gx, gy);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    let (d2, gx, gy) = best.expect("non-empty ground truth");
    (d2, gy * w + gx)
}

pub fn fbw(pred: &[f64], gt: &[bool], w: usize, h: usize) -> f64 {
    let n = w * h;
    let e: Vec<f64> = (0..n).map(|i| ((gt[i] as u8 as f64) - pred[i]).abs()).collect();
    let near: Vec<(usize, usize)> = (0..n).map(|i| nearest(gt, w, h, i % w, i / w)).collect();
    let et: Vec<f64> = (0..n).map(|i| e[near[i].1]).collect();

    let mut k = [[0.0; 7]; 7];
    let mut ksum = 0.0;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (a, b) = (i as f64 - 3.0, j as f64 - 3.0);
            *v = (-(a * a + b * b) / (2.0 * 25.0)).exp();
            ksum += *v;
        }
    }
    let mut ea = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, row) in k.iter().enumerate() {
                for (j, kv) in row.iter().enumerate() {
                    let sy = y as isize + i as isize - 3;
                    let sx = x as isize + j as isize - 3;
                    if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                        acc += kv / ksum * et[sy as usize * w + sx as usize];
                    }
                }
            }
            ea[y * w + x] = acc;
        }
    }
    let mut ew = vec![0.0; n];
    for i in 0..n {
        let min_e_ea = if gt[i] && ea[i] < e[i] { ea[i] } else { e[i] };
        let b = if gt[i] {
            1.0
        } else {
            2.0 - ((0.5f64).ln() / 5.0 * (near[i].0 as f64).sqrt()).exp()
        };
        ew[i] = min_e_ea * b;
    }
    let fg = gt.iter().filter(|&&g| g).count() as f64;
    let ew_fg: f64 = (0..n).filter(|&i| gt[i]).map(|i| ew[i]).sum();
    let ew_bg: f64 = (0..n).filter(|&i| !gt[i]).map(|i| ew[i]).sum();
    let tpw = fg - ew_fg;
    let r = 1.0 - ew_fg / fg;
    let p = tpw / (EPS + tpw + ew_bg);
    2.0 * r * p / (EPS + r + p)
}

fn region(pred: &[f64], gt: &[bool], w: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut p, mut g) = (Vec::new(), Vec::new());
    for y in y0..y1 {
        for x in x0..x1 {
            p.push(pred[y * w + x]);
            g.push(gt[y * w + x] as u8 as f64);
        }
    }
    (p, g)
}

fn ssim(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    if p.is_empty() {
        return 0.0;
    }
    let x = p.iter().sum::<f64>() / n;
    let y = g.iter().sum::<f64>() / n;
    let (sx, sy, sxy) = if p.len() < 2 {
        (0.0, 0.0, 0.0)
    } else {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = 0.0;
        for i in 0..p.len() {
            a += (p[i] - x).powi(2);
            b += (g[i] - y).powi(2);
            c += (p[i] - x) * (g[i] - y);
        }
        (a / (n - 1.0), b / (n - 1.0), c / (n - 1.0))
    };
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn object(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let x = values.iter().sum::<f64>() / n;
    let sigma = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - x).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    2.0 * x / (x * x + 1.0 + sigma + EPS)
}

pub fn s_measure(pred: &[f64], gt: &[bool], w: usize, h: usize) -> f64 {
    let n = (w * h) as f64;
    let y = gt.iter().filter(|&&g| g).count() as f64 / n;
    let mean_pred = pred.iter().sum::<f64>() / n;
    if y == 0.0 {
        return 1.0 - mean_pred;
    }
    if y == 1.0 {
        return mean_pred;
    }
    let fg: Vec<f64> = (0..w * h).filter(|&i| gt[i]).map(|i| pred[i]).collect();
    let bg: Vec<f64> = (0..w * h).filter(|&i| !gt[i]).map(|i| 1.0 - pred[i]).collect();
    let s_object = y * object(&fg) + (1.0 - y) * object(&bg);

    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0.0);
    for yy in 0..h {
        for xx in 0..w {
            if gt[yy * w + xx] {
                sx += xx as f64;
                sy += yy as f64;
                count += 1.0;
            }
        }
    }
    let cx = ((sx / count).round_ties_even() as usize + 1).min(w);
    let cy = ((sy / count).round_ties_even() as usize + 1).min(h);
    let area = n;
    let w1 = (cx * cy) as f64 / area;
    let w2 = (cy * (w - cx)) as f64 / area;
    let w3 = ((h - cy) * cx) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    let q = |x0, x1, y0, y1| {
        let (p, g) = region(pred, gt, w, x0, x1, y0, y1);
        ssim(&p, &g)
    };
    let s_region = w1 * q(0, cx, 0, cy) + w2 * q(cx, w, 0, cy) + w3 * q(0, cx, cy, h) + w4 * q(cx, w, cy, h);
    let s = 0.5 * s_object + 0.5 * s_region;
    s.clamp(0.0, 1.0)
}

pub fn e_measure(pred: &[f64], gt: &[bool]) -> f64 {
    let n = pred.len() as f64;
    let thr = (2.0 * pred.iter().sum::<f64>() / n).min(1.0);
    let fm: Vec<f64> = pred.iter().map(|&p| if p >= thr { 1.0 } else { 0.0 }).collect();
    let g: Vec<f64> = gt.iter().map(|&b| b as u8 as f64).collect();
    let gsum: f64 = g.iter().sum();
    let enhanced: Vec<f64> = if gsum == 0.0 {
        fm.iter().map(|f| 1.0 - f).collect()
    } else if gsum == n {
        fm.clone()
    } else {
        let mg = gsum / n;
        let mf = fm.iter().sum::<f64>() / n;
        (0..pred.len())
            .map(|i| {
                let dg = g[i] - mg;
                let df = fm[i] - mf;
                let align = 2.0 * dg * df / (dg * dg + df * df + EPS);
                (align + 1.0).powi(2) / 4.0
            })
            .collect()
    };
    enhanced.iter().sum::<f64>() / n
}
