//! Adaptive E-measure (enhanced alignment).

use super::{MaskPair, EPS};

fn enhanced(d_gt: f64, d_fm: f64) -> f64 {
    let align = 2.0 * d_gt * d_fm / (d_gt * d_gt + d_fm * d_fm + EPS);
    (align + 1.0).powi(2) / 4.0
}

/// The prediction is binarized at `min(2 mean(p), 1)` (inclusive). Both
/// binary maps take only two values, so the mean over pixels reduces to four
/// weighted terms.
pub fn e_measure(pair: &MaskPair) -> f64 {
    let n = pair.prediction().len();
    let nf = n as f64;
    let threshold = (2.0 * pair.prediction().iter().sum::<f64>() / nf).min(1.0);
    // counts[gt][fm]
    let mut counts = [[0usize; 2]; 2];
    for (&p, &g) in pair.prediction().iter().zip(pair.ground_truth()) {
        counts[g as usize][(p >= threshold) as usize] += 1;
    }
    let fg = counts[1][0] + counts[1][1];
    let fm_on = counts[0][1] + counts[1][1];
    if fg == 0 {
        return (n - fm_on) as f64 / nf;
    }
    if fg == n {
        return fm_on as f64 / nf;
    }
    let mu_gt = fg as f64 / nf;
    let mu_fm = fm_on as f64 / nf;
    let mut total = 0.0;
    for (g, row) in counts.iter().enumerate() {
        for (f, &count) in row.iter().enumerate() {
            if count > 0 {
                total += count as f64 * enhanced(g as f64 - mu_gt, f as f64 - mu_fm);
            }
        }
    }
    total / nf
}
