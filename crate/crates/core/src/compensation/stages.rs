use super::weights::{AttentionConfig, Weights, DILATIONS};
use super::{gaussian_conv, mix_channels, project_channels, FeatureMap};
use crate::error::{Error, Result};
use crate::field::{signed_bin, Fft2, C64};

/// Names of the traced intermediates, in execution order.
pub const STAGES: [&str; 12] = [
    "01_gated_smoothed",
    "02_branches",
    "03_fused",
    "04_mfeb",
    "05_channel_attention",
    "06_edge",
    "07_spatial_attention",
    "08_mea",
    "09_out",
    "10_attention_mass",
    "11_cross_layer",
    "12_final",
];

fn branch_index(dilation: usize) -> Result<usize> {
    DILATIONS
        .iter()
        .position(|&d| d == dilation)
        .ok_or_else(|| Error::param("dilation", format!("{dilation} is not one of {DILATIONS:?}")))
}

/// Radial frequency band of a branch, in units of the Nyquist radius.
/// Dilation 1 takes `(0.5, inf)`, 3 takes `(0.25, 0.5]`, 5 takes `(0, 0.25]`.
pub fn band_limits(dilation: usize) -> Result<(f64, f64)> {
    Ok([(0.5, f64::INFINITY), (0.25, 0.5), (0.0, 0.25)][branch_index(dilation)?])
}

pub fn band_mask(dilation: usize, height: usize, width: usize) -> Result<Vec<bool>> {
    let (lo, hi) = band_limits(dilation)?;
    let mut mask = Vec::with_capacity(width * height);
    for ky in 0..height {
        let fy = signed_bin(ky, height) as f64 / height as f64;
        for kx in 0..width {
            let fx = signed_bin(kx, width) as f64 / width as f64;
            let rho = (fx * fx + fy * fy).sqrt() / 0.5;
            mask.push(rho > lo && rho <= hi);
        }
    }
    Ok(mask)
}

/// Per-pixel magnitude of each channel restricted to the branch band.
pub fn band_energy(s: &FeatureMap, dilation: usize) -> Result<FeatureMap> {
    let (h, w) = (s.height(), s.width());
    let mask = band_mask(dilation, h, w)?;
    let fft = Fft2::new(w, h);
    let mut out = Vec::with_capacity(s.data().len());
    for c in 0..s.channels() {
        let mut buf: Vec<C64> = s.plane(c).iter().map(|&v| C64::new(v, 0.0)).collect();
        fft.forward_in_place(&mut buf);
        for (b, &keep) in buf.iter_mut().zip(&mask) {
            if !keep {
                *b = C64::new(0.0, 0.0);
            }
        }
        fft.inverse_in_place(&mut buf);
        out.extend(buf.iter().map(|b| b.norm()));
    }
    Ok(s.with_data(s.channels(), out))
}

/// `4 q(r) - q(r +- m e_x) - q(r +- m e_y)`, zero outside the grid.
pub fn dilated_laplacian(q: &FeatureMap, rate: usize) -> FeatureMap {
    let (h, w) = (q.height(), q.width());
    let mut out = Vec::with_capacity(q.data().len());
    for c in 0..q.channels() {
        let p = q.plane(c);
        for y in 0..h {
            for x in 0..w {
                let mut v = 4.0 * p[y * w + x];
                if x >= rate {
                    v -= p[y * w + x - rate];
                }
                if x + rate < w {
                    v -= p[y * w + x + rate];
                }
                if y >= rate {
                    v -= p[(y - rate) * w + x];
                }
                if y + rate < h {
                    v -= p[(y + rate) * w + x];
                }
                out.push(v);
            }
        }
    }
    q.with_data(q.channels(), out)
}

/// The smoothed gated input `K * (S . A_m)` and the branch output `F_m`.
fn branch_parts(s: &FeatureMap, dilation: usize, w: &Weights) -> Result<(FeatureMap, FeatureMap)> {
    let i = branch_index(dilation)?;
    let b = &w.branch;
    let gate = mix_channels(&b.theta[i], &band_energy(s, dilation)?)?.map(|v| b.activation.apply(v));
    let gated = s.with_data(
        s.channels(),
        s.data().iter().zip(gate.data()).map(|(a, g)| a * g).collect(),
    );
    let smoothed = gaussian_conv(&gated, b.sigmas.branch[i])?;
    let filtered = dilated_laplacian(&smoothed, dilation);
    Ok((smoothed, filtered))
}

pub fn branch_filter(s: &FeatureMap, dilation: usize, w: &Weights) -> Result<FeatureMap> {
    check_channels(s, w)?;
    Ok(branch_parts(s, dilation, w)?.1)
}

fn check_channels(s: &FeatureMap, w: &Weights) -> Result<()> {
    if s.channels() != w.channels() {
        return Err(Error::param(
            "channels",
            format!("map has {} channels, weights expect {}", s.channels(), w.channels()),
        ));
    }
    Ok(())
}

pub fn fuse_branches(f: [&FeatureMap; 3], w: &Weights) -> Result<FeatureMap> {
    f[0].ensure_same_shape(f[1])?;
    f[0].ensure_same_shape(f[2])?;
    let mut sum = mix_channels(&w.branch.fusion[0], f[0])?;
    for (m, fi) in w.branch.fusion.iter().zip(f).skip(1) {
        sum = sum.add(&mix_channels(m, fi)?)?;
    }
    Ok(gaussian_conv(&sum, w.branch.sigmas.fuse)?.map(|v| w.branch.activation.apply(v)))
}

/// Full `C x C x 3 x 3` correlation of `s`, zero padded. Kernel layout is
/// `[out][in][dy + 1][dx + 1]`.
pub fn aux_conv(s: &FeatureMap, kernel: &[f64]) -> Result<FeatureMap> {
    let c = s.channels();
    if kernel.len() != c * c * 9 {
        return Err(Error::param("aux", format!("{} taps for {c} channels", kernel.len())));
    }
    let (h, w) = (s.height(), s.width());
    let n = h * w;
    let mut out = vec![0.0; c * n];
    for o in 0..c {
        for i in 0..c {
            let src = s.plane(i);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let k = kernel[((o * c + i) * 3 + (dy + 1) as usize) * 3 + (dx + 1) as usize];
                    if k == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for x in 0..w {
                            let sx = x as isize + dx;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            out[o * n + y * w + x] += k * src[sy as usize * w + sx as usize];
                        }
                    }
                }
            }
        }
    }
    Ok(s.with_data(c, out))
}

/// Level-`k` enhanced representation from the first `k` branch outputs,
/// the `k`-th auxiliary convolution and the skip input.
pub fn mfeb_output(k: usize, branches: &[FeatureMap], s: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    if !(1..=3).contains(&k) || k > branches.len() {
        return Err(Error::param("level", format!("{k} needs 1 <= k <= {}", branches.len().min(3))));
    }
    let mut sum = aux_conv(s, &w.branch.aux[k - 1])?.add(s)?;
    for f in &branches[..k] {
        sum = sum.add(f)?;
    }
    gaussian_conv(&sum, w.branch.sigmas.mfeb[k - 1])
}

/// Gates `C = act(K * (F Phi_c))`; the channel sum of `C . F` is repeated
/// over all channels.
pub fn channel_attention(f: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    let gates = gaussian_conv(&project_channels(f, &w.branch.phi_c)?, w.branch.sigmas.channel)?
        .map(|v| w.branch.activation.apply(v));
    let n = f.plane_len();
    let mut sum = vec![0.0; n];
    for c in 0..f.channels() {
        for ((acc, g), v) in sum.iter_mut().zip(gates.plane(c)).zip(f.plane(c)) {
            *acc += g * v;
        }
    }
    Ok(f.with_data(1, sum).broadcast(f.channels()))
}

/// Single-channel edge response.
pub fn edge_filter(fused: &FeatureMap, ca: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    let s = &w.branch.sigmas;
    let input = gaussian_conv(&fused.add(ca)?, s.edge)?;
    gaussian_conv(&project_channels(&input, &w.branch.psi_edge)?, s.edge_proj)
}

/// Single-channel spatial gate.
pub fn spatial_attention(ca: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    Ok(gaussian_conv(&project_channels(ca, &w.branch.phi_sa)?, w.branch.sigmas.spatial)?
        .map(|v| w.branch.activation.apply(v)))
}

pub fn mea_fusion(
    asa: &FeatureMap,
    e: &FeatureMap,
    ca: &FeatureMap,
    mfeb: &[FeatureMap],
    s: &FeatureMap,
    w: &Weights,
) -> Result<FeatureMap> {
    if asa.channels() != 1 || e.channels() != 1 {
        return Err(Error::param("gates", "spatial and edge gates must be single-channel"));
    }
    let act = w.branch.activation;
    let gate: Vec<f64> = asa.data().iter().zip(e.data()).map(|(a, e)| a + act.apply(*e)).collect();
    let n = ca.plane_len();
    if gate.len() != n {
        return Err(Error::param("gates", "gate and feature grids differ"));
    }
    let gated: Vec<f64> = ca.data().iter().enumerate().map(|(i, v)| gate[i % n] * v).collect();
    let mut sum = ca.with_data(ca.channels(), gated).add(s)?;
    for m in mfeb {
        sum = sum.add(m)?;
    }
    gaussian_conv(&sum, w.branch.sigmas.mea)
}

pub fn saliency_conv(mea: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    gaussian_conv(&mix_channels(&w.branch.psi_sal, mea)?, w.branch.sigmas.saliency)
}

/// Nearest-neighbour resampling to `height x width` (source index `floor(y h_src / h)`).
pub fn upsample_nearest(f: &FeatureMap, height: usize, width: usize) -> Result<FeatureMap> {
    if f.height() > height || f.width() > width {
        return Err(Error::param(
            "high",
            format!(
                "{}x{} high-level map is larger than the {height}x{width} target",
                f.height(),
                f.width()
            ),
        ));
    }
    let mut data = Vec::with_capacity(f.channels() * height * width);
    for c in 0..f.channels() {
        let p = f.plane(c);
        for y in 0..height {
            let sy = y * f.height() / height;
            for x in 0..width {
                data.push(p[sy * f.width() + x * f.width() / width]);
            }
        }
    }
    FeatureMap::new(f.channels(), height, width, data)
}

/// Attention output and the per-pixel attention mass `sum_r' alpha g`.
pub fn cross_layer_attention_with_mass(
    low: &FeatureMap,
    high: &FeatureMap,
    cfg: &AttentionConfig,
    activation: super::Activation,
) -> Result<(FeatureMap, FeatureMap)> {
    cfg.validate()?;
    let high = upsample_nearest(high, low.height(), low.width())?;
    let q = mix_channels(&cfg.wq, low)?;
    let k = mix_channels(&cfg.wk, &high)?;
    let v = mix_channels(&cfg.wv, &high)?;
    let (h, w) = (low.height(), low.width());
    let n = h * w;
    let d = q.channels();
    let key_norm = k.norm_sqr().sqrt();
    let mut out = vec![0.0; v.channels() * n];
    let mut mass = vec![0.0; n];
    if key_norm == 0.0 {
        return Ok((low.with_data(v.channels(), out), low.with_data(1, mass)));
    }
    let r = cfg.window_radius as isize;
    let inv2s2 = 1.0 / (2.0 * cfg.sigma_attn * cfg.sigma_attn);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = (y * w as isize + x) as usize;
            for sy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                for sx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                    let j = (sy * w as isize + sx) as usize;
                    let dot: f64 = (0..d).map(|c| q.data()[c * n + i] * k.data()[c * n + j]).sum();
                    let alpha = activation.apply(dot / key_norm);
                    if alpha == 0.0 {
                        continue;
                    }
                    let dist2 = ((sy - y) * (sy - y) + (sx - x) * (sx - x)) as f64;
                    let weight = alpha * (-dist2 * inv2s2).exp();
                    mass[i] += weight;
                    for c in 0..v.channels() {
                        out[c * n + i] += weight * v.data()[c * n + j];
                    }
                }
            }
        }
    }
    Ok((low.with_data(v.channels(), out), low.with_data(1, mass)))
}

pub fn cross_layer_attention(low: &FeatureMap, high: &FeatureMap, cfg: &AttentionConfig) -> Result<FeatureMap> {
    Ok(cross_layer_attention_with_mass(low, high, cfg, super::Activation::Relu)?.0)
}

pub fn final_fuse(attn: &FeatureMap, out: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    gaussian_conv(&attn.add(out)?, w.branch.sigmas.final_)
}

pub fn run_pipeline(s_low: &FeatureMap, s_high: &FeatureMap, w: &Weights) -> Result<FeatureMap> {
    Ok(run(s_low, s_high, w, false)?.0)
}

pub fn run_pipeline_traced(
    s_low: &FeatureMap,
    s_high: &FeatureMap,
    w: &Weights,
) -> Result<(FeatureMap, Vec<(&'static str, FeatureMap)>)> {
    run(s_low, s_high, w, true)
}

fn run(
    s: &FeatureMap,
    s_high: &FeatureMap,
    w: &Weights,
    trace: bool,
) -> Result<(FeatureMap, Vec<(&'static str, FeatureMap)>)> {
    check_channels(s, w)?;
    if s_high.channels() != w.high_channels() {
        return Err(Error::param(
            "channels",
            format!("high-level map has {} channels, weights expect {}", s_high.channels(), w.high_channels()),
        ));
    }
    let parts = DILATIONS
        .iter()
        .map(|&d| branch_parts(s, d, w))
        .collect::<Result<Vec<_>>>()?;
    let branches: Vec<FeatureMap> = parts.iter().map(|p| p.1.clone()).collect();
    let fused = fuse_branches([&branches[0], &branches[1], &branches[2]], w)?;
    let mfeb = (1..=3)
        .map(|k| mfeb_output(k, &branches, s, w))
        .collect::<Result<Vec<_>>>()?;
    let ca = channel_attention(&mfeb[2], w)?;
    let edge = edge_filter(&fused, &ca, w)?;
    let asa = spatial_attention(&ca, w)?;
    let mea = mea_fusion(&asa, &edge, &ca, &mfeb, s, w)?;
    let out = saliency_conv(&mea, w)?;
    let (attn, mass) = cross_layer_attention_with_mass(s, s_high, &w.attention, w.branch.activation)?;
    let fin = final_fuse(&attn, &out, w)?;

    let mut stages = Vec::new();
    if trace {
        let gated: Vec<&FeatureMap> = parts.iter().map(|p| &p.0).collect();
        let branch_refs: Vec<&FeatureMap> = branches.iter().collect();
        let mfeb_refs: Vec<&FeatureMap> = mfeb.iter().collect();
        let maps = [
            FeatureMap::concat(&gated)?,
            FeatureMap::concat(&branch_refs)?,
            fused,
            FeatureMap::concat(&mfeb_refs)?,
            ca,
            edge,
            asa,
            mea,
            out,
            mass,
            attn,
            fin.clone(),
        ];
        stages = STAGES.into_iter().zip(maps).collect();
    }
    Ok((fin, stages))
}
