//! Weight sets and their on-disk form: a JSON manifest naming every tensor
//! plus one raw little-endian f64 blob.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Branch dilation rates; larger dilation pairs with a lower frequency band.
pub const DILATIONS: [usize; 3] = [1, 3, 5];

const FORMAT: &str = "speckle-compensation-weights";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }
}

/// Smoothing scales in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sigmas {
    /// Pre-smoothing of each gated branch input, one per dilation.
    pub branch: [f64; 3],
    pub fuse: f64,
    pub mfeb: [f64; 3],
    pub channel: f64,
    pub edge: f64,
    pub edge_proj: f64,
    pub spatial: f64,
    pub mea: f64,
    pub saliency: f64,
    #[serde(rename = "final")]
    pub final_: f64,
}

impl Default for Sigmas {
    fn default() -> Self {
        Self {
            branch: DILATIONS.map(|d| 0.25 * d as f64),
            fuse: 1.0,
            mfeb: [1.0; 3],
            channel: 1.0,
            edge: 1.0,
            edge_proj: 1.0,
            spatial: 1.0,
            mea: 1.0,
            saliency: 1.0,
            final_: 1.0,
        }
    }
}

impl Sigmas {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .branch
            .iter()
            .chain(&self.mfeb)
            .chain([
                &self.fuse,
                &self.channel,
                &self.edge,
                &self.edge_proj,
                &self.spatial,
                &self.mea,
                &self.saliency,
                &self.final_,
            ]);
        for &s in all {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::param("sigmas", format!("{s} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchWeights {
    pub channels: usize,
    /// Gate mixing `C x C`, one per dilation.
    pub theta: [Matrix; 3],
    /// Fusion mixing `C x C`, one per dilation.
    pub fusion: [Matrix; 3],
    /// Auxiliary `C x C x 3 x 3` convolutions, one per level.
    pub aux: [Vec<f64>; 3],
    pub phi_c: Matrix,
    pub phi_sa: Matrix,
    pub psi_edge: Matrix,
    pub psi_sal: Matrix,
    pub sigmas: Sigmas,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionConfig {
    pub sigma_attn: f64,
    pub window_radius: usize,
    /// `d x C_low` query projection.
    pub wq: Matrix,
    /// `d x C_high` key projection.
    pub wk: Matrix,
    /// `C_low x C_high` value projection.
    pub wv: Matrix,
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_attn.is_finite() && self.sigma_attn > 0.0) {
            return Err(Error::param("sigma_attn", format!("{} must be positive", self.sigma_attn)));
        }
        if self.window_radius < 1 {
            return Err(Error::param("window_radius", "must be at least 1"));
        }
        if self.wq.rows() != self.wk.rows() || self.wk.cols() != self.wv.cols() {
            return Err(Error::param("attention", "query/key/value projections disagree"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub branch: BranchWeights,
    pub attention: AttentionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in f64 elements.
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    channels: usize,
    high_channels: usize,
    attention_dim: usize,
    activation: Activation,
    sigmas: Sigmas,
    sigma_attn: f64,
    window_radius: usize,
    blob: String,
    tensors: Vec<TensorEntry>,
}

fn dims(c: usize, ch: usize, d: usize) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for m in DILATIONS {
        out.push((format!("theta_{m}"), vec![c, c]));
    }
    for m in DILATIONS {
        out.push((format!("fusion_{m}"), vec![c, c]));
    }
    for k in 1..=3 {
        out.push((format!("aux_{k}"), vec![c, c, 3, 3]));
    }
    out.push(("phi_c".into(), vec![c, c]));
    out.push(("phi_sa".into(), vec![c, 1]));
    out.push(("psi_edge".into(), vec![c, 1]));
    out.push(("psi_sal".into(), vec![c, c]));
    out.push(("attn_q".into(), vec![d, c]));
    out.push(("attn_k".into(), vec![d, ch]));
    out.push(("attn_v".into(), vec![c, ch]));
    out
}

fn matrix(values: Vec<f64>, shape: &[usize]) -> Matrix {
    Matrix::new(shape[0], shape[1], values).expect("shape checked against the layout")
}

impl Weights {
    /// Uniform in `[-1/sqrt(C), 1/sqrt(C)]` from a ChaCha8 stream, tensors
    /// drawn in manifest order.
    pub fn random(channels: usize, high_channels: usize, attention_dim: usize, seed: u64) -> Result<Self> {
        if channels == 0 || high_channels == 0 || attention_dim == 0 {
            return Err(Error::param("channels", "channel counts must be positive"));
        }
        let a = 1.0 / (channels as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = dims(channels, high_channels, attention_dim)
            .into_iter()
            .map(|(name, shape)| {
                let n = shape.iter().product();
                (name, shape, (0..n).map(|_| rng.random_range(-a..=a)).collect())
            })
            .collect();
        Self::assemble(channels, high_channels, attention_dim, values, Sigmas::default(), Activation::Relu, 1.5, 5)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        c: usize,
        ch: usize,
        d: usize,
        tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
        sigmas: Sigmas,
        activation: Activation,
        sigma_attn: f64,
        window_radius: usize,
    ) -> Result<Self> {
        let layout = dims(c, ch, d);
        let mut vals: Vec<Vec<f64>> = tensors.into_iter().map(|t| t.2).collect();
        let mut take = |i: usize| std::mem::take(&mut vals[i]);
        let theta = [0, 1, 2].map(|i| matrix(take(i), &layout[i].1));
        let fusion = [3, 4, 5].map(|i| matrix(take(i), &layout[i].1));
        let aux = [6, 7, 8].map(&mut take);
        let [phi_c, phi_sa, psi_edge, psi_sal, wq, wk, wv] =
            [9, 10, 11, 12, 13, 14, 15].map(|i| matrix(take(i), &layout[i].1));
        sigmas.validate()?;
        let weights = Self {
            branch: BranchWeights {
                channels: c,
                theta,
                fusion,
                aux,
                phi_c,
                phi_sa,
                psi_edge,
                psi_sal,
                sigmas,
                activation,
            },
            attention: AttentionConfig {
                sigma_attn,
                window_radius,
                wq,
                wk,
                wv,
            },
        };
        debug_assert_eq!((weights.high_channels(), weights.attention_dim()), (ch, d));
        weights.attention.validate()?;
        Ok(weights)
    }

    pub fn channels(&self) -> usize {
        self.branch.channels
    }

    pub fn high_channels(&self) -> usize {
        self.attention.wk.cols()
    }

    pub fn attention_dim(&self) -> usize {
        self.attention.wq.rows()
    }

    fn tensor_values(&self) -> Vec<&[f64]> {
        let b = &self.branch;
        let a = &self.attention;
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(b.theta.iter().map(|m| m.data()));
        out.extend(b.fusion.iter().map(|m| m.data()));
        out.extend(b.aux.iter().map(|v| v.as_slice()));
        for m in [&b.phi_c, &b.phi_sa, &b.psi_edge, &b.psi_sal, &a.wq, &a.wk, &a.wv] {
            out.push(m.data());
        }
        out
    }

    /// Writes the manifest to `path` and the blob next to it with a `.bin`
    /// extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let blob_path = path.with_extension("bin");
        let blob_name = blob_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::param("path", format!("bad weights path {}", path.display())))?
            .to_string();
        let layout = dims(self.channels(), self.high_channels(), self.attention_dim());
        let mut blob = Vec::new();
        let mut tensors = Vec::new();
        let mut offset = 0;
        for ((name, shape), values) in layout.into_iter().zip(self.tensor_values()) {
            for v in values {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            tensors.push(TensorEntry { name, shape, offset });
            offset += values.len();
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            version: VERSION,
            channels: self.channels(),
            high_channels: self.high_channels(),
            attention_dim: self.attention_dim(),
            activation: self.branch.activation,
            sigmas: self.branch.sigmas.clone(),
            sigma_attn: self.attention.sigma_attn,
            window_radius: self.attention.window_radius,
            blob: blob_name,
            tensors,
        };
        fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::write(blob_path, blob)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        if manifest.format != FORMAT || manifest.version != VERSION {
            return Err(Error::Format {
                format: "weights manifest",
                reason: format!("unsupported format {} v{}", manifest.format, manifest.version),
            });
        }
        let blob_path: PathBuf = path.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
        let bytes = fs::read(&blob_path)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Format {
                format: "weights blob",
                reason: format!("{} bytes is not a whole number of f64 values", bytes.len()),
            });
        }
        let blob: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        let (c, ch, d) = (manifest.channels, manifest.high_channels, manifest.attention_dim);
        let mut values = Vec::new();
        for (name, shape) in dims(c, ch, d) {
            let entry = manifest
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Tensor {
                    name: name.clone(),
                    reason: "missing from manifest".into(),
                })?;
            if entry.shape != shape {
                return Err(Error::Tensor {
                    name,
                    reason: format!("shape {:?}, expected {:?}", entry.shape, shape),
                });
            }
            let n: usize = shape.iter().product();
            let data = blob.get(entry.offset..entry.offset + n).ok_or_else(|| Error::Tensor {
                name: name.clone(),
                reason: format!("range {}..{} outside a blob of {}", entry.offset, entry.offset + n, blob.len()),
            })?;
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::Tensor {
                    name,
                    reason: format!("non-finite entry {i}"),
                });
            }
            values.push((name, shape, data.to_vec()));
        }
        if let Some(extra) = manifest.tensors.iter().find(|t| !values.iter().any(|(n, _, _)| *n == t.name)) {
            return Err(Error::Tensor {
                name: extra.name.clone(),
                reason: "not part of the layout".into(),
            });
        }
        Self::assemble(
            c,
            ch,
            d,
            values,
            manifest.sigmas,
            manifest.activation,
            manifest.sigma_attn,
            manifest.window_radius,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_weights_are_reproducible_and_bounded() {
        let a = Weights::random(4, 6, 3, 11).unwrap();
        assert_eq!(a, Weights::random(4, 6, 3, 11).unwrap());
        assert_ne!(a, Weights::random(4, 6, 3, 12).unwrap());
        assert!(a.tensor_values().iter().flat_map(|v| v.iter()).all(|v| v.abs() <= 0.5));
        assert_eq!((a.attention.wk.rows(), a.attention.wk.cols()), (3, 6));
        assert_eq!(a.branch.aux[2].len(), 4 * 4 * 9);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let w = Weights::random(3, 2, 2, 5).unwrap();
        w.save(&path).unwrap();
        assert!(dir.path().join("w.bin").exists());
        assert_eq!(Weights::load(&path).unwrap(), w);
    }

    #[test]
    fn load_names_the_broken_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        Weights::random(2, 2, 2, 1).unwrap().save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
        manifest["tensors"][10]["shape"] = serde_json::json!([3, 1]);
        fs::write(&path, manifest.to_string()).unwrap();
        match Weights::load(&path) {
            Err(Error::Tensor { name, .. }) => assert_eq!(name, "phi_sa"),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(dir.path().join("w.bin"), [0u8; 12]).unwrap();
        assert!(Weights::load(&path).is_err());
    }
}
