//! Pipeline configuration file. Every section is optional; missing keys take
//! their defaults and unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speckle_core::compensation::Activation;
use speckle_core::metrics::EvalOptions;
use speckle_core::solver::SolverConfig;
use speckle_core::speckle::SceneConfig;
use speckle_core::PropagationSpec;

use crate::error::{io_at, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scene: SceneConfig,
    /// Reconstruction distance; defaults to the scene's wavelength and `z1 + z2`.
    pub propagation: Option<PropagationSpec>,
    pub solver: SolverConfig,
    pub reconstruct: ReconstructConfig,
    pub compensation: CompensationConfig,
    pub evaluate: EvalOptions,
    pub io: IoConfig,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initializer {
    /// `T^dagger sqrt(I)` with zero phase.
    #[default]
    AdjointSqrt,
    /// A WPCF field file.
    Field { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub initializer: Initializer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CompensationConfig {
    /// Weights manifest; seeded random weights when absent.
    pub weights: Option<PathBuf>,
    /// Attention width for random weights; defaults to the channel count.
    pub attention_dim: Option<usize>,
    /// Activation for random weights.
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Measured intensity (PGM, PNG or real WPCF).
    pub intensity: Option<PathBuf>,
    /// Multiplies the loaded intensity, e.g. the `intensity_scale` that
    /// `simulate` records for its max-normalized PGM.
    pub intensity_scale: f64,
    /// Feature stack for `filter`.
    pub features: Option<PathBuf>,
    /// High-level feature stack for `filter`; the input itself when absent.
    pub high_level: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            intensity: None,
            intensity_scale: 1.0,
            features: None,
            high_level: None,
            predictions: None,
            ground_truth: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        serde_json::from_str(&text).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies a command-line seed and makes the scene seed agree with it.
    pub fn resolve_seed(&mut self, flag: Option<u64>) {
        let seed = flag.or(self.seed).unwrap_or(self.scene.seed);
        self.seed = Some(seed);
        self.scene.seed = seed;
    }

    pub fn propagation_spec(&self) -> CliResult<PropagationSpec> {
        let spec = match self.propagation {
            Some(spec) => PropagationSpec::new(spec.wavelength, spec.distance)?,
            None => self.scene.spec_total()?,
        };
        Ok(spec)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.scene.seed)
    }
}
