//! Wave-optics reconstruction toolkit.
//!
//! * [`field`]: sampled complex fields and the unitary 2-D DFT.
//! * [`fresnel`]: band-limited Fresnel propagation, its adjoint and the
//!   subspace projector.
//! * [`solver`]: the three-phase momentum reprojection solver.
//! * [`compensation`]: frequency-selective filter bank and attention fusion
//!   over real feature maps.
//! * [`speckle`]: synthetic occluded-scene forward model.
//! * [`metrics`]: saliency evaluation metrics.
//! * [`wpcf`], [`image_io`]: file formats.

pub mod compensation;
pub mod error;
pub mod field;
pub mod fresnel;
pub mod image_io;
pub mod metrics;
pub mod smoothing;
pub mod solver;
pub mod speckle;
pub mod wpcf;

pub use error::{Error, Result};
pub use field::{ComplexField, FrequencyGrid, C64};
pub use fresnel::{PropagationSpec, Propagator};
