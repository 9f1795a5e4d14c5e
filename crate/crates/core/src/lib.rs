//! Joint-patch analysis of co-registered two-modality images.
//!
//! Each pixel of a continuum/magnetogram pair is described by the stacked
//! square patches centered on it. Over those patch clouds the crate
//! estimates intrinsic dimension (PCA and k-NN graph growth, globally and
//! per pixel), tracks dimension across Haar scales, measures cross-modal
//! canonical correlation, and clusters whole images by their PCA patch
//! dictionaries with dual-rooted MST evidence accumulation.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the file formats use.

pub mod error;
pub mod grd;
pub mod grid;
pub mod patches;
pub mod scalar;

pub mod cca;
pub mod clustering;
pub mod dictionary;
pub mod dimension;
mod knn;
mod linalg;
pub mod metrics;
pub mod mra;
pub mod phantom;

pub use error::{Error, Result};
pub use grid::{ImageGrid, ImagePair, Modality, Region, RegionMask};
pub use patches::{
    extract_patches, extract_single, restrict_to_region, Padding, PatchKind, PatchMatrix,
};
pub use scalar::Real;

pub type ImageGrid64 = ImageGrid<f64>;
pub type ImagePair64 = ImagePair<f64>;
pub type PatchMatrix64 = PatchMatrix<f64>;
pub type DimensionFit64 = dimension::DimensionFit<f64>;
pub type DimensionMap64 = dimension::DimensionMap<f64>;
pub type PcaSpectrum64 = dimension::PcaSpectrum<f64>;
pub type LayerStack64 = mra::LayerStack<f64>;
pub type CcaResult64 = cca::CcaResult<f64>;
pub type ImageDictionary64 = dictionary::ImageDictionary<f64>;
pub type SimilarityMatrix64 = clustering::SimilarityMatrix<f64>;
pub type Embedding64 = clustering::Embedding<f64>;
