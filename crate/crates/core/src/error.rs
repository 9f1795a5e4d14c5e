use thiserror::Error;

use crate::grid::{Modality, Region};

#[derive(Debug, Error)]
pub enum Error {
    #[error("patch side must be odd, got {0}")]
    EvenPatchSide(usize),

    #[error("patch side {side} exceeds image size {rows}x{cols}")]
    PatchTooLarge {
        side: usize,
        rows: usize,
        cols: usize,
    },

    #[error("{0:?} image has zero variance and cannot be standardized")]
    ZeroVariance(Modality),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("no pixels labelled {0:?}")]
    EmptyRegion(Region),

    #[error("region {region:?} has {count} patches; need more than the block dimension {dim}")]
    SmallRegion {
        region: Region,
        count: usize,
        dim: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate dimension fit: edge lengths do not grow with sample size")]
    DegenerateFit,

    #[error("spectrum has zero total variance")]
    ZeroSpectrum,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance matrix is singular; use a positive ridge")]
    SingularCovariance,

    #[error("patch matrix rank {rank} is below the requested atom count {atoms}")]
    RankDeficient { rank: usize, atoms: usize },

    #[error("item {0} has an all-zero similarity row")]
    IsolatedItem(usize),

    #[error("eigengap model selection is degenerate; pass the cluster count explicitly")]
    DegenerateEigengap,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EvenPatchSide(_) => "even_patch_side",
            Error::PatchTooLarge { .. } => "patch_too_large",
            Error::ZeroVariance(_) => "zero_variance",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyRegion(_) => "empty_region",
            Error::SmallRegion { .. } => "small_region",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::DegenerateFit => "degenerate_fit",
            Error::ZeroSpectrum => "zero_spectrum",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SingularCovariance => "singular_covariance",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::IsolatedItem(_) => "isolated_item",
            Error::DegenerateEigengap => "degenerate_eigengap",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::EmptyGroup(_) => "empty_group",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
