//! JSON pipeline configuration. Every field is optional; missing fields
//! take the defaults below.

use std::path::Path;

use patchdim::cca::Ridge;
use patchdim::dictionary::{CcaDictionaryConfig, MAX_ATOMS};
use patchdim::dimension::DimensionConfig;
use patchdim::Padding;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MraConfig {
    pub levels: usize,
}

impl Default for MraConfig {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcaConfig {
    pub patch_sides: Vec<usize>,
    pub ridge: Ridge,
}

impl Default for CcaConfig {
    fn default() -> Self {
        Self {
            patch_sides: vec![3],
            ridge: Ridge::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionaryConfig {
    pub atom_count: usize,
    pub patch_side: usize,
    pub padding: Padding,
    pub standardize: bool,
    /// Side of the square crop around the spot; `None` uses the whole image.
    pub crop: Option<usize>,
    /// Learn atoms on canonical variates instead of raw joint patches.
    pub use_cca: bool,
    pub cca: CcaDictionaryConfig,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            atom_count: MAX_ATOMS,
            patch_side: 3,
            padding: Padding::Mirror,
            standardize: true,
            crop: Some(320),
            use_cca: false,
            cca: CcaDictionaryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Root pairs in the ensemble; `None` means ten per item.
    pub ensemble_size: Option<usize>,
    /// Cluster count; `None` picks it from the eigengap.
    pub k: Option<usize>,
    pub embedding_dims: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            ensemble_size: None,
            k: None,
            embedding_dims: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dimension: DimensionConfig,
    pub mra: MraConfig,
    pub cca: CcaConfig,
    pub dictionary: DictionaryConfig,
    pub clustering: ClusteringConfig,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// One seed drives every random stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.dimension.graph.rng_seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dimension.graph.validate()?;
        let bad = |msg: String| Err(CliError::Config(msg));
        if self
            .dimension
            .thresholds
            .iter()
            .any(|t| !(*t > 0.0 && *t <= 1.0))
        {
            return bad("dimension thresholds must lie in (0, 1]".into());
        }
        if self.mra.levels == 0 {
            return bad("mra.levels must be at least 1".into());
        }
        if self.cca.patch_sides.is_empty() {
            return bad("cca.patch_sides must not be empty".into());
        }
        let d = &self.dictionary;
        if d.atom_count == 0 || d.atom_count > MAX_ATOMS {
            return bad(format!("dictionary.atom_count must lie in 1..={MAX_ATOMS}"));
        }
        if d.crop == Some(0) {
            return bad("dictionary.crop must be positive".into());
        }
        if self.clustering.ensemble_size == Some(0) {
            return bad("clustering.ensemble_size must be at least 1".into());
        }
        if self.clustering.k == Some(0) {
            return bad("clustering.k must be at least 1".into());
        }
        if self.clustering.embedding_dims == 0 {
            return bad("clustering.embedding_dims must be at least 1".into());
        }
        Ok(())
    }
}
