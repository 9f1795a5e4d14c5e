//! Per-image PCA dictionaries, flattened into fixed-length vectors so whole
//! images can be compared and clustered.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cca::{region_cca, Ridge};
use crate::dimension::pca_spectrum;
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, ImagePair, Region, RegionMask};
use crate::linalg::normalize_sign;
use crate::patches::PatchMatrix;
use crate::scalar::Real;

pub const MAX_ATOMS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDictionary<T: Real> {
    pub source_id: String,
    /// Orthonormal atoms as columns, leading principal direction first.
    pub atoms: DMatrix<T>,
    pub atom_count: usize,
    /// Atoms concatenated column by column.
    pub flattened: Vec<T>,
}

/// JSON form of a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryRecord {
    pub source_id: String,
    pub atom_count: usize,
    pub dim: usize,
    pub flattened: Vec<f64>,
}

impl<T: Real> ImageDictionary<T> {
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn to_record(&self) -> DictionaryRecord {
        DictionaryRecord {
            source_id: self.source_id.clone(),
            atom_count: self.atom_count,
            dim: self.dim(),
            flattened: self.flattened.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn from_record(rec: &DictionaryRecord) -> Result<Self> {
        if rec.atom_count == 0 || rec.atom_count > MAX_ATOMS {
            return Err(Error::Format(format!(
                "atom_count {} out of range",
                rec.atom_count
            )));
        }
        if rec.flattened.len() != rec.dim * rec.atom_count || rec.dim == 0 {
            return Err(Error::Format(format!(
                "dictionary {:?}: {} values for {} atoms of dimension {}",
                rec.source_id,
                rec.flattened.len(),
                rec.atom_count,
                rec.dim
            )));
        }
        if rec.flattened.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "dictionary {:?} has non-finite entries",
                rec.source_id
            )));
        }
        let flattened: Vec<T> = rec.flattened.iter().map(|&v| T::of(v)).collect();
        Ok(Self {
            source_id: rec.source_id.clone(),
            atoms: DMatrix::from_column_slice(rec.dim, rec.atom_count, &flattened),
            atom_count: rec.atom_count,
            flattened,
        })
    }
}

fn check_atoms(atom_count: usize) -> Result<()> {
    if atom_count == 0 || atom_count > MAX_ATOMS {
        return Err(Error::InvalidParameter(format!(
            "atom count must lie in 1..={MAX_ATOMS}, got {atom_count}"
        )));
    }
    Ok(())
}

/// Dictionary from the columns of `data`: the leading `atom_count`
/// principal directions, each signed so its largest-magnitude entry is
/// positive.
pub fn learn_dictionary_from<T: Real>(
    data: &DMatrix<T>,
    atom_count: usize,
    source_id: &str,
) -> Result<ImageDictionary<T>> {
    check_atoms(atom_count)?;
    if data.ncols() <= atom_count {
        return Err(Error::TooFewPoints {
            needed: atom_count + 1,
            got: data.ncols(),
        });
    }
    let spectrum = pca_spectrum(data)?;
    let top = spectrum.eigenvalues.first().copied().unwrap_or(T::zero());
    let tol = top * T::of(1e-10);
    let rank = spectrum
        .eigenvalues
        .iter()
        .filter(|&&v| v > tol && v > T::zero())
        .count();
    if rank < atom_count {
        return Err(Error::RankDeficient {
            rank,
            atoms: atom_count,
        });
    }
    let mut atoms = spectrum.components.columns(0, atom_count).into_owned();
    for mut col in atoms.column_iter_mut() {
        normalize_sign(col.as_mut_slice());
    }
    let flattened = atoms.as_slice().to_vec();
    Ok(ImageDictionary {
        source_id: source_id.to_string(),
        atoms,
        atom_count,
        flattened,
    })
}

pub fn learn_dictionary<T: Real>(
    patches: &PatchMatrix<T>,
    atom_count: usize,
    source_id: &str,
) -> Result<ImageDictionary<T>> {
    learn_dictionary_from(patches.columns(), atom_count, source_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcaDictionaryConfig {
    pub patch_side: usize,
    pub ridge: Ridge,
    /// Canonical pairs kept per pixel; `None` keeps all `patch_side^2`.
    pub pairs: Option<usize>,
}

impl Default for CcaDictionaryConfig {
    fn default() -> Self {
        Self {
            patch_side: 3,
            ridge: Ridge::Auto,
            pairs: None,
        }
    }
}

/// Canonical-variate data matrix: for every labelled pixel, the first `r`
/// u-variates then the first `r` v-variates of its own region's CCA.
pub fn canonical_variate_matrix<T: Real>(
    pair: &ImagePair<T>,
    mask: &RegionMask,
    cfg: &CcaDictionaryConfig,
) -> Result<DMatrix<T>> {
    let full = cfg.patch_side * cfg.patch_side;
    let r = cfg.pairs.unwrap_or(full);
    if r == 0 || r > full {
        return Err(Error::InvalidParameter(format!(
            "canonical pair count must lie in 1..={full}, got {r}"
        )));
    }
    let mut blocks = Vec::new();
    for region in Region::ALL {
        if mask.count(region) == 0 {
            continue;
        }
        let res = region_cca(pair, mask, region, cfg.patch_side, cfg.ridge)?.result;
        let n = res.u.ncols();
        let mut block = DMatrix::zeros(2 * r, n);
        block.rows_mut(0, r).copy_from(&res.u.rows(0, r));
        block.rows_mut(r, r).copy_from(&res.v.rows(0, r));
        blocks.push(block);
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(2 * r, total);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(&b);
        at += b.ncols();
    }
    Ok(out)
}

/// Dictionary learned on canonical variates instead of raw patches.
pub fn learn_dictionary_cca<T: Real>(
    pair: &ImagePair<T>,
    mask: &RegionMask,
    atom_count: usize,
    cfg: &CcaDictionaryConfig,
    source_id: &str,
) -> Result<ImageDictionary<T>> {
    check_atoms(atom_count)?;
    let data = canonical_variate_matrix(pair, mask, cfg)?;
    learn_dictionary_from(&data, atom_count, source_id)
}

/// Square window of side `size` centered on the centroid of the labelled
/// (non-background) pixels, or on the image center when there are none,
/// shifted as needed to stay inside the image.
pub fn crop_around_spot<T: Real>(
    pair: &ImagePair<T>,
    mask: &RegionMask,
    size: usize,
) -> Result<(ImagePair<T>, RegionMask)> {
    mask.check_shape(pair.shape())?;
    let (rows, cols) = pair.shape();
    if size == 0 || size > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "crop size {size} does not fit a {rows}x{cols} image"
        )));
    }
    let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
    for r in 0..rows {
        for c in 0..cols {
            if mask.get(r, c) != Region::Background {
                sr += r as f64;
                sc += c as f64;
                n += 1;
            }
        }
    }
    let (cr, cc) = if n > 0 {
        (sr / n as f64, sc / n as f64)
    } else {
        ((rows - 1) as f64 / 2.0, (cols - 1) as f64 / 2.0)
    };
    let start = |center: f64, len: usize| -> usize {
        let s = (center - (size as f64 - 1.0) / 2.0).round().max(0.0) as usize;
        s.min(len - size)
    };
    let (r0, c0) = (start(cr, rows), start(cc, cols));
    let cut = |img: &ImageGrid<T>| {
        ImageGrid::from_fn(size, size, img.modality(), |r, c| *img.get(r0 + r, c0 + c))
    };
    let labels = (0..size)
        .flat_map(|r| (0..size).map(move |c| (r, c)))
        .map(|(r, c)| mask.get(r0 + r, c0 + c))
        .collect();
    Ok((
        ImagePair::new(cut(pair.cont())?, cut(pair.mag())?)?,
        RegionMask::new(size, size, labels)?,
    ))
}
