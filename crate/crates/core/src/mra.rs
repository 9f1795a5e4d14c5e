//! Haar multiresolution layers and dimension-versus-scale tables.
//!
//! A layer is a full-resolution image: layer `j < L` holds the reconstruction
//! of the level-`j+1` detail subbands alone, layer `L` the level-`L`
//! approximation. With the orthonormal Haar basis the approximation
//! projection at level `j` is the mean over aligned `2^j x 2^j` blocks, so the
//! layers are differences of successive block-mean images and sum back to the
//! input exactly.

use serde::Serialize;

use crate::dimension::{pooled_region_report, DimensionConfig, Method, RegionEstimate};
use crate::error::{Error, Result};
use crate::grid::{ImageGrid, ImagePair, Region, RegionMask};
use crate::patches::mirror_index;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack<T> {
    /// Index 0 is the finest detail layer; the last is the coarse remainder.
    pub layers: Vec<ImageGrid<T>>,
    pub levels: usize,
}

impl<T: Real> LayerStack<T> {
    /// Pointwise sum of all layers.
    pub fn reconstruct(&self) -> ImageGrid<T> {
        let first = &self.layers[0];
        let mut sum = vec![T::zero(); first.values().len()];
        for layer in &self.layers {
            for (s, &v) in sum.iter_mut().zip(layer.values()) {
                *s += v;
            }
        }
        ImageGrid::new(first.rows(), first.cols(), sum, first.modality())
            .expect("layers share one shape")
    }
}

/// Replaces every aligned `block x block` tile of a `rows x cols` buffer by
/// its mean. Both dimensions must be multiples of `block`.
fn block_means<T: Real>(values: &[T], rows: usize, cols: usize, block: usize) -> Vec<T> {
    let mut out = vec![T::zero(); values.len()];
    let area = T::of_usize(block * block);
    for br in (0..rows).step_by(block) {
        for bc in (0..cols).step_by(block) {
            let mut s = T::zero();
            for r in br..br + block {
                for c in bc..bc + block {
                    s += values[r * cols + c];
                }
            }
            let m = s / area;
            for r in br..br + block {
                for c in bc..bc + block {
                    out[r * cols + c] = m;
                }
            }
        }
    }
    out
}

pub fn haar_layers<T: Real>(img: &ImageGrid<T>, levels: usize) -> Result<LayerStack<T>> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be at least 1".into()));
    }
    let (rows, cols) = img.shape();
    let block = 1usize
        .checked_shl(levels as u32)
        .filter(|&b| b <= rows.max(cols))
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "2^{levels} exceeds both image dimensions {rows}x{cols}"
            ))
        })?;
    let prow = rows.div_ceil(block) * block;
    let pcol = cols.div_ceil(block) * block;
    let mut padded = Vec::with_capacity(prow * pcol);
    for r in 0..prow {
        let rr = mirror_index(r as isize, rows);
        for c in 0..pcol {
            padded.push(*img.get(rr, mirror_index(c as isize, cols)));
        }
    }

    let crop = |v: &[T]| -> ImageGrid<T> {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            out.extend_from_slice(&v[r * pcol..r * pcol + cols]);
        }
        ImageGrid::new(rows, cols, out, img.modality()).expect("finite layer values")
    };

    let mut layers = Vec::with_capacity(levels + 1);
    let mut finer = padded;
    for level in 1..=levels {
        let coarser = block_means(&finer, prow, pcol, 1 << level);
        let detail: Vec<T> = finer.iter().zip(&coarser).map(|(&a, &b)| a - b).collect();
        layers.push(crop(&detail));
        finer = coarser;
    }
    layers.push(crop(&finer));
    Ok(LayerStack { layers, levels })
}

/// One row of a dimension-by-scale table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleEstimate {
    pub layer: usize,
    pub region: Region,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub estimate: f64,
    /// k-NN rows of averaged layers: mean of the per-image spreads.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    /// Number of images combined into this row.
    pub images: usize,
    pub pooled: bool,
}

/// Layer pairs for one image: `layers[j]` pairs the `j`-th continuum and
/// magnetogram layers.
pub fn pair_layers<T: Real>(pair: &ImagePair<T>, levels: usize) -> Result<Vec<ImagePair<T>>> {
    let cont = haar_layers(pair.cont(), levels)?;
    let mag = haar_layers(pair.mag(), levels)?;
    cont.layers
        .into_iter()
        .zip(mag.layers)
        .map(|(c, m)| ImagePair::new(c, m))
        .collect()
}

/// Dimension estimates per layer and region. Finer layers are estimated per
/// image and averaged; the coarsest layer pools the patches of all images
/// before estimating.
pub fn dimension_by_scale<T: Real>(
    pairs: &[ImagePair<T>],
    masks: &[RegionMask],
    levels: usize,
    cfg: &DimensionConfig,
) -> Result<Vec<ScaleEstimate>> {
    if pairs.is_empty() || pairs.len() != masks.len() {
        return Err(Error::InvalidParameter(format!(
            "need one mask per image pair, got {} pairs and {} masks",
            pairs.len(),
            masks.len()
        )));
    }
    for (p, m) in pairs.iter().zip(masks) {
        m.check_shape(p.shape())?;
    }
    let stacks: Vec<Vec<ImagePair<T>>> = pairs
        .iter()
        .map(|p| pair_layers(p, levels))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for layer in 0..levels {
        let reports: Vec<Vec<RegionEstimate>> = stacks
            .iter()
            .zip(masks)
            .map(|(s, m)| pooled_region_report(&[(&s[layer], m)], cfg))
            .collect::<Result<_>>()?;
        out.extend(average_reports(layer, &reports));
    }
    let deepest: Vec<(&ImagePair<T>, &RegionMask)> = stacks
        .iter()
        .map(|s| &s[levels])
        .zip(masks.iter())
        .collect();
    for row in pooled_region_report(&deepest, cfg)? {
        out.push(ScaleEstimate {
            layer: levels,
            region: row.region,
            method: row.method,
            threshold: row.threshold,
            estimate: row.estimate,
            spread: row.spread,
            images: pairs.len(),
            pooled: true,
        });
    }
    Ok(out)
}

/// Averages matching rows across per-image reports. A row present in only
/// some images is averaged over those.
fn average_reports(layer: usize, reports: &[Vec<RegionEstimate>]) -> Vec<ScaleEstimate> {
    let mut keys: Vec<(Region, Method, Option<u64>)> = Vec::new();
    for rep in reports {
        for row in rep {
            let key = (row.region, row.method, row.threshold.map(f64::to_bits));
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys.into_iter()
        .map(|key| {
            let rows: Vec<&RegionEstimate> = reports
                .iter()
                .flatten()
                .filter(|r| (r.region, r.method, r.threshold.map(f64::to_bits)) == key)
                .collect();
            let n = rows.len() as f64;
            let spreads: Vec<f64> = rows.iter().filter_map(|r| r.spread).collect();
            ScaleEstimate {
                layer,
                region: key.0,
                method: key.1,
                threshold: key.2.map(f64::from_bits),
                estimate: rows.iter().map(|r| r.estimate).sum::<f64>() / n,
                spread: (!spreads.is_empty())
                    .then(|| spreads.iter().sum::<f64>() / spreads.len() as f64),
                images: rows.len(),
                pooled: false,
            }
        })
        .collect()
}
