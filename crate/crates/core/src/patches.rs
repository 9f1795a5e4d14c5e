//! Patch matrices: one column per pixel, holding the vectorized square patch
//! centered on it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, ImagePair, Region, RegionMask};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Half-sample symmetric extension; one patch per pixel.
    #[default]
    Mirror,
    /// Only patches that fit entirely inside the image.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    SingleModality,
    Joint,
}

/// `dim x count` matrix of vectorized patches with their center pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix<T: Real> {
    columns: DMatrix<T>,
    pixel_index: Vec<(usize, usize)>,
    patch_side: usize,
    kind: PatchKind,
    source_shape: (usize, usize),
}

impl<T: Real> PatchMatrix<T> {
    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn count(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<T> {
        &self.columns
    }

    pub fn pixel_index(&self) -> &[(usize, usize)] {
        &self.pixel_index
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn kind(&self) -> PatchKind {
        self.kind
    }

    /// Shape of the image the patches were cut from.
    pub fn source_shape(&self) -> (usize, usize) {
        self.source_shape
    }

    /// Whether every pixel of the source image is the center of exactly one column.
    pub fn covers_source(&self) -> bool {
        let (rows, cols) = self.source_shape;
        if self.count() != rows * cols {
            return false;
        }
        let mut seen = vec![false; rows * cols];
        for &(r, c) in &self.pixel_index {
            let i = r * cols + c;
            if seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }

    /// Splits a joint matrix into its continuum and magnetogram blocks.
    pub fn split_joint(&self) -> Result<(PatchMatrix<T>, PatchMatrix<T>)> {
        if self.kind != PatchKind::Joint {
            return Err(Error::InvalidParameter(
                "split_joint requires a joint patch matrix".into(),
            ));
        }
        let half = self.dim() / 2;
        let block = |start: usize| PatchMatrix {
            columns: self.columns.rows(start, half).into_owned(),
            pixel_index: self.pixel_index.clone(),
            patch_side: self.patch_side,
            kind: PatchKind::SingleModality,
            source_shape: self.source_shape,
        };
        Ok((block(0), block(half)))
    }

    /// Concatenates patch matrices column-wise (pooling across images).
    ///
    /// Pixel indices are kept as-is, so the result no longer maps one-to-one
    /// onto a single image grid.
    pub fn pool(parts: &[PatchMatrix<T>]) -> Result<PatchMatrix<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to pool".into()))?;
        if parts
            .iter()
            .any(|p| p.dim() != first.dim() || p.kind != first.kind)
        {
            return Err(Error::InvalidParameter(
                "pooled patch matrices must share dimension and kind".into(),
            ));
        }
        let total: usize = parts.iter().map(|p| p.count()).sum();
        let mut columns = DMatrix::zeros(first.dim(), total);
        let mut pixel_index = Vec::with_capacity(total);
        let mut at = 0;
        for p in parts {
            columns.columns_mut(at, p.count()).copy_from(&p.columns);
            pixel_index.extend_from_slice(&p.pixel_index);
            at += p.count();
        }
        Ok(PatchMatrix {
            columns,
            pixel_index,
            patch_side: first.patch_side,
            kind: first.kind,
            source_shape: first.source_shape,
        })
    }

    fn select(&self, keep: &[usize]) -> PatchMatrix<T> {
        PatchMatrix {
            columns: self.columns.select_columns(keep),
            pixel_index: keep.iter().map(|&i| self.pixel_index[i]).collect(),
            patch_side: self.patch_side,
            kind: self.kind,
            source_shape: self.source_shape,
        }
    }
}

/// Index into `0..n` under half-sample symmetric extension, valid for any offset.
#[inline]
pub(crate) fn mirror_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn check_side(side: usize, rows: usize, cols: usize) -> Result<()> {
    if side % 2 == 0 {
        return Err(Error::EvenPatchSide(side));
    }
    if side > rows.min(cols) {
        return Err(Error::PatchTooLarge { side, rows, cols });
    }
    Ok(())
}

fn centers(rows: usize, cols: usize, side: usize, padding: Padding) -> Vec<(usize, usize)> {
    let h = side / 2;
    let (r0, r1, c0, c1) = match padding {
        Padding::Mirror => (0, rows, 0, cols),
        Padding::Valid => (h, rows - h, h, cols - h),
    };
    (r0..r1)
        .flat_map(|r| (c0..c1).map(move |c| (r, c)))
        .collect()
}

/// Writes the patches of `img` (affinely mapped by `(v - shift) * scale`) into
/// rows `offset..offset + side^2` of `out`.
fn fill_block<T: Real>(
    out: &mut DMatrix<T>,
    offset: usize,
    img: &ImageGrid<T>,
    side: usize,
    centers: &[(usize, usize)],
    shift: T,
    scale: T,
) {
    let h = side as isize / 2;
    let (rows, cols) = img.shape();
    for (j, &(r, c)) in centers.iter().enumerate() {
        let mut k = offset;
        for dr in -h..=h {
            let rr = mirror_index(r as isize + dr, rows);
            for dc in -h..=h {
                let cc = mirror_index(c as isize + dc, cols);
                out[(k, j)] = (*img.get(rr, cc) - shift) * scale;
                k += 1;
            }
        }
    }
}

fn standardization<T: Real>(img: &ImageGrid<T>, standardize: bool) -> Result<(T, T)> {
    if !standardize {
        return Ok((T::zero(), T::one()));
    }
    let sd = img.std_dev();
    if sd <= T::zero() {
        return Err(Error::ZeroVariance(img.modality()));
    }
    Ok((img.mean(), T::one() / sd))
}

/// Joint patches: the continuum patch stacked atop the magnetogram patch,
/// each row-major, so `dim = 2 * side^2`.
///
/// With `standardize`, each modality is z-scored with its own global mean and
/// population standard deviation before stacking.
pub fn extract_patches<T: Real>(
    pair: &ImagePair<T>,
    patch_side: usize,
    padding: Padding,
    standardize: bool,
) -> Result<PatchMatrix<T>> {
    let (rows, cols) = pair.shape();
    check_side(patch_side, rows, cols)?;
    let (cont_shift, cont_scale) = standardization(pair.cont(), standardize)?;
    let (mag_shift, mag_scale) = standardization(pair.mag(), standardize)?;
    let centers = centers(rows, cols, patch_side, padding);
    let block = patch_side * patch_side;
    let mut columns = DMatrix::zeros(2 * block, centers.len());
    fill_block(
        &mut columns,
        0,
        pair.cont(),
        patch_side,
        &centers,
        cont_shift,
        cont_scale,
    );
    fill_block(
        &mut columns,
        block,
        pair.mag(),
        patch_side,
        &centers,
        mag_shift,
        mag_scale,
    );
    Ok(PatchMatrix {
        columns,
        pixel_index: centers,
        patch_side,
        kind: PatchKind::Joint,
        source_shape: (rows, cols),
    })
}

/// Patches of a single image, `dim = side^2`.
pub fn extract_single<T: Real>(
    img: &ImageGrid<T>,
    patch_side: usize,
    padding: Padding,
    standardize: bool,
) -> Result<PatchMatrix<T>> {
    let (rows, cols) = img.shape();
    check_side(patch_side, rows, cols)?;
    let (shift, scale) = standardization(img, standardize)?;
    let centers = centers(rows, cols, patch_side, padding);
    let mut columns = DMatrix::zeros(patch_side * patch_side, centers.len());
    fill_block(&mut columns, 0, img, patch_side, &centers, shift, scale);
    Ok(PatchMatrix {
        columns,
        pixel_index: centers,
        patch_side,
        kind: PatchKind::SingleModality,
        source_shape: (rows, cols),
    })
}

/// Keeps the columns whose center pixel carries `region`.
pub fn restrict_to_region<T: Real>(
    patches: &PatchMatrix<T>,
    mask: &RegionMask,
    region: Region,
) -> Result<PatchMatrix<T>> {
    mask.check_shape(patches.source_shape)?;
    let keep: Vec<usize> = patches
        .pixel_index
        .iter()
        .enumerate()
        .filter(|(_, &(r, c))| mask.get(r, c) == region)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyRegion(region));
    }
    Ok(patches.select(&keep))
}

/// Wraps arbitrary points (one per column) so the patch-based estimators can
/// consume them. Pixel indices are synthetic `(0, j)`.
pub fn points_as_patches<T: Real>(points: DMatrix<T>) -> PatchMatrix<T> {
    let n = points.ncols();
    PatchMatrix {
        columns: points,
        pixel_index: (0..n).map(|j| (0, j)).collect(),
        patch_side: 1,
        kind: PatchKind::SingleModality,
        source_shape: (1, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Modality;

    fn pair(rows: usize, cols: usize) -> ImagePair<f64> {
        let cont = ImageGrid::from_fn(rows, cols, Modality::Continuum, |r, c| {
            (r * cols + c) as f64
        })
        .unwrap();
        let mag = ImageGrid::from_fn(rows, cols, Modality::Magnetogram, |r, c| {
            -((r * cols + c) as f64) * 2.0
        })
        .unwrap();
        ImagePair::new(cont, mag).unwrap()
    }

    #[test]
    fn mirror_index_reflects_with_edge_repeat() {
        assert_eq!(mirror_index(-1, 4), 0);
        assert_eq!(mirror_index(-2, 4), 1);
        assert_eq!(mirror_index(4, 4), 3);
        assert_eq!(mirror_index(5, 4), 2);
        assert_eq!(mirror_index(9, 4), 1);
    }

    #[test]
    fn joint_3x3_mirror_has_18_rows_and_one_column_per_pixel() {
        let p = extract_patches(&pair(5, 7), 3, Padding::Mirror, false).unwrap();
        assert_eq!(p.dim(), 18);
        assert_eq!(p.count(), 35);
        assert!(p.covers_source());
        for (j, &(r, c)) in p.pixel_index().iter().enumerate() {
            assert_eq!(p.columns()[(4, j)], (r * 7 + c) as f64);
            assert_eq!(p.columns()[(13, j)], -2.0 * (r * 7 + c) as f64);
        }
    }

    #[test]
    fn unit_patches_are_pixel_pairs() {
        let pr = pair(3, 4);
        let p = extract_patches(&pr, 1, Padding::Mirror, false).unwrap();
        assert_eq!(p.dim(), 2);
        for j in 0..p.count() {
            assert_eq!(p.columns()[(0, j)], pr.cont().values()[j]);
            assert_eq!(p.columns()[(1, j)], pr.mag().values()[j]);
        }
    }

    #[test]
    fn valid_patch_on_3x3_is_whole_image() {
        let pr = pair(3, 3);
        let p = extract_patches(&pr, 3, Padding::Valid, false).unwrap();
        assert_eq!((p.dim(), p.count()), (18, 1));
        let expected: Vec<f64> = pr
            .cont()
            .values()
            .iter()
            .chain(pr.mag().values())
            .copied()
            .collect();
        assert_eq!(p.columns().as_slice(), expected.as_slice());
        assert_eq!(p.pixel_index(), &[(1, 1)]);
    }

    #[test]
    fn valid_count() {
        let p = extract_patches(&pair(6, 9), 5, Padding::Valid, false).unwrap();
        assert_eq!(p.count(), 2 * 5);
    }

    #[test]
    fn patch_errors() {
        let pr = pair(4, 4);
        assert!(matches!(
            extract_patches(&pr, 2, Padding::Mirror, false),
            Err(Error::EvenPatchSide(2))
        ));
        assert!(matches!(
            extract_patches(&pr, 5, Padding::Mirror, false),
            Err(Error::PatchTooLarge { .. })
        ));
        let flat = ImagePair::new(
            ImageGrid::filled(4, 4, 1.0, Modality::Continuum).unwrap(),
            pr.mag().clone(),
        )
        .unwrap();
        assert!(matches!(
            extract_patches(&flat, 3, Padding::Mirror, true),
            Err(Error::ZeroVariance(Modality::Continuum))
        ));
        assert!(extract_patches(&flat, 3, Padding::Mirror, false).is_ok());
    }

    #[test]
    fn standardized_blocks_have_zero_mean_unit_variance_at_center() {
        let p = extract_patches(&pair(6, 6), 3, Padding::Mirror, true).unwrap();
        for row in [4usize, 13] {
            let vals: Vec<f64> = (0..p.count()).map(|j| p.columns()[(row, j)]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn region_restriction() {
        let pr = pair(4, 5);
        let p = extract_patches(&pr, 3, Padding::Mirror, false).unwrap();
        let all_umbra = RegionMask::uniform(4, 5, Region::Umbra).unwrap();
        assert_eq!(
            restrict_to_region(&p, &all_umbra, Region::Umbra).unwrap(),
            p
        );
        assert!(matches!(
            restrict_to_region(&p, &all_umbra, Region::Penumbra),
            Err(Error::EmptyRegion(Region::Penumbra))
        ));
        let mut labels = vec![Region::Background; 20];
        for l in labels.iter_mut().take(10) {
            *l = Region::Umbra;
        }
        let mask = RegionMask::new(4, 5, labels).unwrap();
        assert_eq!(
            restrict_to_region(&p, &mask, Region::Umbra)
                .unwrap()
                .count(),
            10
        );
        let wrong = RegionMask::uniform(5, 4, Region::Umbra).unwrap();
        assert!(matches!(
            restrict_to_region(&p, &wrong, Region::Umbra),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn split_joint_recovers_blocks() {
        let pr = pair(4, 4);
        let joint = extract_patches(&pr, 3, Padding::Mirror, false).unwrap();
        let (x, y) = joint.split_joint().unwrap();
        assert_eq!(
            x.columns(),
            extract_single(pr.cont(), 3, Padding::Mirror, false)
                .unwrap()
                .columns()
        );
        assert_eq!(
            y.columns(),
            extract_single(pr.mag(), 3, Padding::Mirror, false)
                .unwrap()
                .columns()
        );
    }
}
