//! Canonical correlation analysis between continuum and magnetogram patches.
//!
//! With whitening transforms `Wx = Sxx^{-1/2}`, `Wy = Syy^{-1/2}`, the singular
//! value decomposition `Wx Sxy Wy = U diag(rho) V^T` gives the canonical
//! correlations `rho`, and `a_i = Wx u_i` is the `i`-th eigenvector of
//! `Sxx^{-1} Sxy Syy^{-1} Syx` (likewise `b_i`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImagePair, Region, RegionMask};
use crate::linalg::{
    centered, cross_covariance, inv_sqrt_spd, normalize_sign, sym_eigen_ascending,
};
use crate::patches::{extract_single, restrict_to_region, Padding, PatchMatrix};
use crate::scalar::{cmp_real, Real};

/// Diagonal loading added to both within-block covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    /// `1e-8 * trace(S) / dim`, separately per block.
    Auto,
    Fixed(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Auto
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaResult<T: Real> {
    /// Nonincreasing, in `[0, 1]`; `min(dim_x, dim_y)` entries.
    pub correlations: Vec<T>,
    /// `a_i` as columns.
    pub a_vectors: DMatrix<T>,
    /// `b_i` as columns.
    pub b_vectors: DMatrix<T>,
    pub x_mean: DVector<T>,
    pub y_mean: DVector<T>,
    /// Canonical variates `u_i = a_i^T (x - mean_x)`, one row per pair.
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    pub pixel_index: Vec<(usize, usize)>,
    pub source_shape: (usize, usize),
}

/// Canonical-variable image; pixels outside the analysed set are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalImage<T> {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Option<T>>,
}

impl<T: Real> CanonicalImage<T> {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![None; rows * cols],
        }
    }

    /// Copies every present pixel of `other` into `self`.
    pub fn merge(&mut self, other: &CanonicalImage<T>) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            if b.is_some() {
                *a = *b;
            }
        }
    }

    /// Values for a GRD1 file: absent pixels become NaN.
    pub fn to_file_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.map_or(f64::NAN, |x| x.as_f64()))
            .collect()
    }
}

impl<T: Real> CcaResult<T> {
    /// Images of the `i`-th canonical variables (`i = 0` is the first pair).
    pub fn canonical_images(&self, i: usize) -> (CanonicalImage<T>, CanonicalImage<T>) {
        let (rows, cols) = self.source_shape;
        let mut u = CanonicalImage::empty(rows, cols);
        let mut v = CanonicalImage::empty(rows, cols);
        for (j, &(r, c)) in self.pixel_index.iter().enumerate() {
            u.values[r * cols + c] = Some(self.u[(i, j)]);
            v.values[r * cols + c] = Some(self.v[(i, j)]);
        }
        (u, v)
    }
}

fn ridge_amount<T: Real>(ridge: Ridge, cov: &DMatrix<T>) -> Result<T> {
    match ridge {
        Ridge::Auto => Ok(T::of(1e-8) * cov.trace() / T::of_usize(cov.nrows())),
        Ridge::Fixed(v) if v >= 0.0 && v.is_finite() => Ok(T::of(v)),
        Ridge::Fixed(v) => Err(Error::InvalidParameter(format!(
            "ridge must be finite and nonnegative, got {v}"
        ))),
    }
}

fn whitener<T: Real>(cov: &DMatrix<T>, ridge: T) -> Result<DMatrix<T>> {
    let loaded = cov + DMatrix::identity(cov.nrows(), cov.ncols()) * ridge;
    let (vals, _) = sym_eigen_ascending(loaded.clone());
    let max = vals.last().copied().unwrap_or(T::zero());
    let min = vals.first().copied().unwrap_or(T::zero());
    if max <= T::zero() || min <= max * T::of(1e-13) {
        return Err(Error::SingularCovariance);
    }
    inv_sqrt_spd(loaded).ok_or(Error::SingularCovariance)
}

/// CCA between paired columns of `x` and `y`. Pixel indices of the result
/// are synthetic `(0, j)`.
pub fn cca_matrices<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>, ridge: Ridge) -> Result<CcaResult<T>> {
    let n = x.ncols();
    if y.ncols() != n {
        return Err(Error::LengthMismatch(n, y.ncols()));
    }
    let (p, q) = (x.nrows(), y.nrows());
    let needed = p.max(q) + 1;
    if n < needed {
        return Err(Error::TooFewPoints { needed, got: n });
    }
    let (xc, x_mean) = centered(x);
    let (yc, y_mean) = centered(y);
    let sxx = cross_covariance(&xc, &xc);
    let syy = cross_covariance(&yc, &yc);
    let sxy = cross_covariance(&xc, &yc);
    let wx = whitener(&sxx, ridge_amount(ridge, &sxx)?)?;
    let wy = whitener(&syy, ridge_amount(ridge, &syy)?)?;
    let m = &wx * &sxy * &wy;
    let svd = m.svd(true, true);
    let uu = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let r = p.min(q);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        cmp_real(&svd.singular_values[j], &svd.singular_values[i]).then(i.cmp(&j))
    });
    order.truncate(r);

    let mut correlations = Vec::with_capacity(r);
    let mut a = DMatrix::zeros(p, r);
    let mut b = DMatrix::zeros(q, r);
    for (slot, &k) in order.iter().enumerate() {
        let mut ai: DVector<T> = &wx * uu.column(k);
        let mut bi: DVector<T> = &wy * vt.row(k).transpose();
        let va = (ai.transpose() * &sxx * &ai)[(0, 0)];
        let vb = (bi.transpose() * &syy * &bi)[(0, 0)];
        if va > T::zero() {
            ai /= va.sqrt();
        }
        if vb > T::zero() {
            bi /= vb.sqrt();
        }
        normalize_sign(ai.as_mut_slice());
        if (ai.transpose() * &sxy * &bi)[(0, 0)] < T::zero() {
            bi = -bi;
        }
        correlations.push(svd.singular_values[k].max(T::zero()).min(T::one()));
        a.set_column(slot, &ai);
        b.set_column(slot, &bi);
    }
    let u = a.transpose() * &xc;
    let v = b.transpose() * &yc;
    Ok(CcaResult {
        correlations,
        a_vectors: a,
        b_vectors: b,
        x_mean,
        y_mean,
        u,
        v,
        pixel_index: (0..n).map(|j| (0, j)).collect(),
        source_shape: (1, n),
    })
}

/// CCA between a continuum block and a magnetogram block whose columns are
/// paired by center pixel.
pub fn cca<T: Real>(
    x_block: &PatchMatrix<T>,
    y_block: &PatchMatrix<T>,
    ridge: Ridge,
) -> Result<CcaResult<T>> {
    if x_block.pixel_index() != y_block.pixel_index() {
        return Err(Error::InvalidParameter(
            "blocks must pair columns by the same center pixels".into(),
        ));
    }
    let mut res = cca_matrices(x_block.columns(), y_block.columns(), ridge)?;
    res.pixel_index = x_block.pixel_index().to_vec();
    res.source_shape = x_block.source_shape();
    Ok(res)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCca<T: Real> {
    pub region: Region,
    pub patch_side: usize,
    pub count: usize,
    pub result: CcaResult<T>,
}

impl<T: Real> RegionCca<T> {
    pub fn first_correlation(&self) -> T {
        self.result.correlations[0]
    }

    pub fn first_images(&self) -> (CanonicalImage<T>, CanonicalImage<T>) {
        self.result.canonical_images(0)
    }
}

/// CCA of one region at one patch size (raw, mirror-padded patches).
pub fn region_cca<T: Real>(
    pair: &ImagePair<T>,
    mask: &RegionMask,
    region: Region,
    patch_side: usize,
    ridge: Ridge,
) -> Result<RegionCca<T>> {
    mask.check_shape(pair.shape())?;
    let x = extract_single(pair.cont(), patch_side, Padding::Mirror, false)?;
    let y = extract_single(pair.mag(), patch_side, Padding::Mirror, false)?;
    let x = restrict_to_region(&x, mask, region)?;
    let y = restrict_to_region(&y, mask, region)?;
    let dim = x.dim();
    if x.count() <= dim {
        return Err(Error::SmallRegion {
            region,
            count: x.count(),
            dim,
        });
    }
    Ok(RegionCca {
        region,
        patch_side,
        count: x.count(),
        result: cca(&x, &y, ridge)?,
    })
}

/// CCA per region and patch size. Regions absent from the mask are skipped.
pub fn region_cca_report<T: Real>(
    pair: &ImagePair<T>,
    mask: &RegionMask,
    patch_sides: &[usize],
    ridge: Ridge,
) -> Result<Vec<RegionCca<T>>> {
    mask.check_shape(pair.shape())?;
    let mut out = Vec::new();
    for &side in patch_sides {
        for region in Region::ALL {
            if mask.count(region) == 0 {
                continue;
            }
            out.push(region_cca(pair, mask, region, side, ridge)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identical_blocks_are_perfectly_correlated() {
        let x = gaussian(4, 500, 1);
        let rho = cca_matrices(&x, &x, Ridge::Auto).unwrap().correlations;
        assert_eq!(rho.len(), 4);
        for r in rho {
            assert_relative_eq!(r, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn affine_scalar_coupling() {
        let x = gaussian(1, 200, 2);
        let y = x.map(|v| -2.0 * v + 3.0);
        let res = cca_matrices(&x, &y, Ridge::Fixed(0.0)).unwrap();
        assert_relative_eq!(res.correlations[0], 1.0, epsilon = 1e-12);
        assert!(res.a_vectors[(0, 0)] > 0.0);
        assert!(res.b_vectors[(0, 0)] < 0.0);
    }

    #[test]
    fn variates_are_white_and_biorthogonal() {
        let z = gaussian(6, 3000, 3);
        let x = z.rows(0, 4).into_owned() + gaussian(4, 3000, 4) * 0.5;
        let y = z.rows(2, 4).into_owned() + gaussian(4, 3000, 5);
        let CcaResult {
            correlations: rho,
            u,
            v,
            ..
        } = cca_matrices(&x, &y, Ridge::Fixed(0.0)).unwrap();
        assert!(rho.windows(2).all(|w| w[0] >= w[1]));
        let n1 = (u.ncols() - 1) as f64;
        let cuu = &u * u.transpose() / n1;
        let cvv = &v * v.transpose() / n1;
        let cuv = &u * v.transpose() / n1;
        for i in 0..4 {
            for j in 0..4 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(cuu[(i, j)], id, epsilon = 1e-8);
                assert_relative_eq!(cvv[(i, j)], id, epsilon = 1e-8);
                if i != j {
                    assert!(cuv[(i, j)].abs() < 1e-8);
                } else {
                    assert_relative_eq!(cuv[(i, i)], rho[i], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn singular_without_ridge() {
        let x = gaussian(1, 100, 6);
        let dup = DMatrix::from_fn(2, 100, |_, j| x[(0, j)]);
        assert!(matches!(
            cca_matrices(&dup, &x, Ridge::Fixed(0.0)),
            Err(Error::SingularCovariance)
        ));
        assert!(cca_matrices(&dup, &x, Ridge::Fixed(1e-3)).is_ok());
    }

    #[test]
    fn too_few_columns() {
        let x = gaussian(3, 3, 7);
        assert!(matches!(
            cca_matrices(&x, &x, Ridge::Auto),
            Err(Error::TooFewPoints { .. })
        ));
    }
}
