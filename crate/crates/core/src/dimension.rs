//! Intrinsic dimension estimation.
//!
//! Two estimators are provided:
//!
//! * **k-NN graph length.** The total edge length `L(n)` of the k-nearest
//!   neighbour graph over `n` samples of an `m`-dimensional manifold grows like
//!   `c * n^((m - gamma) / m)`. Averaging `L` over random subsamples of several
//!   sizes and fitting that curve for each candidate integer `m` yields a
//!   global estimate; running the same fit on the patches closest to each
//!   pixel, then smoothing by majority vote over nearby patches, yields a
//!   per-pixel map.
//! * **PCA.** The number of principal components needed to reach a fraction
//!   of the total variance.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImagePair, Region, RegionMask};
use crate::knn::{all_nearest_with_self, edge_length_with, sq_dist, subset_edge_length};
use crate::linalg::{covariance, sym_eigen_ascending};
use crate::patches::{extract_patches, Padding, PatchMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphLengthParams {
    pub k: usize,
    pub gamma: f64,
    pub num_runs: usize,
    pub rng_seed: u64,
}

impl Default for GraphLengthParams {
    fn default() -> Self {
        Self {
            k: 5,
            gamma: 1.0,
            num_runs: 20,
            rng_seed: 0,
        }
    }
}

impl GraphLengthParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and >= 1, got {}",
                self.gamma
            )));
        }
        if self.num_runs == 0 {
            return Err(Error::InvalidParameter(
                "num_runs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of fitting `L(n) = c * n^alpha` with `alpha = (m - gamma) / m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit<T> {
    pub m_hat: usize,
    pub alpha_hat: T,
    pub c_hat: T,
    /// Euclidean norm of the fit residuals.
    pub residual: T,
    /// Set when `m_hat < 2`, outside the regime the growth law is derived for.
    pub low_dimension: bool,
    /// `(n, mean L)` pairs the fit was computed from.
    pub mean_lengths: Vec<(usize, T)>,
}

/// Per-pixel local dimension, averaged over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionMap<T> {
    pub rows: usize,
    pub cols: usize,
    pub mean_dim: Vec<T>,
    pub std_dim: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaSpectrum<T: Real> {
    /// Nonincreasing, clipped at zero.
    pub eigenvalues: Vec<T>,
    /// Orthonormal principal directions, one per column, in eigenvalue order.
    pub components: DMatrix<T>,
}

pub fn knn_total_edge_length<T: Real>(points: &DMatrix<T>, k: usize, gamma: T) -> Result<T> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n = points.ncols();
    if n <= k {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: n,
        });
    }
    let all: Vec<usize> = (0..n).collect();
    Ok(subset_edge_length(points, &all, k, gamma))
}

/// The default subsample schedule `{n/2, 5n/8, 6n/8, 7n/8, n}`.
pub fn default_subsample_sizes(n: usize) -> Vec<usize> {
    (4..=8).map(|i| n * i / 8).collect()
}

fn check_sizes(sizes: &[usize], available: usize, k: usize) -> Result<()> {
    if sizes.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 subsample sizes, got {}",
            sizes.len()
        )));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "subsample sizes must be strictly increasing".into(),
        ));
    }
    if sizes[0] <= k {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: sizes[0],
        });
    }
    let largest = sizes[sizes.len() - 1];
    if largest > available {
        return Err(Error::TooFewPoints {
            needed: largest,
            got: available,
        });
    }
    Ok(())
}

/// Chooses the integer dimension whose growth exponent best explains the
/// mean edge lengths, fitting the constant in closed form for each candidate.
fn fit_growth<T: Real>(
    sizes: &[usize],
    lengths: &[T],
    gamma: f64,
    max_dim: usize,
) -> Result<DimensionFit<T>> {
    let lo = lengths.iter().copied().fold(lengths[0], |a, b| a.min(b));
    let hi = lengths.iter().copied().fold(lengths[0], |a, b| a.max(b));
    if hi <= lo || lengths.iter().any(|l| !l.is_finite()) {
        return Err(Error::DegenerateFit);
    }
    let m_min = (gamma.ceil() as usize).max(1);
    if max_dim < m_min {
        return Err(Error::InvalidParameter(format!(
            "ambient dimension {max_dim} is below the smallest admissible dimension {m_min}"
        )));
    }
    let mut best: Option<(T, usize, T, T)> = None;
    for m in m_min..=max_dim {
        let alpha = T::of((m as f64 - gamma) / m as f64);
        let xs: Vec<T> = sizes.iter().map(|&n| T::of_usize(n).powf(alpha)).collect();
        let (mut lx, mut xx) = (T::zero(), T::zero());
        for (&l, &x) in lengths.iter().zip(&xs) {
            lx += l * x;
            xx += x * x;
        }
        let c = lx / xx;
        let ss = lengths
            .iter()
            .zip(&xs)
            .fold(T::zero(), |acc, (&l, &x)| acc + (l - c * x) * (l - c * x));
        let residual = ss.sqrt();
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, m, alpha, c));
        }
    }
    let (residual, m_hat, alpha_hat, c_hat) = best.expect("candidate range is nonempty");
    Ok(DimensionFit {
        m_hat,
        alpha_hat,
        c_hat,
        residual,
        low_dimension: m_hat < 2,
        mean_lengths: sizes.iter().copied().zip(lengths.iter().copied()).collect(),
    })
}

/// Global dimension of the point cloud (one point per column).
///
/// For each size in `subsample_sizes` the edge length is averaged over
/// `bootstraps_per_size` uniform subsamples drawn without replacement from a
/// generator seeded with `params.rng_seed`. A size equal to the full count
/// has exactly one subsample and is evaluated once.
pub fn estimate_global_dimension<T: Real>(
    points: &DMatrix<T>,
    params: &GraphLengthParams,
    subsample_sizes: &[usize],
    bootstraps_per_size: usize,
) -> Result<DimensionFit<T>> {
    params.validate()?;
    if bootstraps_per_size == 0 {
        return Err(Error::InvalidParameter(
            "bootstraps_per_size must be at least 1".into(),
        ));
    }
    let n = points.ncols();
    check_sizes(subsample_sizes, n, params.k)?;
    let gamma = T::of(params.gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut lengths = Vec::with_capacity(subsample_sizes.len());
    for &s in subsample_sizes {
        if s == n {
            let all: Vec<usize> = (0..n).collect();
            lengths.push(subset_edge_length(points, &all, params.k, gamma));
            continue;
        }
        let mut sum = T::zero();
        for _ in 0..bootstraps_per_size {
            let mut subset = index::sample(&mut rng, n, s).into_vec();
            subset.sort_unstable();
            sum += subset_edge_length(points, &subset, params.k, gamma);
        }
        lengths.push(sum / T::of_usize(bootstraps_per_size));
    }
    fit_growth(subsample_sizes, &lengths, params.gamma, points.nrows())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalConfig {
    /// Number of nearest patches (the pixel's own patch included) each local
    /// fit runs on.
    pub local_neighborhood: usize,
    /// Neighbourhood size for the majority vote, own patch included.
    pub smoothing_neighbors: usize,
    /// Absolute subsample sizes; `None` uses [`default_subsample_sizes`] of
    /// the local neighbourhood.
    pub subsample_sizes: Option<Vec<usize>>,
    pub bootstraps_per_size: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            local_neighborhood: 100,
            smoothing_neighbors: 6,
            subsample_sizes: None,
            bootstraps_per_size: 5,
        }
    }
}

impl LocalConfig {
    pub fn sizes(&self) -> Vec<usize> {
        self.subsample_sizes
            .clone()
            .unwrap_or_else(|| default_subsample_sizes(self.local_neighborhood))
    }
}

/// Per-point local estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEstimates<T> {
    /// Mean of the smoothed estimate across runs.
    pub mean: Vec<T>,
    /// Population standard deviation of the smoothed estimate across runs.
    pub std: Vec<T>,
    /// Smoothed integer estimates, `runs[run][point]`.
    pub runs: Vec<Vec<u32>>,
}

/// Most frequent value; ties go to the smallest.
pub fn majority_vote(values: &[u32]) -> Option<u32> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(usize, u32)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        if best.is_none_or(|(count, _)| j - i > count) {
            best = Some((j - i, v));
        }
        i = j;
    }
    best.map(|(_, v)| v)
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one `(a, b)` cell of a seeded computation, independent of
/// evaluation order.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ a) ^ b.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Raw (unsmoothed) local estimates for one point, one per run.
fn local_raw<T: Real>(
    points: &DMatrix<T>,
    neighborhood: &[usize],
    params: &GraphLengthParams,
    sizes: &[usize],
    bootstraps: usize,
    point: usize,
) -> Result<Vec<u32>> {
    // Sorting makes position order agree with column order for tie-breaking.
    let mut cols = neighborhood.to_vec();
    cols.sort_unstable();
    let m = cols.len();
    let mut dist = vec![T::zero(); m * m];
    for a in 0..m {
        for b in (a + 1)..m {
            let d = sq_dist(points, cols[a], cols[b]).sqrt();
            dist[a * m + b] = d;
            dist[b * m + a] = d;
        }
    }
    let gamma = T::of(params.gamma);
    let k = params.k;
    let full = sizes
        .last()
        .filter(|&&s| s == m)
        .map(|_| edge_length_with(m, k, gamma, |a, b| dist[a * m + b]));
    let mut out = Vec::with_capacity(params.num_runs);
    for run in 0..params.num_runs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(params.rng_seed, point as u64, run as u64));
        let mut lengths = Vec::with_capacity(sizes.len());
        for &s in sizes {
            if s == m {
                lengths.push(full.expect("full-size length computed"));
                continue;
            }
            let mut sum = T::zero();
            for _ in 0..bootstraps {
                let mut sub = index::sample(&mut rng, m, s).into_vec();
                sub.sort_unstable();
                sum += edge_length_with(s, k, gamma, |a, b| dist[sub[a] * m + sub[b]]);
            }
            lengths.push(sum / T::of_usize(bootstraps));
        }
        let fit = fit_growth(sizes, &lengths, params.gamma, points.nrows())?;
        out.push(fit.m_hat as u32);
    }
    Ok(out)
}

/// Local dimension of every point: a global fit on its
/// `local_neighborhood` nearest points, majority-smoothed over its
/// `smoothing_neighbors` nearest points, repeated `num_runs` times with
/// per-point, per-run seeds.
pub fn local_dimension_estimates<T: Real>(
    points: &DMatrix<T>,
    params: &GraphLengthParams,
    cfg: &LocalConfig,
) -> Result<LocalEstimates<T>> {
    params.validate()?;
    let n = points.ncols();
    let sizes = cfg.sizes();
    if cfg.smoothing_neighbors == 0 || cfg.bootstraps_per_size == 0 {
        return Err(Error::InvalidParameter(
            "smoothing_neighbors and bootstraps_per_size must be positive".into(),
        ));
    }
    if sizes.last().is_some_and(|&s| cfg.local_neighborhood < s) {
        return Err(Error::InvalidParameter(format!(
            "local neighbourhood {} is smaller than the largest subsample size {}",
            cfg.local_neighborhood,
            sizes[sizes.len() - 1]
        )));
    }
    if cfg.local_neighborhood > n {
        return Err(Error::TooFewPoints {
            needed: cfg.local_neighborhood,
            got: n,
        });
    }
    check_sizes(&sizes, cfg.local_neighborhood, params.k)?;
    let smoothing = cfg.smoothing_neighbors.min(n);
    let reach = cfg.local_neighborhood.max(smoothing);
    let neighbors = all_nearest_with_self(points, reach);

    let raw: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            local_raw(
                points,
                &neighbors[i][..cfg.local_neighborhood],
                params,
                &sizes,
                cfg.bootstraps_per_size,
                i,
            )
        })
        .collect::<Result<_>>()?;

    let runs: Vec<Vec<u32>> = (0..params.num_runs)
        .map(|run| {
            (0..n)
                .map(|i| {
                    let votes: Vec<u32> = neighbors[i][..smoothing]
                        .iter()
                        .map(|&j| raw[j][run])
                        .collect();
                    majority_vote(&votes).expect("neighbourhood includes the point itself")
                })
                .collect()
        })
        .collect();

    let r = T::of_usize(params.num_runs);
    let mut mean = Vec::with_capacity(n);
    let mut std = Vec::with_capacity(n);
    for i in 0..n {
        let m = runs
            .iter()
            .fold(T::zero(), |a, run| a + T::of(run[i] as f64))
            / r;
        let v = runs.iter().fold(T::zero(), |a, run| {
            let d = T::of(run[i] as f64) - m;
            a + d * d
        }) / r;
        mean.push(m);
        std.push(v.sqrt());
    }
    Ok(LocalEstimates { mean, std, runs })
}

/// Local dimension map over an image. `patches` must have one column per
/// pixel (mirror padding).
pub fn estimate_local_dimension<T: Real>(
    patches: &PatchMatrix<T>,
    params: &GraphLengthParams,
    cfg: &LocalConfig,
) -> Result<DimensionMap<T>> {
    if !patches.covers_source() {
        return Err(Error::InvalidParameter(
            "a dimension map needs one patch per pixel; use mirror padding".into(),
        ));
    }
    let est = local_dimension_estimates(patches.columns(), params, cfg)?;
    let (rows, cols) = patches.source_shape();
    let mut mean_dim = vec![T::zero(); rows * cols];
    let mut std_dim = vec![T::zero(); rows * cols];
    for (j, &(r, c)) in patches.pixel_index().iter().enumerate() {
        mean_dim[r * cols + c] = est.mean[j];
        std_dim[r * cols + c] = est.std[j];
    }
    Ok(DimensionMap {
        rows,
        cols,
        mean_dim,
        std_dim,
    })
}

/// Eigen-spectrum of the sample covariance (`n - 1` normalization).
pub fn pca_spectrum<T: Real>(points: &DMatrix<T>) -> Result<PcaSpectrum<T>> {
    if points.ncols() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.ncols(),
        });
    }
    let (vals, vecs) = sym_eigen_ascending(covariance(points));
    let d = vals.len();
    let order: Vec<usize> = (0..d).rev().collect();
    Ok(PcaSpectrum {
        eigenvalues: order.iter().map(|&i| vals[i].max(T::zero())).collect(),
        components: vecs.select_columns(&order),
    })
}

/// Smallest number of leading components whose variance share reaches
/// `variance_threshold`.
pub fn pca_dimension<T: Real>(spectrum: &PcaSpectrum<T>, variance_threshold: f64) -> Result<usize> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance threshold must lie in (0, 1], got {variance_threshold}"
        )));
    }
    let total = spectrum
        .eigenvalues
        .iter()
        .fold(0.0, |a, &v| a + v.as_f64());
    if total <= 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    // Absorbs rounding in the trailing (numerically zero) eigenvalues.
    let target = variance_threshold * total - 1e-10 * total;
    let mut cum = 0.0;
    for (r, &v) in spectrum.eigenvalues.iter().enumerate() {
        cum += v.as_f64();
        if cum >= target {
            return Ok(r + 1);
        }
    }
    Ok(spectrum.eigenvalues.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Knn,
    Pca,
}

/// One cell of a region-by-method dimension table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionEstimate {
    pub region: Region,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub estimate: f64,
    /// k-NN rows: standard deviation of the run-averaged local estimate
    /// across the region's pixels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DimensionConfig {
    pub patch_side: usize,
    pub padding: Padding,
    pub standardize: bool,
    pub graph: GraphLengthParams,
    pub local: LocalConfig,
    pub thresholds: Vec<f64>,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            patch_side: 3,
            padding: Padding::Mirror,
            standardize: true,
            graph: GraphLengthParams::default(),
            local: LocalConfig::default(),
            thresholds: vec![0.95, 0.97, 0.99],
        }
    }
}

/// Both estimators per mask region of one image pair.
///
/// The k-NN entry is the region mean of the per-pixel local estimates (each
/// already averaged over runs); neighbourhoods are drawn from the whole
/// image. Regions absent from the mask produce no rows.
pub fn region_dimension_report<T: Real>(
    pair: &ImagePair<T>,
    mask: &RegionMask,
    cfg: &DimensionConfig,
) -> Result<Vec<RegionEstimate>> {
    pooled_region_report(&[(pair, mask)], cfg)
}

/// [`region_dimension_report`] over several images whose patches are pooled
/// into one point cloud before estimation.
pub fn pooled_region_report<T: Real>(
    images: &[(&ImagePair<T>, &RegionMask)],
    cfg: &DimensionConfig,
) -> Result<Vec<RegionEstimate>> {
    let mut parts = Vec::with_capacity(images.len());
    let mut labels = Vec::new();
    for (pair, mask) in images {
        mask.check_shape(pair.shape())?;
        let p = extract_patches(pair, cfg.patch_side, cfg.padding, cfg.standardize)?;
        labels.extend(p.pixel_index().iter().map(|&(r, c)| mask.get(r, c)));
        parts.push(p);
    }
    let pooled = PatchMatrix::pool(&parts)?;
    let local = local_dimension_estimates(pooled.columns(), &cfg.graph, &cfg.local)?;

    let mut out = Vec::new();
    for region in Region::ALL {
        let members: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == region).collect();
        if members.is_empty() {
            continue;
        }
        let vals: Vec<f64> = members.iter().map(|&j| local.mean[j].as_f64()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        out.push(RegionEstimate {
            region,
            method: Method::Knn,
            threshold: None,
            estimate: mean,
            spread: Some(var.sqrt()),
        });
        let spectrum = pca_spectrum(&pooled.columns().select_columns(&members))?;
        for &t in &cfg.thresholds {
            out.push(RegionEstimate {
                region,
                method: Method::Pca,
                threshold: Some(t),
                estimate: pca_dimension(&spectrum, t)? as f64,
                spread: None,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("no labelled pixels".into()));
    }
    Ok(out)
}
