//! Dual-rooted minimum spanning trees, the evidence-accumulation similarity
//! they induce, consensus spectral clustering and Laplacian MDS.
//!
//! Points are the columns of a `dim x N` matrix and are compared with
//! Euclidean distance.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dimension::derive_seed;
use crate::error::{Error, Result};
use crate::linalg::{normalize_sign, sym_eigen_ascending};
use crate::scalar::{cmp_real, Real};

/// Symmetric similarity with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T: Real> {
    values: DMatrix<T>,
}

impl<T: Real> SimilarityMatrix<T> {
    pub fn new(values: DMatrix<T>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "similarity matrix must be square and nonempty, got {}x{}",
                n,
                values.ncols()
            )));
        }
        let tol = T::of(1e-12);
        for i in 0..n {
            if (values[(i, i)] - T::one()).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "similarity diagonal entry {i} is not 1"
                )));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "similarity entry ({i}, {j}) outside [0, 1]"
                    )));
                }
                if (v - values[(j, i)]).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "similarity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Format(
                "similarity rows must form a square matrix".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| T::of(rows[i][j])))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .row_iter()
            .map(|r| r.iter().map(|v| v.as_f64()).collect())
            .collect()
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// Cluster of each item, numbered by first appearance.
    pub labels: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T: Real> {
    /// `N x q`; column `i` holds the projections onto the `i`-th nontrivial
    /// Laplacian eigenvector.
    pub coordinates: DMatrix<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> Embedding<T> {
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.coordinates
            .row_iter()
            .map(|r| r.iter().map(|v| v.as_f64()).collect())
            .collect()
    }
}

/// Pairwise Euclidean distances between the columns of `points`.
pub fn distance_matrix<T: Real>(points: &DMatrix<T>) -> DMatrix<T> {
    let n = points.ncols();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (points.column(i) - points.column(j)).norm();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tree {
    A,
    B,
}

/// State of the two trees at the moment they hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRootedTrees<T> {
    pub hit_weight: T,
    /// Tree of every vertex reached before the hit; `None` if unreached.
    pub owner: Vec<Option<Tree>>,
}

#[derive(Clone, Copy)]
struct Edge<T> {
    w: T,
    lo: usize,
    hi: usize,
}

impl<T: Real> Edge<T> {
    fn new(w: T, a: usize, b: usize) -> Self {
        Self {
            w,
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    fn cmp(&self, o: &Self) -> Ordering {
        cmp_real(&self.w, &o.w)
            .then(self.lo.cmp(&o.lo))
            .then(self.hi.cmp(&o.hi))
    }
}

fn better<T: Real>(cand: Edge<T>, cur: Option<Edge<T>>) -> Option<Edge<T>> {
    match cur {
        Some(c) if c.cmp(&cand) != Ordering::Greater => Some(c),
        _ => Some(cand),
    }
}

/// Grows Prim trees from `root_a` and `root_b` on a precomputed distance
/// matrix, always taking the cheapest edge (ties by lowest index pair)
/// leaving either tree, until that edge joins the two trees.
pub fn dual_rooted_trees<T: Real>(
    dist: &DMatrix<T>,
    root_a: usize,
    root_b: usize,
) -> Result<DualRootedTrees<T>> {
    let n = dist.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if root_a == root_b {
        return Err(Error::InvalidParameter(format!(
            "roots must differ, both are {root_a}"
        )));
    }
    if root_a >= n || root_b >= n {
        return Err(Error::InvalidParameter(format!(
            "root out of range for {n} points"
        )));
    }
    let mut owner: Vec<Option<Tree>> = vec![None; n];
    let mut best: Vec<[Option<Edge<T>>; 2]> = vec![[None, None]; n];
    let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut hit: Option<Edge<T>> = None;

    let add = |v: usize,
               t: Tree,
               owner: &mut Vec<Option<Tree>>,
               best: &mut Vec<[Option<Edge<T>>; 2]>,
               members: &mut [Vec<usize>; 2],
               hit: &mut Option<Edge<T>>| {
        let ti = t as usize;
        owner[v] = Some(t);
        members[ti].push(v);
        for &u in &members[1 - ti] {
            *hit = better(Edge::new(dist[(v, u)], v, u), *hit);
        }
        for w in 0..n {
            if owner[w].is_none() {
                best[w][ti] = better(Edge::new(dist[(v, w)], v, w), best[w][ti]);
            }
        }
    };
    add(
        root_a,
        Tree::A,
        &mut owner,
        &mut best,
        &mut members,
        &mut hit,
    );
    add(
        root_b,
        Tree::B,
        &mut owner,
        &mut best,
        &mut members,
        &mut hit,
    );

    loop {
        let mut grow: Option<(Edge<T>, usize, Tree)> = None;
        for v in 0..n {
            if owner[v].is_some() {
                continue;
            }
            for (ti, t) in [(0, Tree::A), (1, Tree::B)] {
                if let Some(e) = best[v][ti] {
                    if grow.is_none_or(|(g, _, _)| e.cmp(&g) == Ordering::Less) {
                        grow = Some((e, v, t));
                    }
                }
            }
        }
        let h = hit.expect("both trees are nonempty");
        match grow {
            Some((e, v, t)) if e.cmp(&h) == Ordering::Less => {
                add(v, t, &mut owner, &mut best, &mut members, &mut hit);
            }
            _ => {
                return Ok(DualRootedTrees {
                    hit_weight: h.w,
                    owner,
                })
            }
        }
    }
}

/// Weight of the edge on which trees grown from the two roots meet.
pub fn dual_rooted_mst_distance<T: Real>(
    points: &DMatrix<T>,
    root_a: usize,
    root_b: usize,
) -> Result<T> {
    if root_a == root_b {
        return Err(Error::InvalidParameter(format!(
            "roots must differ, both are {root_a}"
        )));
    }
    Ok(dual_rooted_trees(&distance_matrix(points), root_a, root_b)?.hit_weight)
}

fn pair_from_index(mut idx: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while idx >= n - 1 - i {
        idx -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + idx)
}

/// `r` unordered root pairs: whole passes over all pairs while `r` exceeds
/// their number, then a seeded sample without repetition for the rest.
pub fn root_pairs(n: usize, r: usize, rng_seed: u64) -> Vec<(usize, usize)> {
    let total = n * (n - 1) / 2;
    let mut out = Vec::with_capacity(r);
    for _ in 0..r / total {
        out.extend((0..total).map(|i| pair_from_index(i, n)));
    }
    let rest = r % total;
    if rest > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut picked = index::sample(&mut rng, total, rest).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| pair_from_index(i, n)));
    }
    out
}

/// Co-association frequencies over `ensemble_size` dual-rooted runs
/// (default `10 N`): two items co-associate in a run when they end up in
/// the same tree.
pub fn eac_dc_similarity<T: Real>(
    points: &DMatrix<T>,
    ensemble_size: Option<usize>,
    rng_seed: u64,
) -> Result<SimilarityMatrix<T>> {
    let n = points.ncols();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let r = ensemble_size.unwrap_or(10 * n);
    if r == 0 {
        return Err(Error::InvalidParameter(
            "ensemble size must be at least 1".into(),
        ));
    }
    let dist = distance_matrix(points);
    let pairs = root_pairs(n, r, rng_seed);
    let counts = pairs
        .par_iter()
        .try_fold(
            || vec![0u32; n * n],
            |mut acc, &(a, b)| -> Result<Vec<u32>> {
                let trees = dual_rooted_trees(&dist, a, b)?;
                for t in [Tree::A, Tree::B] {
                    let m: Vec<usize> = (0..n).filter(|&i| trees.owner[i] == Some(t)).collect();
                    for &i in &m {
                        for &j in &m {
                            acc[i * n + j] += 1;
                        }
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u32; n * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let denom = T::of_usize(r);
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            T::one()
        } else {
            T::of(counts[i * n + j] as f64) / denom
        }
    });
    SimilarityMatrix::new(values)
}

/// `I - D^{-1/2} S D^{-1/2}` with degrees `D` taken over full rows, unit
/// diagonal included. Also returns `D^{1/2}`.
fn normalized_laplacian<T: Real>(sim: &SimilarityMatrix<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    let s = sim.values();
    let n = s.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    for i in 0..n {
        if (0..n).all(|j| j == i || s[(i, j)] == T::zero()) {
            return Err(Error::IsolatedItem(i));
        }
    }
    let sqrt_deg = DVector::from_iterator(n, s.row_iter().map(|r| r.sum().sqrt()));
    let l = DMatrix::from_fn(n, n, |i, j| {
        let v = s[(i, j)] / (sqrt_deg[i] * sqrt_deg[j]);
        if i == j {
            T::one() - v
        } else {
            -v
        }
    });
    Ok((l, sqrt_deg))
}

const KMEANS_RESTARTS: u64 = 10;
const KMEANS_MAX_ITER: usize = 300;
const KMEANS_TOL: f64 = 1e-9;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = sq(p, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_once(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = rows.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
    }

    let dim = rows[0].len();
    let mut labels = vec![0; n];
    for _ in 0..KMEANS_MAX_ITER {
        for (l, p) in labels.iter_mut().zip(rows) {
            *l = nearest(p, &centers).0;
        }
        fill_empty(rows, &mut labels, &centers);
        let mut next = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &l) in rows.iter().zip(&labels) {
            sizes[l] += 1;
            next[l].iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        for (c, &s) in next.iter_mut().zip(&sizes) {
            c.iter_mut().for_each(|v| *v /= s as f64);
        }
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| sq(a, b))
            .fold(0.0, f64::max);
        centers = next;
        if shift.sqrt() <= KMEANS_TOL {
            break;
        }
    }
    for (l, p) in labels.iter_mut().zip(rows) {
        *l = nearest(p, &centers).0;
    }
    fill_empty(rows, &mut labels, &centers);
    let inertia = rows
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq(p, &centers[l]))
        .sum();
    (labels, inertia)
}

/// Moves the point farthest from its center into each empty cluster.
fn fill_empty(rows: &[Vec<f64>], labels: &mut [usize], centers: &[Vec<f64>]) {
    for c in 0..centers.len() {
        let mut sizes = vec![0usize; centers.len()];
        labels.iter().for_each(|&l| sizes[l] += 1);
        if sizes[c] > 0 {
            continue;
        }
        let far = (0..rows.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                sq(&rows[a], &centers[labels[a]])
                    .total_cmp(&sq(&rows[b], &centers[labels[b]]))
                    .then(b.cmp(&a))
            });
        if let Some(i) = far {
            labels[i] = c;
        }
    }
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.len() + 1];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Seeded k-means++ with restarts; keeps the lowest-inertia run.
pub fn kmeans(rows: &[Vec<f64>], k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > rows.len() {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} must lie in 1..={}",
            rows.len()
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, restart, 0));
        let (labels, inertia) = kmeans_once(rows, k, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    Ok(relabel(&best.expect("at least one restart").0))
}

/// Cluster count by the largest gap `lambda[k] - lambda[k-1]` of the
/// ascending Laplacian spectrum over `2..=min(10, N-1)`.
pub fn eigengap_k<T: Real>(eigenvalues: &[T]) -> Result<usize> {
    let n = eigenvalues.len();
    let kmax = 10.min(n.saturating_sub(1));
    let mut best: Option<(usize, f64)> = None;
    for k in 2..=kmax {
        let gap = (eigenvalues[k] - eigenvalues[k - 1]).as_f64();
        if best.is_none_or(|(_, g)| gap > g) {
            best = Some((k, gap));
        }
    }
    match best {
        Some((k, g)) if g > 1e-12 => Ok(k),
        _ => Err(Error::DegenerateEigengap),
    }
}

pub fn spectral_cluster<T: Real>(
    sim: &SimilarityMatrix<T>,
    k: Option<usize>,
    rng_seed: u64,
) -> Result<ClusterAssignment> {
    let n = sim.size();
    if let Some(k) = k {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "cluster count {k} must lie in 1..={n}"
            )));
        }
    }
    let (l, _) = normalized_laplacian(sim)?;
    let (values, vectors) = sym_eigen_ascending(l);
    let k = match k {
        Some(k) => k,
        None => eigengap_k(&values)?,
    };
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let r: Vec<f64> = (0..k).map(|j| vectors[(i, j)].as_f64()).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter().map(|v| v / norm).collect()
            } else {
                r
            }
        })
        .collect();
    let labels = kmeans(&rows, k, rng_seed)?;
    Ok(ClusterAssignment { labels, k })
}

/// Projects the rows of the similarity matrix onto the `q` lowest
/// nontrivial eigenvectors of its normalized Laplacian.
pub fn laplacian_mds<T: Real>(sim: &SimilarityMatrix<T>, q: usize) -> Result<Embedding<T>> {
    let n = sim.size();
    if q == 0 || q >= n {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {q} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let (l, sqrt_deg) = normalized_laplacian(sim)?;
    // The Laplacian spectrum lies in [0, 2]; lifting the trivial vector to 3
    // moves it past every other eigenvalue.
    let t = sqrt_deg.normalize();
    let lifted = l + &t * t.transpose() * T::of(3.0);
    let (values, vectors) = sym_eigen_ascending(lifted);
    let mut basis = vectors.columns(0, q).into_owned();
    for mut col in basis.column_iter_mut() {
        normalize_sign(col.as_mut_slice());
    }
    Ok(Embedding {
        coordinates: sim.values() * basis,
        eigenvalues: values[..q].to_vec(),
    })
}
