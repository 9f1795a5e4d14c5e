//! Brute-force exact nearest neighbours. Distance ties are broken by the
//! lower column index, which makes every neighbour set deterministic.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::scalar::Real;

/// Fixed-capacity ascending list of `(distance, index)` candidates.
pub(crate) struct KBest<T> {
    items: Vec<(T, usize)>,
    k: usize,
}

impl<T: Real> KBest<T> {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            items: Vec::with_capacity(k + 1),
            k,
        }
    }

    #[inline]
    fn less(a: (T, usize), b: (T, usize)) -> bool {
        a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    #[inline]
    pub(crate) fn push(&mut self, d: T, idx: usize) {
        if self.items.len() == self.k {
            if !Self::less((d, idx), self.items[self.k - 1]) {
                return;
            }
            self.items.pop();
        }
        let mut pos = self.items.len();
        while pos > 0 && Self::less((d, idx), self.items[pos - 1]) {
            pos -= 1;
        }
        self.items.insert(pos, (d, idx));
    }

    pub(crate) fn items(&self) -> &[(T, usize)] {
        &self.items
    }

    pub(crate) fn clear(&mut self) {
        self.items.clear();
    }
}

#[inline]
pub(crate) fn sq_dist<T: Real>(points: &DMatrix<T>, a: usize, b: usize) -> T {
    let dim = points.nrows();
    let data = points.as_slice();
    let (pa, pb) = (&data[a * dim..(a + 1) * dim], &data[b * dim..(b + 1) * dim]);
    let mut s = T::zero();
    for i in 0..dim {
        let d = pa[i] - pb[i];
        s += d * d;
    }
    s
}

/// Indices of the `k` columns nearest to column `query`, self included
/// (distance zero, so it comes first unless an earlier duplicate exists).
pub(crate) fn nearest_with_self<T: Real>(
    points: &DMatrix<T>,
    query: usize,
    k: usize,
) -> Vec<usize> {
    let mut best = KBest::new(k);
    for j in 0..points.ncols() {
        best.push(sq_dist(points, query, j), j);
    }
    best.items().iter().map(|&(_, j)| j).collect()
}

/// `nearest_with_self` for every column, in parallel.
pub(crate) fn all_nearest_with_self<T: Real>(points: &DMatrix<T>, k: usize) -> Vec<Vec<usize>> {
    (0..points.ncols())
        .into_par_iter()
        .map(|i| nearest_with_self(points, i, k))
        .collect()
}

/// Sum over points `i < n` of the `gamma`-powered distances to their `k`
/// nearest other points, where `dist(i, j)` returns the Euclidean distance
/// between positions `i` and `j`. Positions double as the tie-break index.
pub(crate) fn edge_length_with<T: Real>(
    n: usize,
    k: usize,
    gamma: T,
    dist: impl Fn(usize, usize) -> T,
) -> T {
    let unit_gamma = gamma == T::one();
    let mut best = KBest::new(k);
    let mut total = T::zero();
    for i in 0..n {
        best.clear();
        for j in 0..n {
            if j != i {
                best.push(dist(i, j), j);
            }
        }
        for &(d, _) in best.items() {
            total += if unit_gamma { d } else { d.powf(gamma) };
        }
    }
    total
}

/// Total `k`-NN graph edge length over the columns listed in `subset`
/// (which must be sorted so position order matches column order).
pub(crate) fn subset_edge_length<T: Real>(
    points: &DMatrix<T>,
    subset: &[usize],
    k: usize,
    gamma: T,
) -> T {
    let n = subset.len();
    let unit_gamma = gamma == T::one();
    let per_point: Vec<T> = (0..n)
        .into_par_iter()
        .map_init(
            || KBest::new(k),
            |best, i| {
                best.clear();
                let a = subset[i];
                for (j, &b) in subset.iter().enumerate() {
                    if j != i {
                        best.push(sq_dist(points, a, b), j);
                    }
                }
                best.items().iter().fold(T::zero(), |acc, &(d2, _)| {
                    let d = d2.sqrt();
                    acc + if unit_gamma { d } else { d.powf(gamma) }
                })
            },
        )
        .collect();
    per_point.into_iter().fold(T::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kbest_keeps_smallest_with_index_ties() {
        let mut b = KBest::new(2);
        for (d, i) in [(3.0, 0), (1.0, 1), (1.0, 2), (0.5, 3), (1.0, 0)] {
            b.push(d, i);
        }
        assert_eq!(b.items(), &[(0.5, 3), (1.0, 0)]);
    }

    #[test]
    fn nearest_breaks_ties_by_index() {
        let pts = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(nearest_with_self(&pts, 0, 3), vec![0, 3, 1]);
        assert_eq!(nearest_with_self(&pts, 3, 2), vec![0, 3]);
    }
}
