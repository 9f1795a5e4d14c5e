//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cmp_real, Real};

/// Column mean of a `dim x n` data matrix.
pub(crate) fn column_mean<T: Real>(data: &DMatrix<T>) -> DVector<T> {
    let n = T::of_usize(data.ncols());
    data.column_sum() / n
}

pub(crate) fn centered<T: Real>(data: &DMatrix<T>) -> (DMatrix<T>, DVector<T>) {
    let mean = column_mean(data);
    let mut c = data.clone();
    for mut col in c.column_iter_mut() {
        col -= &mean;
    }
    (c, mean)
}

/// Sample covariance with `n - 1` normalization.
pub(crate) fn covariance<T: Real>(data: &DMatrix<T>) -> DMatrix<T> {
    let (c, _) = centered(data);
    let denom = T::of_usize(data.ncols().saturating_sub(1).max(1));
    (&c * c.transpose()) / denom
}

/// Cross-covariance of two equally-long centered blocks.
pub(crate) fn cross_covariance<T: Real>(xc: &DMatrix<T>, yc: &DMatrix<T>) -> DMatrix<T> {
    let denom = T::of_usize(xc.ncols().saturating_sub(1).max(1));
    (xc * yc.transpose()) / denom
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending and
/// eigenvector signs fixed so each vector's largest-magnitude entry is positive.
pub(crate) fn sym_eigen_ascending<T: Real>(m: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = m.nrows();
    let sym = (&m + m.transpose()) * T::of(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_real(&eig.eigenvalues[a], &eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    for mut col in vectors.column_iter_mut() {
        normalize_sign(col.as_mut_slice());
    }
    (values, vectors)
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub(crate) fn normalize_sign<T: Real>(v: &mut [T]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < T::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Inverse square root of a symmetric positive-definite matrix.
pub(crate) fn inv_sqrt_spd<T: Real>(m: DMatrix<T>) -> Option<DMatrix<T>> {
    let (values, vectors) = sym_eigen_ascending(m);
    if values.first().is_none_or(|&v| v <= T::zero()) {
        return None;
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| T::one() / v.sqrt()),
    ));
    Some(&vectors * d * vectors.transpose())
}
