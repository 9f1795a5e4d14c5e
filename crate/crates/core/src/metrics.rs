//! External cluster-agreement indices and the Jonckheere-Terpstra trend test.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};

struct Contingency {
    n: u64,
    cells: Vec<u64>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

fn contingency<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("label vectors are empty".into()));
    }
    let mut ia: HashMap<&L, usize> = HashMap::new();
    let mut ib: HashMap<&L, usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let na = ia.len();
        let i = *ia.entry(x).or_insert(na);
        let nb = ib.len();
        let j = *ib.entry(y).or_insert(nb);
        pairs.push((i, j));
    }
    let (ka, kb) = (ia.len(), ib.len());
    let mut cells = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (i, j) in pairs {
        cells[i * kb + j] += 1;
        rows[i] += 1;
        cols[j] += 1;
    }
    Ok(Contingency {
        n: a.len() as u64,
        cells,
        rows,
        cols,
    })
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, `I(a; b) / sqrt(H(a) H(b))` with natural
/// logarithms; `0` when either labelling is constant.
pub fn nmi<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = t.n as f64;
    let kb = t.cols.len();
    let mut mi = 0.0;
    for (i, &ri) in t.rows.iter().enumerate() {
        for (j, &cj) in t.cols.iter().enumerate() {
            let nij = t.cells[i * kb + j];
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (ri as f64 * cj as f64)).ln();
            }
        }
    }
    let denom = (entropy(&t.rows, n) * entropy(&t.cols, n)).sqrt();
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

/// Hubert-Arabie adjusted Rand index. Evaluated as a single ratio of exact
/// integers; `1` when the chance-corrected denominator vanishes (both
/// labellings trivial and identical in structure).
pub fn ari<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64> {
    let t = contingency(a, b)?;
    let index: i128 = t.cells.iter().map(|&c| choose2(c)).sum();
    let sa: i128 = t.rows.iter().map(|&c| choose2(c)).sum();
    let sb: i128 = t.cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(t.n);
    // (index - sa*sb/total) / ((sa+sb)/2 - sa*sb/total), scaled by 2*total.
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendTest {
    /// Count of increasing cross-group pairs, ties counting one half.
    pub statistic: f64,
    pub mean: f64,
    /// Tie-corrected null variance.
    pub variance: f64,
    pub z: f64,
    /// Two-sided, normal approximation.
    pub p_value: f64,
}

fn check_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter(
            "the trend test needs at least two groups".into(),
        ));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::EmptyGroup(i));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    Ok(())
}

/// Jonckheere-Terpstra statistic for groups listed in the hypothesized
/// increasing order.
pub fn jt_statistic(groups: &[Vec<f64>]) -> f64 {
    let mut twice = 0u64;
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            for &x in &groups[i] {
                for &y in &groups[j] {
                    twice += if x < y {
                        2
                    } else if x == y {
                        1
                    } else {
                        0
                    };
                }
            }
        }
    }
    twice as f64 / 2.0
}

fn tie_sizes(groups: &[Vec<f64>]) -> Vec<f64> {
    let mut all: Vec<f64> = groups.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j] == all[i] {
            j += 1;
        }
        out.push((j - i) as f64);
        i = j;
    }
    out
}

fn null_moments(groups: &[Vec<f64>]) -> (f64, f64) {
    let sizes: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let ties = tie_sizes(groups);
    let n: f64 = sizes.iter().sum();
    let mean = (n * n - sizes.iter().map(|s| s * s).sum::<f64>()) / 4.0;
    let f1 = |x: f64| x * (x - 1.0) * (2.0 * x + 5.0);
    let f2 = |x: f64| x * (x - 1.0) * (x - 2.0);
    let f3 = |x: f64| x * (x - 1.0);
    let mut var = (f1(n)
        - sizes.iter().map(|&s| f1(s)).sum::<f64>()
        - ties.iter().map(|&t| f1(t)).sum::<f64>())
        / 72.0;
    if n > 2.0 {
        var += sizes.iter().map(|&s| f2(s)).sum::<f64>() * ties.iter().map(|&t| f2(t)).sum::<f64>()
            / (36.0 * f2(n));
    }
    if n > 1.0 {
        var += sizes.iter().map(|&s| f3(s)).sum::<f64>() * ties.iter().map(|&t| f3(t)).sum::<f64>()
            / (8.0 * f3(n));
    }
    (mean, var)
}

/// Jonckheere-Terpstra ordered-alternative test.
pub fn jtrend(groups: &[Vec<f64>]) -> Result<TrendTest> {
    check_groups(groups)?;
    let statistic = jt_statistic(groups);
    let (mean, variance) = null_moments(groups);
    let (z, p_value) = if variance > 0.0 {
        let z = (statistic - mean) / variance.sqrt();
        (z, libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(TrendTest {
        statistic,
        mean,
        variance,
        z,
        p_value,
    })
}

/// Exact two-sided permutation p-value of the JT statistic, enumerating
/// every assignment of the pooled samples to groups of the observed sizes.
/// Limited to at most 12 samples.
pub fn jtrend_exact_p(groups: &[Vec<f64>]) -> Result<f64> {
    check_groups(groups)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.len() > 12 {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration is limited to 12 samples, got {}",
            pooled.len()
        )));
    }
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let (mean, _) = null_moments(groups);
    let observed = (jt_statistic(groups) - mean).abs();
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut current: Vec<Vec<f64>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    let mut used = vec![false; pooled.len()];
    enumerate(&pooled, &sizes, 0, 0, &mut used, &mut current, &mut |g| {
        total += 1;
        if (jt_statistic(g) - mean).abs() >= observed - 1e-9 {
            hits += 1;
        }
    });
    Ok(hits as f64 / total as f64)
}

/// Fills group `g` with increasing pooled indices starting at `from`, then
/// recurses into the next group with the remaining indices.
fn enumerate(
    pooled: &[f64],
    sizes: &[usize],
    g: usize,
    from: usize,
    used: &mut [bool],
    current: &mut [Vec<f64>],
    visit: &mut dyn FnMut(&[Vec<f64>]),
) {
    if g == sizes.len() {
        visit(current);
        return;
    }
    if current[g].len() == sizes[g] {
        enumerate(pooled, sizes, g + 1, 0, used, current, visit);
        return;
    }
    for i in from..pooled.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        current[g].push(pooled[i]);
        enumerate(pooled, sizes, g, i + 1, used, current, visit);
        current[g].pop();
        used[i] = false;
    }
}
