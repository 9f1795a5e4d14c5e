use nalgebra::DMatrix;
use patchdim::cca::{cca_matrices, region_cca, Ridge};
use patchdim::phantom::{synthesize, PhantomKind};
use patchdim::Region;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Coupled blocks: y shares two latent signals with x.
fn coupled(seed: u64, p: usize, q: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = normal(&mut rng, 2, n);
    let x = normal(&mut rng, p, 2) * &z + normal(&mut rng, p, n) * 0.7;
    let y = normal(&mut rng, q, 2) * &z + normal(&mut rng, q, n) * 0.7;
    (x, y)
}

fn sample_cov(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for mut row in c.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        c
    };
    center(a) * center(b).transpose() / (n as f64 - 1.0)
}

/// Squared canonical correlations as eigenvalues of
/// `L^-1 Sxy Syy^-1 Syx L^-T` with `Sxx = L L^T`.
fn oracle_correlations(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let sxx = sample_cov(x, x);
    let syy = sample_cov(y, y);
    let sxy = sample_cov(x, y);
    let l = sxx.cholesky().unwrap().l();
    let linv = l.try_inverse().unwrap();
    let m = &linv * &sxy * syy.try_inverse().unwrap() * sxy.transpose() * linv.transpose();
    let mut ev: Vec<f64> = m
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.truncate(x.nrows().min(y.nrows()));
    ev
}

#[test]
fn correlations_match_cholesky_oracle() {
    for (seed, p, q) in [(1, 3, 3), (2, 4, 2), (3, 2, 5)] {
        let (x, y) = coupled(seed, p, q, 500);
        let got = cca_matrices(&x, &y, Ridge::Fixed(0.0))
            .unwrap()
            .correlations;
        let want = oracle_correlations(&x, &y);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn scalar_blocks_give_absolute_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = normal(&mut rng, 1, 300);
    let y = &x * -0.8 + normal(&mut rng, 1, 300) * 0.5;
    let rho = cca_matrices(&x, &y, Ridge::Fixed(0.0))
        .unwrap()
        .correlations[0];
    let c = sample_cov(&x, &y)[(0, 0)];
    let r = c / (sample_cov(&x, &x)[(0, 0)] * sample_cov(&y, &y)[(0, 0)]).sqrt();
    assert!((rho - r.abs()).abs() < 1e-12);
}

#[test]
fn variates_are_white_and_paired() {
    let (x, y) = coupled(8, 4, 3, 800);
    let res = cca_matrices(&x, &y, Ridge::Fixed(0.0)).unwrap();
    let uu = sample_cov(&res.u, &res.u);
    let vv = sample_cov(&res.v, &res.v);
    let uv = sample_cov(&res.u, &res.v);
    let r = res.correlations.len();
    for i in 0..r {
        for j in 0..r {
            let id = if i == j { 1.0 } else { 0.0 };
            assert!((uu[(i, j)] - id).abs() < 1e-8);
            assert!((vv[(i, j)] - id).abs() < 1e-8);
            assert!((uv[(i, j)] - id * res.correlations[i]).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariant_to_affine_maps_and_swaps(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let (x, y) = coupled(seed, 3, 3, 400);
        let base = cca_matrices(&x, &y, Ridge::Fixed(0.0)).unwrap().correlations;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let a = normal(&mut rng, 3, 3) + DMatrix::identity(3, 3) * 3.0;
        let b = normal(&mut rng, 3, 3) + DMatrix::identity(3, 3) * 3.0;
        let mx = (&a * &x).add_scalar(shift);
        let my = (&b * &y).add_scalar(-2.0 * shift);
        let moved = cca_matrices(&mx, &my, Ridge::Fixed(0.0)).unwrap().correlations;
        let swapped = cca_matrices(&y, &x, Ridge::Fixed(0.0)).unwrap().correlations;
        for i in 0..3 {
            prop_assert!((base[i] - moved[i]).abs() < 1e-6);
            prop_assert!((base[i] - swapped[i]).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&base[i]));
        }
        prop_assert!(base.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn rejects_bad_input() {
    let (x, y) = coupled(1, 3, 3, 3);
    assert!(cca_matrices(&x, &y, Ridge::Auto).is_err());
    let (x, y) = coupled(1, 3, 3, 50);
    assert!(cca_matrices(&x, &y.columns(0, 40).into_owned(), Ridge::Auto).is_err());
    assert!(cca_matrices(&x, &y, Ridge::Fixed(-1.0)).is_err());
    let mut degenerate = x.clone();
    degenerate.row_mut(2).fill(1.0);
    assert!(cca_matrices(&degenerate, &y, Ridge::Fixed(0.0)).is_err());
    assert!(cca_matrices(&degenerate, &y, Ridge::Fixed(1e-3)).is_ok());
}

#[test]
fn phantom_spot_is_fully_coupled() {
    let p = synthesize(PhantomKind::SingleSpot, 64, 2).unwrap();
    let res = region_cca(&p.pair, &p.mask, Region::Penumbra, 3, Ridge::Auto).unwrap();
    assert!(res.first_correlation() > 1.0 - 1e-6);
    let (u, v) = res.first_images();
    let present = u.values.iter().filter(|x| x.is_some()).count();
    assert_eq!(present, p.mask.count(Region::Penumbra));
    assert_eq!(v.values.iter().filter(|x| x.is_some()).count(), present);
}
