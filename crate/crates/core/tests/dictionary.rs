use nalgebra::DMatrix;
use patchdim::dictionary::{
    canonical_variate_matrix, crop_around_spot, learn_dictionary, learn_dictionary_cca,
    learn_dictionary_from, CcaDictionaryConfig, ImageDictionary,
};
use patchdim::phantom::{synthesize, PhantomKind};
use patchdim::{extract_patches, ImageGrid, ImagePair, Modality, Padding, Region, RegionMask};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.transpose() * qb).singular_values();
    s.min().clamp(-1.0, 1.0).acos()
}

fn check_orthonormal(d: &ImageDictionary<f64>) {
    let gram = d.atoms.transpose() * &d.atoms;
    assert!((gram - DMatrix::identity(d.atom_count, d.atom_count)).amax() < 1e-8);
    assert_eq!(d.flattened.as_slice(), d.atoms.as_slice());
    for col in d.atoms.column_iter() {
        let top = col
            .iter()
            .copied()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap();
        assert!(top > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recovers_a_noisy_subspace(seed in any::<u64>(), r in 1usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = normal(&mut rng, 18, r);
        let data = &basis * normal(&mut rng, r, 400) + normal(&mut rng, 18, 400) * 1e-6;
        let d = learn_dictionary_from(&data, r, "x").unwrap();
        check_orthonormal(&d);
        prop_assert!(largest_principal_angle(&d.atoms, &basis) < 1e-3);
    }

    #[test]
    fn column_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = normal(&mut rng, 6, 80);
        let mut order: Vec<usize> = (0..80).collect();
        order.shuffle(&mut rng);
        let shuffled = DMatrix::from_fn(6, 80, |i, j| data[(i, order[j])]);
        let a = learn_dictionary_from(&data, 4, "a").unwrap();
        let b = learn_dictionary_from(&shuffled, 4, "a").unwrap();
        prop_assert!((&a.atoms - &b.atoms).amax() < 1e-9);
    }
}

#[test]
fn rerun_is_bit_identical() {
    let p = synthesize(PhantomKind::SingleSpot, 64, 1).unwrap();
    let patches = extract_patches(&p.pair, 3, Padding::Mirror, true).unwrap();
    let a = learn_dictionary(&patches, 7, "img").unwrap();
    assert_eq!(a, learn_dictionary(&patches, 7, "img").unwrap());
    assert_eq!(a.flattened.len(), 126);
    check_orthonormal(&a);
    let back = ImageDictionary::<f64>::from_record(&a.to_record()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn rank_and_count_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rank_two = normal(&mut rng, 5, 2) * normal(&mut rng, 2, 30);
    assert!(learn_dictionary_from(&rank_two, 2, "x").is_ok());
    assert!(learn_dictionary_from(&rank_two, 3, "x").is_err());
    assert!(learn_dictionary_from(&normal(&mut rng, 9, 30), 8, "x").is_err());
    assert!(learn_dictionary_from(&normal(&mut rng, 9, 3), 3, "x").is_err());
}

fn random_image(rng: &mut ChaCha8Rng, size: usize, m: Modality) -> ImageGrid<f64> {
    ImageGrid::new(
        size,
        size,
        (0..size * size)
            .map(|_| rng.sample(StandardNormal))
            .collect(),
        m,
    )
    .unwrap()
}

#[test]
fn identical_modalities_duplicate_coordinates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cont = random_image(&mut rng, 40, Modality::Continuum);
    let mag = ImageGrid::new(40, 40, cont.values().to_vec(), Modality::Magnetogram).unwrap();
    let pair = ImagePair::new(cont, mag).unwrap();
    let mask = RegionMask::uniform(40, 40, Region::Background).unwrap();
    let cfg = CcaDictionaryConfig::default();
    let data = canonical_variate_matrix(&pair, &mask, &cfg).unwrap();
    assert_eq!(data.nrows(), 18);
    assert!((data.rows(0, 9) - data.rows(9, 9)).amax() < 1e-6);
    let d = learn_dictionary_cca(&pair, &mask, 3, &cfg, "same").unwrap();
    for a in 0..3 {
        for i in 0..9 {
            assert!((d.atoms[(i, a)] - d.atoms[(i + 9, a)]).abs() < 1e-6);
        }
    }
}

#[test]
fn noise_pair_still_gives_a_dictionary() {
    let p = synthesize(PhantomKind::Noise, 64, 4).unwrap();
    let cfg = CcaDictionaryConfig {
        pairs: Some(4),
        ..Default::default()
    };
    let d = learn_dictionary_cca(&p.pair, &p.mask, 5, &cfg, "noise").unwrap();
    assert_eq!(d.flattened.len(), 2 * 4 * 5);
    check_orthonormal(&d);
    let bad = CcaDictionaryConfig {
        pairs: Some(10),
        ..Default::default()
    };
    assert!(learn_dictionary_cca(&p.pair, &p.mask, 5, &bad, "noise").is_err());
}

#[test]
fn crop_follows_the_spot() {
    let p = synthesize(PhantomKind::SingleSpot, 128, 0).unwrap();
    let (pair, mask) = crop_around_spot(&p.pair, &p.mask, 96).unwrap();
    assert_eq!(pair.shape(), (96, 96));
    let labelled = |m: &RegionMask| {
        m.labels()
            .iter()
            .filter(|&&r| r != Region::Background)
            .count()
    };
    assert_eq!(labelled(&mask), labelled(&p.mask));
    assert!(crop_around_spot(&p.pair, &p.mask, 129).is_err());
}
