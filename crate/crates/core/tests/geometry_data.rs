mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use circularity::data::{
    generate, load_dataset, lowess_smooth, save_dataset, GeneratorKind, GeneratorSpec,
    SmootherConfig,
};
use circularity::geometry::{is_simple_closed_polygon, Classification, DEFAULT_EPS};
use circularity::OrderedDataset;

use common::*;

fn ngon(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2, |i, j| {
        let t = std::f64::consts::TAU * i as f64 / n as f64;
        if j == 0 {
            t.cos()
        } else {
            t.sin()
        }
    })
}

#[test]
fn permuted_dodecagon_agrees_with_exhaustive_oracle() {
    let base = ngon(12);
    assert_eq!(
        is_simple_closed_polygon(&base, DEFAULT_EPS).unwrap().classification,
        Classification::Simple
    );
    let mut r = rng(12);
    for _ in 0..50 {
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut r);
        let z = DMatrix::from_fn(12, 2, |i, j| base[(perm[i], j)]);
        if min_relative_orientation(&z) <= 10.0 * DEFAULT_EPS {
            continue;
        }
        let ours = is_simple_closed_polygon(&z, DEFAULT_EPS).unwrap().classification;
        let expected = if brute_self_intersects(&z) {
            Classification::SelfIntersecting
        } else {
            Classification::Simple
        };
        assert_eq!(ours, expected);
    }
}

#[test]
fn random_polygons_agree_with_exhaustive_oracle() {
    let mut r = rng(99);
    let mut checked = 0;
    while checked < 500 {
        let n = r.random_range(3..=12);
        let z = uniform_points(&mut r, n, 2);
        if min_relative_orientation(&z) <= 10.0 * DEFAULT_EPS {
            continue;
        }
        checked += 1;
        let v = is_simple_closed_polygon(&z, DEFAULT_EPS).unwrap();
        assert_eq!(v.classification == Classification::SelfIntersecting, brute_self_intersects(&z));
        assert_eq!(v.classification == Classification::Simple, v.witnesses.is_empty());
    }
}

fn polygon_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (4usize..14).prop_flat_map(|n| {
        proptest::collection::vec(-1.0f64..1.0, 2 * n).prop_map(move |v| DMatrix::from_vec(n, 2, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn classification_ignores_rotation_of_order_and_reversal(z in polygon_strategy(), k in 0usize..14) {
        let n = z.nrows();
        let base = is_simple_closed_polygon(&z, DEFAULT_EPS).unwrap().classification;
        let rotated = DMatrix::from_fn(n, 2, |i, j| z[((i + k) % n, j)]);
        let reversed = DMatrix::from_fn(n, 2, |i, j| z[(n - 1 - i, j)]);
        prop_assert_eq!(is_simple_closed_polygon(&rotated, DEFAULT_EPS).unwrap().classification, base);
        prop_assert_eq!(is_simple_closed_polygon(&reversed, DEFAULT_EPS).unwrap().classification, base);
    }

    #[test]
    fn classification_ignores_rigid_motion_and_scale(
        z in polygon_strategy(),
        theta in 0.0f64..6.3,
        scale in 1e-3f64..1e3,
        shift in (-10.0f64..10.0, -10.0f64..10.0),
    ) {
        prop_assume!(min_relative_orientation(&z) > 1e-6);
        let base = is_simple_closed_polygon(&z, DEFAULT_EPS).unwrap().classification;
        let (c, s) = (theta.cos(), theta.sin());
        let moved = DMatrix::from_fn(z.nrows(), 2, |i, j| {
            let (x, y) = (z[(i, 0)], z[(i, 1)]);
            scale * if j == 0 { c * x - s * y } else { s * x + c * y } + if j == 0 { shift.0 } else { shift.1 }
        });
        prop_assert_eq!(is_simple_closed_polygon(&moved, DEFAULT_EPS).unwrap().classification, base);
    }

    #[test]
    fn dataset_files_round_trip(v in proptest::collection::vec(-1e6f64..1e6, 9..60), d in 1usize..4) {
        let n = v.len() / d;
        prop_assume!(n >= 3);
        let data = OrderedDataset::new(DMatrix::from_fn(n, d, |i, j| v[i * d + j] * 1.000_000_1e-3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        save_dataset(&data, &path).unwrap();
        prop_assert_eq!(load_dataset(&path, false).unwrap(), data);
    }
}

#[test]
fn lowess_reduces_noise_on_a_sine() {
    let n = 200;
    let mut r = rng(8);
    let clean: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::TAU * i as f64 / n as f64).sin())
        .collect();
    let noisy: Vec<f64> = clean
        .iter()
        .map(|c| c + 0.1 * r.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let data = OrderedDataset::new(DMatrix::from_vec(n, 1, noisy.clone())).unwrap();
    let smooth = lowess_smooth(&data, &SmootherConfig::default()).unwrap();
    let var = |v: &[f64]| v.iter().zip(&clean).map(|(a, c)| (a - c).powi(2)).sum::<f64>() / n as f64;
    let before = var(&noisy);
    let after = var(smooth.points().as_slice());
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn generators_cover_every_kind() {
    for (kind, d) in [
        (GeneratorKind::Circle, 2),
        (GeneratorKind::ToroidalHelix, 3),
        (GeneratorKind::GaussianCloud, 5),
    ] {
        let data = generate(&GeneratorSpec::new(kind, 750)).unwrap();
        assert_eq!((data.n(), data.dim()), (750, d));
    }
}
