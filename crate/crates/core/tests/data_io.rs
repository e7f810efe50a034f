use std::path::Path;

use proptest::prelude::*;
use snlls::data::{
    encode_idx_images, encode_idx_labels, load_idx, load_iris_csv, parse_idx_images, parse_idx_labels,
    synth_autoencoder, IdxImages,
};
use snlls::numkit::{dense_solve, DenseMatrix};

fn iris_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/iris.csv")
}

#[test]
fn bundled_iris_is_standardized() {
    let ds = load_iris_csv(iris_path()).unwrap();
    assert_eq!((ds.features.rows(), ds.features.cols()), (150, 4));
    assert_eq!((ds.targets.rows(), ds.targets.cols()), (150, 3));
    for c in 0..4 {
        let col = ds.features.column(c);
        let mean = col.iter().sum::<f64>() / 150.0;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 150.0;
        assert!(mean.abs() <= 1e-12, "column {c} mean {mean}");
        assert!((var - 1.0).abs() <= 1e-9, "column {c} var {var}");
    }
    let mut per_class = [0; 3];
    for s in 0..150 {
        let row = ds.targets.row(s);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
        per_class[row.iter().position(|&x| x == 1.0).unwrap()] += 1;
    }
    assert_eq!(per_class, [50, 50, 50]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idx_images_round_trip(count in 0usize..6, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let pixels: Vec<u8> = (0..count * rows * cols)
            .map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 33) as u8)
            .collect();
        let images = IdxImages { count, rows, cols, pixels };
        let bytes = encode_idx_images(&images);
        let parsed = parse_idx_images(&bytes).unwrap();
        prop_assert_eq!(&parsed, &images);
        prop_assert_eq!(encode_idx_images(&parsed), bytes);
    }

    #[test]
    fn idx_labels_round_trip(labels in proptest::collection::vec(any::<u8>(), 0..40)) {
        let bytes = encode_idx_labels(&labels);
        prop_assert_eq!(parse_idx_labels(&bytes).unwrap(), labels);
    }

    #[test]
    fn truncated_idx_is_rejected(cut in 0usize..20) {
        let images = IdxImages { count: 2, rows: 2, cols: 2, pixels: vec![7; 8] };
        let bytes = encode_idx_images(&images);
        prop_assert!(parse_idx_images(&bytes[..cut.min(bytes.len() - 1)]).is_err());
    }
}

#[test]
fn idx_files_load_as_autoencoder_data() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages {
        count: 3,
        rows: 2,
        cols: 2,
        pixels: vec![0, 255, 51, 102, 1, 2, 3, 4, 9, 9, 9, 9],
    };
    let img = dir.path().join("img.idx3");
    let lab = dir.path().join("lab.idx1");
    std::fs::write(&img, encode_idx_images(&images)).unwrap();
    std::fs::write(&lab, encode_idx_labels(&[1, 2, 3])).unwrap();
    let ds = load_idx(&img, Some(&lab)).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.features.row(0), &[0.0, 1.0, 0.2, 0.4]);
    assert_eq!(ds.features, ds.targets);
    assert_eq!(ds.labels.as_deref(), Some(&[1u8, 2, 3][..]));

    std::fs::write(&lab, encode_idx_labels(&[1, 2])).unwrap();
    assert!(load_idx(&img, Some(&lab)).is_err());
}

/// Largest |det| over 3×3 minors formed from the given rows and columns.
fn max_minor3(m: &DenseMatrix) -> f64 {
    let det3 = |r: [usize; 3], c: [usize; 3]| {
        let a = |i: usize, j: usize| m[(r[i], c[j])];
        a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
    };
    let n = m.rows();
    let mut worst = 0.0f64;
    for r0 in 0..n {
        for r1 in r0 + 1..n {
            for r2 in r1 + 1..n {
                for c0 in 0..n {
                    for c1 in c0 + 1..n {
                        for c2 in c1 + 1..n {
                            worst = worst.max(det3([r0, r1, r2], [c0, c1, c2]).abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

#[test]
fn synthetic_images_are_low_rank_and_bounded() {
    let side = 6;
    let ds = synth_autoencoder(20, side, 5).unwrap();
    assert_eq!(ds.features.cols(), side * side);
    assert!(ds.features.row(0).iter().all(|&x| (0.0..=1.0).contains(&x)));
    for s in 0..ds.len() {
        let img = DenseMatrix::from_row_major(side, side, ds.features.row(s).to_vec()).unwrap();
        assert!(max_minor3(&img) < 1e-12, "image {s} has rank above 2");
    }
    // Distinct images are not all the same.
    assert_ne!(ds.features.row(0), ds.features.row(1));
    assert_eq!(synth_autoencoder(20, side, 5).unwrap().features, ds.features);
    // A generic 3×3 block of a rank-3 matrix is detected by the minor test.
    let id = DenseMatrix::identity(3);
    assert!(max_minor3(&id) > 0.5);
    let _ = dense_solve(&id, &[1.0, 2.0, 3.0]).unwrap();
}
