mod common;

use dines::features::{load_features, truncated_svd, tsvd_features, FeatureMatrix, Provenance, SparseMatrix};
use dines::graph::{generate_synthetic, SyntheticSpec};
use dines::numerics::Tensor;
use dines::Error;
use rand::Rng;

/// One-sided Jacobi SVD of a dense row-major `rows × cols` matrix.
/// Returns singular values sorted descending.
fn jacobi_singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut u: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| a[r * cols + c]).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (u[p][r], u[q][r]);
                    u[p][r] = c * x - s * y;
                    u[q][r] = s * x + c * y;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn random_sign_matrix(seed: u64, n: usize, density: f64) -> SparseMatrix {
    let mut rng = common::rng(seed);
    let mut entries = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if r != c && rng.random::<f64>() < density {
                entries.push((r, c, if rng.random::<f64>() < 0.8 { 1.0 } else { -1.0 }));
            }
        }
    }
    SparseMatrix { rows: n, cols: n, entries }
}

fn dense(a: &SparseMatrix) -> Vec<f64> {
    let mut d = vec![0.0; a.rows * a.cols];
    for &(r, c, v) in &a.entries {
        d[r * a.cols + c] += v;
    }
    d
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    // [[3,0],[4,5]] has singular values sqrt(45) and sqrt(5)
    let sv = jacobi_singular_values(&[3.0, 0.0, 4.0, 5.0], 2, 2);
    assert!((sv[0] - 45f64.sqrt()).abs() < 1e-12);
    assert!((sv[1] - 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn reconstruction_matches_exact_truncation() {
    let (n, d) = (50, 8);
    for seed in 0..5 {
        let a = random_sign_matrix(seed, n, 0.1);
        let ad = dense(&a);
        let sv = jacobi_singular_values(&ad, n, n);
        let oracle: f64 = sv[d..].iter().map(|s| s * s).sum::<f64>().sqrt();

        let svd = truncated_svd(&a, d, seed).unwrap();
        let mut err = 0.0;
        for r in 0..n {
            for c in 0..n {
                let approx: f64 = (0..d).map(|k| svd.u.get2(r, k) * svd.singular_values[k] * svd.v.get2(c, k)).sum();
                err += (ad[r * n + c] - approx).powi(2);
            }
        }
        let err = err.sqrt();
        assert!((err - oracle).abs() < 1e-6, "seed {seed}: {err} vs oracle {oracle}");
        for k in 0..d {
            assert!((svd.singular_values[k] - sv[k]).abs() < 1e-6);
        }
    }
}

#[test]
fn left_vectors_orthonormal_and_values_sorted() {
    for seed in 0..5 {
        let a = random_sign_matrix(100 + seed, 80, 0.05);
        let svd = truncated_svd(&a, 12, seed).unwrap();
        let (n, d) = svd.u.dims2();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let g: f64 = (0..n).map(|r| svd.u.get2(r, i) * svd.u.get2(r, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        assert!(worst < 1e-8, "max |UᵀU - I| = {worst}");
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(svd.singular_values.iter().all(|&s| s >= 0.0));
    }
}

#[test]
fn rank_one_example() {
    let a = SparseMatrix { rows: 2, cols: 2, entries: vec![(0, 0, 2.0)] };
    let svd = truncated_svd(&a, 1, 0).unwrap();
    let x: Vec<f64> = (0..2).map(|r| svd.u.get2(r, 0) * svd.singular_values[0]).collect();
    assert!((x[0].abs() - 2.0).abs() < 1e-12);
    assert!(x[1].abs() < 1e-12);
}

#[test]
fn features_are_deterministic() {
    let g = generate_synthetic(&SyntheticSpec::new(300, 2000, 0.85, 9)).unwrap();
    let f1 = tsvd_features(&g, 16, 4).unwrap();
    let f2 = tsvd_features(&g, 16, 4).unwrap();
    assert_eq!(f1, f2);
    assert_eq!((f1.rows(), f1.dim()), (300, 16));
    assert_eq!(f1.provenance(), &Provenance::Tsvd { rank: 16, seed: 4 });
}

#[test]
fn rank_checks() {
    let g = generate_synthetic(&SyntheticSpec::new(10, 20, 0.85, 9)).unwrap();
    assert!(matches!(tsvd_features(&g, 11, 0), Err(Error::Usage(_))));
    assert!(matches!(tsvd_features(&g, 0, 0), Err(Error::Usage(_))));
}

#[test]
fn save_load_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_synthetic(&SyntheticSpec::new(120, 700, 0.8, 1)).unwrap();
    let f = tsvd_features(&g, 8, 2).unwrap();
    let path = dir.path().join("features.tsv");
    f.save(&path).unwrap();
    assert!(dir.path().join("features.meta.json").exists());
    let back = load_features(&path, 120).unwrap();
    assert_eq!(back, f);
    assert!(back.values().data().iter().zip(f.values().data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(matches!(load_features(&path, 121), Err(Error::Shape { .. })));
}

#[test]
fn file_features_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.tsv");
    let f = FeatureMatrix::new(Tensor::matrix(2, 3, vec![0.1, -2.5e-300, 3.0, 1e300, 0.0, -0.0]).unwrap(), Provenance::File)
        .unwrap();
    f.save(&path).unwrap();
    assert_eq!(load_features(&path, 2).unwrap(), f);
}
