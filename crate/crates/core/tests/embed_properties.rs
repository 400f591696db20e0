use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use smartchair_core::embed::{
    conditional_affinities, pca, perplexity_of, tsne, Diagnostics, PcaModel, TsneParams,
};
use smartchair_core::Error;

fn random_matrix(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    // Mix columns so the covariance is not diagonal.
    let mix: Vec<f64> = (0..p * p).map(|_| normal.sample(&mut rng)).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| normal.sample(&mut rng)).collect();
            (0..p).map(|j| (0..p).map(|k| z[k] * mix[k * p + j]).sum()).collect()
        })
        .collect()
}

/// Covariance eigen-decomposition through nalgebra, eigenvalues descending.
fn oracle(x: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, p) = (x.len(), x[0].len());
    let m = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let mean = m.row_mean();
    let c = DMatrix::from_fn(n, p, |i, j| m[(i, j)] - mean[j]);
    let cov = c.transpose() * &c / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = idx.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    (vals, vecs)
}

fn components(e: &smartchair_core::embed::Embedding) -> Vec<Vec<f64>> {
    match &e.diagnostics {
        Diagnostics::Pca { components, .. } => components.clone(),
        _ => unreachable!(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn pca_matches_dense_oracle() {
    for seed in 0..5 {
        let x = random_matrix(200, 10, seed);
        let model = PcaModel::fit(&x).unwrap();
        let (vals, vecs) = oracle(&x);
        for k in 0..10 {
            assert!((model.eigenvalues[k] - vals[k]).abs() < 1e-9 * vals[0], "eigenvalue {k}");
        }
        // Compare the well-separated leading axes up to sign.
        for k in 0..3 {
            if (vals[k] - vals[k + 1]) > 1e-3 * vals[0] {
                assert!((dot(&model.components[k], &vecs[k]).abs() - 1.0).abs() < 1e-8, "axis {k}");
            }
        }
    }
}

#[test]
fn correlated_cloud_first_axis() {
    let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![1.0, 1.1]];
    let e = pca(&x, 2).unwrap();
    let (_, vecs) = oracle(&x);
    let c = components(&e);
    assert!((dot(&c[0], &vecs[0]).abs() - 1.0).abs() < 1e-12);
    assert!((c[0][0] - 0.707).abs() < 0.01 && (c[0][1] - 0.707).abs() < 0.01, "{:?}", c[0]);
}

#[test]
fn collinear_points_fill_one_axis() {
    let dir: Vec<f64> = (0..10).map(|j| (j as f64 + 1.0).sqrt()).collect();
    let x: Vec<Vec<f64>> = (0..50).map(|i| dir.iter().map(|d| 3.0 + 0.37 * i as f64 * d).collect()).collect();
    let e = pca(&x, 2).unwrap();
    match &e.diagnostics {
        Diagnostics::Pca { explained_ratio, rank, .. } => {
            assert!((explained_ratio[0] - 1.0).abs() < 1e-9);
            assert_eq!(*rank, 1);
        }
        _ => unreachable!(),
    }
    assert!(e.coords.iter().all(|c| c[1] == 0.0));
}

#[test]
fn pca_is_translation_invariant() {
    let x = random_matrix(100, 10, 9);
    let shifted: Vec<Vec<f64>> = x.iter().map(|r| r.iter().enumerate().map(|(j, v)| v + 50.0 * j as f64).collect()).collect();
    let (a, b) = (pca(&x, 3).unwrap(), pca(&shifted, 3).unwrap());
    for (u, v) in a.coords.iter().zip(&b.coords) {
        for (p, q) in u.iter().zip(v) {
            assert!((p - q).abs() < 1e-9, "{p} vs {q}");
        }
    }
}

#[test]
fn pca_input_errors() {
    assert!(pca(&vec![vec![1.0; 10]; 20], 2).is_err());
    assert!(pca(&random_matrix(2, 10, 1), 2).is_err());
    assert!(pca(&random_matrix(20, 10, 1), 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_components_orthonormal_and_error_monotone(seed in any::<u64>(), n in 12usize..80) {
        let x = random_matrix(n, 10, seed);
        let model = PcaModel::fit(&x).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot(&model.components[a], &model.components[b]) - want).abs() < 1e-9);
            }
        }
        let errs: Vec<f64> = (1..=3).map(|d| model.reconstruction_error(&x, d)).collect();
        prop_assert!(errs[0] >= errs[1] - 1e-12 && errs[1] >= errs[2] - 1e-12, "{errs:?}");
        let e = pca(&x, 3).unwrap();
        if let Diagnostics::Pca { explained_variance, .. } = &e.diagnostics {
            prop_assert!(explained_variance.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

fn clusters(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for c in 0..3 {
        for _ in 0..per {
            x.push((0..10).map(|j| if j == c { 12.0 } else { 0.0 } + normal.sample(&mut rng)).collect());
            y.push(c);
        }
    }
    (x, y)
}

fn knn_purity(coords: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let mut hits = 0;
    for i in 0..coords.len() {
        let mut d: Vec<(f64, usize)> = (0..coords.len())
            .filter(|&j| j != i)
            .map(|j| (coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b).powi(2)).sum(), j))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        hits += d[..k].iter().filter(|(_, j)| labels[*j] == labels[i]).count();
    }
    hits as f64 / (coords.len() * k) as f64
}

#[test]
fn tsne_separates_clusters_and_reduces_kl() {
    let (x, y) = clusters(60, 5);
    let e = tsne(&x, 2, &TsneParams { seed: 3, ..TsneParams::default() }).unwrap();
    assert!(e.coords.iter().flatten().all(|v| v.is_finite()));
    let purity = knn_purity(&e.coords, &y, 10);
    assert!(purity >= 0.9, "purity {purity}");
    match e.diagnostics {
        Diagnostics::Tsne { final_kl, kl_after_exaggeration: Some(k250), .. } => {
            assert!(final_kl <= k250, "{final_kl} > {k250}")
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tsne_duplicates_coincide_and_runs_repeat() {
    let (mut x, _) = clusters(35, 8);
    x.push(x[10].clone());
    let params = TsneParams { iterations: 400, seed: 1, ..TsneParams::default() };
    let a = tsne(&x, 3, &params).unwrap();
    let last = x.len() - 1;
    let gap: f64 = a.coords[10].iter().zip(&a.coords[last]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    assert!(gap < 1e-3, "{gap}");
    assert_eq!(a, tsne(&x, 3, &params).unwrap());
}

#[test]
fn affinities_are_calibrated() {
    let (x, _) = clusters(40, 2);
    let n = x.len();
    let p = conditional_affinities(&x, 30.0).unwrap();
    for i in 0..n {
        let row = &p[i * n..(i + 1) * n];
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((perplexity_of(row) - 30.0).abs() < 1e-3, "row {i}: {}", perplexity_of(row));
    }
}

#[test]
fn perplexity_too_large() {
    let (x, _) = clusters(10, 2);
    assert!(matches!(conditional_affinities(&x, 30.0), Err(Error::InvalidConfig(_))));
    assert!(matches!(tsne(&x, 2, &TsneParams::default()), Err(Error::InvalidConfig(_))));
}
