use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::grad_check;
use crate::graph::{normalize, NormKind, SparseGraph};
use crate::linalg::frobenius;
use crate::models::{eigenmlp_apply, gcn_apply};
use crate::spectral::{dense_eig, EigenSystem};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn toy_g(k: usize, seed: u64) -> EigenMlpParams {
    EigenMlpParams::init(k, 32, 16, 4, &mut rng(seed))
}

fn spread_eigenvalues(k: usize) -> Vec<f64> {
    (0..k).map(|i| 2.0 * i as f64 / (k - 1) as f64).collect()
}

fn planted_z(g: &EigenMlpParams, u: &Array2<f64>, lambda: &[f64]) -> Array2<f64> {
    let eig = EigenSystem {
        eigenvalues: lambda.to_vec(),
        eigenvectors: u.clone(),
        k1: lambda.len(),
        k2: 0,
        residuals: vec![],
    };
    eigenmlp_apply(g, &eig).unwrap()
}

#[test]
fn zero_steps_returns_orthonormal_init() {
    let g = toy_g(6, 1);
    let lambda = spread_eigenvalues(6);
    let z = Array2::zeros((6, 16));
    let cfg = InversionConfig {
        steps: 0,
        ..Default::default()
    };
    let inv = invert_eigenvectors(&g, &z, &lambda, 1.0, &cfg).unwrap();
    assert!(orthogonality_residual(inv.value.view()) < 1e-10);
    assert_eq!(inv.value, orthonormal_init(6, cfg.seed));
    assert!(inv.trace.is_empty());
}

/// Orthonormal matrix a small rotation away from the inversion's start.
fn near_start(k: usize, seed: u64, noise: f64) -> Array2<f64> {
    let mut u = orthonormal_init(k, seed) + crate::linalg::gaussian(k, k, &mut rng(seed + 100)) * noise;
    assert!(crate::linalg::orthonormalize_columns(&mut u));
    u
}

#[test]
fn planted_eigenvectors_near_start_are_recovered() {
    let k = 12;
    let g = toy_g(k, 2);
    let lambda = spread_eigenvalues(k);
    let cfg = InversionConfig::default();
    let u_star = near_start(k, cfg.seed, 0.01);
    let z = planted_z(&g, &u_star, &lambda);
    let inv = invert_eigenvectors(&g, &z, &lambda, 1.0, &cfg).unwrap();
    assert!(inv.loss < 1e-3, "objective {}", inv.loss);
}

#[test]
fn eigenvector_objective_trends_down() {
    let k = 12;
    let g = toy_g(k, 2);
    let lambda = spread_eigenvalues(k);
    let z = planted_z(&g, &orthonormal_init(k, 77), &lambda);
    let inv = invert_eigenvectors(&g, &z, &lambda, 1.0, &InversionConfig::default()).unwrap();
    assert!(inv.loss < 0.5 * inv.trace[0], "{} vs {}", inv.loss, inv.trace[0]);
    let means: Vec<f64> = inv
        .trace
        .chunks(50)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0] * 1.01, "{means:?}");
    }
}

#[test]
fn identity_reconstruction_is_empty() {
    let a = reconstruct_adjacency(Array2::<f64>::eye(4).view(), &[0.0; 4], 0.01);
    assert_eq!(a, Array2::<f64>::zeros((4, 4)));
}

#[test]
fn cycle_spectrum_reconstructs_the_cycle() {
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
    let g = SparseGraph::from_edges(4, &edges, Array2::zeros((4, 1)), None).unwrap();
    let lap = normalize(&g, NormKind::Laplacian).matrix.to_dense();
    let eig = dense_eig(&lap).unwrap();
    let raw = raw_adjacency(eig.eigenvectors.view(), &eig.eigenvalues);
    let want = g.adjacency().to_dense() * 0.5;
    assert!((&raw - &want).iter().all(|v| v.abs() < 1e-10));
    let a = reconstruct_adjacency(eig.eigenvectors.view(), &eig.eigenvalues, 0.01);
    assert!((&a - &want).iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn raw_reconstruction_preserves_spectrum() {
    for seed in 0..5 {
        let k = 10;
        let u = orthonormal_init(k, seed);
        let mut r = rng(seed);
        let mut lambda: Vec<f64> = (0..k).map(|_| r.random_range(0.0..2.0)).collect();
        let raw = raw_adjacency(u.view(), &lambda);
        let eig = dense_eig(&(Array2::eye(k) - raw)).unwrap();
        lambda.sort_by(f64::total_cmp);
        for (a, b) in eig.eigenvalues.iter().zip(&lambda) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn post_processing_invariants() {
    let k = 9;
    let u = orthonormal_init(k, 3);
    let lambda: Vec<f64> = (0..k).map(|i| 0.2 * i as f64).collect();
    for threshold in [0.0, 0.01, 0.1] {
        let a = reconstruct_adjacency(u.view(), &lambda, threshold);
        for i in 0..k {
            assert_eq!(a[[i, i]], 0.0);
            for j in 0..k {
                assert_eq!(a[[i, j]], a[[j, i]]);
                assert!(a[[i, j]] == 0.0 || a[[i, j]] >= threshold);
            }
        }
    }
    let all_dropped = reconstruct_adjacency(u.view(), &lambda, 1.0);
    assert!(all_dropped.iter().all(|&v| v == 0.0));
}

/// Two-layer GCN computing `relu(x) - relu(-x) = x` on an edgeless graph,
/// i.e. a single linear layer with identity weights.
fn edgeless_identity_gcn(d: usize) -> GcnParams {
    let eye = Array2::<f64>::eye(d);
    GcnParams {
        w1: ndarray::concatenate![ndarray::Axis(1), eye, -&eye],
        w2: ndarray::concatenate![ndarray::Axis(0), eye, -&eye],
    }
}

#[test]
fn identity_attribute_inversion() {
    let f = edgeless_identity_gcn(3);
    let h = array![[0.5, -1.0, 0.2], [1.5, 0.3, -0.9], [0.7, 0.7, 0.1], [-0.2, 1.1, 1.3]];
    let inv = invert_attributes(&f, &h, &Array2::zeros((4, 4)), &[1.0; 3], &InversionConfig::default()).unwrap();
    assert!(inv.loss < 1e-6, "{}", inv.loss);
    assert!((&inv.value - &h).iter().all(|v| v.abs() < 1e-5));
}

#[test]
fn zero_step_attributes_are_scaled_noise() {
    let f = GcnParams::init(3, 8, 4, &mut rng(1));
    let cfg = InversionConfig {
        steps: 0,
        ..Default::default()
    };
    let h = Array2::zeros((5, 4));
    let a = Array2::zeros((5, 5));
    let x = invert_attributes(&f, &h, &a, &[1.0, 0.0, 10.0], &cfg).unwrap().value;
    assert!(x.column(1).iter().all(|&v| v == 0.0));
    assert!(
        frobenius(x.column(2).insert_axis(ndarray::Axis(1)).view())
            > frobenius(x.column(0).insert_axis(ndarray::Axis(1)).view())
    );
}

fn random_weighted_adjacency(k: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    let mut a = Array2::zeros((k, k));
    for i in 0..k {
        for j in (i + 1)..k {
            if r.random::<f64>() < 0.3 {
                let w = r.random_range(0.05..1.0);
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    a
}

#[test]
fn planted_attributes_objective_drops() {
    let k = 20;
    let f = GcnParams::init(6, 32, 16, &mut rng(5));
    let a = random_weighted_adjacency(k, 6);
    let x_star = crate::linalg::gaussian(k, 6, &mut rng(7));
    let a_hat = normalize_matrix(&CsrMatrix::from_dense(a.view()), NormKind::GcnAdjacency);
    let h = gcn_apply(&f, &a_hat, &x_star).unwrap();
    let inv = invert_attributes(&f, &h, &a, &[1.0; 6], &InversionConfig::default()).unwrap();
    assert!(inv.loss < 0.05 * inv.trace[0], "{} vs {}", inv.loss, inv.trace[0]);
}

#[test]
fn planted_attributes_near_start_are_recovered() {
    let k = 20;
    let f = GcnParams::init(6, 32, 16, &mut rng(5));
    let a = random_weighted_adjacency(k, 6);
    let cfg = InversionConfig {
        steps: 0,
        ..Default::default()
    };
    let start = invert_attributes(&f, &Array2::zeros((k, 16)), &a, &[1.0; 6], &cfg)
        .unwrap()
        .value;
    let x_star = &start + &(crate::linalg::gaussian(k, 6, &mut rng(7)) * 0.05);
    let a_hat = normalize_matrix(&CsrMatrix::from_dense(a.view()), NormKind::GcnAdjacency);
    let h = gcn_apply(&f, &a_hat, &x_star).unwrap();
    let inv = invert_attributes(&f, &h, &a, &[1.0; 6], &InversionConfig::default()).unwrap();
    assert!(inv.loss < 1e-3, "objective {}", inv.loss);
}

#[test]
fn objectives_pass_grad_check() {
    let k = 5;
    let g = toy_g(k, 3);
    let lambda = spread_eigenvalues(k);
    let z = crate::linalg::gaussian(k, 16, &mut rng(1));
    let u0 = orthonormal_init(k, 2) + crate::linalg::gaussian(k, k, &mut rng(3)) * 0.1;
    let err = grad_check(|_, u| eigenvector_objective(&g, &z, &lambda, 0.7, 1.0, u), &u0, 1e-6).unwrap();
    assert!(err < 1e-4, "eigenvector objective {err}");

    let f = GcnParams::init(4, 8, 6, &mut rng(4));
    let a = random_weighted_adjacency(k, 5);
    let a_hat = normalize_matrix(&CsrMatrix::from_dense(a.view()), NormKind::GcnAdjacency);
    let h = crate::linalg::gaussian(k, 6, &mut rng(6));
    let x0 = crate::linalg::gaussian(k, 4, &mut rng(7));
    let err = grad_check(|_, x| attribute_objective(&f, &a_hat, &h, x), &x0, 1e-6).unwrap();
    assert!(err < 1e-4, "attribute objective {err}");
}

fn sample_condensed() -> CondensedGraph {
    let k = 6;
    let adjacency = reconstruct_adjacency(orthonormal_init(k, 1).view(), &spread_eigenvalues(k), 0.0);
    CondensedGraph {
        adjacency,
        features: crate::linalg::gaussian(k, 3, &mut rng(2)).mapv(|v| v as f32),
        proxy_labels: crate::linalg::gaussian(k, 4, &mut rng(3)).mapv(|v| v as f32),
        provenance: Provenance {
            source: GraphSource::Inversion,
            condense: None,
            inversion: Some(InversionConfig::default()),
            eigenvector_loss: Some(0.1),
            orthogonality_residual: Some(1e-3),
            attribute_loss: None,
            edges: 3,
        },
    }
}

#[test]
fn condensed_graph_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cg = sample_condensed();
    save_condensed(&cg, dir.path()).unwrap();
    let back = load_condensed(dir.path()).unwrap();
    assert_eq!(back, cg);
    for (a, b) in back.adjacency.iter().zip(cg.adjacency.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn corrupt_or_missing_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_condensed(dir.path()), Err(Error::FormatError { .. })));

    save_condensed(&sample_condensed(), dir.path()).unwrap();
    let adj = dir.path().join("adjacency.ctgf-dense");
    let mut bytes = std::fs::read(&adj).unwrap();
    bytes[0] = b'Z';
    std::fs::write(&adj, &bytes).unwrap();
    assert!(matches!(load_condensed(dir.path()), Err(Error::FormatError { .. })));

    save_condensed(&sample_condensed(), dir.path()).unwrap();
    let feats = dir.path().join("features.ctgf");
    let bytes = std::fs::read(&feats).unwrap();
    std::fs::write(&feats, &bytes[..bytes.len() - 2]).unwrap();
    assert!(matches!(load_condensed(dir.path()), Err(Error::FormatError { .. })));
}
