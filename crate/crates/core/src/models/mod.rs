//! The two relay models: a semantic GCN over `(Â, X)` and a structural
//! encoder over Laplacian eigenpairs.

mod checkpoint;
mod eigenmlp;
mod gcn;

pub use checkpoint::{load_eigenmlp, load_gcn, save_eigenmlp, save_gcn, MODEL_MAGIC};
pub use eigenmlp::{
    eigenmlp_apply, eigenmlp_forward, fourier_basis, fourier_features, sign_invariant_encode, EigenMlpParams,
    EigenMlpVars, DEFAULT_PERIOD,
};
pub use gcn::{gcn_apply, gcn_forward, GcnParams, GcnVars, EMBED_DIM, HIDDEN_DIM};

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use ndarray::{array, Array2, Axis};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::{grad_check, Tape};
    use crate::graph::{generate_sbm, normalize, NormKind, SparseGraph};
    use crate::linalg::{gaussian, orthonormalize_columns};
    use crate::spectral::EigenSystem;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn edgeless(n: usize, d: usize) -> SparseGraph {
        SparseGraph::from_edges(n, &[], Array2::zeros((n, d)), None).unwrap()
    }

    #[test]
    fn gcn_identity_on_edgeless_graph() {
        let g = edgeless(4, 3);
        let a = normalize(&g, NormKind::GcnAdjacency);
        let p = GcnParams {
            w1: Array2::eye(3),
            w2: Array2::eye(3),
        };
        let x = array![[1.0, 0.0, 2.0], [0.5, 0.5, 0.0], [0.0, 3.0, 1.0], [2.0, 2.0, 2.0]];
        assert_eq!(gcn_apply(&p, &a, &x).unwrap(), x);
        assert_eq!(
            gcn_apply(&p, &a, &Array2::zeros((4, 3))).unwrap(),
            Array2::<f64>::zeros((4, 3))
        );
    }

    #[test]
    fn gcn_constant_features_on_cycle() {
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
        let g = SparseGraph::from_edges(4, &edges, Array2::zeros((4, 2)), None).unwrap();
        let a = normalize(&g, NormKind::GcnAdjacency);
        let p = GcnParams::init(2, 8, 5, &mut rng(1));
        let x = Array2::from_elem((4, 2), 0.7);
        let h = gcn_apply(&p, &a, &x).unwrap();
        for i in 1..4 {
            for j in 0..5 {
                assert!((h[[i, j]] - h[[0, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gcn_tape_matches_plain_forward() {
        let g = generate_sbm(&[10, 10], 0.4, 0.05, 3).unwrap();
        let a = normalize(&g, NormKind::GcnAdjacency);
        let p = GcnParams::init(g.feature_dim(), 16, 6, &mut rng(2));
        let x = g.features_f64();
        let tape = Tape::new();
        let h = gcn_forward(&p.on_tape(&tape), &a, tape.leaf(x.clone())).unwrap();
        let plain = gcn_apply(&p, &a, &x).unwrap();
        assert!((&*h.value() - &plain).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gcn_rejects_bad_shapes_and_operator() {
        let g = edgeless(3, 2);
        let p = GcnParams::init(2, 4, 4, &mut rng(0));
        let a = normalize(&g, NormKind::GcnAdjacency);
        assert!(gcn_apply(&p, &a, &Array2::zeros((3, 5))).is_err());
        assert!(gcn_apply(&p, &a, &Array2::zeros((4, 2))).is_err());
        let lap = normalize(&g, NormKind::Laplacian);
        assert!(gcn_apply(&p, &lap, &Array2::zeros((3, 2))).is_err());
    }

    #[test]
    fn gcn_is_permutation_equivariant() {
        let g = generate_sbm(&[8, 7], 0.5, 0.1, 9).unwrap();
        let n = g.n();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(4));
        // node i of the permuted graph is node perm[i] of the original
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let edges: Vec<_> = g.edges().iter().map(|&(u, v, w)| (inv[u], inv[v], w)).collect();
        let x = g.features().select(Axis(0), &perm);
        let gp = SparseGraph::from_edges(n, &edges, x, None).unwrap();
        let p = GcnParams::init(g.feature_dim(), 12, 4, &mut rng(5));
        let h = gcn_apply(&p, &normalize(&g, NormKind::GcnAdjacency), &g.features_f64()).unwrap();
        let hp = gcn_apply(&p, &normalize(&gp, NormKind::GcnAdjacency), &gp.features_f64()).unwrap();
        let want = h.select(Axis(0), &perm);
        assert!((&hp - &want).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn fourier_examples() {
        let w = gaussian(4, 3, &mut rng(1));
        let at_zero = fourier_features(&[0.0], 2, &w).unwrap();
        let want = &w.row(1) + &w.row(3);
        assert!((&at_zero.row(0) - &want).iter().all(|v| v.abs() < 1e-15));

        let w1 = gaussian(2, 3, &mut rng(2));
        let at_pi = fourier_features(&[PI], 1, &w1).unwrap();
        let want = w1.row(1).mapv(|v| -v);
        assert!((&at_pi.row(0) - &want).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn fourier_matches_entrywise_evaluation() {
        let lambdas = [0.1, 0.7, 1.3, 1.99, 0.0];
        let t = 5;
        let w = gaussian(2 * t, 4, &mut rng(3));
        let f = fourier_features(&lambdas, t, &w).unwrap();
        for (i, &l) in lambdas.iter().enumerate() {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 1..=t {
                    acc += (k as f64 * l).sin() * w[[2 * (k - 1), c]];
                    acc += (k as f64 * l).cos() * w[[2 * (k - 1) + 1, c]];
                }
                assert!((f[[i, c]] - acc).abs() < 1e-12);
            }
        }
        assert!(fourier_features(&lambdas, t + 1, &w).is_err());
    }

    fn random_eig(n: usize, k: usize, seed: u64) -> EigenSystem {
        let mut r = rng(seed);
        let mut u = gaussian(n, k, &mut r);
        orthonormalize_columns(&mut u);
        let values = (0..k).map(|i| 2.0 * i as f64 / k as f64).collect();
        EigenSystem {
            eigenvalues: values,
            eigenvectors: u,
            k1: k,
            k2: 0,
            residuals: vec![],
        }
    }

    fn brute_encode(p: &EigenMlpParams, u: &Array2<f64>) -> Array2<f64> {
        let relu = |m: Array2<f64>| m.mapv(|v| v.max(0.0));
        let phi = |x: &Array2<f64>| relu(x.dot(&p.phi1)).dot(&p.phi2) + &p.phi2_b;
        let neg = u.mapv(|v| -v);
        let s = phi(u) + phi(&neg);
        relu(s.dot(&p.psi1) + &p.psi1_b).dot(&p.psi2) + &p.psi2_b
    }

    #[test]
    fn encode_matches_brute_force_and_composition() {
        let p = EigenMlpParams::init(3, 10, 5, 4, &mut rng(7));
        let eig = random_eig(6, 3, 8);
        let tape = Tape::new();
        let vars = p.on_tape(&tape);
        let enc = sign_invariant_encode(&vars, tape.leaf(eig.eigenvectors.clone())).unwrap();
        let brute = brute_encode(&p, &eig.eigenvectors);
        assert!((&*enc.value() - &brute).iter().all(|v| v.abs() < 1e-12));

        let z = eigenmlp_apply(&p, &eig).unwrap();
        let rho = fourier_features(&eig.eigenvalues, 4, &p.w_rho).unwrap();
        let want = brute.dot(&rho);
        assert_eq!(z.dim(), (6, 5));
        assert!((&z - &want).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_phi_gives_constant_rows() {
        let mut p = EigenMlpParams::init(3, 6, 4, 2, &mut rng(1));
        p.phi2.fill(0.0);
        p.psi1_b = gaussian(1, 6, &mut rng(2));
        p.psi2_b = gaussian(1, 3, &mut rng(3));
        let eig = random_eig(5, 3, 4);
        let tape = Tape::new();
        let enc = sign_invariant_encode(&p.on_tape(&tape), tape.leaf(eig.eigenvectors.clone())).unwrap();
        let zero_row = brute_encode(&p, &Array2::zeros((1, 3)));
        for row in enc.value().rows() {
            assert!((&row - &zero_row.row(0)).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn zero_eigenvalues_select_cosine_rows() {
        let p = EigenMlpParams::init(3, 6, 4, 2, &mut rng(1));
        let mut p = p;
        p.w_rho = Array2::zeros((4, 4));
        p.w_rho[[1, 0]] = 1.0;
        let mut eig = random_eig(5, 3, 4);
        eig.eigenvalues = vec![0.0; 3];
        let z = eigenmlp_apply(&p, &eig).unwrap();
        let enc = brute_encode(&p, &eig.eigenvectors);
        let row_sums = enc.sum_axis(Axis(1));
        for i in 0..5 {
            assert!((z[[i, 0]] - row_sums[i]).abs() < 1e-12);
            assert!(z.row(i).iter().skip(1).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn global_sign_flip_is_exact() {
        for seed in 0..10 {
            let p = EigenMlpParams::init(4, 16, 8, 3, &mut rng(seed));
            let eig = random_eig(9, 4, seed + 100);
            let mut flipped = eig.clone();
            flipped.eigenvectors.mapv_inplace(|v| -v);
            let a = eigenmlp_apply(&p, &eig).unwrap();
            let b = eigenmlp_apply(&p, &flipped).unwrap();
            assert!((&a - &b).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn per_column_flip_is_not_structural() {
        // rows are encoded jointly, so flipping one column changes the input
        // to φ in a way the symmetric sum does not cancel
        let p = EigenMlpParams::init(4, 16, 8, 3, &mut rng(3));
        let eig = random_eig(9, 4, 4);
        let mut flipped = eig.clone();
        flipped.eigenvectors.column_mut(1).mapv_inplace(|v| -v);
        let a = eigenmlp_apply(&p, &eig).unwrap();
        let b = eigenmlp_apply(&p, &flipped).unwrap();
        let rel = crate::linalg::frobenius((&a - &b).view()) / crate::linalg::frobenius(a.view());
        eprintln!("relative change under a single column flip: {rel:.3e}");
        assert!(rel > 1e-6);
    }

    #[test]
    fn outputs_stay_finite_with_large_weights() {
        let mut p = EigenMlpParams::init(4, 16, 8, 3, &mut rng(3));
        for m in p.params_mut() {
            m.mapv_inplace(|v| v.signum() * 10.0);
        }
        let z = eigenmlp_apply(&p, &random_eig(9, 4, 4)).unwrap();
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let eig = random_eig(6, 3, 1);
        let p = EigenMlpParams::init(3, 8, 4, 2, &mut rng(2));
        let err = grad_check(
            |t, u| eigenmlp_forward(&p.on_tape(t), &eig.eigenvalues, u)?.sin()?.sum(),
            &eig.eigenvectors,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");

        let g = generate_sbm(&[5, 5], 0.6, 0.1, 1).unwrap();
        let a = normalize(&g, NormKind::GcnAdjacency);
        let x = g.features_f64();
        let gp = GcnParams::init(g.feature_dim(), 6, 3, &mut rng(4));
        let err = grad_check(
            |t, w1| {
                let vars = GcnVars {
                    w1,
                    w2: t.leaf(gp.w2.clone()),
                };
                gcn_forward(&vars, &a, t.leaf(x.clone()))?.sin()?.sum()
            },
            &gp.w1,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn checkpoints_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let gp = GcnParams::init(5, 7, 3, &mut rng(1));
        let path = dir.path().join("f.ctgm");
        save_gcn(&path, &gp).unwrap();
        assert_eq!(load_gcn(&path).unwrap(), gp);
        assert!(load_eigenmlp(&path).is_err());

        let ep = EigenMlpParams::init(4, 6, 3, 5, &mut rng(2));
        let path = dir.path().join("g.ctgm");
        save_eigenmlp(&path, &ep).unwrap();
        assert_eq!(load_eigenmlp(&path).unwrap(), ep);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_eigenmlp(&path), Err(crate::Error::FormatError { .. })));
    }
}
