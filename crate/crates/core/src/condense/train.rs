use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::{assign_by_similarity, cluster_means, kmeans, matching_rate};
use super::loss::joint_loss;
use super::CondenseConfig;
use crate::autodiff::{Adam, Tape};
use crate::error::{Error, Result};
use crate::graph::{normalize, NormKind, NormalizedOperator, SparseGraph};
use crate::linalg::{glorot, COSINE_EPS};
use crate::models::{eigenmlp_apply, eigenmlp_forward, gcn_apply, gcn_forward, EigenMlpParams, GcnParams};
use crate::spectral::EigenSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Binary cross-entropy of the final epoch.
    pub loss: f64,
    /// Head accuracy on real vs shuffled rows in the final epoch.
    pub accuracy: f64,
}

/// One optimisation phase of the alternating loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub iter: usize,
    pub phase: Phase,
    pub first_loss: f64,
    pub loss: f64,
    pub matching_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Semantic,
    Structural,
}

/// Output of relay-model training: centroids, cluster labels from both
/// branches and the alignment history.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensationState {
    /// Semantic centroids `H′`, `n_prime × d_emb`.
    pub h_cent: Array2<f64>,
    /// Structural centroids `Z′`, `n_prime × d_emb`.
    pub z_cent: Array2<f64>,
    pub y_h: Vec<usize>,
    pub y_z: Vec<usize>,
    /// Fraction of nodes with `y_h == y_z` after each iteration.
    pub matching_rate_history: Vec<f64>,
    pub log: Vec<PhaseRecord>,
    /// Iteration whose parameters were kept (lowest summed phase loss).
    pub selected_iter: usize,
}

fn annotate(err: Error, iter: usize, phase: Phase, step: usize) -> Error {
    match err {
        Error::NumericalOverflow(msg) => {
            Error::NumericalOverflow(format!("{msg} (iteration {iter}, {phase:?} step {step})"))
        }
        other => other,
    }
}

/// Trains the semantic GCN to tell real node features from row-shuffled
/// ones through a throwaway linear head. A new shuffle is drawn every epoch.
pub fn pretrain_semantic(
    mut f: GcnParams,
    graph: &SparseGraph,
    m_pre: usize,
    lr_pre: f64,
    seed: u64,
) -> Result<(GcnParams, PretrainReport)> {
    let a_hat = normalize(graph, NormKind::GcnAdjacency);
    let x = graph.features_f64();
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut head_w = glorot(f.embed_dim(), 1, &mut rng);
    let mut head_b = Array2::<f64>::zeros((1, 1));
    let mut opt = Adam::new(lr_pre);
    let mut report = PretrainReport {
        loss: f64::NAN,
        accuracy: 0.0,
    };
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..m_pre {
        order.shuffle(&mut rng);
        let shuffled = x.select(Axis(0), &order);
        let tape = Tape::new();
        let vars = f.on_tape(&tape);
        let w = tape.leaf(head_w.clone());
        let b = tape.leaf(head_b.clone());
        let real = gcn_forward(&vars, &a_hat, tape.leaf(x.clone()))?
            .matmul(w)?
            .add_row(b)?;
        let fake = gcn_forward(&vars, &a_hat, tape.leaf(shuffled))?.matmul(w)?.add_row(b)?;
        let loss = real
            .neg()?
            .softplus()?
            .sum()?
            .add(fake.softplus()?.sum()?)?
            .scale(0.5 / n as f64)?;
        let correct =
            real.value().iter().filter(|&&v| v > 0.0).count() + fake.value().iter().filter(|&&v| v < 0.0).count();
        report = PretrainReport {
            loss: loss.item(),
            accuracy: correct as f64 / (2 * n) as f64,
        };
        let grads = tape.backward(loss)?;
        let [g1, g2] = vars.grads(&grads);
        let (gw, gb) = (grads.get(w), grads.get(b));
        let [w1, w2] = f.params_mut();
        opt.step(&mut [w1, w2, &mut head_w, &mut head_b], &[g1, g2, gw, gb]);
    }
    Ok((f, report))
}

/// Initial centroids from k-means on the embeddings, re-expressed as the
/// arithmetic means of the resulting clusters.
pub(crate) fn init_centroids(h: &Array2<f64>, k: usize, seed: u64) -> Result<(Array2<f64>, Vec<usize>)> {
    let km = kmeans(h.view(), k, seed)?;
    let (means, _) = cluster_means(h.view(), &km.labels, k);
    Ok((means, km.labels))
}

/// Per-cluster means of `z` under `labels`; a cluster nobody belongs to
/// borrows a random row instead.
fn means_or_sample(z: &Array2<f64>, labels: &[usize], k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let (mut means, counts) = cluster_means(z.view(), labels, k);
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            let pick = rng.random_range(0..z.nrows());
            means.row_mut(c).assign(&z.row(pick));
        }
    }
    means
}

struct Semantic<'a> {
    a_hat: &'a NormalizedOperator,
    x: &'a Array2<f64>,
    opt: Adam,
}

impl Semantic<'_> {
    /// `steps` Adam updates of `f` and `H′` on the joint loss against
    /// `labels`. Returns the first and last loss.
    fn train(
        &mut self,
        f: &mut GcnParams,
        cent: &mut Array2<f64>,
        labels: &[usize],
        cfg: &CondenseConfig,
        iter: usize,
    ) -> Result<(f64, f64)> {
        let mut losses = (f64::NAN, f64::NAN);
        for step in 0..cfg.m_train {
            let tape = Tape::new();
            let vars = f.on_tape(&tape);
            let c = tape.leaf(cent.clone());
            let loss = gcn_forward(&vars, self.a_hat, tape.leaf(self.x.clone()))
                .and_then(|h| joint_loss(h, c, labels, cfg.tau, cfg.alpha))
                .map_err(|e| annotate(e, iter, Phase::Semantic, step))?;
            record(&mut losses, step, loss.item());
            let grads = tape.backward(loss)?;
            let [g1, g2] = vars.grads(&grads);
            let gc = grads.get(c);
            let [w1, w2] = f.params_mut();
            self.opt.step(&mut [w1, w2, cent], &[g1, g2, gc]);
        }
        Ok(losses)
    }
}

fn record(losses: &mut (f64, f64), step: usize, value: f64) {
    if step == 0 {
        losses.0 = value;
    }
    losses.1 = value;
}

fn train_structural(
    g: &mut EigenMlpParams,
    cent: &mut Array2<f64>,
    eig: &EigenSystem,
    labels: &[usize],
    cfg: &CondenseConfig,
    opt: &mut Adam,
    iter: usize,
) -> Result<(f64, f64)> {
    let mut losses = (f64::NAN, f64::NAN);
    for step in 0..cfg.m_train {
        let tape = Tape::new();
        let vars = g.on_tape(&tape);
        let c = tape.leaf(cent.clone());
        let loss = eigenmlp_forward(&vars, &eig.eigenvalues, tape.leaf(eig.eigenvectors.clone()))
            .and_then(|z| joint_loss(z, c, labels, cfg.tau, cfg.alpha))
            .map_err(|e| annotate(e, iter, Phase::Structural, step))?;
        record(&mut losses, step, loss.item());
        let grads = tape.backward(loss)?;
        let gs = vars.grads(&grads);
        let gc = grads.get(c);
        let mut params: Vec<&mut Array2<f64>> = g.params_mut().into_iter().collect();
        params.push(cent);
        let mut all_grads = gs.to_vec();
        all_grads.push(gc);
        opt.step(&mut params, &all_grads);
    }
    Ok(losses)
}

/// The contrastive losses only see directions, so centroid norms are
/// arbitrary. Gives each centroid the mean norm of the embeddings assigned
/// to it (of all embeddings if it has none), keeping its direction.
pub(crate) fn rescale_to_members(cent: &mut Array2<f64>, emb: &Array2<f64>, labels: &[usize]) {
    let norms: Vec<f64> = emb.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let overall = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    let mut sum = vec![0.0; cent.nrows()];
    let mut count = vec![0usize; cent.nrows()];
    for (&c, &n) in labels.iter().zip(&norms) {
        sum[c] += n;
        count[c] += 1;
    }
    for (c, mut row) in cent.rows_mut().into_iter().enumerate() {
        let target = if count[c] > 0 {
            sum[c] / count[c] as f64
        } else {
            overall
        };
        let current = row.dot(&row).sqrt();
        if current > COSINE_EPS {
            row *= target / current;
        }
    }
}

/// Fresh relay models sized for `graph` and `cfg`.
pub fn init_relay_models(graph: &SparseGraph, cfg: &CondenseConfig) -> (GcnParams, EigenMlpParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_f00d);
    let f = GcnParams::init(graph.feature_dim(), cfg.hidden_dim, cfg.embed_dim, &mut rng);
    let g = EigenMlpParams::init(cfg.n_prime, cfg.hidden_dim, cfg.embed_dim, cfg.period, &mut rng);
    (f, g)
}

/// Alternating optimisation of the two relay models.
///
/// `H′` starts as the cluster means of k-means on the semantic embeddings
/// and `Z′` as the means of the structural embeddings under the same
/// clusters. Each iteration trains the semantic branch against the
/// structural labels, relabels by similarity to `H′`, trains the structural
/// branch against those labels and relabels by similarity to `Z′`. The
/// parameters of the iteration with the lowest summed final phase losses
/// are returned.
pub fn alternating_optimize(
    mut f: GcnParams,
    mut g: EigenMlpParams,
    graph: &SparseGraph,
    eig: &EigenSystem,
    cfg: &CondenseConfig,
) -> Result<(CondensationState, GcnParams, EigenMlpParams)> {
    cfg.validate()?;
    if eig.len() != cfg.n_prime || g.k() != cfg.n_prime {
        return Err(Error::shape(
            "eigenpairs for the structural branch",
            cfg.n_prime,
            eig.len(),
        ));
    }
    if eig.n() != graph.n() {
        return Err(Error::shape("eigenvector rows", graph.n(), eig.n()));
    }
    if graph.n() < cfg.n_prime {
        return Err(Error::InvalidConfig(format!(
            "cannot condense {} nodes into {}",
            graph.n(),
            cfg.n_prime
        )));
    }
    let k = cfg.n_prime;
    let a_hat = normalize(graph, NormKind::GcnAdjacency);
    let x = graph.features_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let h = gcn_apply(&f, &a_hat, &x)?;
    let (mut h_cent, mut y_h) = init_centroids(&h, k, rng.random())?;
    let mut y_z = y_h.clone();
    let z = eigenmlp_apply(&g, eig)?;
    let mut z_cent = means_or_sample(&z, &y_h, k, &mut rng);

    let mut sem = Semantic {
        a_hat: &a_hat,
        x: &x,
        opt: Adam::new(cfg.lr_sem),
    };
    let mut str_opt = Adam::new(cfg.lr_str);
    let mut history = Vec::with_capacity(cfg.k_iter);
    let mut log = Vec::with_capacity(2 * cfg.k_iter);
    let mut best: Option<(
        f64,
        usize,
        GcnParams,
        EigenMlpParams,
        Array2<f64>,
        Array2<f64>,
        Vec<usize>,
        Vec<usize>,
    )> = None;

    for iter in 0..cfg.k_iter {
        let (first, sem_loss) = sem.train(&mut f, &mut h_cent, &y_z, cfg, iter)?;
        let h = gcn_apply(&f, &a_hat, &x)?;
        y_h = assign_by_similarity(h.view(), h_cent.view())?;
        log.push(PhaseRecord {
            iter,
            phase: Phase::Semantic,
            first_loss: first,
            loss: sem_loss,
            matching_rate: matching_rate(&y_h, &y_z),
        });

        let (first, str_loss) = train_structural(&mut g, &mut z_cent, eig, &y_h, cfg, &mut str_opt, iter)?;
        let z = eigenmlp_apply(&g, eig)?;
        y_z = assign_by_similarity(z.view(), z_cent.view())?;
        let rate = matching_rate(&y_h, &y_z);
        log.push(PhaseRecord {
            iter,
            phase: Phase::Structural,
            first_loss: first,
            loss: str_loss,
            matching_rate: rate,
        });
        history.push(rate);

        let score = sem_loss + str_loss;
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((
                score,
                iter,
                f.clone(),
                g.clone(),
                h_cent.clone(),
                z_cent.clone(),
                y_h.clone(),
                y_z.clone(),
            ));
        }
    }

    let (_, selected_iter, f, g, mut h_cent, mut z_cent, y_h, y_z) = best.expect("k_iter >= 1");
    rescale_to_members(&mut h_cent, &gcn_apply(&f, &a_hat, &x)?, &y_h);
    rescale_to_members(&mut z_cent, &eigenmlp_apply(&g, eig)?, &y_z);
    Ok((
        CondensationState {
            h_cent,
            z_cent,
            y_h,
            y_z,
            matching_rate_history: history,
            log,
            selected_iter,
        },
        f,
        g,
    ))
}

/// Semantic branch alone: the GCN is trained against its own cluster
/// labels, refreshed after every iteration. There is no structural state,
/// so `z_cent` is empty and `y_z` mirrors `y_h`.
pub fn semantic_only(
    mut f: GcnParams,
    graph: &SparseGraph,
    cfg: &CondenseConfig,
) -> Result<(CondensationState, GcnParams)> {
    cfg.validate()?;
    let k = cfg.n_prime;
    let a_hat = normalize(graph, NormKind::GcnAdjacency);
    let x = graph.features_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = gcn_apply(&f, &a_hat, &x)?;
    let (mut h_cent, mut y_h) = init_centroids(&h, k, rng.random())?;
    let mut sem = Semantic {
        a_hat: &a_hat,
        x: &x,
        opt: Adam::new(cfg.lr_sem),
    };
    let mut log = Vec::with_capacity(cfg.k_iter);
    let mut best: Option<(f64, usize, GcnParams, Array2<f64>, Vec<usize>)> = None;
    for iter in 0..cfg.k_iter {
        let labels = y_h.clone();
        let (first, loss) = sem.train(&mut f, &mut h_cent, &labels, cfg, iter)?;
        let h = gcn_apply(&f, &a_hat, &x)?;
        y_h = assign_by_similarity(h.view(), h_cent.view())?;
        log.push(PhaseRecord {
            iter,
            phase: Phase::Semantic,
            first_loss: first,
            loss,
            matching_rate: matching_rate(&y_h, &labels),
        });
        if best.as_ref().is_none_or(|b| loss < b.0) {
            best = Some((loss, iter, f.clone(), h_cent.clone(), y_h.clone()));
        }
    }
    let (_, selected_iter, f, mut h_cent, y_h) = best.expect("k_iter >= 1");
    rescale_to_members(&mut h_cent, &gcn_apply(&f, &a_hat, &x)?, &y_h);
    Ok((
        CondensationState {
            z_cent: Array2::zeros((0, h_cent.ncols())),
            h_cent,
            y_z: y_h.clone(),
            y_h,
            matching_rate_history: Vec::new(),
            log,
            selected_iter,
        },
        f,
    ))
}
