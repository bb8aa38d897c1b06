use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{auc, nmi};
use crate::autodiff::{Adam, Tape};
use crate::condense::kmeans;
use crate::error::{Error, Result};
use crate::graph::{Edge, LinkSplit, SplitPart};
use crate::linalg::{argmax_rows, glorot, row_normalized};

/// Adam learning rate of the prediction heads.
pub const HEAD_LR: f64 = 0.01;

/// Labelled nodes for a few-shot classification run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotSplit {
    pub shots: usize,
    /// `shots` nodes per class, grouped by class.
    pub train_ids: Vec<usize>,
    /// Every other labelled node, ascending.
    pub test_ids: Vec<usize>,
}

impl FewShotSplit {
    pub fn sample(labels: &[usize], num_classes: usize, shots: usize, seed: u64) -> Result<Self> {
        let mut by_class = vec![Vec::new(); num_classes];
        for (i, &c) in labels.iter().enumerate() {
            if c >= num_classes {
                return Err(Error::InvalidValue(format!("label {c} with {num_classes} classes")));
            }
            by_class[c].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train_ids = Vec::with_capacity(shots * num_classes);
        let mut is_train = vec![false; labels.len()];
        for (class, members) in by_class.iter_mut().enumerate() {
            if members.len() < shots {
                return Err(Error::InsufficientLabels {
                    class,
                    available: members.len(),
                    required: shots,
                });
            }
            members.shuffle(&mut rng);
            for &i in &members[..shots] {
                train_ids.push(i);
                is_train[i] = true;
            }
        }
        let test_ids = (0..labels.len()).filter(|&i| !is_train[i]).collect();
        Ok(Self {
            shots,
            train_ids,
            test_ids,
        })
    }
}

/// Linear softmax head on L2-normalized embeddings, trained with
/// cross-entropy on a sampled few-shot split. Returns test accuracy.
pub fn eval_nc_fewshot(
    emb: &Array2<f64>,
    labels: &[usize],
    num_classes: usize,
    shots: usize,
    head_epochs: usize,
    seed: u64,
) -> Result<f64> {
    if emb.nrows() != labels.len() {
        return Err(Error::shape("embedding rows vs labels", labels.len(), emb.nrows()));
    }
    let split = FewShotSplit::sample(labels, num_classes, shots, seed)?;
    if split.test_ids.is_empty() {
        return Err(Error::InvalidConfig("few-shot split leaves no test nodes".into()));
    }
    let emb = row_normalized(emb.view());
    let train_x = emb.select(Axis(0), &split.train_ids);
    let mut onehot = Array2::<f64>::zeros((split.train_ids.len(), num_classes));
    for (r, &i) in split.train_ids.iter().enumerate() {
        onehot[[r, labels[i]]] = 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0c1a55);
    let mut w = glorot(emb.ncols(), num_classes, &mut rng);
    let mut b = Array2::<f64>::zeros((1, num_classes));
    let mut opt = Adam::new(HEAD_LR);
    let scale = -1.0 / split.train_ids.len() as f64;
    for _ in 0..head_epochs {
        let tape = Tape::new();
        let wv = tape.leaf(w.clone());
        let bv = tape.leaf(b.clone());
        let logp = tape.leaf(train_x.clone()).matmul(wv)?.add_row(bv)?.log_softmax_rows()?;
        let loss = logp.mul(tape.leaf(onehot.clone()))?.sum()?.scale(scale)?;
        let grads = tape.backward(loss)?;
        let (gw, gb) = (grads.get(wv), grads.get(bv));
        opt.step(&mut [&mut w, &mut b], &[gw, gb]);
    }
    let test_x = emb.select(Axis(0), &split.test_ids);
    let predicted = argmax_rows((test_x.dot(&w) + &b).view());
    let correct = predicted
        .iter()
        .zip(&split.test_ids)
        .filter(|(&p, &i)| p == labels[i])
        .count();
    Ok(correct as f64 / split.test_ids.len() as f64)
}

fn hadamard_rows(emb: &Array2<f64>, pairs: &[Edge]) -> Array2<f64> {
    let mut out = Array2::zeros((pairs.len(), emb.ncols()));
    for (mut row, &(u, v)) in out.rows_mut().into_iter().zip(pairs) {
        row.assign(&(&emb.row(u) * &emb.row(v)));
    }
    out
}

fn pair_scores(emb: &Array2<f64>, pairs: &[Edge], w: &Array2<f64>, b: f64) -> Vec<f64> {
    hadamard_rows(emb, pairs).dot(w).iter().map(|s| s + b).collect()
}

/// Logistic link head on the Hadamard product of L2-normalized endpoint
/// embeddings. Trains on the split's training links against freshly
/// sampled non-edges each epoch, keeps the epoch with the best validation
/// AUC and reports test AUC. Test pairs are read once, after training.
pub fn eval_lp(emb: &Array2<f64>, split: &LinkSplit, head_epochs: usize, seed: u64) -> Result<f64> {
    if emb.nrows() != split.num_nodes() {
        return Err(Error::shape(
            "embedding rows vs split nodes",
            split.num_nodes(),
            emb.nrows(),
        ));
    }
    let emb = row_normalized(emb.view());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = split.part(SplitPart::Train).0.to_vec();
    let pos_x = hadamard_rows(&emb, &positives);
    let (val_pos, val_neg) = {
        let (p, n) = split.part(SplitPart::Val);
        (p.to_vec(), n.to_vec())
    };

    let mut w = glorot(emb.ncols(), 1, &mut rng);
    let mut b = Array2::<f64>::zeros((1, 1));
    let val_auc = |w: &Array2<f64>, b: &Array2<f64>| {
        auc(
            &pair_scores(&emb, &val_pos, w, b[[0, 0]]),
            &pair_scores(&emb, &val_neg, w, b[[0, 0]]),
        )
    };
    let mut best = (val_auc(&w, &b), w.clone(), b.clone());
    let mut opt = Adam::new(HEAD_LR);
    let denom = 1.0 / (2 * positives.len()) as f64;
    for _ in 0..head_epochs {
        let negatives = split.sample_negatives(positives.len(), &mut rng);
        let tape = Tape::new();
        let wv = tape.leaf(w.clone());
        let bv = tape.leaf(b.clone());
        let pos = tape.leaf(pos_x.clone()).matmul(wv)?.add_row(bv)?;
        let neg = tape.leaf(hadamard_rows(&emb, &negatives)).matmul(wv)?.add_row(bv)?;
        let loss = pos
            .neg()?
            .softplus()?
            .sum()?
            .add(neg.softplus()?.sum()?)?
            .scale(denom)?;
        let grads = tape.backward(loss)?;
        let (gw, gb) = (grads.get(wv), grads.get(bv));
        opt.step(&mut [&mut w, &mut b], &[gw, gb]);
        let score = val_auc(&w, &b);
        if score > best.0 {
            best = (score, w.clone(), b.clone());
        }
    }
    let (_, w, b) = best;
    let (test_pos, test_neg) = split.part(SplitPart::Test);
    Ok(auc(
        &pair_scores(&emb, test_pos, &w, b[[0, 0]]),
        &pair_scores(&emb, test_neg, &w, b[[0, 0]]),
    ))
}

/// NMI between k-means clusters of the embeddings and the labels.
pub fn eval_clustering(emb: &Array2<f64>, labels: &[usize], k: usize, seed: u64) -> Result<f64> {
    if emb.nrows() != labels.len() {
        return Err(Error::shape("embedding rows vs labels", labels.len(), emb.nrows()));
    }
    let clusters = kmeans(emb.view(), k, seed)?;
    Ok(nmi(&clusters.labels, labels))
}
