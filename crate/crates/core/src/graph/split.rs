use std::collections::HashSet;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparseGraph;
use crate::error::{Error, Result};

pub const TRAIN_LINKS: usize = 100;
pub const VAL_FRACTION: f64 = 0.05;
pub const TEST_FRACTION: f64 = 0.15;
pub const MIN_SPLIT_EDGES: usize = 200;

pub type Edge = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

/// Link-prediction split. Positive and negative pairs are only reachable
/// through accessors that log which part was read, so the evaluation code
/// can be audited for leakage.
#[derive(Debug)]
pub struct LinkSplit {
    train: Vec<Edge>,
    val: Vec<Edge>,
    test: Vec<Edge>,
    train_neg: Vec<Edge>,
    val_neg: Vec<Edge>,
    test_neg: Vec<Edge>,
    /// Graph with validation and test edges removed.
    pub message_graph: SparseGraph,
    all_edges: HashSet<Edge>,
    n: usize,
    access_log: Mutex<Vec<SplitPart>>,
}

impl LinkSplit {
    fn log(&self, part: SplitPart) {
        self.access_log.lock().expect("log lock").push(part);
    }

    /// Positive and negative pairs of one part.
    pub fn part(&self, part: SplitPart) -> (&[Edge], &[Edge]) {
        self.log(part);
        match part {
            SplitPart::Train => (&self.train, &self.train_neg),
            SplitPart::Val => (&self.val, &self.val_neg),
            SplitPart::Test => (&self.test, &self.test_neg),
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Whether `(u, v)` is an edge of the full original graph.
    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.all_edges.contains(&ordered(u, v))
    }

    /// Samples `count` distinct non-edges of the full graph.
    pub fn sample_negatives(&self, count: usize, rng: &mut impl Rng) -> Vec<Edge> {
        sample_non_edges(self.n, &self.all_edges, count, &HashSet::new(), rng)
    }

    pub fn access_log(&self) -> Vec<SplitPart> {
        self.access_log.lock().expect("log lock").clone()
    }
}

fn ordered(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn sample_non_edges(
    n: usize,
    edges: &HashSet<Edge>,
    count: usize,
    exclude: &HashSet<Edge>,
    rng: &mut impl Rng,
) -> Vec<Edge> {
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let e = ordered(u, v);
        if edges.contains(&e) || exclude.contains(&e) || !chosen.insert(e) {
            continue;
        }
        out.push(e);
    }
    out
}

/// Splits edges into 100 training links, 5% validation and 15% test, with
/// one sampled non-edge per positive.
pub fn split_links(graph: &SparseGraph, seed: u64) -> Result<LinkSplit> {
    let mut edges: Vec<(usize, usize, f64)> = graph.edges();
    let m = edges.len();
    let n_val = (VAL_FRACTION * m as f64).round() as usize;
    let n_test = (TEST_FRACTION * m as f64).round() as usize;
    let required = (TRAIN_LINKS + n_val + n_test).max(MIN_SPLIT_EDGES);
    if m < required {
        return Err(Error::InsufficientEdges { available: m, required });
    }
    let n = graph.n();
    let non_edge_capacity = n * (n - 1) / 2 - m;
    if non_edge_capacity < TRAIN_LINKS + n_val + n_test {
        return Err(Error::InsufficientEdges { available: m, required });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);
    let test: Vec<Edge> = edges[..n_test].iter().map(|&(u, v, _)| (u, v)).collect();
    let val: Vec<Edge> = edges[n_test..n_test + n_val].iter().map(|&(u, v, _)| (u, v)).collect();
    let remaining = &edges[n_test + n_val..];
    let train: Vec<Edge> = remaining[..TRAIN_LINKS].iter().map(|&(u, v, _)| (u, v)).collect();
    let message_graph = graph.with_edges(remaining)?;

    let all_edges: HashSet<Edge> = graph.edges().iter().map(|&(u, v, _)| (u, v)).collect();
    let mut used = HashSet::new();
    let mut take = |count: usize, rng: &mut ChaCha8Rng| {
        let s = sample_non_edges(n, &all_edges, count, &used, rng);
        used.extend(s.iter().copied());
        s
    };
    let train_neg = take(train.len(), &mut rng);
    let val_neg = take(val.len(), &mut rng);
    let test_neg = take(test.len(), &mut rng);

    Ok(LinkSplit {
        train,
        val,
        test,
        train_neg,
        val_neg,
        test_neg,
        message_graph,
        all_edges,
        n,
        access_log: Mutex::new(Vec::new()),
    })
}
