//! Small dense helpers shared across modules.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Norm floor used by every cosine computation.
pub const COSINE_EPS: f64 = 1e-12;

/// Rows scaled to unit L2 norm; rows with norm below [`COSINE_EPS`] are
/// divided by the floor instead.
pub fn row_normalized(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt().max(COSINE_EPS);
        row.mapv_inplace(|v| v / norm);
    }
    out
}

/// Pairwise cosine similarities between the rows of `a` and `b`.
pub fn cosine_matrix(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    row_normalized(a).dot(&row_normalized(b).t())
}

/// Index of the maximum entry of each row; ties go to the lowest index.
pub fn argmax_rows(m: ArrayView2<'_, f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Glorot-uniform initialised weight matrix.
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit))
}

/// Orthonormalizes the columns in place with two passes of modified
/// Gram-Schmidt. Returns false if a column collapsed.
pub fn orthonormalize_columns(m: &mut Array2<f64>) -> bool {
    let cols = m.ncols();
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).to_owned();
                m.column_mut(j).scaled_add(-proj, &ci);
            }
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        if norm < 1e-300 {
            return false;
        }
        m.column_mut(j).mapv_inplace(|v| v / norm);
    }
    true
}

/// `‖I - MᵀM‖_F`.
pub fn orthogonality_residual(m: ArrayView2<'_, f64>) -> f64 {
    let gram = m.t().dot(&m);
    let mut acc = 0.0;
    for ((i, j), v) in gram.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        acc += (v - target).powi(2);
    }
    acc.sqrt()
}

/// Per-column population standard deviation.
pub fn column_std(m: ArrayView2<'_, f64>) -> Vec<f64> {
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    let rows = m.nrows() as f64;
    m.columns()
        .into_iter()
        .zip(mean.iter())
        .map(|(c, mu)| (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / rows).sqrt())
        .collect()
}

pub fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
