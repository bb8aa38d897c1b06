use std::cell::{Ref, RefCell};
use std::sync::Arc;

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::linalg::COSINE_EPS;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Softplus(usize),
    Sin(usize),
    Cos(usize),
    Log(usize),
    Exp(usize),
    Transpose(usize),
    ConcatRows(Vec<usize>),
    RowL2Normalize(usize, Vec<f64>),
    Sum(usize),
    Mean(usize),
    RowSum(usize),
    Mse(usize, usize),
    SparseMatMul(Arc<CsrMatrix>, usize),
    Frobenius(usize),
    LogSoftmaxRows(usize),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Records every operation of one forward pass so that [`Tape::backward`]
/// can replay it in reverse. Build a fresh tape per optimisation step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a matrix-valued node on a [`Tape`]. Scalars are `1 × 1`.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients of a scalar root with respect to every node on the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the root does not depend on it.
    pub fn get(&self, var: Var<'_>) -> Array2<f64> {
        match &self.grads[var.id] {
            Some(g) => g.clone(),
            None => Array2::zeros(self.shapes[var.id]),
        }
    }

    pub fn take(&mut self, var: Var<'_>) -> Array2<f64> {
        self.grads[var.id]
            .take()
            .unwrap_or_else(|| Array2::zeros(self.shapes[var.id]))
    }
}

fn dims(a: &Array2<f64>) -> String {
    format!("{}x{}", a.nrows(), a.ncols())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds an input (parameter or constant). Its gradient is available after
    /// [`Tape::backward`].
    pub fn leaf(&self, value: Array2<f64>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op: Op::Leaf });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    fn push(&self, value: Array2<f64>, op: Op, name: &str) -> Result<Var<'_>> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow(name.to_string()));
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn value(&self, id: usize) -> Ref<'_, Array2<f64>> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Reverse-mode sweep from a scalar `root`, visiting nodes in exact
    /// reverse order of execution.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let (rows, cols) = nodes[root.id].value.dim();
        if (rows, cols) != (1, 1) {
            return Err(Error::InvalidRoot { rows, cols });
        }
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.dim()).collect();
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; nodes.len()];
        grads[root.id] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], id: usize, g: Array2<f64>) {
            match &mut grads[id] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, g.dot(&val(*b).t()));
                    acc(&mut grads, *b, val(*a).t().dot(&g));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, -g);
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, &g * val(*b));
                    acc(&mut grads, *b, &g * val(*a));
                }
                Op::AddRow(a, bias) => {
                    acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::Relu(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(val(*a), |gi, &x| {
                        if x <= 0.0 {
                            *gi = 0.0
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(&node.value, |gi, &s| *gi *= s * (1.0 - s));
                    acc(&mut grads, *a, ga);
                }
                Op::Softplus(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(val(*a), |gi, &x| *gi *= sigmoid(x));
                    acc(&mut grads, *a, ga);
                }
                Op::Sin(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(val(*a), |gi, &x| *gi *= x.cos());
                    acc(&mut grads, *a, ga);
                }
                Op::Cos(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(val(*a), |gi, &x| *gi *= -x.sin());
                    acc(&mut grads, *a, ga);
                }
                Op::Log(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(val(*a), |gi, &x| *gi /= x);
                    acc(&mut grads, *a, ga);
                }
                Op::Exp(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(&node.value, |gi, &e| *gi *= e);
                    acc(&mut grads, *a, ga);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.t().to_owned()),
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let r = shapes[p].0;
                        acc(&mut grads, p, g.slice(s![start..start + r, ..]).to_owned());
                        start += r;
                    }
                }
                Op::RowL2Normalize(a, norms) => {
                    let y = &node.value;
                    let mut ga = g;
                    for (i, mut row) in ga.rows_mut().into_iter().enumerate() {
                        let norm = norms[i];
                        if norm > COSINE_EPS {
                            let yg = row.dot(&y.row(i));
                            row.scaled_add(-yg, &y.row(i));
                        }
                        row.mapv_inplace(|v| v / norm.max(COSINE_EPS));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => acc(&mut grads, *a, Array2::from_elem(shapes[*a], g[[0, 0]])),
                Op::Mean(a) => {
                    let count = (shapes[*a].0 * shapes[*a].1) as f64;
                    acc(&mut grads, *a, Array2::from_elem(shapes[*a], g[[0, 0]] / count));
                }
                Op::RowSum(a) => {
                    let (r, c) = shapes[*a];
                    acc(&mut grads, *a, Array2::from_shape_fn((r, c), |(i, _)| g[[i, 0]]));
                }
                Op::Mse(a, b) => {
                    let count = (shapes[*a].0 * shapes[*a].1) as f64;
                    let diff = (val(*a) - val(*b)) * (2.0 * g[[0, 0]] / count);
                    acc(&mut grads, *b, -&diff);
                    acc(&mut grads, *a, diff);
                }
                Op::SparseMatMul(m, x) => {
                    acc(&mut grads, *x, m.transpose_matmul_dense(g.view())?);
                }
                Op::Frobenius(a) => {
                    let norm = node.value[[0, 0]];
                    if norm > 0.0 {
                        acc(&mut grads, *a, val(*a) * (g[[0, 0]] / norm));
                    }
                }
                Op::LogSoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = g;
                    for (i, mut row) in ga.rows_mut().into_iter().enumerate() {
                        let total = row.sum();
                        row.zip_mut_with(&y.row(i), |gi, &yi| *gi -= yi.exp() * total);
                    }
                    acc(&mut grads, *a, ga);
                }
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Array2<f64>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().dim()
    }

    /// Value of a `1 × 1` node.
    pub fn item(&self) -> f64 {
        self.value()[[0, 0]]
    }

    fn unary(self, name: &str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var<'t>> {
        let out = self.value().mapv(f);
        self.tape.push(out, op, name)
    }

    fn same_shape(self, other: Var<'t>, name: &str) -> Result<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(Error::shape(
                name,
                format!("{}x{}", a.0, a.1),
                format!("{}x{}", b.0, b.1),
            ));
        }
        Ok(())
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), other.value());
            if a.ncols() != b.nrows() {
                return Err(Error::shape("matmul", format!("{} rows", a.ncols()), dims(&b)));
            }
            a.dot(&*b)
        };
        self.tape.push(out, Op::MatMul(self.id, other.id), "matmul")
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(other, "add")?;
        let out = &*self.value() + &*other.value();
        self.tape.push(out, Op::Add(self.id, other.id), "add")
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(other, "sub")?;
        let out = &*self.value() - &*other.value();
        self.tape.push(out, Op::Sub(self.id, other.id), "sub")
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(other, "mul")?;
        let out = &*self.value() * &*other.value();
        self.tape.push(out, Op::Mul(self.id, other.id), "mul")
    }

    /// Adds a `1 × d` row to every row.
    pub fn add_row(self, bias: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), bias.value());
            if b.nrows() != 1 || b.ncols() != a.ncols() {
                return Err(Error::shape("add_row", format!("1x{}", a.ncols()), dims(&b)));
            }
            &*a + &*b
        };
        self.tape.push(out, Op::AddRow(self.id, bias.id), "add_row")
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.unary("scale", |x| x * c, Op::Scale(self.id, c))
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.scale(-1.0)
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.unary("relu", |x| x.max(0.0), Op::Relu(self.id))
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary("sigmoid", sigmoid, Op::Sigmoid(self.id))
    }

    /// `log(1 + e^x)`, computed stably.
    pub fn softplus(self) -> Result<Var<'t>> {
        self.unary("softplus", softplus, Op::Softplus(self.id))
    }

    pub fn sin(self) -> Result<Var<'t>> {
        self.unary("sin", f64::sin, Op::Sin(self.id))
    }

    pub fn cos(self) -> Result<Var<'t>> {
        self.unary("cos", f64::cos, Op::Cos(self.id))
    }

    pub fn log(self) -> Result<Var<'t>> {
        self.unary("log", f64::ln, Op::Log(self.id))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary("exp", f64::exp, Op::Exp(self.id))
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let out = self.value().t().to_owned();
        self.tape.push(out, Op::Transpose(self.id), "transpose")
    }

    /// Stacks the rows of all `parts` (same column count).
    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidValue("concat_rows of nothing".into()))?;
        let out = {
            let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let views: Vec<_> = values.iter().map(|v| v.view()).collect();
            ndarray::concatenate(Axis(0), &views).map_err(|e| Error::shape("concat_rows", "equal column counts", e))?
        };
        first
            .tape
            .push(out, Op::ConcatRows(parts.iter().map(|p| p.id).collect()), "concat_rows")
    }

    /// Each row divided by `max(‖row‖, 1e-12)`.
    pub fn row_l2_normalize(self) -> Result<Var<'t>> {
        let (out, norms) = {
            let a = self.value();
            let norms: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
            let mut out = a.to_owned();
            for (mut row, &n) in out.rows_mut().into_iter().zip(&norms) {
                row.mapv_inplace(|v| v / n.max(COSINE_EPS));
            }
            (out, norms)
        };
        self.tape
            .push(out, Op::RowL2Normalize(self.id, norms), "row_l2_normalize")
    }

    /// `a × b` matrix of cosine similarities between rows of `self` (a × d)
    /// and rows of `other` (b × d).
    pub fn cosine_similarity(self, other: Var<'t>) -> Result<Var<'t>> {
        if self.shape().1 != other.shape().1 {
            return Err(Error::shape(
                "cosine_similarity",
                format!("{} columns", self.shape().1),
                format!("{} columns", other.shape().1),
            ));
        }
        let p = self.row_l2_normalize()?;
        let q = if self.id == other.id {
            p
        } else {
            other.row_l2_normalize()?
        };
        p.matmul(q.transpose()?)
    }

    pub fn sum(self) -> Result<Var<'t>> {
        let out = Array2::from_elem((1, 1), self.value().sum());
        self.tape.push(out, Op::Sum(self.id), "sum")
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let v = {
            let a = self.value();
            if a.is_empty() {
                return Err(Error::InvalidValue("mean of empty tensor".into()));
            }
            a.sum() / a.len() as f64
        };
        self.tape.push(Array2::from_elem((1, 1), v), Op::Mean(self.id), "mean")
    }

    /// `n × 1` column of row sums.
    pub fn row_sum(self) -> Result<Var<'t>> {
        let out = self.value().sum_axis(Axis(1)).insert_axis(Axis(1));
        self.tape.push(out, Op::RowSum(self.id), "row_sum")
    }

    /// `mean((self - target)²)`.
    pub fn mse(self, target: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(target, "mse")?;
        let v = {
            let (a, b) = (self.value(), target.value());
            let diff = &*a - &*b;
            diff.mapv(|x| x * x).sum() / diff.len().max(1) as f64
        };
        self.tape
            .push(Array2::from_elem((1, 1), v), Op::Mse(self.id, target.id), "mse")
    }

    /// Frobenius norm as a `1 × 1` node.
    pub fn frobenius(self) -> Result<Var<'t>> {
        let v = self.value().iter().map(|x| x * x).sum::<f64>().sqrt();
        self.tape
            .push(Array2::from_elem((1, 1), v), Op::Frobenius(self.id), "frobenius")
    }

    /// Row-wise log-softmax.
    pub fn log_softmax_rows(self) -> Result<Var<'t>> {
        let mut out = self.value().to_owned();
        for mut row in out.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.mapv(|v| (v - max).exp()).sum().ln();
            row.mapv_inplace(|v| v - lse);
        }
        self.tape.push(out, Op::LogSoftmaxRows(self.id), "log_softmax_rows")
    }
}

/// `matrix · x` for a fixed sparse matrix.
pub fn sparse_matmul<'t>(matrix: &Arc<CsrMatrix>, x: Var<'t>) -> Result<Var<'t>> {
    let out = matrix.matmul_dense(x.value().view())?;
    x.tape
        .push(out, Op::SparseMatMul(Arc::clone(matrix), x.id), "sparse_matmul")
}
