//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Graph`] records every operation in evaluation order. Shapes are fixed
//! by the model builders, so a shape mismatch inside the graph is a bug and
//! panics.

use super::{GradStore, Matrix, ParamStore};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    AddCol(Var, Var),
    Sigmoid(Var),
    Relu(Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Transpose(Var),
    SoftmaxRows(Var),
    SumRows(Var),
    MeanRows(Var),
    MeanCols(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph { params, nodes: Vec::with_capacity(128) }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Input)
    }

    /// Parameter by name; panics if the store lacks it.
    pub fn param(&mut self, name: &str) -> Var {
        let idx = self.params.index_of(name).unwrap_or_else(|| panic!("missing parameter `{name}`"));
        self.push(self.params.value(idx).clone(), Op::Param(idx))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    /// Adds the 1×n row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((1, av.cols()), bv.shape(), "add_row shape");
        let mut v = av.clone();
        let n = av.cols();
        for (i, x) in v.data_mut().iter_mut().enumerate() {
            *x += bv.data()[i % n];
        }
        self.push(v, Op::AddRow(a, b))
    }

    /// Adds the r×1 column `c` to every column of `a`.
    pub fn add_col(&mut self, a: Var, c: Var) -> Var {
        let (av, cv) = (self.value(a), self.value(c));
        assert_eq!((av.rows(), 1), cv.shape(), "add_col shape");
        let mut v = av.clone();
        let n = av.cols();
        for (i, x) in v.data_mut().iter_mut().enumerate() {
            *x += cv.data()[i / n];
        }
        self.push(v, Op::AddCol(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| x * k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows(), rows, "concat_cols rows");
            for r in 0..rows {
                for c in 0..pv.cols() {
                    v.set(r, off + c, pv.get(r, c));
                }
            }
            off += pv.cols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols(), cols, "concat_rows cols");
            data.extend_from_slice(pv.data());
        }
        let rows = data.len() / cols.max(1);
        let v = Matrix::new(rows, cols, data).expect("concat_rows");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        assert!(start + len <= av.cols(), "slice_cols range");
        let mut v = Matrix::zeros(av.rows(), len);
        for r in 0..av.rows() {
            for c in 0..len {
                v.set(r, c, av.get(r, start + c));
            }
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        assert!(start + len <= av.rows(), "slice_rows range");
        let data = av.data()[start * av.cols()..(start + len) * av.cols()].to_vec();
        let v = Matrix::new(len, av.cols(), data).expect("slice_rows");
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = av.clone();
        let n = av.cols();
        for row in v.data_mut().chunks_mut(n) {
            let m = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            for x in row.iter_mut() {
                *x /= s;
            }
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Column sums, 1×n.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_rows();
        self.push(v, Op::SumRows(a))
    }

    /// Column means, 1×n.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = av.sum_rows();
        v.scale_assign(1.0 / av.rows() as f64);
        self.push(v, Op::MeanRows(a))
    }

    /// Row means, r×1.
    pub fn mean_cols(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = av.sum_cols();
        v.scale_assign(1.0 / av.cols() as f64);
        self.push(v, Op::MeanCols(a))
    }

    /// Gradients of `sum(seed ⊙ out)` with respect to every parameter.
    pub fn backward(&self, out: Var, seed: &Matrix) -> GradStore {
        let mut grads = GradStore::zeros_like(self.params);
        self.backward_into(out, seed, &mut grads);
        grads
    }

    /// As [`Graph::backward`], accumulating into `grads`.
    pub fn backward_into(&self, out: Var, seed: &Matrix, grads: &mut GradStore) {
        assert_eq!(seed.shape(), self.shape(out), "seed shape");
        let mut adj: Vec<Option<Matrix>> = vec![None; out.0 + 1];
        adj[out.0] = Some(seed.clone());
        for i in (0..=out.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => grads.value_mut(*p).add_assign(&g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose());
                    let gb = self.value(*a).transpose().matmul(&g);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *b, g.map(|x| -x));
                    accumulate(&mut adj, *a, g);
                }
                Op::AddRow(a, b) => {
                    accumulate(&mut adj, *b, g.sum_rows());
                    accumulate(&mut adj, *a, g);
                }
                Op::AddCol(a, c) => {
                    accumulate(&mut adj, *c, g.sum_cols());
                    accumulate(&mut adj, *a, g);
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, |gy, y| gy * y * (1.0 - y));
                    accumulate(&mut adj, *a, d);
                }
                Op::Relu(a) => {
                    let d = g.zip_map(&node.value, |gy, y| if y > 0.0 { gy } else { 0.0 });
                    accumulate(&mut adj, *a, d);
                }
                Op::Scale(a, k) => accumulate(&mut adj, *a, g.map(|x| x * k)),
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let mut d = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                d.set(r, c, g.get(r, off + c));
                            }
                        }
                        off += cols;
                        accumulate(&mut adj, p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let data = g.data()[off * cols..(off + rows) * cols].to_vec();
                        off += rows;
                        accumulate(&mut adj, p, Matrix::new(rows, cols, data).expect("concat_rows grad"));
                    }
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        for c in 0..g.cols() {
                            d.set(r, start + c, g.get(r, c));
                        }
                    }
                    accumulate(&mut adj, *a, d);
                }
                Op::SliceRows(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Matrix::zeros(rows, cols);
                    d.data_mut()[start * cols..(start + g.rows()) * cols].copy_from_slice(g.data());
                    accumulate(&mut adj, *a, d);
                }
                Op::Transpose(a) => accumulate(&mut adj, *a, g.transpose()),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let n = y.cols();
                    let mut d = Matrix::zeros(y.rows(), n);
                    for r in 0..y.rows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for c in 0..n {
                            d.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut adj, *a, d);
                }
                Op::SumRows(a) | Op::MeanRows(a) => {
                    let rows = self.shape(*a).0;
                    let k = if matches!(node.op, Op::MeanRows(_)) { 1.0 / rows as f64 } else { 1.0 };
                    let mut data = Vec::with_capacity(rows * g.cols());
                    for _ in 0..rows {
                        data.extend(g.data().iter().map(|x| x * k));
                    }
                    accumulate(&mut adj, *a, Matrix::new(rows, g.cols(), data).expect("sum_rows grad"));
                }
                Op::MeanCols(a) => {
                    let (rows, cols) = self.shape(*a);
                    let k = 1.0 / cols as f64;
                    let mut d = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            d.set(r, c, g.get(r, 0) * k);
                        }
                    }
                    accumulate(&mut adj, *a, d);
                }
            }
        }
    }
}

fn accumulate(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut adj[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
