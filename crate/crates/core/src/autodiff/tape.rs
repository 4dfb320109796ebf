//! Define-by-run reverse-mode tape over dense matrices.
//!
//! Every op evaluates eagerly and records its inputs, so node ids are
//! topologically ordered by construction. `backward` walks the nodes in
//! reverse once and accumulates adjoints.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// Elementwise add; the right operand may be a 1×cols row broadcast over rows.
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Tanh(Var),
    /// Per-row standardization; caches 1/std per row.
    Standardize(Var, Vec<f64>),
    /// `x * scale + shift`, both 1×cols rows broadcast over rows.
    ScaleShift(Var, Var, Var),
    LogSoftmax(Var),
    /// Mean negative log-likelihood of log-probabilities at the given labels.
    NllMean(Var, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Var>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`; zeros when the root does not depend on `v`.
    pub fn wrt(&self, v: Var) -> Matrix {
        match &self.adjoints[v.0] {
            Some(m) => m.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn next_id(&self) -> usize {
        self.nodes.len()
    }

    fn shape_err(&self, op: &'static str, detail: String) -> Error {
        Error::Shape {
            node: self.next_id(),
            op,
            detail,
        }
    }

    /// Constant input (no gradient reported).
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        let v = self.push(Op::Leaf, value);
        self.params.push(v);
        v
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(self.shape_err(
                "matmul",
                format!("{:?} x {:?}", av.shape(), bv.shape()),
            ));
        }
        let out = av.matmul(bv);
        Ok(self.push(Op::MatMul(a, b), out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = if av.shape() == bv.shape() {
            let mut out = av.clone();
            out.add_assign(bv);
            out
        } else if bv.rows() == 1 && bv.cols() == av.cols() {
            let mut out = av.clone();
            let row = bv.row(0).to_vec();
            for r in 0..out.rows() {
                for (o, b) in out.row_mut(r).iter_mut().zip(&row) {
                    *o += b;
                }
            }
            out
        } else {
            return Err(self.shape_err("add", format!("{:?} + {:?}", av.shape(), bv.shape())));
        };
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(self.shape_err("mul", format!("{:?} * {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = Matrix::new(av.rows(), av.cols(), data)?;
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    /// Standardize each row to mean 0, variance 1 over its columns.
    pub fn standardize(&mut self, a: Var, eps: f64) -> Var {
        let av = self.value(a);
        let n = av.cols() as f64;
        let mut out = av.clone();
        let mut inv_std = Vec::with_capacity(av.rows());
        for r in 0..av.rows() {
            let row = out.row_mut(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * is;
            }
            inv_std.push(is);
        }
        self.push(Op::Standardize(a, inv_std), out)
    }

    pub fn scale_shift(&mut self, a: Var, scale: Var, shift: Var) -> Result<Var> {
        let (av, sv, hv) = (self.value(a), self.value(scale), self.value(shift));
        let c = av.cols();
        if sv.shape() != (1, c) || hv.shape() != (1, c) {
            return Err(self.shape_err(
                "scale_shift",
                format!(
                    "input {:?}, scale {:?}, shift {:?}",
                    av.shape(),
                    sv.shape(),
                    hv.shape()
                ),
            ));
        }
        let mut out = av.clone();
        let (s, h) = (sv.row(0).to_vec(), hv.row(0).to_vec());
        for r in 0..out.rows() {
            for ((o, sc), sh) in out.row_mut(r).iter_mut().zip(&s).zip(&h) {
                *o = *o * sc + sh;
            }
        }
        Ok(self.push(Op::ScaleShift(a, scale, shift), out))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        self.push(Op::LogSoftmax(a), out)
    }

    pub fn nll_mean(&mut self, logp: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logp);
        if lv.rows() != labels.len() {
            return Err(self.shape_err(
                "nll_mean",
                format!("{} rows vs {} labels", lv.rows(), labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= lv.cols()) {
            return Err(self.shape_err(
                "nll_mean",
                format!("label {bad} out of range for {} classes", lv.cols()),
            ));
        }
        let n = labels.len().max(1) as f64;
        let total: f64 = labels.iter().enumerate().map(|(i, &y)| -lv.get(i, y)).sum();
        let out = Matrix::scalar(total / n);
        Ok(self.push(Op::NllMean(logp, labels.to_vec()), out))
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(Error::NonScalarRoot {
                node: root.0,
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[root.0] = Some(Matrix::scalar(1.0));

        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            // leaf adjoints stay in place for the caller
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    let bshape = self.value(*b).shape();
                    let gb = if bshape == g.shape() {
                        g.clone()
                    } else {
                        let mut sum = vec![0.0; g.cols()];
                        for r in 0..g.rows() {
                            for (s, v) in sum.iter_mut().zip(g.row(r)) {
                                *s += v;
                            }
                        }
                        Matrix::row_vector(sum)
                    };
                    accumulate(&mut adj, *a, g);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = zip_with(&g, bv, |x, y| x * y);
                    let gb = zip_with(&g, av, |x, y| x * y);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Relu(a) => {
                    let ga = zip_with(&g, self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    accumulate(&mut adj, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = zip_with(&g, &node.value, |gv, y| gv * (1.0 - y * y));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Standardize(a, inv_std) => {
                    let y = &node.value;
                    let n = y.cols() as f64;
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (gr, yr) = (g.row(r), y.row(r));
                        let mean_g = gr.iter().sum::<f64>() / n;
                        let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, gv), yv) in ga.row_mut(r).iter_mut().zip(gr).zip(yr) {
                            *o = inv_std[r] * (gv - mean_g - yv * mean_gy);
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::ScaleShift(a, scale, shift) => {
                    let (av, sv) = (self.value(*a), self.value(*scale));
                    let c = av.cols();
                    let mut ga = Matrix::zeros(av.rows(), c);
                    let mut gs = vec![0.0; c];
                    let mut gh = vec![0.0; c];
                    for r in 0..av.rows() {
                        let (gr, xr) = (g.row(r), av.row(r));
                        for j in 0..c {
                            ga.set(r, j, gr[j] * sv.get(0, j));
                            gs[j] += gr[j] * xr[j];
                            gh[j] += gr[j];
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *scale, Matrix::row_vector(gs));
                    accumulate(&mut adj, *shift, Matrix::row_vector(gh));
                }
                Op::LogSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let gsum: f64 = g.row(r).iter().sum();
                        for ((o, gv), lp) in ga.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = gv - lp.exp() * gsum;
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                }
                Op::NllMean(a, labels) => {
                    let (r, c) = self.value(*a).shape();
                    let scale = g.get(0, 0) / labels.len().max(1) as f64;
                    let mut ga = Matrix::zeros(r, c);
                    for (i, &y) in labels.iter().enumerate() {
                        ga.set(i, y, -scale);
                    }
                    accumulate(&mut adj, *a, ga);
                }
            }
        }

        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn zip_with(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::new(a.rows(), a.cols(), data).expect("same shape")
}

fn accumulate(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_value_and_grad() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        assert_eq!(t.value(y).get(0, 0), 9.0);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).get(0, 0), 6.0);
    }

    #[test]
    fn product_of_two() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(2.0));
        let y = t.param(Matrix::scalar(5.0));
        let z = t.mul(x, y).unwrap();
        assert_eq!(t.value(z).get(0, 0), 10.0);
        let g = t.backward(z).unwrap();
        assert_eq!(g.wrt(x).get(0, 0), 5.0);
        assert_eq!(g.wrt(y).get(0, 0), 2.0);
    }

    #[test]
    fn softmax_cross_entropy_uniform() {
        let mut t = Tape::new();
        let logits = t.param(Matrix::row_vector(vec![0.0, 0.0]));
        let lp = t.log_softmax(logits);
        let loss = t.nll_mean(lp, &[0]).unwrap();
        assert!((t.value(loss).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        let g = t.backward(loss).unwrap().wrt(logits);
        assert!((g.get(0, 0) + 0.5).abs() < 1e-15);
        assert!((g.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::new();
        let x = t.param(Matrix::row_vector(vec![1.0, 2.0]));
        let y = t.tanh(x);
        assert!(matches!(t.backward(y), Err(Error::NonScalarRoot { .. })));
    }

    #[test]
    fn matmul_mismatch_names_node() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.param(Matrix::zeros(2, 3));
        match t.matmul(a, b) {
            Err(Error::Shape { node, op, .. }) => {
                assert_eq!(node, 2);
                assert_eq!(op, "matmul");
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn unused_param_gets_zero_grad() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(1.0));
        let unused = t.param(Matrix::zeros(2, 2));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(unused), Matrix::zeros(2, 2));
    }
}
