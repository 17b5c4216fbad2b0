use std::sync::Arc;

use super::linear::LinearOperator;
use super::tensor::{gemm, gemm_at, gemm_bt, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Complex value stored as two real nodes of identical shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComplexPair {
    pub re: Var,
    pub im: Var,
}

/// One summand of a jet activation: `coef * s_order(z0) * prod(z[blocks])`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTerm {
    pub coef: f64,
    pub order: usize,
    pub blocks: Vec<usize>,
}

/// Term tables mapping input jet components to output jet components through
/// a scalar nonlinearity (Faa di Bruno, precomputed by the caller).
#[derive(Clone, Debug)]
pub struct ActivationTerms {
    pub terms: Vec<Vec<ActivationTerm>>,
    pub max_order: usize,
}

impl ActivationTerms {
    pub fn components(&self) -> usize {
        self.terms.len()
    }
}

/// Leibniz tables for the product of two jets: output component `c` is
/// `sum coef * a[ia] * b[ib]` over `terms[c]`.
#[derive(Clone, Debug)]
pub struct ProductTerms {
    pub terms: Vec<Vec<(f64, usize, usize)>>,
}

impl ProductTerms {
    pub fn components(&self) -> usize {
        self.terms.len()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MulConst(Var, Arc<Tensor>),
    AddConst(Var),
    Unary(Var, Vec<f64>),
    MatMul(Var, Var),
    AddBias { a: Var, bias: Var, rows: (usize, usize) },
    SliceRows { a: Var, start: usize },
    SliceCols { a: Var, start: usize },
    ConcatRows(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    Index(Var, usize),
    ComplexAbs(Var, Var),
    JetActivation { z: Var, terms: Arc<ActivationTerms>, derivs: Vec<Vec<f64>> },
    JetMul { a: Var, b: Var, terms: Arc<ProductTerms> },
    Linear { op: Arc<dyn LinearOperator>, re: Var, im: Option<Var>, rows: usize },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Append-only reverse-mode tape.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`]. Only leaves keep their adjoint.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.adj.get(v.0).and_then(|a| a.as_ref())
    }

    /// Adjoint of `v`, or zeros of `shape` if `v` did not influence the root.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape()))
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

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Leaf that never receives an adjoint.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    fn same_len(&self, what: &str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(what, ta, tb));
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("add", a, b)?;
        let v = self.zip(a, b, |x, y| x + y);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(Op::Add(a, b), v, g))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("sub", a, b)?;
        let v = self.zip(a, b, |x, y| x - y);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(Op::Sub(a, b), v, g))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("mul", a, b)?;
        let v = self.zip(a, b, |x, y| x * y);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(Op::Mul(a, b), v, g))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        let g = self.grad_any(&[a]);
        self.push(Op::Scale(a, c), v, g)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// `a + c` for a scalar constant `c`.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        let g = self.grad_any(&[a]);
        self.push(Op::Offset(a), v, g)
    }

    fn broadcast_ok(&self, what: &str, a: Var, k: &Tensor) -> Result<()> {
        let ta = self.value(a);
        if k.len() == ta.len() || (k.len() == ta.cols() && ta.len() % k.len().max(1) == 0) {
            Ok(())
        } else {
            Err(shape_err(what, ta, k))
        }
    }

    /// Elementwise product with a constant of the same size, or with a row
    /// vector broadcast over rows.
    pub fn mul_const(&mut self, a: Var, k: Arc<Tensor>) -> Result<Var> {
        self.broadcast_ok("mul_const", a, &k)?;
        let ta = self.value(a);
        let n = k.len();
        let data = ta.data().iter().enumerate().map(|(i, &x)| x * k.data()[i % n]).collect();
        let v = Tensor::new(ta.shape().to_vec(), data)?;
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::MulConst(a, k), v, g))
    }

    /// `a + k` with the same broadcasting rule as [`Tape::mul_const`].
    pub fn add_const(&mut self, a: Var, k: &Tensor) -> Result<Var> {
        self.broadcast_ok("add_const", a, k)?;
        let ta = self.value(a);
        let n = k.len();
        let data = ta.data().iter().enumerate().map(|(i, &x)| x + k.data()[i % n]).collect();
        let v = Tensor::new(ta.shape().to_vec(), data)?;
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::AddConst(a), v, g))
    }

    /// Elementwise `f` with derivative `df`.
    pub fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Var {
        let ta = self.value(a);
        let v = ta.map(&f);
        let d: Vec<f64> = ta.data().iter().map(|&x| df(x)).collect();
        let g = self.grad_any(&[a]);
        self.push(Op::Unary(a, d), v, g)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, f64::sin, f64::cos)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, f64::cos, |x| -x.sin())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, crate::jetnet::activation::tanh, |x| {
            let t = crate::jetnet::activation::tanh(x);
            1.0 - t * t
        })
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, |x| 2.0 * x)
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        self.unary(a, |x| x.powi(n), |x| n as f64 * x.powi(n - 1))
    }

    /// `a @ b` for `a: [m, k]`, `b: [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        let (k2, n) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), tb.data(), &mut out, false);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(m, n, out), g))
    }

    /// Adds the row vector `bias` to rows `start..end` of `a`.
    pub fn add_bias_rows(&mut self, a: Var, bias: Var, start: usize, end: usize) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let w = ta.cols();
        if tb.len() != w || end > ta.rows() || start > end {
            return Err(shape_err("add_bias_rows", ta, tb));
        }
        let mut v = ta.clone();
        let bd = tb.data().to_vec();
        for row in v.data_mut()[start * w..end * w].chunks_mut(w) {
            for (x, b) in row.iter_mut().zip(&bd) {
                *x += b;
            }
        }
        let g = self.grad_any(&[a, bias]);
        Ok(self.push(Op::AddBias { a, bias, rows: (start, end) }, v, g))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let rows = self.value(a).rows();
        self.add_bias_rows(a, bias, 0, rows)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let w = ta.cols();
        if start > end || end > ta.rows() {
            return Err(Error::Shape(format!("slice_rows {start}..{end} of {:?}", ta.shape())));
        }
        let v = Tensor::matrix(end - start, w, ta.data()[start * w..end * w].to_vec());
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::SliceRows { a, start }, v, g))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let (r, w) = (ta.rows(), ta.cols());
        if start > end || end > w {
            return Err(Error::Shape(format!("slice_cols {start}..{end} of {:?}", ta.shape())));
        }
        let mut data = Vec::with_capacity(r * (end - start));
        for row in ta.data().chunks(w) {
            data.extend_from_slice(&row[start..end]);
        }
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::SliceCols { a, start }, Tensor::matrix(r, end - start, data), g))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat_rows of nothing".into()))?;
        let w = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != w {
                return Err(shape_err("concat_rows", self.value(*first), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let g = self.grad_any(parts);
        Ok(self.push(Op::ConcatRows(parts.to_vec()), Tensor::matrix(rows, w, data), g))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).clone().reshape(shape)?;
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::Reshape(a), v, g))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        let g = self.grad_any(&[a]);
        self.push(Op::Sum(a), v, g)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.is_empty() {
            return Err(Error::Shape("mean of empty tensor".into()));
        }
        let v = Tensor::scalar(ta.sum() / ta.len() as f64);
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::Mean(a), v, g))
    }

    /// Single element (flat index) as a scalar node.
    pub fn index(&mut self, a: Var, i: usize) -> Result<Var> {
        let ta = self.value(a);
        if i >= ta.len() {
            return Err(Error::Shape(format!("index {i} out of {:?}", ta.shape())));
        }
        let v = Tensor::scalar(ta.data()[i]);
        let g = self.grad_any(&[a]);
        Ok(self.push(Op::Index(a, i), v, g))
    }

    /// `|re + i im|` elementwise; the subgradient at zero is taken as zero.
    pub fn complex_abs(&mut self, z: ComplexPair) -> Result<Var> {
        self.same_len("complex_abs", z.re, z.im)?;
        let v = self.zip(z.re, z.im, f64::hypot);
        let g = self.grad_any(&[z.re, z.im]);
        Ok(self.push(Op::ComplexAbs(z.re, z.im), v, g))
    }

    /// `re^2 + im^2` elementwise.
    pub fn complex_abs2(&mut self, z: ComplexPair) -> Result<Var> {
        let a = self.mul(z.re, z.re)?;
        let b = self.mul(z.im, z.im)?;
        self.add(a, b)
    }

    pub fn complex_add(&mut self, a: ComplexPair, b: ComplexPair) -> Result<ComplexPair> {
        Ok(ComplexPair {
            re: self.add(a.re, b.re)?,
            im: self.add(a.im, b.im)?,
        })
    }

    /// `(cre + i cim) * z` with constant multipliers broadcast like
    /// [`Tape::mul_const`].
    pub fn complex_mul_const(&mut self, z: ComplexPair, cre: &Arc<Tensor>, cim: &Arc<Tensor>) -> Result<ComplexPair> {
        let rr = self.mul_const(z.re, cre.clone())?;
        let ii = self.mul_const(z.im, cim.clone())?;
        let ri = self.mul_const(z.re, cim.clone())?;
        let ir = self.mul_const(z.im, cre.clone())?;
        Ok(ComplexPair {
            re: self.sub(rr, ii)?,
            im: self.add(ri, ir)?,
        })
    }

    /// Pushes a jet through a scalar nonlinearity.
    ///
    /// `z` stacks the jet components as row blocks of `batch` rows each;
    /// `derivs[k]` holds the k-th derivative of the nonlinearity at the value
    /// component (length `batch * cols`) for `k = 0..=terms.max_order + 1`.
    pub fn jet_activation(&mut self, z: Var, terms: Arc<ActivationTerms>, batch: usize, derivs: Vec<Vec<f64>>) -> Result<Var> {
        let tz = self.value(z);
        let c = terms.components();
        let bw = batch * tz.cols();
        if tz.rows() != c * batch {
            return Err(Error::Shape(format!(
                "jet_activation: {} components of {batch} rows vs {:?}",
                c,
                tz.shape()
            )));
        }
        if derivs.len() < terms.max_order + 2 || derivs.iter().any(|d| d.len() != bw) {
            return Err(Error::Shape("jet_activation: derivative tables".into()));
        }
        let zd = tz.data();
        let mut out = vec![0.0; zd.len()];
        for (ci, comp_terms) in terms.terms.iter().enumerate() {
            let dst = &mut out[ci * bw..(ci + 1) * bw];
            for term in comp_terms {
                let s = &derivs[term.order];
                for e in 0..bw {
                    let mut p = term.coef * s[e];
                    for &b in &term.blocks {
                        p *= zd[b * bw + e];
                    }
                    dst[e] += p;
                }
            }
        }
        let v = Tensor::new(tz.shape().to_vec(), out)?;
        let g = self.grad_any(&[z]);
        Ok(self.push(Op::JetActivation { z, terms, derivs }, v, g))
    }

    /// Product of two stacked jets.
    pub fn jet_mul(&mut self, a: Var, b: Var, terms: Arc<ProductTerms>) -> Result<Var> {
        self.same_len("jet_mul", a, b)?;
        let ta = self.value(a);
        let c = terms.components();
        if ta.rows() % c != 0 {
            return Err(Error::Shape(format!("jet_mul: {c} components vs {:?}", ta.shape())));
        }
        let bw = ta.len() / c;
        let (ad, bd) = (ta.data(), self.value(b).data());
        let mut out = vec![0.0; ad.len()];
        for (ci, comp_terms) in terms.terms.iter().enumerate() {
            let dst = &mut out[ci * bw..(ci + 1) * bw];
            for &(coef, ia, ib) in comp_terms {
                let (sa, sb) = (&ad[ia * bw..(ia + 1) * bw], &bd[ib * bw..(ib + 1) * bw]);
                for e in 0..bw {
                    dst[e] += coef * sa[e] * sb[e];
                }
            }
        }
        let v = Tensor::new(ta.shape().to_vec(), out)?;
        let g = self.grad_any(&[a, b]);
        Ok(self.push(Op::JetMul { a, b, terms }, v, g))
    }

    fn linear_impl(&mut self, op: Arc<dyn LinearOperator>, re: Var, im: Option<Var>) -> Result<ComplexPair> {
        let tr = self.value(re);
        if tr.cols() != op.in_len() {
            return Err(Error::Shape(format!(
                "linear operator expects rows of {}, got {:?}",
                op.in_len(),
                tr.shape()
            )));
        }
        if let Some(im) = im {
            self.same_len("linear (re/im)", re, im)?;
        }
        let rows = tr.rows();
        if let Some(fixed) = op.fixed_rows() {
            if fixed != rows {
                return Err(Error::Shape(format!("linear operator expects {fixed} rows, got {rows}")));
            }
        }
        let m = op.out_len();
        let mut out = vec![0.0; 2 * rows * m];
        {
            let (o_re, o_im) = out.split_at_mut(rows * m);
            let im_data = im.map(|v| self.value(v).data());
            op.apply(rows, tr.data(), im_data, o_re, o_im);
        }
        let mut parents = vec![re];
        parents.extend(im);
        let g = self.grad_any(&parents);
        let node = self.push(Op::Linear { op, re, im, rows }, Tensor::matrix(2 * rows, m, out), g);
        Ok(ComplexPair {
            re: self.slice_rows(node, 0, rows)?,
            im: self.slice_rows(node, rows, 2 * rows)?,
        })
    }

    /// Applies a linear operator row-wise to a real input.
    pub fn linear(&mut self, op: Arc<dyn LinearOperator>, x: Var) -> Result<ComplexPair> {
        self.linear_impl(op, x, None)
    }

    /// Applies a linear operator row-wise to a complex input.
    pub fn linear_complex(&mut self, op: Arc<dyn LinearOperator>, z: ComplexPair) -> Result<ComplexPair> {
        self.linear_impl(op, z.re, Some(z.im))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rt = self.value(root);
        if rt.len() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                rt.shape()
            )));
        }
        let n = root.0 + 1;
        let mut adj: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        adj[root.0] = Some(Tensor::full(rt.shape(), 1.0));
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(node, &g, &mut adj);
        }
        Ok(Gradients { adj })
    }

    fn slot<'a>(&self, adj: &'a mut [Option<Tensor>], v: Var) -> Option<&'a mut [f64]> {
        let node = &self.nodes[v.0];
        if !node.needs_grad {
            return None;
        }
        let s = &mut adj[v.0];
        if s.is_none() {
            *s = Some(Tensor::zeros(node.value.shape()));
        }
        s.as_mut().map(|t| t.data_mut())
    }

    fn propagate(&self, node: &Node, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let gd = g.data();
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(s) = self.slot(adj, v) {
                        axpy(s, 1.0, gd);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(s) = self.slot(adj, *a) {
                    axpy(s, 1.0, gd);
                }
                if let Some(s) = self.slot(adj, *b) {
                    axpy(s, -1.0, gd);
                }
            }
            Op::Mul(a, b) => {
                if let Some(s) = self.slot(adj, *a) {
                    for ((x, &gi), &y) in s.iter_mut().zip(gd).zip(val(*b)) {
                        *x += gi * y;
                    }
                }
                if let Some(s) = self.slot(adj, *b) {
                    for ((x, &gi), &y) in s.iter_mut().zip(gd).zip(val(*a)) {
                        *x += gi * y;
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(s) = self.slot(adj, *a) {
                    axpy(s, *c, gd);
                }
            }
            Op::Offset(a) | Op::AddConst(a) | Op::Reshape(a) => {
                if let Some(s) = self.slot(adj, *a) {
                    axpy(s, 1.0, gd);
                }
            }
            Op::MulConst(a, k) => {
                if let Some(s) = self.slot(adj, *a) {
                    let kd = k.data();
                    let n = kd.len();
                    for (i, (x, &gi)) in s.iter_mut().zip(gd).enumerate() {
                        *x += gi * kd[i % n];
                    }
                }
            }
            Op::Unary(a, d) => {
                if let Some(s) = self.slot(adj, *a) {
                    for ((x, &gi), &di) in s.iter_mut().zip(gd).zip(d) {
                        *x += gi * di;
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if let Some(s) = self.slot(adj, *a) {
                    gemm_bt(m, n, k, gd, tb.data(), s, true);
                }
                if let Some(s) = self.slot(adj, *b) {
                    gemm_at(k, m, n, ta.data(), gd, s, true);
                }
            }
            Op::AddBias { a, bias, rows } => {
                if let Some(s) = self.slot(adj, *a) {
                    axpy(s, 1.0, gd);
                }
                if let Some(s) = self.slot(adj, *bias) {
                    let w = s.len();
                    for row in gd[rows.0 * w..rows.1 * w].chunks(w) {
                        axpy(s, 1.0, row);
                    }
                }
            }
            Op::SliceRows { a, start } => {
                let w = g.cols();
                if let Some(s) = self.slot(adj, *a) {
                    axpy(&mut s[start * w..start * w + gd.len()], 1.0, gd);
                }
            }
            Op::SliceCols { a, start } => {
                let wo = g.cols();
                let wi = self.nodes[a.0].value.cols();
                if let Some(s) = self.slot(adj, *a) {
                    for (r, grow) in gd.chunks(wo).enumerate() {
                        axpy(&mut s[r * wi + start..r * wi + start + wo], 1.0, grow);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    if let Some(s) = self.slot(adj, *p) {
                        axpy(s, 1.0, &gd[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::Sum(a) => {
                if let Some(s) = self.slot(adj, *a) {
                    s.iter_mut().for_each(|x| *x += gd[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(s) = self.slot(adj, *a) {
                    let c = gd[0] / s.len() as f64;
                    s.iter_mut().for_each(|x| *x += c);
                }
            }
            Op::Index(a, i) => {
                if let Some(s) = self.slot(adj, *a) {
                    s[*i] += gd[0];
                }
            }
            Op::ComplexAbs(re, im) => {
                let r = node.value.data();
                for (v, part) in [(*re, val(*re)), (*im, val(*im))] {
                    if let Some(s) = self.slot(adj, v) {
                        for e in 0..s.len() {
                            if r[e] > 0.0 {
                                s[e] += gd[e] * part[e] / r[e];
                            }
                        }
                    }
                }
            }
            Op::JetActivation { z, terms, derivs } => {
                let zd = val(*z);
                let bw = zd.len() / terms.components();
                if let Some(s) = self.slot(adj, *z) {
                    for (ci, comp_terms) in terms.terms.iter().enumerate() {
                        let gc = &gd[ci * bw..(ci + 1) * bw];
                        for term in comp_terms {
                            let (sk, sk1) = (&derivs[term.order], &derivs[term.order + 1]);
                            let bl = &term.blocks;
                            for e in 0..bw {
                                let ge = term.coef * gc[e];
                                let mut p = 1.0;
                                for &b in bl {
                                    p *= zd[b * bw + e];
                                }
                                s[e] += ge * sk1[e] * p;
                                for (i, &bi) in bl.iter().enumerate() {
                                    let mut q = ge * sk[e];
                                    for (j, &bj) in bl.iter().enumerate() {
                                        if j != i {
                                            q *= zd[bj * bw + e];
                                        }
                                    }
                                    s[bi * bw + e] += q;
                                }
                            }
                        }
                    }
                }
            }
            Op::JetMul { a, b, terms } => {
                let bw = gd.len() / terms.components();
                let (ad, bd) = (val(*a), val(*b));
                if let Some(s) = self.slot(adj, *a) {
                    for (ci, comp_terms) in terms.terms.iter().enumerate() {
                        for &(coef, ia, ib) in comp_terms {
                            for e in 0..bw {
                                s[ia * bw + e] += coef * gd[ci * bw + e] * bd[ib * bw + e];
                            }
                        }
                    }
                }
                if let Some(s) = self.slot(adj, *b) {
                    for (ci, comp_terms) in terms.terms.iter().enumerate() {
                        for &(coef, ia, ib) in comp_terms {
                            for e in 0..bw {
                                s[ib * bw + e] += coef * gd[ci * bw + e] * ad[ia * bw + e];
                            }
                        }
                    }
                }
            }
            Op::Linear { op, re, im, rows } => {
                let n = op.in_len();
                let (g_re, g_im) = gd.split_at(gd.len() / 2);
                let mut a_re = vec![0.0; rows * n];
                let mut a_im = vec![0.0; rows * n];
                op.apply_adjoint(*rows, g_re, g_im, &mut a_re, &mut a_im);
                if let Some(s) = self.slot(adj, *re) {
                    axpy(s, 1.0, &a_re);
                }
                if let Some(im) = im {
                    if let Some(s) = self.slot(adj, *im) {
                        axpy(s, 1.0, &a_im);
                    }
                }
            }
        }
    }
}

fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}
