//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as a node appended in evaluation
//! order, so the node list is already topologically sorted. [`Graph::backward`]
//! walks it in exact reverse order and collects gradients for parameter
//! leaves.
//!
//! ```
//! use rolemix_tensor::{Graph, ParamStore, Tensor};
//!
//! let mut store = ParamStore::<f64>::new();
//! let w = store.add("w", Tensor::from_f64([3], &[1.0, -2.0, 0.5]).unwrap()).unwrap();
//! let mut g = Graph::new();
//! let x = g.constant(Tensor::from_f64([3], &[4.0, 5.0, 6.0]).unwrap());
//! let wn = g.param(&store, w);
//! let prod = g.mul(wn, x).unwrap();
//! let loss = g.sum_all(prod);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[4.0, 5.0, 6.0]);
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::TensorError;
use crate::ops::{self, broadcastable, elu_scalar};
use crate::params::{ParamId, ParamStore};
use crate::sparse::SparseRows;
use crate::tensor::{axis_split, Scalar, Tensor};

type Result<T> = std::result::Result<T, TensorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    BatchMatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Elu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Abs(NodeId),
    Softmax(NodeId, usize),
    LogSoftmax(NodeId, usize),
    SumAxis(NodeId, usize),
    SumAll(NodeId),
    Concat(Vec<NodeId>, usize),
    Slice {
        input: NodeId,
        axis: usize,
        start: usize,
    },
    Reshape(NodeId),
    Gather(NodeId, Vec<usize>),
    Mse(NodeId, NodeId),
}

enum Value<'p, S> {
    Owned(Tensor<S>),
    Borrowed(&'p Tensor<S>),
}

impl<S> Value<'_, S> {
    fn get(&self) -> &Tensor<S> {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

struct Node<'p, S> {
    value: Value<'p, S>,
    op: Op,
    requires_grad: bool,
    /// Sparse form of a constant (or a row slice of one).
    sparse: Option<Arc<SparseRows<S>>>,
}

/// Gradients of a scalar loss with respect to the parameters it reached.
#[derive(Clone, Debug, Default)]
pub struct Gradients<S> {
    by_param: BTreeMap<ParamId, Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    /// `None` means the parameter was not reached, i.e. its gradient is zero.
    pub fn get(&self, id: ParamId) -> Option<&Tensor<S>> {
        self.by_param.get(&id)
    }

    /// Gradient for `id`, materialising zeros for unreached parameters.
    pub fn get_or_zeros(&self, id: ParamId, store: &ParamStore<S>) -> Tensor<S> {
        self.by_param
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.value(id).shape().to_vec()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<S>)> {
        self.by_param.iter().map(|(k, v)| (*k, v))
    }
}

/// A single forward/backward computation. Parameters are borrowed from their
/// store for the lifetime `'p`, so binding them costs no copy.
pub struct Graph<'p, S> {
    nodes: Vec<Node<'p, S>>,
}

impl<S: Scalar> Default for Graph<'_, S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        self.nodes[id.0].value.get()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.value(id).shape()
    }

    fn push(&mut self, value: Tensor<S>, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
            sparse: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Constant, false)
    }

    /// A constant that borrows its payload, e.g. a frozen target-network weight.
    pub fn constant_ref(&mut self, value: &'p Tensor<S>) -> NodeId {
        self.nodes.push(Node {
            value: Value::Borrowed(value),
            op: Op::Constant,
            requires_grad: false,
            sparse: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A constant matrix stored both densely and as sparse rows. Row slices
    /// keep the sparse form, and matrix products with it on the left run in
    /// time proportional to its non-zeros.
    pub fn sparse_constant(&mut self, rows: SparseRows<S>) -> NodeId {
        let id = self.push(rows.to_dense(), Op::Constant, false);
        self.nodes[id.0].sparse = Some(Arc::new(rows));
        id
    }

    /// A trainable leaf bound to `store[id]`.
    pub fn param(&mut self, store: &'p ParamStore<S>, id: ParamId) -> NodeId {
        self.nodes.push(Node {
            value: Value::Borrowed(store.value(id)),
            op: Op::Param(id),
            requires_grad: true,
            sparse: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = match &self.nodes[a.0].sparse {
            Some(sp) if self.value(b).rank() == 2 && self.value(b).shape()[0] == sp.cols() => sp.matmul(self.value(b)),
            _ => ops::matmul(self.value(a), self.value(b))?,
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    pub fn batch_matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::batch_matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::BatchMatMul(a, b), rg))
    }

    /// Elementwise sum; `b` may be repeated over leading batch axes of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::add(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::sub(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::mul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let f = S::of(factor);
        let v = self.value(a).map(|x| x * f);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, factor), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = ops::relu(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let v = ops::elu(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::Elu(a), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = ops::sigmoid(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = ops::tanh(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::Tanh(a), rg)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = ops::abs(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::Abs(a), rg)
    }

    pub fn softmax(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let v = ops::softmax(self.value(a), axis)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Softmax(a, axis), rg))
    }

    pub fn log_softmax(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let v = ops::log_softmax(self.value(a), axis)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::LogSoftmax(a, axis), rg))
    }

    pub fn sum_axis(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let v = ops::sum_axis(self.value(a), axis)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::SumAxis(a, axis), rg))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(v, Op::SumAll(a), rg)
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        let tensors: Vec<&Tensor<S>> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ops::concat(&tensors, axis)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(v, Op::Concat(parts.to_vec(), axis), rg))
    }

    pub fn slice(&mut self, a: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        let v = ops::slice(self.value(a), axis, start, len)?;
        let rg = self.rg(a);
        let sparse = match &self.nodes[a.0].sparse {
            Some(sp) if axis == 0 => Some(Arc::new(sp.slice_rows(start, len))),
            _ => None,
        };
        let id = self.push(
            v,
            Op::Slice {
                input: a,
                axis,
                start,
            },
            rg,
        );
        self.nodes[id.0].sparse = sparse;
        Ok(id)
    }

    pub fn reshape(&mut self, a: NodeId, shape: impl Into<Vec<usize>>) -> Result<NodeId> {
        let v = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Reshape(a), rg))
    }

    /// Row-wise pick: `out[r] = a[r, index[r]]` for a `[rows, cols]` input.
    pub fn gather(&mut self, a: NodeId, index: Vec<usize>) -> Result<NodeId> {
        let v = ops::gather(self.value(a), &index)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Gather(a, index), rg))
    }

    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::mse(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mse(a, b), rg))
    }

    /// Reverse pass from a one-element `loss` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        let loss_shape = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(loss_shape.to_vec()));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(loss_shape.to_vec(), S::one()));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let y = node.value.get();
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => match out.by_param.get_mut(id) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        out.by_param.insert(*id, g);
                    }
                },
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = (av.shape()[0], av.shape()[1]);
                    let n = bv.shape()[1];
                    if self.rg(*a) {
                        // dA = G @ B^T
                        let mut da = Tensor::zeros([m, k]);
                        S::gemm(
                            m,
                            n,
                            k,
                            S::one(),
                            g.data(),
                            n as isize,
                            1,
                            bv.data(),
                            1,
                            n as isize,
                            S::zero(),
                            da.data_mut(),
                            k as isize,
                            1,
                        );
                        accumulate(&mut grads, *a, da);
                    }
                    if let (true, Some(sp)) = (self.rg(*b), &self.nodes[a.0].sparse) {
                        accumulate(&mut grads, *b, sp.t_matmul(&g));
                    } else if self.rg(*b) {
                        // dB = A^T @ G
                        let mut db = Tensor::zeros([k, n]);
                        S::gemm(
                            k,
                            m,
                            n,
                            S::one(),
                            av.data(),
                            1,
                            k as isize,
                            g.data(),
                            n as isize,
                            1,
                            S::zero(),
                            db.data_mut(),
                            n as isize,
                            1,
                        );
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::BatchMatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (bs, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                    let n = bv.shape()[2];
                    if self.rg(*a) {
                        let mut da = Tensor::zeros([bs, m, k]);
                        for i in 0..bs {
                            S::gemm(
                                m,
                                n,
                                k,
                                S::one(),
                                &g.data()[i * m * n..],
                                n as isize,
                                1,
                                &bv.data()[i * k * n..],
                                1,
                                n as isize,
                                S::zero(),
                                &mut da.data_mut()[i * m * k..],
                                k as isize,
                                1,
                            );
                        }
                        accumulate(&mut grads, *a, da);
                    }
                    if self.rg(*b) {
                        let mut db = Tensor::zeros([bs, k, n]);
                        for i in 0..bs {
                            S::gemm(
                                k,
                                m,
                                n,
                                S::one(),
                                &av.data()[i * m * k..],
                                1,
                                k as isize,
                                &g.data()[i * m * n..],
                                n as isize,
                                1,
                                S::zero(),
                                &mut db.data_mut()[i * k * n..],
                                n as isize,
                                1,
                            );
                        }
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*b) {
                        let db = reduce_to(&g, self.shape(*b));
                        accumulate(&mut grads, *b, db);
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.rg(*b) {
                        let db = reduce_to(&g, self.shape(*b)).map(|x| -x);
                        accumulate(&mut grads, *b, db);
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let da = ops::mul(&g, bv)?;
                        accumulate(&mut grads, *a, da);
                    }
                    if self.rg(*b) {
                        let prod = zip_same(&g, av, |x, y| x * y)?;
                        let db = reduce_to(&prod, bv.shape());
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Scale(a, f) => {
                    let f = S::of(*f);
                    accumulate(&mut grads, *a, g.map(|x| x * f));
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let d = zip_same(&g, x, |gv, xv| if xv > S::zero() { gv } else { S::zero() })?;
                    accumulate(&mut grads, *a, d);
                }
                Op::Elu(a) => {
                    let x = self.value(*a);
                    let d = zip_same(&g, x, |gv, xv| {
                        if xv > S::zero() {
                            gv
                        } else {
                            gv * (elu_scalar(xv) + S::one())
                        }
                    })?;
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = zip_same(&g, y, |gv, yv| gv * yv * (S::one() - yv))?;
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = zip_same(&g, y, |gv, yv| gv * (S::one() - yv * yv))?;
                    accumulate(&mut grads, *a, d);
                }
                Op::Abs(a) => {
                    let x = self.value(*a);
                    let d = zip_same(&g, x, |gv, xv| {
                        if xv > S::zero() {
                            gv
                        } else if xv < S::zero() {
                            -gv
                        } else {
                            S::zero()
                        }
                    })?;
                    accumulate(&mut grads, *a, d);
                }
                Op::Softmax(a, axis) => {
                    // dx = y * (g - sum(g * y))
                    let (outer, n, inner) = axis_split(y.shape(), *axis);
                    let mut d = Tensor::zeros(y.shape().to_vec());
                    let (yd, gd, dd) = (y.data(), g.data(), d.data_mut());
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |j: usize| (o * n + j) * inner + i;
                            let dot: S = (0..n).map(|j| gd[at(j)] * yd[at(j)]).sum();
                            for j in 0..n {
                                dd[at(j)] = yd[at(j)] * (gd[at(j)] - dot);
                            }
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::LogSoftmax(a, axis) => {
                    // dx = g - softmax * sum(g)
                    let (outer, n, inner) = axis_split(y.shape(), *axis);
                    let mut d = Tensor::zeros(y.shape().to_vec());
                    let (yd, gd, dd) = (y.data(), g.data(), d.data_mut());
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |j: usize| (o * n + j) * inner + i;
                            let total: S = (0..n).map(|j| gd[at(j)]).sum();
                            for j in 0..n {
                                dd[at(j)] = gd[at(j)] - yd[at(j)].exp() * total;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::SumAxis(a, axis) => {
                    let in_shape = self.shape(*a).to_vec();
                    let (outer, n, inner) = axis_split(&in_shape, *axis);
                    let mut d = Tensor::zeros(in_shape);
                    let (gd, dd) = (g.data(), d.data_mut());
                    for o in 0..outer {
                        for j in 0..n {
                            let base = (o * n + j) * inner;
                            dd[base..base + inner].copy_from_slice(&gd[o * inner..(o + 1) * inner]);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::SumAll(a) => {
                    let gv = g.data()[0];
                    let d = Tensor::full(self.shape(*a).to_vec(), gv);
                    accumulate(&mut grads, *a, d);
                }
                Op::Concat(parts, axis) => {
                    let mut start = 0;
                    for &p in parts {
                        let len = self.shape(p)[*axis];
                        if self.rg(p) {
                            let d = ops::slice(&g, *axis, start, len)?;
                            accumulate(&mut grads, p, d);
                        }
                        start += len;
                    }
                }
                Op::Slice { input, axis, start } => {
                    let in_shape = self.shape(*input).to_vec();
                    let (outer, n, inner) = axis_split(&in_shape, *axis);
                    let len = g.shape()[*axis];
                    let mut d = Tensor::zeros(in_shape);
                    for o in 0..outer {
                        let src = &g.data()[o * len * inner..(o + 1) * len * inner];
                        let base = (o * n + start) * inner;
                        d.data_mut()[base..base + len * inner].copy_from_slice(src);
                    }
                    accumulate(&mut grads, *input, d);
                }
                Op::Reshape(a) => {
                    let d = g.reshape(self.shape(*a).to_vec())?;
                    accumulate(&mut grads, *a, d);
                }
                Op::Gather(a, index) => {
                    let shape = self.shape(*a).to_vec();
                    let cols = shape[1];
                    let mut d = Tensor::zeros(shape);
                    for (r, &c) in index.iter().enumerate() {
                        d.data_mut()[r * cols + c] = g.data()[r];
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Mse(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let scale = S::of(2.0) * g.data()[0] / S::of(av.len().max(1) as f64);
                    let da = zip_same(av, bv, |x, yv| (x - yv) * scale)?;
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, da.map(|x| -x));
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, da);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], id: NodeId, g: Tensor<S>) {
    match &mut grads[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_same<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "backward",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Sums `g` over the leading axes that were broadcast to reach `target`.
fn reduce_to<S: Scalar>(g: &Tensor<S>, target: &[usize]) -> Tensor<S> {
    if g.shape() == target {
        return g.clone();
    }
    debug_assert!(broadcastable(g.shape(), target));
    let mut out = Tensor::zeros(target.to_vec());
    let width = out.len().max(1);
    for chunk in g.data().chunks(width) {
        for (o, &x) in out.data_mut().iter_mut().zip(chunk) {
            *o = *o + x;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_loss_gradient_is_input() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::from_f64([2], &[0.3, -0.7]).unwrap()).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_f64([2], &[2.0, 3.0]).unwrap());
        let wn = g.param(&store, w);
        let p = g.mul(wn, x).unwrap();
        let loss = g.sum_all(p);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[2.0, 3.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::zeros([3])).unwrap();
        let mut g = Graph::new();
        let _unused = g.param(&store, w);
        let c = g.constant(Tensor::scalar(4.0));
        let grads = g.backward(c).unwrap();
        assert!(grads.get(w).is_none());
        assert_eq!(grads.get_or_zeros(w, &store).data(), &[0.0; 3]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::<f64>::new();
        let c = g.constant(Tensor::zeros([2]));
        assert!(matches!(g.backward(c), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn reused_param_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::scalar(3.0)).unwrap();
        let mut g = Graph::new();
        let a = g.param(&store, w);
        let b = g.param(&store, w);
        let p = g.mul(a, b).unwrap();
        let grads = g.backward(p).unwrap();
        assert_eq!(grads.get(w).unwrap().item(), Some(6.0));
    }

    #[test]
    fn store_accumulates_until_zeroed() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::scalar(1.0)).unwrap();
        for _ in 0..2 {
            let grads = {
                let mut g = Graph::new();
                let a = g.param(&store, w);
                let l = g.scale(a, 2.0);
                g.backward(l).unwrap()
            };
            store.accumulate(&grads);
        }
        assert_eq!(store.grad(w).item(), Some(4.0));
        store.zero_grad();
        assert_eq!(store.grad(w).item(), Some(0.0));
    }
}
