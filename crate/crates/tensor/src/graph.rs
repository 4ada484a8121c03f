use std::cell::{Ref, RefCell};

use crate::error::{Result, TensorError};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T: Scalar> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Scale(Var, T),
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    Transpose(Var),
    Sum(Var),
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Tape of recorded operations.
///
/// Nodes are appended in evaluation order, so the tape is always a valid
/// topological order and [`Graph::backward`] is a single reverse sweep.
/// A graph belongs to one thread; build one per forward pass.
pub struct Graph<T: Scalar = f64> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients<T: Scalar = f64> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` when `v` does not depend on any parameter or does not reach
    /// the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

/// `c[r, m] += a[r, k] * b[k, m]`
fn matmul_into<T: Scalar>(a: &[T], b: &[T], c: &mut [T], r: usize, k: usize, m: usize) {
    for i in 0..r {
        let ci = &mut c[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let bp = &b[p * m..(p + 1) * m];
            for (cv, &bv) in ci.iter_mut().zip(bp) {
                *cv = *cv + av * bv;
            }
        }
    }
}

fn softmax_rows<T: Scalar>(x: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (xr, yr) in x.chunks(d).zip(out.chunks_mut(d)) {
        let max = xr.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for (y, &v) in yr.iter_mut().zip(xr) {
            *y = (v - max).exp();
            total = total + *y;
        }
        for y in yr.iter_mut() {
            *y = *y / total;
        }
    }
    out
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// Trainable leaf; receives a gradient in [`Graph::backward`].
    pub fn param(&self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Untracked leaf.
    pub fn constant(&self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> Tensor<T> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn value_ref(&self, v: Var) -> Ref<'_, Tensor<T>> {
        Ref::map(self.nodes.borrow(), |nodes| &nodes[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// `a @ b` where `a` is `[.., n, k]` and `b` is `[k, m]`; leading axes of
    /// `a` are treated as extra rows.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let (value, tracked) = {
            let nodes = self.nodes.borrow();
            let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
            if av.rank() < 2 || bv.rank() != 2 || av.last_dim() != bv.shape()[0] {
                return Err(mismatch("matmul", av.shape(), bv.shape()));
            }
            let (r, k, m) = (av.rows(), bv.shape()[0], bv.shape()[1]);
            let mut out = vec![T::zero(); r * m];
            matmul_into(av.data(), bv.data(), &mut out, r, k, m);
            let mut shape = av.shape().to_vec();
            *shape.last_mut().unwrap() = m;
            (
                Tensor::from_parts(shape, out),
                nodes[a.0].requires_grad || nodes[b.0].requires_grad,
            )
        };
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    /// `a + b` where the shape of `b` equals a suffix of the shape of `a`;
    /// `b` is broadcast over the leading axes of `a`.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
            if bv.rank() > av.rank() || !av.shape().ends_with(bv.shape()) {
                return Err(mismatch("add", av.shape(), bv.shape()));
            }
            let bd = bv.data();
            let data = av
                .data()
                .chunks(bd.len())
                .flat_map(|chunk| chunk.iter().zip(bd).map(|(&x, &y)| x + y))
                .collect();
            Tensor::from_parts(av.shape().to_vec(), data)
        };
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
            if av.shape() != bv.shape() {
                return Err(mismatch("mul", av.shape(), bv.shape()));
            }
            let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x * y).collect();
            Tensor::from_parts(av.shape().to_vec(), data)
        };
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn relu(&self, x: Var) -> Var {
        let value = self.nodes.borrow()[x.0].value.map(|v| v.max(T::zero()));
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Relu(x), tracked)
    }

    /// Softmax over the last axis.
    pub fn softmax(&self, x: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let xv = &nodes[x.0].value;
            Tensor::from_parts(xv.shape().to_vec(), softmax_rows(xv.data(), xv.last_dim()))
        };
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Softmax(x), tracked)
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&self, x: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let xv = &nodes[x.0].value;
            let d = xv.last_dim();
            let mut out = Vec::with_capacity(xv.numel());
            for row in xv.data().chunks(d) {
                let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                let lse = row.iter().fold(T::zero(), |s, &v| s + (v - max).exp()).ln() + max;
                out.extend(row.iter().map(|&v| v - lse));
            }
            Tensor::from_parts(xv.shape().to_vec(), out)
        };
        let tracked = self.tracked(&[x]);
        self.push(value, Op::LogSoftmax(x), tracked)
    }

    /// Layer normalization over the last axis with population variance:
    /// `gain * (x - mean) / sqrt(var + eps) + bias`.
    pub fn layer_norm(&self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let (value, xhat, inv_std) = {
            let nodes = self.nodes.borrow();
            let (xv, gv, bv) = (&nodes[x.0].value, &nodes[gain.0].value, &nodes[bias.0].value);
            let d = xv.last_dim();
            if gv.shape() != [d] {
                return Err(mismatch("layer_norm", xv.shape(), gv.shape()));
            }
            if bv.shape() != [d] {
                return Err(mismatch("layer_norm", xv.shape(), bv.shape()));
            }
            let n = T::from_f64(d as f64);
            let mut out = Vec::with_capacity(xv.numel());
            let mut xhat = Vec::with_capacity(xv.numel());
            let mut inv_std = Vec::with_capacity(xv.rows());
            for row in xv.data().chunks(d) {
                let mean = row.iter().fold(T::zero(), |s, &v| s + v) / n;
                let var = row
                    .iter()
                    .fold(T::zero(), |s, &v| s + (v - mean) * (v - mean))
                    / n;
                let is = T::one() / (var + eps).sqrt();
                inv_std.push(is);
                for (j, &v) in row.iter().enumerate() {
                    let h = (v - mean) * is;
                    xhat.push(h);
                    out.push(gv.data()[j] * h + bv.data()[j]);
                }
            }
            (Tensor::from_parts(xv.shape().to_vec(), out), xhat, inv_std)
        };
        let tracked = self.tracked(&[x, gain, bias]);
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            tracked,
        ))
    }

    /// Gathers rows of a `[vocab, dim]` table: output is `[ids.len(), dim]`.
    pub fn embedding(&self, table: Var, ids: &[usize]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let tv = &nodes[table.0].value;
            if tv.rank() != 2 {
                return Err(TensorError::InvalidShape {
                    shape: tv.shape().to_vec(),
                    reason: "embedding table must be rank 2".into(),
                });
            }
            if ids.is_empty() {
                return Err(TensorError::InvalidArgument {
                    op: "embedding",
                    reason: "no ids".into(),
                });
            }
            let (vocab, dim) = (tv.shape()[0], tv.shape()[1]);
            let mut out = Vec::with_capacity(ids.len() * dim);
            for &id in ids {
                if id >= vocab {
                    return Err(TensorError::IndexOutOfRange {
                        op: "embedding",
                        index: id,
                        extent: vocab,
                    });
                }
                out.extend_from_slice(tv.row(id));
            }
            Tensor::from_parts(vec![ids.len(), dim], out)
        };
        let tracked = self.tracked(&[table]);
        Ok(self.push(
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            tracked,
        ))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&self, inputs: &[Var], axis: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let first = match inputs.first() {
                Some(v) => &nodes[v.0].value,
                None => {
                    return Err(TensorError::InvalidArgument {
                        op: "concat",
                        reason: "no inputs".into(),
                    })
                }
            };
            if axis >= first.rank() {
                return Err(TensorError::InvalidArgument {
                    op: "concat",
                    reason: format!("axis {axis} for rank {}", first.rank()),
                });
            }
            let mut shape = first.shape().to_vec();
            shape[axis] = 0;
            for v in inputs {
                let s = nodes[v.0].value.shape();
                let compatible = s.len() == shape.len()
                    && s.iter()
                        .zip(first.shape())
                        .enumerate()
                        .all(|(i, (a, b))| i == axis || a == b);
                if !compatible {
                    return Err(mismatch("concat", first.shape(), s));
                }
                shape[axis] += s[axis];
            }
            let (outer, inner) = split_axis(&shape, axis);
            let mut out = Vec::with_capacity(shape.iter().product());
            for o in 0..outer {
                for v in inputs {
                    let t = &nodes[v.0].value;
                    let block = t.shape()[axis] * inner;
                    out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
                }
            }
            Tensor::from_parts(shape, out)
        };
        let tracked = self.tracked(inputs);
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            tracked,
        ))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let xv = &nodes[x.0].value;
            if axis >= xv.rank() || len == 0 || start + len > xv.shape()[axis] {
                return Err(TensorError::InvalidArgument {
                    op: "slice",
                    reason: format!(
                        "range {start}..{} on axis {axis} of shape {:?}",
                        start + len,
                        xv.shape()
                    ),
                });
            }
            let (outer, inner) = split_axis(xv.shape(), axis);
            let width = xv.shape()[axis];
            let mut out = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = o * width * inner + start * inner;
                out.extend_from_slice(&xv.data()[base..base + len * inner]);
            }
            let mut shape = xv.shape().to_vec();
            shape[axis] = len;
            Tensor::from_parts(shape, out)
        };
        let tracked = self.tracked(&[x]);
        Ok(self.push(value, Op::Slice { x, axis, start }, tracked))
    }

    pub fn scale(&self, x: Var, c: T) -> Var {
        let value = self.nodes.borrow()[x.0].value.map(|v| v * c);
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Scale(x, c), tracked)
    }

    /// Inverted dropout. In training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`;
    /// otherwise (or with `rate == 0`) `x` itself is returned.
    pub fn dropout(&self, x: Var, rate: f64, train: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidArgument {
                op: "dropout",
                reason: format!("rate {rate} not in [0, 1)"),
            });
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let (value, mask) = {
            let nodes = self.nodes.borrow();
            let xv = &nodes[x.0].value;
            let mask: Vec<T> = (0..xv.numel())
                .map(|_| if rng.bernoulli(rate) { T::zero() } else { keep })
                .collect();
            let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
            (Tensor::from_parts(xv.shape().to_vec(), data), mask)
        };
        let tracked = self.tracked(&[x]);
        Ok(self.push(value, Op::Dropout { x, mask }, tracked))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self, x: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let xv = &nodes[x.0].value;
            if xv.rank() < 2 {
                return Err(TensorError::InvalidShape {
                    shape: xv.shape().to_vec(),
                    reason: "transpose needs rank >= 2".into(),
                });
            }
            let mut shape = xv.shape().to_vec();
            let r = shape.len();
            let (a, b) = (shape[r - 2], shape[r - 1]);
            shape.swap(r - 2, r - 1);
            Tensor::from_parts(shape, transpose_blocks(xv.data(), a, b))
        };
        let tracked = self.tracked(&[x]);
        Ok(self.push(value, Op::Transpose(x), tracked))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self, x: Var) -> Var {
        let value = Tensor::scalar(self.nodes.borrow()[x.0].value.sum());
        let tracked = self.tracked(&[x]);
        self.push(value, Op::Sum(x), tracked)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.0].value;
        if lv.numel() != 1 {
            return Err(TensorError::NotScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        if nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::from_parts(lv.shape().to_vec(), vec![T::one()]));
        }

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gout) = grads[i].take() else {
                continue;
            };
            let mut send = |v: Var, g: Tensor<T>| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            };
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(gout);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let (r, k, m) = (av.rows(), bv.shape()[0], bv.shape()[1]);
                    if nodes[a.0].requires_grad {
                        let bt = transpose_blocks(bv.data(), k, m);
                        let mut da = vec![T::zero(); r * k];
                        matmul_into(gout.data(), &bt, &mut da, r, m, k);
                        send(*a, Tensor::from_parts(av.shape().to_vec(), da));
                    }
                    if nodes[b.0].requires_grad {
                        let at = transpose_blocks(av.data(), r, k);
                        let mut db = vec![T::zero(); k * m];
                        matmul_into(&at, gout.data(), &mut db, k, r, m);
                        send(*b, Tensor::from_parts(bv.shape().to_vec(), db));
                    }
                }
                Op::Add(a, b) => {
                    let bshape = val(*b).shape().to_vec();
                    if nodes[b.0].requires_grad {
                        let blen = bshape.iter().product();
                        let mut db = vec![T::zero(); blen];
                        for chunk in gout.data().chunks(blen) {
                            for (d, &g) in db.iter_mut().zip(chunk) {
                                *d = *d + g;
                            }
                        }
                        send(*b, Tensor::from_parts(bshape, db));
                    }
                    send(*a, gout);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let da = gout.data().iter().zip(bv.data()).map(|(&g, &y)| g * y).collect();
                    let db = gout.data().iter().zip(av.data()).map(|(&g, &x)| g * x).collect();
                    send(*a, Tensor::from_parts(av.shape().to_vec(), da));
                    send(*b, Tensor::from_parts(bv.shape().to_vec(), db));
                }
                Op::Relu(x) => {
                    let xv = val(*x);
                    let dx = gout
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                        .collect();
                    send(*x, Tensor::from_parts(xv.shape().to_vec(), dx));
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let d = y.last_dim();
                    let mut dx = Vec::with_capacity(y.numel());
                    for (yr, gr) in y.data().chunks(d).zip(gout.data().chunks(d)) {
                        let dot = yr.iter().zip(gr).fold(T::zero(), |s, (&a, &b)| s + a * b);
                        dx.extend(yr.iter().zip(gr).map(|(&yv, &gv)| yv * (gv - dot)));
                    }
                    send(*x, Tensor::from_parts(y.shape().to_vec(), dx));
                }
                Op::LogSoftmax(x) => {
                    let y = &node.value;
                    let d = y.last_dim();
                    let mut dx = Vec::with_capacity(y.numel());
                    for (yr, gr) in y.data().chunks(d).zip(gout.data().chunks(d)) {
                        let total = gr.iter().fold(T::zero(), |s, &g| s + g);
                        dx.extend(yr.iter().zip(gr).map(|(&yv, &gv)| gv - yv.exp() * total));
                    }
                    send(*x, Tensor::from_parts(y.shape().to_vec(), dx));
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gv = val(*gain);
                    let d = gv.numel();
                    let n = T::from_f64(d as f64);
                    let mut dgain = vec![T::zero(); d];
                    let mut dbias = vec![T::zero(); d];
                    let mut dx = Vec::with_capacity(gout.numel());
                    for (r, (gr, hr)) in gout.data().chunks(d).zip(xhat.chunks(d)).enumerate() {
                        let mut sum_dh = T::zero();
                        let mut sum_dh_h = T::zero();
                        for j in 0..d {
                            dgain[j] = dgain[j] + gr[j] * hr[j];
                            dbias[j] = dbias[j] + gr[j];
                            let dh = gr[j] * gv.data()[j];
                            sum_dh = sum_dh + dh;
                            sum_dh_h = sum_dh_h + dh * hr[j];
                        }
                        let is = inv_std[r];
                        for j in 0..d {
                            let dh = gr[j] * gv.data()[j];
                            dx.push(is / n * (n * dh - sum_dh - hr[j] * sum_dh_h));
                        }
                    }
                    send(*x, Tensor::from_parts(gout.shape().to_vec(), dx));
                    send(*gain, Tensor::from_parts(vec![d], dgain));
                    send(*bias, Tensor::from_parts(vec![d], dbias));
                }
                Op::Embedding { table, ids } => {
                    if nodes[table.0].requires_grad {
                        let tv = val(*table);
                        let dim = tv.shape()[1];
                        let mut dt = vec![T::zero(); tv.numel()];
                        for (&id, gr) in ids.iter().zip(gout.data().chunks(dim)) {
                            for (d, &g) in dt[id * dim..(id + 1) * dim].iter_mut().zip(gr) {
                                *d = *d + g;
                            }
                        }
                        send(*table, Tensor::from_parts(tv.shape().to_vec(), dt));
                    }
                }
                Op::Concat { inputs, axis } => {
                    let (outer, inner) = split_axis(gout.shape(), *axis);
                    let total = gout.shape()[*axis] * inner;
                    let mut offset = 0;
                    for v in inputs {
                        let t = val(*v);
                        let block = t.shape()[*axis] * inner;
                        if nodes[v.0].requires_grad {
                            let mut d = Vec::with_capacity(t.numel());
                            for o in 0..outer {
                                let base = o * total + offset;
                                d.extend_from_slice(&gout.data()[base..base + block]);
                            }
                            send(*v, Tensor::from_parts(t.shape().to_vec(), d));
                        }
                        offset += block;
                    }
                }
                Op::Slice { x, axis, start } => {
                    let xv = val(*x);
                    let (outer, inner) = split_axis(xv.shape(), *axis);
                    let width = xv.shape()[*axis];
                    let len = gout.shape()[*axis];
                    let mut dx = vec![T::zero(); xv.numel()];
                    for o in 0..outer {
                        let base = o * width * inner + start * inner;
                        let src = &gout.data()[o * len * inner..(o + 1) * len * inner];
                        dx[base..base + len * inner].copy_from_slice(src);
                    }
                    send(*x, Tensor::from_parts(xv.shape().to_vec(), dx));
                }
                Op::Scale(x, c) => {
                    send(*x, gout.map(|g| g * *c));
                }
                Op::Dropout { x, mask } => {
                    let dx = gout.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
                    send(*x, Tensor::from_parts(gout.shape().to_vec(), dx));
                }
                Op::Transpose(x) => {
                    let s = gout.shape();
                    let r = s.len();
                    let dx = transpose_blocks(gout.data(), s[r - 2], s[r - 1]);
                    send(*x, Tensor::from_parts(val(*x).shape().to_vec(), dx));
                }
                Op::Sum(x) => {
                    let g = gout.data()[0];
                    let xv = val(*x);
                    send(*x, Tensor::from_parts(xv.shape().to_vec(), vec![g; xv.numel()]));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Transposes each trailing `[a, b]` block of `data`.
fn transpose_blocks<T: Scalar>(data: &[T], a: usize, b: usize) -> Vec<T> {
    let mut out = vec![T::zero(); data.len()];
    for (src, dst) in data.chunks(a * b).zip(out.chunks_mut(a * b)) {
        for i in 0..a {
            for j in 0..b {
                dst[j * a + i] = src[i * b + j];
            }
        }
    }
    out
}
