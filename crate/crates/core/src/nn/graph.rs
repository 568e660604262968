//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an eager tape: each operation computes its value
//! immediately and records how it was produced. Because operations can only
//! consume already-existing nodes, tape order is a topological order, and
//! [`Graph::backward`] is a single reverse sweep with additive gradient
//! accumulation (a node feeding several consumers sums their contributions).
//!
//! Gradients are retained on leaf parameters only; intermediate gradients are
//! freed as soon as they have been propagated, which roughly halves peak
//! memory during training.

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnaryKind {
    Relu,
    Gelu,
    Tanh,
    Sigmoid,
    Exp,
}

enum Op<S> {
    Leaf,
    MatMul { a: NodeId, b: NodeId },
    Transpose { a: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: S },
    Unary { a: NodeId, kind: UnaryKind },
    Softmax { a: NodeId },
    LayerNorm { a: NodeId },
    Concat { parts: Vec<NodeId>, axis: usize },
    Slice { a: NodeId, axis: usize, start: usize },
    Gather { a: NodeId, axis: usize, idx: Vec<usize> },
    Sum { a: NodeId },
    CrossEntropy { logits: NodeId, rows: Vec<usize>, targets: Vec<u8> },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    /// Whether any gradient can flow to this node (a tracked leaf, or an op
    /// with a tracked input).
    tracked: bool,
    /// Op-specific values saved by the forward pass for the backward rule
    /// (layer-norm reciprocal standard deviations, cross-entropy
    /// probabilities).
    aux: Vec<S>,
    grad: Option<Vec<S>>,
}

/// Split a shape at `axis` into (outer, mid, inner) extents so that the
/// row-major offset of `(o, m, i)` is `(o * mid + m) * inner + i`.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, tracked: bool, aux: Vec<S>) -> NodeId {
        self.nodes.push(Node { value, op, tracked, aux, grad: None });
        NodeId(self.nodes.len() - 1)
    }

    fn tracked(&self, id: NodeId) -> bool {
        self.nodes[id.0].tracked
    }

    /// Constant leaf: data the loss is never differentiated against.
    pub fn input(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Leaf, false, Vec::new())
    }

    /// Differentiable leaf; its gradient is retained by [`Graph::backward`].
    pub fn param(&mut self, value: &Tensor<S>) -> NodeId {
        self.push(value.clone(), Op::Leaf, true, Vec::new())
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward pass with respect to a leaf parameter.
    pub fn grad(&self, id: NodeId) -> Option<Tensor<S>> {
        let node = &self.nodes[id.0];
        node.grad.as_ref().map(|g| {
            Tensor::new(node.value.shape().to_vec(), g.clone()).expect("gradient shape")
        })
    }

    // --- forward operations -------------------------------------------------

    /// Matrix product. Either the right operand is a plain matrix, applied to
    /// every row of the left operand (`[..., r, k] x [k, c]`), or both
    /// operands carry identical leading batch dimensions
    /// (`[..., r, k] x [..., k, c]`).
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.nodes[a.0].value.shape().to_vec();
        let sb = self.nodes[b.0].value.shape().to_vec();
        let mismatch = || Error::ShapeMismatch { op: "matmul", lhs: sa.clone(), rhs: sb.clone() };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let k = sa[sa.len() - 1];
        let (out_shape, batched) = if sb.len() == 2 {
            if sb[0] != k {
                return Err(mismatch());
            }
            let mut out = sa.clone();
            *out.last_mut().unwrap() = sb[1];
            (out, false)
        } else {
            if sb.len() != sa.len() || sb[sb.len() - 2] != k || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
                return Err(mismatch());
            }
            let mut out = sa.clone();
            *out.last_mut().unwrap() = sb[sb.len() - 1];
            (out, true)
        };
        let mut data = vec![S::ZERO; out_shape.iter().product()];
        {
            let da = self.nodes[a.0].value.data();
            let db = self.nodes[b.0].value.data();
            let c = sb[sb.len() - 1];
            if !batched {
                let rows = da.len() / k;
                unsafe {
                    S::gemm(
                        rows, k, c, S::ONE,
                        da.as_ptr(), k as isize, 1,
                        db.as_ptr(), c as isize, 1,
                        S::ZERO, data.as_mut_ptr(), c as isize, 1,
                    );
                }
            } else {
                let r = sa[sa.len() - 2];
                let groups: usize = sa[..sa.len() - 2].iter().product();
                for g in 0..groups {
                    unsafe {
                        S::gemm(
                            r, k, c, S::ONE,
                            da.as_ptr().add(g * r * k), k as isize, 1,
                            db.as_ptr().add(g * k * c), c as isize, 1,
                            S::ZERO, data.as_mut_ptr().add(g * r * c), c as isize, 1,
                        );
                    }
                }
            }
        }
        let tracked = self.tracked(a) || self.tracked(b);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::MatMul { a, b }, tracked, Vec::new()))
    }

    /// Swap the last two dimensions.
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let sa = self.nodes[a.0].value.shape().to_vec();
        if sa.len() < 2 {
            return Err(Error::ShapeMismatch { op: "transpose", lhs: sa, rhs: Vec::new() });
        }
        let (r, c) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let groups: usize = sa[..sa.len() - 2].iter().product();
        let mut out_shape = sa.clone();
        out_shape.swap(sa.len() - 2, sa.len() - 1);
        let src = self.nodes[a.0].value.data();
        let mut data = vec![S::ZERO; src.len()];
        for g in 0..groups {
            let base = g * r * c;
            for i in 0..r {
                for j in 0..c {
                    data[base + j * r + i] = src[base + i * c + j];
                }
            }
        }
        let tracked = self.tracked(a);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Transpose { a }, tracked, Vec::new()))
    }

    fn suffix_check(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let sa = self.nodes[a.0].value.shape();
        let sb = self.nodes[b.0].value.shape();
        if sb.len() > sa.len() || sb != &sa[sa.len() - sb.len()..] {
            return Err(Error::ShapeMismatch { op, lhs: sa.to_vec(), rhs: sb.to_vec() });
        }
        Ok(())
    }

    /// Elementwise sum; `b` may have any suffix of `a`'s shape and is then
    /// broadcast over the leading dimensions (bias rows, shared masks).
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.suffix_check("add", a, b)?;
        let da = self.nodes[a.0].value.data();
        let db = self.nodes[b.0].value.data();
        let l = db.len();
        let data: Vec<S> = da.iter().enumerate().map(|(i, &x)| x + db[i % l]).collect();
        let tracked = self.tracked(a) || self.tracked(b);
        let value = Tensor::new(self.nodes[a.0].value.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add { a, b }, tracked, Vec::new()))
    }

    /// Elementwise product with the same suffix-broadcast rule as
    /// [`Graph::add`].
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.suffix_check("mul", a, b)?;
        let da = self.nodes[a.0].value.data();
        let db = self.nodes[b.0].value.data();
        let l = db.len();
        let data: Vec<S> = da.iter().enumerate().map(|(i, &x)| x * db[i % l]).collect();
        let tracked = self.tracked(a) || self.tracked(b);
        let value = Tensor::new(self.nodes[a.0].value.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul { a, b }, tracked, Vec::new()))
    }

    /// Multiply by a compile-time constant (attention temperature and such).
    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let c = S::from_f64(c);
        let data: Vec<S> = self.nodes[a.0].value.data().iter().map(|&x| x * c).collect();
        let tracked = self.tracked(a);
        let value = Tensor::new(self.nodes[a.0].value.shape().to_vec(), data).expect("scale shape");
        self.push(value, Op::Scale { a, c }, tracked, Vec::new())
    }

    fn unary(&mut self, a: NodeId, kind: UnaryKind) -> NodeId {
        let data: Vec<S> = self.nodes[a.0]
            .value
            .data()
            .iter()
            .map(|&x| match kind {
                UnaryKind::Relu => x.maximum(S::ZERO),
                UnaryKind::Gelu => {
                    let (c, aa) = (S::from_f64(GELU_C), S::from_f64(GELU_A));
                    let half = S::from_f64(0.5);
                    let u = c * (x + aa * x * x * x);
                    half * x * (S::ONE + u.tanh())
                }
                UnaryKind::Tanh => x.tanh(),
                UnaryKind::Sigmoid => S::ONE / (S::ONE + (-x).exp()),
                UnaryKind::Exp => x.exp(),
            })
            .collect();
        let tracked = self.tracked(a);
        let value = Tensor::new(self.nodes[a.0].value.shape().to_vec(), data).expect("unary shape");
        self.push(value, Op::Unary { a, kind }, tracked, Vec::new())
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, UnaryKind::Relu)
    }

    /// Tanh-approximation GELU.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, UnaryKind::Gelu)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, UnaryKind::Tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, UnaryKind::Sigmoid)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, UnaryKind::Exp)
    }

    /// Softmax along the last dimension, computed with the max-shift trick.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.nodes[a.0].value.shape().to_vec();
        let d = *shape.last().ok_or_else(|| Error::ShapeMismatch {
            op: "softmax",
            lhs: shape.clone(),
            rhs: Vec::new(),
        })?;
        let src = self.nodes[a.0].value.data();
        let mut data = vec![S::ZERO; src.len()];
        for (row_out, row_in) in data.chunks_mut(d).zip(src.chunks(d)) {
            let mut max = row_in[0];
            for &x in row_in.iter() {
                max = max.maximum(x);
            }
            let mut total = S::ZERO;
            for (o, &x) in row_out.iter_mut().zip(row_in) {
                *o = (x - max).exp();
                total += *o;
            }
            for o in row_out.iter_mut() {
                *o = *o / total;
            }
        }
        let tracked = self.tracked(a);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Softmax { a }, tracked, Vec::new()))
    }

    /// Normalize each row of the last dimension to mean 0 and (biased)
    /// variance 1, with epsilon 1e-5. Learnable gain/bias are applied by the
    /// caller through [`Graph::mul`] and [`Graph::add`].
    pub fn layer_norm(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.nodes[a.0].value.shape().to_vec();
        let d = *shape.last().ok_or_else(|| Error::ShapeMismatch {
            op: "layer_norm",
            lhs: shape.clone(),
            rhs: Vec::new(),
        })?;
        let src = self.nodes[a.0].value.data();
        let mut data = vec![S::ZERO; src.len()];
        let mut aux = Vec::with_capacity(src.len() / d);
        let inv_d = S::from_f64(1.0 / d as f64);
        let eps = S::from_f64(LN_EPS);
        for (row_out, row_in) in data.chunks_mut(d).zip(src.chunks(d)) {
            let mut mean = S::ZERO;
            for &x in row_in.iter() {
                mean += x;
            }
            mean *= inv_d;
            let mut var = S::ZERO;
            for &x in row_in.iter() {
                let delta = x - mean;
                var += delta * delta;
            }
            var *= inv_d;
            let rstd = S::ONE / (var + eps).sqrt();
            for (o, &x) in row_out.iter_mut().zip(row_in) {
                *o = (x - mean) * rstd;
            }
            aux.push(rstd);
        }
        let tracked = self.tracked(a);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::LayerNorm { a }, tracked, aux))
    }

    /// Concatenate along `axis`; all parts must agree on every other
    /// dimension.
    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat", "needs at least one part"))?;
        let base = self.nodes[first.0].value.shape().to_vec();
        if axis >= base.len() {
            return Err(Error::invalid("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut total_mid = 0usize;
        for p in parts {
            let s = self.nodes[p.0].value.shape();
            if s.len() != base.len()
                || s[..axis] != base[..axis]
                || s[axis + 1..] != base[axis + 1..]
            {
                return Err(Error::ShapeMismatch { op: "concat", lhs: base, rhs: s.to_vec() });
            }
            total_mid += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total_mid;
        let (outer, _, inner) = axis_split(&out_shape, axis);
        let mut data = vec![S::ZERO; out_shape.iter().product()];
        let mut offset = 0usize;
        for p in parts {
            let s = self.nodes[p.0].value.shape();
            let mid = s[axis];
            let src = self.nodes[p.0].value.data();
            for o in 0..outer {
                let dst_base = (o * total_mid + offset) * inner;
                let src_base = o * mid * inner;
                data[dst_base..dst_base + mid * inner]
                    .copy_from_slice(&src[src_base..src_base + mid * inner]);
            }
            offset += mid;
        }
        let tracked = parts.iter().any(|p| self.tracked(*p));
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Concat { parts: parts.to_vec(), axis }, tracked, Vec::new()))
    }

    /// Contiguous range `start..start+len` along `axis`.
    pub fn slice(&mut self, a: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        let shape = self.nodes[a.0].value.shape().to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::invalid(
                "slice",
                format!("range {start}..{} on axis {axis} of {shape:?}", start + len),
            ));
        }
        let (outer, mid, inner) = axis_split(&shape, axis);
        let src = self.nodes[a.0].value.data();
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut data = vec![S::ZERO; outer * len * inner];
        for o in 0..outer {
            let src_base = (o * mid + start) * inner;
            let dst_base = o * len * inner;
            data[dst_base..dst_base + len * inner].copy_from_slice(&src[src_base..src_base + len * inner]);
        }
        let tracked = self.tracked(a);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Slice { a, axis, start }, tracked, Vec::new()))
    }

    /// Reindex along `axis`: output block `t` is input block `idx[t]`.
    /// Indices may repeat; the backward pass scatter-adds.
    pub fn gather(&mut self, a: NodeId, axis: usize, idx: Vec<usize>) -> Result<NodeId> {
        let shape = self.nodes[a.0].value.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::invalid("gather", format!("axis {axis} out of range for {shape:?}")));
        }
        if idx.is_empty() || idx.iter().any(|&i| i >= shape[axis]) {
            return Err(Error::invalid("gather", format!("indices out of range for {shape:?}")));
        }
        let (outer, mid, inner) = axis_split(&shape, axis);
        let src = self.nodes[a.0].value.data();
        let mut out_shape = shape.clone();
        out_shape[axis] = idx.len();
        let mut data = vec![S::ZERO; outer * idx.len() * inner];
        for o in 0..outer {
            for (t, &j) in idx.iter().enumerate() {
                let dst = (o * idx.len() + t) * inner;
                let srcb = (o * mid + j) * inner;
                data[dst..dst + inner].copy_from_slice(&src[srcb..srcb + inner]);
            }
        }
        let tracked = self.tracked(a);
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Gather { a, axis, idx }, tracked, Vec::new()))
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let mut total = S::ZERO;
        for &x in self.nodes[a.0].value.data() {
            total += x;
        }
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(total), Op::Sum { a }, tracked, Vec::new())
    }

    /// Mean two-class cross-entropy over selected rows of `[..., 2]` logits.
    ///
    /// `rows` are flat row indices into the logits viewed as `[R, 2]`;
    /// `targets[i]` is the class of `rows[i]`. Uses the log-sum-exp form, so
    /// it is stable for large logits.
    pub fn cross_entropy(&mut self, logits: NodeId, rows: Vec<usize>, targets: Vec<u8>) -> Result<NodeId> {
        let shape = self.nodes[logits.0].value.shape().to_vec();
        if shape.last() != Some(&2) {
            return Err(Error::ShapeMismatch { op: "cross_entropy", lhs: shape, rhs: vec![2] });
        }
        if rows.is_empty() {
            return Err(Error::invalid("cross_entropy", "empty position selection"));
        }
        if rows.len() != targets.len() {
            return Err(Error::invalid(
                "cross_entropy",
                format!("{} rows but {} targets", rows.len(), targets.len()),
            ));
        }
        let total_rows = self.nodes[logits.0].value.numel() / 2;
        if rows.iter().any(|&r| r >= total_rows) {
            return Err(Error::invalid("cross_entropy", format!("row index out of range (< {total_rows})")));
        }
        if targets.iter().any(|&t| t > 1) {
            return Err(Error::invalid("cross_entropy", "targets must be 0 or 1"));
        }
        let data = self.nodes[logits.0].value.data();
        let mut aux = Vec::with_capacity(rows.len() * 2);
        let mut loss = S::ZERO;
        for (&r, &t) in rows.iter().zip(&targets) {
            let (l0, l1) = (data[2 * r], data[2 * r + 1]);
            let m = l0.maximum(l1);
            let z = (l0 - m).exp() + (l1 - m).exp();
            let log_z = m + z.ln();
            let lt = if t == 0 { l0 } else { l1 };
            loss += log_z - lt;
            aux.push((l0 - log_z).exp());
            aux.push((l1 - log_z).exp());
        }
        loss *= S::from_f64(1.0 / rows.len() as f64);
        let tracked = self.tracked(logits);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, rows, targets }, tracked, aux))
    }

    // --- backward ------------------------------------------------------------

    /// Reverse sweep from a scalar loss. Leaf parameter gradients are
    /// retained and readable through [`Graph::grad`]; intermediate gradients
    /// are freed once propagated.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::invalid(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.nodes[loss.0].value.shape()),
            ));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![S::ONE]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].tracked || self.nodes[i].grad.is_none() {
                continue;
            }
            let is_leaf = matches!(self.nodes[i].op, Op::Leaf);
            if is_leaf {
                continue; // gradient stays in place for extraction
            }
            let grad = self.nodes[i].grad.take().expect("checked above");
            let contributions = self.contributions(i, &grad);
            for (target, contrib) in contributions {
                let slot = &mut self.nodes[target].grad;
                match slot {
                    Some(existing) => {
                        for (e, c) in existing.iter_mut().zip(&contrib) {
                            *e += *c;
                        }
                    }
                    None => *slot = Some(contrib),
                }
            }
        }
        Ok(())
    }

    /// Gradient contributions of node `i` (with output gradient `grad`) to
    /// each of its tracked inputs.
    fn contributions(&self, i: usize, grad: &[S]) -> Vec<(usize, Vec<S>)> {
        let node = &self.nodes[i];
        let mut out: Vec<(usize, Vec<S>)> = Vec::new();
        let want = |g: &Graph<S>, id: NodeId| g.nodes[id.0].tracked;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let sa = self.nodes[a.0].value.shape();
                let sb = self.nodes[b.0].value.shape();
                let k = sa[sa.len() - 1];
                let c = sb[sb.len() - 1];
                let va = self.nodes[a.0].value.data();
                let vb = self.nodes[b.0].value.data();
                if sb.len() == 2 {
                    let rows = va.len() / k;
                    if want(self, *a) {
                        let mut da = vec![S::ZERO; va.len()];
                        unsafe {
                            // dA = dOut · Bᵀ
                            S::gemm(
                                rows, c, k, S::ONE,
                                grad.as_ptr(), c as isize, 1,
                                vb.as_ptr(), 1, c as isize,
                                S::ZERO, da.as_mut_ptr(), k as isize, 1,
                            );
                        }
                        out.push((a.0, da));
                    }
                    if want(self, *b) {
                        let mut db = vec![S::ZERO; vb.len()];
                        unsafe {
                            // dB = Aᵀ · dOut
                            S::gemm(
                                k, rows, c, S::ONE,
                                va.as_ptr(), 1, k as isize,
                                grad.as_ptr(), c as isize, 1,
                                S::ZERO, db.as_mut_ptr(), c as isize, 1,
                            );
                        }
                        out.push((b.0, db));
                    }
                } else {
                    let r = sa[sa.len() - 2];
                    let groups: usize = sa[..sa.len() - 2].iter().product();
                    let mut da = if want(self, *a) { Some(vec![S::ZERO; va.len()]) } else { None };
                    let mut db = if want(self, *b) { Some(vec![S::ZERO; vb.len()]) } else { None };
                    for g in 0..groups {
                        if let Some(da) = da.as_mut() {
                            unsafe {
                                S::gemm(
                                    r, c, k, S::ONE,
                                    grad.as_ptr().add(g * r * c), c as isize, 1,
                                    vb.as_ptr().add(g * k * c), 1, c as isize,
                                    S::ZERO, da.as_mut_ptr().add(g * r * k), k as isize, 1,
                                );
                            }
                        }
                        if let Some(db) = db.as_mut() {
                            unsafe {
                                S::gemm(
                                    k, r, c, S::ONE,
                                    va.as_ptr().add(g * r * k), 1, k as isize,
                                    grad.as_ptr().add(g * r * c), c as isize, 1,
                                    S::ZERO, db.as_mut_ptr().add(g * k * c), c as isize, 1,
                                );
                            }
                        }
                    }
                    if let Some(da) = da {
                        out.push((a.0, da));
                    }
                    if let Some(db) = db {
                        out.push((b.0, db));
                    }
                }
            }
            Op::Transpose { a } => {
                if want(self, *a) {
                    let s_out = node.value.shape();
                    let (r, c) = (s_out[s_out.len() - 2], s_out[s_out.len() - 1]);
                    let groups: usize = s_out[..s_out.len() - 2].iter().product();
                    let mut da = vec![S::ZERO; grad.len()];
                    for g in 0..groups {
                        let base = g * r * c;
                        for i2 in 0..r {
                            for j in 0..c {
                                // output[i2][j] came from input[j][i2]
                                da[base + j * r + i2] = grad[base + i2 * c + j];
                            }
                        }
                    }
                    out.push((a.0, da));
                }
            }
            Op::Add { a, b } => {
                if want(self, *a) {
                    out.push((a.0, grad.to_vec()));
                }
                if want(self, *b) {
                    let l = self.nodes[b.0].value.numel();
                    let mut db = vec![S::ZERO; l];
                    for (i2, &g) in grad.iter().enumerate() {
                        db[i2 % l] += g;
                    }
                    out.push((b.0, db));
                }
            }
            Op::Mul { a, b } => {
                let va = self.nodes[a.0].value.data();
                let vb = self.nodes[b.0].value.data();
                let l = vb.len();
                if want(self, *a) {
                    let da: Vec<S> = grad.iter().enumerate().map(|(i2, &g)| g * vb[i2 % l]).collect();
                    out.push((a.0, da));
                }
                if want(self, *b) {
                    let mut db = vec![S::ZERO; l];
                    for (i2, &g) in grad.iter().enumerate() {
                        db[i2 % l] += g * va[i2];
                    }
                    out.push((b.0, db));
                }
            }
            Op::Scale { a, c } => {
                if want(self, *a) {
                    out.push((a.0, grad.iter().map(|&g| g * *c).collect()));
                }
            }
            Op::Unary { a, kind } => {
                if want(self, *a) {
                    let x = self.nodes[a.0].value.data();
                    let y = node.value.data();
                    let da: Vec<S> = grad
                        .iter()
                        .enumerate()
                        .map(|(i2, &g)| {
                            let d = match kind {
                                UnaryKind::Relu => {
                                    if x[i2] > S::ZERO {
                                        S::ONE
                                    } else {
                                        S::ZERO
                                    }
                                }
                                UnaryKind::Gelu => {
                                    let (c, aa) = (S::from_f64(GELU_C), S::from_f64(GELU_A));
                                    let half = S::from_f64(0.5);
                                    let three = S::from_f64(3.0);
                                    let xi = x[i2];
                                    let t = (c * (xi + aa * xi * xi * xi)).tanh();
                                    let du = c * (S::ONE + three * aa * xi * xi);
                                    half * (S::ONE + t) + half * xi * (S::ONE - t * t) * du
                                }
                                UnaryKind::Tanh => S::ONE - y[i2] * y[i2],
                                UnaryKind::Sigmoid => y[i2] * (S::ONE - y[i2]),
                                UnaryKind::Exp => y[i2],
                            };
                            g * d
                        })
                        .collect();
                    out.push((a.0, da));
                }
            }
            Op::Softmax { a } => {
                if want(self, *a) {
                    let y = node.value.data();
                    let d = *node.value.shape().last().expect("softmax rank");
                    let mut da = vec![S::ZERO; y.len()];
                    for ((da_row, y_row), g_row) in
                        da.chunks_mut(d).zip(y.chunks(d)).zip(grad.chunks(d))
                    {
                        let mut dot = S::ZERO;
                        for (&yy, &gg) in y_row.iter().zip(g_row) {
                            dot += yy * gg;
                        }
                        for ((o, &yy), &gg) in da_row.iter_mut().zip(y_row).zip(g_row) {
                            *o = yy * (gg - dot);
                        }
                    }
                    out.push((a.0, da));
                }
            }
            Op::LayerNorm { a } => {
                if want(self, *a) {
                    let y = node.value.data(); // normalized rows
                    let d = *node.value.shape().last().expect("layer_norm rank");
                    let inv_d = S::from_f64(1.0 / d as f64);
                    let mut da = vec![S::ZERO; y.len()];
                    for (row, ((da_row, y_row), g_row)) in
                        da.chunks_mut(d).zip(y.chunks(d)).zip(grad.chunks(d)).enumerate()
                    {
                        let rstd = node.aux[row];
                        let mut mean_g = S::ZERO;
                        let mut mean_gy = S::ZERO;
                        for (&yy, &gg) in y_row.iter().zip(g_row) {
                            mean_g += gg;
                            mean_gy += gg * yy;
                        }
                        mean_g *= inv_d;
                        mean_gy *= inv_d;
                        for ((o, &yy), &gg) in da_row.iter_mut().zip(y_row).zip(g_row) {
                            *o = rstd * (gg - mean_g - yy * mean_gy);
                        }
                    }
                    out.push((a.0, da));
                }
            }
            Op::Concat { parts, axis } => {
                let out_shape = node.value.shape();
                let (outer, total_mid, inner) = axis_split(out_shape, *axis);
                let mut offset = 0usize;
                for p in parts {
                    let mid = self.nodes[p.0].value.shape()[*axis];
                    if want(self, *p) {
                        let mut dp = vec![S::ZERO; self.nodes[p.0].value.numel()];
                        for o in 0..outer {
                            let src_base = (o * total_mid + offset) * inner;
                            let dst_base = o * mid * inner;
                            dp[dst_base..dst_base + mid * inner]
                                .copy_from_slice(&grad[src_base..src_base + mid * inner]);
                        }
                        out.push((p.0, dp));
                    }
                    offset += mid;
                }
            }
            Op::Slice { a, axis, start } => {
                if want(self, *a) {
                    let in_shape = self.nodes[a.0].value.shape();
                    let (outer, mid, inner) = axis_split(in_shape, *axis);
                    let len = node.value.shape()[*axis];
                    let mut da = vec![S::ZERO; self.nodes[a.0].value.numel()];
                    for o in 0..outer {
                        let dst_base = (o * mid + start) * inner;
                        let src_base = o * len * inner;
                        da[dst_base..dst_base + len * inner]
                            .copy_from_slice(&grad[src_base..src_base + len * inner]);
                    }
                    out.push((a.0, da));
                }
            }
            Op::Gather { a, axis, idx } => {
                if want(self, *a) {
                    let in_shape = self.nodes[a.0].value.shape();
                    let (outer, mid, inner) = axis_split(in_shape, *axis);
                    let mut da = vec![S::ZERO; self.nodes[a.0].value.numel()];
                    for o in 0..outer {
                        for (t, &j) in idx.iter().enumerate() {
                            let src = (o * idx.len() + t) * inner;
                            let dst = (o * mid + j) * inner;
                            for u in 0..inner {
                                da[dst + u] += grad[src + u];
                            }
                        }
                    }
                    out.push((a.0, da));
                }
            }
            Op::Sum { a } => {
                if want(self, *a) {
                    out.push((a.0, vec![grad[0]; self.nodes[a.0].value.numel()]));
                }
            }
            Op::CrossEntropy { logits, rows, targets } => {
                if want(self, *logits) {
                    let mut da = vec![S::ZERO; self.nodes[logits.0].value.numel()];
                    let scale = grad[0] * S::from_f64(1.0 / rows.len() as f64);
                    for (s, (&r, &t)) in rows.iter().zip(targets).enumerate() {
                        let (p0, p1) = (node.aux[2 * s], node.aux[2 * s + 1]);
                        let (y0, y1) = if t == 0 { (S::ONE, S::ZERO) } else { (S::ZERO, S::ONE) };
                        da[2 * r] += scale * (p0 - y0);
                        da[2 * r + 1] += scale * (p1 - y1);
                    }
                    out.push((logits.0, da));
                }
            }
        }
        out
    }
}
