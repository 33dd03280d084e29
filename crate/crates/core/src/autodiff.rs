//! Define-by-run reverse-mode differentiation on a flat tape.
//!
//! A forward pass appends nodes in topological order; [`Tape::backward`]
//! walks them in reverse and accumulates exact gradients into the
//! [`ParamStore`]. Parameters marked non-trainable receive no gradient, so
//! freezing a net is a property of the store, not of the graph.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{matmul_at_acc, matmul_bt_acc};
use crate::{Error, Result, Tensor};

/// Smallest probability fed to a logarithm; keeps a collapsed softmax from
/// poisoning the loss with infinities.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// A weight with its gradient and momentum buffers.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub momentum_buf: Tensor,
    pub trainable: bool,
}

/// Flat, declaration-ordered parameter storage shared by all nets of a model.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape().to_vec());
        let momentum_buf = Tensor::zeros(value.shape().to_vec());
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
            momentum_buf,
            trainable: true,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn set_trainable(&mut self, ids: &[ParamId], trainable: bool) {
        for id in ids {
            self.params[id.0].trainable = trainable;
        }
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        for p in &mut self.params {
            p.trainable = trainable;
        }
    }

    /// Scales every trainable gradient, e.g. by 1/batch for a mean loss.
    pub fn scale_grads(&mut self, c: f64) {
        for p in &mut self.params {
            if p.trainable {
                let g = p.grad.data_mut();
                for v in g {
                    *v *= c;
                }
            }
        }
    }

    /// Clones every value tensor, for bitwise before/after comparisons.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    /// Resets all momentum buffers, used at training phase boundaries.
    pub fn reset_momentum(&mut self) {
        for p in &mut self.params {
            p.momentum_buf.fill(0.0);
        }
    }

    pub fn total_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }
}

enum Op {
    /// Constant input or a parameter leaf.
    Leaf {
        param: Option<ParamId>,
    },
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    /// Adds a single row vector to every row of the left operand.
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    MeanRows(NodeId),
    SliceCols {
        a: NodeId,
        start: usize,
        len: usize,
    },
    SliceRows {
        a: NodeId,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<NodeId>),
    /// Appends each conditioning row vector to every row of the sequence.
    BroadcastConcat {
        x: NodeId,
        ys: Vec<NodeId>,
    },
    /// out[i, :] = sum of the listed rows of `w`; the sparse form of a
    /// one-hot-block times weight-matrix product.
    GatherRowsSum {
        w: NodeId,
        rows: Arc<Vec<Vec<usize>>>,
    },
    /// Label-smoothed cross-entropy against a class index, yielding a scalar.
    CeSmoothed {
        probs: NodeId,
        target: usize,
        eps: f64,
    },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// The forward tape. Build one per forward pass (or `clear` and reuse).
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { param: None }, value)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(Op::Leaf { param: Some(id) }, store.value(id).clone())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (av, rv) = (self.value(a), self.value(row));
        let m = av.cols();
        if rv.numel() != m {
            return Err(Error::Shape(format!(
                "row add: {:?} rows of width {} vs row of {} entries",
                av.shape(),
                m,
                rv.numel()
            )));
        }
        let n = av.rows();
        let mut out = av.data().to_vec();
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] += rv.data()[j];
            }
        }
        let v = Tensor::new(av.shape().to_vec(), out)?;
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), v)
    }

    /// Row-wise softmax with max-subtraction.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let (n, m) = (av.rows(), av.cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            softmax_slice(&av.data()[i * m..(i + 1) * m], &mut out[i * m..(i + 1) * m]);
        }
        let v = Tensor::new(av.shape().to_vec(), out).expect("same shape");
        self.push(Op::SoftmaxRows(a), v)
    }

    /// Row-wise layer normalization with learned gain and shift.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        let (n, m) = (xv.rows(), xv.cols());
        let gv = self.value(gamma);
        let bv = self.value(beta);
        if gv.numel() != m || bv.numel() != m {
            return Err(Error::Shape(format!(
                "layer norm over width {} with gain {:?} / shift {:?}",
                m,
                gv.shape(),
                bv.shape()
            )));
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &xv.data()[i * m..(i + 1) * m];
            let (mean, var) = mean_var(row);
            let inv = 1.0 / libm::sqrt(var + eps);
            for j in 0..m {
                out[i * m + j] = (row[j] - mean) * inv * gv.data()[j] + bv.data()[j];
            }
        }
        let v = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            },
            v,
        ))
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mean_rows();
        self.push(Op::MeanRows(a), v)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let av = self.value(a);
        let (n, m) = (av.rows(), av.cols());
        if start + len > m {
            return Err(Error::Shape(format!(
                "column slice {}..{} out of width {}",
                start,
                start + len,
                m
            )));
        }
        let mut out = vec![0.0; n * len];
        for i in 0..n {
            out[i * len..(i + 1) * len]
                .copy_from_slice(&av.data()[i * m + start..i * m + start + len]);
        }
        let v = Tensor::matrix(n, len, out)?;
        Ok(self.push(Op::SliceCols { a, start, len }, v))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let av = self.value(a);
        let (n, m) = (av.rows(), av.cols());
        if start + len > n {
            return Err(Error::Shape(format!(
                "row slice {}..{} out of {} rows",
                start,
                start + len,
                n
            )));
        }
        let out = av.data()[start * m..(start + len) * m].to_vec();
        let v = Tensor::matrix(len, m, out)?;
        Ok(self.push(Op::SliceRows { a, start, len }, v))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of zero tensors".into()));
        }
        let n = self.value(parts[0]).rows();
        let mut widths = Vec::with_capacity(parts.len());
        let mut total = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != n {
                return Err(Error::Shape(format!(
                    "concat rows disagree: {} vs {}",
                    n,
                    pv.rows()
                )));
            }
            widths.push(pv.cols());
            total += pv.cols();
        }
        let mut out = vec![0.0; n * total];
        for i in 0..n {
            let mut off = 0;
            for (&p, &w) in parts.iter().zip(widths.iter()) {
                let pv = self.value(p);
                out[i * total + off..i * total + off + w]
                    .copy_from_slice(&pv.data()[i * w..(i + 1) * w]);
                off += w;
            }
        }
        let v = Tensor::matrix(n, total, out)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    /// Broadcast concatenation: every row of `x` gets each conditioning
    /// vector appended, in declared order.
    pub fn broadcast_concat(&mut self, x: NodeId, ys: &[NodeId]) -> Result<NodeId> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        let mut ks = Vec::with_capacity(ys.len());
        let mut total = d;
        for &y in ys {
            let yv = self.value(y);
            if yv.rows() != 1 {
                return Err(Error::Shape(format!(
                    "broadcast vector must be a single row, got {:?}",
                    yv.shape()
                )));
            }
            ks.push(yv.numel());
            total += yv.numel();
        }
        let mut out = vec![0.0; n * total];
        for i in 0..n {
            out[i * total..i * total + d].copy_from_slice(&xv.data()[i * d..(i + 1) * d]);
            let mut off = d;
            for (&y, &k) in ys.iter().zip(ks.iter()) {
                let yv = self.value(y);
                out[i * total + off..i * total + off + k].copy_from_slice(yv.data());
                off += k;
            }
        }
        let v = Tensor::matrix(n, total, out)?;
        Ok(self.push(Op::BroadcastConcat { x, ys: ys.to_vec() }, v))
    }

    /// Sparse one-hot-block linear: `out[i, :] = sum_{r in rows[i]} w[r, :]`.
    pub fn gather_rows_sum(&mut self, w: NodeId, rows: Arc<Vec<Vec<usize>>>) -> Result<NodeId> {
        let wv = self.value(w);
        let (wn, m) = (wv.rows(), wv.cols());
        let n = rows.len();
        let mut out = vec![0.0; n * m];
        for (i, idx) in rows.iter().enumerate() {
            for &r in idx {
                if r >= wn {
                    return Err(Error::Shape(format!(
                        "gather row {} out of {} weight rows",
                        r, wn
                    )));
                }
                let wrow = &wv.data()[r * m..(r + 1) * m];
                let orow = &mut out[i * m..(i + 1) * m];
                for (o, &v) in orow.iter_mut().zip(wrow.iter()) {
                    *o += v;
                }
            }
        }
        let v = Tensor::matrix(n, m, out)?;
        Ok(self.push(Op::GatherRowsSum { w, rows }, v))
    }

    /// Label-smoothed cross-entropy of a single probability row against a
    /// class index; smoothing mass eps is spread uniformly over all classes.
    pub fn ce_smoothed(&mut self, probs: NodeId, target: usize, eps: f64) -> Result<NodeId> {
        let pv = self.value(probs);
        let c = pv.numel();
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Config(format!(
                "label smoothing factor {eps} outside [0, 1)"
            )));
        }
        if target >= c {
            return Err(Error::Input(format!(
                "target class {target} out of {c} classes"
            )));
        }
        let mut loss = 0.0;
        for (i, &p) in pv.data().iter().enumerate() {
            let q = smoothed_target(i == target, eps, c);
            if q != 0.0 {
                loss -= q * libm::log(p.max(PROB_FLOOR));
            }
        }
        let v = Tensor::scalar(loss);
        Ok(self.push(Op::CeSmoothed { probs, target, eps }, v))
    }

    /// Reverse pass from a scalar loss node. Gradients of trainable
    /// parameters accumulate into the store (they are not zeroed first, so a
    /// mini-batch may sum several backward passes).
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::State(
                "backward called without a forward pass".into(),
            ));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Leaf { param } => {
                    if let Some(pid) = param {
                        let p = store.get_mut(*pid);
                        if p.trainable {
                            // Parameter tensors may be rank-1 while the tape
                            // works in rows; shapes share the same layout.
                            let dst = p.grad.data_mut();
                            for (d, &s) in dst.iter_mut().zip(g.data().iter()) {
                                *d += s;
                            }
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (n, k, m) = (av.rows(), av.cols(), bv.cols());
                    {
                        let ga = grad_slot(&mut grads, *a, av.shape());
                        matmul_bt_acc(g.data(), bv.data(), ga.data_mut(), n, k, m);
                    }
                    {
                        let gb = grad_slot(&mut grads, *b, bv.shape());
                        matmul_at_acc(av.data(), g.data(), gb.data_mut(), n, k, m);
                    }
                }
                Op::Transpose(a) => {
                    let gt = g.transpose();
                    accumulate(&mut grads, *a, self.value(*a).shape(), gt.data());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, self.value(*a).shape(), g.data());
                    accumulate(&mut grads, *b, self.value(*b).shape(), g.data());
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads, *a, self.value(*a).shape(), g.data());
                    let m = self.value(*row).numel();
                    let n = self.value(*a).rows();
                    let mut rsum = vec![0.0; m];
                    for r in 0..n {
                        for j in 0..m {
                            rsum[j] += g.data()[r * m + j];
                        }
                    }
                    accumulate(&mut grads, *row, self.value(*row).shape(), &rsum);
                }
                Op::Scale(a, c) => {
                    let ga = g.scale(*c);
                    accumulate(&mut grads, *a, self.value(*a).shape(), ga.data());
                }
                Op::Relu(a) => {
                    let av = self.value(*a);
                    let data: Vec<f64> = av
                        .data()
                        .iter()
                        .zip(g.data().iter())
                        .map(|(&x, &gv)| if x > 0.0 { gv } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, av.shape(), &data);
                }
                Op::SoftmaxRows(a) => {
                    let p = &self.nodes[i].value;
                    let (n, m) = (p.rows(), p.cols());
                    let mut out = vec![0.0; n * m];
                    for r in 0..n {
                        let prow = &p.data()[r * m..(r + 1) * m];
                        let grow = &g.data()[r * m..(r + 1) * m];
                        let dot: f64 = prow.iter().zip(grow.iter()).map(|(&pv, &gv)| pv * gv).sum();
                        for j in 0..m {
                            out[r * m + j] = prow[j] * (grow[j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, self.value(*a).shape(), &out);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    eps,
                } => {
                    let xv = self.value(*x);
                    let gv = self.value(*gamma);
                    let (n, m) = (xv.rows(), xv.cols());
                    let mut gx = vec![0.0; n * m];
                    let mut ggamma = vec![0.0; m];
                    let mut gbeta = vec![0.0; m];
                    for r in 0..n {
                        let row = &xv.data()[r * m..(r + 1) * m];
                        let grow = &g.data()[r * m..(r + 1) * m];
                        let (mean, var) = mean_var(row);
                        let inv = 1.0 / libm::sqrt(var + eps);
                        // d/dxhat, then pull back through mean and variance.
                        let mut sum_dh = 0.0;
                        let mut sum_dh_xhat = 0.0;
                        for j in 0..m {
                            let xhat = (row[j] - mean) * inv;
                            let dh = grow[j] * gv.data()[j];
                            sum_dh += dh;
                            sum_dh_xhat += dh * xhat;
                            ggamma[j] += grow[j] * xhat;
                            gbeta[j] += grow[j];
                        }
                        let inv_m = 1.0 / m as f64;
                        for j in 0..m {
                            let xhat = (row[j] - mean) * inv;
                            let dh = grow[j] * gv.data()[j];
                            gx[r * m + j] =
                                inv * (dh - inv_m * sum_dh - xhat * inv_m * sum_dh_xhat);
                        }
                    }
                    accumulate(&mut grads, *x, xv.shape(), &gx);
                    accumulate(&mut grads, *gamma, self.value(*gamma).shape(), &ggamma);
                    accumulate(&mut grads, *beta, self.value(*beta).shape(), &gbeta);
                }
                Op::MeanRows(a) => {
                    let av = self.value(*a);
                    let (n, m) = (av.rows(), av.cols());
                    let inv = 1.0 / n as f64;
                    let mut out = vec![0.0; n * m];
                    for r in 0..n {
                        for j in 0..m {
                            out[r * m + j] = g.data()[j] * inv;
                        }
                    }
                    accumulate(&mut grads, *a, av.shape(), &out);
                }
                Op::SliceCols { a, start, len } => {
                    let av = self.value(*a);
                    let (n, m) = (av.rows(), av.cols());
                    let mut out = vec![0.0; n * m];
                    for r in 0..n {
                        for j in 0..*len {
                            out[r * m + start + j] = g.data()[r * len + j];
                        }
                    }
                    accumulate(&mut grads, *a, av.shape(), &out);
                }
                Op::SliceRows { a, start, len } => {
                    let av = self.value(*a);
                    let m = av.cols();
                    let mut out = vec![0.0; av.rows() * m];
                    out[start * m..(start + len) * m].copy_from_slice(g.data());
                    accumulate(&mut grads, *a, av.shape(), &out);
                }
                Op::ConcatCols(parts) => {
                    let n = self.value(parts[0]).rows();
                    let total = self.nodes[i].value.cols();
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut gp = vec![0.0; n * w];
                        for r in 0..n {
                            gp[r * w..(r + 1) * w]
                                .copy_from_slice(&g.data()[r * total + off..r * total + off + w]);
                        }
                        accumulate(&mut grads, p, self.value(p).shape(), &gp);
                        off += w;
                    }
                }
                Op::BroadcastConcat { x, ys } => {
                    let xv = self.value(*x);
                    let (n, d) = (xv.rows(), xv.cols());
                    let total = self.nodes[i].value.cols();
                    let mut gx = vec![0.0; n * d];
                    for r in 0..n {
                        gx[r * d..(r + 1) * d].copy_from_slice(&g.data()[r * total..r * total + d]);
                    }
                    accumulate(&mut grads, *x, xv.shape(), &gx);
                    let mut off = d;
                    for &y in ys {
                        let k = self.value(y).numel();
                        let mut gy = vec![0.0; k];
                        for r in 0..n {
                            for j in 0..k {
                                gy[j] += g.data()[r * total + off + j];
                            }
                        }
                        accumulate(&mut grads, y, self.value(y).shape(), &gy);
                        off += k;
                    }
                }
                Op::GatherRowsSum { w, rows } => {
                    let wv = self.value(*w);
                    let m = wv.cols();
                    let mut gw = vec![0.0; wv.numel()];
                    for (r, idx) in rows.iter().enumerate() {
                        let grow = &g.data()[r * m..(r + 1) * m];
                        for &wr in idx {
                            let dst = &mut gw[wr * m..(wr + 1) * m];
                            for (d, &s) in dst.iter_mut().zip(grow.iter()) {
                                *d += s;
                            }
                        }
                    }
                    accumulate(&mut grads, *w, wv.shape(), &gw);
                }
                Op::CeSmoothed { probs, target, eps } => {
                    let pv = self.value(*probs);
                    let c = pv.numel();
                    let gl = g.data()[0];
                    let out: Vec<f64> = pv
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(j, &p)| {
                            let q = smoothed_target(j == *target, *eps, c);
                            if p > PROB_FLOOR {
                                -q / p * gl
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accumulate(&mut grads, *probs, pv.shape(), &out);
                }
            }
        }
        Ok(())
    }
}

fn smoothed_target(is_target: bool, eps: f64, classes: usize) -> f64 {
    let uniform = eps / classes as f64;
    if is_target {
        1.0 - eps + uniform
    } else {
        uniform
    }
}

fn mean_var(row: &[f64]) -> (f64, f64) {
    let m = row.len() as f64;
    let mean = row.iter().sum::<f64>() / m;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, var)
}

/// Numerically stable softmax of one slice into another.
pub(crate) fn softmax_slice(src: &[f64], dst: &mut [f64]) {
    let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (d, &s) in dst.iter_mut().zip(src.iter()) {
        let e = libm::exp(s - max);
        *d = e;
        sum += e;
    }
    let inv = 1.0 / sum;
    for d in dst.iter_mut() {
        *d *= inv;
    }
}

fn grad_slot<'a>(grads: &'a mut [Option<Tensor>], id: NodeId, shape: &[usize]) -> &'a mut Tensor {
    grads[id.0].get_or_insert_with(|| Tensor::zeros(shape.to_vec()))
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, shape: &[usize], data: &[f64]) {
    let slot = grads[id.0].get_or_insert_with(|| Tensor::zeros(shape.to_vec()));
    let dst = slot.data_mut();
    for (d, &s) in dst.iter_mut().zip(data.iter()) {
        *d += s;
    }
}
