//! Network building blocks: initialization, the attention block, the
//! sequence classifier, and the loss surface.
//!
//! The classifier is deliberately compact: a bias-free embedding of one-hot
//! byte blocks, a stack of post-norm attention blocks, mean pooling, and a
//! linear class head. Every width is configurable.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{softmax_slice, NodeId, ParamId, ParamStore, Parameter, Tape, PROB_FLOOR};
use crate::rng::Rng;
use crate::{Error, Result, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Row-wise softmax with max-subtraction. Rank-1 input is one row.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.data().iter().any(|v| v.is_nan()) {
        return Err(Error::Input("softmax over NaN logits".into()));
    }
    let (n, m) = (logits.rows(), logits.cols());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        softmax_slice(
            &logits.data()[i * m..(i + 1) * m],
            &mut out[i * m..(i + 1) * m],
        );
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Label-smoothed cross-entropy `-sum_c q_c ln p_c` with
/// `q = (1 - eps) * onehot(target) + eps / C`.
pub fn ce_label_smoothed(probs: &Tensor, target: usize, eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Config(format!(
            "label smoothing factor {eps} outside [0, 1)"
        )));
    }
    let c = probs.numel();
    if target >= c {
        return Err(Error::Input(format!(
            "target class {target} out of {c} classes"
        )));
    }
    let sum: f64 = probs.data().iter().sum();
    if probs
        .data()
        .iter()
        .any(|&p| !(0.0..=1.0 + 1e-9).contains(&p))
        || (sum - 1.0).abs() > 1e-6
    {
        return Err(Error::Input(format!(
            "probabilities must form a distribution (sum {sum})"
        )));
    }
    let uniform = eps / c as f64;
    let mut loss = 0.0;
    for (i, &p) in probs.data().iter().enumerate() {
        let q = if i == target {
            1.0 - eps + uniform
        } else {
            uniform
        };
        if q != 0.0 {
            loss -= q * libm::log(p.max(PROB_FLOOR));
        }
    }
    Ok(loss)
}

/// `x . W (+ bias)` at the tensor level.
pub fn linear_forward(x: &Tensor, w: &Parameter, bias: Option<&Parameter>) -> Result<Tensor> {
    let mut out = x.matmul(&w.value)?;
    if let Some(b) = bias {
        let m = out.cols();
        if b.value.numel() != m {
            return Err(Error::Shape(format!(
                "bias of {} entries on output width {}",
                b.value.numel(),
                m
            )));
        }
        let n = out.rows();
        let data = out.data_mut();
        for i in 0..n {
            for j in 0..m {
                data[i * m + j] += b.value.data()[j];
            }
        }
    }
    Ok(out)
}

fn init_matrix(
    store: &mut ParamStore,
    rng: &mut Rng,
    name: String,
    d_in: usize,
    d_out: usize,
) -> ParamId {
    let bound = libm::sqrt(1.0 / d_in as f64);
    let data: Vec<f64> = (0..d_in * d_out)
        .map(|_| rng.uniform(-bound, bound))
        .collect();
    store.add(name, Tensor::matrix(d_in, d_out, data).expect("sized"))
}

fn init_bias(store: &mut ParamStore, name: String, d: usize) -> ParamId {
    store.add(name, Tensor::vector(vec![0.0; d]))
}

/// Parameters of one attention block.
#[derive(Debug, Clone)]
pub struct AttentionBlockParams {
    pub qw: ParamId,
    pub qb: ParamId,
    pub kw: ParamId,
    pub kb: ParamId,
    pub vw: ParamId,
    pub vb: ParamId,
    pub ow: ParamId,
    pub ob: ParamId,
    pub ln1_gain: ParamId,
    pub ln1_shift: ParamId,
    pub ffn_w1: ParamId,
    pub ffn_b1: ParamId,
    pub ffn_w2: ParamId,
    pub ffn_b2: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_shift: ParamId,
}

impl AttentionBlockParams {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, prefix: &str, d: usize, ffn: usize) -> Self {
        AttentionBlockParams {
            qw: init_matrix(store, rng, format!("{prefix}.qw"), d, d),
            qb: init_bias(store, format!("{prefix}.qb"), d),
            kw: init_matrix(store, rng, format!("{prefix}.kw"), d, d),
            kb: init_bias(store, format!("{prefix}.kb"), d),
            vw: init_matrix(store, rng, format!("{prefix}.vw"), d, d),
            vb: init_bias(store, format!("{prefix}.vb"), d),
            ow: init_matrix(store, rng, format!("{prefix}.ow"), d, d),
            ob: init_bias(store, format!("{prefix}.ob"), d),
            ln1_gain: store.add(format!("{prefix}.ln1g"), Tensor::vector(vec![1.0; d])),
            ln1_shift: store.add(format!("{prefix}.ln1b"), Tensor::vector(vec![0.0; d])),
            ffn_w1: init_matrix(store, rng, format!("{prefix}.fw1"), d, ffn),
            ffn_b1: init_bias(store, format!("{prefix}.fb1"), ffn),
            ffn_w2: init_matrix(store, rng, format!("{prefix}.fw2"), ffn, d),
            ffn_b2: init_bias(store, format!("{prefix}.fb2"), d),
            ln2_gain: store.add(format!("{prefix}.ln2g"), Tensor::vector(vec![1.0; d])),
            ln2_shift: store.add(format!("{prefix}.ln2b"), Tensor::vector(vec![0.0; d])),
        }
    }
}

/// Multi-head self-attention + feed-forward, each with residual and
/// post-norm. `heads` must divide the model width.
pub fn attention_block_forward(
    tape: &mut Tape,
    store: &ParamStore,
    block: &AttentionBlockParams,
    x: NodeId,
    heads: usize,
) -> Result<NodeId> {
    let d = tape.value(x).cols();
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!(
            "model width {d} not divisible by {heads} heads"
        )));
    }
    let dh = d / heads;
    let scale = 1.0 / libm::sqrt(dh as f64);

    let qw = tape.param(store, block.qw);
    let qb = tape.param(store, block.qb);
    let kw = tape.param(store, block.kw);
    let kb = tape.param(store, block.kb);
    let vw = tape.param(store, block.vw);
    let vb = tape.param(store, block.vb);
    let q = tape.matmul(x, qw)?;
    let q = tape.add_row(q, qb)?;
    let k = tape.matmul(x, kw)?;
    let k = tape.add_row(k, kb)?;
    let v = tape.matmul(x, vw)?;
    let v = tape.add_row(v, vb)?;

    let mut head_outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dh, dh)?;
        let kh = tape.slice_cols(k, h * dh, dh)?;
        let vh = tape.slice_cols(v, h * dh, dh)?;
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt)?;
        let scores = tape.scale(scores, scale);
        let attn = tape.softmax_rows(scores);
        head_outs.push(tape.matmul(attn, vh)?);
    }
    let cat = if head_outs.len() == 1 {
        head_outs[0]
    } else {
        tape.concat_cols(&head_outs)?
    };
    let ow = tape.param(store, block.ow);
    let ob = tape.param(store, block.ob);
    let o = tape.matmul(cat, ow)?;
    let o = tape.add_row(o, ob)?;

    let r1 = tape.add(x, o)?;
    let g1 = tape.param(store, block.ln1_gain);
    let b1 = tape.param(store, block.ln1_shift);
    let n1 = tape.layer_norm(r1, g1, b1, LAYER_NORM_EPS)?;

    let fw1 = tape.param(store, block.ffn_w1);
    let fb1 = tape.param(store, block.ffn_b1);
    let fw2 = tape.param(store, block.ffn_w2);
    let fb2 = tape.param(store, block.ffn_b2);
    let f = tape.matmul(n1, fw1)?;
    let f = tape.add_row(f, fb1)?;
    let f = tape.relu(f);
    let f = tape.matmul(f, fw2)?;
    let f = tape.add_row(f, fb2)?;

    let r2 = tape.add(n1, f)?;
    let g2 = tape.param(store, block.ln2_gain);
    let b2 = tape.param(store, block.ln2_shift);
    tape.layer_norm(r2, g2, b2, LAYER_NORM_EPS)
}

/// Architecture of one sequence classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    /// Width of the raw per-position input (one-hot block plus any
    /// conditioning columns).
    pub input_width: usize,
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn: usize,
    pub classes: usize,
    /// Learned positional embedding; off by default since byte windows are
    /// cut at arbitrary offsets.
    pub positions: Option<usize>,
}

/// A full classifier: bias-free embedding, attention stack, mean pool,
/// class head.
#[derive(Debug, Clone)]
pub struct ClassifierNet {
    pub cfg: NetConfig,
    pub first: ParamId,
    pub pos: Option<ParamId>,
    pub blocks: Vec<AttentionBlockParams>,
    pub head_w: ParamId,
    pub head_b: ParamId,
}

impl ClassifierNet {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        prefix: &str,
        cfg: NetConfig,
    ) -> Result<Self> {
        if cfg.heads == 0 || cfg.d_model % cfg.heads != 0 {
            return Err(Error::Config(format!(
                "model width {} not divisible by {} heads",
                cfg.d_model, cfg.heads
            )));
        }
        if cfg.classes < 2 {
            return Err(Error::Config(
                "a classifier needs at least 2 classes".into(),
            ));
        }
        let first = init_matrix(
            store,
            rng,
            format!("{prefix}.first"),
            cfg.input_width,
            cfg.d_model,
        );
        let pos = cfg
            .positions
            .map(|n| init_matrix(store, rng, format!("{prefix}.pos"), n, cfg.d_model));
        let blocks = (0..cfg.blocks)
            .map(|b| {
                AttentionBlockParams::new(
                    store,
                    rng,
                    &format!("{prefix}.blk{b}"),
                    cfg.d_model,
                    cfg.ffn,
                )
            })
            .collect();
        let head_w = init_matrix(
            store,
            rng,
            format!("{prefix}.head_w"),
            cfg.d_model,
            cfg.classes,
        );
        let head_b = init_bias(store, format!("{prefix}.head_b"), cfg.classes);
        Ok(ClassifierNet {
            cfg,
            first,
            pos,
            blocks,
            head_w,
            head_b,
        })
    }

    /// Attention stack over an already-embedded sequence.
    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, mut x: NodeId) -> Result<NodeId> {
        if let Some(pos) = self.pos {
            let p = tape.param(store, pos);
            let n = tape.value(x).rows();
            let p = tape.slice_rows(p, 0, n)?;
            x = tape.add(x, p)?;
        }
        for block in &self.blocks {
            x = attention_block_forward(tape, store, block, x, self.cfg.heads)?;
        }
        Ok(x)
    }

    /// Mean pool, class head, softmax. Returns a `[1 x classes]` node.
    pub fn head(&self, tape: &mut Tape, store: &ParamStore, encoded: NodeId) -> Result<NodeId> {
        let pooled = tape.mean_rows(encoded);
        let hw = tape.param(store, self.head_w);
        let hb = tape.param(store, self.head_b);
        let logits = tape.matmul(pooled, hw)?;
        let logits = tape.add_row(logits, hb)?;
        Ok(tape.softmax_rows(logits))
    }

    /// Every parameter of this net, in declaration order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.first];
        if let Some(p) = self.pos {
            ids.push(p);
        }
        for b in &self.blocks {
            ids.extend_from_slice(&[
                b.qw,
                b.qb,
                b.kw,
                b.kb,
                b.vw,
                b.vb,
                b.ow,
                b.ob,
                b.ln1_gain,
                b.ln1_shift,
                b.ffn_w1,
                b.ffn_b1,
                b.ffn_w2,
                b.ffn_b2,
                b.ln2_gain,
                b.ln2_shift,
            ]);
        }
        ids.push(self.head_w);
        ids.push(self.head_b);
        ids
    }
}
