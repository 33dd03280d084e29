//! The conditioned classifier: tokenization, one or two sub-nets whose class
//! distributions are broadcast-concatenated onto the main net's input, and
//! the bias-free first layer that splits exactly into an input term plus a
//! conditioning term.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{NodeId, ParamId, ParamStore, Tape};
use crate::nn::{ClassifierNet, NetConfig};
use crate::rng::Rng;
use crate::wire::{Reader, Writer};
use crate::{Error, Result, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CFGM";
pub const CHECKPOINT_VERSION: u16 = 1;

/// A byte window grouped into fixed-size blocks, each block one-hot encoded
/// byte by byte (width `256 * block_size`). The trailing partial block is
/// zero-padded. The dense matrix is materialized on demand; the forward pass
/// works from the indices.
#[derive(Debug, Clone)]
pub struct BlockSequence {
    bytes: Vec<u8>,
    block_size: usize,
    positions: usize,
    /// One-hot row indices per position, shared with the autodiff tape.
    rows: Arc<Vec<Vec<usize>>>,
}

/// Groups `window` into blocks of `block_size` bytes; each byte becomes a
/// 256-wide one-hot slice of its block vector.
pub fn tokenize_bytes(window: &[u8], block_size: usize) -> Result<BlockSequence> {
    if window.is_empty() {
        return Err(Error::Input("cannot tokenize an empty window".into()));
    }
    if block_size == 0 {
        return Err(Error::Config("block size must be at least 1".into()));
    }
    let positions = window.len().div_ceil(block_size);
    let mut rows = Vec::with_capacity(positions);
    for chunk in window.chunks(block_size) {
        let idx: Vec<usize> = chunk
            .iter()
            .enumerate()
            .map(|(j, &b)| j * 256 + b as usize)
            .collect();
        rows.push(idx);
    }
    Ok(BlockSequence {
        bytes: window.to_vec(),
        block_size,
        positions,
        rows: Arc::new(rows),
    })
}

impl BlockSequence {
    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// One-hot width of each position vector.
    pub fn width(&self) -> usize {
        256 * self.block_size
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn one_hot_rows(&self) -> &Arc<Vec<Vec<usize>>> {
        &self.rows
    }

    /// Dense `[positions x width]` one-hot matrix.
    pub fn to_dense(&self) -> Tensor {
        let w = self.width();
        let mut data = vec![0.0; self.positions * w];
        for (i, idx) in self.rows.iter().enumerate() {
            for &r in idx.iter() {
                data[i * w + r] = 1.0;
            }
        }
        Tensor::matrix(self.positions, w, data).expect("sized")
    }
}

/// Appends each conditioning vector to every row of `x`, in order.
pub fn broadcast_concat(x: &Tensor, ys: &[Tensor]) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    let ks: Vec<usize> = ys.iter().map(|y| y.numel()).collect();
    let total = d + ks.iter().sum::<usize>();
    let mut out = vec![0.0; n * total];
    for i in 0..n {
        out[i * total..i * total + d].copy_from_slice(&x.data()[i * d..(i + 1) * d]);
        let mut off = d;
        for (y, &k) in ys.iter().zip(ks.iter()) {
            out[i * total + off..i * total + off + k].copy_from_slice(y.data());
            off += k;
        }
    }
    Tensor::matrix(n, total, out)
}

/// Whether the sub-net reads the same window as the main net or a separate
/// source window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentrifugeMode {
    SelfInput,
    SourceTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentrifugeConfig {
    pub mode: CentrifugeMode,
    /// Bytes per input window.
    pub window_len: usize,
    /// Bytes grouped into one position.
    pub block_size: usize,
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn: usize,
    /// Learned positional embedding (off by default).
    pub positional: bool,
    pub main_classes: usize,
    /// One entry per sub-net; the value is that head's class count, which is
    /// also the width of its conditioning vector.
    pub sub_classes: Vec<usize>,
}

impl CentrifugeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::Config("window length must be at least 1".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size must be at least 1".into()));
        }
        if self.sub_classes.is_empty() || self.sub_classes.len() > 2 {
            return Err(Error::Config(format!(
                "sub-net count must be 1 or 2, got {}",
                self.sub_classes.len()
            )));
        }
        if self.main_classes < 2 || self.sub_classes.iter().any(|&k| k < 2) {
            return Err(Error::Config("every head needs at least 2 classes".into()));
        }
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "model width {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    pub fn positions(&self) -> usize {
        self.window_len.div_ceil(self.block_size)
    }

    /// One-hot width of a position vector.
    pub fn input_width(&self) -> usize {
        256 * self.block_size
    }

    /// Total conditioning width appended by the broadcast concatenator.
    pub fn cond_width(&self) -> usize {
        self.sub_classes.iter().sum()
    }
}

impl Default for CentrifugeConfig {
    fn default() -> Self {
        CentrifugeConfig {
            mode: CentrifugeMode::SelfInput,
            window_len: 235,
            block_size: 1,
            d_model: 64,
            heads: 4,
            blocks: 2,
            ffn: 128,
            positional: false,
            main_classes: 2,
            sub_classes: vec![2],
        }
    }
}

/// Full forward output at the tensor level.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub y_main: Tensor,
    pub y_subs: Vec<Tensor>,
    pub x_prime: Tensor,
}

/// Node handles for a forward pass still on the tape.
pub struct ForwardNodes {
    pub y_main: NodeId,
    pub y_subs: Vec<NodeId>,
    pub x_prime: NodeId,
}

/// The composed model: sub-net(s), broadcast concatenator, main net.
#[derive(Debug, Clone)]
pub struct CentrifugeModel {
    pub config: CentrifugeConfig,
    pub store: ParamStore,
    pub subs: Vec<ClassifierNet>,
    pub main: ClassifierNet,
}

impl CentrifugeModel {
    pub fn new(config: CentrifugeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed);
        let positions = config.positions();
        let mut subs = Vec::with_capacity(config.sub_classes.len());
        for (j, &k) in config.sub_classes.iter().enumerate() {
            let cfg = NetConfig {
                input_width: config.input_width(),
                d_model: config.d_model,
                heads: config.heads,
                blocks: config.blocks,
                ffn: config.ffn,
                classes: k,
                positions: config.positional.then_some(positions),
            };
            subs.push(ClassifierNet::new(
                &mut store,
                &mut rng,
                &format!("sub{j}"),
                cfg,
            )?);
        }
        // The main net's first layer also absorbs the conditioning columns,
        // and must stay bias-free so the two-term split is exact.
        let main_cfg = NetConfig {
            input_width: config.input_width() + config.cond_width(),
            d_model: config.d_model,
            heads: config.heads,
            blocks: config.blocks,
            ffn: config.ffn,
            classes: config.main_classes,
            positions: config.positional.then_some(positions),
        };
        let main = ClassifierNet::new(&mut store, &mut rng, "main", main_cfg)?;
        Ok(CentrifugeModel {
            config,
            store,
            subs,
            main,
        })
    }

    pub fn sub_param_ids(&self) -> Vec<ParamId> {
        self.subs.iter().flat_map(|s| s.param_ids()).collect()
    }

    pub fn main_param_ids(&self) -> Vec<ParamId> {
        self.main.param_ids()
    }

    fn check_window(&self, seq: &BlockSequence, role: &str) -> Result<()> {
        if seq.block_size() != self.config.block_size {
            return Err(Error::Config(format!(
                "{role} tokenized with block size {}, model expects {}",
                seq.block_size(),
                self.config.block_size
            )));
        }
        if seq.positions() != self.config.positions() {
            return Err(Error::Shape(format!(
                "{role} has {} positions, model expects {}",
                seq.positions(),
                self.config.positions()
            )));
        }
        Ok(())
    }

    /// Sub-net `j` forward: class probabilities as a `[1 x k_j]` node.
    pub fn forward_sub(&self, tape: &mut Tape, x2: &BlockSequence, j: usize) -> Result<NodeId> {
        let sub = self
            .subs
            .get(j)
            .ok_or_else(|| Error::Input(format!("sub-net index {j} out of {}", self.subs.len())))?;
        self.check_window(x2, "sub-net input")?;
        let w = tape.param(&self.store, sub.first);
        let embedded = tape.gather_rows_sum(w, x2.one_hot_rows().clone())?;
        let encoded = sub.encode(tape, &self.store, embedded)?;
        sub.head(tape, &self.store, encoded)
    }

    /// Main net forward under explicit conditioning vectors (either sub-net
    /// outputs or ground-truth one-hots). Returns the class distribution and
    /// the first-layer output.
    pub fn forward_main(
        &self,
        tape: &mut Tape,
        x1: &BlockSequence,
        cond: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        self.check_window(x1, "main input")?;
        if cond.len() != self.config.sub_classes.len() {
            return Err(Error::Config(format!(
                "{} conditioning vectors for {} sub-nets",
                cond.len(),
                self.config.sub_classes.len()
            )));
        }
        for (c, &k) in cond.iter().zip(self.config.sub_classes.iter()) {
            let got = tape.value(*c).numel();
            if got != k {
                return Err(Error::Config(format!(
                    "conditioning width {got}, expected {k}"
                )));
            }
        }
        let d = self.config.input_width();
        let w = tape.param(&self.store, self.main.first);
        // x1 term: sparse one-hot product against the first d rows of W.
        let w_input = tape.slice_rows(w, 0, d)?;
        let mut x_prime = tape.gather_rows_sum(w_input, x1.one_hot_rows().clone())?;
        // Conditioning terms: y_j . W_j, broadcast-added onto every row.
        let mut off = d;
        for (&c, &k) in cond.iter().zip(self.config.sub_classes.iter()) {
            let w_cond = tape.slice_rows(w, off, k)?;
            let term = tape.matmul(c, w_cond)?;
            x_prime = tape.add_row(x_prime, term)?;
            off += k;
        }
        let encoded = self.main.encode(tape, &self.store, x_prime)?;
        let y_main = self.main.head(tape, &self.store, encoded)?;
        Ok((y_main, x_prime))
    }

    /// Full composition. In self mode `x2_list` is ignored and every sub-net
    /// reads `x1`; in source-target mode one window per sub-net is required.
    pub fn forward_centrifuge(
        &self,
        tape: &mut Tape,
        x1: &BlockSequence,
        x2_list: Option<&[BlockSequence]>,
    ) -> Result<ForwardNodes> {
        let mut y_subs = Vec::with_capacity(self.subs.len());
        match self.config.mode {
            CentrifugeMode::SelfInput => {
                for j in 0..self.subs.len() {
                    y_subs.push(self.forward_sub(tape, x1, j)?);
                }
            }
            CentrifugeMode::SourceTarget => {
                let sources = x2_list.ok_or_else(|| {
                    Error::Input("source-target mode needs explicit source windows".into())
                })?;
                if sources.len() != self.subs.len() {
                    return Err(Error::Input(format!(
                        "{} source windows for {} sub-nets",
                        sources.len(),
                        self.subs.len()
                    )));
                }
                for (j, x2) in sources.iter().enumerate() {
                    y_subs.push(self.forward_sub(tape, x2, j)?);
                }
            }
        }
        let (y_main, x_prime) = self.forward_main(tape, x1, &y_subs)?;
        Ok(ForwardNodes {
            y_main,
            y_subs,
            x_prime,
        })
    }

    /// Inference convenience: runs the composition on a private tape and
    /// returns plain tensors. Read-only, safe to call from several threads.
    pub fn infer(
        &self,
        x1: &BlockSequence,
        x2_list: Option<&[BlockSequence]>,
    ) -> Result<ForwardResult> {
        let mut tape = Tape::new();
        let nodes = self.forward_centrifuge(&mut tape, x1, x2_list)?;
        Ok(ForwardResult {
            y_main: tape.value(nodes.y_main).clone(),
            y_subs: nodes
                .y_subs
                .iter()
                .map(|&n| tape.value(n).clone())
                .collect(),
            x_prime: tape.value(nodes.x_prime).clone(),
        })
    }

    /// Both sides of the first-layer identity: the forward-path `x'` and the
    /// direct two-term evaluation `x1 . W_input + sum_j y_j . W_cond_j` over
    /// dense matrices. The two routes share no code.
    pub fn first_layer_decompose(
        &self,
        x1: &BlockSequence,
        y_subs: &[Tensor],
    ) -> Result<(Tensor, Tensor)> {
        self.check_window(x1, "main input")?;
        let mut tape = Tape::new();
        let cond: Vec<NodeId> = y_subs.iter().map(|y| tape.leaf(y.clone())).collect();
        let (_, x_prime) = self.forward_main(&mut tape, x1, &cond)?;
        let lhs = tape.value(x_prime).clone();

        let d = self.config.input_width();
        let w = self.store.value(self.main.first);
        let w_rows = w.cols();
        let dense = x1.to_dense();
        let w_input = slice_rows_dense(w, 0, d, w_rows);
        let mut rhs = dense.matmul(&w_input)?;
        let mut off = d;
        for (y, &k) in y_subs.iter().zip(self.config.sub_classes.iter()) {
            let w_cond = slice_rows_dense(w, off, k, w_rows);
            let row = Tensor::matrix(1, y.numel(), y.data().to_vec())?.matmul(&w_cond)?;
            let n = rhs.rows();
            let m = rhs.cols();
            let data = rhs.data_mut();
            for i in 0..n {
                for c in 0..m {
                    data[i * m + c] += row.data()[c];
                }
            }
            off += k;
        }
        Ok((lhs, rhs))
    }

    /// Serializes config and parameters (declaration order, little-endian).
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(CHECKPOINT_MAGIC);
        w.u16(CHECKPOINT_VERSION);
        w.u8(match self.config.mode {
            CentrifugeMode::SelfInput => 0,
            CentrifugeMode::SourceTarget => 1,
        });
        w.u8(self.config.sub_classes.len() as u8);
        w.u16(self.config.block_size as u16);
        w.u32(self.config.window_len as u32);
        w.u16(self.config.d_model as u16);
        w.u16(self.config.heads as u16);
        w.u16(self.config.blocks as u16);
        w.u16(self.config.ffn as u16);
        w.u8(self.config.positional as u8);
        w.u16(self.config.main_classes as u16);
        for &k in &self.config.sub_classes {
            w.u16(k as u16);
        }
        w.u32(self.store.len() as u32);
        for (_, p) in self.store.iter() {
            let shape = p.value.shape();
            w.u8(shape.len() as u8);
            for &dim in shape {
                w.u32(dim as u32);
            }
            for &v in p.value.data() {
                w.f64(v);
            }
        }
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r.bytes(4, "magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Integrity("bad checkpoint magic".into()));
        }
        let version = r.u16("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mode = match r.u8("mode")? {
            0 => CentrifugeMode::SelfInput,
            1 => CentrifugeMode::SourceTarget,
            m => return Err(Error::Integrity(format!("unknown mode {m}"))),
        };
        let sub_count = r.u8("sub-net count")? as usize;
        let block_size = r.u16("block size")? as usize;
        let window_len = r.u32("window length")? as usize;
        let d_model = r.u16("model width")? as usize;
        let heads = r.u16("heads")? as usize;
        let blocks = r.u16("blocks")? as usize;
        let ffn = r.u16("ffn width")? as usize;
        let positional = r.u8("positional flag")? != 0;
        let main_classes = r.u16("main classes")? as usize;
        let mut sub_classes = Vec::with_capacity(sub_count);
        for _ in 0..sub_count {
            sub_classes.push(r.u16("sub classes")? as usize);
        }
        let config = CentrifugeConfig {
            mode,
            window_len,
            block_size,
            d_model,
            heads,
            blocks,
            ffn,
            positional,
            main_classes,
            sub_classes,
        };
        let mut model = CentrifugeModel::new(config, 0)?;
        let declared = r.u32("parameter count")? as usize;
        if declared != model.store.len() {
            return Err(Error::Integrity(format!(
                "checkpoint has {declared} tensors, architecture needs {}",
                model.store.len()
            )));
        }
        for i in 0..model.store.len() {
            let rank = r.u8("tensor rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32("tensor dim")? as usize);
            }
            let expect = model.store.get(crate::autodiff::ParamId(i)).value.shape();
            if shape != expect {
                return Err(Error::Integrity(format!(
                    "tensor {i} has shape {shape:?}, architecture needs {expect:?}"
                )));
            }
            let numel: usize = shape.iter().product();
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(r.f64("tensor data")?);
            }
            let p = model.store.get_mut(crate::autodiff::ParamId(i));
            p.value = Tensor::new(shape, data)?;
        }
        if r.remaining() != 0 {
            return Err(Error::Integrity(format!(
                "{} trailing bytes after checkpoint payload",
                r.remaining()
            )));
        }
        Ok(model)
    }
}

fn slice_rows_dense(w: &Tensor, start: usize, len: usize, cols: usize) -> Tensor {
    let data = w.data()[start * cols..(start + len) * cols].to_vec();
    Tensor::matrix(len, cols, data).expect("sized")
}
