//! The six training procedures and their phase contracts.
//!
//! Every procedure is a sequence of phases; a phase fixes which parameter
//! set is trainable, which loss drives the updates, and where the main
//! net's conditioning vector comes from (the sub-net outputs or the
//! ground-truth one-hot). The per-regime phase tables:
//!
//! ```text
//!            pre-train            train
//! baseline   -                    both nets,  main loss
//! utl        sub net,  sub loss   main net,   main loss
//! dtl        main net, main loss  sub net,    main loss
//!            (truth conditioning)
//! uft        sub net,  sub loss   both nets,  main loss
//! dft        main net, main loss  both nets,  main loss
//!            (truth conditioning)
//! 2lf        -                    both nets,  main + beta * sub loss
//! ```
//!
//! Downstream pre-training feeds the ground-truth sub label to the
//! concatenator instead of running the sub-net; afterwards the frozen main
//! net acts as a loss function for the sub-net, which is how the sub-net
//! acquires the sub task without any sub-loss term.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{NodeId, Tape};
use crate::corpus::Sample;
use crate::metrics::{evaluate, Metrics};
use crate::model::{tokenize_bytes, BlockSequence, CentrifugeModel};
use crate::optim::{sgd_step_all, LRSchedule, OptimizerConfig};
use crate::rng::Rng;
use crate::schema::LabelSchema;
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    Baseline,
    Utl,
    Dtl,
    Uft,
    Dft,
    TwoLf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainedSet {
    Main,
    Sub,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Cross-entropy on the main head only.
    MainLoss,
    /// Cross-entropy on the sub head(s) only; the main net is not run.
    SubLoss,
    /// Main loss plus beta times the summed sub losses.
    JointLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondSource {
    /// The sub-nets run and their output distributions condition the main net.
    SubNets,
    /// The ground-truth sub labels are fed as hard one-hots; the sub-nets
    /// are not run at all.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSpec {
    pub trained: TrainedSet,
    pub loss: LossKind,
    pub cond: CondSource,
}

impl RegimeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(RegimeKind::Baseline),
            "utl" => Ok(RegimeKind::Utl),
            "dtl" => Ok(RegimeKind::Dtl),
            "uft" => Ok(RegimeKind::Uft),
            "dft" => Ok(RegimeKind::Dft),
            "2lf" => Ok(RegimeKind::TwoLf),
            other => Err(Error::Config(format!(
                "unknown regime '{other}' (baseline, utl, dtl, uft, dft, 2lf)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::Baseline => "baseline",
            RegimeKind::Utl => "utl",
            RegimeKind::Dtl => "dtl",
            RegimeKind::Uft => "uft",
            RegimeKind::Dft => "dft",
            RegimeKind::TwoLf => "2lf",
        }
    }

    pub fn all() -> [RegimeKind; 6] {
        [
            RegimeKind::Baseline,
            RegimeKind::Utl,
            RegimeKind::Dtl,
            RegimeKind::Uft,
            RegimeKind::Dft,
            RegimeKind::TwoLf,
        ]
    }

    /// The phase ledger: what is trained, with which loss, under which
    /// conditioning, in order.
    pub fn phases(&self) -> Vec<PhaseSpec> {
        use CondSource::*;
        use LossKind::*;
        use TrainedSet::*;
        match self {
            RegimeKind::Baseline => vec![PhaseSpec {
                trained: Both,
                loss: MainLoss,
                cond: SubNets,
            }],
            RegimeKind::Utl => vec![
                PhaseSpec {
                    trained: Sub,
                    loss: SubLoss,
                    cond: SubNets,
                },
                PhaseSpec {
                    trained: Main,
                    loss: MainLoss,
                    cond: SubNets,
                },
            ],
            RegimeKind::Dtl => vec![
                PhaseSpec {
                    trained: Main,
                    loss: MainLoss,
                    cond: Truth,
                },
                PhaseSpec {
                    trained: Sub,
                    loss: MainLoss,
                    cond: SubNets,
                },
            ],
            RegimeKind::Uft => vec![
                PhaseSpec {
                    trained: Sub,
                    loss: SubLoss,
                    cond: SubNets,
                },
                PhaseSpec {
                    trained: Both,
                    loss: MainLoss,
                    cond: SubNets,
                },
            ],
            RegimeKind::Dft => vec![
                PhaseSpec {
                    trained: Main,
                    loss: MainLoss,
                    cond: Truth,
                },
                PhaseSpec {
                    trained: Both,
                    loss: MainLoss,
                    cond: SubNets,
                },
            ],
            RegimeKind::TwoLf => vec![PhaseSpec {
                trained: Both,
                loss: JointLoss,
                cond: SubNets,
            }],
        }
    }

    pub fn phase_count(&self) -> usize {
        self.phases().len()
    }

    /// True when any phase reads the ground-truth sub labels or scores a
    /// sub loss. (Every regime still needs them for evaluation.)
    pub fn needs_sub_labels(&self) -> bool {
        self.phases().iter().any(|p| {
            p.cond == CondSource::Truth || matches!(p.loss, LossKind::SubLoss | LossKind::JointLoss)
        })
    }
}

/// Which procedure to run and with what per-phase budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    /// Sub-loss weight; only the joint loss reads it.
    pub beta: f64,
    pub phase_epochs: Vec<usize>,
    pub optimizer: Vec<OptimizerConfig>,
}

impl RegimeSpec {
    /// Splits a total epoch budget evenly across phases (first phase gets
    /// the remainder) and uses one optimizer config throughout.
    pub fn new(
        kind: RegimeKind,
        beta: f64,
        total_epochs: usize,
        opt: OptimizerConfig,
    ) -> Result<Self> {
        let phases = kind.phase_count();
        if total_epochs < phases {
            return Err(Error::Config(format!(
                "{} needs at least {phases} epochs, got {total_epochs}",
                kind.name()
            )));
        }
        let base = total_epochs / phases;
        let mut phase_epochs = vec![base; phases];
        phase_epochs[0] += total_epochs - base * phases;
        let spec = RegimeSpec {
            kind,
            beta,
            phase_epochs,
            optimizer: vec![opt; phases],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 {
            return Err(Error::Config(format!(
                "sub-loss weight must be non-negative, got {}",
                self.beta
            )));
        }
        let phases = self.kind.phase_count();
        if self.phase_epochs.len() != phases || self.optimizer.len() != phases {
            return Err(Error::Config(format!(
                "{} has {phases} phases, got {} epoch budgets and {} optimizer configs",
                self.kind.name(),
                self.phase_epochs.len(),
                self.optimizer.len()
            )));
        }
        if self.phase_epochs.iter().any(|&e| e == 0) {
            return Err(Error::Config("every phase needs at least one epoch".into()));
        }
        for o in &self.optimizer {
            o.validate()?;
        }
        Ok(())
    }
}

/// Per-run training knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub seed: u64,
    pub label_smoothing: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("mini-batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label smoothing factor {} outside [0, 1)",
                self.label_smoothing
            )));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            seed: 0,
            label_smoothing: 0.1,
        }
    }
}

/// Borrowed training/evaluation split plus its schema.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a [Sample],
    pub test: &'a [Sample],
    pub schema: &'a LabelSchema,
}

/// Result of one training run on one split.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: Metrics,
    /// Mean per-step (mini-batch) training loss, across all phases in order.
    pub step_losses: Vec<f64>,
}

/// Drives one model through the phases of a regime. Phases must run in
/// order; asking for phase `i` before phase `i - 1` finished is an error.
pub struct Trainer<'a> {
    model: &'a mut CentrifugeModel,
    data: TrainData<'a>,
    cfg: TrainConfig,
    tokens: Vec<BlockSequence>,
    rng: Rng,
    tape: Tape,
    pub step_losses: Vec<f64>,
    phases_done: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        model: &'a mut CentrifugeModel,
        data: TrainData<'a>,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if data.train.is_empty() {
            return Err(Error::Input("training set is empty".into()));
        }
        let heads = model.config.sub_classes.len();
        if data.schema.subs.len() != heads {
            return Err(Error::Schema(format!(
                "schema has {} sub heads, model has {heads}",
                data.schema.subs.len()
            )));
        }
        for (i, s) in data.train.iter().chain(data.test.iter()).enumerate() {
            if s.subs.len() != heads {
                return Err(Error::Input(format!(
                    "sample {i} carries {} sub labels, model needs {heads}",
                    s.subs.len()
                )));
            }
            if s.main as usize >= model.config.main_classes {
                return Err(Error::Schema(format!(
                    "sample {i} main label {} out of range",
                    s.main
                )));
            }
            for (j, &t) in s.subs.iter().enumerate() {
                if t as usize >= model.config.sub_classes[j] {
                    return Err(Error::Schema(format!(
                        "sample {i} sub label {t} out of range for head {j}"
                    )));
                }
            }
        }
        let tokens = data
            .train
            .iter()
            .map(|s| tokenize_bytes(&s.bytes, model.config.block_size))
            .collect::<Result<Vec<_>>>()?;
        let rng = Rng::derive(cfg.seed, 1);
        Ok(Trainer {
            model,
            data,
            cfg,
            tokens,
            rng,
            tape: Tape::new(),
            step_losses: Vec::new(),
            phases_done: 0,
        })
    }

    /// The model under training, for snapshot comparisons between phases.
    pub fn model_ref(&self) -> &CentrifugeModel {
        self.model
    }

    /// Runs phase `index` of the regime. Phases are strictly ordered.
    pub fn run_phase(&mut self, spec: &RegimeSpec, index: usize) -> Result<()> {
        spec.validate()?;
        let phases = spec.kind.phases();
        if index >= phases.len() {
            return Err(Error::Config(format!(
                "{} has {} phases, asked for {index}",
                spec.kind.name(),
                phases.len()
            )));
        }
        if index != self.phases_done {
            return Err(Error::State(format!(
                "phase {index} requested but {} phase(s) completed",
                self.phases_done
            )));
        }
        let phase = phases[index];
        if spec.kind.needs_sub_labels() && self.model.config.sub_classes.is_empty() {
            return Err(Error::Schema("regime needs sub labels".into()));
        }

        // Freeze everything except the set this phase trains.
        let sub_ids = self.model.sub_param_ids();
        let main_ids = self.model.main_param_ids();
        self.model.store.set_all_trainable(false);
        match phase.trained {
            TrainedSet::Main => self.model.store.set_trainable(&main_ids, true),
            TrainedSet::Sub => self.model.store.set_trainable(&sub_ids, true),
            TrainedSet::Both => self.model.store.set_all_trainable(true),
        }
        // Optimizer state does not leak across phases.
        self.model.store.reset_momentum();

        let epochs = spec.phase_epochs[index];
        let opt = spec.optimizer[index];
        let n = self.data.train.len();
        let steps_per_epoch = n.div_ceil(self.cfg.batch_size);
        let schedule = LRSchedule::new(opt.lr, epochs * steps_per_epoch)?;

        let mut order: Vec<usize> = (0..n).collect();
        let mut step = 0usize;
        for _ in 0..epochs {
            self.rng.shuffle(&mut order);
            for batch in order.chunks(self.cfg.batch_size) {
                self.model.store.zero_grads();
                let mut loss_sum = 0.0;
                for &i in batch {
                    let sample = &self.data.train[i];
                    self.tape.clear();
                    let loss = build_loss(
                        self.model,
                        &mut self.tape,
                        &phase,
                        sample,
                        &self.tokens[i],
                        spec.beta,
                        self.cfg.label_smoothing,
                    )?;
                    let value = self.tape.value(loss).data()[0];
                    if !value.is_finite() {
                        return Err(Error::State(format!(
                            "non-finite training loss {value} at step {step}"
                        )));
                    }
                    loss_sum += value;
                    self.tape.backward(loss, &mut self.model.store)?;
                }
                let mean = loss_sum / batch.len() as f64;
                self.model.store.scale_grads(1.0 / batch.len() as f64);
                sgd_step_all(&mut self.model.store, schedule.lr_at(step), &opt);
                self.step_losses.push(mean);
                step += 1;
            }
        }
        self.phases_done += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<RunOutcome> {
        // Leave the model fully thawed; freezing was a phase property.
        self.model.store.set_all_trainable(true);
        let metrics = evaluate(self.model, self.data.test, self.data.schema)?;
        Ok(RunOutcome {
            metrics,
            step_losses: self.step_losses,
        })
    }
}

/// One sample's loss under a phase contract.
fn build_loss(
    model: &CentrifugeModel,
    tape: &mut Tape,
    phase: &PhaseSpec,
    sample: &Sample,
    seq: &BlockSequence,
    beta: f64,
    smoothing: f64,
) -> Result<NodeId> {
    let heads = model.config.sub_classes.len();
    match phase.loss {
        LossKind::SubLoss => {
            let mut total: Option<NodeId> = None;
            for j in 0..heads {
                let y = model.forward_sub(tape, seq, j)?;
                let l = tape.ce_smoothed(y, sample.subs[j] as usize, smoothing)?;
                total = Some(match total {
                    Some(t) => tape.add(t, l)?,
                    None => l,
                });
            }
            Ok(total.expect("at least one sub-net"))
        }
        LossKind::MainLoss => {
            let cond = conditioning(model, tape, phase.cond, sample, seq)?;
            let (y_main, _) = model.forward_main(tape, seq, &cond)?;
            tape.ce_smoothed(y_main, sample.main as usize, smoothing)
        }
        LossKind::JointLoss => {
            let cond = conditioning(model, tape, phase.cond, sample, seq)?;
            let (y_main, _) = model.forward_main(tape, seq, &cond)?;
            let l_main = tape.ce_smoothed(y_main, sample.main as usize, smoothing)?;
            let mut l_sub: Option<NodeId> = None;
            for (j, &y) in cond.iter().enumerate() {
                let l = tape.ce_smoothed(y, sample.subs[j] as usize, smoothing)?;
                l_sub = Some(match l_sub {
                    Some(t) => tape.add(t, l)?,
                    None => l,
                });
            }
            let weighted = tape.scale(l_sub.expect("at least one sub-net"), beta);
            tape.add(l_main, weighted)
        }
    }
}

fn conditioning(
    model: &CentrifugeModel,
    tape: &mut Tape,
    cond: CondSource,
    sample: &Sample,
    seq: &BlockSequence,
) -> Result<Vec<NodeId>> {
    let heads = model.config.sub_classes.len();
    let mut out = Vec::with_capacity(heads);
    match cond {
        CondSource::SubNets => {
            for j in 0..heads {
                out.push(model.forward_sub(tape, seq, j)?);
            }
        }
        CondSource::Truth => {
            for (j, &k) in model.config.sub_classes.iter().enumerate() {
                let t = sample.subs[j] as usize;
                let mut row = vec![0.0; k];
                row[t] = 1.0;
                out.push(tape.leaf(Tensor::matrix(1, k, row)?));
            }
        }
    }
    Ok(out)
}

/// Runs every phase of a regime on one train/test split and evaluates.
pub fn train_regime(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    spec.validate()?;
    if spec.kind.needs_sub_labels() && data.train.iter().any(|s| s.subs.is_empty()) {
        return Err(Error::Input(format!(
            "regime {} needs sub labels on every sample",
            spec.kind.name()
        )));
    }
    let mut trainer = Trainer::new(model, data, *cfg)?;
    for index in 0..spec.kind.phase_count() {
        trainer.run_phase(spec, index)?;
    }
    trainer.finish()
}

pub fn train_baseline(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    expect_kind(spec, RegimeKind::Baseline)?;
    train_regime(model, data, spec, cfg)
}

pub fn train_utl(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    expect_kind(spec, RegimeKind::Utl)?;
    train_regime(model, data, spec, cfg)
}

pub fn train_dtl(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    expect_kind(spec, RegimeKind::Dtl)?;
    train_regime(model, data, spec, cfg)
}

pub fn train_uft(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    expect_kind(spec, RegimeKind::Uft)?;
    train_regime(model, data, spec, cfg)
}

pub fn train_dft(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    expect_kind(spec, RegimeKind::Dft)?;
    train_regime(model, data, spec, cfg)
}

pub fn train_2lf(
    model: &mut CentrifugeModel,
    data: TrainData<'_>,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    expect_kind(spec, RegimeKind::TwoLf)?;
    train_regime(model, data, spec, cfg)
}

fn expect_kind(spec: &RegimeSpec, kind: RegimeKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "spec is for {}, called the {} entry point",
            spec.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

/// Summary over folds: (metrics per fold, losses per fold).
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub outcome: RunOutcome,
}

/// Trains one fold of a stratified k-fold split. The model seed is
/// `seed + fold`, so folds are independent and reproducible in isolation.
pub fn run_fold(
    samples: &[Sample],
    schema: &LabelSchema,
    template: &crate::model::CentrifugeConfig,
    spec: &RegimeSpec,
    cfg: &TrainConfig,
    folds: usize,
    fold: usize,
) -> Result<(CentrifugeModel, RunOutcome)> {
    if fold >= folds {
        return Err(Error::Config(format!("fold {fold} out of {folds}")));
    }
    let labels: Vec<u16> = samples.iter().map(|s| s.main).collect();
    let splits = crate::metrics::kfold_split(&labels, folds, cfg.seed)?;
    let (train_idx, test_idx) = &splits[fold];
    let train: Vec<Sample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let test: Vec<Sample> = test_idx.iter().map(|&i| samples[i].clone()).collect();
    let fold_seed = cfg.seed.wrapping_add(fold as u64);
    let mut model = CentrifugeModel::new(template.clone(), fold_seed)?;
    let fold_cfg = TrainConfig {
        seed: fold_seed,
        ..*cfg
    };
    let data = TrainData {
        train: &train,
        test: &test,
        schema,
    };
    let outcome = train_regime(&mut model, data, spec, &fold_cfg)?;
    Ok((model, outcome))
}
