//! Acceptance suite: one test per verification criterion, each printing a
//! summary line (visible with `--nocapture`). The heavy training checks are
//! serialized behind a lock so they do not fight for the same cores.

mod common;

use std::fs;
use std::sync::Mutex;
use std::time::Instant;

use centrifuge_core::autodiff::{ParamId, Tape};
use centrifuge_core::corpus::SourceFormat;
use centrifuge_core::metrics::{mean_sd, Metrics};
use centrifuge_core::model::{
    tokenize_bytes, BlockSequence, CentrifugeConfig, CentrifugeMode, CentrifugeModel,
};
use centrifuge_core::nn::{ce_label_smoothed, softmax};
use centrifuge_core::object::extract_code_section;
use centrifuge_core::optim::{cosine_lr, LRSchedule, OptimizerConfig};
use centrifuge_core::regimes::{
    run_fold, CondSource, LossKind, RegimeKind, RegimeSpec, TrainConfig, TrainData, TrainedSet,
    Trainer,
};
use centrifuge_core::rng::Rng;
use centrifuge_core::synth::{synth_corpus, SubLabeling, SyntheticSpec};
use centrifuge_core::Tensor;

use common::{
    build_coff, build_elf, centrifuge, reference_coff_dump, reference_elf_dump, stderr_of,
    stdout_of, PlannedSection,
};

/// Guards the two long training checks.
static HEAVY: Mutex<()> = Mutex::new(());

// ---------------------------------------------------------------------------
// 1. First-layer split exactness
// ---------------------------------------------------------------------------

#[test]
fn first_layer_split_exact_over_100_random_models() {
    let mut rng = Rng::new(0xACC1);
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let two_subs = trial % 3 == 2;
        let block_size = 1 + rng.below(3) as usize;
        let window_len = block_size * (2 + rng.below(6) as usize);
        let config = CentrifugeConfig {
            mode: CentrifugeMode::SelfInput,
            window_len,
            block_size,
            d_model: 8,
            heads: 2,
            blocks: 1,
            ffn: 8,
            positional: false,
            main_classes: 3,
            sub_classes: if two_subs { vec![2, 4] } else { vec![3] },
        };
        let model = CentrifugeModel::new(config.clone(), 0xBEEF + trial).unwrap();
        let window: Vec<u8> = (0..window_len).map(|_| rng.below(256) as u8).collect();
        let seq = tokenize_bytes(&window, block_size).unwrap();
        let conds: Vec<Tensor> = config
            .sub_classes
            .iter()
            .map(|&k| {
                let logits: Vec<f64> = (0..k).map(|_| rng.uniform(-3.0, 3.0)).collect();
                softmax(&Tensor::vector(logits)).unwrap()
            })
            .collect();
        let (lhs, rhs) = model.first_layer_decompose(&seq, &conds).unwrap();
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    println!("first-layer split: max |forward - two-term| = {worst:.3e} over 100 models");
    assert!(worst <= 1e-6);
}

// ---------------------------------------------------------------------------
// 2. Gradient fidelity on 20 random small models
// ---------------------------------------------------------------------------

fn joint_loss_node(
    model: &CentrifugeModel,
    tape: &mut Tape,
    seq: &BlockSequence,
    t_main: usize,
    t_subs: &[usize],
) -> centrifuge_core::autodiff::NodeId {
    let fwd = model.forward_centrifuge(tape, seq, None).unwrap();
    let l_main = tape.ce_smoothed(fwd.y_main, t_main, 0.1).unwrap();
    let mut l_sub = None;
    for (j, &y) in fwd.y_subs.iter().enumerate() {
        let l = tape.ce_smoothed(y, t_subs[j], 0.1).unwrap();
        l_sub = Some(match l_sub {
            Some(t) => tape.add(t, l).unwrap(),
            None => l,
        });
    }
    let weighted = tape.scale(l_sub.unwrap(), 0.7);
    tape.add(l_main, weighted).unwrap()
}

#[test]
fn gradient_fidelity_on_20_random_models() {
    let mut worst_overall = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = Rng::new(0x60AD + seed);
        let two_subs = seed % 3 == 2;
        let config = CentrifugeConfig {
            mode: CentrifugeMode::SelfInput,
            window_len: 4 + rng.below(3) as usize,
            block_size: if two_subs {
                1
            } else {
                1 + rng.below(2) as usize
            },
            d_model: 4,
            heads: 2,
            blocks: 1 + rng.below(2) as usize,
            ffn: 8,
            positional: false,
            main_classes: 3,
            sub_classes: if two_subs { vec![2, 3] } else { vec![2] },
        };
        let mut model = CentrifugeModel::new(config.clone(), seed ^ 0x77).unwrap();
        assert!(model.store.total_scalars() <= 5000);

        let window: Vec<u8> = (0..config.window_len)
            .map(|_| rng.below(256) as u8)
            .collect();
        let seq = tokenize_bytes(&window, config.block_size).unwrap();
        let t_main = rng.below(3) as usize;
        let t_subs: Vec<usize> = config
            .sub_classes
            .iter()
            .map(|&k| rng.below(k as u64) as usize)
            .collect();

        model.store.zero_grads();
        let mut tape = Tape::new();
        let loss = joint_loss_node(&model, &mut tape, &seq, t_main, &t_subs);
        tape.backward(loss, &mut model.store).unwrap();
        let grads: Vec<Tensor> = model.store.iter().map(|(_, p)| p.grad.clone()).collect();

        let h = 1e-5;
        let mut worst = 0.0f64;
        for pid in 0..model.store.len() {
            for i in 0..model.store.get(ParamId(pid)).value.numel() {
                let orig = model.store.get(ParamId(pid)).value.data()[i];
                let eval_at = |m: &mut CentrifugeModel, v: f64| {
                    m.store.get_mut(ParamId(pid)).value.data_mut()[i] = v;
                    let mut t = Tape::new();
                    let l = joint_loss_node(m, &mut t, &seq, t_main, &t_subs);
                    t.value(l).data()[0]
                };
                let up = eval_at(&mut model, orig + h);
                let down = eval_at(&mut model, orig - h);
                model.store.get_mut(ParamId(pid)).value.data_mut()[i] = orig;
                let fd = (up - down) / (2.0 * h);
                let analytic = grads[pid].data()[i];
                // The denominator floor keeps near-zero gradients from being
                // compared below the central difference's own truncation
                // noise (~1e-9 absolute at this step size).
                let denom = analytic.abs().max(fd.abs()).max(1e-4);
                worst = worst.max((analytic - fd).abs() / denom);
            }
        }
        worst_overall = worst_overall.max(worst);
        assert!(worst < 1e-4, "model {seed}: max relative error {worst:e}");
    }
    println!("gradient fidelity: max relative error {worst_overall:.3e} over 20 models");
}

// ---------------------------------------------------------------------------
// 3. Regime contracts, bitwise
// ---------------------------------------------------------------------------

fn contract_setup() -> (
    Vec<centrifuge_core::corpus::Sample>,
    centrifuge_core::schema::LabelSchema,
    CentrifugeConfig,
) {
    let spec = SyntheticSpec::default_desk(0xC0);
    let (samples, schema) = synth_corpus(&spec, 12, 16, SubLabeling::Generator).unwrap();
    let config = CentrifugeConfig {
        mode: CentrifugeMode::SelfInput,
        window_len: 16,
        block_size: 2,
        d_model: 8,
        heads: 2,
        blocks: 1,
        ffn: 16,
        positional: false,
        main_classes: schema.main.len(),
        sub_classes: schema.sub_counts(),
    };
    (samples, schema, config)
}

#[test]
fn regime_contracts_hold_bitwise() {
    let (samples, schema, config) = contract_setup();
    let cfg = TrainConfig {
        batch_size: 16,
        seed: 40,
        label_smoothing: 0.1,
    };
    let opt = OptimizerConfig::new(0.05, 1e-4, 0.9).unwrap();
    let data = TrainData {
        train: &samples,
        test: &samples,
        schema: &schema,
    };

    // Upstream transfer: phase 2 leaves every sub-net weight bit-identical.
    {
        let mut model = CentrifugeModel::new(config.clone(), 1).unwrap();
        let spec = RegimeSpec::new(RegimeKind::Utl, 1.0, 2, opt).unwrap();
        let mut trainer = Trainer::new(&mut model, data, cfg).unwrap();
        trainer.run_phase(&spec, 0).unwrap();
        let ids = trainer_model(&trainer).sub_param_ids();
        let before: Vec<Tensor> = ids
            .iter()
            .map(|&id| trainer_model(&trainer).store.get(id).value.clone())
            .collect();
        trainer.run_phase(&spec, 1).unwrap();
        for (id, snap) in ids.iter().zip(before.iter()) {
            assert!(trainer_model(&trainer).store.get(*id).value.bits_eq(snap));
        }
    }

    // Downstream transfer: phase 2 leaves every main-net weight bit-identical.
    {
        let mut model = CentrifugeModel::new(config.clone(), 2).unwrap();
        let spec = RegimeSpec::new(RegimeKind::Dtl, 1.0, 2, opt).unwrap();
        let mut trainer = Trainer::new(&mut model, data, cfg).unwrap();
        trainer.run_phase(&spec, 0).unwrap();
        let ids = trainer_model(&trainer).main_param_ids();
        let before: Vec<Tensor> = ids
            .iter()
            .map(|&id| trainer_model(&trainer).store.get(id).value.clone())
            .collect();
        trainer.run_phase(&spec, 1).unwrap();
        for (id, snap) in ids.iter().zip(before.iter()) {
            assert!(trainer_model(&trainer).store.get(*id).value.bits_eq(snap));
        }
    }

    // Joint training with zero sub-loss weight reproduces the plain run's
    // per-step loss sequence bit for bit.
    {
        let mut a = CentrifugeModel::new(config.clone(), 3).unwrap();
        let spec_base = RegimeSpec::new(RegimeKind::Baseline, 1.0, 2, opt).unwrap();
        let out_a =
            centrifuge_core::regimes::train_baseline(&mut a, data, &spec_base, &cfg).unwrap();
        let mut b = CentrifugeModel::new(config.clone(), 3).unwrap();
        let mut spec_zero = RegimeSpec::new(RegimeKind::TwoLf, 0.0, 2, opt).unwrap();
        spec_zero.beta = 0.0;
        let out_b = centrifuge_core::regimes::train_2lf(&mut b, data, &spec_zero, &cfg).unwrap();
        assert_eq!(out_a.step_losses.len(), out_b.step_losses.len());
        for (x, y) in out_a.step_losses.iter().zip(out_b.step_losses.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    // The phase ledger, encoded as data.
    {
        use CondSource::*;
        use LossKind::*;
        use TrainedSet::*;
        let expected: [(&str, Vec<(TrainedSet, LossKind, CondSource)>); 6] = [
            ("baseline", vec![(Both, MainLoss, SubNets)]),
            (
                "utl",
                vec![(Sub, SubLoss, SubNets), (Main, MainLoss, SubNets)],
            ),
            (
                "dtl",
                vec![(Main, MainLoss, Truth), (Sub, MainLoss, SubNets)],
            ),
            (
                "uft",
                vec![(Sub, SubLoss, SubNets), (Both, MainLoss, SubNets)],
            ),
            (
                "dft",
                vec![(Main, MainLoss, Truth), (Both, MainLoss, SubNets)],
            ),
            ("2lf", vec![(Both, JointLoss, SubNets)]),
        ];
        for (name, phases) in expected {
            let kind = RegimeKind::parse(name).unwrap();
            let got: Vec<(TrainedSet, LossKind, CondSource)> = kind
                .phases()
                .iter()
                .map(|p| (p.trained, p.loss, p.cond))
                .collect();
            assert_eq!(got, phases, "phase ledger for {name}");
        }
    }
    println!("regime contracts: freezing, zero-beta equivalence and phase ledger all hold");
}

// The Trainer keeps the model borrowed; peek through the borrow for
// snapshot comparisons.
fn trainer_model<'a>(t: &'a Trainer<'_>) -> &'a CentrifugeModel {
    t.model_ref()
}

// ---------------------------------------------------------------------------
// 4. Desk-scale comparison of all six regimes
// ---------------------------------------------------------------------------

struct RegimeRow {
    kind: RegimeKind,
    main_mean: f64,
    sub_mean: f64,
    main_sd: f64,
    sub_sd: f64,
}

fn desk_model_config(schema: &centrifuge_core::schema::LabelSchema) -> CentrifugeConfig {
    CentrifugeConfig {
        mode: CentrifugeMode::SelfInput,
        window_len: 64,
        block_size: 4,
        d_model: 32,
        heads: 4,
        blocks: 1,
        ffn: 64,
        positional: false,
        main_classes: schema.main.len(),
        sub_classes: schema.sub_counts(),
    }
}

/// Runs `folds` folds of each listed regime over two worker threads and
/// returns fold metrics per regime, in input order.
fn run_jobs(
    samples: &[centrifuge_core::corpus::Sample],
    schema: &centrifuge_core::schema::LabelSchema,
    config: &CentrifugeConfig,
    specs: &[RegimeSpec],
    cfg: &TrainConfig,
    folds: usize,
) -> Vec<Vec<Metrics>> {
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|r| (0..folds).map(move |f| (r, f)))
        .collect();
    let queue = Mutex::new(jobs.into_iter().collect::<Vec<_>>());
    let results: Mutex<Vec<Vec<Option<Metrics>>>> =
        Mutex::new(vec![vec![None; folds]; specs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..2 {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop();
                let Some((r, f)) = job else { break };
                let (_, outcome) =
                    run_fold(samples, schema, config, &specs[r], cfg, folds, f).unwrap();
                results.lock().unwrap()[r][f] = Some(outcome.metrics);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|folds| folds.into_iter().map(|m| m.unwrap()).collect())
        .collect()
}

#[test]
fn desk_scale_regime_comparison() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let started = Instant::now();

    let spec = SyntheticSpec::default_desk(7);
    let (samples, schema) = synth_corpus(&spec, 2000, 64, SubLabeling::Generator).unwrap();
    assert_eq!(samples.len(), 24000);
    assert_eq!(schema.main.len(), 12);
    assert_eq!(schema.subs[0].len(), 4);

    let config = desk_model_config(&schema);
    let opt = OptimizerConfig::new(0.025, 1e-4, 0.9).unwrap();
    let cfg = TrainConfig {
        batch_size: 64,
        seed: 7,
        label_smoothing: 0.1,
    };
    let kinds = RegimeKind::all();
    let specs: Vec<RegimeSpec> = kinds
        .iter()
        .map(|&kind| {
            let epochs = match kind.phase_count() {
                1 => 4,
                _ => 6,
            };
            RegimeSpec::new(kind, 1.0, epochs, opt).unwrap()
        })
        .collect();

    let folds = 4;
    let all = run_jobs(&samples, &schema, &config, &specs, &cfg, folds);

    let mut rows = Vec::new();
    for (kind, fold_metrics) in kinds.iter().zip(all.iter()) {
        let mains: Vec<f64> = fold_metrics.iter().map(|m| m.main_acc).collect();
        let subs: Vec<f64> = fold_metrics.iter().map(|m| m.sub_acc[0]).collect();
        let (main_mean, main_sd) = mean_sd(&mains);
        let (sub_mean, sub_sd) = mean_sd(&subs);
        rows.push(RegimeRow {
            kind: *kind,
            main_mean,
            sub_mean,
            main_sd,
            sub_sd,
        });
    }
    let elapsed = started.elapsed().as_secs_f64();
    for row in &rows {
        println!(
            "{:>8}: main {:.4} ± {:.4}   sub {:.4} ± {:.4}",
            row.kind.name(),
            row.main_mean,
            row.main_sd,
            row.sub_mean,
            row.sub_sd
        );
    }
    println!("desk-scale comparison finished in {elapsed:.0}s");

    let by = |kind: RegimeKind| rows.iter().find(|r| r.kind == kind).unwrap();
    // (a) Every regime solves the main task.
    for row in &rows {
        assert!(
            row.main_mean >= 0.95,
            "{} main accuracy {:.4}",
            row.kind.name(),
            row.main_mean
        );
    }
    // (b) Plain joint training leaves the sub head near chance (4 classes).
    assert!(
        by(RegimeKind::Baseline).sub_mean < 0.5,
        "baseline sub accuracy {:.4} should sit near chance",
        by(RegimeKind::Baseline).sub_mean
    );
    // (c) Downstream transfer acquires the sub task with no sub-loss term.
    assert!(
        by(RegimeKind::Dtl).sub_mean >= 0.90,
        "dtl sub accuracy {:.4}",
        by(RegimeKind::Dtl).sub_mean
    );
    // (d) Fine-tuning can only lose sub accuracy relative to freezing.
    assert!(by(RegimeKind::Utl).sub_mean >= by(RegimeKind::Uft).sub_mean);
    assert!(by(RegimeKind::Dtl).sub_mean >= by(RegimeKind::Dft).sub_mean);
    // Pre-training the sub net solves the separable sub task outright, and
    // fine-tuning the whole model afterwards does not cost the main task
    // more than a rounding error.
    assert!(by(RegimeKind::Utl).sub_mean >= 0.95);
    assert!(by(RegimeKind::Uft).main_mean >= by(RegimeKind::Baseline).main_mean - 0.02);
    // The whole comparison stays inside the desk-scale budget.
    assert!(elapsed < 1800.0, "comparison took {elapsed:.0}s");
}

// ---------------------------------------------------------------------------
// 5. Two-sub-net composition
// ---------------------------------------------------------------------------

#[test]
fn two_sub_net_downstream_transfer() {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let started = Instant::now();

    let spec = SyntheticSpec::default_desk(7);
    let (samples, schema) = synth_corpus(&spec, 2000, 64, SubLabeling::StyleAndGenerator).unwrap();
    let config = desk_model_config(&schema);
    assert_eq!(config.sub_classes, vec![3, 4]);

    let opt = OptimizerConfig::new(0.025, 1e-4, 0.9).unwrap();
    let cfg = TrainConfig {
        batch_size: 64,
        seed: 7,
        label_smoothing: 0.1,
    };
    // Two conditioning heads give the frozen-main phase a bigger simplex to
    // search; it converges reliably with a longer second phase.
    let mut spec_dtl = RegimeSpec::new(RegimeKind::Dtl, 1.0, 11, opt).unwrap();
    spec_dtl.phase_epochs = vec![3, 8];
    let folds = 4;
    let all = run_jobs(&samples, &schema, &config, &[spec_dtl], &cfg, folds);

    let mains: Vec<f64> = all[0].iter().map(|m| m.main_acc).collect();
    let style: Vec<f64> = all[0].iter().map(|m| m.sub_acc[0]).collect();
    let gen: Vec<f64> = all[0].iter().map(|m| m.sub_acc[1]).collect();
    let (main_mean, _) = mean_sd(&mains);
    let (style_mean, _) = mean_sd(&style);
    let (gen_mean, _) = mean_sd(&gen);
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "two sub-nets (dtl): main {main_mean:.4}  style head {style_mean:.4}  generator head {gen_mean:.4}  ({elapsed:.0}s)"
    );
    assert!(style_mean >= 0.90, "style head {style_mean:.4}");
    assert!(gen_mean >= 0.90, "generator head {gen_mean:.4}");
    assert!(elapsed < 2700.0, "two-sub-net run took {elapsed:.0}s");
}

// ---------------------------------------------------------------------------
// 6. Loss and schedule closed forms
// ---------------------------------------------------------------------------

#[test]
fn loss_and_schedule_closed_forms() {
    for &c in &[2usize, 3, 9, 51] {
        let probs = Tensor::vector(vec![1.0 / c as f64; c]);
        for &eps in &[0.0, 0.1, 0.3] {
            let l = ce_label_smoothed(&probs, c / 2, eps).unwrap();
            assert!(
                (l - (c as f64).ln()).abs() < 1e-9,
                "uniform loss for C={c}, eps={eps}: {l}"
            );
        }
    }
    let schedule = LRSchedule::new(0.025, 1000).unwrap();
    assert_eq!(cosine_lr(0, &schedule), 0.025);
    assert_eq!(cosine_lr(1000, &schedule), 0.0);
    assert_eq!(cosine_lr(5000, &schedule), 0.0);
    println!("loss closed forms and schedule endpoints are exact");
}

// ---------------------------------------------------------------------------
// 7. Object ingestion against the independent dumper, plus fuzz
// ---------------------------------------------------------------------------

#[test]
fn extraction_matches_independent_dumper_and_survives_fuzz() {
    let text_a: Vec<u8> = (0..16u8).collect();
    let text_b: Vec<u8> = (0..48u8).map(|i| i ^ 0x5a).collect();
    let data: Vec<u8> = vec![0xEE; 24];

    let elves = [
        build_elf(true, true, &[PlannedSection::code(&text_a)]),
        build_elf(true, false, &[PlannedSection::code(&text_b)]),
        build_elf(false, true, &[PlannedSection::code(&text_a)]),
        build_elf(
            false,
            false,
            &[PlannedSection::data(&data), PlannedSection::code(&text_b)],
        ),
        build_elf(
            true,
            true,
            &[
                PlannedSection::code(&text_a),
                PlannedSection::nobits(64),
                PlannedSection::data(&data),
                PlannedSection::code(&text_b),
            ],
        ),
    ];
    let expected_elf: [Vec<u8>; 5] = [
        text_a.clone(),
        text_b.clone(),
        text_a.clone(),
        text_b.clone(),
        [text_a.clone(), text_b.clone()].concat(),
    ];
    for (i, (obj, want)) in elves.iter().zip(expected_elf.iter()).enumerate() {
        let got = extract_code_section(obj, SourceFormat::Elf).unwrap();
        assert_eq!(&got, want, "planted bytes of object {i}");
        let dumped = reference_elf_dump(obj).unwrap();
        assert_eq!(got, dumped, "independent dump of object {i}");
    }

    let coffs = [
        build_coff(&[(true, text_a.clone())]),
        build_coff(&[(false, data.clone()), (true, text_b.clone())]),
        build_coff(&[
            (true, text_a.clone()),
            (false, data.clone()),
            (true, text_b.clone()),
        ]),
    ];
    let expected_coff: [Vec<u8>; 3] = [
        text_a.clone(),
        text_b.clone(),
        [text_a.clone(), text_b.clone()].concat(),
    ];
    for (i, (obj, want)) in coffs.iter().zip(expected_coff.iter()).enumerate() {
        let got = extract_code_section(obj, SourceFormat::Coff).unwrap();
        assert_eq!(&got, want, "planted bytes of coff {i}");
        let dumped = reference_coff_dump(obj).unwrap();
        assert_eq!(got, dumped, "independent dump of coff {i}");
    }

    // No executable bytes at all: a named error, not a panic.
    let data_only = build_elf(true, true, &[PlannedSection::data(&data)]);
    assert!(extract_code_section(&data_only, SourceFormat::Elf).is_err());

    // 1000 malformed inputs: truncations, bit flips, splices. Every case
    // must return (Ok or Err) without crashing.
    let mut rng = Rng::new(0xF022);
    let seeds: Vec<&[u8]> = elves
        .iter()
        .map(|v| v.as_slice())
        .chain(coffs.iter().map(|v| v.as_slice()))
        .collect();
    let mut errors = 0usize;
    for case in 0..1000 {
        let base = seeds[(case % seeds.len()) as usize];
        let mut bytes = base.to_vec();
        match rng.below(3) {
            0 => {
                let cut = rng.below(bytes.len() as u64 + 1) as usize;
                bytes.truncate(cut);
            }
            1 => {
                for _ in 0..1 + rng.below(8) {
                    if bytes.is_empty() {
                        break;
                    }
                    let at = rng.below(bytes.len() as u64) as usize;
                    bytes[at] ^= 1 << rng.below(8);
                }
            }
            _ => {
                let len = rng.below(256) as usize;
                let garbage: Vec<u8> = (0..len).map(|_| rng.below(256) as u8).collect();
                let at = rng.below(bytes.len() as u64) as usize;
                bytes.splice(at..at, garbage);
            }
        }
        for format in [SourceFormat::Elf, SourceFormat::Coff] {
            if extract_code_section(&bytes, format).is_err() {
                errors += 1;
            }
        }
    }
    println!(
        "object extraction: 8/8 oracle dumps identical, fuzz ran 2000 parses ({errors} rejected) without a crash"
    );
}

// ---------------------------------------------------------------------------
// 8. Command-line determinism
// ---------------------------------------------------------------------------

#[test]
fn cli_artifacts_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let run_all = |tag: &str| {
        let corpus = format!("{tag}.cfgc");
        let schema = format!("{tag}.schema");
        let out_dir = format!("{tag}-run");
        let emb = format!("{tag}.csv");
        let evalf = format!("{tag}-eval.txt");
        let out = centrifuge(
            &[
                "corpus",
                "synth",
                "--out",
                &corpus,
                "--schema-out",
                &schema,
                "--samples-per-label",
                "25",
                "--length",
                "32",
                "--seed",
                "123",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
        let out = centrifuge(
            &[
                "train",
                "--corpus",
                &corpus,
                "--schema",
                &schema,
                "--out-dir",
                &out_dir,
                "--regime",
                "dtl",
                "--epochs",
                "2",
                "--batch",
                "16",
                "--folds",
                "2",
                "--block-size",
                "4",
                "--d-model",
                "8",
                "--heads",
                "2",
                "--blocks",
                "1",
                "--ffn",
                "16",
                "--seed",
                "123",
                "--jobs",
                "2",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
        fs::write(dir.path().join(format!("{tag}.frag")), vec![0x31u8; 96]).unwrap();
        let classify = centrifuge(
            &[
                "classify",
                "--checkpoint",
                &format!("{out_dir}/fold0.cfgm"),
                "--fragment",
                &format!("{tag}.frag"),
                "--schema",
                &schema,
            ],
            dir.path(),
        );
        assert!(classify.status.success(), "{}", stderr_of(&classify));
        let out = centrifuge(
            &[
                "eval",
                "--checkpoint",
                &format!("{out_dir}/fold0.cfgm"),
                "--corpus",
                &corpus,
                "--schema",
                &schema,
                "--out",
                &evalf,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
        let out = centrifuge(
            &[
                "export",
                "--checkpoint",
                &format!("{out_dir}/fold0.cfgm"),
                "--corpus",
                &corpus,
                "--out",
                &emb,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
        (
            fs::read(dir.path().join(&corpus)).unwrap(),
            fs::read(dir.path().join(format!("{out_dir}/fold0.cfgm"))).unwrap(),
            fs::read(dir.path().join(format!("{out_dir}/fold1.cfgm"))).unwrap(),
            fs::read(dir.path().join(format!("{out_dir}/report.txt"))).unwrap(),
            fs::read(dir.path().join(&evalf)).unwrap(),
            fs::read(dir.path().join(&emb)).unwrap(),
            stdout_of(&classify),
        )
    };
    let a = run_all("a");
    let b = run_all("b");
    assert_eq!(a.0, b.0, "corpus bytes");
    assert_eq!(a.1, b.1, "fold 0 checkpoint");
    assert_eq!(a.2, b.2, "fold 1 checkpoint");
    assert_eq!(a.3, b.3, "training report");
    assert_eq!(a.4, b.4, "eval report");
    assert_eq!(a.5, b.5, "embedding export");
    assert_eq!(a.6, b.6, "classify stdout");
    println!(
        "cli determinism: corpus, checkpoints, reports, embeddings and stdout all byte-identical"
    );
}
