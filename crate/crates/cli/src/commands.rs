//! Command implementations behind the argument parser.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use centrifuge_core::corpus::{
    cap_and_shuffle, corpus_read, corpus_write, window_samples, Sample, SourceRecord,
};
use centrifuge_core::metrics::Metrics;
use centrifuge_core::model::{tokenize_bytes, CentrifugeConfig, CentrifugeMode, CentrifugeModel};
use centrifuge_core::object::extract_code_section;
use centrifuge_core::optim::OptimizerConfig;
use centrifuge_core::regimes::{run_fold, RegimeKind, RegimeSpec, TrainConfig};
use centrifuge_core::report::{format_embeddings, format_metrics_report};
use centrifuge_core::schema::LabelSchema;
use centrifuge_core::synth::{synth_corpus, SubLabeling, SyntheticSpec};

use crate::args::{BuildArgs, ClassifyArgs, EvalArgs, ExportArgs, StatsArgs, SynthArgs, TrainArgs};
use crate::config::FileConfig;

fn read_schema(path: &Path) -> Result<LabelSchema> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
    LabelSchema::parse(&text).with_context(|| format!("parsing schema {}", path.display()))
}

fn read_corpus(
    path: &Path,
    schema: Option<&LabelSchema>,
) -> Result<centrifuge_core::corpus::CorpusFile> {
    let bytes = fs::read(path).with_context(|| format!("reading corpus {}", path.display()))?;
    corpus_read(&bytes, schema).with_context(|| format!("parsing corpus {}", path.display()))
}

fn read_model(path: &Path) -> Result<CentrifugeModel> {
    let bytes = fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    CentrifugeModel::decode(&bytes)
        .with_context(|| format!("parsing checkpoint {}", path.display()))
}

pub fn corpus_build(args: &BuildArgs, file_cfg: &FileConfig) -> Result<()> {
    let schema = read_schema(&args.schema)?;
    let length = file_cfg.pick("length", args.length, 235usize)?;
    let stride = file_cfg.pick("stride", args.stride, length)?;
    let cap = file_cfg.pick("cap", args.cap, 20000usize)?;
    let seed = file_cfg.seed(args.seed)?;

    let manifest = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let mut samples: Vec<Sample> = Vec::new();
    let mut records = 0usize;
    for (lineno, raw) in manifest.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let record = SourceRecord::parse_line(line)
            .with_context(|| format!("{}:{}", args.manifest.display(), lineno + 1))?;
        let (main, subs) = record
            .label_ids(&schema)
            .with_context(|| format!("{}:{}", args.manifest.display(), lineno + 1))?;
        let raw_path = PathBuf::from(&record.path);
        let path = if raw_path.is_absolute() {
            raw_path
        } else {
            base.join(raw_path)
        };
        let bytes =
            fs::read(&path).with_context(|| format!("reading source {}", path.display()))?;
        let stream = extract_code_section(&bytes, record.format)
            .with_context(|| format!("extracting from {}", path.display()))?;
        samples.extend(window_samples(&stream, length, stride, main, &subs)?);
        records += 1;
    }
    let samples = cap_and_shuffle(samples, cap, seed);
    let bytes = corpus_write(&samples, &schema, length)?;
    fs::write(&args.out, &bytes)
        .with_context(|| format!("writing corpus {}", args.out.display()))?;
    println!(
        "built corpus {}: {} records, {} samples, window {length}",
        args.out.display(),
        records,
        samples.len()
    );
    print_label_counts(&samples, &schema);
    Ok(())
}

pub fn corpus_synth(args: &SynthArgs, file_cfg: &FileConfig) -> Result<()> {
    let generators = file_cfg.pick("generators", args.generators, 4usize)?;
    let styles = file_cfg.pick("styles", args.styles, 3usize)?;
    let per_label = file_cfg.pick("samples-per-label", args.samples_per_label, 2000usize)?;
    let length = file_cfg.pick("length", args.length, 64usize)?;
    let seed = file_cfg.seed(args.seed)?;
    let labeling = match file_cfg
        .pick(
            "sub-labels",
            args.sub_labels.clone(),
            "generator".to_string(),
        )?
        .as_str()
    {
        "generator" => SubLabeling::Generator,
        "style-and-generator" => SubLabeling::StyleAndGenerator,
        other => bail!("unknown sub labeling '{other}' (generator, style-and-generator)"),
    };

    let spec = SyntheticSpec::family(generators, styles, seed)?;
    let (samples, schema) = synth_corpus(&spec, per_label, length, labeling)?;
    let bytes = corpus_write(&samples, &schema, length)?;
    fs::write(&args.out, &bytes)
        .with_context(|| format!("writing corpus {}", args.out.display()))?;
    if let Some(schema_out) = &args.schema_out {
        fs::write(schema_out, schema.to_text())
            .with_context(|| format!("writing schema {}", schema_out.display()))?;
    }
    println!(
        "synthesized corpus {}: {} generators x {} styles, {} samples, window {length}",
        args.out.display(),
        generators,
        styles,
        samples.len()
    );
    print_label_counts(&samples, &schema);
    Ok(())
}

pub fn corpus_stats(args: &StatsArgs) -> Result<()> {
    let schema = args.schema.as_deref().map(read_schema).transpose()?;
    let corpus = read_corpus(&args.corpus, schema.as_ref())?;
    println!("samples\t{}", corpus.samples.len());
    println!("window\t{}", corpus.window_len);
    println!("sub_heads\t{}", corpus.sub_count);
    println!("schema_digest\t{:016x}", corpus.schema_digest);

    let label_count = match &schema {
        Some(s) => s.main.len(),
        None => corpus
            .samples
            .iter()
            .map(|s| s.main as usize + 1)
            .max()
            .unwrap_or(0),
    };
    for id in 0..label_count {
        let name = schema
            .as_ref()
            .map(|s| s.main[id].clone())
            .unwrap_or_else(|| format!("main{id}"));
        let group: Vec<&Sample> = corpus
            .samples
            .iter()
            .filter(|s| s.main as usize == id)
            .collect();
        println!("label\t{id}\t{name}\tcount\t{}", group.len());
        let mut hist = [0u64; 16];
        for s in &group {
            for &b in &s.bytes {
                hist[(b >> 4) as usize] += 1;
            }
        }
        let cells: Vec<String> = hist.iter().map(|c| c.to_string()).collect();
        println!("hist\t{id}\t{}", cells.join(","));
    }
    Ok(())
}

fn print_label_counts(samples: &[Sample], schema: &LabelSchema) {
    for (id, name) in schema.main.iter().enumerate() {
        let count = samples.iter().filter(|s| s.main as usize == id).count();
        println!("label\t{id}\t{name}\tcount\t{count}");
    }
}

/// Everything `train` resolves before any work starts.
struct TrainPlan {
    regime: RegimeSpec,
    train_cfg: TrainConfig,
    model_cfg: CentrifugeConfig,
    folds: usize,
    jobs: usize,
}

fn resolve_train_plan(
    args: &TrainArgs,
    file_cfg: &FileConfig,
    schema: &LabelSchema,
    window_len: usize,
) -> Result<TrainPlan> {
    let regime_name = file_cfg
        .pick_opt("regime", args.regime.clone())?
        .ok_or_else(|| anyhow!("--regime is required (baseline, utl, dtl, uft, dft, 2lf)"))?;
    let kind = RegimeKind::parse(&regime_name)?;
    let beta = file_cfg.pick("beta", args.beta, 1.0f64)?;
    let epochs = file_cfg.pick("epochs", args.epochs, 50usize)?;
    let lr = file_cfg.pick("lr", args.lr, 0.025f64)?;
    let weight_decay = file_cfg.pick("weight-decay", args.weight_decay, 1e-4f64)?;
    let momentum = file_cfg.pick("momentum", args.momentum, 0.9f64)?;
    let mut opt = OptimizerConfig::new(lr, weight_decay, momentum)?;
    opt.nesterov = args.nesterov;

    let mut regime = RegimeSpec::new(kind, beta, epochs, opt)?;
    if let Some(raw) = &args.phase_epochs {
        let parts: Vec<usize> = raw
            .split(',')
            .map(|p| p.trim().parse().map_err(|e| anyhow!("--phase-epochs: {e}")))
            .collect::<Result<_>>()?;
        regime.phase_epochs = parts;
        regime.validate()?;
    }

    let batch_size = file_cfg.pick("batch", args.batch, 64usize)?;
    let smoothing = file_cfg.pick("smoothing", args.smoothing, 0.1f64)?;
    let seed = file_cfg.seed(args.seed)?;
    let train_cfg = TrainConfig {
        batch_size,
        seed,
        label_smoothing: smoothing,
    };
    train_cfg.validate()?;

    let folds = file_cfg.pick("folds", args.folds, 4usize)?;
    if folds < 2 {
        bail!("need at least 2 folds, got {folds}");
    }
    let jobs = file_cfg.pick("jobs", args.jobs, 1usize)?.max(1);

    let model_cfg = CentrifugeConfig {
        mode: CentrifugeMode::SelfInput,
        window_len,
        block_size: file_cfg.pick("block-size", args.block_size, 1usize)?,
        d_model: file_cfg.pick("d-model", args.d_model, 64usize)?,
        heads: file_cfg.pick("heads", args.heads, 4usize)?,
        blocks: file_cfg.pick("blocks", args.blocks, 2usize)?,
        ffn: file_cfg.pick("ffn", args.ffn, 128usize)?,
        positional: args.positional,
        main_classes: schema.main.len(),
        sub_classes: schema.sub_counts(),
    };
    model_cfg.validate()?;
    Ok(TrainPlan {
        regime,
        train_cfg,
        model_cfg,
        folds,
        jobs,
    })
}

pub fn train(args: &TrainArgs, file_cfg: &FileConfig) -> Result<()> {
    let schema = read_schema(&args.schema)?;
    let corpus = read_corpus(&args.corpus, Some(&schema))?;
    let plan = resolve_train_plan(args, file_cfg, &schema, corpus.window_len)?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut fold_metrics: Vec<Metrics> = Vec::with_capacity(plan.folds);
    let mut fold_ids: Vec<usize> = (0..plan.folds).collect();
    let mut results: Vec<Option<(Vec<u8>, Metrics)>> = vec![None; plan.folds];
    // Waves of at most `jobs` folds; results land in fold order regardless.
    while !fold_ids.is_empty() {
        let wave: Vec<usize> = fold_ids.drain(..fold_ids.len().min(plan.jobs)).collect();
        let wave_results: Vec<(usize, Result<(Vec<u8>, Metrics)>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&fold| {
                    let samples = &corpus.samples;
                    let schema = &schema;
                    let plan = &plan;
                    scope.spawn(move || {
                        let r = run_fold(
                            samples,
                            schema,
                            &plan.model_cfg,
                            &plan.regime,
                            &plan.train_cfg,
                            plan.folds,
                            fold,
                        )
                        .map(|(model, outcome)| (model.encode(), outcome.metrics))
                        .map_err(anyhow::Error::from);
                        (fold, r)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (fold, result) in wave_results {
            results[fold] = Some(result.with_context(|| format!("training fold {fold}"))?);
        }
    }
    for (fold, slot) in results.into_iter().enumerate() {
        let (bytes, metrics) = slot.expect("every fold ran");
        let path = args.out_dir.join(format!("fold{fold}.cfgm"));
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        fold_metrics.push(metrics);
    }

    let report = format_metrics_report(plan.regime.kind.name(), &fold_metrics);
    let report_path = args.out_dir.join("report.txt");
    fs::write(&report_path, &report)
        .with_context(|| format!("writing {}", report_path.display()))?;
    print!("{report}");
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let schema = read_schema(&args.schema)?;
    let corpus = read_corpus(&args.corpus, Some(&schema))?;
    let model = read_model(&args.checkpoint)?;
    let metrics = centrifuge_core::metrics::evaluate(&model, &corpus.samples, &schema)?;
    let report = format_metrics_report("eval", core::slice::from_ref(&metrics));
    if let Some(out) = &args.out {
        fs::write(out, &report).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{report}");
    Ok(())
}

pub fn classify(args: &ClassifyArgs, file_cfg: &FileConfig) -> Result<()> {
    let model = read_model(&args.checkpoint)?;
    let schema = args.schema.as_deref().map(read_schema).transpose()?;
    let fragment = fs::read(&args.fragment)
        .with_context(|| format!("reading fragment {}", args.fragment.display()))?;
    let window = model.config.window_len;
    if fragment.len() < window {
        bail!(
            "fragment {} is too short: {} bytes, the model window is {window}",
            args.fragment.display(),
            fragment.len()
        );
    }
    let stride = file_cfg.pick("stride", args.stride, window)?;
    if stride == 0 {
        bail!("stride must be at least 1");
    }

    let main_name = |id: usize| -> String {
        schema
            .as_ref()
            .and_then(|s| s.main.get(id).cloned())
            .unwrap_or_else(|| format!("main{id}"))
    };
    let sub_name = |head: usize, id: usize| -> String {
        schema
            .as_ref()
            .and_then(|s| s.subs.get(head).and_then(|h| h.get(id).cloned()))
            .unwrap_or_else(|| format!("sub{head}:{id}"))
    };

    let mut main_votes = vec![0usize; model.config.main_classes];
    let mut sub_votes: Vec<Vec<usize>> = model
        .config
        .sub_classes
        .iter()
        .map(|&k| vec![0usize; k])
        .collect();
    let mut offset = 0usize;
    let mut index = 0usize;
    while offset + window <= fragment.len() {
        let seq = tokenize_bytes(&fragment[offset..offset + window], model.config.block_size)?;
        let out = model.infer(&seq, None)?;
        let pred = out.y_main.argmax();
        main_votes[pred] += 1;
        let mut line = format!(
            "window\t{index}\toffset\t{offset}\tmain\t{}\t{:.6}",
            main_name(pred),
            out.y_main.data()[pred]
        );
        for (j, y) in out.y_subs.iter().enumerate() {
            let p = y.argmax();
            sub_votes[j][p] += 1;
            line.push_str(&format!("\tsub{j}\t{}\t{:.6}", sub_name(j, p), y.data()[p]));
        }
        let dist: Vec<String> = out.y_main.data().iter().map(|v| v.to_string()).collect();
        line.push_str(&format!("\tmain_dist\t{}", dist.join(",")));
        println!("{line}");
        offset += stride;
        index += 1;
    }
    let majority = argmax_votes(&main_votes);
    let mut summary = format!(
        "summary\twindows\t{index}\tmain\t{}\tvotes\t{}/{index}",
        main_name(majority),
        main_votes[majority]
    );
    for (j, votes) in sub_votes.iter().enumerate() {
        let m = argmax_votes(votes);
        summary.push_str(&format!(
            "\tsub{j}\t{}\tvotes\t{}/{index}",
            sub_name(j, m),
            votes[m]
        ));
    }
    println!("{summary}");
    Ok(())
}

fn argmax_votes(votes: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

pub fn export(args: &ExportArgs) -> Result<()> {
    let model = read_model(&args.checkpoint)?;
    let corpus = read_corpus(&args.corpus, None)?;
    let text = format_embeddings(&model, &corpus.samples)?;
    fs::write(&args.out, &text).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "exported {} embedding rows to {}",
        corpus.samples.len(),
        args.out.display()
    );
    Ok(())
}
