//! Plain-text artifacts: the per-fold metrics report and the first-layer
//! embedding export. Both renderings are deterministic, so reruns under the
//! same seed produce byte-identical files.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::Sample;
use crate::metrics::{mean_sd, Metrics};
use crate::model::{tokenize_bytes, CentrifugeModel};
use crate::Result;

/// Per-fold accuracies plus mean and standard deviation, as percentages.
pub fn format_metrics_report(regime: &str, per_fold: &[Metrics]) -> String {
    let mut out = String::new();
    out.push_str(&format!("regime\t{regime}\n"));
    out.push_str(&format!("folds\t{}\n", per_fold.len()));
    let heads = per_fold.first().map(|m| m.sub_acc.len()).unwrap_or(0);
    for (i, m) in per_fold.iter().enumerate() {
        out.push_str(&format!(
            "fold\t{i}\tcount\t{}\tmain_acc\t{:.6}",
            m.count, m.main_acc
        ));
        for (j, a) in m.sub_acc.iter().enumerate() {
            out.push_str(&format!("\tsub{j}_acc\t{a:.6}"));
        }
        out.push_str(&format!("\tgrouped_acc\t{:.6}\n", m.grouped_acc));
    }
    let main: Vec<f64> = per_fold.iter().map(|m| m.main_acc * 100.0).collect();
    let (mm, ms) = mean_sd(&main);
    out.push_str(&format!("main_acc\t{mm:.2} ± {ms:.2}\n"));
    for j in 0..heads {
        let sub: Vec<f64> = per_fold.iter().map(|m| m.sub_acc[j] * 100.0).collect();
        let (sm, ss) = mean_sd(&sub);
        out.push_str(&format!("sub{j}_acc\t{sm:.2} ± {ss:.2}\n"));
    }
    let grouped: Vec<f64> = per_fold.iter().map(|m| m.grouped_acc * 100.0).collect();
    let (gm, gs) = mean_sd(&grouped);
    out.push_str(&format!("grouped_acc\t{gm:.2} ± {gs:.2}\n"));
    out
}

/// One CSV row per sample: the mean-pooled first-layer output of the main
/// net, then the numeric main label and sub label(s).
pub fn format_embeddings(model: &CentrifugeModel, samples: &[Sample]) -> Result<String> {
    let d = model.config.d_model;
    let heads = model.config.sub_classes.len();
    let mut out = String::new();
    for c in 0..d {
        out.push_str(&format!("x{c},"));
    }
    out.push_str("main");
    for j in 0..heads {
        out.push_str(&format!(",sub{j}"));
    }
    out.push('\n');
    for s in samples {
        let seq = tokenize_bytes(&s.bytes, model.config.block_size)?;
        let fwd = model.infer(&seq, None)?;
        let pooled = fwd.x_prime.mean_rows();
        for &v in pooled.data() {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}", s.main));
        for &t in &s.subs {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
    }
    Ok(out)
}
