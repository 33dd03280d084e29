//! Evaluation: k-fold partitioning, accuracies, confusion counts, and the
//! grouped (coarsened) sub accuracy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Sample;
use crate::model::{tokenize_bytes, CentrifugeModel};
use crate::rng::Rng;
use crate::schema::LabelSchema;
use crate::{Error, Result};

/// Accuracies and confusion counts over one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub count: usize,
    pub main_acc: f64,
    /// One entry per sub-net head.
    pub sub_acc: Vec<f64>,
    /// Head-0 sub accuracy after mapping predictions and truths through the
    /// schema's group map.
    pub grouped_acc: f64,
    /// `main_confusion[true][pred]`.
    pub main_confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| (0.0..=1.0).contains(&a);
        if !ok(self.main_acc) || !ok(self.grouped_acc) || !self.sub_acc.iter().all(|&a| ok(a)) {
            return Err(Error::State("accuracy outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Stratified k-fold split over main labels: per label, a seeded shuffle is
/// dealt round-robin into the k test slices. Returns `(train, test)` index
/// pairs; the test slices are disjoint and cover every index.
pub fn kfold_split(labels: &[u16], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::Input("cannot split an empty dataset".into()));
    }
    let max_label = *labels.iter().max().unwrap() as usize;
    let mut per_label: Vec<Vec<usize>> = vec![Vec::new(); max_label + 1];
    for (i, &l) in labels.iter().enumerate() {
        per_label[l as usize].push(i);
    }
    let mut rng = Rng::new(seed);
    let mut test_folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (label, mut idx) in per_label.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::Input(format!(
                "main label {label} has {} samples, fewer than {k} folds",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        for (pos, i) in idx.into_iter().enumerate() {
            test_folds[pos % k].push(i);
        }
    }
    let mut out = Vec::with_capacity(k);
    for f in 0..k {
        let mut test = test_folds[f].clone();
        test.sort_unstable();
        let mut train: Vec<usize> = Vec::with_capacity(labels.len() - test.len());
        for other in 0..k {
            if other != f {
                train.extend_from_slice(&test_folds[other]);
            }
        }
        train.sort_unstable();
        out.push((train, test));
    }
    Ok(out)
}

/// Streaming accuracy counter, separated from the model so hand-written
/// prediction/truth pairs can drive it directly.
#[derive(Debug, Clone)]
pub struct Tally {
    c_main: usize,
    heads: usize,
    group_of: Vec<usize>,
    count: usize,
    main_hits: usize,
    sub_hits: Vec<usize>,
    grouped_hits: usize,
    confusion: Vec<Vec<usize>>,
}

impl Tally {
    pub fn new(c_main: usize, heads: usize, group_of: &[usize]) -> Self {
        Tally {
            c_main,
            heads,
            group_of: group_of.to_vec(),
            count: 0,
            main_hits: 0,
            sub_hits: vec![0; heads],
            grouped_hits: 0,
            confusion: vec![vec![0; c_main]; c_main],
        }
    }

    pub fn add(
        &mut self,
        pred_main: usize,
        truth_main: usize,
        pred_subs: &[usize],
        truth_subs: &[usize],
    ) -> Result<()> {
        if pred_main >= self.c_main || truth_main >= self.c_main {
            return Err(Error::Schema(format!(
                "main label outside {} classes",
                self.c_main
            )));
        }
        if pred_subs.len() != self.heads || truth_subs.len() != self.heads {
            return Err(Error::Schema("sub label arity mismatch".into()));
        }
        self.count += 1;
        if pred_main == truth_main {
            self.main_hits += 1;
        }
        self.confusion[truth_main][pred_main] += 1;
        for j in 0..self.heads {
            if pred_subs[j] == truth_subs[j] {
                self.sub_hits[j] += 1;
            }
            if j == 0 {
                let (p, t) = (pred_subs[0], truth_subs[0]);
                if p >= self.group_of.len() || t >= self.group_of.len() {
                    return Err(Error::Schema("sub label outside group map".into()));
                }
                if self.group_of[p] == self.group_of[t] {
                    self.grouped_hits += 1;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Metrics> {
        if self.count == 0 {
            return Err(Error::Input("cannot evaluate on an empty set".into()));
        }
        let n = self.count as f64;
        let metrics = Metrics {
            count: self.count,
            main_acc: self.main_hits as f64 / n,
            sub_acc: self.sub_hits.iter().map(|&h| h as f64 / n).collect(),
            grouped_acc: if self.heads > 0 {
                self.grouped_hits as f64 / n
            } else {
                0.0
            },
            main_confusion: self.confusion,
        };
        metrics.validate()?;
        Ok(metrics)
    }
}

/// Argmax-accuracy evaluation of a model over labeled windows.
pub fn evaluate(
    model: &CentrifugeModel,
    samples: &[Sample],
    schema: &LabelSchema,
) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty set".into()));
    }
    let heads = model.config.sub_classes.len();
    if schema.subs.len() != heads {
        return Err(Error::Schema(format!(
            "schema has {} sub heads, model has {heads}",
            schema.subs.len()
        )));
    }
    let mut tally = Tally::new(model.config.main_classes, heads, &schema.group_of);
    for s in samples {
        let seq = tokenize_bytes(&s.bytes, model.config.block_size)?;
        let out = model.infer(&seq, None)?;
        let pred_subs: Vec<usize> = out.y_subs.iter().map(|y| y.argmax()).collect();
        let truth_subs: Vec<usize> = s.subs.iter().map(|&v| v as usize).collect();
        tally.add(
            out.y_main.argmax(),
            s.main as usize,
            &pred_subs,
            &truth_subs,
        )?;
    }
    tally.finish()
}

/// Mean and sample standard deviation of per-fold values.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kfold_even_split() {
        let labels: Vec<u16> = (0..400).map(|i| (i % 4) as u16).collect();
        let folds = kfold_split(&labels, 4, 11).unwrap();
        assert_eq!(folds.len(), 4);
        for (train, test) in &folds {
            assert_eq!(test.len(), 100);
            assert_eq!(train.len(), 300);
            for label in 0..4u16 {
                let in_test = test.iter().filter(|&&i| labels[i] == label).count();
                assert_eq!(in_test, 25);
            }
        }
    }

    #[test]
    fn kfold_covers_and_is_disjoint() {
        let labels: Vec<u16> = (0..103).map(|i| (i % 3) as u16).collect();
        let folds = kfold_split(&labels, 4, 3).unwrap();
        let mut seen = vec![false; labels.len()];
        for (_, test) in &folds {
            for &i in test {
                assert!(!seen[i], "index {i} appears in two test folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), labels.len());
        }
    }

    #[test]
    fn kfold_deterministic() {
        let labels: Vec<u16> = (0..50).map(|i| (i % 2) as u16).collect();
        assert_eq!(
            kfold_split(&labels, 5, 9).unwrap(),
            kfold_split(&labels, 5, 9).unwrap()
        );
    }

    #[test]
    fn kfold_rejects_sparse_label() {
        let labels = vec![0u16, 0, 0, 0, 1, 1, 1];
        let err = kfold_split(&labels, 4, 1).unwrap_err();
        assert!(format!("{err}").contains("label 1"));
    }

    #[test]
    fn mean_sd_basics() {
        let (m, sd) = mean_sd(&[1.0, 1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(sd, 0.0);
        let (m, sd) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((sd - libm::sqrt(2.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let mut tally = Tally::new(3, 1, &[0, 1]);
        for i in 0..6usize {
            tally.add(i % 3, i % 3, &[i % 2], &[i % 2]).unwrap();
        }
        let m = tally.finish().unwrap();
        assert_eq!(m.main_acc, 1.0);
        assert_eq!(m.sub_acc, vec![1.0]);
        assert_eq!(m.grouped_acc, 1.0);
    }

    #[test]
    fn hand_counted_six_sample_case() {
        // Sub classes 0,1 -> group 0; classes 2,3 -> group 1.
        let group_of = [0usize, 0, 1, 1];
        let mut tally = Tally::new(2, 1, &group_of);
        // (pred_main, truth_main, pred_sub, truth_sub)
        let rows = [
            (0, 0, 0, 0), // main hit, sub hit, group hit
            (0, 1, 1, 0), // main miss, sub miss, group hit (both group 0)
            (1, 1, 2, 3), // main hit, sub miss, group hit (both group 1)
            (1, 1, 2, 0), // main hit, sub miss, group miss
            (0, 0, 3, 3), // main hit, sub hit, group hit
            (1, 0, 1, 2), // main miss, sub miss, group miss
        ];
        for (pm, tm, ps, ts) in rows {
            tally.add(pm, tm, &[ps], &[ts]).unwrap();
        }
        let m = tally.finish().unwrap();
        assert!((m.main_acc - 4.0 / 6.0).abs() < 1e-15);
        assert!((m.sub_acc[0] - 2.0 / 6.0).abs() < 1e-15);
        assert!((m.grouped_acc - 4.0 / 6.0).abs() < 1e-15);
        // Confusion rows sum to the per-class truth counts.
        assert_eq!(m.main_confusion[0], vec![2, 1]);
        assert_eq!(m.main_confusion[1], vec![1, 2]);
        assert!(m.grouped_acc >= m.sub_acc[0]);
    }
}
