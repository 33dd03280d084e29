//! Synthetic instruction-stream corpora for desk-scale verification.
//!
//! Each generator g is a toy instruction set: an opcode byte drawn from a
//! set O_g (the sets are pairwise disjoint), followed by that opcode's
//! operand bytes. Operand bytes are drawn from a style-conditioned
//! distribution that is deliberately identical across generators, and
//! operand lengths depend only on the opcode's index inside its set, so the
//! generator identity is recoverable only from the opcode bytes themselves.
//! Main label = (generator, style); sub label(s) come from the chosen
//! labeling.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{window_samples, Sample};
use crate::rng::Rng;
use crate::schema::LabelSchema;
use crate::{Error, Result};

/// A toy-ISA family: disjoint opcode sets, per-opcode operand lengths, and
/// shared style-conditioned operand distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Opcode bytes per generator; sets must be pairwise disjoint.
    pub opcode_sets: Vec<Vec<u8>>,
    /// Operand length per opcode (parallel to `opcode_sets`), each in 0..=4.
    pub operand_lens: Vec<Vec<u8>>,
    /// Operand byte weights per style, 256 entries each.
    pub styles: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.opcode_sets.is_empty() {
            return Err(Error::Config("need at least one generator".into()));
        }
        if self.styles.is_empty() {
            return Err(Error::Config("need at least one style".into()));
        }
        let mut seen = [false; 256];
        for (g, set) in self.opcode_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Config(format!("generator {g} has no opcodes")));
            }
            for &op in set {
                if seen[op as usize] {
                    return Err(Error::Config(format!(
                        "opcode {op:#04x} appears in two generators"
                    )));
                }
                seen[op as usize] = true;
            }
        }
        if self.operand_lens.len() != self.opcode_sets.len() {
            return Err(Error::Config(
                "operand length map must cover every generator".into(),
            ));
        }
        for (set, lens) in self.opcode_sets.iter().zip(self.operand_lens.iter()) {
            if set.len() != lens.len() {
                return Err(Error::Config(
                    "operand length map must cover every opcode".into(),
                ));
            }
            if lens.iter().any(|&l| l > 4) {
                return Err(Error::Config("operand lengths must lie in 0..=4".into()));
            }
        }
        for (s, weights) in self.styles.iter().enumerate() {
            if weights.len() != 256 {
                return Err(Error::Config(format!("style {s} needs 256 weights")));
            }
            if weights.iter().any(|&w| !(w >= 0.0)) {
                return Err(Error::Config(format!("style {s} has a negative weight")));
            }
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(format!("style {s} has zero total weight")));
            }
        }
        Ok(())
    }

    pub fn generators(&self) -> usize {
        self.opcode_sets.len()
    }

    pub fn styles_count(&self) -> usize {
        self.styles.len()
    }

    pub fn main_labels(&self) -> usize {
        self.generators() * self.styles_count()
    }

    /// The default desk-scale family: 4 generators x 3 styles.
    pub fn default_desk(seed: u64) -> Self {
        SyntheticSpec::family(4, 3, seed).expect("default family is valid")
    }

    /// A family of `generators` toy ISAs with 16 opcodes each in disjoint
    /// byte ranges, operand lengths cycling 0..=4 by in-set index (identical
    /// across generators), and `styles` operand distributions shared by all
    /// generators: uniform, then increasingly skewed power laws alternating
    /// between the low and high ends of the byte range.
    pub fn family(generators: usize, styles: usize, seed: u64) -> Result<Self> {
        if generators == 0 || generators > 8 {
            return Err(Error::Config(format!(
                "generator count must lie in 1..=8, got {generators}"
            )));
        }
        if styles == 0 || styles > 9 {
            return Err(Error::Config(format!(
                "style count must lie in 1..=9, got {styles}"
            )));
        }
        let span = 256 / generators;
        let opcode_sets: Vec<Vec<u8>> = (0..generators)
            .map(|g| {
                let base = g * span + (span - 16) / 2;
                (0..16).map(|i| (base + i) as u8).collect()
            })
            .collect();
        let operand_lens: Vec<Vec<u8>> = opcode_sets
            .iter()
            .map(|set| (0..set.len()).map(|i| (i % 5) as u8).collect())
            .collect();
        let mut style_dists = Vec::with_capacity(styles);
        for s in 0..styles {
            let weights: Vec<f64> = if s == 0 {
                vec![1.0; 256]
            } else {
                // Power law of rising order; odd styles favor low bytes,
                // even styles favor high bytes.
                let exponent = 2.0 * s.div_ceil(2) as f64;
                (0..256)
                    .map(|b| {
                        let x = if s % 2 == 1 {
                            (256 - b) as f64 / 256.0
                        } else {
                            (b + 1) as f64 / 256.0
                        };
                        libm::pow(x, exponent)
                    })
                    .collect()
            };
            style_dists.push(weights);
        }
        let spec = SyntheticSpec {
            opcode_sets,
            operand_lens,
            styles: style_dists,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Cumulative table for inverse-CDF byte sampling.
struct ByteDist {
    cdf: Vec<f64>,
}

impl ByteDist {
    fn new(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w / total;
            cdf.push(acc);
        }
        ByteDist { cdf }
    }

    fn sample(&self, rng: &mut Rng) -> u8 {
        let u = rng.next_f64();
        self.cdf.partition_point(|&c| c <= u).min(255) as u8
    }
}

/// Generates at least `min_len` bytes of (generator g, style s) instruction
/// stream plus a parallel opcode-position mask.
pub fn gen_stream_annotated(
    spec: &SyntheticSpec,
    g: usize,
    s: usize,
    min_len: usize,
    rng: &mut Rng,
) -> Result<(Vec<u8>, Vec<bool>)> {
    if g >= spec.generators() || s >= spec.styles_count() {
        return Err(Error::Input(format!(
            "generator {g} / style {s} outside the family"
        )));
    }
    let set = &spec.opcode_sets[g];
    let lens = &spec.operand_lens[g];
    let dist = ByteDist::new(&spec.styles[s]);
    let mut bytes = Vec::with_capacity(min_len + 8);
    let mut mask = Vec::with_capacity(min_len + 8);
    while bytes.len() < min_len {
        let i = rng.below(set.len() as u64) as usize;
        bytes.push(set[i]);
        mask.push(true);
        for _ in 0..lens[i] {
            bytes.push(dist.sample(rng));
            mask.push(false);
        }
    }
    Ok((bytes, mask))
}

/// Which sub label(s) each sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubLabeling {
    /// One head: the generator.
    Generator,
    /// Two heads: style first, generator second.
    StyleAndGenerator,
}

/// Builds the labeled window set and its schema. Per (generator, style)
/// pair, one seeded stream is generated and cut into `samples_per_label`
/// non-overlapping windows of `window_len` bytes, so window boundaries fall
/// at arbitrary points inside instructions.
pub fn synth_corpus(
    spec: &SyntheticSpec,
    samples_per_label: usize,
    window_len: usize,
    labeling: SubLabeling,
) -> Result<(Vec<Sample>, LabelSchema)> {
    spec.validate()?;
    if samples_per_label == 0 {
        return Err(Error::Config("need at least one sample per label".into()));
    }
    if window_len == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    let schema = synth_schema(spec, labeling)?;
    let mut samples = Vec::with_capacity(spec.main_labels() * samples_per_label);
    for g in 0..spec.generators() {
        for s in 0..spec.styles_count() {
            let main = (g * spec.styles_count() + s) as u16;
            let subs: Vec<u16> = match labeling {
                SubLabeling::Generator => vec![g as u16],
                SubLabeling::StyleAndGenerator => vec![s as u16, g as u16],
            };
            let mut rng = Rng::derive(spec.seed, 1 + main as u64);
            let (stream, _) =
                gen_stream_annotated(spec, g, s, samples_per_label * window_len, &mut rng)?;
            let windows = window_samples(
                &stream[..samples_per_label * window_len],
                window_len,
                window_len,
                main,
                &subs,
            )?;
            debug_assert_eq!(windows.len(), samples_per_label);
            samples.extend(windows);
        }
    }
    Ok((samples, schema))
}

/// Label names for a synthetic family.
pub fn synth_schema(spec: &SyntheticSpec, labeling: SubLabeling) -> Result<LabelSchema> {
    let mut main = Vec::new();
    for g in 0..spec.generators() {
        for s in 0..spec.styles_count() {
            main.push(format!("gen{g}-style{s}"));
        }
    }
    let gens: Vec<String> = (0..spec.generators()).map(|g| format!("gen{g}")).collect();
    let styles: Vec<String> = (0..spec.styles_count())
        .map(|s| format!("style{s}"))
        .collect();
    let subs = match labeling {
        SubLabeling::Generator => vec![gens],
        SubLabeling::StyleAndGenerator => vec![styles, gens],
    };
    LabelSchema::new(main, subs)
}
