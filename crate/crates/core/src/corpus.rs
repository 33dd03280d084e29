//! Labeled byte-window datasets and their bit-exact container.
//!
//! Container layout (all integers little-endian):
//!
//! ```text
//! magic   "CFGC"          4 bytes
//! version u16             currently 1
//! L       u32             window length in bytes
//! subs    u16             sub labels per sample
//! count   u64             number of samples
//! digest  u64             FNV-1a over the canonical label-schema text
//! then per sample: L window bytes, u16 main label, u16 per sub label
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::rng::Rng;
use crate::schema::LabelSchema;
use crate::wire::{Reader, Writer};
use crate::{Error, Result};

pub const CORPUS_MAGIC: &[u8; 4] = b"CFGC";
pub const CORPUS_VERSION: u16 = 1;
/// Fixed part of the container before the packed samples.
pub const CORPUS_HEADER_LEN: usize = 4 + 2 + 4 + 2 + 8 + 8;

/// One fixed-length byte window with its labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub bytes: Vec<u8>,
    pub main: u16,
    pub subs: Vec<u16>,
}

/// Source file format accepted by the ingestion pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Elf,
    Coff,
    Raw,
}

impl SourceFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "elf" => Ok(SourceFormat::Elf),
            "coff" => Ok(SourceFormat::Coff),
            "raw" => Ok(SourceFormat::Raw),
            other => Err(Error::Input(format!(
                "unknown source format '{other}' (expected elf, coff or raw)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceFormat::Elf => "elf",
            SourceFormat::Coff => "coff",
            SourceFormat::Raw => "raw",
        }
    }
}

/// One manifest line: where a stream comes from and how it is labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRecord {
    pub path: String,
    pub format: SourceFormat,
    pub main_label: String,
    pub sub_labels: Vec<String>,
}

impl SourceRecord {
    /// Parses one tab-separated manifest line:
    /// `path<TAB>format<TAB>main_label<TAB>sub,labels`.
    pub fn parse_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Input(format!(
                "manifest line needs 4 tab-separated fields, got {}",
                fields.len()
            )));
        }
        Ok(SourceRecord {
            path: fields[0].to_string(),
            format: SourceFormat::parse(fields[1])?,
            main_label: fields[2].to_string(),
            sub_labels: fields[3]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string())
                .collect(),
        })
    }

    /// Resolves label names through the schema, naming any unknown label.
    pub fn label_ids(&self, schema: &LabelSchema) -> Result<(u16, Vec<u16>)> {
        let main = schema
            .main_index(&self.main_label)
            .ok_or_else(|| Error::Schema(format!("unknown main label '{}'", self.main_label)))?;
        if self.sub_labels.len() != schema.subs.len() {
            return Err(Error::Schema(format!(
                "record has {} sub labels, schema has {} heads",
                self.sub_labels.len(),
                schema.subs.len()
            )));
        }
        let mut subs = Vec::with_capacity(self.sub_labels.len());
        for (head, name) in self.sub_labels.iter().enumerate() {
            let id = schema
                .sub_index(head, name)
                .ok_or_else(|| Error::Schema(format!("unknown sub label '{name}'")))?;
            subs.push(id);
        }
        Ok((main, subs))
    }
}

/// Identity passthrough for non-native streams ("Others"-style classes).
pub fn ingest_raw(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.is_empty() {
        return Err(Error::Input("raw source file is empty".into()));
    }
    Ok(bytes.to_vec())
}

/// Cuts windows of `len` at offsets `0, stride, 2*stride, ...`, dropping the
/// trailing fragment. A stream shorter than one window yields no samples.
pub fn window_samples(
    stream: &[u8],
    len: usize,
    stride: usize,
    main: u16,
    subs: &[u16],
) -> Result<Vec<Sample>> {
    if len == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let mut out = Vec::new();
    if stream.len() < len {
        return Ok(out);
    }
    let mut offset = 0;
    while offset + len <= stream.len() {
        out.push(Sample {
            bytes: stream[offset..offset + len].to_vec(),
            main,
            subs: subs.to_vec(),
        });
        offset += stride;
    }
    Ok(out)
}

/// Caps each main label at `cap` samples (seeded uniform choice), then
/// shuffles the retained samples. Deterministic under the seed.
pub fn cap_and_shuffle(samples: Vec<Sample>, cap: usize, seed: u64) -> Vec<Sample> {
    let mut by_label: Vec<(u16, Vec<Sample>)> = Vec::new();
    for s in samples {
        match by_label.iter_mut().find(|(l, _)| *l == s.main) {
            Some((_, v)) => v.push(s),
            None => by_label.push((s.main, alloc::vec![s])),
        }
    }
    by_label.sort_by_key(|(l, _)| *l);
    let mut rng = Rng::new(seed);
    let mut kept = Vec::new();
    for (_, group) in by_label {
        if group.len() <= cap {
            kept.extend(group);
        } else {
            let picked = rng.sample_indices(group.len(), cap);
            let mut picked = picked;
            picked.sort_unstable();
            let mut group = group;
            // Drain in reverse so earlier indices stay valid.
            for &i in picked.iter().rev() {
                kept.push(group.swap_remove(i));
            }
        }
    }
    rng.shuffle(&mut kept);
    kept
}

/// Serializes samples into the container format described in the module docs.
pub fn corpus_write(
    samples: &[Sample],
    schema: &LabelSchema,
    window_len: usize,
) -> Result<Vec<u8>> {
    let sub_count = schema.subs.len();
    for (i, s) in samples.iter().enumerate() {
        if s.bytes.len() != window_len {
            return Err(Error::Input(format!(
                "sample {i} has {} bytes, container window is {window_len}",
                s.bytes.len()
            )));
        }
        if s.subs.len() != sub_count {
            return Err(Error::Input(format!(
                "sample {i} has {} sub labels, schema has {sub_count} heads",
                s.subs.len()
            )));
        }
        if s.main as usize >= schema.main.len() {
            return Err(Error::Schema(format!(
                "sample {i} main label {} out of range",
                s.main
            )));
        }
        for (h, &sid) in s.subs.iter().enumerate() {
            if sid as usize >= schema.subs[h].len() {
                return Err(Error::Schema(format!(
                    "sample {i} sub label {sid} out of range for head {h}"
                )));
            }
        }
    }
    let mut w = Writer::new();
    w.bytes(CORPUS_MAGIC);
    w.u16(CORPUS_VERSION);
    w.u32(window_len as u32);
    w.u16(sub_count as u16);
    w.u64(samples.len() as u64);
    w.u64(schema.digest());
    for s in samples {
        w.bytes(&s.bytes);
        w.u16(s.main);
        for &sid in &s.subs {
            w.u16(sid);
        }
    }
    Ok(w.buf)
}

/// Decoded container: samples plus the header fields needed to check it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub window_len: usize,
    pub sub_count: usize,
    pub schema_digest: u64,
    pub samples: Vec<Sample>,
}

/// Parses a container. The schema digest is checked when a schema is given.
pub fn corpus_read(bytes: &[u8], schema: Option<&LabelSchema>) -> Result<CorpusFile> {
    let mut r = Reader::new(bytes);
    let magic = r.bytes(4, "magic")?;
    if magic != CORPUS_MAGIC {
        return Err(Error::Integrity("bad corpus magic".into()));
    }
    let version = r.u16("version")?;
    if version != CORPUS_VERSION {
        return Err(Error::Integrity(format!(
            "unsupported corpus version {version}"
        )));
    }
    let window_len = r.u32("window length")? as usize;
    let sub_count = r.u16("sub label count")? as usize;
    let count = r.u64("sample count")? as usize;
    let digest = r.u64("schema digest")?;
    if let Some(schema) = schema {
        if schema.digest() != digest {
            return Err(Error::Schema(format!(
                "corpus was built against schema {digest:016x}, got {:016x}",
                schema.digest()
            )));
        }
        if schema.subs.len() != sub_count {
            return Err(Error::Schema(format!(
                "corpus has {sub_count} sub labels, schema has {} heads",
                schema.subs.len()
            )));
        }
    }
    let record = window_len + 2 + 2 * sub_count;
    if r.remaining() != count * record {
        return Err(Error::Integrity(format!(
            "payload is {} bytes, {count} samples of {record} bytes need {}",
            r.remaining(),
            count * record
        )));
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let bytes = r.bytes(window_len, "sample window")?.to_vec();
        let main = r.u16("main label")?;
        let mut subs = Vec::with_capacity(sub_count);
        for _ in 0..sub_count {
            subs.push(r.u16("sub label")?);
        }
        samples.push(Sample { bytes, main, subs });
    }
    Ok(CorpusFile {
        window_len,
        sub_count,
        schema_digest: digest,
        samples,
    })
}
