//! Label schemas: main classes, per-head sub classes, and the coarser group
//! map used for grouped accuracy.
//!
//! Schemas ship as editable text; containers carry only a digest of the
//! canonical rendering, so a corpus and a report can be checked against the
//! schema they were built with.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::wire::fnv1a64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    pub main: Vec<String>,
    /// One name list per sub-net head.
    pub subs: Vec<Vec<String>>,
    pub group_names: Vec<String>,
    /// Head-0 sub class index -> group index. Identity when no groups are
    /// declared.
    pub group_of: Vec<usize>,
}

impl LabelSchema {
    /// Schema without an explicit group map: every head-0 class is its own
    /// group.
    pub fn new(main: Vec<String>, subs: Vec<Vec<String>>) -> Result<Self> {
        let head0 = subs.first().cloned().unwrap_or_default();
        let schema = LabelSchema {
            main,
            subs,
            group_names: head0.clone(),
            group_of: (0..head0.len()).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        // A classifier needs >= 2 classes per head, but that is checked at
        // model build time; a schema itself only needs to be non-degenerate.
        if self.main.is_empty() {
            return Err(Error::Schema("need at least 1 main class".into()));
        }
        for (j, names) in self.subs.iter().enumerate() {
            if names.is_empty() {
                return Err(Error::Schema(format!("sub head {j} has no classes")));
            }
        }
        if let Some(head0) = self.subs.first() {
            if self.group_of.len() != head0.len() {
                return Err(Error::Schema(format!(
                    "group map covers {} of {} head-0 classes",
                    self.group_of.len(),
                    head0.len()
                )));
            }
            for &g in &self.group_of {
                if g >= self.group_names.len() {
                    return Err(Error::Schema(format!("group index {g} out of range")));
                }
            }
        }
        for names in core::iter::once(&self.main)
            .chain(self.subs.iter())
            .chain(core::iter::once(&self.group_names))
        {
            let mut seen = names.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Schema("duplicate label name".into()));
            }
            if names
                .iter()
                .any(|n| n.is_empty() || n.contains(['\t', '\n', ',']))
            {
                return Err(Error::Schema(
                    "label names must be non-empty and free of tabs, commas, newlines".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn main_count(&self) -> usize {
        self.main.len()
    }

    pub fn sub_counts(&self) -> Vec<usize> {
        self.subs.iter().map(|s| s.len()).collect()
    }

    pub fn main_index(&self, name: &str) -> Option<u16> {
        self.main.iter().position(|n| n == name).map(|i| i as u16)
    }

    pub fn sub_index(&self, head: usize, name: &str) -> Option<u16> {
        self.subs
            .get(head)?
            .iter()
            .position(|n| n == name)
            .map(|i| i as u16)
    }

    /// Canonical text rendering; also what the digest is computed over.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.main {
            out.push_str(&format!("main\t{name}\n"));
        }
        for (j, names) in self.subs.iter().enumerate() {
            for name in names {
                out.push_str(&format!("sub\t{j}\t{name}\n"));
            }
        }
        let identity = self.group_names == self.subs.first().cloned().unwrap_or_default()
            && self.group_of.iter().enumerate().all(|(i, &g)| i == g);
        if !identity {
            if let Some(head0) = self.subs.first() {
                for (i, &g) in self.group_of.iter().enumerate() {
                    out.push_str(&format!("group\t{}\t{}\n", head0[i], self.group_names[g]));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut main = Vec::new();
        let mut subs: Vec<Vec<String>> = Vec::new();
        let mut group_lines: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["main", name] => main.push(name.to_string()),
                ["sub", head, name] => {
                    let head: usize = head.parse().map_err(|_| {
                        Error::Schema(format!("line {}: bad head index", lineno + 1))
                    })?;
                    while subs.len() <= head {
                        subs.push(Vec::new());
                    }
                    subs[head].push(name.to_string());
                }
                ["group", sub_name, group_name] => {
                    group_lines.push((sub_name.to_string(), group_name.to_string()));
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "line {}: expected 'main', 'sub' or 'group' record",
                        lineno + 1
                    )))
                }
            }
        }
        let mut schema = LabelSchema::new(main, subs)?;
        if !group_lines.is_empty() {
            let head0 = schema.subs.first().cloned().unwrap_or_default();
            let mut group_names: Vec<String> = Vec::new();
            let mut group_of = vec![usize::MAX; head0.len()];
            for (sub_name, group_name) in &group_lines {
                let idx = head0
                    .iter()
                    .position(|n| n == sub_name)
                    .ok_or_else(|| Error::Schema(format!("group for unknown class {sub_name}")))?;
                let g = match group_names.iter().position(|n| n == group_name) {
                    Some(g) => g,
                    None => {
                        group_names.push(group_name.clone());
                        group_names.len() - 1
                    }
                };
                group_of[idx] = g;
            }
            if group_of.iter().any(|&g| g == usize::MAX) {
                return Err(Error::Schema(
                    "group map must cover every head-0 class".into(),
                ));
            }
            schema.group_names = group_names;
            schema.group_of = group_of;
            schema.validate()?;
        }
        Ok(schema)
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(self.to_text().as_bytes())
    }
}
