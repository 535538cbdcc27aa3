//! JSONL transcript corpora: one dialogue per line, each tagged with the
//! fingerprint of the config that produced it.

use std::collections::BTreeSet;
use std::path::Path;

use persona_bargain::DialogueRecord;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CORPUS_FILE: &str = "dialogues.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub fingerprint: String,
    #[serde(flatten)]
    pub record: DialogueRecord,
}

impl CorpusLine {
    pub fn to_line(&self) -> Result<String> {
        let mut s = serde_json::to_string(self).map_err(CliError::runtime)?;
        s.push('\n');
        Ok(s)
    }
}

/// A parsed corpus. `fingerprint` joins the distinct fingerprints with `+`
/// when mixing was explicitly allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub fingerprint: String,
    pub records: Vec<DialogueRecord>,
}

/// Result of scanning a corpus that may end in a partially written line.
#[derive(Debug)]
pub struct Scan {
    pub lines: Vec<CorpusLine>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    /// True when bytes past `valid_len` were found.
    pub torn_tail: bool,
}

/// Splits `text` into complete lines. A final line without its newline, or
/// one that fails to parse, is treated as torn; a bad line anywhere else is
/// corruption.
pub fn scan(text: &str) -> Result<Scan> {
    let mut lines = Vec::new();
    let mut offset = 0usize;
    let mut rest = text;
    let mut number = 0;
    while !rest.is_empty() {
        number += 1;
        let Some(end) = rest.find('\n') else { break };
        let raw = &rest[..end];
        let after = &rest[end + 1..];
        if !raw.trim().is_empty() {
            match serde_json::from_str::<CorpusLine>(raw) {
                Ok(l) => lines.push(l),
                Err(_) if after.trim().is_empty() => break,
                Err(e) => return Err(CliError::Runtime(format!("corpus line {number}: {e}"))),
            }
        }
        offset += end + 1;
        rest = after;
    }
    Ok(Scan {
        lines,
        valid_len: offset as u64,
        torn_tail: offset < text.len(),
    })
}

/// Loads a finished corpus. Mixed fingerprints are refused unless `force`.
pub fn read_corpus(path: impl AsRef<Path>, force: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let scan = scan(&text)?;
    if scan.torn_tail {
        return Err(CliError::Runtime(format!(
            "{}: trailing partial line; rerun simulate to resume the batch",
            path.display()
        )));
    }
    let fingerprints: BTreeSet<&str> = scan.lines.iter().map(|l| l.fingerprint.as_str()).collect();
    if fingerprints.len() > 1 && !force {
        return Err(CliError::Runtime(format!(
            "{}: corpus mixes {} config fingerprints; pass --force to analyze anyway",
            path.display(),
            fingerprints.len()
        )));
    }
    let fingerprint = fingerprints.into_iter().collect::<Vec<_>>().join("+");
    Ok(Corpus {
        fingerprint,
        records: scan.lines.into_iter().map(|l| l.record).collect(),
    })
}
