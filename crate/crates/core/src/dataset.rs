//! JSON-lines dataset format: one prompt sequence per line.
//!
//! Each line is one JSON object:
//! `{"task": str, "n": int, "xs": ["0101…", …], "ys": [0,1,…],
//!   "teach_len": int, "func": {…}|null, "seed": int}`.
//! Bit strings list coordinates in index order — character `j` is coordinate
//! `j` — and have length exactly `n`. `func` is the generator function in its
//! canonical JSON encoding, or `null` for sequence-labeled tasks with no
//! pointwise generator (nearest neighbor).

use crate::bits::BitVec;
use crate::boolfn::FunctionSpec;
use crate::sampler::PromptSequence;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct Record {
    task: String,
    n: usize,
    xs: Vec<String>,
    ys: Vec<u8>,
    teach_len: usize,
    func: Option<FunctionSpec>,
    seed: u64,
}

fn bits_to_string(x: &BitVec) -> String {
    x.bits().iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

fn string_to_bits(s: &str, n: usize) -> Result<BitVec> {
    if s.len() != n {
        return Err(Error::Parse(format!("bit string {s:?} has length {} (expected {n})", s.len())));
    }
    let bits = s
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(Error::Parse(format!("bit string {s:?} holds {other:?}"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    BitVec::from_bits(bits)
}

fn to_record(seq: &PromptSequence) -> Record {
    Record {
        task: seq.task_tag.clone(),
        n: seq.xs.first().map_or(0, BitVec::len),
        xs: seq.xs.iter().map(bits_to_string).collect(),
        ys: seq.ys.clone(),
        teach_len: seq.teach_len,
        func: seq.func.clone(),
        seed: seq.seed,
    }
}

fn from_record(rec: Record) -> Result<PromptSequence> {
    if rec.xs.is_empty() {
        return Err(Error::Parse("dataset record has no points".to_string()));
    }
    if rec.ys.len() != rec.xs.len() {
        return Err(Error::Parse(format!(
            "{} labels for {} points",
            rec.ys.len(),
            rec.xs.len()
        )));
    }
    if let Some(bad) = rec.ys.iter().find(|&&y| y > 1) {
        return Err(Error::Parse(format!("label {bad} is not 0/1")));
    }
    if rec.teach_len > rec.xs.len() {
        return Err(Error::Parse(format!(
            "teach_len {} exceeds sequence length {}",
            rec.teach_len,
            rec.xs.len()
        )));
    }
    if let Some(f) = &rec.func {
        if f.n != rec.n {
            return Err(Error::Parse(format!(
                "function is over {} variables but record says n={}",
                f.n, rec.n
            )));
        }
    }
    let xs = rec.xs.iter().map(|s| string_to_bits(s, rec.n)).collect::<Result<Vec<_>>>()?;
    Ok(PromptSequence {
        xs,
        ys: rec.ys,
        teach_len: rec.teach_len,
        func: rec.func,
        seed: rec.seed,
        task_tag: rec.task,
    })
}

/// Encode sequences as JSON lines (one object per line, trailing newline).
pub fn to_jsonl_string(seqs: &[PromptSequence]) -> Result<String> {
    let mut out = String::new();
    for seq in seqs {
        out.push_str(&serde_json::to_string(&to_record(seq))?);
        out.push('\n');
    }
    Ok(out)
}

/// Decode JSON lines; blank lines are ignored, anything else must parse and
/// validate.
pub fn from_jsonl_str(s: &str) -> Result<Vec<PromptSequence>> {
    s.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
            from_record(rec).map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
        })
        .collect()
}

/// Write sequences to `path` as JSON lines, creating parent directories.
pub fn write_jsonl(path: &Path, seqs: &[PromptSequence]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_jsonl_string(seqs)?)?;
    Ok(())
}

/// Read a JSON-lines dataset from `path`.
pub fn read_jsonl(path: &Path) -> Result<Vec<PromptSequence>> {
    from_jsonl_str(&fs::read_to_string(path)?)
}
