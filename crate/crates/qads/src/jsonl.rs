//! JSONL persistence for samples and quality tables.
//!
//! Sample lines look like `{"id": .., "dataset": .., "question": .., "answer": ..}`.
//! On input `id` and `dataset` are optional: missing ids become
//! `<dataset>:<line>` and the dataset name always comes from the caller.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qads_core::corpus::{Corpus, Sample};
use qads_core::quality::{QualityRow, QualityTable};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> std::result::Result<Option<String>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("field {key} is not a string")),
    }
}

pub fn load_jsonl(path: impl AsRef<Path>, dataset_name: &str) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let mut samples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, text) in numbered_lines(path)? {
        let at = |message: String| Error::Line {
            path: path.to_path_buf(),
            line,
            message,
        };
        let value: Value = serde_json::from_str(&text).map_err(|e| at(format!("malformed JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(at("expected a JSON object".to_string()));
        };
        let required = |key: &str| {
            string_field(&obj, key)?
                .filter(|s| !s.is_empty())
                .ok_or_else(|| format!("missing field {key}"))
        };
        let question = required("question").map_err(at)?;
        let answer = required("answer").map_err(at)?;
        let id = match string_field(&obj, "id").map_err(at)? {
            Some(id) if !id.is_empty() => id,
            _ => format!("{dataset_name}:{line}"),
        };
        if let Some(&first) = seen.get(&id) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id,
                first,
                second: line,
            });
        }
        seen.insert(id.clone(), line);
        samples.push(Sample {
            id,
            dataset: dataset_name.to_string(),
            question,
            answer,
        });
    }
    Ok(samples)
}

fn write_lines<T: Serialize>(items: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(Error::json(path))?;
        w.write_all(b"\n").map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_jsonl<'a>(samples: impl IntoIterator<Item = &'a Sample>, path: impl AsRef<Path>) -> Result<()> {
    write_lines(samples, path.as_ref())
}

/// Loads `(dataset name, path)` pairs into one corpus. Files are read in
/// parallel; ids must be unique across all of them.
pub fn load_corpus(inputs: &[(String, PathBuf)]) -> Result<Corpus> {
    let fragments = inputs
        .par_iter()
        .map(|(name, path)| load_jsonl(path, name))
        .collect::<Vec<_>>();
    let mut corpus = Corpus::new();
    for ((name, _), frag) in inputs.iter().zip(fragments) {
        corpus.insert(name.clone(), frag?)?;
    }
    Ok(corpus)
}

pub fn write_quality(table: &QualityTable, path: impl AsRef<Path>) -> Result<()> {
    write_lines(table.rows(), path.as_ref())
}

pub fn load_quality(path: impl AsRef<Path>) -> Result<QualityTable> {
    let path = path.as_ref();
    let mut table = QualityTable::new();
    for (line, text) in numbered_lines(path)? {
        let at = |message: String| Error::Line {
            path: path.to_path_buf(),
            line,
            message,
        };
        let row: QualityRow = serde_json::from_str(&text).map_err(|e| at(e.to_string()))?;
        table.insert(row).map_err(|e| at(e.to_string()))?;
    }
    Ok(table)
}

/// Reads `{"id": .., "qs": ..}` lines without range checks, for scorer
/// predictions that may live on a different scale.
pub fn load_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    #[derive(serde::Deserialize)]
    struct Row {
        id: String,
        qs: f64,
    }
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    let mut lines_of: HashMap<String, usize> = HashMap::new();
    for (line, text) in numbered_lines(path)? {
        let row: Row = serde_json::from_str(&text).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if let Some(&first) = lines_of.get(&row.id) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id: row.id,
                first,
                second: line,
            });
        }
        lines_of.insert(row.id.clone(), line);
        out.insert(row.id, row.qs);
    }
    Ok(out)
}
