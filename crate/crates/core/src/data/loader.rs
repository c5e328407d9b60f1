//! GLUE-style TSV and JSONL dataset ingestion.
//!
//! TSV: UTF-8, tab-separated, header row naming columns out of
//! `text_a`, `text_b`, `label`, `split` (`text_a` and `label` required,
//! the label cell may be empty for unlabeled rows).
//! JSONL: one object per line with keys `text_a`, optional `text_b`,
//! optional `label`, optional `split`. Labels are strings mapped to indices
//! through the task spec's label names.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Example, TaskDataset, TRAIN_SPLIT};
use crate::error::{Error, Result};
use crate::model::{InputArity, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Tsv,
    Jsonl,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => Some(DatasetFormat::Tsv),
            Some("jsonl") => Some(DatasetFormat::Jsonl),
            _ => None,
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetFormat::Tsv => write!(f, "tsv"),
            DatasetFormat::Jsonl => write!(f, "jsonl"),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    text_a: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    text_b: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<String>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat, spec: &TaskSpec) -> Result<TaskDataset> {
    let content = fs::read_to_string(path).map_err(|e| {
        Error::Data {
            path: path.display().to_string(),
            line: 0,
            msg: format!("cannot read file: {e}"),
        }
    })?;
    let rows = match format {
        DatasetFormat::Tsv => parse_tsv(path, &content)?,
        DatasetFormat::Jsonl => parse_jsonl(path, &content)?,
    };

    let mut examples = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let label = match &row.label {
            None => None,
            Some(name) => Some(spec.label_index(name).ok_or_else(|| Error::Data {
                path: path.display().to_string(),
                line,
                msg: format!("unknown label '{name}' for task {}", spec.task_id),
            })?),
        };
        if spec.input_arity == InputArity::TwoSegment && row.text_b.is_none() {
            return Err(Error::Data {
                path: path.display().to_string(),
                line,
                msg: format!("task {} is two-segment but text_b is missing", spec.task_id),
            });
        }
        if row.text_a.trim().is_empty() {
            return Err(Error::Data {
                path: path.display().to_string(),
                line,
                msg: "text_a is empty".to_string(),
            });
        }
        examples.push(Example {
            id: examples.len() as u64,
            text_a: row.text_a,
            text_b: row.text_b,
            label,
            split: row.split.unwrap_or_else(|| TRAIN_SPLIT.to_string()),
        });
    }

    TaskDataset::new(spec.clone(), examples, path.display().to_string())
}

fn parse_tsv(path: &Path, content: &str) -> Result<Vec<(usize, JsonRow)>> {
    let data_err = |line: usize, msg: String| Error::Data {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| data_err(1, "missing header row".into()))?;
    let columns: Vec<&str> = header.split('\t').collect();
    for col in &columns {
        if !matches!(*col, "text_a" | "text_b" | "label" | "split") {
            return Err(data_err(1, format!("unknown column '{col}' in header")));
        }
    }
    let col_idx = |name: &str| columns.iter().position(|c| *c == name);
    let a_idx = col_idx("text_a").ok_or_else(|| data_err(1, "header lacks text_a column".into()))?;
    let label_idx = col_idx("label").ok_or_else(|| data_err(1, "header lacks label column".into()))?;
    let b_idx = col_idx("text_b");
    let split_idx = col_idx("split");

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(data_err(
                line_no,
                format!("expected {} columns, got {}", columns.len(), cells.len()),
            ));
        }
        let take = |idx: Option<usize>| -> Option<String> {
            idx.and_then(|j| {
                let v = cells[j].trim();
                if v.is_empty() {
                    None
                } else {
                    Some(v.to_string())
                }
            })
        };
        rows.push((
            line_no,
            JsonRow {
                text_a: cells[a_idx].to_string(),
                text_b: take(b_idx),
                label: take(Some(label_idx)),
                split: take(split_idx),
            },
        ));
    }
    Ok(rows)
}

fn parse_jsonl(path: &Path, content: &str) -> Result<Vec<(usize, JsonRow)>> {
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(line).map_err(|e| Error::Data {
            path: path.display().to_string(),
            line: line_no,
            msg: format!("malformed JSON row: {e}"),
        })?;
        rows.push((line_no, row));
    }
    Ok(rows)
}

/// Writes a dataset back out; inverse of [`load_dataset`] for round-trippable
/// fields (ids are re-assigned sequentially on reload).
pub fn write_dataset(dataset: &TaskDataset, path: &Path, format: DatasetFormat) -> Result<()> {
    let mut out = String::new();
    match format {
        DatasetFormat::Jsonl => {
            for ex in &dataset.examples {
                let row = JsonRow {
                    text_a: ex.text_a.clone(),
                    text_b: ex.text_b.clone(),
                    label: ex.label.map(|l| dataset.spec.label_names[l].clone()),
                    split: Some(ex.split.clone()),
                };
                out.push_str(&serde_json::to_string(&row).map_err(|e| Error::Format(e.to_string()))?);
                out.push('\n');
            }
        }
        DatasetFormat::Tsv => {
            out.push_str("text_a\ttext_b\tlabel\tsplit\n");
            for ex in &dataset.examples {
                let label = ex
                    .label
                    .map(|l| dataset.spec.label_names[l].clone())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    ex.text_a,
                    ex.text_b.clone().unwrap_or_default(),
                    label,
                    ex.split
                ));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}
