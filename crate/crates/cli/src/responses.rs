//! Loading of dataset and response JSONL files and the join between them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use veriseq::domain::DatasetRecord;

/// One response line: which instance it answers (by dataset seed), the
/// sample index within that instance's draw, and the raw text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRow {
    pub instance_id: u64,
    pub sample_idx: u64,
    pub text: String,
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line)
            .with_context(|| format!("dataset line {} is not a valid record", i + 1))?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_responses(path: &Path) -> Result<Vec<ResponseRow>> {
    let file = File::open(path).with_context(|| format!("opening responses {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ResponseRow = serde_json::from_str(&line)
            .with_context(|| format!("response line {} is not a valid row", i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Groups response rows by instance id, preserving file order both across
/// first appearances and within each group. Rows that do not join to any
/// dataset record are collected and reported as one itemized error.
pub fn join_responses(
    records: &[DatasetRecord],
    rows: Vec<ResponseRow>,
) -> Result<Vec<(u64, Vec<String>)>> {
    let known: HashMap<u64, ()> = records.iter().map(|r| (r.seed, ())).collect();
    let mut order: Vec<u64> = Vec::new();
    let mut groups: HashMap<u64, Vec<String>> = HashMap::new();
    let mut unjoined: Vec<String> = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        if !known.contains_key(&row.instance_id) {
            unjoined.push(format!(
                "row {} (sample_idx {}) references unknown instance {}",
                i + 1,
                row.sample_idx,
                row.instance_id
            ));
            continue;
        }
        groups
            .entry(row.instance_id)
            .or_insert_with(|| {
                order.push(row.instance_id);
                Vec::new()
            })
            .push(row.text);
    }
    if !unjoined.is_empty() {
        bail!(
            "{} response rows do not join to the dataset:\n{}",
            unjoined.len(),
            unjoined.join("\n")
        );
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let texts = groups.remove(&id).expect("grouped above");
            (id, texts)
        })
        .collect())
}
