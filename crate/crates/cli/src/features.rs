//! Feature-table export for LIS response corpora.
//!
//! Pools every stochastic response, regresses nothing itself: the output
//! CSV (features + the answer the model emitted + a grouped train/test
//! label) is the complete input for fitting a regressor externally.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};

use veriseq::analyze::{export_features, group_split, FeatureRecord, GroupSplit};
use veriseq::domain::{Instance, Task};
use veriseq::parse::parse_answer;

use crate::responses::{join_responses, load_dataset, load_responses};

#[derive(Debug, Clone)]
pub struct FeatureRunSummary {
    pub responses: usize,
    pub with_answer: usize,
    pub rows_written: usize,
    pub train_instances: usize,
    pub test_instances: usize,
}

/// Builds one feature row per response that carries a parseable answer,
/// splits instances into train/test groups by id, and writes the CSV.
pub fn run_features(
    dataset_path: &Path,
    responses_path: &Path,
    test_fraction: f64,
    split_seed: u64,
    out_path: &Path,
) -> Result<FeatureRunSummary> {
    let records = load_dataset(dataset_path)?;
    if records.iter().any(|r| r.task != Task::Lis) {
        bail!("feature export requires an LIS dataset");
    }
    let rows = load_responses(responses_path)?;
    let grouped = join_responses(&records, rows)?;

    let mut feature_records: Vec<FeatureRecord> = Vec::new();
    let mut responses = 0usize;
    let mut ids: Vec<u64> = Vec::new();
    for (instance_id, texts) in &grouped {
        let record = records
            .iter()
            .find(|r| r.seed == *instance_id)
            .expect("joined above");
        let Instance::Lis(lis) = record.instance()? else {
            bail!("feature export requires an LIS dataset");
        };
        ids.push(*instance_id);
        let values = lis.values();
        for text in texts {
            responses += 1;
            if let Some(answer) = parse_answer(text) {
                feature_records.push(FeatureRecord {
                    instance_id: *instance_id,
                    values: values.clone(),
                    target: answer,
                });
            }
        }
    }
    if ids.is_empty() {
        bail!("no responses joined to the dataset");
    }

    let split: GroupSplit = group_split(&ids, test_fraction, split_seed)?;
    let file = File::create(out_path)
        .with_context(|| format!("creating feature table {}", out_path.display()))?;
    let rows_written = export_features(&feature_records, &split, file)?;

    Ok(FeatureRunSummary {
        responses,
        with_answer: feature_records.len(),
        rows_written,
        train_instances: split.train.len(),
        test_instances: split.test.len(),
    })
}
