//! Batch evaluation of a response file against its dataset.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use veriseq::analyze::{analyze_sorting, summarize_sorting, SortAnalysis, SortSummary};
use veriseq::domain::{DatasetRecord, Instance, ResponseSet, Task};
use veriseq::metrics::{evaluate, Estimator, EvalConfig, MetricSummary, TruthContext};

use crate::responses::{join_responses, load_dataset, load_responses, ResponseRow};

/// Everything written by one evaluation run.
#[derive(Debug, Clone)]
pub struct EvalOutputs {
    pub metrics_csv: PathBuf,
    pub summary_json: PathBuf,
    pub sort_csv: Option<PathBuf>,
    pub summary: RunSummary,
}

/// The JSON summary: metric curves plus (for activity datasets) the
/// corpus-level sorting quality.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub task: Task,
    pub metrics: MetricSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sorting: Option<SortSummary>,
}

/// Joins responses to dataset records, evaluates Pass@k / self-consistency
/// curves, runs the sorting analysis for activity datasets, and writes
/// `metrics.csv`, `summary.json`, and `sort_analysis.csv` under `out_dir`.
///
/// When `k_max` is absent it defaults to the smallest per-instance sample
/// count, so uneven runs evaluate without an explicit flag.
pub fn evaluate_run(
    dataset_path: &Path,
    responses_path: &Path,
    k_max: Option<usize>,
    estimator: Estimator,
    out_dir: &Path,
) -> Result<EvalOutputs> {
    let records = load_dataset(dataset_path)?;
    if records.is_empty() {
        bail!("dataset {} is empty", dataset_path.display());
    }
    let rows = load_responses(responses_path)?;
    evaluate_loaded(&records, rows, k_max, estimator, out_dir)
}

pub fn evaluate_loaded(
    records: &[DatasetRecord],
    rows: Vec<ResponseRow>,
    k_max: Option<usize>,
    estimator: Estimator,
    out_dir: &Path,
) -> Result<EvalOutputs> {
    let task = records[0].task;
    if records.iter().any(|r| r.task != task) {
        bail!("dataset mixes tasks; evaluate one task at a time");
    }
    let grouped = join_responses(records, rows)?;
    if grouped.is_empty() {
        bail!("no responses joined to the dataset");
    }

    let k_max = k_max
        .or_else(|| grouped.iter().map(|(_, r)| r.len()).min())
        .unwrap_or(1);
    let config = EvalConfig::for_k_max(k_max).with_estimator(estimator);

    let mut sets = Vec::with_capacity(grouped.len());
    let mut contexts = Vec::with_capacity(grouped.len());
    let mut instances: Vec<(u64, Instance, Vec<String>)> = Vec::new();
    for (instance_id, texts) in grouped {
        let record = records
            .iter()
            .find(|r| r.seed == instance_id)
            .expect("joined above");
        let instance = record.instance()?;
        let truth = record.ground_truth()?;
        contexts.push(TruthContext {
            truth,
            valid_ids: instance.id_set(),
        });
        sets.push(ResponseSet::new(instance_id, texts.clone()));
        instances.push((instance_id, instance, texts));
    }

    let report = evaluate(&sets, &contexts, &config)?;

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let metrics_csv = out_dir.join("metrics.csv");
    let mut csv_buf = Vec::new();
    report.write_csv(&mut csv_buf)?;
    fs::write(&metrics_csv, csv_buf)?;

    let sorting = match task {
        Task::Activity => {
            let (csv_path, summary) = write_sort_analysis(&instances, out_dir)?;
            Some((csv_path, summary))
        }
        Task::Lis => None,
    };

    let summary = RunSummary {
        task,
        metrics: report.summary(),
        sorting: sorting.as_ref().map(|(_, s)| s.clone()),
    };
    let summary_json = out_dir.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&summary)?)?;

    Ok(EvalOutputs {
        metrics_csv,
        summary_json,
        sort_csv: sorting.map(|(p, _)| p),
        summary,
    })
}

/// Per-response sorting analysis rows plus the corpus summary.
pub fn write_sort_analysis(
    instances: &[(u64, Instance, Vec<String>)],
    out_dir: &Path,
) -> Result<(PathBuf, SortSummary)> {
    let path = out_dir.join("sort_analysis.csv");
    let mut wtr = csv::Writer::from_path(&path)?;
    wtr.write_record([
        "instance_id",
        "sample_idx",
        "extraction_success",
        "exact_sorted",
        "lcs_len",
        "lcs_frac",
        "best_method",
        "anchor",
    ])?;

    let mut analyses: Vec<SortAnalysis> = Vec::new();
    for (instance_id, instance, texts) in instances {
        let Instance::Activity(activity) = instance else {
            bail!("sorting analysis requires an activity dataset");
        };
        let truth_sorted = activity.sorted_order();
        for (sample_idx, text) in texts.iter().enumerate() {
            let analysis = analyze_sorting(text, activity, &truth_sorted);
            wtr.write_record([
                instance_id.to_string(),
                sample_idx.to_string(),
                u8::from(analysis.extraction_success).to_string(),
                u8::from(analysis.exact_sorted).to_string(),
                analysis.lcs_len.to_string(),
                analysis.lcs_frac.to_string(),
                analysis
                    .best_method
                    .map(|m| m.to_string())
                    .unwrap_or_default(),
                analysis.anchor.to_string(),
            ])?;
            analyses.push(analysis);
        }
    }
    wtr.flush()?;
    Ok((path, summarize_sorting(&analyses)))
}
