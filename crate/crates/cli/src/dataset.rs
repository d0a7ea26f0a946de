//! Dataset construction and verification.
//!
//! Building is fully determined by the spec and master seed: per-instance
//! seeds come from a fixed splittable stream, hint flags are spread
//! deterministically to hit the requested fraction exactly, and instances
//! whose row count falls in the held-out length set go to the test file.
//! Everything is re-checkable after the fact by `verify`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use veriseq::domain::{DatasetRecord, GroundTruth, Instance, Task};
use veriseq::generate::{
    brute_force_activity, brute_force_lis, count_lis_length_and_number, count_optima_and_backtrack,
    derive_seed, generate_activity, generate_lis, greedy_earliest_finish, GeneratorConfig,
};
use veriseq::prompt::{render_prompt, PromptVariant};

/// What to build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSpec {
    pub task: Task,
    pub total_instances: usize,
    pub hinted_fraction: f64,
    pub m_min: usize,
    pub m_max: usize,
    pub test_length_set: BTreeSet<usize>,
    pub master_seed: u64,
    pub generator: GeneratorConfigDto,
}

/// Serializable mirror of the generator bounds, snapshotted in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfigDto {
    pub s_max: u32,
    pub d_min: u32,
    pub d_max: u32,
    pub v_min: i64,
    pub v_max: i64,
    pub max_tries: u32,
}

impl Default for GeneratorConfigDto {
    fn default() -> Self {
        let c = GeneratorConfig::default();
        Self {
            s_max: c.s_max,
            d_min: c.d_min,
            d_max: c.d_max,
            v_min: c.v_min,
            v_max: c.v_max,
            max_tries: c.max_tries,
        }
    }
}

impl DatasetSpec {
    pub fn new(task: Task, master_seed: u64) -> Self {
        Self {
            task,
            total_instances: 2000,
            hinted_fraction: 0.5,
            m_min: 5,
            m_max: 16,
            test_length_set: [14, 15, 16].into_iter().collect(),
            master_seed,
            generator: GeneratorConfigDto::default(),
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            m_min: self.m_min,
            m_max: self.m_max,
            s_max: self.generator.s_max,
            d_min: self.generator.d_min,
            d_max: self.generator.d_max,
            v_min: self.generator.v_min,
            v_max: self.generator.v_max,
            max_tries: self.generator.max_tries,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_instances == 0 {
            bail!("total_instances must be positive");
        }
        if !(0.0..=1.0).contains(&self.hinted_fraction) {
            bail!("hinted_fraction {} outside [0, 1]", self.hinted_fraction);
        }
        if let Some(&bad) = self
            .test_length_set
            .iter()
            .find(|&&l| l < self.m_min || l > self.m_max)
        {
            bail!(
                "test length {} outside the sampled range {}..={}",
                bad,
                self.m_min,
                self.m_max
            );
        }
        veriseq::generate::GeneratorConfig::validate(&self.generator_config())
            .map_err(anyhow::Error::from)?;
        Ok(())
    }
}

/// Even spread of hint flags: index i is hinted iff the running quota
/// `floor((i+1) * fraction)` increases, which assigns exactly
/// `floor(fraction * total)` hinted instances. At fraction 0.5 this is
/// alternation by index parity.
pub fn hinted_at(index: usize, fraction: f64) -> bool {
    let quota_before = ((index as f64) * fraction).floor() as usize;
    let quota_after = ((index as f64 + 1.0) * fraction).floor() as usize;
    quota_after > quota_before
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub total: usize,
    pub train: usize,
    pub test: usize,
    pub hinted: usize,
}

/// Build provenance written alongside the dataset: the resolved spec, a
/// hash over it, and the record counts. `created_at_unix` is the only
/// non-deterministic field.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub task: Task,
    pub master_seed: u64,
    /// How each record's `seed` field relates to the master seed.
    pub seed_scheme: String,
    pub total_instances: usize,
    pub hinted_fraction: f64,
    pub length_range: [usize; 2],
    pub test_length_set: Vec<usize>,
    pub generator: GeneratorConfigDto,
    pub config_hash: String,
    pub counts: ManifestCounts,
    pub train_file: String,
    pub test_file: String,
    pub created_at_unix: u64,
}

/// Documented in the manifest so a dataset can be regenerated or extended
/// without reading the code.
pub const SEED_SCHEME: &str = "splitmix64 output stream of master_seed by instance index";

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub manifest_path: PathBuf,
    pub counts: ManifestCounts,
}

fn config_hash(spec: &DatasetSpec) -> String {
    let canonical = serde_json::to_vec(spec).expect("spec serializes");
    let digest = Sha256::digest(&canonical);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Generates every instance, renders its prompt, and writes the train/test
/// JSONL files plus the manifest into `out_dir`.
pub fn build_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<BuildOutput> {
    spec.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let config = spec.generator_config();
    let mut train_lines: Vec<String> = Vec::new();
    let mut test_lines: Vec<String> = Vec::new();
    let mut hinted_count = 0usize;
    let mut seen_seeds: BTreeSet<u64> = BTreeSet::new();

    for index in 0..spec.total_instances {
        let seed = derive_seed(spec.master_seed, index as u64);
        if !seen_seeds.insert(seed) {
            bail!("derived seed collision at index {index}; pick another master seed");
        }
        let hinted = hinted_at(index, spec.hinted_fraction);
        if hinted {
            hinted_count += 1;
        }

        let (instance, truth): (Instance, GroundTruth) = match spec.task {
            Task::Activity => {
                let (inst, truth) = generate_activity(&config, seed)?;
                (Instance::Activity(inst.with_hinted(hinted)), truth)
            }
            Task::Lis => {
                let (inst, truth) = generate_lis(&config, seed)?;
                (Instance::Lis(inst.with_hinted(hinted)), truth)
            }
        };

        let prompt = render_prompt(&instance, PromptVariant::new(spec.task, hinted))?;
        let record = DatasetRecord::from_parts(&instance, &truth, prompt);
        let line = serde_json::to_string(&record)?;
        if spec.test_length_set.contains(&instance.len()) {
            test_lines.push(line);
        } else {
            train_lines.push(line);
        }
    }

    let train_file = format!("{}_train.jsonl", spec.task);
    let test_file = format!("{}_test.jsonl", spec.task);
    let train_path = out_dir.join(&train_file);
    let test_path = out_dir.join(&test_file);
    write_lines(&train_path, &train_lines)?;
    write_lines(&test_path, &test_lines)?;

    let counts = ManifestCounts {
        total: spec.total_instances,
        train: train_lines.len(),
        test: test_lines.len(),
        hinted: hinted_count,
    };
    let manifest = Manifest {
        task: spec.task,
        master_seed: spec.master_seed,
        seed_scheme: SEED_SCHEME.to_string(),
        total_instances: spec.total_instances,
        hinted_fraction: spec.hinted_fraction,
        length_range: [spec.m_min, spec.m_max],
        test_length_set: spec.test_length_set.iter().copied().collect(),
        generator: spec.generator,
        config_hash: config_hash(spec),
        counts: counts.clone(),
        train_file,
        test_file,
        created_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let manifest_path = out_dir.join(format!("{}_manifest.json", spec.task));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    Ok(BuildOutput {
        train_path,
        test_path,
        manifest_path,
        counts,
    })
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    for line in lines {
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// One detected inconsistency in a dataset file.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub record_index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub records: usize,
    pub brute_force_checked: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-derives every certificate stored in a dataset file: uniqueness under
/// the counting DP, agreement of the stored ground truth with the DP
/// reconstruction and (for activities) the greedy pass, prompt fidelity,
/// and — for instances at or below `brute_max` rows — full agreement with
/// exhaustive enumeration.
pub fn verify_dataset(records: &[DatasetRecord], brute_max: usize) -> VerifyReport {
    let mut violations = Vec::new();
    let mut brute_checked = 0usize;

    for (index, record) in records.iter().enumerate() {
        let mut complain = |message: String| {
            violations.push(Violation {
                record_index: index,
                seed: record.seed,
                message,
            });
        };

        let instance = match record.instance() {
            Ok(i) => i,
            Err(e) => {
                complain(format!("invalid rows: {e}"));
                continue;
            }
        };
        let truth = match record.ground_truth() {
            Ok(t) => t,
            Err(e) => {
                complain(format!("invalid ground truth: {e}"));
                continue;
            }
        };

        match render_prompt(&instance, PromptVariant::new(record.task, record.hinted)) {
            Ok(prompt) => {
                if prompt != record.prompt {
                    complain("stored prompt does not match re-render".into());
                }
            }
            Err(e) => complain(format!("prompt re-render failed: {e}")),
        }

        match &instance {
            Instance::Activity(a) => {
                let counted = count_optima_and_backtrack(a);
                if counted.unique_solution.as_deref() != Some(truth.ids()) {
                    complain(format!(
                        "optimum count {} / solution mismatch (expected {:?})",
                        counted.count,
                        truth.ids()
                    ));
                    continue;
                }
                let greedy: BTreeSet<u32> = greedy_earliest_finish(a).into_iter().collect();
                let stored: BTreeSet<u32> = truth.ids().iter().copied().collect();
                if greedy != stored {
                    complain("greedy pass disagrees with stored solution".into());
                }
                if a.len() <= brute_max {
                    brute_checked += 1;
                    match brute_force_activity(a) {
                        Ok(brute) => {
                            if brute.count != 1 || brute.optima[0] != truth.ids() {
                                complain("exhaustive enumeration disagrees".into());
                            }
                        }
                        Err(e) => complain(format!("brute force failed: {e}")),
                    }
                }
            }
            Instance::Lis(l) => {
                let values = l.values();
                match count_lis_length_and_number(&values) {
                    Ok(counted) => {
                        if counted.unique_solution.as_deref() != Some(truth.ids()) {
                            complain(format!(
                                "LIS count {} / solution mismatch (expected {:?})",
                                counted.count,
                                truth.ids()
                            ));
                            continue;
                        }
                        if counted.opt < 2 {
                            complain("LIS length below 2".into());
                        }
                    }
                    Err(e) => {
                        complain(format!("LIS count failed: {e}"));
                        continue;
                    }
                }
                if l.len() <= brute_max {
                    brute_checked += 1;
                    match brute_force_lis(&values) {
                        Ok(brute) => {
                            let expected: Vec<u32> =
                                brute.optima[0].iter().map(|&i| i as u32).collect();
                            if brute.count != 1 || expected != truth.ids() {
                                complain("exhaustive enumeration disagrees".into());
                            }
                        }
                        Err(e) => complain(format!("brute force failed: {e}")),
                    }
                }
            }
        }
    }

    VerifyReport {
        records: records.len(),
        brute_force_checked: brute_checked,
        violations,
    }
}
