//! Shared data types: problem instances, ground truths, parsed responses,
//! reward specifications, and the JSONL dataset record format.
//!
//! All types are immutable values after construction and safe to share
//! across threads.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two problem families an instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Activity,
    Lis,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Activity => write!(f, "activity"),
            Task::Lis => write!(f, "lis"),
        }
    }
}

/// One activity row. The interval is half-open `[start, finish)` in integer
/// minutes since midnight, so an activity ending at T is compatible with one
/// starting at T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activity {
    pub id: u32,
    pub start: u32,
    pub finish: u32,
}

/// An activity-scheduling instance. Row ids are exactly `1..=m` in creation
/// order and every row satisfies `start < finish`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityInstance {
    activities: Vec<Activity>,
    seed: u64,
    hinted: bool,
}

impl ActivityInstance {
    /// Builds an instance from `(start, finish)` pairs, assigning ids 1..=m
    /// in order.
    pub fn new(intervals: &[(u32, u32)], seed: u64, hinted: bool) -> Result<Self> {
        let activities = intervals
            .iter()
            .enumerate()
            .map(|(i, &(start, finish))| Activity {
                id: (i + 1) as u32,
                start,
                finish,
            })
            .collect();
        Self::from_rows(activities, seed, hinted)
    }

    /// Builds an instance from explicit rows, validating the id and interval
    /// invariants.
    pub fn from_rows(activities: Vec<Activity>, seed: u64, hinted: bool) -> Result<Self> {
        for (i, a) in activities.iter().enumerate() {
            if a.id != (i + 1) as u32 {
                return Err(Error::InvalidInstance(format!(
                    "row {} has id {}, expected {}",
                    i,
                    a.id,
                    i + 1
                )));
            }
            if a.start >= a.finish {
                return Err(Error::InvalidInstance(format!(
                    "activity {} has start {} >= finish {}",
                    a.id, a.start, a.finish
                )));
            }
        }
        Ok(Self {
            activities,
            seed,
            hinted,
        })
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hinted(&self) -> bool {
        self.hinted
    }

    pub fn with_hinted(mut self, hinted: bool) -> Self {
        self.hinted = hinted;
        self
    }

    pub fn contains_id(&self, id: u32) -> bool {
        id >= 1 && (id as usize) <= self.activities.len()
    }

    pub fn id_set(&self) -> BTreeSet<u32> {
        (1..=self.activities.len() as u32).collect()
    }

    pub fn activity(&self, id: u32) -> Option<&Activity> {
        if self.contains_id(id) {
            Some(&self.activities[(id - 1) as usize])
        } else {
            None
        }
    }

    /// All row ids sorted by non-decreasing finish time, ties by smaller id.
    /// This is the reference order used by the greedy scheduler and by the
    /// sorting-match analyses.
    pub fn sorted_order(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (1..=self.activities.len() as u32).collect();
        ids.sort_by_key(|&id| (self.activities[(id - 1) as usize].finish, id));
        ids
    }
}

/// One row of a longest-increasing-subsequence instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LisRow {
    pub id: u32,
    pub value: i64,
}

/// An LIS instance. Row ids are exactly `1..=n` in row order; duplicate
/// values are permitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LisInstance {
    rows: Vec<LisRow>,
    seed: u64,
    hinted: bool,
}

impl LisInstance {
    pub fn new(values: &[i64], seed: u64, hinted: bool) -> Result<Self> {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &value)| LisRow {
                id: (i + 1) as u32,
                value,
            })
            .collect();
        Self::from_rows(rows, seed, hinted)
    }

    pub fn from_rows(rows: Vec<LisRow>, seed: u64, hinted: bool) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.id != (i + 1) as u32 {
                return Err(Error::InvalidInstance(format!(
                    "row {} has id {}, expected {}",
                    i,
                    r.id,
                    i + 1
                )));
            }
        }
        Ok(Self { rows, seed, hinted })
    }

    pub fn rows(&self) -> &[LisRow] {
        &self.rows
    }

    pub fn values(&self) -> Vec<i64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hinted(&self) -> bool {
        self.hinted
    }

    pub fn with_hinted(mut self, hinted: bool) -> Self {
        self.hinted = hinted;
        self
    }

    pub fn contains_id(&self, id: u32) -> bool {
        id >= 1 && (id as usize) <= self.rows.len()
    }

    pub fn id_set(&self) -> BTreeSet<u32> {
        (1..=self.rows.len() as u32).collect()
    }
}

/// Either task's instance behind one handle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    Activity(ActivityInstance),
    Lis(LisInstance),
}

impl Instance {
    pub fn task(&self) -> Task {
        match self {
            Instance::Activity(_) => Task::Activity,
            Instance::Lis(_) => Task::Lis,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Instance::Activity(a) => a.len(),
            Instance::Lis(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::Activity(a) => a.seed(),
            Instance::Lis(l) => l.seed(),
        }
    }

    pub fn hinted(&self) -> bool {
        match self {
            Instance::Activity(a) => a.hinted(),
            Instance::Lis(l) => l.hinted(),
        }
    }

    pub fn id_set(&self) -> BTreeSet<u32> {
        (1..=self.len() as u32).collect()
    }

    pub fn as_activity(&self) -> Option<&ActivityInstance> {
        match self {
            Instance::Activity(a) => Some(a),
            Instance::Lis(_) => None,
        }
    }

    pub fn as_lis(&self) -> Option<&LisInstance> {
        match self {
            Instance::Activity(_) => None,
            Instance::Lis(l) => Some(l),
        }
    }
}

/// The unique optimal id sequence in canonical reporting order plus its
/// cardinality. Activity solutions are listed by non-decreasing finish time
/// (ties by smaller id); LIS solutions by increasing row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    ids: Vec<u32>,
    answer: u32,
}

impl GroundTruth {
    pub fn new(ids: Vec<u32>) -> Self {
        let answer = ids.len() as u32;
        Self { ids, answer }
    }

    /// Rebuilds a ground truth from stored parts, checking that the answer
    /// matches the sequence length.
    pub fn from_parts(ids: Vec<u32>, answer: u32) -> Result<Self> {
        if answer as usize != ids.len() {
            return Err(Error::InvalidInstance(format!(
                "ground truth answer {} does not match sequence length {}",
                answer,
                ids.len()
            )));
        }
        Ok(Self { ids, answer })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn answer(&self) -> u32 {
        self.answer
    }
}

/// How a sorted-list candidate was recovered from free-form text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMethod {
    SortedBlockFull,
    IdsBraces,
    IdStream,
    CommaRun,
}

impl fmt::Display for CandidateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateMethod::SortedBlockFull => write!(f, "sorted_block_full"),
            CandidateMethod::IdsBraces => write!(f, "ids_braces"),
            CandidateMethod::IdStream => write!(f, "id_stream"),
            CandidateMethod::CommaRun => write!(f, "comma_run"),
        }
    }
}

/// One normalized candidate id sequence (valid ids only, first occurrence
/// kept, never empty).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub method: CandidateMethod,
    pub ids: Vec<u32>,
}

/// Structured view of one free-form response: the committed answer and id
/// sequence (last marker block wins), the format indicator, and any
/// sorted-list candidates recovered from the text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedOutput {
    pub answer: Option<i64>,
    pub ids: Option<Vec<u32>>,
    pub has_format: bool,
    pub sorted_candidates: Vec<Candidate>,
}

impl ParsedOutput {
    /// The full sorted-block candidate, when one was extracted.
    pub fn sorted_block_full(&self) -> Option<&[u32]> {
        self.sorted_candidates
            .iter()
            .find(|c| c.method == CandidateMethod::SortedBlockFull)
            .map(|c| c.ids.as_slice())
    }
}

/// Which reward to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Ans,
    AnsFmt,
    IdsExact,
    IdsPrefix,
    Sort,
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardKind::Ans => write!(f, "ans"),
            RewardKind::AnsFmt => write!(f, "ans_fmt"),
            RewardKind::IdsExact => write!(f, "ids_exact"),
            RewardKind::IdsPrefix => write!(f, "ids_prefix"),
            RewardKind::Sort => write!(f, "sort"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponent {
    pub kind: RewardKind,
    pub weight: f64,
}

fn default_lambda() -> f64 {
    0.1
}

fn default_gamma() -> f64 {
    0.1
}

/// Which rewards to compute and how to combine them. Weights must sum to 1
/// when more than one component is present, keeping the total in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub components: Vec<RewardComponent>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl RewardSpec {
    pub fn new(components: Vec<(RewardKind, f64)>) -> Self {
        Self {
            components: components
                .into_iter()
                .map(|(kind, weight)| RewardComponent { kind, weight })
                .collect(),
            lambda: default_lambda(),
            gamma: default_gamma(),
        }
    }

    /// A single component with weight 1.
    pub fn single(kind: RewardKind) -> Self {
        Self::new(vec![(kind, 1.0)])
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidConfig("reward spec has no components".into()));
        }
        for c in &self.components {
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "component {} has invalid weight {}",
                    c.kind, c.weight
                )));
            }
        }
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.len() > 1 && (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "weights of {} components sum to {}, expected 1",
                self.components.len(),
                sum
            )));
        }
        if self.components.len() == 1 && sum > 1.0 + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "single component weight {} exceeds 1",
                sum
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self::single(RewardKind::Ans)
    }
}

/// Sampling settings carried alongside a response set. Sampling itself
/// happens elsewhere; these are pass-through metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingMeta {
    pub temperature: f64,
    pub top_p: f64,
    pub k: usize,
}

/// All stochastic responses drawn for one instance, in fixed file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    pub instance_ref: u64,
    pub responses: Vec<String>,
    pub sampling_meta: SamplingMeta,
}

impl ResponseSet {
    pub fn new(instance_ref: u64, responses: Vec<String>) -> Self {
        let k = responses.len();
        Self {
            instance_ref,
            responses,
            sampling_meta: SamplingMeta {
                temperature: 0.6,
                top_p: 0.95,
                k,
            },
        }
    }

    pub fn k(&self) -> usize {
        self.responses.len()
    }
}

/// One row of the on-disk dataset record. Field names are part of the frozen
/// file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordRow {
    Activity { id: u32, start: u32, finish: u32 },
    Lis { id: u32, value: i64 },
}

/// One dataset line: everything needed to re-derive, verify, and prompt a
/// single instance. Serialized as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub task: Task,
    pub seed: u64,
    pub hinted: bool,
    pub rows: Vec<RecordRow>,
    pub ground_truth_ids: Vec<u32>,
    pub ground_truth_answer: u32,
    pub prompt: String,
}

impl DatasetRecord {
    pub fn from_parts(instance: &Instance, truth: &GroundTruth, prompt: String) -> Self {
        let rows = match instance {
            Instance::Activity(a) => a
                .activities()
                .iter()
                .map(|x| RecordRow::Activity {
                    id: x.id,
                    start: x.start,
                    finish: x.finish,
                })
                .collect(),
            Instance::Lis(l) => l
                .rows()
                .iter()
                .map(|r| RecordRow::Lis {
                    id: r.id,
                    value: r.value,
                })
                .collect(),
        };
        Self {
            task: instance.task(),
            seed: instance.seed(),
            hinted: instance.hinted(),
            rows,
            ground_truth_ids: truth.ids().to_vec(),
            ground_truth_answer: truth.answer(),
            prompt,
        }
    }

    /// Rebuilds the typed instance, validating row shape against the task
    /// tag.
    pub fn instance(&self) -> Result<Instance> {
        match self.task {
            Task::Activity => {
                let activities = self
                    .rows
                    .iter()
                    .map(|r| match *r {
                        RecordRow::Activity { id, start, finish } => {
                            Ok(Activity { id, start, finish })
                        }
                        RecordRow::Lis { id, .. } => Err(Error::InvalidInstance(format!(
                            "activity record contains a value row (id {id})"
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Instance::Activity(ActivityInstance::from_rows(
                    activities,
                    self.seed,
                    self.hinted,
                )?))
            }
            Task::Lis => {
                let rows = self
                    .rows
                    .iter()
                    .map(|r| match *r {
                        RecordRow::Lis { id, value } => Ok(LisRow { id, value }),
                        RecordRow::Activity { id, .. } => Err(Error::InvalidInstance(format!(
                            "lis record contains an interval row (id {id})"
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Instance::Lis(LisInstance::from_rows(
                    rows,
                    self.seed,
                    self.hinted,
                )?))
            }
        }
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        GroundTruth::from_parts(self.ground_truth_ids.clone(), self.ground_truth_answer)
    }
}

/// Sorts a set of activity ids into canonical reporting order: by
/// non-decreasing finish time, ties by smaller id. Duplicated input ids are
/// collapsed.
pub fn canonical_order_activity(ids: &[u32], instance: &ActivityInstance) -> Result<Vec<u32>> {
    for &id in ids {
        if !instance.contains_id(id) {
            return Err(Error::UnknownId { id });
        }
    }
    let set: BTreeSet<u32> = ids.iter().copied().collect();
    let mut out: Vec<u32> = set.into_iter().collect();
    out.sort_by_key(|&id| (instance.activities()[(id - 1) as usize].finish, id));
    Ok(out)
}

/// Renders an id sequence as the `\ids{a,b,c}` wire form with no internal
/// whitespace. An empty sequence renders as `\ids{}`.
pub fn id_sequence_to_wire(ids: &[u32]) -> String {
    let body = ids
        .iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!("\\ids{{{body}}}")
}

/// Renders the `\answer{n}` wire form.
pub fn answer_to_wire(answer: u32) -> String {
    format!("\\answer{{{answer}}}")
}
