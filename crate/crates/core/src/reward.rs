//! Verifiable reward functions over parsed responses.
//!
//! Five components are available — answer match, answer plus format bonus,
//! exact id-sequence match, common-prefix partial credit, and sorted-order
//! match — combined by a weighted [`RewardSpec`]. Every component and every
//! total lies in [0, 1], and scoring is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::domain::{GroundTruth, Instance, ParsedOutput, RewardKind, RewardSpec, Task};
use crate::error::{Error, Result};
use crate::parse::{parse_response, ExtractionResult};

/// Whether the answer and id markers parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    NoAnswer,
    NoIds,
    NoBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub kind: RewardKind,
    pub raw: f64,
    pub weight: f64,
}

/// One scored response: the weighted total, each component's raw value, and
/// the parse status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub per_component: Vec<ComponentScore>,
    pub parse_status: ParseStatus,
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// 1 iff the parsed answer equals the ground-truth answer; a missing answer
/// scores 0.
pub fn reward_ans(parsed: &ParsedOutput, truth: &GroundTruth) -> f64 {
    indicator(parsed.answer == Some(i64::from(truth.answer())))
}

/// Mixes answer correctness with the format indicator:
/// `(1 - lambda) * ans + lambda * fmt`.
pub fn reward_ans_fmt(parsed: &ParsedOutput, truth: &GroundTruth, lambda: f64) -> f64 {
    (1.0 - lambda) * reward_ans(parsed, truth) + lambda * indicator(parsed.has_format)
}

/// 1 iff the parsed id sequence equals the ground truth element-wise in
/// order; parse failure scores 0.
pub fn reward_ids_exact(parsed: &ParsedOutput, truth: &GroundTruth) -> f64 {
    indicator(parsed.ids.as_deref() == Some(truth.ids()))
}

fn common_prefix_len(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Partial credit `m / L` for the longest common prefix of length `m` with
/// the ground truth of length `L`, minus `gamma` when the parse failed or
/// the predicted length is wrong, clipped at 0.
pub fn reward_ids_prefix(parsed: &ParsedOutput, truth: &GroundTruth, gamma: f64) -> f64 {
    let l = truth.ids().len();
    if l == 0 {
        return 0.0;
    }
    let (m, length_ok) = match &parsed.ids {
        Some(ids) => (common_prefix_len(ids, truth.ids()), ids.len() == l),
        None => (0, false),
    };
    let penalty = if length_ok { 0.0 } else { gamma };
    (m as f64 / l as f64 - penalty).max(0.0)
}

/// 1 iff a full sorted-block candidate was extracted and equals the
/// canonical sorted order exactly.
pub fn reward_sort(extraction: &ExtractionResult, truth_sorted: &[u32]) -> f64 {
    indicator(extraction.sorted_block_full.as_deref() == Some(truth_sorted))
}

/// Parses a response once and computes the weighted combination requested by
/// `spec`, clamping the total into [0, 1].
///
/// Rejects specs that request the sort component on a non-activity task.
pub fn score(
    text: &str,
    instance: &Instance,
    truth: &GroundTruth,
    spec: &RewardSpec,
) -> Result<RewardBreakdown> {
    spec.validate()?;
    let wants_sort = spec.components.iter().any(|c| c.kind == RewardKind::Sort);
    if wants_sort && instance.task() != Task::Activity {
        return Err(Error::InvalidConfig(
            "sort reward is only defined for the activity task".into(),
        ));
    }

    let parsed = parse_response(text, instance);
    let truth_sorted = instance.as_activity().map(|a| a.sorted_order());

    let per_component: Vec<ComponentScore> = spec
        .components
        .iter()
        .map(|c| {
            let raw = match c.kind {
                RewardKind::Ans => reward_ans(&parsed, truth),
                RewardKind::AnsFmt => reward_ans_fmt(&parsed, truth, spec.lambda),
                RewardKind::IdsExact => reward_ids_exact(&parsed, truth),
                RewardKind::IdsPrefix => reward_ids_prefix(&parsed, truth, spec.gamma),
                RewardKind::Sort => {
                    let sorted = truth_sorted.as_deref().expect("activity task checked");
                    indicator(parsed.sorted_block_full() == Some(sorted))
                }
            };
            ComponentScore {
                kind: c.kind,
                raw,
                weight: c.weight,
            }
        })
        .collect();

    let total: f64 = per_component
        .iter()
        .map(|c| c.weight * c.raw)
        .sum::<f64>()
        .clamp(0.0, 1.0);

    let parse_status = match (parsed.answer.is_some(), parsed.ids.is_some()) {
        (true, true) => ParseStatus::Ok,
        (false, true) => ParseStatus::NoAnswer,
        (true, false) => ParseStatus::NoIds,
        (false, false) => ParseStatus::NoBoth,
    };

    Ok(RewardBreakdown {
        total,
        per_component,
        parse_status,
    })
}
