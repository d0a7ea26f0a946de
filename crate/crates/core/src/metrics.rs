//! Pass@k and self-consistency evaluation over response sets.
//!
//! Pass@k comes in two estimators: `prefix` (did any of the first k samples
//! succeed) and `unbiased` (expected success over uniformly drawn k-subsets
//! of all n samples, `1 - C(n-c,k)/C(n,k)`, evaluated with exact big-integer
//! binomials). Self-consistency takes the mode over the first k parsed
//! predictions with deterministic tie-breaking: numerically smallest for
//! answers, lexicographically smallest for id sequences.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::Write;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::domain::{GroundTruth, ResponseSet};
use crate::error::{Error, Result};
use crate::parse::{parse_answer, parse_ids};

/// How Pass@k is estimated for k below the sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Indicator that any of the first k samples is correct.
    Prefix,
    /// Unbiased combinatorial estimator over all k-subsets.
    Unbiased,
}

/// Evaluation settings: which k values to report and how.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    pub k_max: usize,
    pub curve_ks: Vec<usize>,
    pub estimator: Estimator,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self::for_k_max(256)
    }
}

impl EvalConfig {
    /// Powers of two up to `k_max`, always including `k_max` itself.
    pub fn for_k_max(k_max: usize) -> Self {
        let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2))
            .take_while(|&k| k <= k_max)
            .collect();
        if ks.last() != Some(&k_max) {
            ks.push(k_max);
        }
        Self {
            k_max,
            curve_ks: ks,
            estimator: Estimator::Unbiased,
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be positive".into()));
        }
        if self.curve_ks.is_empty() {
            return Err(Error::InvalidConfig("curve_ks is empty".into()));
        }
        for &k in &self.curve_ks {
            if k == 0 || k > self.k_max {
                return Err(Error::InvalidConfig(format!(
                    "curve k {} outside 1..={}",
                    k, self.k_max
                )));
            }
        }
        Ok(())
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut c = BigUint::from(1u32);
    for i in 1..=k {
        c = c * (n - k + i) / i;
    }
    c
}

/// Exact-ratio conversion with 63 bits of quotient, enough to make small
/// closed forms (like 1/2) come out exactly in f64.
fn big_ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    debug_assert!(num <= den && *den != BigUint::from(0u32));
    let scaled = (num << 63u32) / den;
    let q = u64::try_from(&scaled).expect("num <= den so quotient fits 64 bits");
    q as f64 / (1u64 << 63) as f64
}

/// `1 - C(n-c,k)/C(n,k)`: the probability that a uniformly random k-subset
/// of n samples, c of them correct, contains at least one correct sample.
pub fn unbiased_pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    if c == 0 {
        return 0.0;
    }
    if n - c < k {
        return 1.0;
    }
    let miss = binomial((n - c) as u64, k as u64);
    let all = binomial(n as u64, k as u64);
    1.0 - big_ratio_to_f64(&miss, &all)
}

/// Pass@k over per-sample correctness flags.
pub fn pass_at_k(flags: &[bool], k: usize, estimator: Estimator) -> Result<f64> {
    let n = flags.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    match estimator {
        Estimator::Prefix => Ok(if flags[..k].iter().any(|&f| f) {
            1.0
        } else {
            0.0
        }),
        Estimator::Unbiased => {
            let c = flags.iter().filter(|&&f| f).count();
            Ok(unbiased_pass_at_k(n, c, k))
        }
    }
}

/// Mode of the first k parsed predictions; unparsed entries are excluded
/// from the vote. Ties break toward the smallest value under `T`'s ordering
/// (numeric for answers, lexicographic for sequences). `None` when nothing
/// parsed.
pub fn majority_vote<T: Ord + Clone>(predictions: &[Option<T>], k: usize) -> Option<T> {
    assert!(k >= 1 && k <= predictions.len(), "k outside 1..=len");
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for p in predictions[..k].iter().flatten() {
        *counts.entry(p).or_insert(0) += 1;
    }
    // BTreeMap iterates in ascending key order, so the first strict maximum
    // is the smallest mode.
    let mut best: Option<(&T, usize)> = None;
    for (value, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((value, count));
        }
    }
    best.map(|(v, _)| v.clone())
}

/// Whether the majority prediction over the first k samples equals the
/// truth. All-unparseable votes return false.
pub fn self_consistency<T: Ord + Clone>(predictions: &[Option<T>], truth: &T, k: usize) -> bool {
    majority_vote(predictions, k).as_ref() == Some(truth)
}

/// Ground truth plus the instance's valid id set, one per response set.
#[derive(Debug, Clone)]
pub struct TruthContext {
    pub truth: GroundTruth,
    pub valid_ids: BTreeSet<u32>,
}

/// Metrics for one (instance, k) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub instance_id: u64,
    pub k: usize,
    pub pass_ans: f64,
    pub pass_ids: f64,
    pub sc_ans: bool,
    pub sc_ids: bool,
}

/// Unweighted means over instances at one k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub k: usize,
    pub pass_ans: f64,
    pub pass_ids: f64,
    pub sc_ans: f64,
    pub sc_ids: f64,
}

/// Full curves for every requested k plus per-instance rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub k_max: usize,
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<MetricAggregate>,
}

/// Aggregate summary with the k_max row pulled out.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSummary {
    pub k_max: usize,
    pub instances: usize,
    pub pass_ans_at_k_max: f64,
    pub pass_ids_at_k_max: f64,
    pub sc_ans_at_k_max: f64,
    pub sc_ids_at_k_max: f64,
    pub curves: Vec<MetricAggregate>,
}

impl MetricReport {
    /// One CSV row per (instance, k).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "instance_id",
            "k",
            "pass_ans",
            "pass_ids",
            "sc_ans",
            "sc_ids",
        ])?;
        for row in &self.rows {
            wtr.write_record([
                row.instance_id.to_string(),
                row.k.to_string(),
                row.pass_ans.to_string(),
                row.pass_ids.to_string(),
                u8::from(row.sc_ans).to_string(),
                u8::from(row.sc_ids).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> MetricSummary {
        let at_max = self
            .aggregates
            .iter()
            .find(|a| a.k == self.k_max)
            .cloned()
            .unwrap_or(MetricAggregate {
                k: self.k_max,
                pass_ans: 0.0,
                pass_ids: 0.0,
                sc_ans: 0.0,
                sc_ids: 0.0,
            });
        let instances = if self.aggregates.is_empty() {
            0
        } else {
            self.rows.len() / self.aggregates.len()
        };
        MetricSummary {
            k_max: self.k_max,
            instances,
            pass_ans_at_k_max: at_max.pass_ans,
            pass_ids_at_k_max: at_max.pass_ids,
            sc_ans_at_k_max: at_max.sc_ans,
            sc_ids_at_k_max: at_max.sc_ids,
            curves: self.aggregates.clone(),
        }
    }
}

/// Evaluates every response set against its ground truth: each response is
/// parsed once, correctness flags and parsed predictions feed Pass@k and
/// self-consistency at every curve k, and aggregates are unweighted means in
/// set order.
pub fn evaluate(
    sets: &[ResponseSet],
    contexts: &[TruthContext],
    config: &EvalConfig,
) -> Result<MetricReport> {
    config.validate()?;
    if sets.len() != contexts.len() {
        return Err(Error::LengthMismatch {
            sets: sets.len(),
            truths: contexts.len(),
        });
    }
    for set in sets {
        if set.k() < config.k_max {
            return Err(Error::KOutOfRange {
                k: config.k_max,
                n: set.k(),
            });
        }
    }

    let mut rows = Vec::with_capacity(sets.len() * config.curve_ks.len());
    for (set, ctx) in sets.iter().zip(contexts) {
        let answers: Vec<Option<i64>> = set.responses[..config.k_max]
            .iter()
            .map(|t| parse_answer(t))
            .collect();
        let ids: Vec<Option<Vec<u32>>> = set.responses[..config.k_max]
            .iter()
            .map(|t| parse_ids(t, &ctx.valid_ids))
            .collect();
        let truth_answer = i64::from(ctx.truth.answer());
        let truth_ids = ctx.truth.ids().to_vec();
        let ans_flags: Vec<bool> = answers.iter().map(|a| *a == Some(truth_answer)).collect();
        let ids_flags: Vec<bool> = ids
            .iter()
            .map(|s| s.as_deref() == Some(truth_ids.as_slice()))
            .collect();

        for &k in &config.curve_ks {
            rows.push(MetricRow {
                instance_id: set.instance_ref,
                k,
                pass_ans: pass_at_k(&ans_flags, k, config.estimator)?,
                pass_ids: pass_at_k(&ids_flags, k, config.estimator)?,
                sc_ans: self_consistency(&answers, &truth_answer, k),
                sc_ids: self_consistency(&ids, &truth_ids, k),
            });
        }
    }

    let mut aggregates = Vec::with_capacity(config.curve_ks.len());
    let n = sets.len().max(1) as f64;
    for &k in &config.curve_ks {
        let at_k: Vec<&MetricRow> = rows.iter().filter(|r| r.k == k).collect();
        aggregates.push(MetricAggregate {
            k,
            pass_ans: at_k.iter().map(|r| r.pass_ans).sum::<f64>() / n,
            pass_ids: at_k.iter().map(|r| r.pass_ids).sum::<f64>() / n,
            sc_ans: at_k.iter().filter(|r| r.sc_ans).count() as f64 / n,
            sc_ids: at_k.iter().filter(|r| r.sc_ids).count() as f64 / n,
        });
    }

    Ok(MetricReport {
        k_max: config.k_max,
        rows,
        aggregates,
    })
}
