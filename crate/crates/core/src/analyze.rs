//! Sorting analyses and input-only LIS features.
//!
//! The sorting side grades extracted candidates against the canonical sorted
//! order: exact match on the full sorted block, plus a contiguous-LCS
//! (longest common substring) partial score over all candidates with anchor
//! labels. The feature side computes the input-only descriptors used to
//! probe what a policy's numeric answers correlate with, along with a
//! grouped train/test split keyed by instance id so stochastic replicates
//! never straddle the split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{ActivityInstance, CandidateMethod};
use crate::error::{Error, Result};
use crate::parse::extract_sorted_candidates;

/// Where the best contiguous run sits inside its candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Start,
    End,
    Both,
    Neither,
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Start => write!(f, "start"),
            Anchor::End => write!(f, "end"),
            Anchor::Both => write!(f, "both"),
            Anchor::Neither => write!(f, "neither"),
        }
    }
}

/// Longest block of the candidate that appears contiguously in
/// `truth_order`, found by mapping each candidate element to its truth
/// position and scanning for the longest run of consecutive positions.
/// Because truth ids are unique this equals the classic longest common
/// substring. Also reports where the best (leftmost) run sits inside the
/// candidate.
pub fn contiguous_lcs(candidate: &[u32], truth_order: &[u32]) -> Result<(usize, Anchor)> {
    let pos: BTreeMap<u32, usize> = truth_order
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let mapped: Vec<usize> = candidate
        .iter()
        .map(|&id| {
            pos.get(&id)
                .copied()
                .ok_or(Error::CandidateIdNotInReference { id })
        })
        .collect::<Result<_>>()?;

    if mapped.is_empty() {
        return Ok((0, Anchor::Neither));
    }

    let mut best_len = 1;
    let mut best_start = 0;
    let mut run_start = 0;
    for t in 1..mapped.len() {
        if mapped[t] == mapped[t - 1] + 1 {
            let len = t - run_start + 1;
            if len > best_len {
                best_len = len;
                best_start = run_start;
            }
        } else {
            run_start = t;
        }
    }

    let at_start = best_start == 0;
    let at_end = best_start + best_len == mapped.len();
    let anchor = match (at_start, at_end) {
        (true, true) => Anchor::Both,
        (true, false) => Anchor::Start,
        (false, true) => Anchor::End,
        (false, false) => Anchor::Neither,
    };
    Ok((best_len, anchor))
}

/// Sorting quality of one response.
#[derive(Debug, Clone, PartialEq)]
pub struct SortAnalysis {
    /// A full sorted-block candidate was extracted.
    pub extraction_success: bool,
    /// That candidate equals the canonical sorted order exactly.
    pub exact_sorted: bool,
    /// Best contiguous-LCS length over all non-empty candidates.
    pub lcs_len: usize,
    /// `lcs_len / n`.
    pub lcs_frac: f64,
    /// Method of the best candidate; score ties break by method priority
    /// (sorted block, then braces, then id stream, then comma run).
    pub best_method: Option<CandidateMethod>,
    pub anchor: Anchor,
}

/// Extracts candidates from a response and grades them against
/// `truth_sorted` (all instance ids in canonical `(finish, id)` order).
pub fn analyze_sorting(
    text: &str,
    instance: &ActivityInstance,
    truth_sorted: &[u32],
) -> SortAnalysis {
    let extraction = extract_sorted_candidates(text, instance);
    let extraction_success = extraction.sorted_block_full.is_some();
    let exact_sorted = extraction.sorted_block_full.as_deref() == Some(truth_sorted);

    let mut best: Option<(usize, Anchor, CandidateMethod)> = None;
    for candidate in &extraction.candidates {
        let (len, anchor) = contiguous_lcs(&candidate.ids, truth_sorted)
            .expect("candidates are normalized to valid ids");
        // Candidates arrive in priority order, so strictly-greater keeps the
        // highest-priority method on ties.
        if best.is_none_or(|(l, _, _)| len > l) {
            best = Some((len, anchor, candidate.method));
        }
    }

    let n = instance.len().max(1);
    let (lcs_len, anchor, best_method) = match best {
        Some((len, anchor, method)) => (len, anchor, Some(method)),
        None => (0, Anchor::Neither, None),
    };
    SortAnalysis {
        extraction_success,
        exact_sorted,
        lcs_len,
        lcs_frac: lcs_len as f64 / n as f64,
        best_method,
        anchor,
    }
}

/// Corpus-level sorting summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SortSummary {
    pub responses: usize,
    /// Fraction with a full sorted-block candidate.
    pub extraction_rate: f64,
    /// Fraction sorted exactly; missing extractions count as incorrect.
    pub exact_sort_rate: f64,
    /// Mean LCS fraction over responses with a non-zero match.
    pub mean_lcs_frac: f64,
    /// Fraction of responses with any non-empty match.
    pub coverage: f64,
    /// Anchor histogram over responses with a non-zero match.
    pub anchors: BTreeMap<String, usize>,
}

pub fn summarize_sorting(analyses: &[SortAnalysis]) -> SortSummary {
    let n = analyses.len();
    let denom = n.max(1) as f64;
    let matched: Vec<&SortAnalysis> = analyses.iter().filter(|a| a.lcs_len > 0).collect();
    let mut anchors = BTreeMap::new();
    for a in &matched {
        *anchors.entry(a.anchor.to_string()).or_insert(0) += 1;
    }
    SortSummary {
        responses: n,
        extraction_rate: analyses.iter().filter(|a| a.extraction_success).count() as f64 / denom,
        exact_sort_rate: analyses.iter().filter(|a| a.exact_sorted).count() as f64 / denom,
        mean_lcs_frac: if matched.is_empty() {
            0.0
        } else {
            matched.iter().map(|a| a.lcs_frac).sum::<f64>() / matched.len() as f64
        },
        coverage: matched.len() as f64 / denom,
        anchors,
    }
}

/// The input-only feature vector computed from an LIS instance's values.
/// Ratios lie in [0, 1]; features that are undefined for a given input
/// (e.g. `pos_delta_mean` with no positive deltas) are NaN and the row is
/// dropped at export time.
#[derive(Debug, Clone, PartialEq)]
pub struct LisFeatureVector {
    pub n: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub mean: f64,
    pub std: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub uniq_ratio: f64,
    pub dup_ratio: f64,
    pub adj_inc_ratio: f64,
    pub adj_dec_ratio: f64,
    pub adj_eq_ratio: f64,
    pub pos_delta_mean: f64,
    pub pos_delta_std: f64,
    pub neg_delta_mean: f64,
    pub neg_delta_std: f64,
    pub sign_change_ratio: f64,
    pub pair_inc_ratio: f64,
    pub inversion_ratio: f64,
    pub tau_like: f64,
    pub max_inc_run: f64,
    pub max_dec_run: f64,
    pub num_monotone_runs: f64,
    pub n_local_max: f64,
    pub n_local_min: f64,
    pub record_highs: f64,
    pub record_lows: f64,
    pub greedy_len: f64,
    pub greedy_rev_len: f64,
    pub beam2: f64,
    pub beam3: f64,
    pub budget1: f64,
    pub budget2: f64,
    pub tail_mean: f64,
    pub tail_std: f64,
    pub tail_iqr: f64,
    pub tail_slope: f64,
    pub rand_lis_baseline: f64,
}

impl LisFeatureVector {
    /// Column order of the exported feature table.
    pub const NAMES: [&'static str; 40] = [
        "n",
        "min",
        "max",
        "range",
        "mean",
        "std",
        "q25",
        "q50",
        "q75",
        "uniq_ratio",
        "dup_ratio",
        "adj_inc_ratio",
        "adj_dec_ratio",
        "adj_eq_ratio",
        "pos_delta_mean",
        "pos_delta_std",
        "neg_delta_mean",
        "neg_delta_std",
        "sign_change_ratio",
        "pair_inc_ratio",
        "inversion_ratio",
        "tau_like",
        "max_inc_run",
        "max_dec_run",
        "num_monotone_runs",
        "n_local_max",
        "n_local_min",
        "record_highs",
        "record_lows",
        "greedy_len",
        "greedy_rev_len",
        "beam2",
        "beam3",
        "budget1",
        "budget2",
        "tail_mean",
        "tail_std",
        "tail_iqr",
        "tail_slope",
        "rand_lis_baseline",
    ];

    pub fn values(&self) -> [f64; 40] {
        [
            self.n,
            self.min,
            self.max,
            self.range,
            self.mean,
            self.std,
            self.q25,
            self.q50,
            self.q75,
            self.uniq_ratio,
            self.dup_ratio,
            self.adj_inc_ratio,
            self.adj_dec_ratio,
            self.adj_eq_ratio,
            self.pos_delta_mean,
            self.pos_delta_std,
            self.neg_delta_mean,
            self.neg_delta_std,
            self.sign_change_ratio,
            self.pair_inc_ratio,
            self.inversion_ratio,
            self.tau_like,
            self.max_inc_run,
            self.max_dec_run,
            self.num_monotone_runs,
            self.n_local_max,
            self.n_local_min,
            self.record_highs,
            self.record_lows,
            self.greedy_len,
            self.greedy_rev_len,
            self.beam2,
            self.beam3,
            self.budget1,
            self.budget2,
            self.tail_mean,
            self.tail_std,
            self.tail_iqr,
            self.tail_slope,
            self.rand_lis_baseline,
        ]
    }

    pub fn is_complete(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Quantile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Record-high count: the length of the chain built by appending each value
/// strictly greater than the running maximum.
fn record_high_count(values: &[i64]) -> usize {
    let mut count = 0;
    let mut best: Option<i64> = None;
    for &v in values {
        if best.is_none_or(|b| v > b) {
            count += 1;
            best = Some(v);
        }
    }
    count
}

fn record_low_count(values: &[i64]) -> usize {
    let mut count = 0;
    let mut best: Option<i64> = None;
    for &v in values {
        if best.is_none_or(|b| v < b) {
            count += 1;
            best = Some(v);
        }
    }
    count
}

/// Width-limited chain search. States are `(chain length, last value)`
/// pairs; each value may start a new chain or extend any tracked state.
/// After every step dominated states are pruned and the best `width` remain,
/// ranked by (length descending, last value ascending).
fn beam_chain_len(values: &[i64], width: usize) -> usize {
    let mut states: Vec<(usize, i64)> = Vec::new();
    for &v in values {
        let mut next = states.clone();
        next.push((1, v));
        for &(len, last) in &states {
            if last < v {
                next.push((len + 1, v));
            }
        }
        next.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        // Keep the Pareto frontier: scanning by length descending, a state
        // survives only with a strictly smaller tail than everything kept.
        let mut kept: Vec<(usize, i64)> = Vec::new();
        for (len, last) in next {
            if kept.last().is_none_or(|&(_, t)| last < t) {
                kept.push((len, last));
            }
            if kept.len() == width {
                break;
            }
        }
        states = kept;
    }
    states.iter().map(|&(len, _)| len).max().unwrap_or(0)
}

/// Best chain length over widths up to `width`, making the result monotone
/// in the width cap.
fn beam_limited_lis(values: &[i64], width: usize) -> usize {
    (1..=width)
        .map(|w| beam_chain_len(values, w))
        .max()
        .unwrap_or(0)
}

/// Greedy append with a repair budget: each value strictly above the chain
/// tail is appended; otherwise, at most `budget` times, a value that still
/// fits above the second-to-last element replaces (truncates) the tail.
fn budget_greedy_len(values: &[i64], budget: usize) -> usize {
    let mut chain: Vec<i64> = Vec::new();
    let mut left = budget;
    for &v in values {
        match chain.last() {
            None => chain.push(v),
            Some(&last) if v > last => chain.push(v),
            Some(&last) => {
                let fits = chain.len() == 1 || v > chain[chain.len() - 2];
                if left > 0 && v < last && fits {
                    *chain.last_mut().expect("non-empty") = v;
                    left -= 1;
                }
            }
        }
    }
    chain.len()
}

/// Final patience tails vector: `tails[p]` is the smallest tail value among
/// increasing subsequences of length `p + 1`.
fn patience_tails(values: &[i64]) -> Vec<i64> {
    let mut tails: Vec<i64> = Vec::new();
    for &v in values {
        let pos = tails.partition_point(|&t| t < v);
        if pos == tails.len() {
            tails.push(v);
        } else {
            tails[pos] = v;
        }
    }
    tails
}

/// Ordinary least-squares slope of `ys` against their 0-based index; NaN
/// when fewer than two points.
fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return f64::NAN;
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = mean(ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}

/// Computes the full feature vector from the raw values of one instance.
/// Needs at least two values.
pub fn lis_features(values: &[i64]) -> Result<LisFeatureVector> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewValues { n });
    }

    let as_f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    let mut sorted = as_f.clone();
    sorted.sort_by(f64::total_cmp);

    let uniq = values.iter().collect::<BTreeSet<_>>().len();
    let uniq_ratio = uniq as f64 / n as f64;

    let deltas: Vec<i64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let n_delta = deltas.len() as f64;
    let pos: Vec<f64> = deltas
        .iter()
        .filter(|&&d| d > 0)
        .map(|&d| d as f64)
        .collect();
    let neg: Vec<f64> = deltas
        .iter()
        .filter(|&&d| d < 0)
        .map(|&d| d as f64)
        .collect();

    let sign_change_ratio = if deltas.len() < 2 {
        f64::NAN
    } else {
        let flips = deltas
            .windows(2)
            .filter(|w| (w[0] > 0 && w[1] < 0) || (w[0] < 0 && w[1] > 0))
            .count();
        flips as f64 / (deltas.len() - 1) as f64
    };

    let pairs = (n * (n - 1) / 2) as f64;
    let mut inc_pairs = 0usize;
    let mut inv_pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if values[j] > values[i] {
                inc_pairs += 1;
            } else if values[j] < values[i] {
                inv_pairs += 1;
            }
        }
    }
    let pair_inc_ratio = inc_pairs as f64 / pairs;
    let inversion_ratio = inv_pairs as f64 / pairs;

    let mut max_inc_run = 1usize;
    let mut max_dec_run = 1usize;
    let mut inc_run = 1usize;
    let mut dec_run = 1usize;
    for w in values.windows(2) {
        if w[1] > w[0] {
            inc_run += 1;
        } else {
            inc_run = 1;
        }
        if w[1] < w[0] {
            dec_run += 1;
        } else {
            dec_run = 1;
        }
        max_inc_run = max_inc_run.max(inc_run);
        max_dec_run = max_dec_run.max(dec_run);
    }

    // Maximal blocks of consecutive deltas sharing a sign.
    let mut num_monotone_runs = 1usize;
    for w in deltas.windows(2) {
        if w[1].signum() != w[0].signum() {
            num_monotone_runs += 1;
        }
    }

    let mut n_local_max = 0usize;
    let mut n_local_min = 0usize;
    for i in 1..n - 1 {
        if values[i] > values[i - 1] && values[i] > values[i + 1] {
            n_local_max += 1;
        }
        if values[i] < values[i - 1] && values[i] < values[i + 1] {
            n_local_min += 1;
        }
    }

    let reversed: Vec<i64> = values.iter().rev().copied().collect();
    let tails = patience_tails(values);
    let tails_f: Vec<f64> = tails.iter().map(|&t| t as f64).collect();
    let mut tails_sorted = tails_f.clone();
    tails_sorted.sort_by(f64::total_cmp);

    Ok(LisFeatureVector {
        n: n as f64,
        min: sorted[0],
        max: sorted[n - 1],
        range: sorted[n - 1] - sorted[0],
        mean: mean(&as_f),
        std: std_dev(&as_f),
        q25: quantile(&sorted, 0.25),
        q50: quantile(&sorted, 0.50),
        q75: quantile(&sorted, 0.75),
        uniq_ratio,
        dup_ratio: 1.0 - uniq_ratio,
        adj_inc_ratio: deltas.iter().filter(|&&d| d > 0).count() as f64 / n_delta,
        adj_dec_ratio: deltas.iter().filter(|&&d| d < 0).count() as f64 / n_delta,
        adj_eq_ratio: deltas.iter().filter(|&&d| d == 0).count() as f64 / n_delta,
        pos_delta_mean: mean(&pos),
        pos_delta_std: std_dev(&pos),
        neg_delta_mean: mean(&neg),
        neg_delta_std: std_dev(&neg),
        sign_change_ratio,
        pair_inc_ratio,
        inversion_ratio,
        tau_like: pair_inc_ratio - inversion_ratio,
        max_inc_run: max_inc_run as f64,
        max_dec_run: max_dec_run as f64,
        num_monotone_runs: num_monotone_runs as f64,
        n_local_max: n_local_max as f64,
        n_local_min: n_local_min as f64,
        record_highs: record_high_count(values) as f64,
        record_lows: record_low_count(values) as f64,
        greedy_len: record_high_count(values) as f64,
        greedy_rev_len: record_high_count(&reversed) as f64,
        beam2: beam_limited_lis(values, 2) as f64,
        beam3: beam_limited_lis(values, 3) as f64,
        budget1: budget_greedy_len(values, 1) as f64,
        budget2: budget_greedy_len(values, 2) as f64,
        tail_mean: mean(&tails_f),
        tail_std: std_dev(&tails_f),
        tail_iqr: quantile(&tails_sorted, 0.75) - quantile(&tails_sorted, 0.25),
        tail_slope: ols_slope(&tails_f),
        rand_lis_baseline: 2.0 * (n as f64).sqrt(),
    })
}

/// A grouped train/test partition over instance ids: all replicates of one
/// instance land on the same side.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit {
    pub train: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl GroupSplit {
    pub fn side(&self, instance_id: u64) -> Option<&'static str> {
        if self.test.contains(&instance_id) {
            Some("test")
        } else if self.train.contains(&instance_id) {
            Some("train")
        } else {
            None
        }
    }
}

/// Seeded shuffle of the distinct instance ids; the first
/// `ceil(test_fraction * N)` go to test, the rest to train.
pub fn group_split(instance_ids: &[u64], test_fraction: f64, seed: u64) -> Result<GroupSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidFraction(test_fraction));
    }
    let distinct: BTreeSet<u64> = instance_ids.iter().copied().collect();
    if distinct.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut ids: Vec<u64> = distinct.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_test = ((test_fraction * ids.len() as f64).ceil() as usize).min(ids.len());
    let test: BTreeSet<u64> = ids[..n_test].iter().copied().collect();
    let train: BTreeSet<u64> = ids[n_test..].iter().copied().collect();
    Ok(GroupSplit {
        train,
        test,
        test_fraction,
        seed,
    })
}

/// One regression row: the instance's raw values and the answer the model
/// emitted for one stochastic response.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub instance_id: u64,
    pub values: Vec<i64>,
    pub target: i64,
}

/// Writes the feature table as CSV: one column per feature, then the target
/// and the split label. Rows with any undefined (non-finite) feature are
/// dropped. Returns the number of rows written.
pub fn export_features<W: Write>(
    records: &[FeatureRecord],
    split: &GroupSplit,
    w: W,
) -> Result<usize> {
    let mut wtr = csv::Writer::from_writer(w);
    let header: Vec<&str> = LisFeatureVector::NAMES
        .iter()
        .copied()
        .chain(["target", "split"])
        .collect();
    wtr.write_record(&header)?;

    let mut written = 0usize;
    for record in records {
        let side = split.side(record.instance_id).ok_or(Error::UnknownId {
            id: record.instance_id as u32,
        })?;
        let features = lis_features(&record.values)?;
        if !features.is_complete() {
            continue;
        }
        let mut row: Vec<String> = features.values().iter().map(|v| v.to_string()).collect();
        row.push(record.target.to_string());
        row.push(side.to_string());
        wtr.write_record(&row)?;
        written += 1;
    }
    wtr.flush()?;
    Ok(written)
}
