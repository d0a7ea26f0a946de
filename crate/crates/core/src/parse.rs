//! Free-form response parsing.
//!
//! Recovers the committed `\answer{...}` / `\ids{...}` values (the last
//! occurrence of each marker wins), the `<think>` format indicator, and the
//! sorted-list candidates used by the sorting analyses. All scans are single
//! regex passes, linear in the response length.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::domain::{ActivityInstance, Candidate, CandidateMethod, Instance, ParsedOutput};

static ANSWER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\\answer\{([^{}]*)\}").unwrap());
static IDS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\\ids\{([^{}]*)\}").unwrap());
static ID_TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bID\s+(\d+)").unwrap());
static COMMA_RUN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\s*,\s*\d+)+").unwrap());
static SORT_TOKEN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:sort|sorted|sorting)\b").unwrap());
static STOP_WORD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:select|greedy|choose|subset|largest|final answer|so|thus|therefore|next)\b",
    )
    .unwrap()
});

/// Parses the integer inside the last `\answer{...}` block. Returns `None`
/// when no block exists or the last one is malformed.
pub fn parse_answer(text: &str) -> Option<i64> {
    let last = ANSWER_RE.captures_iter(text).last()?;
    last[1].trim().parse::<i64>().ok()
}

/// Parses one brace body as a comma-separated id list, tolerating internal
/// whitespace. An empty body is the empty list; anything else malformed is
/// `None`.
fn parse_id_list(body: &str) -> Option<Vec<u32>> {
    if body.trim().is_empty() {
        return Some(Vec::new());
    }
    body.split(',')
        .map(|tok| tok.trim().parse::<u32>().ok())
        .collect()
}

/// Comma-separated ids inside the last `\ids{...}` block, in written order.
/// The parse fails (`None`) when the block is malformed or contains an id
/// outside `valid_ids`; an empty block parses as an empty list, which is
/// distinct from a failed parse.
pub fn parse_ids(text: &str, valid_ids: &BTreeSet<u32>) -> Option<Vec<u32>> {
    let last = IDS_RE.captures_iter(text).last()?;
    let ids = parse_id_list(&last[1])?;
    if ids.iter().all(|id| valid_ids.contains(id)) {
        Some(ids)
    } else {
        None
    }
}

/// True when the text contains exactly matched, unnested
/// `<think>...</think>` tags.
fn has_think_block(text: &str) -> bool {
    static THINK_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?think>").unwrap());
    let mut depth = 0i32;
    let mut complete = false;
    for m in THINK_RE.find_iter(text) {
        if m.as_str() == "<think>" {
            depth += 1;
            if depth > 1 {
                return false; // nested
            }
        } else {
            depth -= 1;
            if depth < 0 {
                return false; // close before open
            }
            complete = true;
        }
    }
    depth == 0 && complete
}

/// Format indicator: a well-formed `<think>` block plus syntactically valid
/// `\answer{...}` and `\ids{...}` markers.
pub fn format_indicator(text: &str) -> bool {
    if !has_think_block(text) {
        return false;
    }
    if parse_answer(text).is_none() {
        return false;
    }
    IDS_RE
        .captures_iter(text)
        .last()
        .and_then(|c| parse_id_list(&c[1]))
        .is_some()
}

/// Sorted-list candidates recovered from one response: every normalized
/// candidate in method-priority order, plus the full sorted-block candidate
/// when one covers all instance ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractionResult {
    pub candidates: Vec<Candidate>,
    pub sorted_block_full: Option<Vec<u32>>,
}

/// Filters to valid ids and de-duplicates keeping the first occurrence.
fn normalize(raw: impl IntoIterator<Item = u32>, valid_ids: &BTreeSet<u32>) -> Vec<u32> {
    let mut seen = BTreeSet::new();
    raw.into_iter()
        .filter(|id| valid_ids.contains(id) && seen.insert(*id))
        .collect()
}

/// All integers written as `ID k` tokens, left to right.
fn id_tokens(text: &str) -> Vec<u32> {
    ID_TOKEN_RE
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<u32>().ok())
        .collect()
}

/// The longest comma-separated integer run (two or more integers); earlier
/// runs win ties.
fn longest_comma_run(text: &str) -> Vec<u32> {
    let mut best: Vec<u32> = Vec::new();
    for m in COMMA_RUN_RE.find_iter(text) {
        let ints: Vec<u32> = m
            .as_str()
            .split(',')
            .filter_map(|tok| tok.trim().parse::<u32>().ok())
            .collect();
        if ints.len() > best.len() {
            best = ints;
        }
    }
    best
}

/// Paragraphs are maximal runs of lines separated by blank (or
/// whitespace-only) lines.
fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(cur.join("\n"));
                cur.clear();
            }
        } else {
            cur.push(line);
        }
    }
    if !cur.is_empty() {
        out.push(cur.join("\n"));
    }
    out
}

/// Looks for a paragraph that mentions sorting, truncates it at the first
/// stop word, and reads ids from `ID k` tokens or, failing that, the longest
/// comma run. Accepted only when the normalized list covers every instance
/// id exactly once.
fn sorted_block_full(text: &str, valid_ids: &BTreeSet<u32>) -> Option<Vec<u32>> {
    let n = valid_ids.len();
    for para in paragraphs(text) {
        if !SORT_TOKEN_RE.is_match(&para) {
            continue;
        }
        let truncated = match STOP_WORD_RE.find(&para) {
            Some(m) => &para[..m.start()],
            None => para.as_str(),
        };
        let from_tokens = normalize(id_tokens(truncated), valid_ids);
        if from_tokens.len() == n {
            return Some(from_tokens);
        }
        let from_run = normalize(longest_comma_run(truncated), valid_ids);
        if from_run.len() == n {
            return Some(from_run);
        }
    }
    None
}

/// Builds the up-to-four candidate id sequences from a response against an
/// activity instance: the full sorted block, every `\ids{...}` block, the
/// `ID k` token stream, and the longest comma run. Candidates are normalized
/// (valid ids only, first occurrence kept) and empty ones dropped; the list
/// order is the method tie-break priority.
pub fn extract_sorted_candidates(text: &str, instance: &ActivityInstance) -> ExtractionResult {
    let valid_ids = instance.id_set();
    let mut candidates = Vec::new();

    let full = sorted_block_full(text, &valid_ids);
    if let Some(ids) = &full {
        candidates.push(Candidate {
            method: CandidateMethod::SortedBlockFull,
            ids: ids.clone(),
        });
    }

    for cap in IDS_RE.captures_iter(text) {
        let Some(raw) = parse_id_list(&cap[1]) else {
            continue;
        };
        let ids = normalize(raw, &valid_ids);
        if !ids.is_empty() {
            candidates.push(Candidate {
                method: CandidateMethod::IdsBraces,
                ids,
            });
        }
    }

    let stream = normalize(id_tokens(text), &valid_ids);
    if !stream.is_empty() {
        candidates.push(Candidate {
            method: CandidateMethod::IdStream,
            ids: stream,
        });
    }

    let run = normalize(longest_comma_run(text), &valid_ids);
    if !run.is_empty() {
        candidates.push(Candidate {
            method: CandidateMethod::CommaRun,
            ids: run,
        });
    }

    ExtractionResult {
        candidates,
        sorted_block_full: full,
    }
}

/// Full parse of one response against its instance: committed answer and id
/// sequence, format indicator, and (for activity instances) the sorted-list
/// candidates.
pub fn parse_response(text: &str, instance: &Instance) -> ParsedOutput {
    let valid_ids = instance.id_set();
    let sorted_candidates = match instance {
        Instance::Activity(a) => extract_sorted_candidates(text, a).candidates,
        Instance::Lis(_) => Vec::new(),
    };
    ParsedOutput {
        answer: parse_answer(text),
        ids: parse_ids(text, &valid_ids),
        has_format: format_indicator(text),
        sorted_candidates,
    }
}
