//! Unique-optimum instance generation.
//!
//! Both generators rejection-sample random instances and keep only those
//! whose optimal solution is unique, certified by exact counting DPs. The
//! activity path additionally checks that a single greedy earliest-finish
//! pass recovers the same set. Brute-force enumerators are provided as
//! independent verification oracles for small instances.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{ActivityInstance, GroundTruth, LisInstance};
use crate::error::{Error, Result};

/// Sampling bounds for both generators. Times are integer minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub m_min: usize,
    pub m_max: usize,
    pub s_max: u32,
    pub d_min: u32,
    pub d_max: u32,
    pub v_min: i64,
    pub v_max: i64,
    pub max_tries: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            m_min: 5,
            m_max: 16,
            s_max: 9 * 60,
            d_min: 10,
            d_max: 120,
            v_min: 1,
            v_max: 1000,
            max_tries: 10_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_min == 0 || self.m_min > self.m_max {
            return Err(Error::InvalidConfig(format!(
                "length range {}..={} is invalid",
                self.m_min, self.m_max
            )));
        }
        if self.d_min < 1 || self.d_min > self.d_max {
            return Err(Error::InvalidConfig(format!(
                "duration range {}..={} is invalid",
                self.d_min, self.d_max
            )));
        }
        if self.v_min > self.v_max {
            return Err(Error::InvalidConfig(format!(
                "value range {}..={} is invalid",
                self.v_min, self.v_max
            )));
        }
        if self.max_tries == 0 {
            return Err(Error::InvalidConfig("max_tries must be positive".into()));
        }
        Ok(())
    }

    /// Restricts the sampled instance size.
    pub fn with_lengths(mut self, m_min: usize, m_max: usize) -> Self {
        self.m_min = m_min;
        self.m_max = m_max;
        self
    }
}

/// Result of an exact optimum count: the optimal size, the exact number of
/// distinct optimal solutions, and — when that number is one — the unique
/// solution in canonical reporting order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptCount {
    pub opt: usize,
    pub count: BigUint,
    pub unique_solution: Option<Vec<u32>>,
}

/// Derives a per-instance seed from a master seed and an instance index.
/// This is the splitmix64 output stream, so datasets are reproducible and
/// instances can be generated independently in any order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Indices of `instance` sorted by `(finish, start, id)`.
fn sorted_activity_indices(instance: &ActivityInstance) -> Vec<usize> {
    let acts = instance.activities();
    let mut order: Vec<usize> = (0..acts.len()).collect();
    order.sort_by_key(|&i| (acts[i].finish, acts[i].start, acts[i].id));
    order
}

/// Computes the maximum number of pairwise-compatible activities, the exact
/// number of distinct optimal subsets, and (when unique) the optimal subset
/// itself.
///
/// Intervals are half-open, so `finish <= next start` is compatible. The DP
/// runs over activities sorted by `(finish, start, id)` with predecessor
/// links found by binary search; at include/exclude ties the counts of both
/// branches are summed, which counts each optimal subset exactly once. Under
/// a count of one, backtracking resolves ties by taking whichever branch
/// still carries the single surviving count.
pub fn count_optima_and_backtrack(instance: &ActivityInstance) -> OptCount {
    let acts = instance.activities();
    let n = acts.len();
    if n == 0 {
        return OptCount {
            opt: 0,
            count: BigUint::from(1u32),
            unique_solution: Some(Vec::new()),
        };
    }

    let order = sorted_activity_indices(instance);
    let finish: Vec<u32> = order.iter().map(|&i| acts[i].finish).collect();
    let start: Vec<u32> = order.iter().map(|&i| acts[i].start).collect();

    // pred[i] = largest sorted position j <= i-1 with finish[j-1] <= start[i-1],
    // in 1-based DP indexing; 0 when none exists.
    let pred = |i: usize| -> usize {
        let s = start[i - 1];
        finish[..i - 1].partition_point(|&f| f <= s)
    };

    let mut opt = vec![0usize; n + 1];
    let mut cnt = vec![BigUint::from(0u32); n + 1];
    cnt[0] = BigUint::from(1u32);
    for i in 1..=n {
        let p = pred(i);
        let incl = 1 + opt[p];
        let excl = opt[i - 1];
        if incl > excl {
            opt[i] = incl;
            cnt[i] = cnt[p].clone();
        } else if excl > incl {
            opt[i] = excl;
            cnt[i] = cnt[i - 1].clone();
        } else {
            opt[i] = incl;
            cnt[i] = &cnt[p] + &cnt[i - 1];
        }
    }

    let best = opt[n];
    let total = cnt[n].clone();
    if total != BigUint::from(1u32) {
        return OptCount {
            opt: best,
            count: total,
            unique_solution: None,
        };
    }

    // Uniqueness holds: walk back from the end, resolving ties toward the
    // branch whose downstream count is the surviving one.
    let one = BigUint::from(1u32);
    let zero = BigUint::from(0u32);
    let mut chosen: Vec<u32> = Vec::new();
    let mut i = n;
    while i > 0 {
        let p = pred(i);
        let incl = 1 + opt[p];
        let excl = opt[i - 1];
        if incl > excl {
            chosen.push(acts[order[i - 1]].id);
            i = p;
        } else if excl > incl {
            i -= 1;
        } else if cnt[p] == one && cnt[i - 1] == zero {
            chosen.push(acts[order[i - 1]].id);
            i = p;
        } else {
            i -= 1;
        }
    }

    chosen.sort_by_key(|&id| (acts[(id - 1) as usize].finish, id));
    OptCount {
        opt: best,
        count: total,
        unique_solution: Some(chosen),
    }
}

/// Single greedy earliest-finish pass: scan activities in `(finish, start,
/// id)` order, selecting each whose start is at or after the finish of the
/// last selection. Returns the selected ids in selection order.
pub fn greedy_earliest_finish(instance: &ActivityInstance) -> Vec<u32> {
    let acts = instance.activities();
    let mut selected = Vec::new();
    let mut last_finish: Option<u32> = None;
    for idx in sorted_activity_indices(instance) {
        let a = &acts[idx];
        if last_finish.is_none_or(|f| a.start >= f) {
            selected.push(a.id);
            last_finish = Some(a.finish);
        }
    }
    selected
}

/// Computes the strict LIS length and the exact number of distinct LIS index
/// sequences via the quadratic recurrence over per-position lengths and
/// counts. When the count is one, the unique index sequence (1-based, in
/// increasing row order) is reconstructed by patience sorting.
pub fn count_lis_length_and_number(values: &[i64]) -> Result<OptCount> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }

    let mut len_end = vec![1usize; n];
    let mut cnt_end = vec![BigUint::from(1u32); n];
    for i in 0..n {
        for j in 0..i {
            if values[j] < values[i] {
                if len_end[j] + 1 > len_end[i] {
                    len_end[i] = len_end[j] + 1;
                    cnt_end[i] = cnt_end[j].clone();
                } else if len_end[j] + 1 == len_end[i] {
                    cnt_end[i] = &cnt_end[i] + &cnt_end[j];
                }
            }
        }
    }

    let best = *len_end.iter().max().expect("non-empty");
    let mut total = BigUint::from(0u32);
    for i in 0..n {
        if len_end[i] == best {
            total = &total + &cnt_end[i];
        }
    }

    let unique_solution = if total == BigUint::from(1u32) {
        Some(
            patience_reconstruct(values)
                .into_iter()
                .map(|i| i as u32)
                .collect(),
        )
    } else {
        None
    };

    Ok(OptCount {
        opt: best,
        count: total,
        unique_solution,
    })
}

/// Reconstructs one LIS as 1-based indices in increasing row order via
/// patience sorting with predecessor links. Strictness comes from the
/// lower-bound placement rule (first tails position whose value is >= the
/// incoming value). When the LIS is unique this is the unique sequence.
pub fn patience_reconstruct(values: &[i64]) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    // tails[p] = input index of the smallest tail among increasing
    // subsequences of length p+1.
    let mut tails: Vec<usize> = Vec::new();
    let mut prev: Vec<Option<usize>> = vec![None; values.len()];
    for (i, &v) in values.iter().enumerate() {
        let pos = tails.partition_point(|&t| values[t] < v);
        if pos > 0 {
            prev[i] = Some(tails[pos - 1]);
        }
        if pos == tails.len() {
            tails.push(i);
        } else {
            tails[pos] = i;
        }
    }

    let mut out = Vec::with_capacity(tails.len());
    let mut cur = Some(*tails.last().expect("non-empty"));
    while let Some(i) = cur {
        out.push(i + 1);
        cur = prev[i];
    }
    out.reverse();
    out
}

/// Generates one activity instance with a unique optimal schedule.
///
/// Each try samples a uniform row count, then uniform integer starts in
/// `0..=s_max` and durations in `d_min..=d_max`, keeping intervals with
/// `finish <= s_max + d_max`. The try is accepted only if the optimum-count
/// DP certifies a single optimal subset and the greedy pass returns that
/// same set. The ground truth lists the unique set by `(finish, id)`.
pub fn generate_activity(
    config: &GeneratorConfig,
    seed: u64,
) -> Result<(ActivityInstance, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_tries {
        let m = rng.random_range(config.m_min..=config.m_max);
        let mut intervals: Vec<(u32, u32)> = Vec::with_capacity(m);
        while intervals.len() < m {
            let s: u32 = rng.random_range(0..=config.s_max);
            let d: u32 = rng.random_range(config.d_min..=config.d_max);
            let f = s + d;
            if f <= config.s_max + config.d_max {
                intervals.push((s, f));
            }
        }
        let instance = ActivityInstance::new(&intervals, seed, false)?;
        let counted = count_optima_and_backtrack(&instance);
        if counted.count != BigUint::from(1u32) {
            continue;
        }
        let solution = counted.unique_solution.expect("count is one");
        let greedy: BTreeSet<u32> = greedy_earliest_finish(&instance).into_iter().collect();
        let unique: BTreeSet<u32> = solution.iter().copied().collect();
        if greedy != unique {
            continue;
        }
        return Ok((instance, GroundTruth::new(solution)));
    }
    Err(Error::GenerationFailed {
        seed,
        tries: config.max_tries,
    })
}

/// Generates one LIS instance whose strict LIS is unique and has length at
/// least 2. Values are sampled i.i.d. uniform over `v_min..=v_max`; the
/// ground truth is the patience-reconstructed index sequence.
pub fn generate_lis(config: &GeneratorConfig, seed: u64) -> Result<(LisInstance, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_tries {
        let n = rng.random_range(config.m_min..=config.m_max);
        let values: Vec<i64> = (0..n)
            .map(|_| rng.random_range(config.v_min..=config.v_max))
            .collect();
        let counted = count_lis_length_and_number(&values)?;
        if counted.opt < 2 || counted.count != BigUint::from(1u32) {
            continue;
        }
        let instance = LisInstance::new(&values, seed, false)?;
        let ids = counted.unique_solution.expect("count is one");
        return Ok((instance, GroundTruth::new(ids)));
    }
    Err(Error::GenerationFailed {
        seed,
        tries: config.max_tries,
    })
}

/// Cap on exhaustive enumeration (about one million subsets).
pub const BRUTE_FORCE_CAP: usize = 20;

/// Exhaustive enumeration result: optimal size, number of optima, and every
/// optimal solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForce {
    pub opt: usize,
    pub count: usize,
    pub optima: Vec<Vec<u32>>,
}

/// Enumerates every subset of activities and returns all maximum-cardinality
/// pairwise-compatible ones, each listed by `(finish, id)`. Compatibility
/// uses the same half-open rule as the DP. Refuses instances above
/// [`BRUTE_FORCE_CAP`] rows.
pub fn brute_force_activity(instance: &ActivityInstance) -> Result<BruteForce> {
    let acts = instance.activities();
    let m = acts.len();
    if m > BRUTE_FORCE_CAP {
        return Err(Error::TooManyRows {
            rows: m,
            cap: BRUTE_FORCE_CAP,
        });
    }

    // conflicts[i] = bitmask of activities overlapping activity i.
    let mut conflicts = vec![0u32; m];
    for i in 0..m {
        for j in 0..m {
            if i != j && !(acts[i].finish <= acts[j].start || acts[j].finish <= acts[i].start) {
                conflicts[i] |= 1 << j;
            }
        }
    }

    let mut opt = 0usize;
    let mut optima: Vec<Vec<u32>> = Vec::new();
    for mask in 0u32..(1u32 << m) {
        let mut ok = true;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            if conflicts[i] & mask != 0 {
                ok = false;
                break;
            }
            bits &= bits - 1;
        }
        if !ok {
            continue;
        }
        let size = mask.count_ones() as usize;
        if size < opt {
            continue;
        }
        let mut ids: Vec<u32> = (0..m)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| acts[i].id)
            .collect();
        ids.sort_by_key(|&id| (acts[(id - 1) as usize].finish, id));
        if size > opt {
            opt = size;
            optima.clear();
        }
        optima.push(ids);
    }

    Ok(BruteForce {
        opt,
        count: optima.len(),
        optima,
    })
}

/// Exhaustive enumeration result for LIS: the optimal length, the number of
/// optimal index sequences, and every such sequence (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceLis {
    pub opt: usize,
    pub count: usize,
    pub optima: Vec<Vec<usize>>,
}

/// Enumerates every strictly increasing subsequence and returns all of
/// maximum length. Refuses inputs above [`BRUTE_FORCE_CAP`] values.
pub fn brute_force_lis(values: &[i64]) -> Result<BruteForceLis> {
    let n = values.len();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::TooManyRows {
            rows: n,
            cap: BRUTE_FORCE_CAP,
        });
    }

    let mut opt = 0usize;
    let mut optima: Vec<Vec<usize>> = Vec::new();
    'mask: for mask in 0u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size < opt {
            continue;
        }
        let mut last: Option<i64> = None;
        let mut indices = Vec::with_capacity(size);
        for (i, &v) in values.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if last.is_some_and(|l| v <= l) {
                    continue 'mask;
                }
                last = Some(v);
                indices.push(i + 1);
            }
        }
        if size > opt {
            opt = size;
            optima.clear();
        }
        optima.push(indices);
    }

    Ok(BruteForceLis {
        opt,
        count: optima.len(),
        optima,
    })
}
