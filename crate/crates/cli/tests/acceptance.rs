//! Acceptance suite. Each test covers one numbered criterion and prints a
//! single pass line (visible with `--nocapture`); a failing assertion fails
//! the criterion.
//!
//! 1. Generator/oracle equivalence over 500+500 small instances.
//! 2. The two five-row reference instances through the full
//!    generate-and-verify path.
//! 3. Reward properties and closed forms.
//! 4. Pass@k closed form, Monte-Carlo agreement, monotonicity, estimator
//!    agreement at k = n, and self-consistency tie-breaking.
//! 5. Planted Bernoulli policy end-to-end through `evaluate_run`.
//! 6. Contiguous-LCS equivalence with the quadratic substring DP on 10k
//!    pairs.
//! 7. Hand-labeled 20-response extraction corpus.
//! 8. Feature heuristic ordering on 10k sequences, feature closed forms,
//!    and leak-free grouped splits over 100 seeds.
//! 9. Byte-identical dataset rebuilds and a 10k-request service soak with
//!    bit-exact offline/online parity.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::time::Instant;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use veriseq::analyze::{contiguous_lcs, group_split, lis_features, Anchor};
use veriseq::domain::{
    answer_to_wire, canonical_order_activity, id_sequence_to_wire, ActivityInstance,
    CandidateMethod, GroundTruth, Instance, LisInstance, ParsedOutput, RewardKind, RewardSpec,
    Task,
};
use veriseq::generate::{
    brute_force_activity, brute_force_lis, count_lis_length_and_number, count_optima_and_backtrack,
    derive_seed, generate_activity, generate_lis, greedy_earliest_finish, patience_reconstruct,
    GeneratorConfig,
};
use veriseq::metrics::{pass_at_k, self_consistency, unbiased_pass_at_k, Estimator};
use veriseq::parse::extract_sorted_candidates;
use veriseq::reward::{
    reward_ans, reward_ans_fmt, reward_ids_exact, reward_ids_prefix, reward_sort, score,
};

use veriseq_cli::dataset::{build_dataset, verify_dataset, DatasetSpec};
use veriseq_cli::evaluate::evaluate_run;
use veriseq_cli::responses::ResponseRow;
use veriseq_cli::serve::{request_for, ScoreResponse};

fn small_config() -> GeneratorConfig {
    GeneratorConfig::default().with_lengths(5, 12)
}

#[test]
fn criterion_1_generator_matches_brute_force() {
    let started = Instant::now();
    let config = small_config();

    for i in 0..500u64 {
        let (instance, truth) = generate_activity(&config, derive_seed(0xAC71, i)).unwrap();
        let counted = count_optima_and_backtrack(&instance);
        let brute = brute_force_activity(&instance).unwrap();
        assert_eq!(counted.opt, brute.opt);
        assert_eq!(counted.count, BigUint::from(brute.count));
        assert_eq!(brute.count, 1);
        assert_eq!(counted.unique_solution.as_deref(), Some(truth.ids()));
        assert_eq!(brute.optima[0], truth.ids());
        let greedy: BTreeSet<u32> = greedy_earliest_finish(&instance).into_iter().collect();
        let unique: BTreeSet<u32> = truth.ids().iter().copied().collect();
        assert_eq!(greedy, unique);
    }

    for i in 0..500u64 {
        let (instance, truth) = generate_lis(&config, derive_seed(0x715, i)).unwrap();
        let values = instance.values();
        let counted = count_lis_length_and_number(&values).unwrap();
        let brute = brute_force_lis(&values).unwrap();
        assert_eq!(counted.opt, brute.opt);
        assert_eq!(counted.count, BigUint::from(brute.count));
        assert_eq!(brute.count, 1);
        let patience: Vec<u32> = patience_reconstruct(&values)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        assert_eq!(patience, truth.ids());
        let expected: Vec<u32> = brute.optima[0].iter().map(|&i| i as u32).collect();
        assert_eq!(expected, truth.ids());
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 120,
        "oracle sweep took {elapsed:?}, budget is 2 minutes"
    );
    println!("criterion 1 (generator vs brute force, 500+500 instances): PASS in {elapsed:?}");
}

#[test]
fn criterion_2_reference_instances_golden() {
    // Activity rows 06:09-07:24, 07:13-08:23, 07:29-09:28, 08:24-10:18,
    // 04:48-06:14.
    let activity = ActivityInstance::new(
        &[(369, 444), (433, 503), (449, 568), (504, 618), (288, 374)],
        0,
        false,
    )
    .unwrap();
    let counted = count_optima_and_backtrack(&activity);
    assert_eq!(counted.count, BigUint::from(1u32));
    let solution = counted.unique_solution.unwrap();
    assert_eq!(id_sequence_to_wire(&solution), "\\ids{5,2,4}");
    assert_eq!(answer_to_wire(solution.len() as u32), "\\answer{3}");
    let greedy: BTreeSet<u32> = greedy_earliest_finish(&activity).into_iter().collect();
    assert_eq!(greedy, solution.iter().copied().collect());
    assert_eq!(
        canonical_order_activity(&solution, &activity).unwrap(),
        solution
    );

    let values = [797i64, 476, 335, 452, 606];
    let counted = count_lis_length_and_number(&values).unwrap();
    assert_eq!(counted.count, BigUint::from(1u32));
    let solution = counted.unique_solution.unwrap();
    assert_eq!(id_sequence_to_wire(&solution), "\\ids{3,4,5}");
    assert_eq!(answer_to_wire(solution.len() as u32), "\\answer{3}");

    // And the same certificates hold through the dataset verification path.
    let lis = LisInstance::new(&values, 0, false).unwrap();
    let records = vec![
        veriseq::domain::DatasetRecord::from_parts(
            &Instance::Activity(activity.clone()),
            &GroundTruth::new(vec![5, 2, 4]),
            veriseq::prompt::render_prompt(
                &Instance::Activity(activity),
                veriseq::prompt::PromptVariant::new(Task::Activity, false),
            )
            .unwrap(),
        ),
        veriseq::domain::DatasetRecord::from_parts(
            &Instance::Lis(lis.clone()),
            &GroundTruth::new(vec![3, 4, 5]),
            veriseq::prompt::render_prompt(
                &Instance::Lis(lis),
                veriseq::prompt::PromptVariant::new(Task::Lis, false),
            )
            .unwrap(),
        ),
    ];
    let report = verify_dataset(&records, 12);
    assert!(report.ok(), "violations: {:?}", report.violations);
    println!("criterion 2 (reference golden cases): PASS");
}

#[test]
fn criterion_3_reward_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Closed forms at lambda = gamma = 0.1.
    let truth = GroundTruth::new(vec![5, 2, 4]);
    let correct_no_fmt = ParsedOutput {
        answer: Some(3),
        ..Default::default()
    };
    assert_eq!(reward_ans_fmt(&correct_no_fmt, &truth, 0.1), 0.9);
    let wrong_with_fmt = ParsedOutput {
        answer: Some(4),
        has_format: true,
        ..Default::default()
    };
    assert_eq!(reward_ans_fmt(&wrong_with_fmt, &truth, 0.1), 0.1);
    let right_len_prefix = ParsedOutput {
        ids: Some(vec![5, 2, 1]),
        ..Default::default()
    };
    assert_eq!(reward_ids_prefix(&right_len_prefix, &truth, 0.1), 2.0 / 3.0);
    let short_prefix = ParsedOutput {
        ids: Some(vec![5, 2]),
        ..Default::default()
    };
    assert_eq!(
        reward_ids_prefix(&short_prefix, &truth, 0.1),
        2.0 / 3.0 - 0.1
    );
    let no_parse = ParsedOutput::default();
    assert_eq!(reward_ids_prefix(&no_parse, &truth, 0.1), 0.0);

    // Randomized range, dominance, and monotonicity checks.
    for _ in 0..2000 {
        let truth_len = rng.random_range(1..=8usize);
        let truth = GroundTruth::new((1..=truth_len as u32).collect());
        let parsed = ParsedOutput {
            answer: if rng.random_bool(0.8) {
                Some(rng.random_range(0..=9))
            } else {
                None
            },
            ids: if rng.random_bool(0.8) {
                let len = rng.random_range(0..=10usize);
                Some((0..len).map(|_| rng.random_range(1..=12u32)).collect())
            } else {
                None
            },
            has_format: rng.random_bool(0.5),
            sorted_candidates: Vec::new(),
        };
        let lambda = rng.random_range(0.0..=1.0);
        let gamma = rng.random_range(0.0..=1.0);
        for value in [
            reward_ans(&parsed, &truth),
            reward_ans_fmt(&parsed, &truth, lambda),
            reward_ids_exact(&parsed, &truth),
            reward_ids_prefix(&parsed, &truth, gamma),
        ] {
            assert!((0.0..=1.0).contains(&value), "reward {value} out of range");
        }
        if reward_ids_exact(&parsed, &truth) == 1.0 {
            assert_eq!(reward_ids_prefix(&parsed, &truth, gamma), 1.0);
        }

        // Longer agreement never hurts at fixed predicted length.
        let predicted_len = rng.random_range(1..=8usize);
        let cap = predicted_len.min(truth_len);
        let reward_for = |matched: usize| {
            let ids: Vec<u32> = (0..predicted_len)
                .map(|i| {
                    if i < matched {
                        (i + 1) as u32
                    } else {
                        100 + i as u32
                    }
                })
                .collect();
            reward_ids_prefix(
                &ParsedOutput {
                    ids: Some(ids),
                    ..Default::default()
                },
                &truth,
                gamma,
            )
        };
        for m in 1..=cap {
            assert!(reward_for(m - 1) <= reward_for(m));
        }
    }

    // Sort reward: exact full-block match only.
    let instance = ActivityInstance::new(
        &[(369, 444), (433, 503), (449, 568), (504, 618), (288, 374)],
        0,
        false,
    )
    .unwrap();
    let truth_sorted = instance.sorted_order();
    let exact = extract_sorted_candidates("sorted: 5, 1, 2, 3, 4", &instance);
    assert_eq!(reward_sort(&exact, &truth_sorted), 1.0);
    let off_by_one = extract_sorted_candidates("sorted: 1, 5, 2, 3, 4", &instance);
    assert!(off_by_one.sorted_block_full.is_some());
    assert_eq!(reward_sort(&off_by_one, &truth_sorted), 0.0);
    let absent = extract_sorted_candidates("nothing here", &instance);
    assert_eq!(reward_sort(&absent, &truth_sorted), 0.0);

    println!("criterion 3 (reward ranges, dominance, closed forms): PASS");
}

/// Monte-Carlo estimate of Pass@k: mean over random k-subsets of the flag
/// vector, sampled by partial Fisher-Yates.
fn monte_carlo_pass_at_k(flags: &[bool], k: usize, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = flags.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut hits = 0usize;
    for _ in 0..draws {
        let mut any = false;
        for j in 0..k {
            let pick = rng.random_range(j..n);
            indices.swap(j, pick);
            if flags[indices[j]] {
                any = true;
                break;
            }
        }
        if any {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

#[test]
fn criterion_4_metric_suite() {
    // Closed form, exactly.
    assert_eq!(unbiased_pass_at_k(4, 1, 2), 0.5);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.random_range(4..=256usize);
        let k = rng.random_range(1..=n);
        let c = rng.random_range(0..=n);
        let mut flags = vec![false; n];
        for f in flags.iter_mut().take(c) {
            *f = true;
        }
        flags.shuffle(&mut rng);
        let exact = pass_at_k(&flags, k, Estimator::Unbiased).unwrap();
        let sampled = monte_carlo_pass_at_k(&flags, k, 100_000, &mut rng);
        assert!(
            (exact - sampled).abs() <= 0.01,
            "n={n} c={c} k={k}: exact {exact} vs monte-carlo {sampled}"
        );
    }

    // Monotone in k and estimator agreement at k = n.
    for _ in 0..50 {
        let n = rng.random_range(1..=64usize);
        let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        for estimator in [Estimator::Prefix, Estimator::Unbiased] {
            let mut prev = 0.0;
            for k in 1..=n {
                let v = pass_at_k(&flags, k, estimator).unwrap();
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
        assert_eq!(
            pass_at_k(&flags, n, Estimator::Prefix).unwrap(),
            pass_at_k(&flags, n, Estimator::Unbiased).unwrap()
        );
    }

    // Deterministic tie-breaking: numerically smallest answer, then
    // lexicographically smallest sequence.
    assert!(self_consistency(&[Some(3i64), Some(4)], &3, 2));
    assert!(!self_consistency(&[Some(3i64), Some(4)], &4, 2));
    assert!(self_consistency(
        &[Some(vec![2u32, 3]), Some(vec![1u32, 9])],
        &vec![1u32, 9],
        2
    ));
    assert!(self_consistency(&[None, Some(5i64), None], &5, 3));
    assert!(!self_consistency(&[None::<i64>, None, None], &5, 3));

    println!("criterion 4 (Pass@k closed form, Monte-Carlo, ties): PASS");
}

#[test]
fn criterion_5_planted_policy_end_to_end() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    let mut spec = DatasetSpec::new(Task::Lis, 5);
    spec.total_instances = 400;
    spec.m_min = 5;
    spec.m_max = 6;
    spec.test_length_set = [6].into_iter().collect();
    let output = build_dataset(&spec, dir.path()).unwrap();

    // Pool train and test back together for the synthetic run.
    let mut records = veriseq_cli::responses::load_dataset(&output.train_path).unwrap();
    records.extend(veriseq_cli::responses::load_dataset(&output.test_path).unwrap());
    assert_eq!(records.len(), 400);
    let dataset_path = dir.path().join("all.jsonl");
    let mut lines = String::new();
    for record in &records {
        lines.push_str(&serde_json::to_string(record).unwrap());
        lines.push('\n');
    }
    std::fs::write(&dataset_path, lines).unwrap();

    let p = 0.3f64;
    let k = 64usize;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut responses = String::new();
    for record in &records {
        let correct = format!(
            "{}\n{}",
            id_sequence_to_wire(&record.ground_truth_ids),
            answer_to_wire(record.ground_truth_answer)
        );
        for sample_idx in 0..k {
            let text = if rng.random_bool(p) {
                correct.clone()
            } else {
                "\\ids{}\n\\answer{0}".to_string()
            };
            let row = ResponseRow {
                instance_id: record.seed,
                sample_idx: sample_idx as u64,
                text,
            };
            responses.push_str(&serde_json::to_string(&row).unwrap());
            responses.push('\n');
        }
    }
    let responses_path = dir.path().join("responses.jsonl");
    std::fs::write(&responses_path, responses).unwrap();

    let outputs = evaluate_run(
        &dataset_path,
        &responses_path,
        Some(k),
        Estimator::Unbiased,
        &dir.path().join("reports"),
    )
    .unwrap();

    for target_k in [1usize, 4, 16, 64] {
        let aggregate = outputs
            .summary
            .metrics
            .curves
            .iter()
            .find(|a| a.k == target_k)
            .unwrap();
        let analytic = 1.0 - (1.0 - p).powi(target_k as i32);
        assert!(
            (aggregate.pass_ans - analytic).abs() <= 0.02,
            "k={target_k}: pass_ans {} vs analytic {analytic}",
            aggregate.pass_ans
        );
        assert!(
            (aggregate.pass_ids - analytic).abs() <= 0.02,
            "k={target_k}: pass_ids {} vs analytic {analytic}",
            aggregate.pass_ids
        );
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "end-to-end run took {elapsed:?}, budget is 1 minute"
    );
    println!("criterion 5 (planted Bernoulli policy, 400 instances): PASS in {elapsed:?}");
}

fn lcs_substring_dp(a: &[u32], b: &[u32]) -> usize {
    let mut best = 0;
    let mut prev = vec![0usize; b.len() + 1];
    for &x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, &y) in b.iter().enumerate() {
            if x == y {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best
}

#[test]
fn criterion_6_lcs_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=16usize);
        let mut truth: Vec<u32> = (1..=n as u32).collect();
        truth.shuffle(&mut rng);
        let take = rng.random_range(0..=n);
        let mut candidate = truth.clone();
        candidate.shuffle(&mut rng);
        candidate.truncate(take);
        let (len, _) = contiguous_lcs(&candidate, &truth).unwrap();
        assert_eq!(
            len,
            lcs_substring_dp(&candidate, &truth),
            "candidate {candidate:?} truth {truth:?}"
        );
    }
    println!("criterion 6 (contiguous LCS vs quadratic DP, 10k pairs): PASS");
}

struct ExtractionFixture {
    name: &'static str,
    text: &'static str,
    full: Option<&'static [u32]>,
    exact: bool,
    lcs_len: usize,
    anchor: Anchor,
    best_method: Option<CandidateMethod>,
}

#[test]
fn criterion_7_extraction_fixture_corpus() {
    // Five-row reference instance; canonical sorted order is [5,1,2,3,4].
    let instance = ActivityInstance::new(
        &[(369, 444), (433, 503), (449, 568), (504, 618), (288, 374)],
        0,
        false,
    )
    .unwrap();
    let truth_sorted = instance.sorted_order();
    assert_eq!(truth_sorted, vec![5, 1, 2, 3, 4]);

    use CandidateMethod::*;
    let fixtures: [ExtractionFixture; 20] = [
        ExtractionFixture {
            name: "sorted block via ID tokens, stop word `Greedy`",
            text: "First I will sort the rows.\nSorted order: ID 5, ID 1, ID 2, ID 3, ID 4. Greedy selection follows.",
            full: Some(&[5, 1, 2, 3, 4]),
            exact: true,
            lcs_len: 5,
            anchor: Anchor::Both,
            best_method: Some(SortedBlockFull),
        },
        ExtractionFixture {
            name: "sorted block via comma run, stop word `so`",
            text: "After sorting by end time we get 5, 1, 2, 3, 4 so we pick greedily.",
            full: Some(&[5, 1, 2, 3, 4]),
            exact: true,
            lcs_len: 5,
            anchor: Anchor::Both,
            best_method: Some(SortedBlockFull),
        },
        ExtractionFixture {
            name: "sorted block without stop word",
            text: "sorted: 5,1,2,3,4",
            full: Some(&[5, 1, 2, 3, 4]),
            exact: true,
            lcs_len: 5,
            anchor: Anchor::Both,
            best_method: Some(SortedBlockFull),
        },
        ExtractionFixture {
            name: "partial sorted paragraph falls back to id stream",
            text: "I sort and get ID 5, ID 1, ID 2 first.",
            full: None,
            exact: false,
            lcs_len: 3,
            anchor: Anchor::Both,
            best_method: Some(IdStream),
        },
        ExtractionFixture {
            name: "braces block deduped and filtered",
            text: "\\ids{2,2,3,99}",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::Both,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "no digits at all",
            text: "I cannot figure this one out.",
            full: None,
            exact: false,
            lcs_len: 0,
            anchor: Anchor::Neither,
            best_method: None,
        },
        ExtractionFixture {
            name: "second braces block carries the sorted order",
            text: "\\ids{1,2}\nlater on\n\\ids{5,1,2,3,4}",
            full: None,
            exact: false,
            lcs_len: 5,
            anchor: Anchor::Both,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "two-word stop word `final answer` truncates",
            text: "We sort the items: ID 3, ID 4 final answer ID 5",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::Start,
            best_method: Some(IdStream),
        },
        ExtractionFixture {
            name: "stop word is case-insensitive",
            text: "Sorting gives 5, 1, 2, 3, 4. THUS the choice is clear.",
            full: Some(&[5, 1, 2, 3, 4]),
            exact: true,
            lcs_len: 5,
            anchor: Anchor::Both,
            best_method: Some(SortedBlockFull),
        },
        ExtractionFixture {
            name: "lowercase `id 5` tokens do not count",
            text: "The sorted ids are id 5 id 1",
            full: None,
            exact: false,
            lcs_len: 0,
            anchor: Anchor::Neither,
            best_method: None,
        },
        ExtractionFixture {
            name: "anchor start",
            text: "\\ids{5,1,4}",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::Start,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "anchor end",
            text: "\\ids{4,2,3}",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::End,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "anchor neither",
            text: "\\ids{5,3,4,1}",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::Neither,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "longest comma run wins",
            text: "maybe 1, 2 or rather 3, 4, 1",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::Start,
            best_method: Some(CommaRun),
        },
        ExtractionFixture {
            name: "a singleton integer is not a run",
            text: "pick 4",
            full: None,
            exact: false,
            lcs_len: 0,
            anchor: Anchor::Neither,
            best_method: None,
        },
        ExtractionFixture {
            name: "whitespace inside braces is tolerated",
            text: "\\ids{ 5 ,1 }",
            full: None,
            exact: false,
            lcs_len: 2,
            anchor: Anchor::Both,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "well-formatted full response",
            text: "<think>plan</think>\n\\ids{5,2,4}\n\\answer{3}",
            full: None,
            exact: false,
            lcs_len: 1,
            anchor: Anchor::Start,
            best_method: Some(IdsBraces),
        },
        ExtractionFixture {
            name: "invalid ids filtered from the id stream",
            text: "ID 7 ID 2 ID 9 ID 2",
            full: None,
            exact: false,
            lcs_len: 1,
            anchor: Anchor::Both,
            best_method: Some(IdStream),
        },
        ExtractionFixture {
            name: "empty braces block yields no candidate",
            text: "\\ids{}",
            full: None,
            exact: false,
            lcs_len: 0,
            anchor: Anchor::Neither,
            best_method: None,
        },
        ExtractionFixture {
            name: "sorted paragraph isolated from a later answer paragraph",
            text: "Sorted by end: 5, 1, 2, 3, 4\n\nTherefore the schedule is \\ids{5,2,4} \\answer{3}",
            full: Some(&[5, 1, 2, 3, 4]),
            exact: true,
            lcs_len: 5,
            anchor: Anchor::Both,
            best_method: Some(SortedBlockFull),
        },
    ];

    for fixture in &fixtures {
        let extraction = extract_sorted_candidates(fixture.text, &instance);
        assert_eq!(
            extraction.sorted_block_full.as_deref(),
            fixture.full,
            "full block mismatch on `{}`",
            fixture.name
        );
        let analysis = veriseq::analyze::analyze_sorting(fixture.text, &instance, &truth_sorted);
        assert_eq!(
            analysis.exact_sorted, fixture.exact,
            "exact on `{}`",
            fixture.name
        );
        assert_eq!(
            analysis.extraction_success,
            fixture.full.is_some(),
            "extraction_success on `{}`",
            fixture.name
        );
        assert_eq!(
            analysis.lcs_len, fixture.lcs_len,
            "lcs_len on `{}`",
            fixture.name
        );
        assert_eq!(
            analysis.anchor, fixture.anchor,
            "anchor on `{}`",
            fixture.name
        );
        assert_eq!(
            analysis.best_method, fixture.best_method,
            "best_method on `{}`",
            fixture.name
        );
    }
    println!("criterion 7 (20-response extraction corpus): PASS");
}

#[test]
fn criterion_8_feature_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let n = rng.random_range(2..=20usize);
        // Narrow value range so duplicates and ties are common.
        let values: Vec<i64> = (0..n).map(|_| rng.random_range(-15..=15)).collect();
        let f = lis_features(&values).unwrap();
        let lis = count_lis_length_and_number(&values).unwrap().opt as f64;
        assert!(f.greedy_len <= f.beam2, "{values:?}");
        assert!(f.beam2 <= f.beam3, "{values:?}");
        assert!(f.beam3 <= lis, "{values:?}");
        assert!(f.budget1 <= f.budget2, "{values:?}");
        assert!(f.budget2 <= lis, "{values:?}");
    }

    // Closed forms.
    let nine: Vec<i64> = (1..=9).collect();
    assert_eq!(lis_features(&nine).unwrap().rand_lis_baseline, 6.0);
    let f = lis_features(&[2, 1]).unwrap();
    assert_eq!(f.inversion_ratio, 1.0);
    assert_eq!(f.pair_inc_ratio, 0.0);
    assert_eq!(f.tau_like, -1.0);
    let f = lis_features(&[1, 3, 2, 4]).unwrap();
    assert_eq!(f.pair_inc_ratio, 5.0 / 6.0);
    assert_eq!(f.inversion_ratio, 1.0 / 6.0);
    assert_eq!(f.tau_like, 5.0 / 6.0 - 1.0 / 6.0);

    // Leak-free grouped splits across 100 seeds.
    let ids: Vec<u64> = (0..137).map(|i| derive_seed(99, i)).collect();
    for seed in 0..100u64 {
        let split = group_split(&ids, 0.25, seed).unwrap();
        assert!(split.train.is_disjoint(&split.test));
        let union: BTreeSet<u64> = split.train.union(&split.test).copied().collect();
        assert_eq!(union, ids.iter().copied().collect());
        assert_eq!(split.test.len(), 35); // ceil(0.25 * 137)
    }
    println!("criterion 8 (feature ordering on 10k sequences, splits): PASS");
}

#[test]
fn criterion_9_determinism_and_service_parity() {
    // Byte-identical rebuilds for both tasks.
    for task in [Task::Activity, Task::Lis] {
        let mut spec = DatasetSpec::new(task, 77);
        spec.total_instances = 40;
        spec.m_min = 5;
        spec.m_max = 9;
        spec.test_length_set = [9].into_iter().collect();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let out_a = build_dataset(&spec, dir_a.path()).unwrap();
        let out_b = build_dataset(&spec, dir_b.path()).unwrap();
        for (a, b) in [
            (&out_a.train_path, &out_b.train_path),
            (&out_a.test_path, &out_b.test_path),
        ] {
            assert_eq!(
                std::fs::read(a).unwrap(),
                std::fs::read(b).unwrap(),
                "rebuild differs for {task}"
            );
        }
    }

    // Service soak: 10k mixed requests with malformed injections, compared
    // bit-exactly against offline scoring.
    let config = GeneratorConfig::default().with_lengths(5, 8);
    let mut pool: Vec<(Instance, GroundTruth)> = Vec::new();
    for i in 0..10u64 {
        let (inst, truth) = generate_activity(&config, derive_seed(0x90, i)).unwrap();
        pool.push((Instance::Activity(inst), truth));
        let (inst, truth) = generate_lis(&config, derive_seed(0x91, i)).unwrap();
        pool.push((Instance::Lis(inst), truth));
    }

    let specs = [
        Some(RewardSpec::single(RewardKind::Ans)),
        Some(RewardSpec::single(RewardKind::AnsFmt)),
        Some(RewardSpec::single(RewardKind::IdsExact)),
        Some(RewardSpec::single(RewardKind::IdsPrefix)),
        None, // service default (ans)
    ];
    let activity_combo = RewardSpec::new(vec![
        (RewardKind::Ans, 0.34),
        (RewardKind::IdsExact, 0.33),
        (RewardKind::Sort, 0.33),
    ]);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let total = 10_000usize;
    let mut lines = Vec::with_capacity(total);
    let mut expected: Vec<Option<veriseq::reward::RewardBreakdown>> = Vec::with_capacity(total);
    for i in 0..total {
        if i % 97 == 0 {
            // Valid JSON but not a valid request: the id must be echoed.
            lines.push(format!("{{\"request_id\": {i}, \"task\": \"bogus\"}}"));
            expected.push(None);
            continue;
        }
        let (instance, truth) = &pool[rng.random_range(0..pool.len())];
        let spec = if instance.task() == Task::Activity && rng.random_bool(0.2) {
            Some(activity_combo.clone())
        } else {
            specs[rng.random_range(0..specs.len())].clone()
        };
        let text = match rng.random_range(0..5u32) {
            0 => format!(
                "<think>steps</think>\n{}\n{}",
                id_sequence_to_wire(truth.ids()),
                answer_to_wire(truth.answer())
            ),
            1 => format!(
                "sorted: {}\n\n{}{}",
                (1..=instance.len() as u32)
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
                id_sequence_to_wire(truth.ids()),
                answer_to_wire(truth.answer())
            ),
            2 => format!("\\ids{{{}}}\\answer{{99}}", truth.ids()[0]),
            3 => "no markers whatsoever".to_string(),
            _ => format!("\\ids{{}}\n{}", answer_to_wire(truth.answer())),
        };
        let default_spec = RewardSpec::default();
        let offline = score(
            &text,
            instance,
            truth,
            spec.as_ref().unwrap_or(&default_spec),
        )
        .unwrap();
        let request = request_for(serde_json::json!(i), instance, truth, text, spec);
        lines.push(serde_json::to_string(&request).unwrap());
        expected.push(Some(offline));
    }

    let mut child = Command::new(env!("CARGO_BIN_EXE_veriseq"))
        .args(["serve", "--stdio"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .expect("spawning scoring service");
    let mut stdin = child.stdin.take().unwrap();
    let stdout = child.stdout.take().unwrap();

    let writer = std::thread::spawn(move || {
        for line in &lines {
            writeln!(stdin, "{line}").expect("service accepts writes");
        }
        drop(stdin);
    });

    let mut responses = Vec::with_capacity(total);
    for line in BufReader::new(stdout).lines() {
        responses.push(line.expect("service emits valid lines"));
    }
    writer.join().unwrap();
    let status = child.wait().unwrap();
    assert!(status.success(), "service exited with {status}");
    assert_eq!(responses.len(), total, "one response per request line");

    let mut errors = 0usize;
    for (i, (line, expectation)) in responses.iter().zip(&expected).enumerate() {
        let response: ScoreResponse = serde_json::from_str(line).expect("response line parses");
        match (response, expectation) {
            (
                ScoreResponse::Ok {
                    request_id,
                    breakdown,
                },
                Some(offline),
            ) => {
                assert_eq!(request_id, serde_json::json!(i));
                assert_eq!(
                    breakdown.total.to_bits(),
                    offline.total.to_bits(),
                    "total differs at request {i}"
                );
                assert_eq!(breakdown.parse_status, offline.parse_status);
                assert_eq!(breakdown.per_component.len(), offline.per_component.len());
                for (a, b) in breakdown.per_component.iter().zip(&offline.per_component) {
                    assert_eq!(a.kind, b.kind);
                    assert_eq!(a.raw.to_bits(), b.raw.to_bits());
                    assert_eq!(a.weight.to_bits(), b.weight.to_bits());
                }
            }
            (ScoreResponse::Err { request_id, error }, None) => {
                assert_eq!(request_id, serde_json::json!(i), "{error}");
                errors += 1;
            }
            (got, _) => panic!("request {i}: unexpected response {got:?}"),
        }
    }
    assert_eq!(errors, total.div_ceil(97));
    println!(
        "criterion 9 (byte-identical rebuilds; {total}-request soak, {errors} injected errors): PASS"
    );
}
