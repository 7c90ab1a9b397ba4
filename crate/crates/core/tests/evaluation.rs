use std::collections::{BTreeSet, HashMap};

use chrono::{Duration, TimeZone, Utc};
use kurev::evaluation::{
    average_precision, map_at_k, reasonableness, top_k_accuracy, Reasonableness, TruthMap, K_VALUES,
};
use kurev::history::CommitRecord;
use kurev::prs::{PrState, PullRequest};
use kurev::recommenders::{RankedDeveloper, Recommendation, RecommenderKind};
use proptest::prelude::*;

fn rec(pr_id: u64, devs: &[&str]) -> Recommendation {
    Recommendation {
        pr_id,
        kind: RecommenderKind::Kurec,
        ranked: devs
            .iter()
            .enumerate()
            .map(|(i, d)| RankedDeveloper {
                developer: d.to_string(),
                score: (devs.len() - i) as f64,
            })
            .collect(),
    }
}

fn set(devs: &[&str]) -> BTreeSet<String> {
    devs.iter().map(|s| s.to_string()).collect()
}

const POOL: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// A ranking without repeats and a truth set over the same pool.
fn arb_case() -> impl Strategy<Value = (Vec<String>, BTreeSet<String>)> {
    (
        Just(POOL.to_vec()).prop_shuffle(),
        0usize..=6,
        prop::collection::btree_set(0usize..6, 0..=4),
    )
        .prop_map(|(order, n, truth)| {
            (
                order[..n].iter().map(|s| s.to_string()).collect(),
                truth.into_iter().map(|i| POOL[i].to_string()).collect(),
            )
        })
}

proptest! {
    #[test]
    fn ap_is_bounded_and_perfect_only_on_clean_prefix((ranked, truth) in arb_case(), k in 1usize..=6) {
        let ap = average_precision(&ranked, &truth, k);
        prop_assert!((0.0..=1.0).contains(&ap));
        let top: Vec<bool> = ranked.iter().take(k).map(|d| truth.contains(d)).collect();
        let hits = top.iter().filter(|h| **h).count();
        let clean = hits > 0 && top[..hits].iter().all(|h| *h);
        prop_assert_eq!(ap == 1.0, clean, "ap {} top {:?}", ap, top);
    }

    #[test]
    fn accuracy_grows_with_k(cases in prop::collection::vec(arb_case(), 1..8)) {
        let recs: Vec<Recommendation> = cases
            .iter()
            .enumerate()
            .map(|(i, (r, _))| rec(i as u64, &r.iter().map(String::as_str).collect::<Vec<_>>()))
            .collect();
        let truth: TruthMap = cases.iter().enumerate().map(|(i, (_, t))| (i as u64, t.clone())).collect();
        let acc: Vec<f64> = K_VALUES.iter().map(|&k| top_k_accuracy(&recs, &truth, k).unwrap()).collect();
        prop_assert!(acc.windows(2).all(|w| w[0] <= w[1]), "{:?}", acc);
    }

    #[test]
    fn map_is_mean_of_ap(cases in prop::collection::vec(arb_case(), 1..8), k in 1usize..=5) {
        let recs: Vec<Recommendation> = cases
            .iter()
            .enumerate()
            .map(|(i, (r, _))| rec(i as u64, &r.iter().map(String::as_str).collect::<Vec<_>>()))
            .collect();
        let truth: TruthMap = cases.iter().enumerate().map(|(i, (_, t))| (i as u64, t.clone())).collect();
        let mean = cases.iter().map(|(r, t)| average_precision(r, t, k)).sum::<f64>() / cases.len() as f64;
        prop_assert!((map_at_k(&recs, &truth, k).unwrap() - mean).abs() < 1e-12);
    }
}

#[test]
fn accuracy_examples() {
    let truth: TruthMap = [(1, set(&["a"])), (2, set(&["b"])), (3, set(&["c"]))]
        .into_iter()
        .collect();
    let all_first = [rec(1, &["a"]), rec(2, &["b"]), rec(3, &["c", "x"])];
    assert_eq!(top_k_accuracy(&all_first, &truth, 1).unwrap(), 1.0);
    let never = [rec(1, &["x"]), rec(2, &["y"]), rec(3, &[])];
    assert_eq!(top_k_accuracy(&never, &truth, 5).unwrap(), 0.0);
    let two_of_three = [rec(1, &["x", "y", "a"]), rec(2, &["b"]), rec(3, &["x", "y", "z", "c"])];
    assert!((top_k_accuracy(&two_of_three, &truth, 3).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(top_k_accuracy(&two_of_three, &truth, 0).is_err());
    assert!(top_k_accuracy(&[], &truth, 1).is_err());
}

#[test]
fn average_precision_examples() {
    let truth = set(&["a", "b", "c"]);
    let ap = average_precision(&["a", "x", "b", "y", "c"], &truth, 5);
    assert!((ap - 0.7556).abs() < 1e-4);
    assert_eq!(average_precision(&["a"], &set(&["a"]), 1), 1.0);
    assert_eq!(average_precision(&["x", "a", "y", "z", "w"], &set(&["a"]), 5), 0.5);
    assert_eq!(average_precision(&["x", "y"], &set(&["a"]), 5), 0.0);
}

#[test]
fn map_examples() {
    let truth: TruthMap = [(1, set(&["a"])), (2, set(&["a"]))].into_iter().collect();
    let recs = [rec(1, &["a"]), rec(2, &["x", "a"])];
    assert_eq!(map_at_k(&recs, &truth, 2).unwrap(), 0.75);
    let none = [rec(1, &["x"]), rec(2, &["y"])];
    assert_eq!(map_at_k(&none, &truth, 2).unwrap(), 0.0);

    // Mixed five-PR fixture against a hand mean.
    let truth: TruthMap = (1..=5).map(|i| (i, set(&["a", "b"]))).collect();
    let recs = [
        rec(1, &["a", "b"]),
        rec(2, &["b", "x", "a"]),
        rec(3, &["x", "y", "z"]),
        rec(4, &["x", "a"]),
        rec(5, &["a"]),
    ];
    let hand = (1.0 + (1.0 + 2.0 / 3.0) / 2.0 + 0.0 + 0.5 + 1.0) / 5.0;
    assert!((map_at_k(&recs, &truth, 3).unwrap() - hand).abs() < 1e-12);
}

fn at(day: i64) -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + Duration::days(day)
}

fn commit(author: &str, day: i64, files: &[&str]) -> CommitRecord {
    CommitRecord {
        hash: format!("{author}{day}"),
        author: author.into(),
        authored_at: at(day),
        changed_java_files: files.iter().map(|s| s.to_string()).collect(),
    }
}

fn pr(files: &[&str], day: i64) -> PullRequest {
    PullRequest {
        id: 1,
        opened_at: at(day),
        state: PrState::Closed,
        changed_files: files.iter().map(|s| s.to_string()).collect(),
        reviewers: ["rev".to_string()].into_iter().collect(),
        author: "author".into(),
        review_comments: vec![],
        head_commit: None,
    }
}

#[test]
fn reasonableness_examples() {
    let target = pr(&["A.java", "B.java", "C.java", "D.java"], 400);
    let commits = [
        commit("ann", 370, &["A.java", "B.java", "C.java", "D.java"]),
        commit("ben", 390, &["A.java"]),
    ];
    assert_eq!(
        reasonableness(&target, "ann", &commits, &[]),
        Reasonableness::Reasonable
    );
    assert_eq!(
        reasonableness(&target, "cat", &commits, &[]),
        Reasonableness::Unreasonable
    );
    assert_eq!(
        reasonableness(&target, "ben", &commits, &[]),
        Reasonableness::Unreasonable
    );
    assert_eq!(
        reasonableness(&target, "rev", &commits, &[]),
        Reasonableness::NotApplicable
    );

    // Two of four files through an authored pull request counts as half.
    let mut authored = pr(&["A.java", "B.java"], 300);
    authored.author = "ben".into();
    authored.id = 0;
    assert_eq!(
        reasonableness(&target, "ben", &commits, &[authored]),
        Reasonableness::Reasonable
    );

    // Activity older than 183 days or at the opening instant is ignored.
    let old = [
        commit("dan", 400 - 184, &["A.java", "B.java"]),
        commit("dan", 400, &["C.java", "D.java"]),
    ];
    assert_eq!(reasonableness(&target, "dan", &old, &[]), Reasonableness::Unreasonable);
    let edge = [commit("dan", 400 - 183, &["A.java", "B.java"])];
    assert_eq!(reasonableness(&target, "dan", &edge, &[]), Reasonableness::Reasonable);
}

#[test]
fn truth_map_lookup_errors_on_missing_pr() {
    let truth: TruthMap = HashMap::new();
    assert!(top_k_accuracy(&[rec(9, &["a"])], &truth, 1).is_err());
}
