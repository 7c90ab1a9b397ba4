use std::collections::{BTreeMap, BTreeSet};

use kurev::combiner::{best_performer, combined_score, replay, Brst, BrstPolicy, PrOutcome, Scoreboard, HYBRID_WINDOW};
use kurev::recommenders::{RankedDeveloper, Recommendation, RecommenderKind, BASE_KINDS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use RecommenderKind::{Cf, Chrev, Er, Kurec, Rf};

const DEVS: [&str; 5] = ["a", "b", "c", "d", "e"];

fn rec(pr_id: u64, kind: RecommenderKind, devs: &[&str]) -> Recommendation {
    Recommendation {
        pr_id,
        kind,
        ranked: devs
            .iter()
            .enumerate()
            .map(|(i, d)| RankedDeveloper {
                developer: d.to_string(),
                score: (10 - i) as f64,
            })
            .collect(),
    }
}

fn outcome(pr_id: u64, truth: &[&str], runs: &[(RecommenderKind, &[&str])], no_ku: bool) -> PrOutcome {
    PrOutcome {
        pr_id,
        truth: truth.iter().map(|s| s.to_string()).collect(),
        runs: runs.iter().map(|(k, d)| (*k, rec(pr_id, *k, d))).collect(),
        kurec_no_ku: no_ku,
    }
}

/// Random outcomes: per PR a truth set and a ranking of up to five developers for each base kind.
fn arb_outcomes() -> impl Strategy<Value = Vec<PrOutcome>> {
    let ranking = Just(DEVS.to_vec())
        .prop_shuffle()
        .prop_flat_map(|d| (Just(d), 0usize..=5));
    let one = (
        prop::collection::btree_set(0usize..5, 1..=2),
        prop::array::uniform5(ranking),
        any::<bool>(),
    );
    prop::collection::vec(one, 1..30).prop_map(|prs| {
        prs.into_iter()
            .enumerate()
            .map(|(i, (truth, rankings, no_ku))| {
                let runs: BTreeMap<RecommenderKind, Recommendation> = BASE_KINDS
                    .iter()
                    .zip(rankings)
                    .map(|(k, (order, n))| {
                        let devs = if *k == Kurec && no_ku { &order[..0] } else { &order[..n] };
                        (*k, rec(i as u64, *k, devs))
                    })
                    .collect();
                PrOutcome {
                    pr_id: i as u64,
                    truth: truth.into_iter().map(|t| DEVS[t].to_string()).collect::<BTreeSet<_>>(),
                    runs,
                    kurec_no_ku: no_ku,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incremental_scoreboard_matches_recomputation(outcomes in arb_outcomes()) {
        let mut board = Scoreboard::new();
        for (i, o) in outcomes.iter().enumerate() {
            board.push(o);
            for kind in BASE_KINDS {
                let full = combined_score(&outcomes[..=i], kind);
                prop_assert!((0.0..=1.0).contains(&full));
                prop_assert!((board.combined(kind) - full).abs() < 1e-12);
            }
            prop_assert_eq!(board.best(), best_performer(&outcomes[..=i]));
        }
    }

    #[test]
    fn replay_invariants(outcomes in arb_outcomes(), seed in any::<u64>()) {
        for policy in BrstPolicy::ALL {
            let run = replay(policy, &outcomes, seed);
            prop_assert_eq!(&run, &replay(policy, &outcomes, seed));
            prop_assert!(run.max_window <= HYBRID_WINDOW);
            prop_assert_eq!(run.steps.len(), outcomes.len());
            for (step, (o, r)) in run.steps.iter().zip(outcomes.iter().zip(&run.recommendations)) {
                prop_assert_eq!(r.kind, policy.kind());
                let fallback = step.delegate == Kurec && o.kurec_no_ku;
                prop_assert_eq!(step.used, if fallback { Rf } else { step.delegate });
                prop_assert_eq!(&r.ranked, &o.run(step.used).ranked);
            }
        }
    }

    #[test]
    fn delegate_ignores_current_and_future_truth(outcomes in arb_outcomes(), cut in 0usize..30, seed in any::<u64>()) {
        let cut = cut % outcomes.len();
        let mut altered = outcomes.clone();
        for o in &mut altered[cut..] {
            o.truth = ["zzz".to_string()].into_iter().collect();
        }
        for policy in BrstPolicy::ALL {
            let a = replay(policy, &outcomes, seed);
            let b = replay(policy, &altered, seed);
            for i in 0..=cut {
                prop_assert_eq!(a.steps[i].delegate, b.steps[i].delegate, "{:?} step {}", policy, i);
            }
        }
    }

    #[test]
    fn freq_counts_increment_once_per_pr(bests in prop::collection::vec(0usize..5, 0..40)) {
        let mut t = Brst::new(BrstPolicy::Freq);
        for (i, b) in bests.iter().enumerate() {
            t.record(BASE_KINDS[*b]);
            prop_assert_eq!(t.freq_counts().values().sum::<u64>(), i as u64 + 1);
        }
        let mut h = Brst::new(BrstPolicy::Hybrid);
        for b in &bests {
            h.record(BASE_KINDS[*b]);
            prop_assert!(h.window().len() <= HYBRID_WINDOW);
        }
    }
}

#[test]
fn best_performer_examples() {
    let only_kurec = outcome(1, &["a"], &[(Kurec, &["a"]), (Rf, &["b"]), (Cf, &["c", "b"])], false);
    assert_eq!(best_performer(&[only_kurec]), Some(Kurec));

    // CHREV and ER tie; CHREV comes first in the fixed order.
    let tie = outcome(1, &["a"], &[(Er, &["b", "a"]), (Chrev, &["b", "a"])], false);
    assert_eq!(
        combined_score(std::slice::from_ref(&tie), Er),
        combined_score(std::slice::from_ref(&tie), Chrev)
    );
    assert_eq!(best_performer(&[tie]), Some(Chrev));
    assert_eq!(best_performer(&[]), None);

    // Three PRs with mixed hits against a by-hand combined score.
    let prs = [
        outcome(1, &["a"], &[(Rf, &["a"]), (Cf, &["b", "a"])], false),
        outcome(2, &["b"], &[(Rf, &["c", "d", "e", "a", "f"]), (Cf, &["b"])], false),
        outcome(3, &["c"], &[(Rf, &["c"]), (Cf, &["a", "b", "c"])], false),
    ];
    // RF: per-k accuracy 2/3 for every k and AP likewise 2/3.
    assert!((combined_score(&prs, Rf) - 2.0 / 3.0).abs() < 1e-12);
    // CF: accuracy 1/3, 2/3, 1, 1, 1; AP@k means 1/3, 1/2, 11/18, 11/18, 11/18.
    let acc = (1.0 / 3.0 + 2.0 / 3.0 + 3.0) / 5.0;
    let map = (1.0 / 3.0 + 0.5 + 3.0 * (11.0 / 18.0)) / 5.0;
    assert!((combined_score(&prs, Cf) - (acc + map) / 2.0).abs() < 1e-12);
    // Both come to 2/3; RF precedes CF in the fixed order.
    assert!(((acc + map) / 2.0 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(best_performer(&prs), Some(Rf));
    assert_eq!(best_performer(&prs[..2]), Some(Cf));
}

#[test]
fn table_examples() {
    let mut freq = Brst::new(BrstPolicy::Freq);
    for k in [Kurec, Rf, Kurec, Kurec] {
        freq.record(k);
    }
    assert_eq!(freq.freq_counts().get(&Kurec), Some(&3));
    assert_eq!(freq.favourite(), Some(Kurec));

    let mut hybrid = Brst::new(BrstPolicy::Hybrid);
    for k in [Rf, Rf, Kurec] {
        hybrid.record(k);
    }
    assert_eq!(hybrid.favourite(), Some(Rf));

    let mut rec = Brst::new(BrstPolicy::Rec);
    rec.record(Er);
    rec.record(Cf);
    assert_eq!(rec.favourite(), Some(Cf));
}

#[test]
fn first_delegate_depends_only_on_seed() {
    let t = Brst::new(BrstPolicy::Hybrid);
    for seed in 0..20 {
        let a = t.choose(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = t.choose(&mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(a, b);
    }
}

#[test]
fn kurec_without_units_falls_back_to_rf() {
    let prs: Vec<PrOutcome> = (0..3)
        .map(|i| outcome(i, &["a"], &[(Kurec, &["a"]), (Rf, &["b", "a"])], i > 0))
        .collect();
    let run = replay(BrstPolicy::Rec, &prs, 1);
    // KUREC wins the first PR, so it is delegated next and falls back.
    assert_eq!(run.steps[0].best_after, Kurec);
    assert_eq!((run.steps[1].delegate, run.steps[1].used), (Kurec, Rf));
    assert_eq!(run.recommendations[1].developers().collect::<Vec<_>>(), vec!["b", "a"]);
    assert_eq!(run.recommendations[1].kind, RecommenderKind::AdRec);
}
