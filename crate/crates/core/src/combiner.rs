//! Adaptive combined recommenders driven by a best-recommender table.
//!
//! Test pull requests are processed in order. For each one a delegate base
//! recommender is chosen from the table, its ranking is emitted, and only then
//! is the ground truth used to find the best performer over all completed pull
//! requests and update the table.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::{map_at_k, per_pr_means, top_k_accuracy, TruthMap, K_VALUES};
use crate::recommenders::{Recommendation, RecommenderKind, BASE_KINDS};

/// Capacity of the hybrid policy's window.
pub const HYBRID_WINDOW: usize = 10;

/// Scores closer than this are treated as tied.
pub const SCORE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrstPolicy {
    /// Delegate to the kind that was best most often.
    Freq,
    /// Delegate to the most recent best kind.
    Rec,
    /// Delegate to the most frequent best kind among the last ten.
    Hybrid,
}

impl BrstPolicy {
    pub const ALL: [BrstPolicy; 3] = [BrstPolicy::Freq, BrstPolicy::Rec, BrstPolicy::Hybrid];

    pub fn kind(self) -> RecommenderKind {
        match self {
            BrstPolicy::Freq => RecommenderKind::AdFreq,
            BrstPolicy::Rec => RecommenderKind::AdRec,
            BrstPolicy::Hybrid => RecommenderKind::AdHybrid,
        }
    }

    pub fn from_kind(kind: RecommenderKind) -> Option<Self> {
        match kind {
            RecommenderKind::AdFreq => Some(BrstPolicy::Freq),
            RecommenderKind::AdRec => Some(BrstPolicy::Rec),
            RecommenderKind::AdHybrid => Some(BrstPolicy::Hybrid),
            _ => None,
        }
    }
}

/// Best recommender system table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Brst {
    policy: BrstPolicy,
    freq_counts: BTreeMap<RecommenderKind, u64>,
    last_best: Option<RecommenderKind>,
    window: VecDeque<RecommenderKind>,
    completed: u64,
}

/// First kind in tie order among those whose value is within tolerance of the maximum.
fn argmax_in_order(values: impl Fn(RecommenderKind) -> f64) -> RecommenderKind {
    let max = BASE_KINDS.iter().map(|&k| values(k)).fold(f64::NEG_INFINITY, f64::max);
    BASE_KINDS
        .iter()
        .copied()
        .find(|&k| values(k) >= max - SCORE_TOLERANCE)
        .expect("non-empty kind list")
}

impl Brst {
    pub fn new(policy: BrstPolicy) -> Self {
        Brst {
            policy,
            freq_counts: BTreeMap::new(),
            last_best: None,
            window: VecDeque::with_capacity(HYBRID_WINDOW),
            completed: 0,
        }
    }

    pub fn policy(&self) -> BrstPolicy {
        self.policy
    }

    pub fn freq_counts(&self) -> &BTreeMap<RecommenderKind, u64> {
        &self.freq_counts
    }

    pub fn last_best(&self) -> Option<RecommenderKind> {
        self.last_best
    }

    pub fn window(&self) -> &VecDeque<RecommenderKind> {
        &self.window
    }

    /// Number of completed pull requests recorded.
    pub fn completed(&self) -> u64 {
        self.completed
    }

    /// Kind the table currently points at; `None` before any pull request completed.
    pub fn favourite(&self) -> Option<RecommenderKind> {
        if self.completed == 0 {
            return None;
        }
        Some(match self.policy {
            BrstPolicy::Freq => argmax_in_order(|k| self.freq_counts.get(&k).copied().unwrap_or(0) as f64),
            BrstPolicy::Rec => self.last_best.expect("set once a pull request completed"),
            BrstPolicy::Hybrid => argmax_in_order(|k| self.window.iter().filter(|w| **w == k).count() as f64),
        })
    }

    /// Delegate for the next pull request; a random base kind while the table is empty.
    pub fn choose<R: Rng>(&self, rng: &mut R) -> RecommenderKind {
        self.favourite()
            .unwrap_or_else(|| BASE_KINDS[rng.gen_range(0..BASE_KINDS.len())])
    }

    /// Records the best performer of a just-completed pull request.
    pub fn record(&mut self, best: RecommenderKind) {
        self.completed += 1;
        match self.policy {
            BrstPolicy::Freq => *self.freq_counts.entry(best).or_insert(0) += 1,
            BrstPolicy::Rec => self.last_best = Some(best),
            BrstPolicy::Hybrid => {
                if self.window.len() == HYBRID_WINDOW {
                    self.window.pop_front();
                }
                self.window.push_back(best);
            }
        }
    }
}

/// Base-recommender output and ground truth of one test pull request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrOutcome {
    pub pr_id: u64,
    pub truth: BTreeSet<String>,
    /// Ranking of every base kind; a failed recommender holds an empty ranking.
    pub runs: BTreeMap<RecommenderKind, Recommendation>,
    /// The knowledge-unit recommender could not score this pull request.
    pub kurec_no_ku: bool,
}

impl PrOutcome {
    pub fn run(&self, kind: RecommenderKind) -> Recommendation {
        self.runs
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| Recommendation::empty(self.pr_id, kind))
    }
}

/// Running per-kind sums of the per-pull-request accuracy and AP means.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scoreboard {
    completed: usize,
    sums: BTreeMap<RecommenderKind, (f64, f64)>,
}

impl Scoreboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn push(&mut self, outcome: &PrOutcome) {
        self.completed += 1;
        for kind in BASE_KINDS {
            let (acc, ap) = per_pr_means(&outcome.run(kind), &outcome.truth);
            let slot = self.sums.entry(kind).or_insert((0.0, 0.0));
            slot.0 += acc;
            slot.1 += ap;
        }
    }

    /// Mean of (mean accuracy over k, mean MAP over k) across completed pull requests.
    pub fn combined(&self, kind: RecommenderKind) -> f64 {
        if self.completed == 0 {
            return 0.0;
        }
        let (acc, ap) = self.sums.get(&kind).copied().unwrap_or((0.0, 0.0));
        let n = self.completed as f64;
        (acc / n + ap / n) / 2.0
    }

    pub fn best(&self) -> Option<RecommenderKind> {
        (self.completed > 0).then(|| argmax_in_order(|k| self.combined(k)))
    }
}

/// Combined score of `kind` recomputed from scratch over `history`.
pub fn combined_score(history: &[PrOutcome], kind: RecommenderKind) -> f64 {
    let recs: Vec<Recommendation> = history.iter().map(|o| o.run(kind)).collect();
    let truth: TruthMap = history.iter().map(|o| (o.pr_id, o.truth.clone())).collect();
    let n = K_VALUES.len() as f64;
    let acc: f64 = K_VALUES
        .iter()
        .map(|&k| top_k_accuracy(&recs, &truth, k).expect("non-empty history"))
        .sum();
    let map: f64 = K_VALUES
        .iter()
        .map(|&k| map_at_k(&recs, &truth, k).expect("non-empty history"))
        .sum();
    (acc / n + map / n) / 2.0
}

/// Best base kind over `history`, recomputed from scratch; `None` for an empty history.
pub fn best_performer(history: &[PrOutcome]) -> Option<RecommenderKind> {
    (!history.is_empty()).then(|| argmax_in_order(|k| combined_score(history, k)))
}

/// One pull request of a replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub pr_id: u64,
    /// Kind chosen from the table before the truth was revealed.
    pub delegate: RecommenderKind,
    /// Kind whose ranking was emitted (differs on the no-unit fallback).
    pub used: RecommenderKind,
    /// Best performer over the prefix ending at this pull request.
    pub best_after: RecommenderKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub policy: BrstPolicy,
    pub seed: u64,
    pub steps: Vec<ReplayStep>,
    /// Emitted rankings, labeled with the combined kind.
    pub recommendations: Vec<Recommendation>,
    /// Largest hybrid window length observed.
    pub max_window: usize,
}

/// Online protocol for one policy.
pub struct Combiner {
    brst: Brst,
    scoreboard: Scoreboard,
    rng: ChaCha8Rng,
}

impl Combiner {
    pub fn new(policy: BrstPolicy, seed: u64) -> Self {
        Combiner {
            brst: Brst::new(policy),
            scoreboard: Scoreboard::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn brst(&self) -> &Brst {
        &self.brst
    }

    pub fn scoreboard(&self) -> &Scoreboard {
        &self.scoreboard
    }

    /// Emits the delegate's ranking for `outcome`, then learns from its truth.
    pub fn step(&mut self, outcome: &PrOutcome) -> (Recommendation, ReplayStep) {
        let delegate = self.brst.choose(&mut self.rng);
        let used = if delegate == RecommenderKind::Kurec && outcome.kurec_no_ku {
            info!("PR {}: no knowledge units, falling back to RF", outcome.pr_id);
            RecommenderKind::Rf
        } else {
            delegate
        };
        let rec = outcome.run(used).relabeled(self.brst.policy().kind());

        self.scoreboard.push(outcome);
        let best_after = self.scoreboard.best().expect("one pull request completed");
        self.brst.record(best_after);
        (
            rec,
            ReplayStep {
                pr_id: outcome.pr_id,
                delegate,
                used,
                best_after,
            },
        )
    }
}

/// Runs `policy` over the test outcomes in order.
pub fn replay(policy: BrstPolicy, outcomes: &[PrOutcome], seed: u64) -> Replay {
    let mut combiner = Combiner::new(policy, seed);
    let mut steps = Vec::with_capacity(outcomes.len());
    let mut recommendations = Vec::with_capacity(outcomes.len());
    let mut max_window = 0;
    for o in outcomes {
        let (rec, step) = combiner.step(o);
        max_window = max_window.max(combiner.brst().window().len());
        steps.push(step);
        recommendations.push(rec);
    }
    Replay {
        policy,
        seed,
        steps,
        recommendations,
        max_window,
    }
}
