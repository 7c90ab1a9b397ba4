//! Runs every recommender over a project's test pull requests and scores them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{replay, BrstPolicy, PrOutcome, Replay};
use crate::evaluation::{EvalError, EvalReport, RecommenderMetrics, TruthMap};
use crate::history::KuStore;
use crate::profiles::{pr_vectors, PrVectors};
use crate::prs::PullRequest;
use crate::recommenders::{
    RecommendError, Recommendation, RecommenderConfig, RecommenderKind, ReviewHistory, BASE_KINDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub recommenders: RecommenderConfig,
    /// Seed of the combined recommenders' first pick.
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("no test pull requests")]
    EmptyTest,
    #[error("test pull request {0} is not part of the project's pull requests")]
    UnknownTestPr(u64),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub report: EvalReport,
    pub outcomes: Vec<PrOutcome>,
    pub replays: Vec<Replay>,
}

impl Experiment {
    /// Rankings of `kind` in test order.
    pub fn recommendations(&self, kind: RecommenderKind) -> Vec<Recommendation> {
        match BrstPolicy::from_kind(kind) {
            Some(policy) => self
                .replays
                .iter()
                .find(|r| r.policy == policy)
                .map(|r| r.recommendations.clone())
                .unwrap_or_default(),
            None => self.outcomes.iter().map(|o| o.run(kind)).collect(),
        }
    }
}

/// Runs the five base recommenders on one pull request.
pub fn base_outcome(history: &ReviewHistory<'_>, pr: &PullRequest) -> Result<PrOutcome, RecommendError> {
    let mut runs = BTreeMap::new();
    let mut kurec_no_ku = false;
    for kind in BASE_KINDS {
        let rec = match history.recommend(kind, pr) {
            Ok(rec) => rec,
            Err(RecommendError::NoKu { .. }) => {
                kurec_no_ku = true;
                Recommendation::empty(pr.id, kind)
            }
            Err(e) => return Err(e),
        };
        runs.insert(kind, rec);
    }
    Ok(PrOutcome {
        pr_id: pr.id,
        truth: pr.reviewers.clone(),
        runs,
        kurec_no_ku,
    })
}

/// Evaluates all eight recommenders on `test`.
///
/// `prs` is every eligible pull request of the project in chronological order;
/// each test pull request only sees the part of it opened earlier.
pub fn run_experiment(
    project: &str,
    store: &KuStore,
    prs: &[PullRequest],
    test: &[PullRequest],
    options: &ExperimentOptions,
) -> Result<Experiment, ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::EmptyTest);
    }
    if let Some(t) = test.iter().find(|t| !prs.iter().any(|p| p.id == t.id)) {
        return Err(ExperimentError::UnknownTestPr(t.id));
    }
    let vectors: PrVectors = pr_vectors(prs, store);
    let history = ReviewHistory {
        store,
        prs,
        pr_vectors: &vectors,
        config: options.recommenders,
    };
    let outcomes: Vec<PrOutcome> = test
        .par_iter()
        .map(|pr| base_outcome(&history, pr))
        .collect::<Result<_, _>>()?;

    let replays: Vec<Replay> = BrstPolicy::ALL
        .iter()
        .map(|&p| replay(p, &outcomes, options.seed))
        .collect();

    let truth: TruthMap = outcomes.iter().map(|o| (o.pr_id, o.truth.clone())).collect();
    let mut metrics = Vec::new();
    for kind in BASE_KINDS {
        let recs: Vec<Recommendation> = outcomes.iter().map(|o| o.run(kind)).collect();
        metrics.push(RecommenderMetrics::compute(
            kind,
            &recs,
            &truth,
            test,
            store.commits(),
            prs,
        )?);
    }
    for r in &replays {
        metrics.push(RecommenderMetrics::compute(
            r.policy.kind(),
            &r.recommendations,
            &truth,
            test,
            store.commits(),
            prs,
        )?);
    }
    Ok(Experiment {
        report: EvalReport {
            project: project.to_owned(),
            pr_count: test.len(),
            recommenders: metrics,
        },
        outcomes,
        replays,
    })
}
