use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Recommendation, RecommenderKind};
use crate::history::CommitRecord;
use crate::prs::PullRequest;

/// What the review-frequency baseline counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfMode {
    /// Prior pull requests the developer reviewed.
    #[default]
    ReviewedPrs,
    /// Review comments the developer wrote on prior pull requests.
    Comments,
}

/// Commit frequency: number of commits authored before the pull request opened.
pub fn recommend_cf(pr: &PullRequest, commits: &[CommitRecord]) -> Recommendation {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for c in commits.iter().filter(|c| c.authored_at < pr.opened_at) {
        *counts.entry(&c.author).or_default() += 1;
    }
    Recommendation::rank(
        pr,
        RecommenderKind::Cf,
        counts.into_iter().map(|(d, n)| (d.to_owned(), n as f64)),
    )
}

/// Review frequency over pull requests opened before `pr`.
pub fn recommend_rf(pr: &PullRequest, prior_prs: &[PullRequest], mode: RfMode) -> Recommendation {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for p in prior_prs.iter().filter(|p| p.opened_at < pr.opened_at) {
        match mode {
            RfMode::ReviewedPrs => {
                for r in &p.reviewers {
                    *counts.entry(r).or_default() += 1;
                }
            }
            RfMode::Comments => {
                for c in p.review_comments.iter().filter(|c| c.commented_at < pr.opened_at) {
                    *counts.entry(&c.reviewer).or_default() += 1;
                }
            }
        }
    }
    Recommendation::rank(
        pr,
        RecommenderKind::Rf,
        counts.into_iter().map(|(d, n)| (d.to_owned(), n as f64)),
    )
}

/// Expertise recommendation: developers by their latest change to any file of the pull request.
pub fn recommend_er(pr: &PullRequest, commits: &[CommitRecord]) -> Recommendation {
    let files: BTreeSet<&str> = pr.changed_files.iter().map(String::as_str).collect();
    let mut latest: BTreeMap<&str, DateTime<Utc>> = BTreeMap::new();
    for c in commits.iter().filter(|c| c.authored_at < pr.opened_at) {
        if c.changed_java_files.iter().any(|f| files.contains(f.as_str())) {
            let slot = latest.entry(&c.author).or_insert(c.authored_at);
            if c.authored_at > *slot {
                *slot = c.authored_at;
            }
        }
    }
    Recommendation::rank(
        pr,
        RecommenderKind::Er,
        latest.into_iter().map(|(d, t)| (d.to_owned(), t.timestamp() as f64)),
    )
}
