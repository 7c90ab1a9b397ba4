//! Reviewer recommenders: the knowledge-unit recommender and four baselines.
//!
//! Every recommender sees only data from strictly before the pull request was
//! opened and never proposes the pull request's author.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::history::KuStore;
use crate::profiles::{dev_exp_matrix, rev_exp_from_vectors, PrVectors};
use crate::prs::PullRequest;

mod baselines;
mod chrev;
mod kurec;

pub use baselines::{recommend_cf, recommend_er, recommend_rf, RfMode};
pub use chrev::{chrev_file_stats, recommend_chrev, x_factor, ChrevFileStats};
pub use kurec::{kurec, kurec_scores, recency_bonus, whole_days, KurecScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecommenderKind {
    #[serde(rename = "KUREC")]
    Kurec,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "CHREV")]
    Chrev,
    #[serde(rename = "ER")]
    Er,
    #[serde(rename = "CF")]
    Cf,
    #[serde(rename = "AD_FREQ")]
    AdFreq,
    #[serde(rename = "AD_REC")]
    AdRec,
    #[serde(rename = "AD_HYBRID")]
    AdHybrid,
}

/// Base recommenders in tie-breaking order.
pub const BASE_KINDS: [RecommenderKind; 5] = [
    RecommenderKind::Kurec,
    RecommenderKind::Rf,
    RecommenderKind::Chrev,
    RecommenderKind::Er,
    RecommenderKind::Cf,
];

/// Every recommender, base kinds first.
pub const ALL_KINDS: [RecommenderKind; 8] = [
    RecommenderKind::Kurec,
    RecommenderKind::Rf,
    RecommenderKind::Chrev,
    RecommenderKind::Er,
    RecommenderKind::Cf,
    RecommenderKind::AdFreq,
    RecommenderKind::AdRec,
    RecommenderKind::AdHybrid,
];

impl RecommenderKind {
    pub fn name(self) -> &'static str {
        match self {
            RecommenderKind::Kurec => "KUREC",
            RecommenderKind::Rf => "RF",
            RecommenderKind::Chrev => "CHREV",
            RecommenderKind::Er => "ER",
            RecommenderKind::Cf => "CF",
            RecommenderKind::AdFreq => "AD_FREQ",
            RecommenderKind::AdRec => "AD_REC",
            RecommenderKind::AdHybrid => "AD_HYBRID",
        }
    }

    pub fn is_base(self) -> bool {
        BASE_KINDS.contains(&self)
    }

    /// Report grouping: baseline, knowledge-unit based or combined.
    pub fn group(self) -> &'static str {
        match self {
            RecommenderKind::Kurec => "ku_based",
            RecommenderKind::Rf | RecommenderKind::Chrev | RecommenderKind::Er | RecommenderKind::Cf => "baseline",
            _ => "combined",
        }
    }

    /// Position in the fixed tie-breaking order.
    pub fn tie_rank(self) -> usize {
        ALL_KINDS.iter().position(|k| *k == self).expect("listed")
    }
}

impl fmt::Display for RecommenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for RecommenderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_KINDS
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown recommender {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDeveloper {
    pub developer: String,
    pub score: f64,
}

/// Candidates ordered by descending score, ties by ascending identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub pr_id: u64,
    pub kind: RecommenderKind,
    pub ranked: Vec<RankedDeveloper>,
}

impl Recommendation {
    /// Ranks `scores`, dropping the pull request's author.
    pub fn rank(pr: &PullRequest, kind: RecommenderKind, scores: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut ranked: Vec<RankedDeveloper> = scores
            .into_iter()
            .filter(|(d, _)| *d != pr.author)
            .map(|(developer, score)| RankedDeveloper { developer, score })
            .collect();
        ranked.sort_by(compare_ranked);
        ranked.dedup_by(|a, b| a.developer == b.developer);
        Recommendation {
            pr_id: pr.id,
            kind,
            ranked,
        }
    }

    pub fn empty(pr_id: u64, kind: RecommenderKind) -> Self {
        Recommendation {
            pr_id,
            kind,
            ranked: Vec::new(),
        }
    }

    pub fn developers(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|r| r.developer.as_str())
    }

    pub fn top(&self, k: usize) -> impl Iterator<Item = &str> {
        self.developers().take(k)
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// Relabels as produced by `kind` (used by combined recommenders).
    pub fn relabeled(mut self, kind: RecommenderKind) -> Self {
        self.kind = kind;
        self
    }
}

fn compare_ranked(a: &RankedDeveloper, b: &RankedDeveloper) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.developer.cmp(&b.developer))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecommendError {
    #[error("pull request {pr_id} has no knowledge units in its changed Java files")]
    NoKu { pr_id: u64 },
    #[error("last contact {last} is not before the pull request opening {opened}")]
    RecencyOrder { last: DateTime<Utc>, opened: DateTime<Utc> },
    #[error("{0} is a combined recommender; use the combiner")]
    NotBase(RecommenderKind),
}

/// Switches that select between readings of the baseline definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecommenderConfig {
    #[serde(default)]
    pub rf_mode: RfMode,
}

/// Everything the base recommenders may consult.
pub struct ReviewHistory<'a> {
    pub store: &'a KuStore,
    /// All pull requests of the project in chronological order.
    pub prs: &'a [PullRequest],
    /// Knowledge-unit vector of every pull request in `prs`.
    pub pr_vectors: &'a PrVectors,
    pub config: RecommenderConfig,
}

impl ReviewHistory<'_> {
    /// Pull requests opened strictly before `pr`.
    pub fn prior_prs(&self, pr: &PullRequest) -> &[PullRequest] {
        let end = self.prs.partition_point(|p| p.opened_at < pr.opened_at);
        &self.prs[..end]
    }

    pub fn recommend(&self, kind: RecommenderKind, pr: &PullRequest) -> Result<Recommendation, RecommendError> {
        let cutoff = pr.opened_at;
        match kind {
            RecommenderKind::Kurec => {
                let (dev, dev_last) = dev_exp_matrix(self.store, Some(cutoff));
                let (rev, rev_last) = rev_exp_from_vectors(self.prior_prs(pr), self.pr_vectors, Some(cutoff));
                let pr_kus = self.pr_vectors.get(&pr.id).copied().unwrap_or_default();
                kurec(pr, (&dev, &dev_last), (&rev, &rev_last), &pr_kus)
            }
            RecommenderKind::Cf => Ok(recommend_cf(pr, self.store.commits())),
            RecommenderKind::Rf => Ok(recommend_rf(pr, self.prior_prs(pr), self.config.rf_mode)),
            RecommenderKind::Er => Ok(recommend_er(pr, self.store.commits())),
            RecommenderKind::Chrev => Ok(recommend_chrev(pr, self.prior_prs(pr))),
            other => Err(RecommendError::NotBase(other)),
        }
    }
}
