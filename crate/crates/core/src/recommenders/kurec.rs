use std::collections::BTreeSet;

use chrono::{DateTime, Utc};

use super::{RecommendError, Recommendation, RecommenderKind};
use crate::ku::{KuId, KuVector};
use crate::profiles::{ExpertiseMatrix, LastTouch};
use crate::prs::PullRequest;

/// Whole days elapsed from `earlier` to `later` (floored).
pub fn whole_days(earlier: DateTime<Utc>, later: DateTime<Utc>) -> i64 {
    (later - earlier).num_seconds().div_euclid(86_400)
}

/// `1 / max(1, days)` between the last contact and the pull request opening; 0 when absent.
pub fn recency_bonus(last: Option<DateTime<Utc>>, pr_open: DateTime<Utc>) -> Result<f64, RecommendError> {
    match last {
        None => Ok(0.0),
        Some(last) if last >= pr_open => Err(RecommendError::RecencyOrder { last, opened: pr_open }),
        Some(last) => Ok(1.0 / whole_days(last, pr_open).max(1) as f64),
    }
}

/// Score components of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct KurecScore {
    pub developer: String,
    /// Σ over present units of development ratio plus development recency.
    pub dev_score: f64,
    /// Σ over present units of review ratio plus review recency.
    pub rev_score: f64,
}

impl KurecScore {
    pub fn total(&self) -> f64 {
        self.dev_score + self.rev_score
    }
}

/// Per-candidate scores over the units present in the pull request.
///
/// Candidates are every developer with a row in either matrix, except the author.
pub fn kurec_scores(
    pr: &PullRequest,
    dev: (&ExpertiseMatrix, &LastTouch),
    rev: (&ExpertiseMatrix, &LastTouch),
    pr_kus: &KuVector,
) -> Result<Vec<KurecScore>, RecommendError> {
    let present: Vec<KuId> = pr_kus.present().collect();
    if present.is_empty() {
        return Err(RecommendError::NoKu { pr_id: pr.id });
    }
    let candidates: BTreeSet<&str> = dev
        .0
        .developers()
        .iter()
        .chain(rev.0.developers())
        .map(String::as_str)
        .filter(|d| *d != pr.author)
        .collect();

    let mut out = Vec::with_capacity(candidates.len());
    for d in candidates {
        let mut dev_score = 0.0;
        let mut rev_score = 0.0;
        for &ku in &present {
            dev_score += dev.0.value(d, ku) + recency_bonus(dev.1.get(d, ku), pr.opened_at)?;
            rev_score += rev.0.value(d, ku) + recency_bonus(rev.1.get(d, ku), pr.opened_at)?;
        }
        out.push(KurecScore {
            developer: d.to_owned(),
            dev_score,
            rev_score,
        });
    }
    Ok(out)
}

/// Ranks candidates by development plus review expertise in the pull request's units.
pub fn kurec(
    pr: &PullRequest,
    dev: (&ExpertiseMatrix, &LastTouch),
    rev: (&ExpertiseMatrix, &LastTouch),
    pr_kus: &KuVector,
) -> Result<Recommendation, RecommendError> {
    let scores = kurec_scores(pr, dev, rev, pr_kus)?;
    Ok(Recommendation::rank(
        pr,
        RecommenderKind::Kurec,
        scores.into_iter().map(|s| {
            let total = s.total();
            (s.developer, total)
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> DateTime<Utc> {
        s.parse().unwrap()
    }

    #[test]
    fn recency_cases() {
        let open = t("2024-03-11T12:00:00Z");
        assert_eq!(recency_bonus(None, open).unwrap(), 0.0);
        assert_eq!(recency_bonus(Some(t("2024-03-01T12:00:00Z")), open).unwrap(), 0.1);
        assert_eq!(recency_bonus(Some(t("2024-03-11T08:00:00Z")), open).unwrap(), 1.0);
        assert!(recency_bonus(Some(open), open).is_err());
    }
}
