use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use super::{Recommendation, RecommenderKind};
use crate::prs::PullRequest;

/// Review history of one reviewer on one file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChrevFileStats {
    /// Comments by the reviewer on the file.
    pub comments: u64,
    /// Comments by anyone on the file.
    pub total_comments: u64,
    /// Days on which the reviewer commented on the file.
    pub workdays: u64,
    /// Days on which anyone commented on the file.
    pub total_workdays: u64,
    /// The reviewer's most recent comment day on the file.
    pub last_day: NaiveDate,
    /// The most recent comment day on the file by anyone.
    pub latest_day: NaiveDate,
}

/// Comment share + workday share + recency term.
pub fn x_factor(s: &ChrevFileStats) -> f64 {
    let share = |part: u64, whole: u64| if whole == 0 { 0.0 } else { part as f64 / whole as f64 };
    let gap = (s.latest_day - s.last_day).num_days().abs();
    let recency = if gap > 0 { 1.0 / gap as f64 } else { 1.0 };
    share(s.comments, s.total_comments) + share(s.workdays, s.total_workdays) + recency
}

/// Statistics keyed by `(reviewer, file)` for the files of `pr`.
///
/// Only file-level comments written before `pr` opened, on pull requests opened
/// before it, are considered.
pub fn chrev_file_stats(pr: &PullRequest, prior_prs: &[PullRequest]) -> BTreeMap<(String, String), ChrevFileStats> {
    let files: BTreeSet<&str> = pr.changed_files.iter().map(String::as_str).collect();
    // file → reviewer → comment days
    let mut days: BTreeMap<&str, BTreeMap<&str, Vec<NaiveDate>>> = BTreeMap::new();
    for p in prior_prs.iter().filter(|p| p.opened_at < pr.opened_at) {
        for c in p.review_comments.iter().filter(|c| c.commented_at < pr.opened_at) {
            let Some(path) = c.path.as_deref() else { continue };
            if let Some(&f) = files.get(path) {
                days.entry(f)
                    .or_default()
                    .entry(&c.reviewer)
                    .or_default()
                    .push(c.commented_at.date_naive());
            }
        }
    }

    let mut out = BTreeMap::new();
    for (file, by_reviewer) in days {
        let total_comments: u64 = by_reviewer.values().map(|d| d.len() as u64).sum();
        let all_days: BTreeSet<NaiveDate> = by_reviewer.values().flatten().copied().collect();
        let latest_day = *all_days.iter().next_back().expect("file has comments");
        for (reviewer, ds) in by_reviewer {
            let own: BTreeSet<NaiveDate> = ds.iter().copied().collect();
            out.insert(
                (reviewer.to_owned(), file.to_owned()),
                ChrevFileStats {
                    comments: ds.len() as u64,
                    total_comments,
                    workdays: own.len() as u64,
                    total_workdays: all_days.len() as u64,
                    last_day: *own.iter().next_back().expect("reviewer has comments"),
                    latest_day,
                },
            );
        }
    }
    out
}

/// Ranks reviewers by Σ over the pull request's files of their xFactor.
///
/// Reviewers without comments on any of the files are not candidates, so a
/// pull request whose files were never reviewed yields an empty ranking.
pub fn recommend_chrev(pr: &PullRequest, prior_prs: &[PullRequest]) -> Recommendation {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for ((reviewer, _), stats) in chrev_file_stats(pr, prior_prs) {
        *scores.entry(reviewer).or_default() += x_factor(&stats);
    }
    Recommendation::rank(pr, RecommenderKind::Chrev, scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn sole_reviewer_same_day() {
        let s = ChrevFileStats {
            comments: 3,
            total_comments: 3,
            workdays: 2,
            total_workdays: 2,
            last_day: day("2024-01-05"),
            latest_day: day("2024-01-05"),
        };
        assert_eq!(x_factor(&s), 3.0);
    }

    #[test]
    fn mixed_case() {
        let s = ChrevFileStats {
            comments: 2,
            total_comments: 4,
            workdays: 1,
            total_workdays: 2,
            last_day: day("2024-01-01"),
            latest_day: day("2024-01-06"),
        };
        assert!((x_factor(&s) - 1.2).abs() < 1e-12);
    }
}
