//! Ranking metrics, the reasonableness check and per-project reports.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::history::CommitRecord;
use crate::prs::PullRequest;
use crate::recommenders::{Recommendation, RecommenderKind};

/// Cutoffs reported for every metric.
pub const K_VALUES: [usize; 5] = [1, 2, 3, 4, 5];

/// Look-back window of the reasonableness check, in days.
pub const REASONABLE_WINDOW_DAYS: i64 = 183;

/// Minimum share of a pull request's files the top candidate must have touched.
pub const REASONABLE_SHARE: f64 = 0.5;

/// True reviewers of each pull request.
pub type TruthMap = HashMap<u64, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no recommendations to evaluate")]
    NoRecommendations,
    #[error("no ground truth for pull request {0}")]
    MissingTruth(u64),
}

/// Whether any of the first `k` candidates is a true reviewer.
pub fn is_correct(ranked: &Recommendation, truth: &BTreeSet<String>, k: usize) -> bool {
    ranked.top(k).any(|d| truth.contains(d))
}

/// Share of pull requests with a true reviewer among the top `k`; an empty ranking is a miss.
pub fn top_k_accuracy(recs: &[Recommendation], truth: &TruthMap, k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if recs.is_empty() {
        return Err(EvalError::NoRecommendations);
    }
    let mut hits = 0usize;
    for rec in recs {
        let t = truth.get(&rec.pr_id).ok_or(EvalError::MissingTruth(rec.pr_id))?;
        hits += usize::from(is_correct(rec, t, k));
    }
    Ok(hits as f64 / recs.len() as f64)
}

/// Average precision of the first `k` positions; 0 when none is relevant.
///
/// Position `i` contributes `hits_so_far / i` when relevant, and the sum is
/// divided by the number of relevant positions. Positions past the end of a
/// short ranking are not relevant.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>, k: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().take(k).enumerate() {
        if truth.contains(d.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

fn recommendation_ap(rec: &Recommendation, truth: &BTreeSet<String>, k: usize) -> f64 {
    let names: Vec<&str> = rec.top(k).collect();
    average_precision(&names, truth, k)
}

/// Mean of AP@k over the pull requests.
pub fn map_at_k(recs: &[Recommendation], truth: &TruthMap, k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if recs.is_empty() {
        return Err(EvalError::NoRecommendations);
    }
    let mut sum = 0.0;
    for rec in recs {
        let t = truth.get(&rec.pr_id).ok_or(EvalError::MissingTruth(rec.pr_id))?;
        sum += recommendation_ap(rec, t, k);
    }
    Ok(sum / recs.len() as f64)
}

/// Per-pull-request means over k = 1..5 of the hit indicator and of AP@k.
pub fn per_pr_means(rec: &Recommendation, truth: &BTreeSet<String>) -> (f64, f64) {
    let n = K_VALUES.len() as f64;
    let acc: f64 = K_VALUES
        .iter()
        .map(|&k| f64::from(u8::from(is_correct(rec, truth, k))))
        .sum();
    let ap: f64 = K_VALUES.iter().map(|&k| recommendation_ap(rec, truth, k)).sum();
    (acc / n, ap / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reasonableness {
    Reasonable,
    Unreasonable,
    /// The top candidate is a true reviewer, so the check does not apply.
    NotApplicable,
}

/// Java files the developer committed or submitted for review within the look-back window.
pub fn recent_files<'a>(
    developer: &str,
    before: DateTime<Utc>,
    commits: &'a [CommitRecord],
    prs: &'a [PullRequest],
) -> BTreeSet<&'a str> {
    let start = before - Duration::days(REASONABLE_WINDOW_DAYS);
    let in_window = |t: DateTime<Utc>| t >= start && t < before;
    let mut files: BTreeSet<&str> = BTreeSet::new();
    for c in commits
        .iter()
        .filter(|c| c.author == developer && in_window(c.authored_at))
    {
        files.extend(c.changed_java_files.iter().map(String::as_str));
    }
    for p in prs.iter().filter(|p| p.author == developer && in_window(p.opened_at)) {
        files.extend(p.java_files());
    }
    files
}

/// Whether a mismatched top candidate had recently worked on at least half of the pull request's Java files.
pub fn reasonableness(pr: &PullRequest, top1: &str, commits: &[CommitRecord], prs: &[PullRequest]) -> Reasonableness {
    if pr.reviewers.contains(top1) {
        return Reasonableness::NotApplicable;
    }
    let changed: BTreeSet<&str> = pr.java_files().collect();
    if changed.is_empty() {
        return Reasonableness::Unreasonable;
    }
    let recent = recent_files(top1, pr.opened_at, commits, prs);
    let overlap = changed.iter().filter(|f| recent.contains(*f)).count();
    if overlap as f64 >= REASONABLE_SHARE * changed.len() as f64 {
        Reasonableness::Reasonable
    } else {
        Reasonableness::Unreasonable
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonablenessTally {
    /// Pull requests whose top candidate exists and is not a true reviewer.
    pub applicable: usize,
    pub reasonable: usize,
}

impl ReasonablenessTally {
    pub fn add(&mut self, r: Reasonableness) {
        match r {
            Reasonableness::Reasonable => {
                self.applicable += 1;
                self.reasonable += 1;
            }
            Reasonableness::Unreasonable => self.applicable += 1,
            Reasonableness::NotApplicable => {}
        }
    }

    /// Percentage of reasonable recommendations, if any applied.
    pub fn percentage(&self) -> Option<f64> {
        (self.applicable > 0).then(|| 100.0 * self.reasonable as f64 / self.applicable as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderMetrics {
    pub kind: RecommenderKind,
    pub top_k: [f64; 5],
    pub map_k: [f64; 5],
    pub reasonableness: ReasonablenessTally,
}

impl RecommenderMetrics {
    /// Scores `recs` (one per test pull request) against the truth.
    pub fn compute(
        kind: RecommenderKind,
        recs: &[Recommendation],
        truth: &TruthMap,
        test: &[PullRequest],
        commits: &[CommitRecord],
        all_prs: &[PullRequest],
    ) -> Result<Self, EvalError> {
        let mut top_k = [0.0; 5];
        let mut map_k = [0.0; 5];
        for (i, &k) in K_VALUES.iter().enumerate() {
            top_k[i] = top_k_accuracy(recs, truth, k)?;
            map_k[i] = map_at_k(recs, truth, k)?;
        }
        let by_id: HashMap<u64, &PullRequest> = test.iter().map(|p| (p.id, p)).collect();
        let mut tally = ReasonablenessTally::default();
        for rec in recs {
            let (Some(pr), Some(top1)) = (by_id.get(&rec.pr_id), rec.developers().next()) else {
                continue;
            };
            tally.add(reasonableness(pr, top1, commits, all_prs));
        }
        Ok(RecommenderMetrics {
            kind,
            top_k,
            map_k,
            reasonableness: tally,
        })
    }

    pub fn min_top_k(&self) -> f64 {
        self.top_k.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_map(&self) -> f64 {
        self.map_k.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub project: String,
    /// Number of test pull requests.
    pub pr_count: usize,
    pub recommenders: Vec<RecommenderMetrics>,
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.6}")
}

impl EvalReport {
    pub fn get(&self, kind: RecommenderKind) -> Option<&RecommenderMetrics> {
        self.recommenders.iter().find(|m| m.kind == kind)
    }

    /// One row per metric and recommender with columns for k = 1..5 and their minimum.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "metric",
            "project",
            "group",
            "recommender",
            "top1",
            "top2",
            "top3",
            "top4",
            "top5",
            "min",
        ])?;
        for (metric, pick) in [("top_k_accuracy", 0), ("map", 1)] {
            for m in &self.recommenders {
                let (values, min) = if pick == 0 {
                    (m.top_k, m.min_top_k())
                } else {
                    (m.map_k, m.min_map())
                };
                let mut row = vec![
                    metric.to_owned(),
                    self.project.clone(),
                    m.kind.group().to_owned(),
                    m.kind.name().to_owned(),
                ];
                row.extend(values.iter().map(|v| fmt_metric(*v)));
                row.push(fmt_metric(min));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reasonable-recommendation percentages per recommender (empty when none applied).
    pub fn write_reasonableness_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "project",
            "recommender",
            "test_prs",
            "applicable",
            "reasonable",
            "percent",
        ])?;
        for m in &self.recommenders {
            w.write_record([
                self.project.clone(),
                m.kind.name().to_owned(),
                self.pr_count.to_string(),
                m.reasonableness.applicable.to_string(),
                m.reasonableness.reasonable.to_string(),
                m.reasonableness
                    .percentage()
                    .map(|p| format!("{p:.2}"))
                    .unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
