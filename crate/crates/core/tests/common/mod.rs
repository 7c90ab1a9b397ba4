//! Helpers shared by the integration tests: synthetic projects and
//! straight-line reimplementations of the recommenders.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use kurev::catalog::CapabilityCatalog;
use kurev::history::{build_ku_store, DetectionCache, KuStore, MineOptions};
use kurev::ku::{KuId, KuVector};
use kurev::prs::{PrDataset, PullRequest};
use kurev::recommenders::{Recommendation, RecommenderKind};
use kurev::synthetic::{generate, SynthSpec};
use tempfile::TempDir;

pub fn ts(s: &str) -> DateTime<Utc> {
    s.parse().expect("RFC 3339 timestamp")
}

pub struct Project {
    pub dir: TempDir,
    pub store: KuStore,
    pub prs: PrDataset,
}

/// Materializes `spec` into a temporary directory and mines it.
pub fn mined_project(spec: &SynthSpec) -> Project {
    let dir = tempfile::tempdir().unwrap();
    let project = generate(spec);
    let written = project.materialize(dir.path()).unwrap();
    let store = build_ku_store(
        &written.repo,
        &CapabilityCatalog::builtin(),
        &mut DetectionCache::in_memory(),
        &MineOptions::default(),
    )
    .unwrap();
    Project {
        dir,
        store,
        prs: project.prs,
    }
}

/// Vector of a changed file: the latest analysed change strictly before the pull request opened.
pub fn oracle_file_vector(store: &KuStore, pr: &PullRequest, path: &str) -> Option<KuVector> {
    let mut found: Option<Option<KuVector>> = None;
    for commit in store.commits() {
        if commit.authored_at >= pr.opened_at {
            continue;
        }
        for f in store.files() {
            if f.commit == commit.hash && f.path == path {
                found = Some(f.vector);
            }
        }
    }
    found.flatten()
}

pub fn oracle_pr_vector(store: &KuStore, pr: &PullRequest) -> KuVector {
    let mut total = KuVector::zero();
    for path in pr.changed_files.iter().filter(|p| p.ends_with(".java")) {
        if let Some(v) = oracle_file_vector(store, pr, path) {
            for ku in KuId::all() {
                total.add_to(ku, v.get(ku));
            }
        }
    }
    total
}

fn commit_vector(store: &KuStore, hash: &str) -> KuVector {
    let mut v = KuVector::zero();
    for f in store.files() {
        if f.commit == hash {
            if let Some(fv) = f.vector {
                for ku in KuId::all() {
                    v.add_to(ku, fv.get(ku));
                }
            }
        }
    }
    v
}

fn bonus(last: Option<DateTime<Utc>>, open: DateTime<Utc>) -> f64 {
    match last {
        None => 0.0,
        Some(t) => {
            let days = (open - t).num_seconds().div_euclid(86_400);
            1.0 / (days.max(1) as f64)
        }
    }
}

/// Per candidate: (development score, review score).
pub fn oracle_kurec_parts(
    store: &KuStore,
    prs: &[PullRequest],
    pr: &PullRequest,
) -> Option<BTreeMap<String, (f64, f64)>> {
    let cutoff = pr.opened_at;
    let pr_vec = oracle_pr_vector(store, pr);
    let present: Vec<KuId> = KuId::all().filter(|k| pr_vec.get(*k) > 0).collect();
    if present.is_empty() {
        return None;
    }
    let prior_commits: Vec<_> = store.commits().iter().filter(|c| c.authored_at < cutoff).collect();
    let prior_prs: Vec<&PullRequest> = prs.iter().filter(|p| p.opened_at < cutoff).collect();
    let mut candidates: BTreeSet<String> = prior_commits.iter().map(|c| c.author.clone()).collect();
    for p in &prior_prs {
        candidates.extend(p.reviewers.iter().cloned());
    }
    candidates.remove(&pr.author);

    let mut out = BTreeMap::new();
    for d in candidates {
        let mut dev = 0.0;
        let mut rev = 0.0;
        for &ku in &present {
            let mut mine = 0u64;
            let mut all = 0u64;
            let mut last = None;
            for c in &prior_commits {
                let n = commit_vector(store, &c.hash).get(ku);
                all += n;
                if c.author == d {
                    mine += n;
                    if n > 0 && last.is_none_or(|t| c.authored_at > t) {
                        last = Some(c.authored_at);
                    }
                }
            }
            if all > 0 {
                dev += mine as f64 / all as f64;
            }
            dev += bonus(last, cutoff);

            let mut mine = 0u64;
            let mut all = 0u64;
            let mut last = None;
            for p in &prior_prs {
                let n = oracle_pr_vector(store, p).get(ku);
                all += n * p.reviewers.len() as u64;
                if p.reviewers.contains(&d) {
                    mine += n;
                    if n > 0 && last.is_none_or(|t| p.opened_at > t) {
                        last = Some(p.opened_at);
                    }
                }
            }
            if all > 0 {
                rev += mine as f64 / all as f64;
            }
            rev += bonus(last, cutoff);
        }
        out.insert(d, (dev, rev));
    }
    Some(out)
}

pub fn oracle_cf(store: &KuStore, pr: &PullRequest) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for c in store.commits() {
        if c.authored_at < pr.opened_at && c.author != pr.author {
            *out.entry(c.author.clone()).or_insert(0.0) += 1.0;
        }
    }
    out
}

pub fn oracle_rf(prs: &[PullRequest], pr: &PullRequest) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for p in prs {
        if p.opened_at < pr.opened_at {
            for r in &p.reviewers {
                if *r != pr.author {
                    *out.entry(r.clone()).or_insert(0.0) += 1.0;
                }
            }
        }
    }
    out
}

pub fn oracle_er(store: &KuStore, pr: &PullRequest) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for c in store.commits() {
        if c.authored_at >= pr.opened_at || c.author == pr.author {
            continue;
        }
        if c.changed_java_files.iter().any(|f| pr.changed_files.contains(f)) {
            let t = c.authored_at.timestamp() as f64;
            let e = out.entry(c.author.clone()).or_insert(t);
            if t > *e {
                *e = t;
            }
        }
    }
    out
}

pub fn oracle_chrev(prs: &[PullRequest], pr: &PullRequest) -> BTreeMap<String, f64> {
    // (reviewer, file, day) for every usable prior comment
    let mut comments: Vec<(String, String, NaiveDate)> = Vec::new();
    for p in prs {
        if p.opened_at >= pr.opened_at {
            continue;
        }
        for c in &p.review_comments {
            if c.commented_at >= pr.opened_at {
                continue;
            }
            if let Some(path) = &c.path {
                if pr.changed_files.contains(path) {
                    comments.push((c.reviewer.clone(), path.clone(), c.commented_at.date_naive()));
                }
            }
        }
    }
    let reviewers: BTreeSet<String> = comments.iter().map(|c| c.0.clone()).collect();
    let mut out = BTreeMap::new();
    for r in reviewers {
        if r == pr.author {
            continue;
        }
        let mut score = 0.0;
        for f in &pr.changed_files {
            let on_file: Vec<&(String, String, NaiveDate)> = comments.iter().filter(|c| &c.1 == f).collect();
            let mine: Vec<&&(String, String, NaiveDate)> = on_file.iter().filter(|c| c.0 == r).collect();
            if mine.is_empty() {
                continue;
            }
            let c = mine.len() as f64;
            let c_all = on_file.len() as f64;
            let w: BTreeSet<NaiveDate> = mine.iter().map(|c| c.2).collect();
            let w_all: BTreeSet<NaiveDate> = on_file.iter().map(|c| c.2).collect();
            let t = *w.iter().max().unwrap();
            let t_all = *w_all.iter().max().unwrap();
            let gap = (t_all - t).num_days().abs();
            score += c / c_all + w.len() as f64 / w_all.len() as f64 + if gap > 0 { 1.0 / gap as f64 } else { 1.0 };
        }
        out.insert(r, score);
    }
    out
}

/// Oracle ranking for a base kind; `None` when the recommender reports a missing-unit error.
pub fn oracle_ranking(
    kind: RecommenderKind,
    store: &KuStore,
    prs: &[PullRequest],
    pr: &PullRequest,
) -> Option<Vec<(String, f64)>> {
    let scores: BTreeMap<String, f64> = match kind {
        RecommenderKind::Kurec => oracle_kurec_parts(store, prs, pr)?
            .into_iter()
            .map(|(d, (a, b))| (d, a + b))
            .collect(),
        RecommenderKind::Cf => oracle_cf(store, pr),
        RecommenderKind::Rf => oracle_rf(prs, pr),
        RecommenderKind::Er => oracle_er(store, pr),
        RecommenderKind::Chrev => oracle_chrev(prs, pr),
        other => panic!("{other} is not a base recommender"),
    };
    let mut ranked: Vec<(String, f64)> = scores.into_iter().collect();
    // Bubble sort: descending score, then ascending identity.
    for i in 0..ranked.len() {
        for j in 0..ranked.len().saturating_sub(1 + i) {
            let (a, b) = (&ranked[j], &ranked[j + 1]);
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                ranked.swap(j, j + 1);
            }
        }
    }
    Some(ranked)
}

/// Same developers and scores position by position; adjacent swaps are tolerated
/// only between scores equal to within 1e-9.
pub fn rankings_agree(actual: &Recommendation, expected: &[(String, f64)]) -> Result<(), String> {
    if actual.ranked.len() != expected.len() {
        return Err(format!("length {} vs {}", actual.ranked.len(), expected.len()));
    }
    for (i, (a, (ed, es))) in actual.ranked.iter().zip(expected).enumerate() {
        if (a.score - es).abs() > 1e-9 {
            return Err(format!("position {i}: score {} vs {es}", a.score));
        }
        if &a.developer != ed {
            let tied = expected
                .iter()
                .any(|(d, s)| *d == a.developer && (s - a.score).abs() <= 1e-9);
            if !tied {
                return Err(format!("position {i}: {} vs {ed}", a.developer));
            }
        }
    }
    Ok(())
}
