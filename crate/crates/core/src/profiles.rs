//! Development and review expertise matrices.
//!
//! Each matrix holds, per developer and knowledge unit, the developer's share
//! of all occurrences of that unit observed before a cutoff.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::{DateTime, Utc};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::history::{FileStatus, KuStore};
use crate::ku::{ku_column_names, KuId, KuVector, KU_COUNT};
use crate::prs::PullRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertiseKind {
    Development,
    Review,
}

/// Developers × knowledge units, column-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertiseMatrix {
    kind: ExpertiseKind,
    /// `None` means no cutoff (the whole history).
    cutoff: Option<DateTime<Utc>>,
    developers: Vec<String>,
    raw: Vec<KuVector>,
    values: Vec<[f64; KU_COUNT]>,
    row_of: HashMap<String, usize>,
}

impl ExpertiseMatrix {
    /// Normalizes raw per-developer occurrence sums column by column.
    pub fn from_raw(kind: ExpertiseKind, cutoff: Option<DateTime<Utc>>, raw: BTreeMap<String, KuVector>) -> Self {
        let mut totals = [0u64; KU_COUNT];
        for v in raw.values() {
            for (t, c) in totals.iter_mut().zip(v.counts()) {
                *t += c;
            }
        }
        let developers: Vec<String> = raw.keys().cloned().collect();
        let raw: Vec<KuVector> = raw.into_values().collect();
        let values = raw
            .iter()
            .map(|v| {
                let mut row = [0.0; KU_COUNT];
                for (j, cell) in row.iter_mut().enumerate() {
                    if totals[j] > 0 {
                        *cell = v.counts()[j] as f64 / totals[j] as f64;
                    }
                }
                row
            })
            .collect();
        let row_of = developers.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
        ExpertiseMatrix {
            kind,
            cutoff,
            developers,
            raw,
            values,
            row_of,
        }
    }

    pub fn kind(&self) -> ExpertiseKind {
        self.kind
    }

    pub fn cutoff(&self) -> Option<DateTime<Utc>> {
        self.cutoff
    }

    /// Developers in ascending identity order.
    pub fn developers(&self) -> &[String] {
        &self.developers
    }

    pub fn is_empty(&self) -> bool {
        self.developers.is_empty()
    }

    pub fn row(&self, developer: &str) -> Option<&[f64; KU_COUNT]> {
        self.row_of.get(developer).map(|&i| &self.values[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64; KU_COUNT])> {
        self.developers.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Ratio for `developer` and `ku`; developers without a row have 0.
    pub fn value(&self, developer: &str, ku: KuId) -> f64 {
        self.row(developer).map_or(0.0, |r| r[ku.position()])
    }

    /// Unnormalized occurrence sums.
    pub fn raw(&self, developer: &str) -> KuVector {
        self.row_of.get(developer).map_or(KuVector::zero(), |&i| self.raw[i])
    }

    pub fn column_sum(&self, ku: KuId) -> f64 {
        self.values.iter().map(|r| r[ku.position()]).sum()
    }

    /// Delimited output with a header row of knowledge-unit names.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["developer".to_owned()];
        header.extend(ku_column_names());
        w.write_record(&header)?;
        for (dev, row) in self.rows() {
            let mut record = vec![dev.to_owned()];
            record.extend(row.iter().map(|v| format!("{v:.12}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Most recent contact of each developer with each knowledge unit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LastTouch(BTreeMap<(String, KuId), DateTime<Utc>>);

impl LastTouch {
    pub fn get(&self, developer: &str, ku: KuId) -> Option<DateTime<Utc>> {
        self.0.get(&(developer.to_owned(), ku)).copied()
    }

    fn touch(&mut self, developer: &str, vector: &KuVector, at: DateTime<Utc>) {
        for ku in vector.present() {
            let slot = self.0.entry((developer.to_owned(), ku)).or_insert(at);
            if at > *slot {
                *slot = at;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, KuId, DateTime<Utc>)> {
        self.0.iter().map(|((d, k), t)| (d.as_str(), *k, *t))
    }
}

/// Development expertise from commits authored strictly before `cutoff`.
pub fn dev_exp_matrix(store: &KuStore, cutoff: Option<DateTime<Utc>>) -> (ExpertiseMatrix, LastTouch) {
    let mut raw: BTreeMap<String, KuVector> = BTreeMap::new();
    let mut last = LastTouch::default();
    for commit in store.commits() {
        if cutoff.is_some_and(|c| commit.authored_at >= c) {
            continue;
        }
        let sum = raw.entry(commit.author.clone()).or_default();
        let mut commit_vector = KuVector::zero();
        for file in store.files_of(&commit.hash) {
            if let (FileStatus::Analyzed, Some(v)) = (file.status, &file.vector) {
                commit_vector += v;
            }
        }
        *sum += commit_vector;
        last.touch(&commit.author, &commit_vector, commit.authored_at);
    }
    (ExpertiseMatrix::from_raw(ExpertiseKind::Development, cutoff, raw), last)
}

/// Profiles over the whole store (no cutoff).
pub fn global_ku_profiles(store: &KuStore) -> ExpertiseMatrix {
    dev_exp_matrix(store, None).0
}

/// Resolves the knowledge-unit vector of a file changed by a pull request.
pub trait FileKuSource {
    fn file_vector(&self, pr: &PullRequest, path: &str) -> Option<KuVector>;
}

impl FileKuSource for KuStore {
    /// The file as of the pull request's head commit when known, else its
    /// latest version committed before the pull request was opened.
    fn file_vector(&self, pr: &PullRequest, path: &str) -> Option<KuVector> {
        let record = match pr.head_commit.as_deref().filter(|h| self.commit(h).is_some()) {
            Some(head) => self.as_of_commit(path, head),
            None => self.latest_before(path, pr.opened_at),
        }?;
        record.vector
    }
}

impl<F: Fn(&PullRequest, &str) -> Option<KuVector>> FileKuSource for F {
    fn file_vector(&self, pr: &PullRequest, path: &str) -> Option<KuVector> {
        self(pr, path)
    }
}

/// Sum of the vectors of a pull request's Java files; unresolvable files are skipped.
pub fn pr_ku_vector(pr: &PullRequest, source: &dyn FileKuSource) -> KuVector {
    let mut total = KuVector::zero();
    for path in pr.java_files() {
        match source.file_vector(pr, path) {
            Some(v) => total += v,
            None => warn!("PR {}: no content for {path}; skipped", pr.id),
        }
    }
    total
}

/// Precomputed per-pull-request vectors keyed by id.
pub type PrVectors = HashMap<u64, KuVector>;

pub fn pr_vectors<'a>(prs: impl IntoIterator<Item = &'a PullRequest>, source: &dyn FileKuSource) -> PrVectors {
    prs.into_iter().map(|p| (p.id, pr_ku_vector(p, source))).collect()
}

/// Review expertise from pull requests opened strictly before `cutoff`.
pub fn rev_exp_matrix(
    prs: &[PullRequest],
    source: &dyn FileKuSource,
    cutoff: Option<DateTime<Utc>>,
) -> (ExpertiseMatrix, LastTouch) {
    let vectors = pr_vectors(prs.iter().filter(|p| cutoff.is_none_or(|c| p.opened_at < c)), source);
    rev_exp_from_vectors(prs, &vectors, cutoff)
}

/// [`rev_exp_matrix`] over precomputed pull-request vectors.
pub fn rev_exp_from_vectors(
    prs: &[PullRequest],
    vectors: &PrVectors,
    cutoff: Option<DateTime<Utc>>,
) -> (ExpertiseMatrix, LastTouch) {
    let mut raw: BTreeMap<String, KuVector> = BTreeMap::new();
    let mut last = LastTouch::default();
    for pr in prs {
        if cutoff.is_some_and(|c| pr.opened_at >= c) {
            continue;
        }
        let v = vectors.get(&pr.id).copied().unwrap_or_default();
        for reviewer in &pr.reviewers {
            *raw.entry(reviewer.clone()).or_default() += v;
            last.touch(reviewer, &v, pr.opened_at);
        }
    }
    (ExpertiseMatrix::from_raw(ExpertiseKind::Review, cutoff, raw), last)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: u8) -> KuId {
        KuId::new(n).unwrap()
    }

    #[test]
    fn ratios_three_to_one() {
        let mut raw = BTreeMap::new();
        let mut a = KuVector::zero();
        a.add_to(k(4), 3);
        let mut b = KuVector::zero();
        b.add_to(k(4), 1);
        raw.insert("a".to_owned(), a);
        raw.insert("b".to_owned(), b);
        let m = ExpertiseMatrix::from_raw(ExpertiseKind::Development, None, raw);
        assert_eq!(m.value("a", k(4)), 0.75);
        assert_eq!(m.value("b", k(4)), 0.25);
        assert_eq!(m.value("nobody", k(4)), 0.0);
        assert_eq!(m.column_sum(k(5)), 0.0);
    }

    #[test]
    fn csv_has_ku_header() {
        let m = ExpertiseMatrix::from_raw(ExpertiseKind::Review, None, BTreeMap::new());
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("developer,K1_Data_Type,"));
    }
}
