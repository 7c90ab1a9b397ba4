//! Pull-request exports: loading, validation, filtering and chronological split.
//!
//! An export is a JSON-lines file with one object per pull request:
//!
//! ```json
//! {"id": 7, "opened_at": "2023-04-01T10:00:00Z", "state": "closed",
//!  "changed_files": ["src/A.java"], "reviewers": ["bob <bob@x.org>"],
//!  "author": "alice <alice@x.org>",
//!  "review_comments": [{"reviewer": "bob <bob@x.org>", "path": "src/A.java",
//!                       "commented_at": "2023-04-02T09:00:00Z"}],
//!  "head_commit": "9fceb02..."}
//! ```
//!
//! `head_commit` is optional. Identities are trimmed and lower-cased on load so
//! they line up with commit authors.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Minimum number of kept pull requests for a project to be studied.
pub const MIN_ELIGIBLE_PRS: usize = 100;

/// Smallest dataset [`chronological_split`] accepts.
pub const MIN_SPLIT_SIZE: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum PrError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: field `{field}`: {message}")]
    Schema {
        record: usize,
        field: String,
        message: String,
    },
    #[error("record {record}: duplicate pull request id {id}")]
    DuplicateId { record: usize, id: u64 },
    #[error("cannot split {n} pull requests: at least {min} are required")]
    TooSmall { n: usize, min: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewComment {
    pub reviewer: String,
    /// `None` for discussion comments not attached to a file.
    pub path: Option<String>,
    pub commented_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub id: u64,
    pub opened_at: DateTime<Utc>,
    pub state: PrState,
    pub changed_files: Vec<String>,
    pub reviewers: BTreeSet<String>,
    pub author: String,
    pub review_comments: Vec<ReviewComment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_commit: Option<String>,
}

impl PullRequest {
    pub fn java_files(&self) -> impl Iterator<Item = &str> {
        self.changed_files
            .iter()
            .map(String::as_str)
            .filter(|p| p.ends_with(".java"))
    }

    pub fn has_java_files(&self) -> bool {
        self.java_files().next().is_some()
    }
}

/// Pull requests of one project sorted by `(opened_at, id)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrDataset {
    pub project: String,
    prs: Vec<PullRequest>,
}

impl PrDataset {
    /// Sorts `prs` and rejects duplicate ids.
    pub fn new(project: impl Into<String>, mut prs: Vec<PullRequest>) -> Result<Self, PrError> {
        let mut seen = HashSet::new();
        for (i, pr) in prs.iter().enumerate() {
            if !seen.insert(pr.id) {
                return Err(PrError::DuplicateId {
                    record: i + 1,
                    id: pr.id,
                });
            }
        }
        prs.sort_by(|a, b| a.opened_at.cmp(&b.opened_at).then(a.id.cmp(&b.id)));
        Ok(PrDataset {
            project: project.into(),
            prs,
        })
    }

    pub fn prs(&self) -> &[PullRequest] {
        &self.prs
    }

    pub fn len(&self) -> usize {
        self.prs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prs.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&PullRequest> {
        self.prs.iter().find(|p| p.id == id)
    }

    /// Writes the dataset in export format.
    pub fn save(&self, path: &Path) -> Result<(), PrError> {
        let io = |source| PrError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
        for pr in &self.prs {
            serde_json::to_writer(&mut w, pr).expect("pull request serializes");
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn normalize_person(s: &str) -> String {
    s.trim().to_lowercase()
}

fn field<T: DeserializeOwned>(obj: &serde_json::Map<String, Value>, name: &str, record: usize) -> Result<T, PrError> {
    let schema = |message: String| PrError::Schema {
        record,
        field: name.to_owned(),
        message,
    };
    let value = obj.get(name).ok_or_else(|| schema("missing".into()))?;
    T::deserialize(value).map_err(|e| schema(e.to_string()))
}

fn parse_record(line: &str, record: usize) -> Result<PullRequest, PrError> {
    let value: Value = serde_json::from_str(line).map_err(|e| PrError::Schema {
        record,
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(PrError::Schema {
            record,
            field: "<record>".into(),
            message: "expected a JSON object".into(),
        });
    };
    let opened_at: DateTime<Utc> = field(&obj, "opened_at", record)?;
    let comments: Vec<ReviewComment> = field(&obj, "review_comments", record)?;
    if let Some(early) = comments.iter().find(|c| c.commented_at < opened_at) {
        return Err(PrError::Schema {
            record,
            field: "review_comments".into(),
            message: format!("comment at {} precedes opened_at {opened_at}", early.commented_at),
        });
    }
    let head_commit = match obj.get("head_commit") {
        None | Some(Value::Null) => None,
        Some(_) => Some(field::<String>(&obj, "head_commit", record)?),
    };
    let reviewers: Vec<String> = field(&obj, "reviewers", record)?;
    Ok(PullRequest {
        id: field(&obj, "id", record)?,
        opened_at,
        state: field(&obj, "state", record)?,
        changed_files: field(&obj, "changed_files", record)?,
        reviewers: reviewers.iter().map(|r| normalize_person(r)).collect(),
        author: normalize_person(&field::<String>(&obj, "author", record)?),
        review_comments: comments
            .into_iter()
            .map(|c| ReviewComment {
                reviewer: normalize_person(&c.reviewer),
                ..c
            })
            .collect(),
        head_commit,
    })
}

/// Parses an export held in memory. Records are numbered from 1, skipping blank lines.
pub fn parse_prs(project: &str, text: &str) -> Result<PrDataset, PrError> {
    let mut prs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let pr = parse_record(line, i + 1)?;
        if !seen.insert(pr.id) {
            return Err(PrError::DuplicateId {
                record: i + 1,
                id: pr.id,
            });
        }
        prs.push(pr);
    }
    PrDataset::new(project, prs)
}

/// Loads and validates an export. The project name is the file stem.
pub fn load_prs(path: &Path) -> Result<PrDataset, PrError> {
    let text = fs::read_to_string(path).map_err(|source| PrError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let project = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_prs(&project, &text)
}

/// Result of [`filter_prs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredPrs {
    pub dataset: PrDataset,
    /// Whether enough pull requests remain for the project to be studied.
    pub eligible: bool,
}

/// Keeps closed pull requests that change Java files and have a reviewer.
pub fn filter_prs(ds: &PrDataset) -> FilteredPrs {
    let prs: Vec<PullRequest> = ds
        .prs
        .iter()
        .filter(|p| p.state == PrState::Closed && !p.reviewers.is_empty() && p.has_java_files())
        .cloned()
        .collect();
    let eligible = prs.len() >= MIN_ELIGIBLE_PRS;
    FilteredPrs {
        dataset: PrDataset {
            project: ds.project.clone(),
            prs,
        },
        eligible,
    }
}

/// Number of training pull requests: `floor(fraction · n)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    // The epsilon keeps exact products such as 0.8 · 10 from flooring to 7.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Splits into the first `floor(fraction · n)` pull requests and the rest.
pub fn chronological_split(ds: &PrDataset, fraction: f64) -> Result<(PrDataset, PrDataset), PrError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PrError::BadFraction(fraction));
    }
    let n = ds.len();
    if n < MIN_SPLIT_SIZE {
        return Err(PrError::TooSmall { n, min: MIN_SPLIT_SIZE });
    }
    let cut = train_size(n, fraction);
    let (train, test) = ds.prs.split_at(cut);
    Ok((
        PrDataset {
            project: ds.project.clone(),
            prs: train.to_vec(),
        },
        PrDataset {
            project: ds.project.clone(),
            prs: test.to_vec(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: u64, opened: &str) -> String {
        format!(
            r#"{{"id":{id},"opened_at":"{opened}","state":"closed","changed_files":["A.java"],"reviewers":["Bob"],"author":"Alice","review_comments":[]}}"#
        )
    }

    #[test]
    fn loads_and_sorts() {
        let text = format!(
            "{}\n{}\n",
            line(2, "2023-02-01T00:00:00Z"),
            line(1, "2023-01-01T00:00:00Z")
        );
        let ds = parse_prs("p", &text).unwrap();
        let ids: Vec<u64> = ds.prs().iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(ds.prs()[0].author, "alice");
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"id":1,"state":"closed","changed_files":[],"reviewers":[],"author":"a","review_comments":[]}"#;
        match parse_prs("p", text).unwrap_err() {
            PrError::Schema { record, field, .. } => {
                assert_eq!(record, 1);
                assert_eq!(field, "opened_at");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!(
            "{}\n{}\n",
            line(1, "2023-02-01T00:00:00Z"),
            line(1, "2023-01-01T00:00:00Z")
        );
        assert!(matches!(
            parse_prs("p", &text),
            Err(PrError::DuplicateId { record: 2, id: 1 })
        ));
    }

    #[test]
    fn comment_before_open_rejected() {
        let text = r#"{"id":1,"opened_at":"2023-01-02T00:00:00Z","state":"closed","changed_files":["A.java"],"reviewers":["b"],"author":"a","review_comments":[{"reviewer":"b","path":null,"commented_at":"2023-01-01T00:00:00Z"}]}"#;
        assert!(matches!(parse_prs("p", text), Err(PrError::Schema { ref field, .. }) if field == "review_comments"));
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_size(10, 0.8), 8);
        assert_eq!(train_size(101, 0.8), 80);
        assert_eq!(train_size(5, 0.8), 4);
    }
}
