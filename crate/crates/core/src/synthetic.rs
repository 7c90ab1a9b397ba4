//! Seeded generator of small Java projects with commit and review history.
//!
//! Developers specialise in a few code idioms, so the knowledge units they
//! write are distinguishable. Reviewers of a pull request are drawn mostly from
//! the developers who touched its files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use git2::{IndexAddOption, Repository, Signature, Time};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::history::normalize_identity;
use crate::prs::{PrDataset, PrState, PullRequest, ReviewComment};

/// Method-level Java snippets; `{n}` is replaced by a per-class counter.
const SNIPPETS: &[&str] = &[
    "int sum{n}(int a, int b) { int c = a + b; return c * 2; }",
    "int loop{n}(int[] xs) { int t = 0; for (int x : xs) { if (x > 0) { t += x; } } return t; }",
    "String join{n}(String a) { StringBuilder sb = new StringBuilder(a); sb.append(\"x\"); return sb.toString().trim(); }",
    "void risky{n}() { try { Integer.parseInt(\"1\"); } catch (NumberFormatException e) { throw new IllegalStateException(e); } }",
    "java.util.List<String> names{n}() { java.util.List<String> l = new java.util.ArrayList<>(); l.add(\"a\"); return l; }",
    "long count{n}(java.util.List<String> xs) { return xs.stream().filter(s -> s.isEmpty()).count(); }",
    "void spawn{n}() { Thread t = new Thread(() -> {}); t.start(); synchronized (this) { notifyAll(); } }",
    "void write{n}() throws java.io.IOException { try (java.io.Writer w = new java.io.FileWriter(\"f\")) { w.write(\"x\"); } }",
    "java.time.LocalDate day{n}() { return java.time.LocalDate.now().plusDays(1); }",
    "static class Helper{n} { private final int v; Helper{n}(int v) { this.v = v; } }",
    "public String describe{n}() { return super.toString() + this.hashCode(); }",
    "void query{n}(java.sql.Connection c) throws java.sql.SQLException { try (java.sql.Statement s = c.createStatement()) { s.executeQuery(\"select 1\"); } }",
    "Object make{n}() throws Exception { return Class.forName(\"X\").getDeclaredConstructor().newInstance(); }",
    "enum Mode{n} { ON, OFF }",
    "int[][] grid{n}() { int[][] g = new int[3][3]; g[0][0] = 1; return g; }",
    "String fmt{n}(double d) { return java.text.NumberFormat.getInstance(java.util.Locale.US).format(d); }",
];

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub project: String,
    pub developers: usize,
    pub commits: usize,
    pub prs: usize,
    pub files: usize,
    /// Share of pull requests that fail the eligibility filter.
    pub noise: f64,
    pub seed: u64,
    pub start: DateTime<Utc>,
}

impl SynthSpec {
    /// 5 developers, 30 commits, 12 pull requests.
    pub fn small(seed: u64) -> Self {
        SynthSpec {
            project: "small".into(),
            developers: 5,
            commits: 30,
            prs: 12,
            files: 8,
            noise: 0.0,
            seed,
            start: Utc.with_ymd_and_hms(2023, 1, 2, 9, 0, 0).unwrap(),
        }
    }

    /// Project large enough to pass the eligibility filter.
    pub fn mini(seed: u64) -> Self {
        SynthSpec {
            project: "mini".into(),
            developers: 8,
            commits: 240,
            prs: 130,
            files: 30,
            noise: 0.1,
            seed,
            start: Utc.with_ymd_and_hms(2022, 3, 1, 9, 0, 0).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Developer {
    pub name: String,
    pub email: String,
    /// Snippet indices this developer favours.
    pub specialty: Vec<usize>,
}

impl Developer {
    /// Identity as the miner normalizes it.
    pub fn identity(&self) -> String {
        normalize_identity(&self.name, &self.email)
    }
}

/// One commit: full new contents of every changed file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCommit {
    pub developer: usize,
    pub at: DateTime<Utc>,
    pub message: String,
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProject {
    pub spec: SynthSpec,
    pub developers: Vec<Developer>,
    pub commits: Vec<SynthCommit>,
    pub prs: PrDataset,
}

/// Paths written by [`SyntheticProject::materialize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializedProject {
    pub root: PathBuf,
    pub repo: PathBuf,
    pub prs: PathBuf,
    pub config: PathBuf,
}

fn file_path(i: usize) -> String {
    format!("src/main/java/org/example/m{}/Unit{}.java", i % 4, i)
}

fn render(file: usize, members: &[(usize, usize)]) -> String {
    let mut out = format!("package org.example.m{};\n\npublic class Unit{} {{\n", file % 4, file);
    for &(snippet, n) in members {
        out.push_str("    ");
        out.push_str(&SNIPPETS[snippet].replace("{n}", &n.to_string()));
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn pick_snippet(rng: &mut ChaCha8Rng, dev: &Developer) -> usize {
    if rng.gen_bool(0.8) {
        *dev.specialty.choose(rng).expect("non-empty specialty")
    } else {
        rng.gen_range(0..SNIPPETS.len())
    }
}

/// Builds a project deterministically from `spec`.
pub fn generate(spec: &SynthSpec) -> SyntheticProject {
    assert!(spec.developers >= 2 && spec.files >= 1 && spec.commits >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let developers: Vec<Developer> = (0..spec.developers)
        .map(|d| Developer {
            name: format!("Dev{d}"),
            email: format!("dev{d}@example.org"),
            specialty: (0..3).map(|j| (d * 3 + j) % SNIPPETS.len()).collect(),
        })
        .collect();

    // Each file has an owner who writes most of its commits.
    let owners: Vec<usize> = (0..spec.files).map(|f| f % spec.developers).collect();
    let mut members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); spec.files];
    let mut counters = vec![0usize; spec.files];
    let commit_gap = Duration::hours(9);
    let mut commits = Vec::with_capacity(spec.commits);
    let mut touch_log: Vec<(DateTime<Utc>, usize, usize)> = Vec::new();

    for c in 0..spec.commits {
        let at = spec.start + commit_gap * c as i32 + Duration::minutes(rng.gen_range(0..120));
        let primary = if c < spec.files {
            c
        } else {
            rng.gen_range(0..spec.files)
        };
        let developer = if rng.gen_bool(0.7) {
            owners[primary]
        } else {
            rng.gen_range(0..spec.developers)
        };
        let mut changed = vec![primary];
        if rng.gen_bool(0.3) {
            let extra = rng.gen_range(0..spec.files.min(c + 1));
            if !changed.contains(&extra) {
                changed.push(extra);
            }
        }
        let mut files = BTreeMap::new();
        for f in changed {
            if members[f].len() > 4 && rng.gen_bool(0.4) {
                let drop = rng.gen_range(0..members[f].len());
                members[f].remove(drop);
            }
            for _ in 0..rng.gen_range(1..=2) {
                counters[f] += 1;
                let s = pick_snippet(&mut rng, &developers[developer]);
                members[f].push((s, counters[f]));
            }
            files.insert(file_path(f), render(f, &members[f]));
            touch_log.push((at, f, developer));
        }
        if rng.gen_bool(0.05) {
            files.insert("README.md".into(), format!("notes {c}\n"));
        }
        commits.push(SynthCommit {
            developer,
            at,
            message: format!("change {c}"),
            files,
        });
    }

    let end = commits.last().expect("at least one commit").at;
    let first_open = spec.start + commit_gap * (spec.commits as i32 / 8).max(1);
    let span = (end - first_open).num_minutes().max(spec.prs as i64 + 1);
    let mut prs = Vec::with_capacity(spec.prs);
    for i in 0..spec.prs {
        let offset = span * (i as i64 + 1) / (spec.prs as i64 + 1);
        let opened_at = first_open + Duration::minutes(offset + rng.gen_range(0..30));
        let known: Vec<usize> = (0..spec.files)
            .filter(|&f| touch_log.iter().any(|(t, tf, _)| *tf == f && *t < opened_at))
            .collect();
        let pool = if known.is_empty() { vec![0] } else { known };
        let mut files: BTreeSet<usize> = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=3) {
            files.insert(*pool.choose(&mut rng).expect("non-empty"));
        }
        // Weight candidate reviewers by prior touches of the changed files.
        let mut weight = vec![1usize; spec.developers];
        for (t, f, d) in &touch_log {
            if *t < opened_at && files.contains(f) {
                weight[*d] += 3;
            }
        }
        let author = rng.gen_range(0..spec.developers);
        let mut reviewers = BTreeSet::new();
        let wanted = rng.gen_range(1..=2).min(spec.developers - 1);
        while reviewers.len() < wanted {
            let total: usize = (0..spec.developers).filter(|&d| d != author).map(|d| weight[d]).sum();
            let mut r = rng.gen_range(0..total);
            for d in (0..spec.developers).filter(|&d| d != author) {
                if r < weight[d] {
                    reviewers.insert(d);
                    break;
                }
                r -= weight[d];
            }
        }
        let mut changed_files: Vec<String> = files.iter().map(|&f| file_path(f)).collect();
        let mut state = PrState::Closed;
        if rng.gen_bool(spec.noise.clamp(0.0, 1.0)) {
            match rng.gen_range(0..3) {
                0 => changed_files = vec!["docs/guide.md".into()],
                1 => reviewers.clear(),
                _ => state = PrState::Open,
            }
        }
        let mut review_comments = Vec::new();
        for &r in &reviewers {
            for _ in 0..rng.gen_range(1..=3) {
                let path = if rng.gen_bool(0.85) {
                    Some(changed_files.choose(&mut rng).expect("non-empty").clone())
                } else {
                    None
                };
                review_comments.push(ReviewComment {
                    reviewer: developers[r].identity(),
                    path,
                    commented_at: opened_at + Duration::minutes(rng.gen_range(5..3 * 24 * 60)),
                });
            }
        }
        review_comments.sort_by(|a, b| a.commented_at.cmp(&b.commented_at).then(a.reviewer.cmp(&b.reviewer)));
        prs.push(PullRequest {
            id: 1000 + i as u64,
            opened_at,
            state,
            changed_files,
            reviewers: reviewers.iter().map(|&r| developers[r].identity()).collect(),
            author: developers[author].identity(),
            review_comments,
            head_commit: None,
        });
    }
    let prs = PrDataset::new(spec.project.clone(), prs).expect("generated ids are unique");
    SyntheticProject {
        spec: spec.clone(),
        developers,
        commits,
        prs,
    }
}

impl SyntheticProject {
    /// Writes `repo/` (a git repository), `prs.jsonl` and `kurev.toml` under `root`.
    pub fn materialize(&self, root: &Path) -> Result<MaterializedProject, MaterializeError> {
        let repo_dir = root.join("repo");
        fs::create_dir_all(&repo_dir)?;
        let repo = Repository::init(&repo_dir)?;
        repo.set_head("refs/heads/main")?;
        let mut parent: Option<git2::Oid> = None;
        for c in &self.commits {
            for (path, content) in &c.files {
                let full = repo_dir.join(path);
                if let Some(dir) = full.parent() {
                    fs::create_dir_all(dir)?;
                }
                fs::write(&full, content)?;
            }
            let mut index = repo.index()?;
            index.add_all(["*"], IndexAddOption::DEFAULT, None)?;
            index.write()?;
            let tree = repo.find_tree(index.write_tree()?)?;
            let dev = &self.developers[c.developer];
            let sig = Signature::new(&dev.name, &dev.email, &Time::new(c.at.timestamp(), 0))?;
            let parents: Vec<git2::Commit> = parent.map(|p| repo.find_commit(p)).transpose()?.into_iter().collect();
            let parent_refs: Vec<&git2::Commit> = parents.iter().collect();
            parent = Some(repo.commit(Some("HEAD"), &sig, &sig, &c.message, &tree, &parent_refs)?);
        }

        let prs_path = root.join("prs.jsonl");
        self.prs
            .save(&prs_path)
            .map_err(|e| MaterializeError::Other(e.to_string()))?;
        let config_path = root.join("kurev.toml");
        fs::write(
            &config_path,
            format!(
                "project = \"{}\"\nrepo = \"repo\"\nprs = \"prs.jsonl\"\ncache_dir = \".kurev-cache\"\noutput_dir = \"out\"\nseed = {}\n\n[recommenders]\nrf_mode = \"reviewed_prs\"\n\n[cluster]\nk_max = 100\n",
                self.spec.project, self.spec.seed
            ),
        )?;
        Ok(MaterializedProject {
            root: root.to_path_buf(),
            repo: repo_dir,
            prs: prs_path,
            config: config_path,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MaterializeError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Git(#[from] git2::Error),
    #[error("{0}")]
    Other(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_consistent() {
        let a = generate(&SynthSpec::small(3));
        let b = generate(&SynthSpec::small(3));
        assert_eq!(a, b);
        assert_eq!(a.commits.len(), 30);
        assert_eq!(a.prs.len(), 12);
        for pr in a.prs.prs() {
            assert!(!pr.reviewers.contains(&pr.author));
            assert!(!pr.reviewers.is_empty());
        }
    }

    #[test]
    fn snippets_parse() {
        let members: Vec<(usize, usize)> = (0..SNIPPETS.len()).map(|i| (i, i)).collect();
        let tree = crate::detector::parse_java(render(1, &members)).unwrap();
        assert!(!tree.has_errors());
    }
}
