//! Commit mining and the per-(commit, file) knowledge-unit store.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use git2::{DiffOptions, ErrorCode, Oid, Repository, Sort};
use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::CapabilityCatalog;
use crate::detector::{detect_kus, ParseError};
use crate::ku::KuVector;

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("{path} is not a git repository")]
    NotARepository { path: String },
    #[error("git error: {0}")]
    Git(#[from] git2::Error),
    #[error("commit {0} not found")]
    UnknownCommit(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid store {path}: {message}")]
    InvalidStore { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HistoryError + '_ {
    move |source| HistoryError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `name <email>`, trimmed and lower-cased.
pub fn normalize_identity(name: &str, email: &str) -> String {
    format!("{} <{}>", name.trim(), email.trim()).to_lowercase()
}

/// One commit with its changed Java files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub hash: String,
    pub author: String,
    pub authored_at: DateTime<Utc>,
    pub changed_java_files: Vec<String>,
}

/// Outcome of analysing one changed file at one commit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileStatus {
    Analyzed,
    Deleted,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileKuRecord {
    pub commit: String,
    pub path: String,
    pub status: FileStatus,
    /// `None` for deleted and unparseable files.
    pub vector: Option<KuVector>,
}

/// Options for [`mine_commits`] and [`build_ku_store`].
#[derive(Debug, Clone, Default)]
pub struct MineOptions {
    /// Walk every reachable commit instead of the first-parent chain.
    pub all_commits: bool,
    /// Normalized identity → canonical identity.
    pub aliases: BTreeMap<String, String>,
}

impl MineOptions {
    fn identity(&self, name: &str, email: &str) -> String {
        let id = normalize_identity(name, email);
        self.aliases.get(&id).cloned().unwrap_or(id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MinedHistory {
    pub commits: Vec<CommitRecord>,
    /// Commits that could not be read.
    pub skipped: usize,
}

fn open_repo(repo_path: &Path) -> Result<Repository, HistoryError> {
    Repository::open(repo_path).map_err(|e| match e.code() {
        ErrorCode::NotFound => HistoryError::NotARepository {
            path: repo_path.display().to_string(),
        },
        _ => HistoryError::Git(e),
    })
}

fn is_java(path: &str) -> bool {
    path.ends_with(".java")
}

/// Id of the commit HEAD points at; `None` for a repository without commits.
pub fn head_commit_id(repo_path: &Path) -> Result<Option<String>, HistoryError> {
    let repo = open_repo(repo_path)?;
    let id = match repo.head() {
        Ok(h) => Some(h.peel_to_commit()?.id().to_string()),
        Err(e) if matches!(e.code(), ErrorCode::UnbornBranch | ErrorCode::NotFound) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(id)
}

/// Walks HEAD's history oldest-first.
pub fn mine_commits(repo_path: &Path, options: &MineOptions) -> Result<MinedHistory, HistoryError> {
    let repo = open_repo(repo_path)?;
    mine_open_repo(&repo, options)
}

fn mine_open_repo(repo: &Repository, options: &MineOptions) -> Result<MinedHistory, HistoryError> {
    let head = match repo.head() {
        Ok(h) => h,
        Err(e) if matches!(e.code(), ErrorCode::UnbornBranch | ErrorCode::NotFound) => {
            return Ok(MinedHistory::default())
        }
        Err(e) => return Err(e.into()),
    };
    let head_oid = head.peel_to_commit()?.id();

    let mut walk = repo.revwalk()?;
    walk.set_sorting(Sort::TOPOLOGICAL | Sort::REVERSE)?;
    if !options.all_commits {
        walk.simplify_first_parent()?;
    }
    walk.push(head_oid)?;

    let mut out = MinedHistory::default();
    for oid in walk {
        let oid = match oid {
            Ok(o) => o,
            Err(e) => {
                warn!("revwalk error: {e}");
                out.skipped += 1;
                continue;
            }
        };
        match commit_record(repo, oid, options) {
            Ok(rec) => out.commits.push(rec),
            Err(e) => {
                warn!("skipping commit {oid}: {e}");
                out.skipped += 1;
            }
        }
    }
    info!("mined {} commits ({} skipped)", out.commits.len(), out.skipped);
    Ok(out)
}

fn commit_record(repo: &Repository, oid: Oid, options: &MineOptions) -> Result<CommitRecord, git2::Error> {
    let commit = repo.find_commit(oid)?;
    let tree = commit.tree()?;
    let parent_tree = match commit.parent_count() {
        0 => None,
        _ => Some(commit.parent(0)?.tree()?),
    };
    let mut opts = DiffOptions::new();
    opts.ignore_submodules(true);
    let diff = repo.diff_tree_to_tree(parent_tree.as_ref(), Some(&tree), Some(&mut opts))?;
    let mut files: Vec<String> = diff
        .deltas()
        .filter_map(|d| {
            d.new_file()
                .path()
                .or_else(|| d.old_file().path())
                .map(|p| p.to_string_lossy().replace('\\', "/"))
        })
        .filter(|p| is_java(p))
        .collect();
    files.sort();
    files.dedup();

    let author = commit.author();
    let when = author.when();
    let authored_at = Utc
        .timestamp_opt(when.seconds(), 0)
        .single()
        .ok_or_else(|| git2::Error::from_str("commit timestamp out of range"))?;
    Ok(CommitRecord {
        hash: oid.to_string(),
        author: options.identity(author.name().unwrap_or(""), author.email().unwrap_or("")),
        authored_at,
        changed_java_files: files,
    })
}

/// Content of a file at a commit, analysed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Snapshot {
    Vector(KuVector),
    Unparseable(ParseError),
    /// The path does not exist at that commit (deleted).
    Absent,
}

fn blob_at(repo: &Repository, commit: &str, path: &str) -> Result<Option<Oid>, HistoryError> {
    let oid = Oid::from_str(commit).map_err(|_| HistoryError::UnknownCommit(commit.to_owned()))?;
    let commit = repo
        .find_commit(oid)
        .map_err(|_| HistoryError::UnknownCommit(commit.to_owned()))?;
    let tree = commit.tree()?;
    match tree.get_path(Path::new(path)) {
        Ok(entry) if entry.kind() == Some(git2::ObjectType::Blob) => Ok(Some(entry.id())),
        Ok(_) => Ok(None),
        Err(e) if e.code() == ErrorCode::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Detects the knowledge units of `path` as it exists at `commit`.
pub fn snapshot_file_kus(
    repo_path: &Path,
    commit: &str,
    path: &str,
    catalog: &CapabilityCatalog,
) -> Result<Snapshot, HistoryError> {
    let repo = open_repo(repo_path)?;
    let Some(blob) = blob_at(&repo, commit, path)? else {
        return Ok(Snapshot::Absent);
    };
    let blob = repo.find_blob(blob)?;
    Ok(match detect_kus(blob.content(), catalog) {
        Ok(v) => Snapshot::Vector(v),
        Err(e) => Snapshot::Unparseable(e),
    })
}

/// Commits and file records, indexed by commit, author and path.
#[derive(Debug, Clone, PartialEq)]
pub struct KuStore {
    catalog_hash: String,
    commits: Vec<CommitRecord>,
    files: Vec<FileKuRecord>,
    commit_index: HashMap<String, usize>,
    files_by_commit: HashMap<String, Vec<usize>>,
    commits_by_author: BTreeMap<String, Vec<usize>>,
    /// path → file record indices ordered by (authored_at, commit position).
    history_by_path: HashMap<String, Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreIndex {
    format: u32,
    catalog_hash: String,
    commits: usize,
    files: usize,
    authors: Vec<String>,
}

const STORE_FORMAT: u32 = 1;

impl KuStore {
    /// Builds a store from records, checking that each file record belongs to a change.
    pub fn from_parts(
        catalog_hash: impl Into<String>,
        commits: Vec<CommitRecord>,
        mut files: Vec<FileKuRecord>,
    ) -> Result<Self, HistoryError> {
        let invalid = |message: String| HistoryError::InvalidStore {
            path: "<memory>".into(),
            message,
        };
        let mut commit_index = HashMap::new();
        for (i, c) in commits.iter().enumerate() {
            if commit_index.insert(c.hash.clone(), i).is_some() {
                return Err(invalid(format!("duplicate commit {}", c.hash)));
            }
        }
        if let Some(f) = files.iter().find(|f| !commit_index.contains_key(&f.commit)) {
            return Err(invalid(format!("file record for unknown commit {}", f.commit)));
        }
        files.sort_by(|a, b| {
            commit_index[&a.commit]
                .cmp(&commit_index[&b.commit])
                .then_with(|| a.path.cmp(&b.path))
        });
        for f in &files {
            let ci = commit_index[&f.commit];
            if !commits[ci].changed_java_files.contains(&f.path) {
                return Err(invalid(format!("{} is not a change of commit {}", f.path, f.commit)));
            }
        }
        for pair in files.windows(2) {
            if pair[0].commit == pair[1].commit && pair[0].path == pair[1].path {
                return Err(invalid(format!("duplicate record {}:{}", pair[0].commit, pair[0].path)));
            }
        }

        let mut files_by_commit: HashMap<String, Vec<usize>> = HashMap::new();
        let mut history_by_path: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, f) in files.iter().enumerate() {
            files_by_commit.entry(f.commit.clone()).or_default().push(i);
            history_by_path.entry(f.path.clone()).or_default().push(i);
        }
        for indices in history_by_path.values_mut() {
            indices.sort_by_key(|&i| {
                let ci = commit_index[&files[i].commit];
                (commits[ci].authored_at, ci)
            });
        }
        let mut commits_by_author: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in commits.iter().enumerate() {
            commits_by_author.entry(c.author.clone()).or_default().push(i);
        }
        Ok(KuStore {
            catalog_hash: catalog_hash.into(),
            commits,
            files,
            commit_index,
            files_by_commit,
            commits_by_author,
            history_by_path,
        })
    }

    pub fn catalog_hash(&self) -> &str {
        &self.catalog_hash
    }

    pub fn commits(&self) -> &[CommitRecord] {
        &self.commits
    }

    pub fn files(&self) -> &[FileKuRecord] {
        &self.files
    }

    pub fn commit(&self, hash: &str) -> Option<&CommitRecord> {
        self.commit_index.get(hash).map(|&i| &self.commits[i])
    }

    pub fn files_of(&self, commit: &str) -> impl Iterator<Item = &FileKuRecord> {
        self.files_by_commit
            .get(commit)
            .into_iter()
            .flatten()
            .map(|&i| &self.files[i])
    }

    pub fn authors(&self) -> impl Iterator<Item = &str> {
        self.commits_by_author.keys().map(String::as_str)
    }

    pub fn commits_by(&self, author: &str) -> impl Iterator<Item = &CommitRecord> {
        self.commits_by_author
            .get(author)
            .into_iter()
            .flatten()
            .map(|&i| &self.commits[i])
    }

    pub fn record(&self, commit: &str, path: &str) -> Option<&FileKuRecord> {
        self.files_of(commit).find(|f| f.path == path)
    }

    /// Latest record of `path` whose commit satisfies `before` on its authored time.
    fn latest_matching(&self, path: &str, before: impl Fn(DateTime<Utc>) -> bool) -> Option<&FileKuRecord> {
        let indices = self.history_by_path.get(path)?;
        indices
            .iter()
            .rev()
            .map(|&i| &self.files[i])
            .find(|f| before(self.commits[self.commit_index[&f.commit]].authored_at))
    }

    /// Latest record of `path` from a commit authored strictly before `cutoff`.
    pub fn latest_before(&self, path: &str, cutoff: DateTime<Utc>) -> Option<&FileKuRecord> {
        self.latest_matching(path, |t| t < cutoff)
    }

    /// Record describing `path` as of `commit`: its own change, else the latest earlier change.
    pub fn as_of_commit(&self, path: &str, commit: &str) -> Option<&FileKuRecord> {
        if let Some(r) = self.record(commit, path) {
            return Some(r);
        }
        let at = self.commit(commit)?.authored_at;
        self.latest_matching(path, |t| t <= at)
    }

    /// Writes `commits.jsonl`, `files.jsonl` and `index.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), HistoryError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_jsonl(&dir.join("commits.jsonl"), &self.commits)?;
        write_jsonl(&dir.join("files.jsonl"), &self.files)?;
        let index = StoreIndex {
            format: STORE_FORMAT,
            catalog_hash: self.catalog_hash.clone(),
            commits: self.commits.len(),
            files: self.files.len(),
            authors: self.commits_by_author.keys().cloned().collect(),
        };
        let path = dir.join("index.json");
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    pub fn load(dir: &Path) -> Result<Self, HistoryError> {
        let index_path = dir.join("index.json");
        let text = fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
        let invalid = |message: String| HistoryError::InvalidStore {
            path: dir.display().to_string(),
            message,
        };
        let index: StoreIndex = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if index.format != STORE_FORMAT {
            return Err(invalid(format!("unsupported store format {}", index.format)));
        }
        let commits: Vec<CommitRecord> = read_jsonl(&dir.join("commits.jsonl"))?;
        let files: Vec<FileKuRecord> = read_jsonl(&dir.join("files.jsonl"))?;
        if commits.len() != index.commits || files.len() != index.files {
            return Err(invalid("record counts disagree with index.json".into()));
        }
        Self::from_parts(index.catalog_hash, commits, files).map_err(|e| match e {
            HistoryError::InvalidStore { message, .. } => invalid(message),
            other => other,
        })
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HistoryError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("record serializes");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HistoryError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| HistoryError::InvalidStore {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?;
        out.push(item);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CacheEntry {
    catalog: String,
    blob: String,
    vector: Option<KuVector>,
}

/// Detection results keyed by (catalog hash, blob id), persisted as JSON lines.
#[derive(Debug, Default)]
pub struct DetectionCache {
    path: Option<PathBuf>,
    entries: BTreeMap<(String, String), Option<KuVector>>,
    dirty: bool,
}

impl DetectionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens the cache at `path`. A corrupt cache is discarded with a warning.
    pub fn open(path: &Path) -> Self {
        let mut cache = DetectionCache {
            path: Some(path.to_owned()),
            ..Default::default()
        };
        if !path.exists() {
            return cache;
        }
        match read_jsonl::<CacheEntry>(path) {
            Ok(entries) => {
                cache.entries = entries.into_iter().map(|e| ((e.catalog, e.blob), e.vector)).collect();
            }
            Err(e) => {
                warn!("detection cache {} is corrupt ({e}); rebuilding", path.display());
                cache.dirty = true;
            }
        }
        cache
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, catalog: &str, blob: &str) -> Option<&Option<KuVector>> {
        self.entries.get(&(catalog.to_owned(), blob.to_owned()))
    }

    fn insert(&mut self, catalog: &str, blob: String, vector: Option<KuVector>) {
        self.entries.insert((catalog.to_owned(), blob), vector);
        self.dirty = true;
    }

    pub fn flush(&mut self) -> Result<(), HistoryError> {
        let Some(path) = &self.path else { return Ok(()) };
        if !self.dirty {
            return Ok(());
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let entries: Vec<CacheEntry> = self
            .entries
            .iter()
            .map(|((catalog, blob), vector)| CacheEntry {
                catalog: catalog.clone(),
                blob: blob.clone(),
                vector: *vector,
            })
            .collect();
        write_jsonl(path, &entries)?;
        self.dirty = false;
        Ok(())
    }
}

/// Mines `repo_path` and detects knowledge units for every changed Java file.
pub fn build_ku_store(
    repo_path: &Path,
    catalog: &CapabilityCatalog,
    cache: &mut DetectionCache,
    options: &MineOptions,
) -> Result<KuStore, HistoryError> {
    let repo = open_repo(repo_path)?;
    let mined = mine_open_repo(&repo, options)?;
    let catalog_hash = catalog.content_hash();

    // (commit, path, blob) for every change; blob None for deletions.
    let mut changes: Vec<(usize, String, Option<Oid>)> = Vec::new();
    for (ci, c) in mined.commits.iter().enumerate() {
        for path in &c.changed_java_files {
            changes.push((ci, path.clone(), blob_at(&repo, &c.hash, path)?));
        }
    }

    let mut pending: Vec<Oid> = changes
        .iter()
        .filter_map(|(_, _, b)| *b)
        .filter(|b| cache.get(&catalog_hash, &b.to_string()).is_none())
        .collect();
    pending.sort();
    pending.dedup();
    debug!("{} blobs to analyse, {} cached", pending.len(), cache.len());

    let contents: Vec<(Oid, Vec<u8>)> = pending
        .iter()
        .map(|&oid| Ok((oid, repo.find_blob(oid)?.content().to_vec())))
        .collect::<Result<_, git2::Error>>()?;
    let detected: Vec<(Oid, Option<KuVector>)> = contents
        .par_iter()
        .map(|(oid, bytes)| (*oid, detect_kus(bytes, catalog).ok()))
        .collect();
    for (oid, vector) in detected {
        cache.insert(&catalog_hash, oid.to_string(), vector);
    }
    cache.flush()?;

    let files: Vec<FileKuRecord> = changes
        .into_iter()
        .map(|(ci, path, blob)| {
            let commit = mined.commits[ci].hash.clone();
            match blob {
                None => FileKuRecord {
                    commit,
                    path,
                    status: FileStatus::Deleted,
                    vector: None,
                },
                Some(oid) => {
                    let vector = *cache
                        .get(&catalog_hash, &oid.to_string())
                        .expect("every blob analysed above");
                    if vector.is_none() {
                        warn!("unparseable file {path} at {commit}; no KU credit");
                    }
                    FileKuRecord {
                        commit,
                        path,
                        status: if vector.is_some() {
                            FileStatus::Analyzed
                        } else {
                            FileStatus::Unparseable
                        },
                        vector,
                    }
                }
            }
        })
        .collect();
    KuStore::from_parts(catalog_hash, mined.commits, files)
}
