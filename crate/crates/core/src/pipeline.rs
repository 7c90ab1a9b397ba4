//! Project configuration and the cached end-to-end pipeline.
//!
//! Stages run in order (store, prs, profiles, report, cluster). Each writes
//! into its own directory under the output directory and records a stamp with
//! the hash of its inputs and of what it wrote. A stage whose inputs and
//! outputs still match its stamp is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{CapabilityCatalog, CatalogError};
use crate::cluster::{
    analyse_profiles, ClusterError, ClusterOptions, DEFAULT_K_MAX, DEFAULT_SILHOUETTE, DEFAULT_VARIANCE,
};
use crate::experiment::{run_experiment, ExperimentError, ExperimentOptions};
use crate::history::{build_ku_store, head_commit_id, DetectionCache, HistoryError, KuStore, MineOptions};
use crate::profiles::{dev_exp_matrix, global_ku_profiles, pr_vectors, rev_exp_from_vectors};
use crate::prs::{chronological_split, filter_prs, load_prs, parse_prs, PrDataset, PrError};
use crate::recommenders::RecommenderConfig;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration {path}: {message}")]
    Config { path: String, message: String },
    #[error("{what} not found: {path}")]
    MissingPath { what: &'static str, path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Prs(#[from] PrError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("writing {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    project: Option<String>,
    repo: PathBuf,
    prs: PathBuf,
    catalog: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    all_commits: bool,
    train_fraction: Option<f64>,
    #[serde(default)]
    recommenders: RecommenderConfig,
    #[serde(default)]
    cluster: RawCluster,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    k_max: Option<usize>,
    variance: Option<f64>,
    silhouette: Option<f64>,
}

/// Resolved project configuration; relative paths are taken from the config file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    pub project: String,
    pub repo: PathBuf,
    pub prs: PathBuf,
    pub catalog: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub all_commits: bool,
    pub train_fraction: f64,
    pub recommenders: RecommenderConfig,
    pub cluster: ClusterOptions,
    pub aliases: BTreeMap<String, String>,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => PipelineError::MissingPath {
                what: "configuration file",
                path: path.display().to_string(),
            },
            _ => io_err(path)(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|message| PipelineError::Config {
            path: path.display().to_string(),
            message,
        })
    }

    /// Parses `text`, resolving relative paths against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let prs = resolve(raw.prs);
        let project = raw.project.unwrap_or_else(|| {
            prs.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "project".into())
        });
        let train_fraction = raw.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(format!("train_fraction {train_fraction} is outside (0, 1)"));
        }
        Ok(ProjectConfig {
            project,
            repo: resolve(raw.repo),
            prs,
            catalog: raw.catalog.map(resolve),
            cache_dir: resolve(raw.cache_dir.unwrap_or_else(|| ".kurev-cache".into())),
            output_dir: resolve(raw.output_dir.unwrap_or_else(|| "out".into())),
            seed: raw.seed,
            all_commits: raw.all_commits,
            train_fraction,
            recommenders: raw.recommenders,
            cluster: ClusterOptions {
                k_max: raw.cluster.k_max.unwrap_or(DEFAULT_K_MAX),
                variance: raw.cluster.variance.unwrap_or(DEFAULT_VARIANCE),
                silhouette: raw.cluster.silhouette.unwrap_or(DEFAULT_SILHOUETTE),
                seed: raw.seed,
            },
            aliases: raw.aliases,
        })
    }

    /// Checks every input path before any stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let missing = |what, p: &Path| PipelineError::MissingPath {
            what,
            path: p.display().to_string(),
        };
        if !self.repo.is_dir() {
            return Err(missing("repository", &self.repo));
        }
        if !self.prs.is_file() {
            return Err(missing("pull-request export", &self.prs));
        }
        if let Some(c) = &self.catalog {
            if !c.is_file() {
                return Err(missing("catalog", c));
            }
        }
        Ok(())
    }

    pub fn mine_options(&self) -> MineOptions {
        MineOptions {
            all_commits: self.all_commits,
            aliases: self.aliases.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Cached,
}

impl fmt::Display for StageStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageStatus::Ran => "ran",
            StageStatus::Cached => "cached",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Stamp {
    input: String,
    output: String,
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn collect_files(dir: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let rel_path = rel.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            collect_files(&entry.path(), &rel_path, out)?;
        } else {
            out.push(rel_path);
        }
    }
    Ok(())
}

/// Hash of every file under `dir` (relative paths and contents).
pub fn hash_dir(dir: &Path) -> Result<String, PipelineError> {
    let mut files = Vec::new();
    collect_files(dir, Path::new(""), &mut files).map_err(io_err(dir))?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        let full = dir.join(&rel);
        let bytes = fs::read(&full).map_err(io_err(&full))?;
        let name = rel.to_string_lossy().replace('\\', "/");
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

struct StageRunner<'a> {
    root: &'a Path,
    statuses: Vec<(String, StageStatus)>,
}

impl StageRunner<'_> {
    /// Runs `body` into `<root>/<name>` unless the stamp shows it is current; returns the output hash.
    fn run(
        &mut self,
        name: &str,
        input: String,
        body: impl FnOnce(&Path) -> Result<(), PipelineError>,
    ) -> Result<String, PipelineError> {
        let dir = self.root.join(name);
        let stamp_path = self.root.join(".stamps").join(format!("{name}.json"));
        if let Ok(text) = fs::read_to_string(&stamp_path) {
            if let Ok(stamp) = serde_json::from_str::<Stamp>(&text) {
                if stamp.input == input && dir.is_dir() && hash_dir(&dir)? == stamp.output {
                    info!("{name}: cached");
                    self.statuses.push((name.to_owned(), StageStatus::Cached));
                    return Ok(stamp.output);
                }
            }
        }
        if stamp_path.exists() {
            fs::remove_file(&stamp_path).map_err(io_err(&stamp_path))?;
        }
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        info!("{name}: running");
        body(&dir)?;
        let output = hash_dir(&dir)?;
        let stamp = Stamp {
            input,
            output: output.clone(),
        };
        let parent = stamp_path.parent().expect("stamp has a directory");
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        fs::write(
            &stamp_path,
            serde_json::to_string_pretty(&stamp).expect("stamp serializes") + "\n",
        )
        .map_err(io_err(&stamp_path))?;
        self.statuses.push((name.to_owned(), StageStatus::Ran));
        Ok(output)
    }
}

/// Outcome of [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineRun {
    pub stages: Vec<(String, StageStatus)>,
    pub output_dir: PathBuf,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrSummary {
    pub project: String,
    pub total: usize,
    pub kept: usize,
    pub eligible: bool,
    pub train: usize,
    pub test: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    fs::write(
        path,
        serde_json::to_string_pretty(value).expect("value serializes") + "\n",
    )
    .map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, PipelineError> {
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> PipelineError + '_ {
    move |source| PipelineError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn read_dataset(project: &str, path: &Path) -> Result<PrDataset, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_prs(project, &text)?)
}

/// Writes the evaluation artifacts of one experiment into `dir`.
pub fn write_experiment(dir: &Path, experiment: &crate::experiment::Experiment) -> Result<(), PipelineError> {
    let report = &experiment.report;
    let p = dir.join("evaluation.csv");
    report.write_csv(create(&p)?).map_err(csv_err(&p))?;
    let p = dir.join("reasonableness.csv");
    report.write_reasonableness_csv(create(&p)?).map_err(csv_err(&p))?;
    write_json(&dir.join("report.json"), report)?;

    let p = dir.join("replay.csv");
    let mut w = csv::Writer::from_writer(create(&p)?);
    w.write_record(["policy", "pr_id", "delegate", "used", "best_after"])
        .map_err(csv_err(&p))?;
    for r in &experiment.replays {
        for s in &r.steps {
            w.write_record([
                r.policy.kind().name().to_owned(),
                s.pr_id.to_string(),
                s.delegate.name().to_owned(),
                s.used.name().to_owned(),
                s.best_after.name().to_owned(),
            ])
            .map_err(csv_err(&p))?;
        }
    }
    w.flush().map_err(io_err(&p))?;

    let p = dir.join("recommendations.csv");
    let mut w = csv::Writer::from_writer(create(&p)?);
    w.write_record(["recommender", "pr_id", "rank", "developer", "score"])
        .map_err(csv_err(&p))?;
    for kind in crate::recommenders::ALL_KINDS {
        for rec in experiment.recommendations(kind) {
            for (i, r) in rec.ranked.iter().take(crate::evaluation::K_VALUES.len()).enumerate() {
                w.write_record([
                    kind.name().to_owned(),
                    rec.pr_id.to_string(),
                    (i + 1).to_string(),
                    r.developer.clone(),
                    format!("{:.9}", r.score),
                ])
                .map_err(csv_err(&p))?;
            }
        }
    }
    w.flush().map_err(io_err(&p))?;
    Ok(())
}

/// Runs every stage for `config`, skipping stages whose inputs are unchanged.
pub fn run_pipeline(config: &ProjectConfig) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let catalog = CapabilityCatalog::load(config.catalog.as_deref())?;
    let root = config.output_dir.as_path();
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut runner = StageRunner {
        root,
        statuses: Vec::new(),
    };

    let head = head_commit_id(&config.repo)?.unwrap_or_default();
    let options = config.mine_options();
    let aliases = serde_json::to_vec(&options.aliases).expect("aliases serialize");
    let store_input = sha_hex(&[
        b"store/1",
        head.as_bytes(),
        catalog.content_hash().as_bytes(),
        &[u8::from(options.all_commits)],
        &aliases,
    ]);
    let store_hash = runner.run("store", store_input, |dir| {
        fs::create_dir_all(&config.cache_dir).map_err(io_err(&config.cache_dir))?;
        let mut cache = DetectionCache::open(&config.cache_dir.join("detections.jsonl"));
        let store = build_ku_store(&config.repo, &catalog, &mut cache, &options)?;
        store.save(dir)?;
        Ok(())
    })?;

    let prs_bytes = fs::read(&config.prs).map_err(io_err(&config.prs))?;
    let prs_input = sha_hex(&[
        b"prs/1",
        config.project.as_bytes(),
        &prs_bytes,
        &config.train_fraction.to_le_bytes(),
    ]);
    let prs_hash = runner.run("prs", prs_input, |dir| {
        let mut ds = load_prs(&config.prs)?;
        ds.project = config.project.clone();
        let filtered = filter_prs(&ds);
        if !filtered.eligible {
            warn!(
                "{}: only {} pull requests pass the filter; the project is not eligible",
                config.project,
                filtered.dataset.len()
            );
        }
        let (train, test) = chronological_split(&filtered.dataset, config.train_fraction)?;
        filtered.dataset.save(&dir.join("filtered.jsonl"))?;
        train.save(&dir.join("train.jsonl"))?;
        test.save(&dir.join("test.jsonl"))?;
        write_json(
            &dir.join("summary.json"),
            &PrSummary {
                project: config.project.clone(),
                total: ds.len(),
                kept: filtered.dataset.len(),
                eligible: filtered.eligible,
                train: train.len(),
                test: test.len(),
            },
        )
    })?;

    let store_dir = root.join("store");
    let prs_dir = root.join("prs");
    let load_inputs = || -> Result<(KuStore, PrDataset, PrDataset), PipelineError> {
        Ok((
            KuStore::load(&store_dir)?,
            read_dataset(&config.project, &prs_dir.join("filtered.jsonl"))?,
            read_dataset(&config.project, &prs_dir.join("test.jsonl"))?,
        ))
    };

    runner.run(
        "profiles",
        sha_hex(&[b"profiles/1", store_hash.as_bytes(), prs_hash.as_bytes()]),
        |dir| {
            let (store, all, test) = load_inputs()?;
            let cutoff = test.prs().first().map(|p| p.opened_at);
            let (dev, _) = dev_exp_matrix(&store, cutoff);
            let vectors = pr_vectors(all.prs(), &store);
            let (rev, _) = rev_exp_from_vectors(all.prs(), &vectors, cutoff);
            for (name, m) in [
                ("development.csv", &dev),
                ("review.csv", &rev),
                ("global.csv", &global_ku_profiles(&store)),
            ] {
                let p = dir.join(name);
                m.write_csv(create(&p)?).map_err(csv_err(&p))?;
            }
            Ok(())
        },
    )?;

    let exp_options = ExperimentOptions {
        recommenders: config.recommenders,
        seed: config.seed,
    };
    runner.run(
        "report",
        sha_hex(&[
            b"report/1",
            store_hash.as_bytes(),
            prs_hash.as_bytes(),
            &serde_json::to_vec(&exp_options).expect("options serialize"),
        ]),
        |dir| {
            let (store, all, test) = load_inputs()?;
            let experiment = run_experiment(&config.project, &store, all.prs(), test.prs(), &exp_options)?;
            write_experiment(dir, &experiment)
        },
    )?;

    runner.run(
        "cluster",
        sha_hex(&[
            b"cluster/1",
            store_hash.as_bytes(),
            &serde_json::to_vec(&config.cluster).expect("options serialize"),
        ]),
        |dir| {
            let store = KuStore::load(&store_dir)?;
            let analysis = analyse_profiles(&global_ku_profiles(&store), &config.cluster)?;
            write_cluster(dir, &analysis)
        },
    )?;

    let summary: PrSummary = serde_json::from_slice(&fs::read(prs_dir.join("summary.json")).map_err(io_err(&prs_dir))?)
        .map_err(|e| PipelineError::Config {
            path: prs_dir.display().to_string(),
            message: e.to_string(),
        })?;
    Ok(PipelineRun {
        stages: runner.statuses,
        output_dir: root.to_path_buf(),
        eligible: summary.eligible,
    })
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    developers: usize,
    pca_components: usize,
    k: usize,
    median_silhouette: f64,
    below_threshold: bool,
    sizes: &'a [u64],
    gini: f64,
}

/// Writes the clustering artifacts into `dir`.
pub fn write_cluster(dir: &Path, analysis: &crate::cluster::ClusterAnalysis) -> Result<(), PipelineError> {
    let p = dir.join("labels.csv");
    analysis.write_labels(create(&p)?).map_err(csv_err(&p))?;
    let p = dir.join("silhouette.csv");
    analysis.write_silhouette_curve(create(&p)?).map_err(csv_err(&p))?;
    let p = dir.join("diff_values.csv");
    analysis.write_diff_values(create(&p)?).map_err(csv_err(&p))?;
    write_json(
        &dir.join("summary.json"),
        &ClusterSummary {
            developers: analysis.developers.len(),
            pca_components: analysis.pca_components,
            k: analysis.selection.clustering.k,
            median_silhouette: analysis.selection.median_silhouette,
            below_threshold: analysis.selection.below_threshold,
            sizes: &analysis.sizes,
            gini: analysis.gini,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let cfg = ProjectConfig::from_toml_str("repo = \"r\"\nprs = \"data/p.jsonl\"\n", Path::new("/base")).unwrap();
        assert_eq!(cfg.repo, PathBuf::from("/base/r"));
        assert_eq!(cfg.project, "p");
        assert_eq!(cfg.output_dir, PathBuf::from("/base/out"));
        assert_eq!(cfg.train_fraction, 0.8);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ProjectConfig::from_toml_str("repo = \"r\"\nprs = \"p\"\nbogus = 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn missing_export_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("r")).unwrap();
        let cfg = ProjectConfig::from_toml_str("repo = \"r\"\nprs = \"nope.jsonl\"\n", dir.path()).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("nope.jsonl"), "{err}");
    }
}
