use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kurev::catalog::CapabilityCatalog;
use kurev::cluster::{analyse_profiles, ClusterOptions, DEFAULT_SILHOUETTE, DEFAULT_VARIANCE};
use kurev::combiner::{replay, BrstPolicy};
use kurev::detector::{detect_capabilities, parse_java};
use kurev::experiment::{base_outcome, run_experiment, ExperimentOptions};
use kurev::history::{build_ku_store, DetectionCache, KuStore, MineOptions};
use kurev::pipeline::{run_pipeline, write_cluster, write_experiment, ProjectConfig, DEFAULT_TRAIN_FRACTION};
use kurev::profiles::{dev_exp_matrix, pr_vectors, rev_exp_from_vectors};
use kurev::prs::{chronological_split, filter_prs, load_prs, PrDataset, PullRequest};
use kurev::recommenders::{RecommenderConfig, RecommenderKind, ReviewHistory, RfMode, ALL_KINDS};
use kurev::synthetic::{generate, SynthSpec};

/// Knowledge-unit based code reviewer recommendation for Java projects.
#[derive(Parser)]
#[command(name = "kurev", version)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect knowledge units in Java files and print one JSON record per file.
    Detect {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Capability catalog (TOML); the built-in catalog by default.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Include per-capability hit counts.
        #[arg(long)]
        capabilities: bool,
    },
    /// Mine a git repository into a knowledge-unit store.
    Mine {
        repo: PathBuf,
        /// Store directory to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Walk every reachable commit instead of the first-parent chain.
        #[arg(long)]
        all_commits: bool,
        /// Detection cache file, reused across runs.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Validate or split a pull-request export.
    #[command(subcommand)]
    Prs(PrsCommand),
    /// Write development and review expertise matrices as of a cutoff.
    Profiles {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        prs: PathBuf,
        /// RFC 3339 timestamp; the whole history when omitted.
        #[arg(long)]
        cutoff: Option<DateTime<Utc>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recommend reviewers for one pull request.
    Recommend(RecommendArgs),
    /// Evaluate recommenders on a train/test split.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Comma-separated recommender names, or `all`.
        #[arg(long, default_value = "all")]
        recommenders: String,
        /// Report directory.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = RfModeArg::ReviewedPrs)]
        rf_mode: RfModeArg,
    },
    /// Cluster developers by their knowledge-unit profiles.
    Cluster {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every stage for a project configuration, reusing unchanged results.
    Pipeline {
        /// Project configuration (TOML).
        config: PathBuf,
    },
    /// Generate a synthetic project (git repository, pull requests, configuration).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Mini)]
        preset: Preset,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PrsCommand {
    /// Check an export against the schema and report filter results.
    Validate { file: PathBuf },
    /// Filter and split an export chronologically.
    Split {
        file: PathBuf,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        fraction: f64,
        /// Split the export as is, without the eligibility filter.
        #[arg(long)]
        no_filter: bool,
    },
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    store: PathBuf,
    /// Pull-request export of the project.
    #[arg(long)]
    prs: PathBuf,
    #[arg(long)]
    pr: u64,
    /// kurec, rf, chrev, er, cf, ad_freq, ad_rec or ad_hybrid.
    #[arg(long)]
    which: String,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = RfModeArg::ReviewedPrs)]
    rf_mode: RfModeArg,
    /// Training share used to find the test sequence for combined recommenders.
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RfModeArg {
    ReviewedPrs,
    Comments,
}

impl From<RfModeArg> for RfMode {
    fn from(m: RfModeArg) -> Self {
        match m {
            RfModeArg::ReviewedPrs => RfMode::ReviewedPrs,
            RfModeArg::Comments => RfMode::Comments,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Mini,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => {
            eprintln!("internal error");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Detect {
            files,
            catalog,
            capabilities,
        } => detect(&files, catalog.as_deref(), capabilities),
        Command::Mine {
            repo,
            out,
            catalog,
            all_commits,
            cache,
        } => {
            let catalog = CapabilityCatalog::load(catalog.as_deref())?;
            let mut cache = match cache {
                Some(p) => DetectionCache::open(&p),
                None => DetectionCache::in_memory(),
            };
            let options = MineOptions {
                all_commits,
                aliases: BTreeMap::new(),
            };
            let store = build_ku_store(&repo, &catalog, &mut cache, &options)?;
            store.save(&out)?;
            println!(
                "mined {} commits, {} file records into {}",
                store.commits().len(),
                store.files().len(),
                out.display()
            );
            Ok(())
        }
        Command::Prs(cmd) => prs(cmd),
        Command::Profiles {
            store,
            prs,
            cutoff,
            out,
        } => {
            let store = KuStore::load(&store)?;
            let ds = load_prs(&prs)?;
            let filtered = filter_prs(&ds).dataset;
            let (dev, _) = dev_exp_matrix(&store, cutoff);
            let vectors = pr_vectors(filtered.prs(), &store);
            let (rev, _) = rev_exp_from_vectors(filtered.prs(), &vectors, cutoff);
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            dev.write_csv(create(&out.join("development.csv"))?)?;
            rev.write_csv(create(&out.join("review.csv"))?)?;
            println!(
                "{} developers, {} reviewers written to {}",
                dev.developers().len(),
                rev.developers().len(),
                out.display()
            );
            Ok(())
        }
        Command::Recommend(args) => recommend(args),
        Command::Evaluate {
            train,
            test,
            store,
            recommenders,
            out,
            seed,
            rf_mode,
        } => {
            let wanted = parse_kinds(&recommenders)?;
            let store = KuStore::load(&store)?;
            let train = load_prs(&train)?;
            let test = load_prs(&test)?;
            let project = test.project.clone();
            let mut all: Vec<PullRequest> = train.prs().to_vec();
            all.extend(test.prs().iter().cloned());
            let all = PrDataset::new(project.clone(), all)?;
            let options = ExperimentOptions {
                recommenders: RecommenderConfig {
                    rf_mode: rf_mode.into(),
                },
                seed,
            };
            let mut experiment = run_experiment(&project, &store, all.prs(), test.prs(), &options)?;
            experiment.report.recommenders.retain(|m| wanted.contains(&m.kind));
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            write_experiment(&out, &experiment)?;
            experiment.report.write_csv(io::stdout().lock())?;
            Ok(())
        }
        Command::Cluster {
            store,
            out,
            k_max,
            seed,
        } => {
            let store = KuStore::load(&store)?;
            let options = ClusterOptions {
                k_max,
                variance: DEFAULT_VARIANCE,
                silhouette: DEFAULT_SILHOUETTE,
                seed,
            };
            let analysis = analyse_profiles(&kurev::profiles::global_ku_profiles(&store), &options)?;
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            write_cluster(&out, &analysis)?;
            println!(
                "k = {} (median silhouette {:.4}{}), gini {:.4}",
                analysis.selection.clustering.k,
                analysis.selection.median_silhouette,
                if analysis.selection.below_threshold {
                    ", below threshold"
                } else {
                    ""
                },
                analysis.gini
            );
            Ok(())
        }
        Command::Pipeline { config } => {
            let config = ProjectConfig::load(&config)?;
            let run = run_pipeline(&config)?;
            for (name, status) in &run.stages {
                println!("{name}: {status}");
            }
            if !run.eligible {
                println!("warning: fewer than 100 eligible pull requests");
            }
            println!("outputs in {}", run.output_dir.display());
            Ok(())
        }
        Command::Synth { out, preset, seed } => {
            let spec = match preset {
                Preset::Small => SynthSpec::small(seed),
                Preset::Mini => SynthSpec::mini(seed),
            };
            if out.exists() && fs::read_dir(&out)?.next().is_some() {
                bail!("{} exists and is not empty", out.display());
            }
            let written = generate(&spec).materialize(&out)?;
            println!("configuration: {}", written.config.display());
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| path.display().to_string())?,
    ))
}

fn parse_kinds(list: &str) -> Result<Vec<RecommenderKind>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(ALL_KINDS.to_vec());
    }
    list.split(',')
        .map(|s| s.parse::<RecommenderKind>().map_err(|e| anyhow!(e)))
        .collect()
}

fn detect(files: &[PathBuf], catalog: Option<&Path>, capabilities: bool) -> Result<()> {
    let catalog = CapabilityCatalog::load(catalog)?;
    let mut out = io::stdout().lock();
    for path in files {
        let bytes = fs::read(path).with_context(|| path.display().to_string())?;
        let tree = parse_java(&bytes).with_context(|| path.display().to_string())?;
        let hits = detect_capabilities(&tree, &catalog);
        let vector = hits.to_ku_vector();
        let kus: BTreeMap<String, u64> = vector.present().map(|k| (k.to_string(), vector.get(k))).collect();
        let mut record = serde_json::json!({
            "file": path.display().to_string(),
            "vector": vector,
            "kus": kus,
            "syntax_errors": tree.error_node_count(),
        });
        if capabilities {
            record["capabilities"] = serde_json::to_value(&hits)?;
        }
        writeln!(out, "{record}")?;
    }
    Ok(())
}

fn prs(cmd: PrsCommand) -> Result<()> {
    match cmd {
        PrsCommand::Validate { file } => {
            let ds = load_prs(&file)?;
            let filtered = filter_prs(&ds);
            println!(
                "{}: {} pull requests, {} pass the filter, eligible: {}",
                ds.project,
                ds.len(),
                filtered.dataset.len(),
                filtered.eligible
            );
            Ok(())
        }
        PrsCommand::Split {
            file,
            out_train,
            out_test,
            fraction,
            no_filter,
        } => {
            let ds = load_prs(&file)?;
            let ds = if no_filter { ds } else { filter_prs(&ds).dataset };
            let (train, test) = chronological_split(&ds, fraction)?;
            train.save(&out_train)?;
            test.save(&out_test)?;
            println!("train {} / test {}", train.len(), test.len());
            Ok(())
        }
    }
}

fn recommend(args: RecommendArgs) -> Result<()> {
    let kind: RecommenderKind = args.which.parse().map_err(|e: String| anyhow!(e))?;
    let store = KuStore::load(&args.store)?;
    let ds = load_prs(&args.prs)?;
    let target = ds
        .get(args.pr)
        .cloned()
        .ok_or_else(|| anyhow!("pull request {} is not in {}", args.pr, args.prs.display()))?;
    let filtered = filter_prs(&ds).dataset;
    let mut with_target: Vec<&PullRequest> = filtered.prs().iter().collect();
    with_target.push(&target);
    let vectors = pr_vectors(with_target, &store);
    let history = ReviewHistory {
        store: &store,
        prs: filtered.prs(),
        pr_vectors: &vectors,
        config: RecommenderConfig {
            rf_mode: args.rf_mode.into(),
        },
    };

    let rec = match BrstPolicy::from_kind(kind) {
        None => history.recommend(kind, &target)?,
        Some(policy) => {
            let (_, test) = chronological_split(&filtered, args.fraction)?;
            let pos = test.prs().iter().position(|p| p.id == args.pr).ok_or_else(|| {
                anyhow!(
                    "combined recommenders only run on test pull requests; {} is not one",
                    args.pr
                )
            })?;
            let outcomes = test.prs()[..=pos]
                .iter()
                .map(|p| base_outcome(&history, p))
                .collect::<Result<Vec<_>, _>>()?;
            let run = replay(policy, &outcomes, args.seed);
            let step = run.steps.last().expect("non-empty prefix");
            println!("# delegate {} (used {})", step.delegate, step.used);
            run.recommendations.last().expect("non-empty prefix").clone()
        }
    };
    let mut out = io::stdout().lock();
    writeln!(out, "rank\tdeveloper\tscore")?;
    for (i, r) in rec.ranked.iter().take(args.top).enumerate() {
        writeln!(out, "{}\t{}\t{:.6}", i + 1, r.developer, r.score)?;
    }
    Ok(())
}
