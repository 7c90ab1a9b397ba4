//! Evaluate all eight recommenders on a synthetic project and print the
//! accuracy and MAP tables.
//!
//! ```text
//! cargo run --release --example evaluate_project -- [seed]
//! ```

use kurev::catalog::CapabilityCatalog;
use kurev::experiment::{run_experiment, ExperimentOptions};
use kurev::history::{build_ku_store, DetectionCache, MineOptions};
use kurev::prs::{chronological_split, filter_prs};
use kurev::recommenders::RecommenderConfig;
use kurev::synthetic::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let dir = tempfile::tempdir()?;
    let project = generate(&SynthSpec::mini(seed));
    let written = project.materialize(dir.path())?;
    let store = build_ku_store(
        &written.repo,
        &CapabilityCatalog::builtin(),
        &mut DetectionCache::in_memory(),
        &MineOptions::default(),
    )?;
    let prs = filter_prs(&project.prs).dataset;
    let (train, test) = chronological_split(&prs, 0.8)?;
    println!("{} train / {} test pull requests", train.len(), test.len());

    let options = ExperimentOptions {
        recommenders: RecommenderConfig::default(),
        seed,
    };
    let report = run_experiment("mini", &store, prs.prs(), test.prs(), &options)?.report;

    println!(
        "{:<10} {:>29}   {:>29}   reasonable",
        "", "top-k accuracy (k=1..5)", "MAP@k (k=1..5)"
    );
    for m in &report.recommenders {
        let fmt = |xs: &[f64; 5]| xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        let pct = m
            .reasonableness
            .percentage()
            .map_or("n/a".into(), |p| format!("{p:.1}%"));
        println!("{:<10} {}   {}   {pct}", m.kind, fmt(&m.top_k), fmt(&m.map_k));
    }
    println!();
    report.write_csv(std::io::stdout().lock())?;
    Ok(())
}
