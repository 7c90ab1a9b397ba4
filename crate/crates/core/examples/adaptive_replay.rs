//! Replay the three adaptive policies over a synthetic test sequence and
//! show which base recommender each one delegated to.
//!
//! ```text
//! cargo run --example adaptive_replay -- [seed]
//! ```

use std::collections::BTreeMap;

use kurev::catalog::CapabilityCatalog;
use kurev::combiner::BrstPolicy;
use kurev::experiment::{run_experiment, ExperimentOptions};
use kurev::history::{build_ku_store, DetectionCache, MineOptions};
use kurev::prs::{chronological_split, filter_prs};
use kurev::recommenders::RecommenderConfig;
use kurev::synthetic::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let dir = tempfile::tempdir()?;
    let project = generate(&SynthSpec::mini(5));
    let written = project.materialize(dir.path())?;
    let store = build_ku_store(
        &written.repo,
        &CapabilityCatalog::builtin(),
        &mut DetectionCache::in_memory(),
        &MineOptions::default(),
    )?;
    let prs = filter_prs(&project.prs).dataset;
    let (_, test) = chronological_split(&prs, 0.8)?;
    let options = ExperimentOptions {
        recommenders: RecommenderConfig::default(),
        seed,
    };
    let experiment = run_experiment("mini", &store, prs.prs(), test.prs(), &options)?;

    for policy in BrstPolicy::ALL {
        let run = experiment
            .replays
            .iter()
            .find(|r| r.policy == policy)
            .ok_or("missing replay")?;
        let sequence: Vec<String> = run.steps.iter().map(|s| s.used.to_string()).collect();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in &sequence {
            *counts.entry(s.clone()).or_default() += 1;
        }
        let metrics = experiment.report.get(policy.kind()).ok_or("missing metrics")?;
        println!(
            "{}: top-5 {:.3}, MAP@5 {:.3}",
            policy.kind(),
            metrics.top_k[4],
            metrics.map_k[4]
        );
        println!("  delegates {counts:?}");
        println!("  sequence  {}", sequence.join(" "));
    }
    Ok(())
}
