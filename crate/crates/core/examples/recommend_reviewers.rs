//! Recommend reviewers for the newest pull request of a synthetic project
//! with every base recommender, showing the KUREC score breakdown.
//!
//! ```text
//! cargo run --example recommend_reviewers
//! ```

use kurev::catalog::CapabilityCatalog;
use kurev::history::{build_ku_store, DetectionCache, MineOptions};
use kurev::profiles::{dev_exp_matrix, pr_vectors, rev_exp_from_vectors};
use kurev::prs::filter_prs;
use kurev::recommenders::{kurec_scores, RecommenderConfig, ReviewHistory, BASE_KINDS};
use kurev::synthetic::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let project = generate(&SynthSpec::mini(3));
    let written = project.materialize(dir.path())?;
    let store = build_ku_store(
        &written.repo,
        &CapabilityCatalog::builtin(),
        &mut DetectionCache::in_memory(),
        &MineOptions::default(),
    )?;
    let prs = filter_prs(&project.prs).dataset;
    let target = prs.prs().last().ok_or("no pull requests")?;
    let vectors = pr_vectors(prs.prs(), &store);
    let history = ReviewHistory {
        store: &store,
        prs: prs.prs(),
        pr_vectors: &vectors,
        config: RecommenderConfig::default(),
    };

    println!(
        "PR {} by {}; true reviewers: {:?}",
        target.id, target.author, target.reviewers
    );
    for kind in BASE_KINDS {
        match history.recommend(kind, target) {
            Ok(rec) => {
                let top: Vec<String> = rec
                    .ranked
                    .iter()
                    .take(3)
                    .map(|r| format!("{} ({:.3})", r.developer, r.score))
                    .collect();
                println!("{:<6} {}", kind.name(), top.join(", "));
            }
            Err(e) => println!("{:<6} {e}", kind.name()),
        }
    }

    let cutoff = Some(target.opened_at);
    let dev = dev_exp_matrix(&store, cutoff);
    let rev = rev_exp_from_vectors(prs.prs(), &vectors, cutoff);
    let mut parts = kurec_scores(target, (&dev.0, &dev.1), (&rev.0, &rev.1), &vectors[&target.id])?;
    parts.sort_by(|a, b| b.total().total_cmp(&a.total()));
    println!("\nKUREC breakdown (development + review):");
    for p in parts.iter().take(5) {
        println!(
            "  {:<24} {:.3} + {:.3} = {:.3}",
            p.developer,
            p.dev_score,
            p.rev_score,
            p.total()
        );
    }
    Ok(())
}
