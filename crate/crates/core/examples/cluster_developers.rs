//! Cluster developers of a synthetic project by their knowledge-unit
//! profiles and list the units that set each cluster apart.
//!
//! ```text
//! cargo run --release --example cluster_developers
//! ```

use kurev::catalog::CapabilityCatalog;
use kurev::cluster::{analyse_profiles, ClusterOptions};
use kurev::history::{build_ku_store, DetectionCache, MineOptions};
use kurev::profiles::global_ku_profiles;
use kurev::synthetic::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = SynthSpec {
        developers: 16,
        ..SynthSpec::mini(11)
    };
    let written = generate(&spec).materialize(dir.path())?;
    let store = build_ku_store(
        &written.repo,
        &CapabilityCatalog::builtin(),
        &mut DetectionCache::in_memory(),
        &MineOptions::default(),
    )?;
    let profiles = global_ku_profiles(&store);
    let analysis = analyse_profiles(&profiles, &ClusterOptions::default())?;

    let sel = &analysis.selection;
    println!(
        "{} developers, {} principal components, K = {} (median silhouette {:.3}{})",
        analysis.developers.len(),
        analysis.pca_components,
        sel.clustering.k,
        sel.median_silhouette,
        if sel.below_threshold { ", below threshold" } else { "" }
    );
    println!("cluster sizes {:?}, Gini {:.3}", analysis.sizes, analysis.gini);
    for cluster in 0..sel.clustering.k {
        let members: Vec<&str> = analysis
            .developers
            .iter()
            .zip(&sel.clustering.labels)
            .filter(|(_, l)| **l == cluster)
            .map(|(d, _)| d.as_str())
            .collect();
        let standout: Vec<String> = analysis
            .diff_values
            .iter()
            .filter(|r| r.cluster == cluster && r.flagged)
            .map(|r| format!("{} {:+.2}", r.ku, r.diff_value))
            .collect();
        println!("cluster {cluster}: {} | {}", members.join(", "), standout.join(", "));
    }
    Ok(())
}
