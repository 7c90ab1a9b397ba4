//! Mine a git repository into a knowledge-unit store.
//!
//! ```text
//! cargo run --example mine_repository -- path/to/repo [store-dir]
//! ```
//!
//! Without arguments a small synthetic repository is generated and mined.

use std::path::PathBuf;

use kurev::catalog::CapabilityCatalog;
use kurev::history::{build_ku_store, DetectionCache, FileStatus, MineOptions};
use kurev::ku::KuVector;
use kurev::synthetic::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scratch = tempfile::tempdir()?;
    let mut args = std::env::args().skip(1);
    let repo = match args.next() {
        Some(path) => PathBuf::from(path),
        None => generate(&SynthSpec::small(1)).materialize(scratch.path())?.repo,
    };

    let catalog = CapabilityCatalog::builtin();
    let mut cache = DetectionCache::in_memory();
    let store = build_ku_store(&repo, &catalog, &mut cache, &MineOptions::default())?;

    let analysed = store
        .files()
        .iter()
        .filter(|f| f.status == FileStatus::Analyzed)
        .count();
    println!(
        "{} commits, {} file records ({analysed} analysed), {} distinct blobs parsed",
        store.commits().len(),
        store.files().len(),
        cache.len()
    );
    for author in store.authors() {
        let mut total = KuVector::zero();
        let mut commits = 0;
        for c in store.commits_by(author) {
            commits += 1;
            for v in store.files_of(&c.hash).filter_map(|f| f.vector) {
                total += v;
            }
        }
        let top: Vec<String> = total.present().take(5).map(|k| format!("{k}={}", total[k])).collect();
        println!("{author}: {commits} commits; {}", top.join(" "));
    }

    if let Some(out) = args.next() {
        store.save(&PathBuf::from(&out))?;
        println!("store written to {out}");
    }
    Ok(())
}
