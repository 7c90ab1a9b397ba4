//! Filter a pull-request export and split it chronologically.
//!
//! ```text
//! cargo run --example split_prs -- prs.jsonl [fraction]
//! ```
//!
//! Without arguments the pull requests of a synthetic project are used.

use kurev::prs::{chronological_split, filter_prs, load_prs};
use kurev::synthetic::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dataset = match args.next() {
        Some(path) => load_prs(path.as_ref())?,
        None => generate(&SynthSpec::mini(7)).prs,
    };
    let fraction: f64 = args.next().map(|f| f.parse()).transpose()?.unwrap_or(0.8);

    let filtered = filter_prs(&dataset);
    println!(
        "{}: {} pull requests, {} kept by the filter (eligible: {})",
        dataset.project,
        dataset.len(),
        filtered.dataset.len(),
        filtered.eligible
    );
    let (train, test) = chronological_split(&filtered.dataset, fraction)?;
    let span = |d: &kurev::prs::PrDataset| match (d.prs().first(), d.prs().last()) {
        (Some(a), Some(b)) => format!("{} .. {}", a.opened_at.date_naive(), b.opened_at.date_naive()),
        _ => "empty".into(),
    };
    println!("train: {:>4}  {}", train.len(), span(&train));
    println!("test:  {:>4}  {}", test.len(), span(&test));
    Ok(())
}
