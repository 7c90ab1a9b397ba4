//! Detect knowledge units in Java files.
//!
//! ```text
//! cargo run --example detect_kus -- path/to/File.java [more.java ...]
//! ```
//!
//! Without arguments a small built-in snippet is analysed.

use kurev::catalog::CapabilityCatalog;
use kurev::detector::{detect_capabilities, parse_java};

const SNIPPET: &str = r#"
import java.util.ArrayList;
import java.util.List;

abstract class Inventory<T> {
    private final List<T> items = new ArrayList<>();

    int size() {
        try {
            return items.size();
        } catch (RuntimeException e) {
            return 0;
        }
    }
}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = CapabilityCatalog::builtin();
    let inputs: Vec<(String, Vec<u8>)> = match std::env::args().skip(1).collect::<Vec<_>>() {
        args if args.is_empty() => vec![("<snippet>".into(), SNIPPET.as_bytes().to_vec())],
        args => args
            .into_iter()
            .map(|p| std::fs::read(&p).map(|b| (p, b)))
            .collect::<Result<_, _>>()?,
    };

    for (name, bytes) in inputs {
        let tree = parse_java(&bytes)?;
        let hits = detect_capabilities(&tree, &catalog);
        println!("{name}: {} syntax error node(s)", tree.error_node_count());
        for (id, count) in hits.iter() {
            let description = catalog.rule(id).map(|r| r.description.as_str()).unwrap_or("");
            println!("  {id:<8} {count:>3}  {description}");
        }
        let vector = hits.to_ku_vector();
        let present: Vec<String> = vector.present().map(|k| format!("{k}={}", vector[k])).collect();
        println!("  vector: {}", present.join(" "));
    }
    Ok(())
}
