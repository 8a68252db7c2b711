//! Benchmark pairing at full size and the four-column report.
//!
//! ```bash
//! cargo run --example benchmark_report
//! ```

use stylecurate::bench::{emit_report, ensure_disjoint, generate_pairs, Split};
use stylecurate::fixtures::reference_tables;

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

fn main() -> stylecurate::Result<()> {
    let test = generate_pairs(&ids("style/test", 50), &ids("content/test", 40), Split::Test)?;
    let validation = generate_pairs(&ids("style/val", 10), &ids("content/val", 10), Split::Validation)?;
    println!("test pairs {}, validation pairs {}", test.pairs.len(), validation.pairs.len());
    ensure_disjoint(&test, &validation)?;

    let dir = tempfile::tempdir().expect("tempdir");
    let files = emit_report(&reference_tables(), dir.path())?;
    print!("{}", std::fs::read_to_string(&files.markdown).expect("report.md"));
    Ok(())
}
