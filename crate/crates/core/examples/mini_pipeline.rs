//! End to end: ingest, triplets, labels, stages and the benchmark report.
//!
//! ```bash
//! cargo run --example mini_pipeline [out_dir]
//! ```

use std::path::PathBuf;

use stylecurate::fixtures::{run_mini_pipeline, write_mini_dataset, MiniSpec};

fn main() -> stylecurate::Result<()> {
    let tmp = tempfile::tempdir().expect("tempdir");
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().join("out"));
    let data = write_mini_dataset(tmp.path(), &MiniSpec::default())?;
    let run = run_mini_pipeline(&data, &out, 0)?;

    println!("collected {}, synthetic {}", run.collected, run.synthetic);
    println!("D1/D2/D3 sizes {:?}", run.stage_sizes);
    println!("benchmark pairs {}", run.pairs);
    for f in &run.files {
        println!("  wrote {}", f.display());
    }
    print!("{}", std::fs::read_to_string(out.join("report.md")).expect("report.md"));
    Ok(())
}
