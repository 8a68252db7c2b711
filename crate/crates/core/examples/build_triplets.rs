//! Build collected and synthetic triplet manifests from style clusters.
//!
//! ```bash
//! cargo run --example build_triplets
//! ```

use stylecurate::datamodel::validate_manifest;
use stylecurate::fixtures::{write_mini_dataset, MiniSpec};
use stylecurate::ingest::scan_dataset;
use stylecurate::triplets::{build_collected, build_synthetic, content_map, read_assets, MatchConfig, MatchMode};

fn main() -> stylecurate::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_mini_dataset(dir.path(), &MiniSpec::default())?;
    let (catalog, _) = scan_dataset(&data.root, &data.clusters)?;
    let contents = content_map(&read_assets(&data.assets)?);

    // Every ordered pair inside a cluster: 5 clusters of 4 give 5 * 4 * 3.
    let all = build_collected(&catalog, &contents, &MatchConfig::default())?;
    println!("uncapped: {} triplets", all.len());
    let t = &all[0];
    println!("  {} = [{}, {}, {}]", t.triplet_id, t.style_ref, t.content_ref, t.target);
    println!("  prompt: {}", t.prompt);

    // A cap draws a seeded sample per cluster; raising it only adds triplets.
    for cap in [2, 5, 8] {
        let cfg = MatchConfig {
            max_pairs_per_cluster: Some(cap),
            seed: 11,
            ..MatchConfig::default()
        };
        println!("cap {cap}: {} triplets", build_collected(&catalog, &contents, &cfg)?.len());
    }

    let synthetic = build_synthetic(
        &catalog,
        &read_assets(&data.synthetic_assets)?,
        &MatchConfig {
            mode: MatchMode::Both,
            ..MatchConfig::default()
        },
    )?;
    println!("synthetic (pairwise + generated style refs): {}", synthetic.len());

    let report = validate_manifest(&all, Some(&catalog.ids()));
    println!("collected manifest valid: {}", report.is_valid());
    Ok(())
}
