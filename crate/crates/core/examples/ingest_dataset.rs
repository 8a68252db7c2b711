//! Scan a dataset laid out by role directory, check its embedding sidecars
//! and attach captions.
//!
//! ```bash
//! cargo run --example ingest_dataset
//! ```

use std::collections::BTreeMap;

use stylecurate::datamodel::{EmbeddingKind, ImageKind};
use stylecurate::fixtures::{write_mini_dataset, MiniSpec};
use stylecurate::ingest::{attach_captions, load_embeddings, scan_dataset};

fn main() -> stylecurate::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_mini_dataset(dir.path(), &MiniSpec::default())?;

    let (catalog, scan) = scan_dataset(&data.root, &data.clusters)?;
    println!("{} images, {} clusters", scan.images, scan.clusters);
    for (cluster, members) in &catalog.clusters {
        println!("  {cluster}: {}", members.join(", "));
    }
    let first = catalog.of_kind(ImageKind::StylizedTarget).next().expect("a target");
    println!("{} is {}x{} at {}", first.id, first.width, first.height, first.path);

    // Dims are pinned per kind by the first vector seen; pass a map to pin them up front.
    let store = load_embeddings(&data.embeddings, &BTreeMap::new())?;
    for kind in EmbeddingKind::ALL {
        println!("{kind}: dim {:?}", store.dim(kind));
    }
    println!("{} vectors; sidecar headers: {:?}", store.len(), store.headers().values().collect::<Vec<_>>());

    let (catalog, report) = attach_captions(catalog, &data.captions, None)?;
    println!(
        "captions cover {}/{} content references",
        report.covered, report.required
    );
    let captioned = catalog.of_kind(ImageKind::ContentRef).filter(|r| r.caption_id.is_some()).count();
    assert_eq!(captioned, report.required);
    Ok(())
}
