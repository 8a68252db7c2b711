//! Label triplets through the review state, relabel one, and replay the log
//! offline with `apply_labels`.
//!
//! ```bash
//! cargo run --example label_replay
//! ```

use std::collections::BTreeMap;

use stylecurate::datamodel::{read_labels, Label, Triplet, TripletSource};
use stylecurate::review::{BatchFilter, ReviewState};
use stylecurate::triplets::{apply_labels, LabelCounts};

fn main() -> stylecurate::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let log = dir.path().join("labels.ndjson");
    let manifest: Vec<Triplet> = (0..8)
        .map(|i| Triplet::new(format!("s{i}"), format!("c{i}"), format!("t{i}"), TripletSource::Collected, "ink", "p"))
        .collect();

    let state = ReviewState::new(manifest.clone(), BTreeMap::new(), &log)?;
    let batch = state.next_batch(BatchFilter::Unlabeled, 0, 8);
    for (i, view) in batch.iter().enumerate() {
        let label = if i < 6 { Label::High } else { Label::Low };
        state.submit_at(&view.triplet_id, label, "curator-a", 100 + i as i64)?;
    }
    // A second curator disagrees later; last write wins.
    let progress = state.submit_at(&batch[0].triplet_id, Label::Low, "curator-b", 200)?;
    println!("live progress: {progress:?}");

    let replayed = apply_labels(&manifest, &read_labels(&log)?);
    println!("replayed counts: {:?}", replayed.counts);
    assert_eq!(replayed.counts, progress.counts());
    assert_eq!(LabelCounts::of(&replayed.manifest), replayed.counts);

    // A restarted service on the same log sees the same state.
    drop(state);
    let restarted = ReviewState::new(manifest, BTreeMap::new(), &log)?;
    println!("after restart: {:?}", restarted.progress());
    Ok(())
}
