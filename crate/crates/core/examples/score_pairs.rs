//! Style similarity, content score, the cut-off metrics and the aesthetic
//! head on hand-made vectors.
//!
//! ```bash
//! cargo run --example score_pairs
//! ```

use stylecurate::datamodel::{EmbeddingKind, EmbeddingVector};
use stylecurate::fixtures::random_head;
use stylecurate::metrics::{aesthetic_score, clip_score, cpc_at, cpc_range, csd_score, MetricConfig};

fn main() -> stylecurate::Result<()> {
    let cfg = MetricConfig::default();
    let style = EmbeddingVector::new("style", EmbeddingKind::Csd, vec![1.0, 0.2, 0.0, 0.4]);
    let result_csd = EmbeddingVector::new("result", EmbeddingKind::Csd, vec![0.6, 0.5, 0.3, 0.1]);
    let caption = EmbeddingVector::new("caption", EmbeddingKind::ClipText, vec![0.3, 0.9, 0.1]);
    let result_clip = EmbeddingVector::new("result", EmbeddingKind::ClipImage, vec![0.2, 0.4, 0.8]);

    let csd = csd_score(&style, &result_csd)?;
    let clip = clip_score(&caption, &result_clip, &cfg)?;
    println!("csd {csd:.4}, clip {clip:.4}");
    println!("cpc@{} = {:.4}", cfg.cpc_threshold, cpc_at(clip, csd, cfg.cpc_threshold));
    println!("cpc@0.9 = {:.4}", cpc_at(clip, csd, 0.9));
    println!("thresholds {:?}", cfg.thresholds()?);
    println!("cpc@{}:{} = {:.4}", cfg.range_lo, cfg.range_hi, cpc_range(clip, csd, &cfg)?);

    let scaled = MetricConfig {
        clip_scale: 2.5,
        ..cfg.clone()
    };
    println!("clip with 2.5x scale {:.4}", clip_score(&caption, &result_clip, &scaled)?);

    let head = random_head(3, 4, 1);
    println!("aesthetic {:.4}", aesthetic_score(&result_clip, &head)?);
    Ok(())
}
