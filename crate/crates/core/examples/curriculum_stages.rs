//! Compose the three stage datasets and the chained training plan.
//!
//! ```bash
//! cargo run --example curriculum_stages
//! ```

use stylecurate::curriculum::{
    compose_stage1, compose_stage2, compose_stage3, emit_stage_plan, max_low_count, synthetic_count, StageConfig,
    DEFAULT_BASE_MODEL, DEFAULT_FINAL_TAG,
};
use stylecurate::datamodel::{Consistency, Triplet, TripletSource};

fn triplets(n: usize, source: TripletSource, consistency: Consistency, tag: &str) -> Vec<Triplet> {
    (0..n)
        .map(|i| {
            let mut t = Triplet::new(format!("{tag}s{i}"), format!("{tag}c{i}"), format!("{tag}t{i}"), source, "k", "p");
            t.consistency = consistency;
            t
        })
        .collect()
}

fn main() -> stylecurate::Result<()> {
    let mut collected = triplets(100, TripletSource::Collected, Consistency::High, "h");
    collected.extend(triplets(900, TripletSource::Collected, Consistency::Low, "l"));
    collected.extend(triplets(50, TripletSource::Collected, Consistency::Unlabeled, "u"));
    let synthetic = triplets(400, TripletSource::Synthetic, Consistency::Unlabeled, "y");

    let cfg = StageConfig::default();
    println!("r_high {} keeps at most {} low next to 100 high", cfg.r_high, max_low_count(100, cfg.r_high));

    let d1 = compose_stage1(&collected)?;
    let d2 = compose_stage2(&collected, &cfg)?;
    println!("r_syn {} adds {} synthetic to D2", cfg.r_syn, synthetic_count(d2.entries.len(), cfg.r_syn));
    let d3 = compose_stage3(&d2, &synthetic, &cfg)?;
    for d in [&d1, &d2, &d3] {
        println!("{}: {} entries, ratios {:?}", d.stage, d.entries.len(), d.ratios);
    }

    let plan = emit_stage_plan(&d1, &d2, &d3, &cfg, DEFAULT_BASE_MODEL, DEFAULT_FINAL_TAG)?;
    println!("{}", serde_json::to_string_pretty(&plan)?);

    // Re-pointing a stage at the wrong parent is caught.
    let mut tampered = plan.clone();
    tampered.stages[2].init_model = "Q1".into();
    println!("tampered chain: {}", tampered.validate().unwrap_err());
    Ok(())
}
