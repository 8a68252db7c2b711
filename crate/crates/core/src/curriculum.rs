//! Three-stage curriculum: dataset composition and the Q1 → Q2 → Q3 plan.
//!
//! * D1 is every collected triplet, labeled or not.
//! * D2 keeps every high-consistency triplet and fills in just enough
//!   low-consistency ones that the high fraction stays at or above `r_high`.
//!   Unlabeled triplets are dropped.
//! * D3 is all of D2 plus the largest number of synthetic triplets whose
//!   share stays at or below `r_syn`.
//!
//! Fractions are compared in `f64`, so a configured `0.8` is met by exactly
//! 100 of 125. Subsamples are seeded permutation prefixes (see
//! [`crate::sampling`]), which makes a larger `r_syn` extend, never reshuffle,
//! the synthetic pick.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::datamodel::{
    derive_seed, round6, write_file, Consistency, CurriculumPlan, DatasetRef, PlanStage, Stage, StageDataset, Triplet,
};
use crate::error::{Error, Result};
use crate::sampling::{sample_prefix, SAMPLER_ID};

pub const DEFAULT_BASE_MODEL: &str = "Qwen-Image-Edit";
pub const DEFAULT_FINAL_TAG: &str = "QwenStyle-V1";

pub fn default_hyper() -> BTreeMap<String, Value> {
    let mut hyper = BTreeMap::new();
    hyper.insert("lora_rank".into(), json!(32));
    hyper.insert("learning_rate".into(), json!(1e-4));
    hyper.insert("batch_size_per_device".into(), json!(1));
    hyper.insert("min_edge".into(), json!(1024));
    hyper.insert("device_count".into(), json!(4));
    hyper
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    /// Minimum share of high-consistency triplets in D2.
    pub r_high: f64,
    /// Maximum share of synthetic triplets in D3.
    pub r_syn: f64,
    pub seed: u64,
    pub hyper: BTreeMap<String, Value>,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            r_high: 0.8,
            r_syn: 0.1,
            seed: 0,
            hyper: default_hyper(),
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_high > 0.0 && self.r_high <= 1.0) {
            return Err(Error::InvalidConfig(format!("r_high {} not in (0, 1]", self.r_high)));
        }
        if !(self.r_syn >= 0.0 && self.r_syn < 1.0) {
            return Err(Error::InvalidConfig(format!("r_syn {} not in [0, 1)", self.r_syn)));
        }
        Ok(())
    }

    fn snapshot(&self) -> Value {
        json!({ "r_high": self.r_high, "r_syn": self.r_syn, "seed": self.seed })
    }
}

fn fraction(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

/// Largest `x` with `high / (high + x) >= r_high`.
pub fn max_low_count(high: usize, r_high: f64) -> usize {
    if high == 0 || r_high >= 1.0 {
        return 0;
    }
    let estimate = (high as f64 * (1.0 - r_high) / r_high).floor();
    let mut x = if estimate.is_finite() && estimate < 1e15 {
        estimate as usize
    } else {
        usize::MAX / 4
    };
    while fraction(high, high + x + 1) >= r_high {
        x += 1;
    }
    while x > 0 && fraction(high, high + x) < r_high {
        x -= 1;
    }
    x
}

/// Largest `s` with `s / (base + s) <= r_syn`.
pub fn synthetic_count(base: usize, r_syn: f64) -> usize {
    if base == 0 || r_syn <= 0.0 {
        return 0;
    }
    let estimate = (r_syn * base as f64 / (1.0 - r_syn)).floor();
    let mut s = estimate.max(0.0) as usize;
    while fraction(s + 1, base + s + 1) <= r_syn {
        s += 1;
    }
    while s > 0 && fraction(s, base + s) > r_syn {
        s -= 1;
    }
    s
}

fn unique_sorted_ids(manifest: &[Triplet]) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    for t in manifest {
        if !seen.insert(t.triplet_id.clone()) {
            return Err(Error::DuplicateTriplet(t.triplet_id.clone()));
        }
    }
    Ok(seen.into_iter().collect())
}

fn ratios(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), round6(*v))).collect()
}

/// D1: the natural distribution, all collected triplets sorted by id.
pub fn compose_stage1(collected: &[Triplet]) -> Result<StageDataset> {
    if collected.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let entries = unique_sorted_ids(collected)?;
    let n = entries.len();
    let count = |c: Consistency| collected.iter().filter(|t| t.consistency == c).count();
    let (high, low, unlabeled) = (count(Consistency::High), count(Consistency::Low), count(Consistency::Unlabeled));
    let mut provenance = BTreeMap::new();
    provenance.insert("source".into(), json!("collected"));
    provenance.insert("source_size".into(), json!(n));
    Ok(StageDataset {
        stage: Stage::D1,
        entries,
        seed: 0,
        ratios: ratios(&[
            ("high", fraction(high, n)),
            ("low", fraction(low, n)),
            ("unlabeled", fraction(unlabeled, n)),
        ]),
        provenance,
    })
}

/// D2: all high-consistency triplets plus a seeded sample of low ones.
pub fn compose_stage2(labeled: &[Triplet], cfg: &StageConfig) -> Result<StageDataset> {
    cfg.validate()?;
    unique_sorted_ids(labeled)?;
    let pick = |c: Consistency| -> Vec<String> {
        let mut ids: Vec<String> = labeled
            .iter()
            .filter(|t| t.consistency == c)
            .map(|t| t.triplet_id.clone())
            .collect();
        ids.sort();
        ids
    };
    let highs = pick(Consistency::High);
    let lows = pick(Consistency::Low);
    if highs.is_empty() {
        return Err(Error::NoCuratedLabels);
    }
    let n_low = max_low_count(highs.len(), cfg.r_high).min(lows.len());
    let chosen_lows = sample_prefix(&lows, n_low, derive_seed(cfg.seed, "stage2/low"));

    let mut entries: Vec<String> = highs.iter().cloned().chain(chosen_lows).collect();
    entries.sort();
    let n = entries.len();

    let mut provenance = BTreeMap::new();
    provenance.insert("config".into(), cfg.snapshot());
    provenance.insert("sampler".into(), json!(SAMPLER_ID));
    provenance.insert("high_available".into(), json!(highs.len()));
    provenance.insert("low_available".into(), json!(lows.len()));
    provenance.insert(
        "unlabeled_excluded".into(),
        json!(labeled.len() - highs.len() - lows.len()),
    );
    Ok(StageDataset {
        stage: Stage::D2,
        entries,
        seed: cfg.seed,
        ratios: ratios(&[
            ("high_fraction", fraction(highs.len(), n)),
            ("low_fraction", fraction(n_low, n)),
        ]),
        provenance,
    })
}

/// D3: all of D2 plus a seeded sample of synthetic triplets.
pub fn compose_stage3(d2: &StageDataset, synthetic: &[Triplet], cfg: &StageConfig) -> Result<StageDataset> {
    cfg.validate()?;
    if d2.entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let base: BTreeSet<&str> = d2.entries.iter().map(String::as_str).collect();
    if base.len() != d2.entries.len() {
        return Err(Error::InvalidPlan("D2 contains duplicate triplet ids".into()));
    }
    let candidates: Vec<String> = synthetic
        .iter()
        .map(|t| t.triplet_id.as_str())
        .filter(|id| !base.contains(id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    let required = synthetic_count(d2.entries.len(), cfg.r_syn);
    if required > candidates.len() {
        return Err(Error::InsufficientSynthetic {
            required,
            available: candidates.len(),
        });
    }
    let chosen = sample_prefix(&candidates, required, derive_seed(cfg.seed, "stage3/synthetic"));
    let mut entries: Vec<String> = d2.entries.iter().cloned().chain(chosen).collect();
    entries.sort();
    let n = entries.len();

    let mut provenance = BTreeMap::new();
    provenance.insert("config".into(), cfg.snapshot());
    provenance.insert("sampler".into(), json!(SAMPLER_ID));
    provenance.insert("d2_size".into(), json!(d2.entries.len()));
    provenance.insert("synthetic_available".into(), json!(candidates.len()));
    Ok(StageDataset {
        stage: Stage::D3,
        entries,
        seed: cfg.seed,
        ratios: ratios(&[
            ("synthetic_fraction", fraction(required, n)),
            ("d2_fraction", fraction(d2.entries.len(), n)),
        ]),
        provenance,
    })
}

pub fn dataset_ref(d: &StageDataset) -> DatasetRef {
    let mut hasher = Sha256::new();
    for id in &d.entries {
        hasher.update(id.as_bytes());
        hasher.update(b"\n");
    }
    DatasetRef {
        stage: d.stage,
        size: d.entries.len(),
        digest: hex::encode(hasher.finalize()),
    }
}

/// Chains base → Q1 (on D1) → Q2 (on D2) → Q3 (on D3), Q3 tagged `final_tag`.
pub fn emit_stage_plan(
    d1: &StageDataset,
    d2: &StageDataset,
    d3: &StageDataset,
    cfg: &StageConfig,
    base_model: &str,
    final_tag: &str,
) -> Result<CurriculumPlan> {
    for (d, expected) in [(d1, Stage::D1), (d2, Stage::D2), (d3, Stage::D3)] {
        if d.stage != expected {
            return Err(Error::InvalidPlan(format!("expected a {expected} dataset, got {}", d.stage)));
        }
    }
    let stage = |name: &str, d: &StageDataset, init: &str, out: &str| PlanStage {
        name: name.into(),
        dataset: dataset_ref(d),
        init_model: init.into(),
        output_model: out.into(),
    };
    let plan = CurriculumPlan {
        base_model: base_model.to_string(),
        stages: vec![
            stage("Q1", d1, base_model, "Q1"),
            stage("Q2", d2, "Q1", "Q2"),
            stage("Q3", d3, "Q2", final_tag),
        ],
        hyper: cfg.hyper.clone(),
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageHeader {
    stage: Stage,
    size: usize,
    seed: u64,
    ratios: BTreeMap<String, f64>,
    provenance: BTreeMap<String, Value>,
}

/// Header line followed by one triplet id per line.
pub fn stage_to_string(d: &StageDataset) -> Result<String> {
    let header = StageHeader {
        stage: d.stage,
        size: d.entries.len(),
        seed: d.seed,
        ratios: d.ratios.clone(),
        provenance: d.provenance.clone(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for id in &d.entries {
        out.push_str(id);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_stage(path: &Path, d: &StageDataset) -> Result<()> {
    write_file(path, stage_to_string(d)?.as_bytes())
}

pub fn read_stage(path: &Path) -> Result<StageDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header: StageHeader = serde_json::from_str(lines.next().unwrap_or_default())
        .map_err(|e| parse_err(1, e.to_string()))?;
    let entries: Vec<String> = lines.filter(|l| !l.trim().is_empty()).map(String::from).collect();
    if entries.len() != header.size {
        return Err(parse_err(1, format!("header says {} entries, found {}", header.size, entries.len())));
    }
    Ok(StageDataset {
        stage: header.stage,
        entries,
        seed: header.seed,
        ratios: header.ratios,
        provenance: header.provenance,
    })
}

pub fn write_plan(path: &Path, plan: &CurriculumPlan) -> Result<()> {
    let mut text = serde_json::to_string_pretty(plan)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_plan(path: &Path) -> Result<CurriculumPlan> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let plan: CurriculumPlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    plan.validate()?;
    Ok(plan)
}
