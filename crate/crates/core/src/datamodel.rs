//! Shared record types and the line-delimited JSON formats they travel in.
//!
//! Every file the pipeline reads or writes (manifests, embedding sidecars,
//! label logs, asset maps, caption files) holds one JSON object per line.
//! Field order is fixed by the struct definitions and floats are written in
//! shortest round-trip form, so serializing a parsed file reproduces it byte
//! for byte.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::MetricConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    StylizedTarget,
    ContentRef,
    StyleRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: String,
    /// Path relative to the dataset root, `/`-separated.
    pub path: String,
    pub width: u32,
    pub height: u32,
    pub kind: ImageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_cluster: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Csd,
    #[serde(alias = "clip-image")]
    ClipImage,
    #[serde(alias = "clip-text")]
    ClipText,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 3] = [
        EmbeddingKind::Csd,
        EmbeddingKind::ClipImage,
        EmbeddingKind::ClipText,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Csd => "csd",
            EmbeddingKind::ClipImage => "clip_image",
            EmbeddingKind::ClipText => "clip_text",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EmbeddingKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csd" => Ok(EmbeddingKind::Csd),
            "clip_image" | "clip-image" => Ok(EmbeddingKind::ClipImage),
            "clip_text" | "clip-text" => Ok(EmbeddingKind::ClipText),
            other => Err(format!("unknown embedding kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingVector {
    pub owner_id: String,
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(owner_id: impl Into<String>, kind: EmbeddingKind, values: Vec<f64>) -> Self {
        Self {
            owner_id: owner_id.into(),
            kind,
            dim: values.len(),
            values,
        }
    }

    /// Checks the length and finiteness invariants.
    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::EmptyVector);
        }
        if self.values.len() != self.dim {
            return Err(Error::VectorDims {
                left: self.dim,
                right: self.values.len(),
            });
        }
        if let Some(index) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                owner_id: self.owner_id.clone(),
                kind: self.kind,
                index,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletSource {
    Collected,
    Synthetic,
}

impl TripletSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TripletSource::Collected => "collected",
            TripletSource::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    High,
    Low,
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    High,
    Low,
}

impl From<Label> for Consistency {
    fn from(label: Label) -> Self {
        match label {
            Label::High => Consistency::High,
            Label::Low => Consistency::Low,
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "high" => Ok(Label::High),
            "low" => Ok(Label::Low),
            other => Err(format!("label must be \"high\" or \"low\", got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triplet {
    pub triplet_id: String,
    pub style_ref: String,
    pub content_ref: String,
    pub target: String,
    pub source: TripletSource,
    pub style_cluster: String,
    pub consistency: Consistency,
    pub prompt: String,
}

impl Triplet {
    /// Builds an unlabeled triplet whose id is derived from its image roles.
    pub fn new(
        style_ref: impl Into<String>,
        content_ref: impl Into<String>,
        target: impl Into<String>,
        source: TripletSource,
        style_cluster: impl Into<String>,
        prompt: impl Into<String>,
    ) -> Self {
        let style_ref = style_ref.into();
        let content_ref = content_ref.into();
        let target = target.into();
        Self {
            triplet_id: triplet_id(&style_ref, &content_ref, &target, source),
            style_ref,
            content_ref,
            target,
            source,
            style_cluster: style_cluster.into(),
            consistency: Consistency::Unlabeled,
            prompt: prompt.into(),
        }
    }
}

/// Stable hash of `parts`, rendered as `prefix` plus 16 hex digits.
pub fn stable_id(prefix: &str, parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    format!("{prefix}{}", hex::encode(&digest[..8]))
}

pub fn triplet_id(style_ref: &str, content_ref: &str, target: &str, source: TripletSource) -> String {
    stable_id("t", &[style_ref, content_ref, target, source.as_str()])
}

/// Derives an independent 64-bit seed for a named sub-stream.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub triplet_id: String,
    pub label: Label,
    pub curator: String,
    /// UTC seconds.
    pub timestamp: i64,
}

/// Folds a label log into the winning label per triplet.
///
/// Later timestamps win; equal timestamps fall back to log order.
pub fn resolve_labels<'a>(labels: impl IntoIterator<Item = &'a LabelRecord>) -> BTreeMap<String, (Label, i64)> {
    let mut latest: BTreeMap<String, (Label, i64)> = BTreeMap::new();
    for record in labels {
        match latest.get(&record.triplet_id) {
            Some(&(_, ts)) if record.timestamp < ts => {}
            _ => {
                latest.insert(record.triplet_id.clone(), (record.label, record.timestamp));
            }
        }
    }
    latest
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    D1,
    D2,
    D3,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::D1 => "D1",
            Stage::D2 => "D2",
            Stage::D3 => "D3",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDataset {
    pub stage: Stage,
    pub entries: Vec<String>,
    pub seed: u64,
    /// Achieved fractions, rounded to 6 decimals.
    pub ratios: BTreeMap<String, f64>,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub stage: Stage,
    pub size: usize,
    /// sha256 over the entry ids, newline separated.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStage {
    pub name: String,
    pub dataset: DatasetRef,
    pub init_model: String,
    pub output_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumPlan {
    pub base_model: String,
    pub stages: Vec<PlanStage>,
    pub hyper: BTreeMap<String, serde_json::Value>,
}

impl CurriculumPlan {
    /// Checks the Q1 → Q2 → Q3 chain.
    pub fn validate(&self) -> Result<()> {
        let names: Vec<&str> = self.stages.iter().map(|s| s.name.as_str()).collect();
        if names != ["Q1", "Q2", "Q3"] {
            return Err(Error::InvalidPlan(format!(
                "expected stages [Q1, Q2, Q3], found {names:?}"
            )));
        }
        let mut expected = self.base_model.as_str();
        for stage in &self.stages {
            if stage.init_model != expected {
                return Err(Error::BrokenChain {
                    stage: stage.name.clone(),
                    expected: expected.to_string(),
                    found: stage.init_model.clone(),
                });
            }
            expected = stage.output_model.as_str();
        }
        Ok(())
    }

    pub fn final_model(&self) -> Option<&str> {
        self.stages.last().map(|s| s.output_model.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRow {
    pub pair_id: String,
    pub csd_score: f64,
    pub clip_score: f64,
    pub aesthetic: f64,
    pub cpc_at_05: f64,
    pub cpc_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreAggregates {
    pub csd_score: f64,
    pub clip_score: f64,
    pub aesthetic: f64,
    pub cpc_at_05: f64,
    pub cpc_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub aggregates: ScoreAggregates,
    pub config: MetricConfig,
}

impl ScoreTable {
    /// Builds a table whose aggregates are the column means of `rows`.
    pub fn from_rows(rows: Vec<ScoreRow>, config: MetricConfig) -> Self {
        let n = rows.len().max(1) as f64;
        let mean = |f: fn(&ScoreRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let aggregates = ScoreAggregates {
            csd_score: mean(|r| r.csd_score),
            clip_score: mean(|r| r.clip_score),
            aesthetic: mean(|r| r.aesthetic),
            cpc_at_05: mean(|r| r.cpc_at_05),
            cpc_range: mean(|r| r.cpc_range),
        };
        Self {
            rows,
            aggregates,
            config,
        }
    }
}

pub(crate) fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    DanglingRef {
        triplet_id: String,
        field: String,
        id: String,
    },
    StyleRefEqualsTarget {
        triplet_id: String,
    },
    DuplicateTripletId {
        triplet_id: String,
    },
}

impl Violation {
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::DanglingRef { .. } => "dangling_ref",
            Violation::StyleRefEqualsTarget { .. } => "style_ref_equals_target",
            Violation::DuplicateTripletId { .. } => "duplicate_triplet_id",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingRef { triplet_id, field, id } => {
                write!(f, "dangling_ref: {triplet_id}.{field} = {id:?} not in catalog")
            }
            Violation::StyleRefEqualsTarget { triplet_id } => {
                write!(f, "style_ref_equals_target: {triplet_id}")
            }
            Violation::DuplicateTripletId { triplet_id } => {
                write!(f, "duplicate_triplet_id: {triplet_id}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub triplets: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every dangling id, self-referencing style/target pair and
/// duplicate triplet id in `manifest`. Dangling refs are only checked when a
/// catalog is given.
pub fn validate_manifest(manifest: &[Triplet], catalog: Option<&BTreeSet<String>>) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for t in manifest {
        if !seen.insert(t.triplet_id.as_str()) {
            violations.push(Violation::DuplicateTripletId {
                triplet_id: t.triplet_id.clone(),
            });
        }
        if t.style_ref == t.target {
            violations.push(Violation::StyleRefEqualsTarget {
                triplet_id: t.triplet_id.clone(),
            });
        }
        if let Some(catalog) = catalog {
            for (field, id) in [
                ("style_ref", &t.style_ref),
                ("content_ref", &t.content_ref),
                ("target", &t.target),
            ] {
                if !catalog.contains(id) {
                    violations.push(Violation::DanglingRef {
                        triplet_id: t.triplet_id.clone(),
                        field: field.to_string(),
                        id: id.clone(),
                    });
                }
            }
        }
    }
    ValidationReport {
        triplets: manifest.len(),
        violations,
    }
}

/// Parses line-delimited JSON. Blank lines are skipped; `origin` is used in
/// error messages.
pub fn parse_ndjson<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ndjson(&text, path)
}

pub fn to_ndjson<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_ndjson<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let text = to_ndjson(items)?;
    write_file(path, text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<Triplet>> {
    read_ndjson(path)
}

pub fn write_manifest(path: &Path, manifest: &[Triplet]) -> Result<()> {
    write_ndjson(path, manifest)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    read_ndjson(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seed_matches_reference_digest() {
        // sha256(7u64 little-endian ++ "stage2/low"), first 8 bytes little-endian.
        assert_eq!(derive_seed(7, "stage2/low"), 5065763735392309726);
    }

    fn sample_manifest() -> (Vec<Triplet>, BTreeSet<String>) {
        let manifest = vec![
            Triplet::new("a", "ca", "b", TripletSource::Collected, "c0", "p"),
            Triplet::new("b", "cb", "a", TripletSource::Collected, "c0", "p"),
            Triplet::new("a", "cc", "c", TripletSource::Collected, "c0", "p"),
        ];
        let catalog = ["a", "b", "c", "ca", "cb", "cc"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        (manifest, catalog)
    }

    #[test]
    fn well_formed_manifest_has_no_violations() {
        let (m, c) = sample_manifest();
        let report = validate_manifest(&m, Some(&c));
        assert!(report.is_valid(), "{:?}", report.violations);
        assert_eq!(report.triplets, 3);
    }

    #[test]
    fn style_ref_equal_to_target_is_one_violation() {
        let (mut m, mut c) = sample_manifest();
        c.insert("z".into());
        m[0] = Triplet::new("z", "ca", "z", TripletSource::Collected, "c0", "p");
        let report = validate_manifest(&m, Some(&c));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].rule(), "style_ref_equals_target");
    }

    #[test]
    fn deleting_a_catalog_entry_yields_a_dangling_ref() {
        let (mut m, mut c) = sample_manifest();
        c.insert("x9".into());
        m.push(Triplet::new("a", "x9", "b", TripletSource::Synthetic, "c0", "p"));
        assert!(validate_manifest(&m, Some(&c)).is_valid());

        c.remove("x9");
        let report = validate_manifest(&m, Some(&c));
        assert_eq!(
            report.violations,
            vec![Violation::DanglingRef {
                triplet_id: m[3].triplet_id.clone(),
                field: "content_ref".into(),
                id: "x9".into(),
            }]
        );
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let (mut m, c) = sample_manifest();
        m.push(m[1].clone());
        let report = validate_manifest(&m, Some(&c));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].rule(), "duplicate_triplet_id");
    }

    #[test]
    fn triplet_ids_depend_on_every_role() {
        let base = triplet_id("a", "b", "c", TripletSource::Collected);
        assert_eq!(base, triplet_id("a", "b", "c", TripletSource::Collected));
        assert_ne!(base, triplet_id("b", "a", "c", TripletSource::Collected));
        assert_ne!(base, triplet_id("a", "b", "c", TripletSource::Synthetic));
        assert_ne!(triplet_id("ab", "c", "d", TripletSource::Collected), triplet_id("a", "bc", "d", TripletSource::Collected));
        assert_eq!(base.len(), 17);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "{\"triplet_id\":\"t1\"}\n";
        let err = parse_ndjson::<Triplet>(text, Path::new("m.ndjson")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        let (m, _) = sample_manifest();
        let mut text = to_ndjson(&m).unwrap();
        text.push_str("not json\n");
        match parse_ndjson::<Triplet>(&text, Path::new("m.ndjson")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreadable_manifest_is_an_io_error() {
        let err = read_manifest(Path::new("/nonexistent/manifest.ndjson")).unwrap_err();
        assert_eq!(err.kind(), "io");
    }

    #[test]
    fn unknown_embedding_kind_is_rejected() {
        let line = r#"{"owner_id":"a","kind":"dino","dim":1,"values":[1.0]}"#;
        assert!(serde_json::from_str::<EmbeddingVector>(line).is_err());
    }

    #[test]
    fn resolve_labels_breaks_ties_by_order() {
        let rec = |label, ts| LabelRecord {
            triplet_id: "t1".into(),
            label,
            curator: "c".into(),
            timestamp: ts,
        };
        let log = [rec(Label::High, 5), rec(Label::Low, 9)];
        assert_eq!(resolve_labels(&log)["t1"].0, Label::Low);
        let log = [rec(Label::Low, 9), rec(Label::High, 5)];
        assert_eq!(resolve_labels(&log)["t1"].0, Label::Low);
        let log = [rec(Label::High, 7), rec(Label::Low, 7)];
        assert_eq!(resolve_labels(&log)["t1"].0, Label::Low);
    }

    #[test]
    fn plan_validation_rejects_wrong_stage_names() {
        let dataset = DatasetRef {
            stage: Stage::D1,
            size: 0,
            digest: String::new(),
        };
        let stage = |name: &str, init: &str, out: &str| PlanStage {
            name: name.into(),
            dataset: dataset.clone(),
            init_model: init.into(),
            output_model: out.into(),
        };
        let plan = CurriculumPlan {
            base_model: "base".into(),
            stages: vec![stage("Q1", "base", "Q1"), stage("Q2", "Q1", "Q2")],
            hyper: BTreeMap::new(),
        };
        assert_eq!(plan.validate().unwrap_err().kind(), "invalid_plan");
    }
}
