//! Benchmark pairing, per-pair scoring and report emission.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::{stable_id, write_file, EmbeddingKind, ScoreAggregates, ScoreRow, ScoreTable};
use crate::error::{Error, Result};
use crate::ingest::EmbeddingStore;
use crate::metrics::{aesthetic_score, clip_score, cpc_at, cpc_range_on, csd_score, AestheticHead, MetricConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Test,
    Validation,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "test" => Ok(Split::Test),
            "validation" => Ok(Split::Validation),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPair {
    pub pair_id: String,
    pub style: String,
    pub content: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPairSet {
    pub split: Split,
    pub pairs: Vec<EvalPair>,
}

pub fn pair_id(style: &str, content: &str) -> String {
    stable_id("p", &[style, content])
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Full style × content cross product, style-major.
pub fn generate_pairs(styles: &[String], contents: &[String], split: Split) -> Result<EvalPairSet> {
    if styles.is_empty() || contents.is_empty() {
        return Err(Error::InvalidConfig("pairing needs at least one style and one content".into()));
    }
    check_unique(styles)?;
    check_unique(contents)?;
    let pairs = styles
        .iter()
        .flat_map(|s| {
            contents.iter().map(move |c| EvalPair {
                pair_id: pair_id(s, c),
                style: s.clone(),
                content: c.clone(),
                split,
            })
        })
        .collect();
    Ok(EvalPairSet { split, pairs })
}

impl EvalPairSet {
    pub fn styles(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.style.as_str()).collect()
    }

    pub fn contents(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.content.as_str()).collect()
    }

    pub fn from_pairs(pairs: Vec<EvalPair>) -> Result<Self> {
        let split = pairs
            .first()
            .map(|p| p.split)
            .ok_or_else(|| Error::InvalidConfig("empty pair set".into()))?;
        let mut seen = BTreeSet::new();
        for p in &pairs {
            if p.split != split {
                return Err(Error::InvalidConfig("pair set mixes splits".into()));
            }
            if p.pair_id != pair_id(&p.style, &p.content) {
                return Err(Error::InvalidConfig(format!("pair id {} does not match its ids", p.pair_id)));
            }
            if !seen.insert(p.pair_id.clone()) {
                return Err(Error::DuplicateId(p.pair_id.clone()));
            }
        }
        Ok(Self { split, pairs })
    }
}

/// Test and validation sets must not share style or content references.
pub fn ensure_disjoint(test: &EvalPairSet, validation: &EvalPairSet) -> Result<()> {
    if let Some(s) = test.styles().intersection(&validation.styles()).next() {
        return Err(Error::SplitOverlap(s.to_string()));
    }
    if let Some(c) = test.contents().intersection(&validation.contents()).next() {
        return Err(Error::SplitOverlap(c.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub pair_id: String,
    pub result_image_id: String,
}

/// Scores every pair. Any pair lacking a result, an embedding or a caption
/// aborts the run; all such pairs are listed.
pub fn score_run(
    pairs: &EvalPairSet,
    results: &BTreeMap<String, String>,
    store: &EmbeddingStore,
    captions: &BTreeMap<String, String>,
    head: &AestheticHead,
    cfg: &MetricConfig,
) -> Result<ScoreTable> {
    cfg.validate()?;
    head.validate()?;
    let grid = cfg.thresholds()?;

    let mut uncovered = Vec::new();
    let mut inputs = Vec::with_capacity(pairs.pairs.len());
    for p in &pairs.pairs {
        let result = results.get(&p.pair_id);
        let caption = captions.get(&p.content);
        let found = (|| {
            let result = result?;
            Some((
                store.get(&p.style, EmbeddingKind::Csd)?,
                store.get(result, EmbeddingKind::Csd)?,
                store.get(result, EmbeddingKind::ClipImage)?,
                store.get(caption?, EmbeddingKind::ClipText)?,
            ))
        })();
        match found {
            Some(vectors) => inputs.push((p, vectors)),
            None => uncovered.push(p.pair_id.clone()),
        }
    }
    if !uncovered.is_empty() {
        return Err(Error::MissingEmbeddings { pair_ids: uncovered });
    }

    let mut rows = Vec::with_capacity(inputs.len());
    for (p, (style_csd, result_csd, result_clip, text)) in inputs {
        let csd = csd_score(style_csd, result_csd)?;
        let clip = clip_score(text, result_clip, cfg)?;
        rows.push(ScoreRow {
            pair_id: p.pair_id.clone(),
            csd_score: csd,
            clip_score: clip,
            aesthetic: aesthetic_score(result_clip, head)?,
            cpc_at_05: cpc_at(clip, csd, cfg.cpc_threshold),
            cpc_range: cpc_range_on(clip, csd, &grid),
        });
    }
    Ok(ScoreTable::from_rows(rows, cfg.clone()))
}

type Column = (&'static str, fn(&ScoreAggregates) -> f64);

const COLUMNS: [Column; 4] = [
    ("Style Similarity CSD Score ↑", |a| a.csd_score),
    ("Content Preservation CPC Score@0.5 ↑", |a| a.cpc_at_05),
    ("Content Preservation CPC Score@0.3:0.9 ↑", |a| a.cpc_range),
    ("Aesthetic Score ↑", |a| a.aesthetic),
];

/// For each of the four report columns, the indices of the models holding
/// the maximum (all of them on ties).
pub fn best_per_column(tables: &[(String, ScoreTable)]) -> Vec<Vec<usize>> {
    COLUMNS
        .iter()
        .map(|(_, get)| {
            let best = tables
                .iter()
                .map(|(_, t)| get(&t.aggregates))
                .fold(f64::NEG_INFINITY, f64::max);
            tables
                .iter()
                .enumerate()
                .filter(|(_, (_, t))| get(&t.aggregates) == best)
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct ReportModel<'a> {
    model: &'a str,
    table: &'a ScoreTable,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    columns: Vec<&'static str>,
    models: Vec<ReportModel<'a>>,
    best: BTreeMap<&'static str, Vec<&'a str>>,
}

pub fn render_markdown(tables: &[(String, ScoreTable)]) -> String {
    let best = best_per_column(tables);
    let mut out = String::new();
    out.push_str("| Model |");
    for (name, _) in COLUMNS {
        let _ = write!(out, " {name} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(COLUMNS.len()));
    out.push('\n');
    for (i, (model, table)) in tables.iter().enumerate() {
        let _ = write!(out, "| {model} |");
        for (c, (_, get)) in COLUMNS.iter().enumerate() {
            let v = format!("{:.3}", get(&table.aggregates));
            if best[c].contains(&i) {
                let _ = write!(out, " **{v}** |");
            } else {
                let _ = write!(out, " {v} |");
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_json(tables: &[(String, ScoreTable)]) -> Result<String> {
    let best = best_per_column(tables);
    let doc = ReportDoc {
        columns: COLUMNS.iter().map(|(n, _)| *n).collect(),
        models: tables
            .iter()
            .map(|(model, table)| ReportModel { model, table })
            .collect(),
        best: COLUMNS
            .iter()
            .zip(&best)
            .map(|((name, _), idx)| (*name, idx.iter().map(|&i| tables[i].0.as_str()).collect()))
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub markdown: PathBuf,
}

/// Writes `report.json` (rows, aggregates, config) and `report.md` (one line
/// per model, best value per column in bold).
pub fn emit_report(tables: &[(String, ScoreTable)], out_dir: &Path) -> Result<ReportFiles> {
    if tables.is_empty() {
        return Err(Error::EmptyReport);
    }
    let files = ReportFiles {
        json: out_dir.join("report.json"),
        markdown: out_dir.join("report.md"),
    };
    write_file(&files.json, render_json(tables)?.as_bytes())?;
    write_file(&files.markdown, render_markdown(tables).as_bytes())?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::EmbeddingVector;
    use crate::metrics::{Activation, DenseLayer};

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn pair_counts() {
        assert_eq!(generate_pairs(&ids("s", 50), &ids("c", 40), Split::Test).unwrap().pairs.len(), 2000);
        assert_eq!(generate_pairs(&ids("s", 10), &ids("c", 10), Split::Validation).unwrap().pairs.len(), 100);
        let one = generate_pairs(&ids("s", 1), &ids("c", 1), Split::Test).unwrap();
        assert_eq!(one.pairs[0].pair_id, pair_id("s0", "c0"));
    }

    #[test]
    fn pairs_are_style_major() {
        let set = generate_pairs(&ids("s", 2), &ids("c", 3), Split::Test).unwrap();
        let order: Vec<_> = set.pairs.iter().map(|p| (p.style.as_str(), p.content.as_str())).collect();
        assert_eq!(order, vec![("s0", "c0"), ("s0", "c1"), ("s0", "c2"), ("s1", "c0"), ("s1", "c1"), ("s1", "c2")]);
    }

    #[test]
    fn duplicate_and_overlap_errors() {
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(generate_pairs(&dup, &ids("c", 1), Split::Test), Err(Error::DuplicateId(_))));
        let test = generate_pairs(&ids("s", 3), &ids("c", 3), Split::Test).unwrap();
        let val = generate_pairs(&ids("v", 2), &ids("c", 1), Split::Validation).unwrap();
        assert!(matches!(ensure_disjoint(&test, &val), Err(Error::SplitOverlap(_))));
        let val = generate_pairs(&ids("v", 2), &ids("w", 2), Split::Validation).unwrap();
        ensure_disjoint(&test, &val).unwrap();
    }

    fn identity_head(dim: usize) -> AestheticHead {
        AestheticHead {
            normalize_input: false,
            layers: vec![DenseLayer {
                rows: 1,
                cols: dim,
                weights: vec![1.0; dim],
                bias: vec![0.0],
                activation: Activation::None,
            }],
        }
    }

    #[test]
    fn identical_style_and_result_give_unit_csd() {
        let pairs = generate_pairs(&ids("s", 1), &ids("c", 1), Split::Test).unwrap();
        let pid = pairs.pairs[0].pair_id.clone();
        let mut store = EmbeddingStore::new();
        store.insert(EmbeddingVector::new("s0", EmbeddingKind::Csd, vec![0.3, 0.4])).unwrap();
        store.insert(EmbeddingVector::new("r0", EmbeddingKind::Csd, vec![0.3, 0.4])).unwrap();
        store.insert(EmbeddingVector::new("r0", EmbeddingKind::ClipImage, vec![1.0, 0.0])).unwrap();
        store.insert(EmbeddingVector::new("cap0", EmbeddingKind::ClipText, vec![1.0, 1.0])).unwrap();
        let results = BTreeMap::from([(pid, "r0".to_string())]);
        let captions = BTreeMap::from([("c0".to_string(), "cap0".to_string())]);
        let table = score_run(&pairs, &results, &store, &captions, &identity_head(2), &MetricConfig::default()).unwrap();
        assert_eq!(table.rows[0].csd_score, 1.0);
        assert!((table.rows[0].clip_score - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(table.rows[0].cpc_at_05, table.rows[0].clip_score);
        assert_eq!(table.rows[0].aesthetic, 1.0);
    }

    #[test]
    fn missing_embeddings_list_every_pair() {
        let pairs = generate_pairs(&ids("s", 2), &ids("c", 2), Split::Test).unwrap();
        let err = score_run(
            &pairs,
            &BTreeMap::new(),
            &EmbeddingStore::new(),
            &BTreeMap::new(),
            &identity_head(2),
            &MetricConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::MissingEmbeddings { pair_ids } => assert_eq!(pair_ids.len(), 4),
            e => panic!("{e:?}"),
        }
    }

    fn table(csd: f64, cpc: f64) -> ScoreTable {
        ScoreTable::from_rows(
            vec![ScoreRow {
                pair_id: "p".into(),
                csd_score: csd,
                clip_score: cpc,
                aesthetic: 5.0,
                cpc_at_05: cpc,
                cpc_range: cpc,
            }],
            MetricConfig::default(),
        )
    }

    #[test]
    fn aggregate_of_two_rows() {
        let mut t = table(0.5, 0.4);
        t.rows.push(ScoreRow {
            pair_id: "q".into(),
            csd_score: 0.3,
            clip_score: 0.3,
            aesthetic: 5.0,
            cpc_at_05: 0.0,
            cpc_range: 0.0,
        });
        let t = ScoreTable::from_rows(t.rows, MetricConfig::default());
        assert!((t.aggregates.cpc_at_05 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn best_marking_and_ties() {
        let tables = vec![("ours".to_string(), table(0.577, 0.4)), ("other".to_string(), table(0.447, 0.4))];
        let best = best_per_column(&tables);
        assert_eq!(best[0], vec![0]);
        assert_eq!(best[1], vec![0, 1]);
        let md = render_markdown(&tables);
        assert!(md.contains("| ours | **0.577** |"));
        assert!(md.contains("| other | 0.447 |"));
        assert_eq!(md.lines().count(), 4);
    }

    #[test]
    fn report_requires_a_table() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(&[], dir.path()), Err(Error::EmptyReport)));
        let files = emit_report(&[("m".into(), table(0.5, 0.2))], dir.path()).unwrap();
        let md = std::fs::read_to_string(files.markdown).unwrap();
        assert_eq!(md.lines().count(), 3);
        assert_eq!(md.lines().next().unwrap().matches('|').count(), 6);
    }
}
