//! Deterministic demo data: a small on-disk dataset with embeddings,
//! captions, an aesthetic head and benchmark results, plus an end-to-end run
//! over it. Used by the examples and the integration tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bench::{emit_report, generate_pairs, score_run, EvalPairSet, ResultRecord, Split};
use crate::curriculum::{
    compose_stage1, compose_stage2, compose_stage3, emit_stage_plan, write_plan, write_stage, StageConfig,
    DEFAULT_BASE_MODEL, DEFAULT_FINAL_TAG,
};
use crate::datamodel::{
    derive_seed, read_labels, write_file, write_manifest, write_ndjson, EmbeddingKind, EmbeddingVector, Label,
    ScoreTable, Triplet,
};
use crate::error::{Error, Result};
use crate::ingest::{attach_captions, load_captions, load_embeddings, scan_dataset, Caption, ClusterAssignment};
use crate::metrics::{Activation, AestheticHead, DenseLayer, MetricConfig};
use crate::review::ReviewState;
use crate::triplets::{apply_labels, build_collected, build_synthetic, content_map, read_assets, AssetRecord, MatchConfig, MatchMode};

/// Uniform draw in `[-1, 1)`.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| uniform(rng)).collect()
}

/// `base` plus uniform noise of amplitude `noise`.
pub fn perturb(rng: &mut ChaCha8Rng, base: &[f64], noise: f64) -> Vec<f64> {
    base.iter().map(|b| b + noise * uniform(rng)).collect()
}

/// A two-layer ReLU head whose outputs land roughly in 4..8.
pub fn random_head(input_dim: usize, hidden: usize, seed: u64) -> AestheticHead {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AestheticHead {
        normalize_input: true,
        layers: vec![
            DenseLayer {
                rows: hidden,
                cols: input_dim,
                weights: random_vector(&mut rng, hidden * input_dim),
                bias: random_vector(&mut rng, hidden).iter().map(|b| 0.5 + 0.5 * b).collect(),
                activation: Activation::Relu,
            },
            DenseLayer {
                rows: 1,
                cols: hidden,
                weights: random_vector(&mut rng, hidden).iter().map(|w| 0.3 * w).collect(),
                bias: vec![6.0],
                activation: Activation::None,
            },
        ],
    }
}

fn write_png(path: &Path, w: u32, h: u32, shade: u8) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    image::RgbImage::from_pixel(w, h, image::Rgb([shade, shade, shade]))
        .save(path)
        .map_err(|e| Error::ImageHeader {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub bench_styles: usize,
    pub bench_contents: usize,
    pub csd_dim: usize,
    pub clip_dim: usize,
    pub seed: u64,
}

impl Default for MiniSpec {
    fn default() -> Self {
        Self {
            clusters: 5,
            per_cluster: 4,
            bench_styles: 5,
            bench_contents: 4,
            csd_dim: 16,
            clip_dim: 12,
            seed: 0,
        }
    }
}

/// Paths of a dataset written by [`write_mini_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniDataset {
    pub root: PathBuf,
    pub clusters: PathBuf,
    pub assets: PathBuf,
    pub synthetic_assets: PathBuf,
    pub embeddings: Vec<PathBuf>,
    pub captions: PathBuf,
    pub head: PathBuf,
    pub styles: PathBuf,
    pub contents: PathBuf,
    /// Model name and its results map, in report order.
    pub results: Vec<(String, PathBuf)>,
}

/// Writes a dataset under `dir`:
///
/// * `targets/c{k}/t{i}.png` stylized targets in `spec.clusters` clusters
/// * `content/c{k}/src{i}.png` their content references
/// * `styles/bench/s{j}.png` and `content/bench/b{j}.png` benchmark inputs
/// * cluster index, asset maps, captions, three embedding sidecars, an
///   aesthetic head and results maps for two models.
pub fn write_mini_dataset(dir: &Path, spec: &MiniSpec) -> Result<MiniDataset> {
    let root = dir.join("dataset");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "fixtures/mini"));

    let mut assignments = Vec::new();
    let mut assets = Vec::new();
    let mut synthetic = Vec::new();
    let mut content_ids = Vec::new();
    for k in 0..spec.clusters {
        for i in 0..spec.per_cluster {
            let target = format!("c{k}/t{i}");
            let content = format!("c{k}/src{i}");
            let w = 32 + 8 * (i as u32 % 3);
            write_png(&root.join("targets").join(format!("{target}.png")), w, 24, 40 * k as u8)?;
            write_png(&root.join("content").join(format!("{content}.png")), w, 24, 200)?;
            assignments.push(ClusterAssignment {
                image_id: target.clone(),
                cluster_id: format!("style{k}"),
            });
            assets.push(AssetRecord {
                target_id: target.clone(),
                content_ref_id: content.clone(),
                generated_style_ref_id: None,
            });
            synthetic.push(AssetRecord {
                target_id: target.clone(),
                content_ref_id: format!("gen/{target}/content"),
                generated_style_ref_id: Some(format!("gen/{target}/style")),
            });
            content_ids.push(content);
        }
    }
    let styles: Vec<String> = (0..spec.bench_styles).map(|j| format!("bench/s{j}")).collect();
    let contents: Vec<String> = (0..spec.bench_contents).map(|j| format!("bench/b{j}")).collect();
    for s in &styles {
        write_png(&root.join("styles").join(format!("{s}.png")), 48, 48, 90)?;
    }
    for c in &contents {
        write_png(&root.join("content").join(format!("{c}.png")), 64, 48, 160)?;
        content_ids.push(c.clone());
    }

    let captions: Vec<Caption> = content_ids
        .iter()
        .map(|id| Caption {
            image_id: id.clone(),
            caption_id: format!("cap/{id}"),
            text: format!("A photograph of subject {id}."),
        })
        .collect();

    let mut csd = Vec::new();
    let mut clip_image = Vec::new();
    let mut clip_text = Vec::new();
    let mut style_vecs = BTreeMap::new();
    for s in &styles {
        let v = random_vector(&mut rng, spec.csd_dim);
        style_vecs.insert(s.clone(), v.clone());
        csd.push(EmbeddingVector::new(s.clone(), EmbeddingKind::Csd, v));
    }
    let mut text_vecs = BTreeMap::new();
    for c in &captions {
        let v = random_vector(&mut rng, spec.clip_dim);
        text_vecs.insert(c.image_id.clone(), v.clone());
        clip_text.push(EmbeddingVector::new(c.caption_id.clone(), EmbeddingKind::ClipText, v));
    }

    let pairs = generate_pairs(&styles, &contents, Split::Test)?;
    let models = [("faithful", 0.6, 0.5), ("drifting", 1.6, 1.2)];
    let mut results = Vec::new();
    for (model, style_noise, content_noise) in models {
        let mut records = Vec::new();
        for p in &pairs.pairs {
            let result_id = format!("{model}/{}", p.pair_id);
            csd.push(EmbeddingVector::new(
                result_id.clone(),
                EmbeddingKind::Csd,
                perturb(&mut rng, &style_vecs[&p.style], style_noise),
            ));
            clip_image.push(EmbeddingVector::new(
                result_id.clone(),
                EmbeddingKind::ClipImage,
                perturb(&mut rng, &text_vecs[&p.content], content_noise),
            ));
            records.push(ResultRecord {
                pair_id: p.pair_id.clone(),
                result_image_id: result_id,
            });
        }
        let path = dir.join(format!("results_{model}.ndjson"));
        write_ndjson(&path, &records)?;
        results.push((model.to_string(), path));
    }

    let data = MiniDataset {
        clusters: dir.join("clusters.ndjson"),
        assets: dir.join("assets.ndjson"),
        synthetic_assets: dir.join("synthetic_assets.ndjson"),
        embeddings: vec![
            dir.join("emb_csd.ndjson"),
            dir.join("emb_clip_image.ndjson"),
            dir.join("emb_clip_text.ndjson"),
        ],
        captions: dir.join("captions.ndjson"),
        head: dir.join("head.json"),
        styles: dir.join("styles.txt"),
        contents: dir.join("contents.txt"),
        results,
        root,
    };
    write_ndjson(&data.clusters, &assignments)?;
    write_ndjson(&data.assets, &assets)?;
    write_ndjson(&data.synthetic_assets, &synthetic)?;
    write_ndjson(&data.captions, &captions)?;
    for (path, vectors, extractor) in [
        (&data.embeddings[0], &csd, "csd-fixture"),
        (&data.embeddings[1], &clip_image, "clip-fixture"),
        (&data.embeddings[2], &clip_text, "clip-fixture"),
    ] {
        let mut text = json!({ "header": { "extractor": extractor, "seed": spec.seed } }).to_string();
        text.push('\n');
        text.push_str(&crate::datamodel::to_ndjson(vectors)?);
        write_file(path, text.as_bytes())?;
    }
    let head = random_head(spec.clip_dim, 8, derive_seed(spec.seed, "fixtures/head"));
    write_file(&data.head, serde_json::to_string_pretty(&head)?.as_bytes())?;
    write_file(&data.styles, format!("{}\n", styles.join("\n")).as_bytes())?;
    write_file(&data.contents, format!("{}\n", contents.join("\n")).as_bytes())?;
    Ok(data)
}

/// Curator decisions for a manifest sorted by id: every third triplet is
/// low, the rest high. The first few are first marked the other way and
/// then corrected, so the log carries relabels.
pub fn fixture_decisions(manifest: &[Triplet]) -> Vec<(String, Label, i64)> {
    let mut ids: Vec<&str> = manifest.iter().map(|t| t.triplet_id.as_str()).collect();
    ids.sort();
    let final_label = |i: usize| if i % 3 == 2 { Label::Low } else { Label::High };
    let flip = |l: Label| match l {
        Label::High => Label::Low,
        Label::Low => Label::High,
    };
    let mut out = Vec::new();
    for (i, id) in ids.iter().enumerate().take(6) {
        out.push((id.to_string(), flip(final_label(i)), 1_700_000_000 + i as i64));
    }
    for (i, id) in ids.iter().enumerate() {
        out.push((id.to_string(), final_label(i), 1_700_000_100 + i as i64));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutputs {
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
    pub collected: usize,
    pub synthetic: usize,
    pub stage_sizes: [usize; 3],
    pub pairs: usize,
}

/// Runs ingest, triplet building, labeling through the review service,
/// stage composition, benchmark scoring and the report into `out`.
/// A label log left in `out` by an earlier run is replaced.
pub fn run_mini_pipeline(data: &MiniDataset, out: &Path, seed: u64) -> Result<PipelineOutputs> {
    let mut files = Vec::new();

    let (catalog, _) = scan_dataset(&data.root, &data.clusters)?;
    load_embeddings(&data.embeddings, &BTreeMap::new())?;
    let (catalog, _) = attach_captions(catalog, &data.captions, None)?;
    let catalog_path = out.join("catalog.ndjson");
    catalog.save(&catalog_path)?;
    files.push(catalog_path);

    let pairwise = MatchConfig {
        seed,
        ..MatchConfig::default()
    };
    let collected = build_collected(&catalog, &content_map(&read_assets(&data.assets)?), &pairwise)?;
    let synthetic = build_synthetic(
        &catalog,
        &read_assets(&data.synthetic_assets)?,
        &MatchConfig {
            mode: MatchMode::Both,
            ..pairwise
        },
    )?;
    for (name, manifest) in [("collected.ndjson", &collected), ("synthetic.ndjson", &synthetic)] {
        let path = out.join(name);
        write_manifest(&path, manifest)?;
        files.push(path);
    }

    let log_path = out.join("labels.ndjson");
    if log_path.exists() {
        std::fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
    }
    {
        let review = ReviewState::new(collected.clone(), BTreeMap::new(), &log_path)?;
        for (i, (id, label, ts)) in fixture_decisions(&collected).into_iter().enumerate() {
            let curator = if i % 2 == 0 { "curator-a" } else { "curator-b" };
            review.submit_at(&id, label, curator, ts)?;
        }
    }
    files.push(log_path.clone());
    let labeled = apply_labels(&collected, &read_labels(&log_path)?).manifest;
    let labeled_path = out.join("collected_labeled.ndjson");
    write_manifest(&labeled_path, &labeled)?;
    files.push(labeled_path);

    let stage_cfg = StageConfig {
        seed,
        ..StageConfig::default()
    };
    let d1 = compose_stage1(&labeled)?;
    let d2 = compose_stage2(&labeled, &stage_cfg)?;
    let d3 = compose_stage3(&d2, &synthetic, &stage_cfg)?;
    let plan = emit_stage_plan(&d1, &d2, &d3, &stage_cfg, DEFAULT_BASE_MODEL, DEFAULT_FINAL_TAG)?;
    for (name, d) in [("d1.ndjson", &d1), ("d2.ndjson", &d2), ("d3.ndjson", &d3)] {
        let path = out.join(name);
        write_stage(&path, d)?;
        files.push(path);
    }
    let plan_path = out.join("plan.json");
    write_plan(&plan_path, &plan)?;
    files.push(plan_path);

    let read_ids = |p: &Path| -> Result<Vec<String>> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Ok(text.lines().filter(|l| !l.is_empty()).map(String::from).collect())
    };
    let pairs: EvalPairSet = generate_pairs(&read_ids(&data.styles)?, &read_ids(&data.contents)?, Split::Test)?;
    let pairs_path = out.join("pairs.ndjson");
    write_ndjson(&pairs_path, &pairs.pairs)?;
    files.push(pairs_path);

    let store = load_embeddings(&data.embeddings, &BTreeMap::new())?;
    let captions: BTreeMap<String, String> = load_captions(&data.captions)?
        .into_iter()
        .map(|c| (c.image_id, c.caption_id))
        .collect();
    let head = AestheticHead::load(&data.head)?;
    let metrics = MetricConfig::default();
    let mut tables: Vec<(String, ScoreTable)> = Vec::new();
    for (model, results_path) in &data.results {
        let results: BTreeMap<String, String> = crate::datamodel::read_ndjson::<ResultRecord>(results_path)?
            .into_iter()
            .map(|r| (r.pair_id, r.result_image_id))
            .collect();
        let table = score_run(&pairs, &results, &store, &captions, &head, &metrics)?;
        let path = out.join(format!("table_{model}.json"));
        write_file(&path, serde_json::to_string_pretty(&table)?.as_bytes())?;
        files.push(path);
        tables.push((model.clone(), table));
    }
    let report = emit_report(&tables, out)?;
    files.push(report.json);
    files.push(report.markdown);

    Ok(PipelineOutputs {
        files,
        collected: collected.len(),
        synthetic: synthetic.len(),
        stage_sizes: [d1.entries.len(), d2.entries.len(), d3.entries.len()],
        pairs: pairs.pairs.len(),
    })
}

/// Published four-column comparison (CSD, CPC@0.5, CPC@0.3:0.9,
/// aesthetic) as one-row score tables. Only aggregates are known, so each
/// table holds a single row whose CLIP score equals its CPC@0.5.
pub fn reference_tables() -> Vec<(String, ScoreTable)> {
    let rows = [
        ("baseline-a", 0.447, 0.194, 0.163, 5.881),
        ("baseline-b", 0.462, 0.243, 0.166, 5.843),
        ("baseline-c", 0.402, 0.193, 0.102, 6.149),
        ("ours", 0.577, 0.441, 0.304, 6.317),
    ];
    rows.iter()
        .map(|&(model, csd, cpc05, cpc_range, aesthetic)| {
            let row = crate::datamodel::ScoreRow {
                pair_id: format!("{model}/aggregate"),
                csd_score: csd,
                clip_score: cpc05,
                aesthetic,
                cpc_at_05: cpc05,
                cpc_range,
            };
            (model.to_string(), ScoreTable::from_rows(vec![row], MetricConfig::default()))
        })
        .collect()
}
