//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error. Errors
//! are written to stderr as one JSON object `{"error", "kind", "message"}`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{emit_report, ensure_disjoint, generate_pairs, score_run, EvalPair, EvalPairSet, ResultRecord, Split};
use crate::config::PipelineConfig;
use crate::curriculum::{
    compose_stage1, compose_stage2, compose_stage3, emit_stage_plan, write_plan, write_stage, DEFAULT_BASE_MODEL,
    DEFAULT_FINAL_TAG,
};
use crate::datamodel::{
    read_labels, read_manifest, read_ndjson, validate_manifest, write_file, write_manifest, write_ndjson, EmbeddingKind,
    EmbeddingVector, Triplet, TripletSource,
};
use crate::error::Error;
use crate::ingest::{attach_captions, load_captions, load_embeddings, scan_dataset, EmbeddingStore, ImageCatalog};
use crate::metrics::{aesthetic_score, clip_score, cpc_at, cpc_range, csd_score, AestheticHead};
use crate::planner::{
    plan_inference_resolution, plan_training_resolution, render_prompt, PromptTemplate, DEFAULT_MIN_EDGE,
    DEFAULT_MULTIPLE,
};
use crate::review::{serve, ReviewConfig};
use crate::triplets::{apply_labels, build_collected, build_synthetic, content_map, read_assets, MatchMode};

#[derive(Debug, Parser)]
#[command(name = "stylecurate", version, about = "Style-transfer triplet curation and evaluation")]
pub struct Cli {
    /// Pipeline config file (TOML); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for matching and stage sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print structured JSON records instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a dataset, check embeddings and captions, write the image catalog.
    Ingest(IngestArgs),
    #[command(subcommand)]
    Triplets(TripletsCommand),
    #[command(subcommand)]
    Curriculum(CurriculumCommand),
    /// Inference or training resolution for a content image.
    Plan(PlanArgs),
    #[command(subcommand)]
    Score(ScoreCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
    #[command(subcommand)]
    Review(ReviewCommand),
    /// Check a triplet manifest for dangling references and duplicates.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub embeddings: Vec<PathBuf>,
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// Catalog output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TripletsCommand {
    /// Build a collected or synthetic triplet manifest.
    Build(BuildArgs),
    /// Fold a label log into a manifest.
    ApplyLabels(ApplyLabelsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SourceArg {
    Collected,
    Synthetic,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_enum)]
    pub source: SourceArg,
    /// Synthetic matching: pairwise, generated_style_ref or both.
    #[arg(long)]
    pub mode: Option<MatchMode>,
    /// Maximum pairs per cluster.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyLabelsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CurriculumCommand {
    /// Compose D1, D2 and D3 and write the three-stage plan.
    Compose(ComposeArgs),
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Collected manifest.
    #[arg(long)]
    pub collected: PathBuf,
    /// Synthetic manifest.
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub r_high: Option<f64>,
    #[arg(long)]
    pub r_syn: Option<f64>,
    #[arg(long)]
    pub base_model: Option<String>,
    #[arg(long)]
    pub final_tag: Option<String>,
    /// Output directory for d1/d2/d3 and plan.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub content_w: u32,
    #[arg(long)]
    pub content_h: u32,
    /// Plan the training resolution instead of the inference one.
    #[arg(long)]
    pub training: bool,
    #[arg(long, default_value_t = DEFAULT_MIN_EDGE)]
    pub min_edge: u32,
    #[arg(long, default_value_t = DEFAULT_MULTIPLE)]
    pub multiple: u32,
    /// Include the rendered instruction prompt.
    #[arg(long)]
    pub template: Option<PromptTemplate>,
    #[arg(long)]
    pub template_arg: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ScoreCommand {
    /// Score one generated result from three embedding sidecars.
    Pair(ScorePairArgs),
}

#[derive(Debug, Args)]
pub struct ScorePairArgs {
    /// Sidecar with the style reference's csd vector.
    #[arg(long)]
    pub style_emb: PathBuf,
    /// Sidecar with the result's csd and clip_image vectors.
    #[arg(long)]
    pub result_emb: PathBuf,
    /// Sidecar with the caption's clip_text vector.
    #[arg(long)]
    pub text_emb: PathBuf,
    #[arg(long)]
    pub head: Option<PathBuf>,
    #[arg(long, default_value = "pair")]
    pub pair_id: String,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Cross every style with every content image.
    Pairs(BenchPairsArgs),
    /// Score a model's results over a pair set.
    Score(BenchScoreArgs),
    /// Render score tables into report.json and report.md.
    Report(BenchReportArgs),
}

#[derive(Debug, Args)]
pub struct BenchPairsArgs {
    /// Text file with one style image id per line.
    #[arg(long)]
    pub styles: PathBuf,
    /// Text file with one content image id per line.
    #[arg(long)]
    pub contents: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Existing pair set of the other split that must not overlap.
    #[arg(long)]
    pub disjoint_from: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchScoreArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, num_args = 1..)]
    pub embeddings: Vec<PathBuf>,
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[arg(long)]
    pub head: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchReportArgs {
    /// `model=path/to/table.json`, repeated, in row order.
    #[arg(long = "table", required = true)]
    pub tables: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Serve the labeling API and UI.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory with the built review UI.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Image catalog to check references against.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = std::result::Result<Value, Failure>;

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> std::result::Result<PathBuf, Failure> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::Usage(format!("--{name} is required (or set paths.{name} in the config)")))
}

fn out_path(flag: Option<PathBuf>, cfg: &PipelineConfig, file: &str) -> std::result::Result<PathBuf, Failure> {
    flag.or_else(|| cfg.paths.out.as_ref().map(|d| d.join(file)))
        .ok_or_else(|| Failure::Usage("--out is required (or set paths.out in the config)".into()))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn print_value(value: &Value, json_mode: bool) {
    if json_mode {
        println!("{value}");
        return;
    }
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::String(s) => println!("{k}: {s}"),
                    other => println!("{k}: {other}"),
                }
            }
        }
        other => println!("{other}"),
    }
}

fn load_config(cli: &Cli) -> std::result::Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn cmd_ingest(args: IngestArgs, cfg: &PipelineConfig) -> Outcome {
    let root = required(args.root, &cfg.paths.root, "root")?;
    let clusters = required(args.clusters, &cfg.paths.clusters, "clusters")?;
    let out = match args.out.or_else(|| cfg.paths.catalog.clone()) {
        Some(p) => p,
        None => out_path(None, cfg, "catalog.ndjson")?,
    };
    let (mut catalog, scan) = scan_dataset(&root, &clusters)?;
    for w in &scan.warnings {
        log::warn!("{w}");
    }
    let mut summary = json!({ "catalog": out.display().to_string(), "scan": to_value(&scan) });

    let embeddings = if args.embeddings.is_empty() {
        cfg.paths.embeddings.clone()
    } else {
        args.embeddings
    };
    if !embeddings.is_empty() {
        let store = load_embeddings(&embeddings, &BTreeMap::new())?;
        let dims: BTreeMap<&str, usize> = EmbeddingKind::ALL
            .iter()
            .filter_map(|k| store.dim(*k).map(|d| (k.as_str(), d)))
            .collect();
        summary["embeddings"] = json!({ "vectors": store.len(), "dims": dims });
    }
    if let Some(captions) = args.captions.or_else(|| cfg.paths.captions.clone()) {
        let (captioned, report) = attach_captions(catalog, &captions, None)?;
        catalog = captioned;
        summary["captions"] = to_value(&report);
    }
    catalog.save(&out)?;
    Ok(summary)
}

fn cmd_build(args: BuildArgs, cfg: &PipelineConfig) -> Outcome {
    let catalog_path = required(args.catalog, &cfg.paths.catalog, "catalog")?;
    let assets_path = required(args.assets, &cfg.paths.assets, "assets")?;
    let file = match args.source {
        SourceArg::Collected => "collected.ndjson",
        SourceArg::Synthetic => "synthetic.ndjson",
    };
    let out = match args.out {
        Some(p) => p,
        None => match &cfg.paths.manifests {
            Some(dir) => dir.join(file),
            None => out_path(None, cfg, file)?,
        },
    };
    let mut mc = cfg.matching.clone();
    if let Some(mode) = args.mode {
        mc.mode = mode;
    }
    if args.cap.is_some() {
        mc.max_pairs_per_cluster = args.cap;
    }
    mc.validate()?;
    let catalog = ImageCatalog::load(&catalog_path)?;
    let assets = read_assets(&assets_path)?;
    let manifest = match args.source {
        SourceArg::Collected => build_collected(&catalog, &content_map(&assets), &mc)?,
        SourceArg::Synthetic => build_synthetic(&catalog, &assets, &mc)?,
    };
    write_manifest(&out, &manifest)?;
    Ok(json!({
        "manifest": out.display().to_string(),
        "triplets": manifest.len(),
        "clusters": catalog.clusters.len(),
        "seed": mc.seed,
    }))
}

fn cmd_apply_labels(args: ApplyLabelsArgs, cfg: &PipelineConfig) -> Outcome {
    let labels_path = required(args.labels, &cfg.paths.labels, "labels")?;
    let manifest = read_manifest(&args.manifest)?;
    let labels = read_labels(&labels_path)?;
    let outcome = apply_labels(&manifest, &labels);
    write_manifest(&args.out, &outcome.manifest)?;
    Ok(json!({
        "manifest": args.out.display().to_string(),
        "counts": to_value(&outcome.counts),
        "unknown": outcome.unknown,
    }))
}

fn cmd_compose(args: ComposeArgs, cfg: &PipelineConfig) -> Outcome {
    let mut sc = cfg.stage.clone();
    if let Some(r) = args.r_high {
        sc.r_high = r;
    }
    if let Some(r) = args.r_syn {
        sc.r_syn = r;
    }
    sc.validate()?;
    let out_dir = required(args.out, &cfg.paths.out, "out")?;

    let mut collected = read_manifest(&args.collected)?;
    if let Some(labels) = args.labels.or_else(|| cfg.paths.labels.clone()) {
        collected = apply_labels(&collected, &read_labels(&labels)?).manifest;
    }
    let synthetic = read_manifest(&args.synthetic)?;

    let d1 = compose_stage1(&collected)?;
    let d2 = compose_stage2(&collected, &sc)?;
    let d3 = compose_stage3(&d2, &synthetic, &sc)?;
    let plan = emit_stage_plan(
        &d1,
        &d2,
        &d3,
        &sc,
        args.base_model.as_deref().unwrap_or(DEFAULT_BASE_MODEL),
        args.final_tag.as_deref().unwrap_or(DEFAULT_FINAL_TAG),
    )?;
    write_stage(&out_dir.join("d1.ndjson"), &d1)?;
    write_stage(&out_dir.join("d2.ndjson"), &d2)?;
    write_stage(&out_dir.join("d3.ndjson"), &d3)?;
    write_plan(&out_dir.join("plan.json"), &plan)?;
    Ok(json!({
        "out": out_dir.display().to_string(),
        "d1": { "size": d1.entries.len(), "ratios": d1.ratios },
        "d2": { "size": d2.entries.len(), "ratios": d2.ratios },
        "d3": { "size": d3.entries.len(), "ratios": d3.ratios },
        "final_model": plan.final_model(),
    }))
}

fn cmd_plan(args: PlanArgs) -> Outcome {
    let mut value = if args.training {
        let (w, h) = plan_training_resolution(args.content_w, args.content_h, args.min_edge, args.multiple)?;
        json!({ "train_w": w, "train_h": h, "min_edge": args.min_edge, "multiple": args.multiple })
    } else {
        to_value(&plan_inference_resolution(args.content_w, args.content_h)?)
    };
    if let Some(t) = args.template {
        value["prompt"] = Value::String(render_prompt(t, args.template_arg.as_deref())?);
    }
    Ok(value)
}

fn single(path: &Path, kind: EmbeddingKind) -> std::result::Result<(EmbeddingStore, EmbeddingVector), Failure> {
    let store = load_embeddings(&[path.to_path_buf()], &BTreeMap::new())?;
    let found: Vec<&EmbeddingVector> = store.iter().filter(|v| v.kind == kind).collect();
    match found.as_slice() {
        [one] => {
            let v = (*one).clone();
            Ok((store, v))
        }
        _ => Err(Failure::Domain(Error::InvalidConfig(format!(
            "{} must hold exactly one {kind} vector, found {}",
            path.display(),
            found.len()
        )))),
    }
}

fn cmd_score_pair(args: ScorePairArgs, cfg: &PipelineConfig) -> Outcome {
    cfg.metrics.validate()?;
    let head_path = required(args.head, &cfg.paths.head, "head")?;
    let head = AestheticHead::load(&head_path)?;
    let (_, style) = single(&args.style_emb, EmbeddingKind::Csd)?;
    let (results, result_csd) = single(&args.result_emb, EmbeddingKind::Csd)?;
    let result_clip = results
        .get(&result_csd.owner_id, EmbeddingKind::ClipImage)
        .cloned()
        .ok_or_else(|| {
            Failure::Domain(Error::MissingEmbeddings {
                pair_ids: vec![args.pair_id.clone()],
            })
        })?;
    let (_, text) = single(&args.text_emb, EmbeddingKind::ClipText)?;
    let csd = csd_score(&style, &result_csd)?;
    let clip = clip_score(&text, &result_clip, &cfg.metrics)?;
    let row = crate::datamodel::ScoreRow {
        pair_id: args.pair_id,
        csd_score: csd,
        clip_score: clip,
        aesthetic: aesthetic_score(&result_clip, &head)?,
        cpc_at_05: cpc_at(clip, csd, cfg.metrics.cpc_threshold),
        cpc_range: cpc_range(clip, csd, &cfg.metrics)?,
    };
    Ok(to_value(&row))
}

fn read_id_list(path: &Path) -> std::result::Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn cmd_bench_pairs(args: BenchPairsArgs) -> Outcome {
    let set = generate_pairs(&read_id_list(&args.styles)?, &read_id_list(&args.contents)?, args.split)?;
    if let Some(other) = &args.disjoint_from {
        let other = EvalPairSet::from_pairs(read_ndjson::<EvalPair>(other)?)?;
        ensure_disjoint(&set, &other)?;
    }
    write_ndjson(&args.out, &set.pairs)?;
    Ok(json!({
        "pairs": set.pairs.len(),
        "styles": set.styles().len(),
        "contents": set.contents().len(),
        "out": args.out.display().to_string(),
    }))
}

fn cmd_bench_score(args: BenchScoreArgs, cfg: &PipelineConfig) -> Outcome {
    let head = AestheticHead::load(&required(args.head, &cfg.paths.head, "head")?)?;
    let captions_path = required(args.captions, &cfg.paths.captions, "captions")?;
    let embeddings = if args.embeddings.is_empty() {
        cfg.paths.embeddings.clone()
    } else {
        args.embeddings
    };
    if embeddings.is_empty() {
        return Err(Failure::Usage("--embeddings is required".into()));
    }
    let pairs = EvalPairSet::from_pairs(read_ndjson::<EvalPair>(&args.pairs)?)?;
    let results: BTreeMap<String, String> = read_ndjson::<ResultRecord>(&args.results)?
        .into_iter()
        .map(|r| (r.pair_id, r.result_image_id))
        .collect();
    let captions: BTreeMap<String, String> = load_captions(&captions_path)?
        .into_iter()
        .map(|c| (c.image_id, c.caption_id))
        .collect();
    let store = load_embeddings(&embeddings, &BTreeMap::new())?;
    let table = score_run(&pairs, &results, &store, &captions, &head, &cfg.metrics)?;
    let mut text = serde_json::to_string_pretty(&table).map_err(Error::from)?;
    text.push('\n');
    write_file(&args.out, text.as_bytes())?;
    Ok(json!({ "rows": table.rows.len(), "aggregates": to_value(&table.aggregates), "out": args.out.display().to_string() }))
}

fn cmd_bench_report(args: BenchReportArgs, cfg: &PipelineConfig) -> Outcome {
    let out = required(args.out, &cfg.paths.out, "out")?;
    let mut tables = Vec::new();
    for spec in &args.tables {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--table expects model=path, got {spec:?}")))?;
        let path = Path::new(path);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        tables.push((name.to_string(), table));
    }
    let files = emit_report(&tables, &out)?;
    Ok(json!({
        "models": tables.len(),
        "json": files.json.display().to_string(),
        "markdown": files.markdown.display().to_string(),
    }))
}

fn cmd_review_serve(args: ServeArgs, cfg: &PipelineConfig) -> Outcome {
    let images = required(args.images, &cfg.paths.root, "images")?;
    let log_path = required(args.log, &cfg.paths.labels, "log")?;
    let mut rc = ReviewConfig::new(args.manifest, images, log_path, args.port);
    rc.host = args.host;
    rc.ui_dir = args.ui;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(serve(&rc))?;
    Ok(json!({ "stopped": true }))
}

fn cmd_validate(args: ValidateArgs) -> Outcome {
    let manifest: Vec<Triplet> = read_manifest(&args.manifest)?;
    let catalog = match &args.catalog {
        Some(p) => Some(ImageCatalog::load(p)?.ids()),
        None => None,
    };
    let report = validate_manifest(&manifest, catalog.as_ref());
    let collected = manifest.iter().filter(|t| t.source == TripletSource::Collected).count();
    let value = json!({
        "triplets": report.triplets,
        "collected": collected,
        "synthetic": manifest.len() - collected,
        "valid": report.is_valid(),
        "violations": to_value(&report.violations),
    });
    if report.is_valid() {
        Ok(value)
    } else {
        Err(Failure::Domain(Error::InvalidConfig(format!(
            "manifest has {} violation(s): {}",
            report.violations.len(),
            report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
        ))))
    }
}

fn dispatch(cli: Cli) -> Outcome {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a, &cfg),
        Command::Triplets(TripletsCommand::Build(a)) => cmd_build(a, &cfg),
        Command::Triplets(TripletsCommand::ApplyLabels(a)) => cmd_apply_labels(a, &cfg),
        Command::Curriculum(CurriculumCommand::Compose(a)) => cmd_compose(a, &cfg),
        Command::Plan(a) => cmd_plan(a),
        Command::Score(ScoreCommand::Pair(a)) => cmd_score_pair(a, &cfg),
        Command::Bench(BenchCommand::Pairs(a)) => cmd_bench_pairs(a),
        Command::Bench(BenchCommand::Score(a)) => cmd_bench_score(a, &cfg),
        Command::Bench(BenchCommand::Report(a)) => cmd_bench_report(a, &cfg),
        Command::Review(ReviewCommand::Serve(a)) => cmd_review_serve(a, &cfg),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": true, "kind": kind, "message": message }));
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report_error("usage", e.to_string().trim());
            return 2;
        }
    };
    let json_mode = cli.json;
    match dispatch(cli) {
        Ok(value) => {
            print_value(&value, json_mode);
            0
        }
        Err(Failure::Usage(message)) => {
            report_error("usage", &message);
            2
        }
        Err(Failure::Domain(e)) => {
            report_error(e.kind(), &e.to_string());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run(["stylecurate", "plan", "--content-w", "4", "--content-h", "3", "--bogus"]), 2);
        assert_eq!(run(["stylecurate", "frobnicate"]), 2);
    }

    #[test]
    fn plan_succeeds() {
        assert_eq!(run(["stylecurate", "plan", "--content-w", "1024", "--content-h", "768"]), 0);
        assert_eq!(run(["stylecurate", "plan", "--content-w", "0", "--content-h", "768"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["stylecurate", "--help"]), 0);
    }

    #[test]
    fn missing_required_path_is_usage() {
        assert_eq!(run(["stylecurate", "ingest"]), 2);
    }
}
