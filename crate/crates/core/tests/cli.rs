use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use stylecurate::datamodel::{read_manifest, write_ndjson, LabelRecord};
use stylecurate::fixtures::{fixture_decisions, write_mini_dataset, MiniDataset, MiniSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stylecurate"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> Value {
    let out = run(&[&["--json"], args].concat());
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("one JSON record on stdout")
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).expect("structured error")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The whole pipeline through the binary; returns the output directory.
fn pipeline(data: &MiniDataset, work: &Path) -> PathBuf {
    let out = work.join("out");
    let catalog = out.join("catalog.ndjson");
    let emb: Vec<&str> = data.embeddings.iter().map(|p| s(p)).collect();

    let mut ingest = vec!["ingest", "--root", s(&data.root), "--clusters", s(&data.clusters), "--captions", s(&data.captions), "--out", s(&catalog), "--embeddings"];
    ingest.extend(&emb);
    let summary = ok(&ingest);
    assert_eq!(summary["scan"]["clusters"], 5);
    assert_eq!(summary["captions"]["required"], 24);

    let collected = out.join("collected.ndjson");
    let synthetic = out.join("synthetic.ndjson");
    let built = ok(&["triplets", "build", "--source", "collected", "--catalog", s(&catalog), "--assets", s(&data.assets), "--out", s(&collected)]);
    assert_eq!(built["triplets"], 60);
    let built = ok(&["triplets", "build", "--source", "synthetic", "--mode", "both", "--catalog", s(&catalog), "--assets", s(&data.synthetic_assets), "--out", s(&synthetic)]);
    assert_eq!(built["triplets"], 80);
    ok(&["validate", "--manifest", s(&collected), "--catalog", s(&catalog)]);

    let labels = out.join("labels.ndjson");
    let records: Vec<LabelRecord> = fixture_decisions(&read_manifest(&collected).unwrap())
        .into_iter()
        .map(|(triplet_id, label, timestamp)| LabelRecord {
            triplet_id,
            label,
            curator: "fixture".into(),
            timestamp,
        })
        .collect();
    write_ndjson(&labels, &records).unwrap();
    let applied = ok(&["triplets", "apply-labels", "--manifest", s(&collected), "--labels", s(&labels), "--out", s(&out.join("labeled.ndjson"))]);
    assert_eq!(applied["counts"]["high"], 40);
    assert_eq!(applied["counts"]["low"], 20);

    let composed = ok(&["curriculum", "compose", "--collected", s(&collected), "--synthetic", s(&synthetic), "--labels", s(&labels), "--out", s(&out.join("stages"))]);
    assert_eq!(composed["d2"]["size"], 50);
    assert_eq!(composed["d3"]["size"], 55);

    let pairs = out.join("pairs.ndjson");
    let made = ok(&["bench", "pairs", "--styles", s(&data.styles), "--contents", s(&data.contents), "--out", s(&pairs)]);
    assert_eq!(made["pairs"], 20);
    let mut report = vec!["bench".to_string(), "report".into()];
    for (model, results) in &data.results {
        let table = out.join(format!("table_{model}.json"));
        let mut score = vec!["bench", "score", "--pairs", s(&pairs), "--results", s(results), "--captions", s(&data.captions), "--head", s(&data.head), "--out", s(&table), "--embeddings"];
        score.extend(&emb);
        assert_eq!(ok(&score)["rows"], 20);
        report.push("--table".into());
        report.push(format!("{model}={}", table.display()));
    }
    report.push("--out".into());
    report.push(out.join("report").display().to_string());
    let report: Vec<&str> = report.iter().map(String::as_str).collect();
    assert_eq!(ok(&report)["models"], 2);
    out
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn mini_pipeline_through_the_binary_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let data_a = write_mini_dataset(a.path(), &MiniSpec::default()).unwrap();
    let data_b = write_mini_dataset(b.path(), &MiniSpec::default()).unwrap();
    let fa = files_under(&pipeline(&data_a, a.path()));
    let fb = files_under(&pipeline(&data_b, b.path()));
    assert!(fa.len() >= 12, "{}", fa.len());
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        assert!(x == y, "{} differs between runs", name.display());
    }
    let md = String::from_utf8(fa.iter().find(|f| f.0.ends_with("report.md")).unwrap().1.clone()).unwrap();
    assert_eq!(md.lines().count(), 4);
}

#[test]
fn compose_without_labels_fails_on_stage_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_mini_dataset(dir.path(), &MiniSpec::default()).unwrap();
    let catalog = dir.path().join("catalog.ndjson");
    ok(&["ingest", "--root", s(&data.root), "--clusters", s(&data.clusters), "--out", s(&catalog)]);
    let collected = dir.path().join("c.ndjson");
    ok(&["triplets", "build", "--source", "collected", "--catalog", s(&catalog), "--assets", s(&data.assets), "--out", s(&collected)]);
    let out = run(&["curriculum", "compose", "--collected", s(&collected), "--synthetic", s(&collected), "--r-high", "0.8", "--out", s(&dir.path().join("st"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_record(&out);
    assert_eq!(err["kind"], "stage2_labels");
    assert!(err["message"].as_str().unwrap().contains("stage-2 requires curated labels"));
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["plan", "--content-w", "10", "--content-h", "10", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "usage");
    assert_eq!(run(&["teleport"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn plan_prints_one_structured_line() {
    let out = run(&["plan", "--content-w", "1024", "--content-h", "768"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("style_side: 768"), "{text}");
    let v = ok(&["plan", "--content-w", "2048", "--content-h", "1536", "--training"]);
    assert_eq!((v["train_w"].as_u64(), v["train_h"].as_u64()), (Some(1360), Some(1024)));
    let v = ok(&["plan", "--content-w", "8", "--content-h", "8", "--template", "style", "--template-arg", "ink"]);
    assert_eq!(v["prompt"], "Transfer Figure 1 into ink style.");
    let out = run(&["plan", "--content-w", "8", "--content-h", "8", "--template", "material"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["kind"], "missing_template_arg");
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_mini_dataset(dir.path(), &MiniSpec::default()).unwrap();
    let catalog = dir.path().join("catalog.ndjson");
    ok(&["ingest", "--root", s(&data.root), "--clusters", s(&data.clusters), "--out", s(&catalog)]);
    let good = dir.path().join("good.ndjson");
    ok(&["triplets", "build", "--source", "collected", "--catalog", s(&catalog), "--assets", s(&data.assets), "--out", s(&good)]);
    let v = ok(&["validate", "--manifest", s(&good)]);
    assert_eq!(v["valid"], true);

    let mut bad = read_manifest(&good).unwrap();
    bad[0].target = "nowhere/x".into();
    let bad_path = dir.path().join("bad.ndjson");
    stylecurate::datamodel::write_manifest(&bad_path, &bad).unwrap();
    let out = run(&["validate", "--manifest", s(&bad_path), "--catalog", s(&catalog)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("nowhere/x"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_mini_dataset(dir.path(), &MiniSpec::default()).unwrap();
    let cfg = dir.path().join("pipeline.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 5\n[paths]\nroot = {:?}\nclusters = {:?}\ncatalog = {:?}\nassets = {:?}\n[match]\nmax_pairs_per_cluster = 3\n",
            s(&data.root),
            s(&data.clusters),
            s(&dir.path().join("cat.ndjson")),
            s(&data.assets)
        ),
    )
    .unwrap();
    let c = s(&cfg);
    ok(&["--config", c, "ingest"]);
    let out = dir.path().join("m.ndjson");
    let v = ok(&["--config", c, "triplets", "build", "--source", "collected", "--out", s(&out)]);
    assert_eq!(v["triplets"], 15);
    assert_eq!(v["seed"], 5);
    let v = ok(&["--config", c, "--seed", "6", "triplets", "build", "--source", "collected", "--cap", "4", "--out", s(&out)]);
    assert_eq!(v["triplets"], 20);
    assert_eq!(v["seed"], 6);

    std::fs::write(&cfg, "[paths]\nrot = \"x\"\n").unwrap();
    let out = run(&["--config", c, "ingest"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["kind"], "parse");
}

#[test]
fn score_pair_prints_a_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("style.ndjson"), "{\"owner_id\":\"s\",\"kind\":\"csd\",\"dim\":2,\"values\":[1.0,0.0]}\n").unwrap();
    std::fs::write(
        d.join("result.ndjson"),
        "{\"header\":{\"extractor\":\"hand\"}}\n{\"owner_id\":\"r\",\"kind\":\"csd\",\"dim\":2,\"values\":[0.6,0.8]}\n{\"owner_id\":\"r\",\"kind\":\"clip_image\",\"dim\":2,\"values\":[1.0,0.0]}\n",
    )
    .unwrap();
    std::fs::write(d.join("text.ndjson"), "{\"owner_id\":\"cap\",\"kind\":\"clip-text\",\"dim\":2,\"values\":[0.31,0.9507365567]}\n").unwrap();
    std::fs::write(
        d.join("head.json"),
        r#"{"normalize_input":false,"layers":[{"rows":1,"cols":2,"weights":[2.0,1.0],"bias":[3.0],"activation":"none"}]}"#,
    )
    .unwrap();
    let row = ok(&[
        "score", "pair", "--style-emb", s(&d.join("style.ndjson")), "--result-emb", s(&d.join("result.ndjson")),
        "--text-emb", s(&d.join("text.ndjson")), "--head", s(&d.join("head.json")),
    ]);
    assert!((row["csd_score"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((row["clip_score"].as_f64().unwrap() - 0.31).abs() < 1e-9);
    assert!((row["cpc_at_05"].as_f64().unwrap() - 0.31).abs() < 1e-9);
    // csd 0.6 passes 0.3..0.6: four of seven thresholds.
    assert!((row["cpc_range"].as_f64().unwrap() - 0.31 * 4.0 / 7.0).abs() < 1e-9);
    assert!((row["aesthetic"].as_f64().unwrap() - 5.0).abs() < 1e-12);
}
