use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use lfsgg_cli::{cmd_evaluate, cmd_match, cmd_retrieve, cmd_sweep_b, exit_code, run, Cli, Command};
use lfsgg_core::metrics::EvalReport;

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_lfsgg"))
}

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("lfsgg").chain(args.iter().copied())).unwrap()
}

struct Corpus {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Corpus {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("cfg.json"), config).unwrap();
        let c = Self { _dir: dir, root };
        run(parse(&[
            "synth",
            &c.p("cfg.json"),
            "--out-gt",
            &c.p("gt.jsonl"),
            "--out-pred",
            &c.p("pred.jsonl"),
            "--out-mapping",
            &c.p("map.jsonl"),
            "--out-vocab",
            &c.p("vocab.json"),
        ]))
        .unwrap();
        c
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }
}

fn evaluate(args: &[&str]) -> EvalReport {
    let Command::Evaluate(a) = parse(args).command else { unreachable!() };
    cmd_evaluate(&a).unwrap()
}

#[test]
fn identical_files_recall_one_with_default_ks() {
    let c = Corpus::new(r#"{"n_images": 20, "quintuples_per_image": [4, 20]}"#);
    let out = c.p("report.json");
    let report = evaluate(&["evaluate", &c.p("gt.jsonl"), &c.p("gt.jsonl"), "--out", &out]);
    assert_eq!(report.aggregate.recall.keys().copied().collect::<Vec<_>>(), vec![20, 50, 100]);
    assert!(report.aggregate.recall.values().all(|&r| r == 1.0));
    // Re-reading the report gives the same numbers.
    let back: EvalReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn corrupted_line_is_named_in_the_diagnostic() {
    let c = Corpus::new(r#"{"n_images": 20}"#);
    let text = std::fs::read_to_string(c.p("gt.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[16] = r#"{"image_id": "img00016", "triplets": [ oops"#;
    std::fs::write(c.p("bad.jsonl"), lines.join("\n")).unwrap();

    let out = bin().args(["evaluate", &c.p("bad.jsonl"), &c.p("pred.jsonl")]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 17"), "{stderr}");
}

#[test]
fn unknown_label_and_image_exit_codes() {
    let c = Corpus::new(r#"{"n_images": 5}"#);
    let text = std::fs::read_to_string(c.p("pred.jsonl")).unwrap().replacen(r#""pred":"p"#, r#""pred":"zz"#, 1);
    std::fs::write(c.p("label.jsonl"), text).unwrap();
    let out = bin()
        .args(["evaluate", &c.p("gt.jsonl"), &c.p("label.jsonl"), "--vocab", &c.p("vocab.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let Command::Match(a) = parse(&["match", &c.p("gt.jsonl"), &c.p("pred.jsonl"), "--image-id", "missing"]).command else {
        unreachable!()
    };
    let err = cmd_match(&a, &mut Vec::new()).unwrap_err();
    assert_eq!(exit_code(&err), 2);
}

#[test]
fn stray_prediction_is_rejected() {
    let c = Corpus::new(r#"{"n_images": 5}"#);
    let mut text = std::fs::read_to_string(c.p("pred.jsonl")).unwrap();
    text.push_str("{\"image_id\":\"elsewhere\",\"triplets\":[]}\n");
    std::fs::write(c.p("stray.jsonl"), text).unwrap();
    let out = bin().args(["evaluate", &c.p("gt.jsonl"), &c.p("stray.jsonl")]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elsewhere"));
}

#[test]
fn match_prints_identity_for_identical_graphs() {
    let c = Corpus::new(r#"{"n_images": 3}"#);
    for exhaustive in [false, true] {
        let mut args = vec!["match", &c.p("gt.jsonl"), &c.p("gt.jsonl"), "--image-id", "img00001"]
            .into_iter()
            .map(str::to_owned)
            .collect::<Vec<_>>();
        if exhaustive {
            args.push("--exhaustive".into());
        }
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let Command::Match(a) = parse(&args).command else { unreachable!() };
        let mut out = Vec::new();
        cmd_match(&a, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("recall 1.000000"), "{text}");
        for line in text.lines().filter(|l| l.contains("->")) {
            let (g, p) = line.trim().split_once(" -> ").unwrap();
            assert_eq!(g, p);
        }
    }
}

#[test]
fn exhaustive_match_reports_class_counts_when_too_large() {
    let dir = tempfile::tempdir().unwrap();
    let triplets: Vec<String> = (0..12)
        .map(|i| format!(r#"{{"sub":{{"cls":"a","idx":{i}}},"pred":"r","obj":{{"cls":"b","idx":{i}}}}}"#))
        .collect();
    let line = format!(r#"{{"image_id":"x","triplets":[{}]}}"#, triplets.join(","));
    let path = dir.path().join("big.jsonl");
    std::fs::write(&path, line).unwrap();
    let p = path.to_string_lossy();
    let out = bin().args(["match", &p, &p, "--image-id", "x", "--exhaustive"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("12/12"));
}

#[test]
fn sweep_recall_is_monotone() {
    let c = Corpus::new(r#"{"n_images": 40, "edge_drop": 0.3, "edge_add": 0.2, "n_classes": 4}"#);
    let Command::SweepB(a) = parse(&["sweep-b", &c.p("gt.jsonl"), &c.p("pred.jsonl"), "--out", &c.p("sweep.json")]).command
    else {
        unreachable!()
    };
    let mut table = Vec::new();
    let rows = cmd_sweep_b(&a, &mut table).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[0].recall <= w[1].recall));
    assert_eq!(String::from_utf8(table).unwrap().lines().count(), 7);
}

#[test]
fn sweep_on_single_image_equals_per_image_value() {
    let c = Corpus::new(r#"{"n_images": 1, "edge_drop": 0.3}"#);
    let Command::SweepB(a) = parse(&["sweep-b", &c.p("gt.jsonl"), &c.p("pred.jsonl"), "--b-list", "3"]).command else {
        unreachable!()
    };
    let rows = cmd_sweep_b(&a, &mut Vec::new()).unwrap();
    let report = evaluate(&["evaluate", &c.p("gt.jsonl"), &c.p("pred.jsonl"), "--k", "20"]);
    assert_eq!(rows[0].recall, report.per_image[0].recall[&20]);
}

#[test]
fn synth_is_byte_identical_per_seed_and_clean_corpus_scores_one() {
    let cfg = r#"{"seed": 5, "n_images": 30, "quintuples_per_image": [4, 20]}"#;
    let a = Corpus::new(cfg);
    let b = Corpus::new(cfg);
    for f in ["gt.jsonl", "pred.jsonl", "map.jsonl", "vocab.json"] {
        assert_eq!(std::fs::read(a.p(f)).unwrap(), std::fs::read(b.p(f)).unwrap(), "{f}");
    }
    let report = evaluate(&["evaluate", &a.p("gt.jsonl"), &a.p("pred.jsonl"), "--vocab", &a.p("vocab.json")]);
    assert!(report.aggregate.recall.values().all(|&r| r == 1.0));
    let mappings = std::fs::read_to_string(a.p("map.jsonl")).unwrap();
    assert_eq!(mappings.lines().count(), 30);
    for line in mappings.lines() {
        let m: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(m["recall"], 1.0);
    }
}

#[test]
fn synth_demo_config_is_fast() {
    let start = std::time::Instant::now();
    let c = Corpus::new(r#"{"n_images": 200, "edge_drop": 0.2, "edge_add": 0.1}"#);
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let lines = std::fs::read_to_string(c.p("gt.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 200);
}

fn codec(args: &[&str]) -> (bool, String) {
    let out = bin().arg("codec").args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn codec_round_trip_and_truncation() {
    let c = Corpus::new(r#"{"n_images": 25, "quintuples_per_image": [4, 20]}"#);
    let vocab = c.p("vocab.json");
    assert!(codec(&["encode", &c.p("gt.jsonl"), "--vocab", &vocab, "--seed", "1", "--out", &c.p("a.tok")]).0);
    assert!(codec(&["encode", &c.p("gt.jsonl"), "--vocab", &vocab, "--seed", "2", "--out", &c.p("b.tok")]).0);
    assert_ne!(std::fs::read(c.p("a.tok")).unwrap(), std::fs::read(c.p("b.tok")).unwrap());

    for tok in ["a.tok", "b.tok"] {
        let out = c.p(&format!("{tok}.jsonl"));
        let (ok, stderr) = codec(&["decode", &c.p(tok), "--vocab", &vocab, "--out", &out]);
        assert!(ok, "{stderr}");
        let report = evaluate(&["evaluate", &c.p("gt.jsonl"), &out, "--vocab", &vocab]);
        assert!(report.aggregate.recall.values().all(|&r| r == 1.0));
        let back = evaluate(&["evaluate", &out, &c.p("gt.jsonl"), "--vocab", &vocab]);
        assert!(back.aggregate.recall.values().all(|&r| r == 1.0));
    }

    let text = std::fs::read_to_string(c.p("a.tok")).unwrap();
    let first = text.lines().next().unwrap();
    let cut = &first[..first.len() - 6];
    std::fs::write(c.p("cut.tok"), cut).unwrap();
    let (ok, stderr) = codec(&["decode", &c.p("cut.tok"), "--vocab", &vocab, "--out", &c.p("cut.jsonl")]);
    assert!(ok);
    let totals: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert!(totals["truncated"].as_u64().unwrap() >= 1, "{stderr}");
}

#[test]
fn codec_overflow_is_a_vocabulary_error() {
    let dir = tempfile::tempdir().unwrap();
    let root = Path::new(dir.path());
    std::fs::write(root.join("v.json"), r#"{"classes":["a","b"],"predicates":["r"],"max_instances":2}"#).unwrap();
    let triplets: Vec<String> = (0..3)
        .map(|i| format!(r#"{{"sub":{{"cls":"a","idx":{i}}},"pred":"r","obj":{{"cls":"b","idx":0}}}}"#))
        .collect();
    std::fs::write(root.join("g.jsonl"), format!(r#"{{"image_id":"x","triplets":[{}]}}"#, triplets.join(","))).unwrap();
    let out = bin()
        .args(["codec", "encode"])
        .arg(root.join("g.jsonl"))
        .arg("--vocab")
        .arg(root.join("v.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn retrieve_ranks_members_first() {
    let c = Corpus::new(r#"{"n_images": 60}"#);
    let Command::Retrieve(a) = parse(&["retrieve", &c.p("gt.jsonl"), &c.p("gt.jsonl"), "--out", &c.p("ranked.json")]).command
    else {
        unreachable!()
    };
    let summary = cmd_retrieve(&a).unwrap();
    assert_eq!(summary.recall[&1], 1.0);
    assert!(summary.recall[&20] >= summary.recall[&1]);
    assert!(summary.results.iter().all(|r| r.target_rank == Some(1)));
}

#[test]
fn presets_load_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.jsonl");
    std::fs::write(
        &path,
        r#"{"image_id":"1","triplets":[{"sub":{"cls":"man","idx":0},"pred":"holding","obj":{"cls":"cup","idx":0}}]}"#,
    )
    .unwrap();
    let p = path.to_string_lossy();
    let report = evaluate(&["evaluate", &p, &p, "--vocab", "preset:vg150", "--with-precision"]);
    assert_eq!(report.aggregate.scores.unwrap().f1, 1.0);
}
