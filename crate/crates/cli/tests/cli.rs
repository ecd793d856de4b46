use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use elss_core::eval::{
    benchmark_to_json, BenchmarkCandidate, BenchmarkQuery, GroundTruth, RankingOutcome, Strategy, VerdictLog,
    VerdictLogEntry,
};
use elss_core::verifier::VerdictLabel;

fn elss(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elss"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ELSS_VLM_API_KEY")
        .output()
        .expect("run elss")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn demo_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = elss(&["demo", "--dir", "scenario"], dir.path());
    assert!(out.status.success());
    dir
}

#[test]
fn kernel_dump() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&elss(&["kernel-dump", "--d", "1"], dir.path()));
    assert_eq!(v["d"], 1);
    assert_eq!(v["weights"], serde_json::json!([[0.0, 0.5, 0.0], [0.5, 1.0, 0.5], [0.0, 0.5, 0.0]]));
    let d2 = stdout_json(&elss(&["kernel-dump", "--d", "2"], dir.path()));
    assert_eq!(d2["weights"][0][2], 0.5);

    let zero = elss(&["kernel-dump", "--d", "0"], dir.path());
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let dir = demo_dir();
    let run = |tag: &str| {
        let report = format!("r_{tag}.json");
        let trace = format!("t_{tag}.json");
        let out = elss(
            &["pipeline", "--config", "scenario/pipeline.toml", "--out", &report, "--trace", &trace],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(dir.path().join(report)).unwrap(), fs::read(dir.path().join(trace)).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);

    let report: Value = serde_json::from_slice(&a.0).unwrap();
    let sites = report["sites"].as_array().unwrap();
    assert!(!sites.is_empty());
    for (i, s) in sites.iter().enumerate() {
        assert_eq!(s["rank"], i + 1);
        assert!(s["justification"].as_str().unwrap().starts_with(&format!("Rank {}: ", i + 1)));
    }
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);
    let trace: Value = serde_json::from_slice(&a.1).unwrap();
    assert!(trace.as_array().unwrap().len() >= sites.len());
    // config-relative outputs are also written
    assert!(dir.path().join("scenario/out/ranking_prompt.md").is_file());
}

#[test]
fn flags_override_config() {
    let dir = demo_dir();
    let out = elss(
        &[
            "pipeline", "--config", "scenario/pipeline.toml", "--out", "r.json", "--d", "6", "--max-accepted", "2",
            "--policy", "union", "--backend", "oracle",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["proposal"]["half_width"], 6);
    assert_eq!(report["sites"].as_array().unwrap().len(), 2);
}

#[test]
fn propose_writes_trace() {
    let dir = demo_dir();
    let v = stdout_json(&elss(
        &["propose", "--config", "scenario/pipeline.toml", "--trace", "trace.json"],
        dir.path(),
    ));
    assert_eq!(v["stop_reason"], "max_accepted");
    let trace: Value = serde_json::from_slice(&fs::read(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace.as_array().unwrap().len(), v["iterations"].as_u64().unwrap() as usize);
    assert!(!dir.path().join("scenario/out/report.json").exists());
}

#[test]
fn validate_config() {
    let dir = demo_dir();
    let ok = elss(&["validate-config", "--config", "scenario/pipeline.toml"], dir.path());
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("ok "));
    let bad = elss(&["validate-config", "--config", "scenario/pipeline.toml", "--max-accepted", "0"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn missing_raster_is_config_error() {
    let dir = demo_dir();
    fs::remove_file(dir.path().join("scenario/labels.pgm")).unwrap();
    let out = elss(&["pipeline", "--config", "scenario/pipeline.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels"));
    assert!(!dir.path().join("scenario/out/report.json").exists());

    let missing_cfg = elss(&["pipeline", "--config", "nope.toml"], dir.path());
    assert_eq!(missing_cfg.status.code(), Some(3));
}

#[test]
fn corrupt_raster_is_io_error() {
    let dir = demo_dir();
    fs::write(dir.path().join("scenario/labels.pgm"), b"P5\n4 4\n255\n\x00").unwrap();
    let out = elss(&["pipeline", "--config", "scenario/pipeline.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn remote_backend_without_key_is_transport_error() {
    let dir = demo_dir();
    let cfg = dir.path().join("scenario/pipeline.toml");
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[verifier.endpoint]\nendpoint_url = \"http://127.0.0.1:9/v1\"\nmodel_name = \"any\"\n");
    fs::write(&cfg, text).unwrap();
    let out = elss(&["pipeline", "--config", "scenario/pipeline.toml", "--backend", "remote"], dir.path());
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ELSS_VLM_API_KEY"));
    assert!(!dir.path().join("scenario/out/report.json").exists());
}

fn write_log(dir: &Path) {
    let mut entries = Vec::new();
    for (strategy, safe) in [(Strategy::Random, 19), (Strategy::Semantic, 57)] {
        for i in 0..100 {
            let label = if i < safe { VerdictLabel::Safe } else { VerdictLabel::Unsafe };
            let gt = if i % 2 == 0 { VerdictLabel::Safe } else { VerdictLabel::Unsafe };
            entries.push(VerdictLogEntry::new(format!("c{i}"), strategy, label, "gpt-4.1").with_gt(gt));
        }
    }
    fs::write(dir.join("log.jsonl"), VerdictLog::new(entries).unwrap().to_jsonl()).unwrap();
}

#[test]
fn eval_passing_rate_and_filter() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path());
    let v = stdout_json(&elss(&["eval", "passing-rate", "--log", "log.jsonl"], dir.path()));
    assert_eq!(v, serde_json::json!({"passing_rate": {"gpt-4.1": {"random": 19, "semantic": 57}}}));

    let f = elss(
        &["eval", "filter", "--log", "log.jsonl", "--strategy", "semantic", "--out", "prf.json"],
        dir.path(),
    );
    assert!(f.status.success() && f.stdout.is_empty());
    let doc: Value = serde_json::from_slice(&fs::read(dir.path().join("prf.json")).unwrap()).unwrap();
    let q = &doc["filter_quality"];
    // semantic: 29 safe-labelled among the 57 accepted, 50 safe overall
    assert_eq!(q["counts"]["tp"], 29);
    assert_eq!(q["precision"], 51);
    assert_eq!(q["recall"], 58);
    assert_eq!(q["positive_ratio"], 50);
    assert_eq!(q["predicted_positive_ratio"], 57);
}

#[test]
fn eval_malformed_log_names_line() {
    let dir = tempfile::tempdir().unwrap();
    write_log(dir.path());
    let text = fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1] = "{\"candidate_id\": 7}";
    fs::write(dir.path().join("bad.jsonl"), lines.join("\n")).unwrap();
    let out = elss(&["eval", "passing-rate", "--log", "bad.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn eval_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let queries: Vec<BenchmarkQuery> = (0..4)
        .map(|i| {
            let ids: Vec<String> = (0..4).map(|k| format!("q{i}c{k}")).collect();
            BenchmarkQuery {
                query_id: format!("q{i}"),
                region: "nanjing".into(),
                candidates: ids
                    .iter()
                    .map(|id| BenchmarkCandidate {
                        id: id.clone(),
                        image: format!("{id}.png"),
                        bbox: [0.0, 0.0, 21.0, 21.0],
                        pois: Vec::new(),
                    })
                    .collect(),
                ground_truth: GroundTruth {
                    best: ids[0].clone(),
                    worst: ids[3].clone(),
                    labels: Default::default(),
                },
            }
        })
        .collect();
    fs::write(dir.path().join("bench.json"), benchmark_to_json(&queries)).unwrap();
    let outcomes = [
        RankingOutcome::decided("q0", "q0c0", "q0c3"),
        RankingOutcome::decided("q1", "q1c0", "q1c3"),
        RankingOutcome::decided("q2", "q2c3", "q2c1"),
        RankingOutcome::abstain("q3"),
    ];
    let jsonl: String = outcomes.iter().map(|o| serde_json::to_string(o).unwrap() + "\n").collect();
    fs::write(dir.path().join("outcomes.jsonl"), jsonl).unwrap();
    let v = stdout_json(&elss(
        &["eval", "ranking", "--benchmark", "bench.json", "--outcomes", "outcomes.jsonl"],
        dir.path(),
    ));
    let r = &v["ranking"];
    assert_eq!((r["right_rate"].as_u64(), r["false_rate"].as_u64(), r["other"].as_u64()), (Some(50), Some(25), Some(25)));

    let mut three = queries.clone();
    three[0].candidates.pop();
    fs::write(dir.path().join("bench3.json"), benchmark_to_json(&three)).unwrap();
    let bad = elss(
        &["eval", "ranking", "--benchmark", "bench3.json", "--outcomes", "outcomes.jsonl"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(6));
}
