use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cotvis_core::corpus::{FilterReport, TrainingRecord};
use cotvis_testkit::data_dir;
use serde_json::Value;

fn nlvis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlvis"))
        .args(args)
        .env_remove("NLVIS_BACKEND")
        .env_remove("NLVIS_DATA_ROOT")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn describe_prints_schema_and_samples() {
    let db = data_dir().join("db/university");
    let text = ok(&nlvis(&["describe", "--db", p(&db), "--query", "faculty rank"]));
    assert!(text.contains("Table Faculty(facid:number, fname:text, rank:text"));
    assert!(text.contains("Faculty.rank: \"Professor\""));
    let root = data_dir().join("db");
    let text = ok(&nlvis(&["describe", "--db", "wine", "--db-root", p(&root)]));
    assert!(text.starts_with("Table wine("));
    assert!(!nlvis(&["describe", "--db", "nope"]).status.success());
}

#[test]
fn run_with_scripted_backend() {
    let root = data_dir().join("db");
    let script = format!("scripted:{}", p(&data_dir().join("scripts/case1_allergy.json")));
    let q = cotvis_testkit::scripts::CASE1.question();
    let args = ["run", "--db", "allergy", "--db-root", p(&root), "--query", &q, "--backend", &script];
    let out = ok(&nlvis(&args));
    assert_eq!(out.trim(), "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code");
    let mut with_spec = args.to_vec();
    with_spec.extend(["--emit", "chart-spec"]);
    let spec: Value = serde_json::from_str(&ok(&nlvis(&with_spec))).unwrap();
    assert_eq!(spec["mark"], "bar");
    let mut with_trace = args.to_vec();
    with_trace.extend(["--emit", "trace"]);
    let trace: Value = serde_json::from_str(&ok(&nlvis(&with_trace))).unwrap();
    assert_eq!(trace["stages"].as_array().unwrap().len(), 5);
    assert!(!nlvis(&["run", "--db", "allergy", "--db-root", p(&root), "--query", "q", "--backend", "bogus"]).status.success());
}

#[test]
fn corpus_filter_and_build_on_planted_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let input = data_dir().join("corpus/planted.jsonl");
    let root = data_dir().join("db");
    let report = tmp.path().join("filter.json");
    let kept = tmp.path().join("kept.jsonl");
    let out = ok(&nlvis(&[
        "corpus", "filter", "--input", p(&input), "--db-root", p(&root), "--report", p(&report), "--out", p(&kept),
    ]));
    assert_eq!(out.trim(), "input=10 kept=7 duplicates=1 illegal=1 empty=1");
    let r: FilterReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r.duplicates.ids.clone(), r.illegal.ids.clone(), r.empty.ids.clone()), (vec!["p06".to_string()], vec!["p09".to_string()], vec!["p10".to_string()]));
    assert_eq!(fs::read_to_string(&kept).unwrap().lines().count(), 7);

    let records = tmp.path().join("cot.jsonl");
    let script = format!("scripted:{}", p(&data_dir().join("scripts/corpus.json")));
    let build = |seed: &str| {
        ok(&nlvis(&[
            "corpus", "build", "--input", p(&input), "--db-root", p(&root), "--out", p(&records),
            "--backend", &script, "--seed", seed, "--sample-rate", "0.5", "--jobs", "3",
        ]))
    };
    let line = build("9");
    assert!(line.starts_with("input=10 records=6 duplicates=1 illegal=1 empty=1 inconsistent=1 failed=0 audit=3"), "{line}");
    let text = fs::read_to_string(&records).unwrap();
    let ids: Vec<String> = text.lines().map(|l| serde_json::from_str::<TrainingRecord>(l).unwrap().id).collect();
    assert_eq!(ids, ["p01", "p02", "p04", "p05", "p07", "p08"]);
    let audit = fs::read_to_string(tmp.path().join("cot.jsonl.audit.jsonl")).unwrap();
    build("9");
    assert_eq!(fs::read_to_string(&records).unwrap(), text);
    assert_eq!(fs::read_to_string(tmp.path().join("cot.jsonl.audit.jsonl")).unwrap(), audit);
    let rep: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("cot.jsonl.report.json")).unwrap()).unwrap();
    assert_eq!(rep["filter"]["inconsistent"]["ids"], serde_json::json!(["p03"]));
}

#[test]
fn eval_gold_against_gold() {
    let tmp = tempfile::tempdir().unwrap();
    let mut gold = String::new();
    for e in cotvis_testkit::vql_suite().into_iter().filter(|e| e.executable) {
        gold.push_str(&serde_json::json!({"id": e.id, "db_id": e.db_id, "vql": e.vql}).to_string());
        gold.push('\n');
    }
    fs::write(tmp.path().join("gold.jsonl"), &gold).unwrap();
    fs::write(tmp.path().join("pred.jsonl"), &gold).unwrap();
    let report = tmp.path().join("report.json");
    let root = data_dir().join("db");
    let out = ok(&nlvis(&[
        "eval", "--pred", p(&tmp.path().join("pred.jsonl")), "--gold", p(&tmp.path().join("gold.jsonl")),
        "--db-root", p(&root), "--report", p(&report),
    ]));
    assert!(out.contains("chart=1.0000 axis=1.0000 sql=1.0000 data=1.0000 all=1.0000"), "{out}");
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for k in ["Chart Acc", "Axis Acc", "SQL Acc", "Data Acc", "All Acc"] {
        assert_eq!(r[k], 1.0, "{k}");
    }
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = nlvis(&["eval", "--pred", p(&empty), "--gold", p(&empty), "--db-root", p(&root), "--report", p(&report)]);
    assert!(!out.status.success());
}
