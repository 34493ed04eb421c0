//! One pass/fail line per acceptance criterion, then a single assertion
//! over all of them. Run with `--nocapture` to see the lines.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use common::{app, call, new_session, schema_errors, vega_lite_validator};
use cotvis::dataset::{nvbench_db_root, read_samples};
use cotvis::load::DbRoot;
use cotvis_core::chartspec::emit_chart;
use cotvis_core::corpus::{decompose_vql, filter_corpus};
use cotvis_core::cot::{reassemble, run_pipeline, PipelineOptions};
use cotvis_core::datastore::Cell;
use cotvis_core::executor::execute;
use cotvis_core::metrics::{data_match, evaluate_corpus, sql_match, EvalPair};
use cotvis_core::refine::{manual_correct, self_correct};
use cotvis_core::vql::{
    canonicalize, parse_vql, render_vql, validate, AggregateFn, ChartType, ParseErrorKind,
};
use cotvis_testkit::gen::{perturb, random_database, random_query};
use cotvis_testkit::oracle::oracle_execute;
use cotvis_testkit::scripts::{CASE1, CASE1_SELF_NODE, CASE2, CASE2_MANUAL_NODE, CASE2_PREFERENCE};
use cotvis_testkit::{data_dir, fixture_db, fixture_dbs, planted_corpus, vql_suite};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Worked statements the suite must contain verbatim.
const QUOTED: &[&str] = &[
    "VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank",
    "Visualize BAR SELECT date_of_notes, COUNT(date_of_notes) FROM Assessment_Notes BIN date_of_notes BY WEEKDAY",
    "VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE ORDER BY YEAR DESC",
    "VISUALIZE BAR SELECT Name, Score FROM WINE WHERE YEAR IN (1999, 2000)",
    "VISUALIZE BAR SELECT Name, Score FROM WINE WHERE YEAR = 1999 OR YEAR = 2000",
];

fn suite_vql(id: &str) -> String {
    vql_suite().into_iter().find(|e| e.id == id).expect("suite id").vql
}

fn round_trip() -> Check {
    let suite = vql_suite();
    ensure!(suite.len() >= 50, "suite has {} entries", suite.len());
    for q in QUOTED {
        ensure!(suite.iter().any(|e| e.vql == *q), "suite lacks {q}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for e in &suite {
        let q = parse_vql(&e.vql).map_err(|err| format!("{}: {err}", e.id))?;
        ensure!(parse_vql(&render_vql(&q)).as_ref() == Ok(&q), "{} does not round-trip", e.id);
        let c = canonicalize(&q);
        let again = parse_vql(&c).map_err(|err| format!("{}: {err}", e.id))?;
        ensure!(canonicalize(&again) == c, "{} canonical form is not idempotent", e.id);
        let noisy = perturb(&e.vql, &mut rng);
        ensure!(parse_vql(&noisy).map(|q| canonicalize(&q)).as_ref() == Ok(&c), "{}: {noisy}", e.id);
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("{} statements in {} ms", suite.len(), took.as_millis()))
}

fn invalid_forms() -> Check {
    let kind = |s: &str| parse_vql(s).map(|_| ()).map_err(|e| e.kind);
    let hist = kind("VISUALIZE HISTOGRAM SELECT a, b FROM t");
    ensure!(hist == Err(ParseErrorKind::UnknownChartType("HISTOGRAM".into())), "{hist:?}");
    let weekday = [
        "VISUALIZE BAR SELECT WEEKDAY(Date), COUNT(*) FROM t",
        "VISUALIZE BAR SELECT Date, COUNT(Date) FROM t GROUP BY WEEKDAY(Date)",
        "VISUALIZE BAR SELECT Date, COUNT(Date) FROM t WHERE WEEKDAY(Date) = 'Monday'",
        "VISUALIZE BAR SELECT Date, COUNT(Date) FROM t BIN Date BY WEEKDAY(Date)",
    ];
    for s in weekday {
        let k = kind(s);
        ensure!(k == Err(ParseErrorKind::UnknownFunction("WEEKDAY".into())), "{s}: {k:?}");
    }
    Ok(format!("HISTOGRAM -> UnknownChartType; WEEKDAY(Date) in {} positions -> UnknownFunction", weekday.len()))
}

fn same_rows(a: &[Vec<Cell>], b: &[Vec<Cell>]) -> bool {
    let key = |rows: &[Vec<Cell>]| {
        let mut v: Vec<String> = rows.iter().map(|r| format!("{r:?}")).collect();
        v.sort();
        v
    };
    key(a) == key(b)
}

fn executor_oracle() -> Check {
    let start = Instant::now();
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_database(&mut rng);
        let q = random_query(&mut rng, &db);
        let t = &db.tables()[0];
        ensure!(t.rows().len() <= 8 && t.schema().columns.len() <= 4, "seed {seed}: table too large");
        let got = execute(&q, &db).map_err(|e| format!("seed {seed}: {e}"))?;
        let want = oracle_execute(&q, &db).ok_or(format!("seed {seed}: oracle failed"))?;
        ensure!(same_rows(&got.rows, &want), "seed {seed}: {}", render_vql(&q));
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!("1000 instances in {} ms", took.as_millis()))
}

fn data_acc_pairs() -> Check {
    let wine = fixture_db("wine");
    let (inl, or) = (suite_vql("q05"), suite_vql("q06"));
    ensure!(!sql_match(&inl, &or), "IN and OR chains compare equal as SQL");
    ensure!(data_match(&inl, &or, &wine), "IN vs OR: data differs");
    let (missing, fixed) = (suite_vql("q03"), suite_vql("q04"));
    ensure!(!data_match(&missing, &fixed, &wine), "missing GROUP BY matched");
    Ok("IN vs OR true, missing GROUP BY false".into())
}

fn metric_consistency() -> Check {
    let dbs = fixture_dbs();
    let pairs: Vec<EvalPair> = vql_suite()
        .into_iter()
        .filter(|e| e.executable)
        .map(|e| EvalPair { id: e.id, db_id: e.db_id, predicted: e.vql.clone(), gold: e.vql })
        .collect();
    let r = evaluate_corpus(&pairs, &dbs).map_err(|e| e.to_string())?;
    for acc in [r.chart_acc, r.axis_acc, r.sql_acc, r.data_acc, r.all_acc] {
        ensure!(acc == 1.0, "gold vs gold accuracy {acc}");
    }
    let mut implied = 0;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_database(&mut rng);
        let gold = render_vql(&random_query(&mut rng, &db));
        let pred = perturb(&gold, &mut rng);
        let other = render_vql(&random_query(&mut rng, &db));
        for p in [pred, other] {
            if sql_match(&p, &gold) {
                ensure!(data_match(&p, &gold, &db), "seed {seed}: sql match without data match");
                implied += 1;
            }
        }
    }
    Ok(format!("{} pairs at 1.0; sql=>data held on {implied} matches over 500 queries", r.count))
}

fn corpus_counts() -> Check {
    let (kept, r) = filter_corpus(&planted_corpus(), &fixture_dbs());
    ensure!(kept.len() == 7 && r.kept == 7, "kept {}", r.kept);
    ensure!(r.duplicates.ids == ["p06"], "duplicates {:?}", r.duplicates.ids);
    ensure!(r.illegal.ids == ["p09"], "illegal {:?}", r.illegal.ids);
    ensure!(r.empty.ids == ["p10"], "empty {:?}", r.empty.ids);
    let planted = "planted 1/1/1";
    let Some(dir) = std::env::var_os("NVBENCH_DIR").map(std::path::PathBuf::from).filter(|p| p.is_dir()) else {
        return Ok(format!("{planted}; nvBench check skipped (NVBENCH_DIR not set)"));
    };
    let samples = read_samples(&dir).map_err(|e| e.to_string())?;
    let root = DbRoot::new(nvbench_db_root(&dir).ok_or("no database/ directory")?);
    let dbs = root.preload(samples.iter().map(|s| s.db_id.as_str()));
    let (_, r) = filter_corpus(&samples, &dbs);
    let got = (r.duplicates.count, r.illegal.count, r.empty.count);
    ensure!(got == (9, 26, 6), "nvBench duplicates/illegal/empty = {got:?}");
    Ok(format!("{planted}; nvBench 9/26/6"))
}

fn decompose_round_trip() -> Check {
    let mut n = 0;
    for e in vql_suite() {
        let q = parse_vql(&e.vql).map_err(|err| err.to_string())?;
        if !validate(&q, &fixture_db(&e.db_id).schema()).is_valid() {
            continue;
        }
        let s = decompose_vql(&q);
        let back = reassemble(&[&s[0], &s[1], &s[2], &s[3]]).map_err(|err| format!("{}: {err}", e.id))?;
        ensure!(canonicalize(&back) == canonicalize(&q), "{}: {}", e.id, canonicalize(&back));
        n += 1;
    }
    Ok(format!("{n} valid statements"))
}

fn worked_cases() -> Check {
    let opts = PipelineOptions::default();
    let db1 = fixture_db(CASE1.db_id);
    let c1 = CASE1.client();
    let a = run_pipeline(&CASE1.question(), &db1, &c1, &opts).map_err(|e| e.to_string())?;
    let b = run_pipeline(&CASE1.question(), &db1, &CASE1.client(), &opts).map_err(|e| e.to_string())?;
    let bytes = |t| serde_json::to_string(t).unwrap();
    ensure!(bytes(&a.trace) == bytes(&b.trace), "case 1 traces differ across runs");
    let (_, diff) = self_correct(&a.trace, CASE1_SELF_NODE, &db1, &c1).map_err(|e| e.to_string())?;
    ensure!(diff.modified == ["S5", "S4/SORT_DIRECTION"], "case 1 modified {:?}", diff.modified);

    let db2 = fixture_db(CASE2.db_id);
    let c2 = CASE2.client();
    let a = run_pipeline(&CASE2.question(), &db2, &c2, &opts).map_err(|e| e.to_string())?;
    let b = run_pipeline(&CASE2.question(), &db2, &CASE2.client(), &opts).map_err(|e| e.to_string())?;
    ensure!(bytes(&a.trace) == bytes(&b.trace), "case 2 traces differ across runs");
    let (next, _) = manual_correct(&a.trace, CASE2_MANUAL_NODE, CASE2_PREFERENCE, &db2, &c2)
        .map_err(|e| e.to_string())?;
    let q = next.query().map_err(|e| e.to_string())?;
    ensure!(q.chart == ChartType::Bar, "chart {:?}", q.chart);
    ensure!(q.x.column.column == "major" && q.x.aggregate.is_none(), "x {:?}", q.x);
    ensure!(q.y.column.column == "age" && q.y.aggregate == Some(AggregateFn::Avg), "y {:?}", q.y);
    ensure!(q.group_by.len() == 1 && q.group_by[0].column == "major", "group by {:?}", q.group_by);
    Ok(format!("case 1 diff {:?}; case 2 -> {}", diff.modified, canonicalize(&q)))
}

fn chart_schema() -> Check {
    let v = vega_lite_validator();
    let mut n = 0;
    for e in vql_suite().into_iter().filter(|e| e.executable) {
        let q = parse_vql(&e.vql).map_err(|err| err.to_string())?;
        let r = execute(&q, &fixture_db(&e.db_id)).map_err(|err| format!("{}: {err}", e.id))?;
        let doc = emit_chart(&q, &r).map_err(|err| format!("{}: {err}", e.id))?.to_vega_lite();
        let errs = schema_errors(&v, &doc);
        ensure!(errs.is_empty(), "{}: {errs:?}", e.id);
        n += 1;
    }
    Ok(format!("{n} documents valid"))
}

fn headless() -> Check {
    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    let served = rt.block_on(async {
        let app = app(CASE1.client());
        let id = new_session(&app, CASE1.db_id).await;
        let r = call(&app, "POST", &format!("/sessions/{id}/query"), Some(json!({"nl_query": CASE1.question()}))).await;
        let e = call(&app, "GET", &format!("/sessions/{id}/export?kind=vql"), None).await;
        (r.status, e.text())
    });
    ensure!(served.0 == StatusCode::OK, "server query returned {}", served.0);

    let script = data_dir().join("scripts/case1_allergy.json");
    let out = Command::new(env!("CARGO_BIN_EXE_nlvis"))
        .args(["run", "--db", "allergy", "--query", &CASE1.question()])
        .arg("--db-root")
        .arg(data_dir().join("db"))
        .arg("--backend")
        .arg(format!("scripted:{}", script.display()))
        .env_remove("NLVIS_BACKEND")
        .env_remove("NLVIS_API_KEY")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "cli: {}", String::from_utf8_lossy(&out.stderr));
    let cli = String::from_utf8_lossy(&out.stdout).trim().to_string();
    ensure!(cli == served.1.trim(), "cli {cli:?} vs server {:?}", served.1);
    Ok("scripted backend through the router and the CLI; no API key, no socket".into())
}

#[test]
fn acceptance() {
    let checks: [(&str, fn() -> Check); 10] = [
        ("vql round-trip on the bundled suite", round_trip),
        ("invalid chart type and function forms", invalid_forms),
        ("executor agrees with the oracle", executor_oracle),
        ("data accuracy on the IN/OR and GROUP BY pairs", data_acc_pairs),
        ("metric self-consistency", metric_consistency),
        ("corpus filter counts", corpus_counts),
        ("decompose/reassemble round-trip", decompose_round_trip),
        ("worked cases with the scripted backend", worked_cases),
        ("chart documents match the pinned schema", chart_schema),
        ("headless scripted run", headless),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL [{}] {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
