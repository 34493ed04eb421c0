use super::*;
use crate::datastore::table_from_text;
use crate::model::{ScriptRule, ScriptedClient};
use alloc::vec;

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn db() -> Database {
    let t = table_from_text(
        "Faculty",
        &strings(&["FacID", "Rank", "Sex"]),
        &[strings(&["1", "Professor", "M"]), strings(&["2", "AsstProf", "F"]), strings(&["3", "Professor", "F"])],
    )
    .unwrap();
    Database::with_tables("uni", vec![t]).unwrap()
}

fn sample(id: &str, q: &str, vql: &str) -> RawSample {
    RawSample { id: id.into(), db_id: "uni".into(), nl_query: q.into(), gold_vql: vql.into() }
}

const PIE: &str = "VISUALIZE PIE SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank";

#[test]
fn verdict_line_is_found() {
    let s = parse_verdict("The bin is wrong.\nverdict: inconsistent").unwrap();
    assert_eq!(s.verdict, Verdict::Inconsistent);
    assert_eq!(s.rationale, "The bin is wrong.");
    let s = parse_verdict("**Verdict: Consistent**").unwrap();
    assert_eq!(s.verdict, Verdict::Consistent);
    assert_eq!(s.rationale, "");
    assert!(parse_verdict("looks fine to me").is_none());
    assert!(parse_verdict("verdict: maybe").is_none());
}

#[test]
fn query_normalization() {
    assert_eq!(normalize_query("  Show\tthe  RANKS \n"), "show the ranks");
}

#[test]
fn audit_sizes() {
    assert_eq!(audit_size(100, 0.15), 15);
    assert_eq!(audit_size(100, 0.0), 0);
    assert_eq!(audit_size(10, 0.15), 2);
    assert_eq!(audit_size(7, 1.0), 7);
    assert_eq!(audit_size(7, 3.0), 7);
    assert_eq!(audit_size(7, f64::NAN), 0);
}

#[test]
fn quality_sample_is_seeded() {
    let items: Vec<usize> = (0..100).collect();
    let a = quality_sample(&items, 0.15, 42);
    assert_eq!(a.len(), 15);
    assert_eq!(a, quality_sample(&items, 0.15, 42));
    assert_ne!(a, quality_sample(&items, 0.15, 43));
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    assert!(quality_sample(&items, 0.0, 1).is_empty());
    assert!(quality_sample::<usize>(&[], 0.5, 1).is_empty());
}

#[test]
fn filter_categories() {
    let dbs = vec![db()];
    let samples = vec![
        sample("a", "Share of ranks", PIE),
        sample("b", "share  of RANKS", "visualize pie select rank, count(rank) from faculty group by rank"),
        sample("c", "Share of ranks", "VISUALIZE PIE SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank LIMIT 3"),
        sample("d", "x", "   "),
        sample("e", "x", "VISUALIZE PIE SELECT Rank, COUNT(Age) FROM Faculty GROUP BY Rank"),
        sample("f", "x", "VISUALIZE PIE SELECT Rank FROM Faculty"),
        RawSample { db_id: "nope".into(), ..sample("g", "x", PIE) },
    ];
    let (kept, r) = filter_corpus(&samples, &dbs);
    assert_eq!(kept.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
    assert_eq!(r.duplicates.ids, ["b"]);
    assert_eq!(r.empty.ids, ["d"]);
    assert_eq!(r.illegal.ids, ["e", "f", "g"]);
    assert_eq!((r.input, r.kept, r.removed()), (7, 2, 5));
    let (again, r2) = filter_corpus(&kept, &dbs);
    assert_eq!(again, kept);
    assert_eq!(r2.removed(), 0);
}

#[test]
fn order_and_limit_land_in_s4() {
    let q = parse_vql("VISUALIZE BAR SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank ORDER BY COUNT(Rank) DESC LIMIT 10").unwrap();
    let s = decompose_vql(&q);
    assert_eq!(s[3].get("order_by").unwrap(), "COUNT(Rank)");
    assert_eq!(s[3].get("sort_direction").unwrap(), "DESC");
    assert_eq!(s[3].get("limit").unwrap(), "10");
    assert_eq!(s[4].get("vql").unwrap(), &canonicalize(&q));
}

fn reasoning_client() -> ScriptedClient {
    let mut c = ScriptedClient::default();
    for stage in StageId::ALL {
        let rule = ScriptRule { purpose: Some(format!("reason:{stage}")), ..ScriptRule::default() };
        c.push_rule(rule, format!("```\nReasoning for {stage}.\n```"));
    }
    c.push_rule(
        ScriptRule { purpose: Some("screen".into()), contains: vec!["[S1] chart_type: PIE".into()], ..ScriptRule::default() },
        "Counts per rank match.\nverdict: consistent",
    );
    c.push_rule(ScriptRule { purpose: Some("screen".into()), ..ScriptRule::default() }, "verdict: inconsistent");
    c
}

#[test]
fn synthesized_record_keeps_gold_slots() {
    let db = db();
    let c = reasoning_client();
    let r = synthesize_reasoning(&sample("a", "Share of each rank", PIE), &db, &c).unwrap();
    assert!(r.is_lossless());
    assert_eq!(r.stages.len(), 5);
    assert_eq!(r.stages[0].reasoning, "Reasoning for S1.");
    assert_eq!(r.stages[0].slots.get("chart_type").unwrap(), "PIE");
    assert!(r.constraints.contains("PIE"));
    assert!(r.schema_description.contains("Faculty"));
    let line = emit_dataset(&[r.clone()]);
    assert!(line.ends_with('\n') && line.matches('\n').count() == 1);
    assert!(line.starts_with("{\"id\":\"a\",\"db_id\":\"uni\",\"nl_query\""));
    let back: TrainingRecord = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn screening_and_processing() {
    let db = db();
    let c = reasoning_client();
    let ok = process_sample(&sample("a", "q", PIE), &db, &c, true).unwrap();
    assert!(matches!(ok, SampleOutcome::Record(_)));
    let bar = sample("b", "q", "VISUALIZE BAR SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank");
    let bad = process_sample(&bar, &db, &c, true).unwrap();
    assert!(matches!(bad, SampleOutcome::Inconsistent(s) if s.verdict == Verdict::Inconsistent));
    assert!(matches!(process_sample(&bar, &db, &c, false).unwrap(), SampleOutcome::Record(_)));
    let e = screen_consistency(&sample("c", "q", "VISUALIZE PIE SELECT Rank FROM Faculty"), &db, &c);
    assert!(matches!(e, Err(CorpusError::IllegalGold { .. })));
}

#[test]
fn empty_reasoning_is_an_extraction_error() {
    let mut c = ScriptedClient::default();
    c.push_rule(ScriptRule::default(), "  ");
    let e = synthesize_reasoning(&sample("a", "q", PIE), &db(), &c).unwrap_err();
    assert!(matches!(e, CorpusError::Extraction { ref id, .. } if id == "a"));
}
