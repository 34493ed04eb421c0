use cotvis_core::cot::{run_pipeline, NodeStatus, PipelineCause, PipelineOptions, StageId};
use cotvis_core::executor::{execute_step, StepView};
use cotvis_core::model::{ChatRequest, ModelClient, ScriptedClient};
use cotvis_core::refine::{
    correct, diff_traces, manual_correct, promote_alternative, self_correct, CorrectionMode,
    CorrectionRequest, RefineError,
};
use cotvis_core::vql::{canonicalize, AggregateFn, ChartType, Violation};
use cotvis_testkit::fixture_db;
use cotvis_testkit::scripts::{
    CASE1, CASE1_SELF_NODE, CASE1_TOP_TEN_PREFERENCE, CASE2, CASE2_MANUAL_NODE, CASE2_PREFERENCE,
    CASE3,
};

fn opts() -> PipelineOptions {
    PipelineOptions::default()
}

#[test]
fn case1_pipeline_is_deterministic() {
    let db = fixture_db(CASE1.db_id);
    let a = run_pipeline(&CASE1.question(), &db, &CASE1.client(), &opts()).unwrap();
    let b = run_pipeline(&CASE1.question(), &db, &CASE1.client(), &opts()).unwrap();
    assert_eq!(
        a.trace.vql(),
        "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code"
    );
    assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
    assert_eq!(a.trace.tree().depth(), 3);
}

#[test]
fn case1_prompt_describes_the_student_table() {
    struct Capture(ScriptedClient, std::sync::Mutex<Vec<ChatRequest>>);
    impl ModelClient for Capture {
        fn complete(&self, r: &ChatRequest) -> Result<String, cotvis_core::model::BackendError> {
            self.1.lock().unwrap().push(r.clone());
            self.0.complete(r)
        }
    }
    let c = Capture(CASE1.client(), Default::default());
    run_pipeline(&CASE1.question(), &fixture_db(CASE1.db_id), &c, &opts()).unwrap();
    let reqs = c.1.lock().unwrap();
    let s1 = reqs[0].text();
    assert!(s1.contains(
        "Table student(stuid:number, lname:text, fname:text, sex:text, major:number, advisor:number, city_code:text, age:number)"
    ));
    assert!(s1.contains("student.city_code:"), "city values are sampled");
    let s3 = reqs[2].text();
    assert!(s3.contains("chart_type: BAR") && s3.contains("select_items: city_code, COUNT(city_code)"));
    let s5 = reqs[4].text();
    for stage in ["[S1]", "[S2]", "[S3]", "[S4]"] {
        assert!(s5.contains(stage));
    }
}

#[test]
fn case1_self_correction_sorts_descending() {
    let db = fixture_db(CASE1.db_id);
    let client = CASE1.client();
    let run = run_pipeline(&CASE1.question(), &db, &client, &opts()).unwrap();
    let (next, diff) = self_correct(&run.trace, CASE1_SELF_NODE, &db, &client).unwrap();
    assert_eq!(
        next.vql(),
        "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code ORDER BY COUNT(city_code) DESC"
    );
    assert_eq!(diff.modified, ["S5", "S4/SORT_DIRECTION"]);
    assert_eq!(diff.changed_slots["S4/SORT_DIRECTION"], ["order_by", "sort_direction"]);
    for id in ["S1/CHART_TYPE", "S2/SELECT", "S3/GROUP_BY", "S4/LIMIT", "S4"] {
        assert!(diff.unchanged.iter().any(|u| u == id), "{id}");
    }
    assert_eq!(diff.alternatives, ["alt:S4/SORT_DIRECTION"]);
    for s in &StageId::ALL[..3] {
        assert_eq!(next.stage(*s).decision, run.trace.stage(*s).decision);
        assert_eq!(next.stage(*s).status, NodeStatus::Original);
    }
    assert_eq!(next.stage(StageId::S4).status, NodeStatus::Modified);
    assert_eq!(next.stage(StageId::S5).status, NodeStatus::Regenerated);

    let tree = next.tree();
    let leaf = tree.find(CASE1_SELF_NODE).unwrap();
    assert_eq!(leaf.alternatives.len(), 1);
    assert_eq!(leaf.alternatives[0].slots["order_by"], "");

    let q = next.query().unwrap();
    let sorted = execute_step(&q, &db, StepView::Final).unwrap();
    let counts: Vec<f64> = sorted.rows.iter().map(|r| r[1].as_number().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    let grouped = execute_step(&q, &db, StepView::Grouped).unwrap();
    assert_eq!(grouped.rows.len(), sorted.rows.len());
    let filtered = execute_step(&q, &db, StepView::Filtered).unwrap();
    assert_eq!(filtered.rows.len(), 34);

    let again = self_correct(&run.trace, CASE1_SELF_NODE, &db, &client).unwrap().0;
    assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&next).unwrap());
}

#[test]
fn case1_manual_limit_touches_only_s4_and_s5() {
    let db = fixture_db(CASE1.db_id);
    let client = CASE1.client();
    let run = run_pipeline(&CASE1.question(), &db, &client, &opts()).unwrap();
    let (next, diff) = manual_correct(&run.trace, "S4/LIMIT", CASE1_TOP_TEN_PREFERENCE, &db, &client).unwrap();
    assert_eq!(next.query().unwrap().limit, Some(10));
    assert!(diff.modified.iter().all(|m| m == "S5" || m.starts_with("S4/")));
    assert!(diff.modified.iter().any(|m| m == "S4/LIMIT"));
}

#[test]
fn case2_manual_correction_turns_scatter_into_average_bars() {
    let db = fixture_db(CASE2.db_id);
    let client = CASE2.client();
    let run = run_pipeline(&CASE2.question(), &db, &client, &opts()).unwrap();
    assert_eq!(run.query.chart, ChartType::Scatter);
    assert_eq!(run.trace.vql(), "VISUALIZE SCATTER SELECT major, age FROM student");
    assert!(run.query.y.aggregate.is_none());

    let (next, diff) = manual_correct(&run.trace, CASE2_MANUAL_NODE, CASE2_PREFERENCE, &db, &client).unwrap();
    let q = next.query().unwrap();
    assert_eq!(q.chart, ChartType::Bar);
    assert_eq!(q.y.aggregate, Some(AggregateFn::Avg));
    assert_eq!(canonicalize(&q), "VISUALIZE BAR SELECT major, AVG(age) FROM student GROUP BY major");
    let mut modified = diff.modified.clone();
    modified.sort();
    assert_eq!(modified, ["S1/CHART_TYPE", "S2/SELECT", "S3/GROUP_BY", "S5"]);
    assert_eq!(next.stage(StageId::S1).status, NodeStatus::Modified);
    for s in &StageId::ALL[1..] {
        assert_eq!(next.stage(*s).status, NodeStatus::Regenerated);
    }
}

#[test]
fn diff_is_empty_on_identical_traces_and_symmetric() {
    let db = fixture_db(CASE2.db_id);
    let client = CASE2.client();
    let run = run_pipeline(&CASE2.question(), &db, &client, &opts()).unwrap();
    let same = diff_traces(&run.trace, &run.trace);
    assert!(same.modified.is_empty() && same.reasoning_changed.is_empty());
    let (next, _) = manual_correct(&run.trace, CASE2_MANUAL_NODE, CASE2_PREFERENCE, &db, &client).unwrap();
    let mut ab = diff_traces(&run.trace, &next).modified;
    let mut ba = diff_traces(&next, &run.trace).modified;
    ab.sort();
    ba.sort();
    assert_eq!(ab, ba);
}

#[test]
fn identical_answer_changes_reasoning_only() {
    // A backend that answers the correction exactly like the original run.
    let db = fixture_db(CASE2.db_id);
    let client = CASE2.client();
    let run = run_pipeline(&CASE2.question(), &db, &client, &opts()).unwrap();
    let mut fixture = client.fixture().clone();
    for e in &mut fixture.entries {
        if let Some(w) = &mut e.when {
            if w.purpose.as_deref() == Some("correct:S1") {
                w.purpose = Some("never".into());
            }
        }
    }
    let mut echo = ScriptedClient::new(fixture);
    let s4 = run.trace.stage(StageId::S4).decision.clone();
    let text = format!(
        "```slots\norder_by:\nsort_direction:\nlimit:\n```\nStill no ordering needed. {}",
        s4.reasoning
    );
    echo.push_rule(
        cotvis_core::model::ScriptRule { purpose: Some("correct:S4".into()), ..Default::default() },
        text,
    );
    let (_, diff) = self_correct(&run.trace, "S4", &db, &echo).unwrap();
    assert!(diff.modified.is_empty(), "{:?}", diff.modified);
    assert!(diff.reasoning_changed.iter().any(|n| n == "S4"));
}

#[test]
fn promoting_the_alternative_restores_the_original_branch() {
    let db = fixture_db(CASE1.db_id);
    let client = CASE1.client();
    let run = run_pipeline(&CASE1.question(), &db, &client, &opts()).unwrap();
    let (next, _) = self_correct(&run.trace, CASE1_SELF_NODE, &db, &client).unwrap();
    let (restored, diff) = promote_alternative(&next, "alt:S4/SORT_DIRECTION").unwrap();
    assert_eq!(restored.vql(), run.trace.vql());
    assert!(restored.alternatives.is_empty());
    assert!(diff.modified.iter().any(|m| m == "S4/SORT_DIRECTION"));
    assert!(matches!(
        promote_alternative(&next, "alt:nope"),
        Err(RefineError::UnknownAlternative(_))
    ));
}

#[test]
fn correction_request_errors() {
    let db = fixture_db(CASE1.db_id);
    let client = CASE1.client();
    let run = run_pipeline(&CASE1.question(), &db, &client, &opts()).unwrap();
    let req = |node: &str, mode, preference: Option<&str>| CorrectionRequest {
        node: node.into(),
        mode,
        preference: preference.map(Into::into),
    };
    assert!(matches!(
        correct(&run.trace, &req("S9", CorrectionMode::SelfCorrect, None), &db, &client),
        Err(RefineError::UnknownNode(_))
    ));
    assert!(matches!(
        correct(&run.trace, &req("S1", CorrectionMode::Manual, Some("  ")), &db, &client),
        Err(RefineError::EmptyPreference)
    ));
    assert!(matches!(
        correct(&run.trace, &req("S1", CorrectionMode::SelfCorrect, Some("x")), &db, &client),
        Err(RefineError::UnexpectedPreference)
    ));
    let json = r#"{"node":"S4/SORT_DIRECTION","mode":"self"}"#;
    let parsed: CorrectionRequest = serde_json::from_str(json).unwrap();
    assert_eq!(parsed, req(CASE1_SELF_NODE, CorrectionMode::SelfCorrect, None));
}

#[test]
fn case3_invalid_final_vql_carries_the_trace() {
    let db = fixture_db(CASE3.db_id);
    let err = run_pipeline(&CASE3.question(), &db, &CASE3.client(), &opts()).unwrap_err();
    assert_eq!(err.stage, Some(StageId::S5));
    match &err.cause {
        PipelineCause::Invalid(r) => assert!(r.violations.contains(&Violation::AggregateWithoutGrouping)),
        other => panic!("{other:?}"),
    }
    let trace = err.trace.unwrap();
    assert_eq!(trace.vql(), "VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE ORDER BY YEAR DESC");
}
