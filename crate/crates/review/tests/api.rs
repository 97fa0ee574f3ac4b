//! The HTTP API, driven in-process through the router.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use smelldata_core::java::ingest::CorpusConfig;
use smelldata_core::metrics::MetricVector;
use smelldata_core::model::Split;
use smelldata_core::pipeline::{self, OutputConfig, PipelineConfig};
use smelldata_core::review::{checklist, AnswerKind};
use smelldata_core::sample::*;
use smelldata_core::store::{sample_id, write_records, SampleRecord};
use smelldata_review::{router, Clock, ReviewState, REVIEWER_HEADER};

struct TestClock(Mutex<DateTime<Utc>>);

impl TestClock {
    fn new() -> Arc<Self> {
        Arc::new(TestClock(Mutex::new(Utc.with_ymd_and_hms(2024, 5, 1, 9, 0, 0).unwrap())))
    }
    fn advance(&self, d: Duration) {
        *self.0.lock().unwrap() += d;
    }
}

impl Clock for TestClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

fn config(dir: &Path, project: &str, root: PathBuf) -> PipelineConfig {
    PipelineConfig {
        seed: Some(1),
        balance: false,
        thresholds: Default::default(),
        output: OutputConfig { dir: dir.to_path_buf() },
        corpus: vec![CorpusConfig { project_id: project.into(), root_dirs: vec![root], exclude_globs: vec![], role: Split::Train }],
    }
}

fn long_method() -> String {
    let mut s = String::from("void report() {\n");
    for i in 2..30 {
        s.push_str(&format!("    step({i});\n"));
    }
    s.push('}');
    s
}

fn record(n: usize, smell: Smell, group: Group, label: Option<Label>) -> SampleRecord {
    let mut provenance = Provenance {
        project: "syn".into(),
        entity: format!("p.C{n}#m/0"),
        spans: vec![SourceSpan { file: format!("p/C{n}.java"), start: 1, end: 30 }],
        rule_id: Some(format!("{}.test", smell.code())),
        ..Default::default()
    };
    if label.is_some() {
        provenance.label_source = Some("rule".into());
    }
    provenance.details.insert("candidate_targets".into(), json!(["p.Owner", "p.Other"]));
    let (code, metrics) = match smell {
        Smell::LongMethod => (long_method(), MetricVector { loc: 30, nom: None, noa: None, nfdi: None }),
        Smell::LargeClass => ("class C { int f; void g() {} }".to_string(), MetricVector::class(1, 1, 1)),
        Smell::FeatureEnvy => ("void m() { o.x = 1; }".to_string(), MetricVector::method(1, 1)),
    };
    SampleRecord {
        id: sample_id(smell, Origin::Original, &provenance),
        smell,
        origin: Origin::Original,
        group,
        label,
        code,
        context: BTreeMap::new(),
        metrics,
        ground_truth: None,
        split: Split::Train,
        provenance,
    }
}

/// Two auto-labeled negatives and five samples awaiting review: LM, LM, LC,
/// FE, FE.
fn synthetic(dir: &Path) -> (PipelineConfig, Vec<SampleRecord>) {
    let cfg = config(dir, "syn", dir.to_path_buf());
    let mut recs = vec![
        record(0, Smell::LargeClass, Group::AGroup, Some(Label::Negative)),
        record(1, Smell::FeatureEnvy, Group::AGroup, Some(Label::Negative)),
    ];
    recs[1].metrics = MetricVector::method(1, 0);
    for (i, s) in [Smell::LongMethod, Smell::LongMethod, Smell::LargeClass, Smell::FeatureEnvy, Smell::FeatureEnvy].into_iter().enumerate() {
        recs.push(record(10 + i, s, Group::MGroup, None));
    }
    write_records(&cfg.artifacts().samples(), &recs).unwrap();
    (cfg, recs)
}

fn app(cfg: &PipelineConfig, clock: Arc<TestClock>) -> Router {
    router(Arc::new(ReviewState::open(cfg.clone(), clock, Duration::minutes(30)).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, who: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(w) = who {
        req = req.header(REVIEWER_HEADER, w);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn yes(smell: Smell) -> Value {
    let m: BTreeMap<String, bool> =
        checklist(smell).questions.iter().filter(|q| q.kind == AnswerKind::YesNo).map(|q| (q.id.clone(), true)).collect();
    json!(m)
}

fn negative(id: &str, smell: Smell) -> Value {
    json!({ "sample_id": id, "verdict": "NEGATIVE", "answers": yes(smell) })
}

fn smell_of(v: &Value) -> Smell {
    serde_json::from_value(v["smell"].clone()).unwrap()
}

#[tokio::test]
async fn next_sample_leases_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = synthetic(dir.path());
    let clock = TestClock::new();
    let app = app(&cfg, clock.clone());

    let (st, body) = call(&app, "GET", "/api/v1/next-sample", None, None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "X-Reviewer-Id");

    let (st, body) = call(&app, "GET", "/api/v1/next-sample?smell=LC", Some("ann"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["sample"]["smell"], "LARGE_CLASS");
    assert_eq!(body["sample"]["group"], "M_GROUP");
    assert_eq!(body["checklist"]["questions"].as_array().unwrap().len(), 6);
    assert_eq!(body["lease"]["reviewer_id"], "ann");
    assert_eq!(body["lease"]["expires_at"], json!(clock.now() + Duration::minutes(30)));

    // the only LC sample is held by ann
    let (st, _) = call(&app, "GET", "/api/v1/next-sample?smell=LARGE_CLASS", Some("bob"), None).await;
    assert_eq!(st, StatusCode::NO_CONTENT);
    let (st, _) = call(&app, "GET", "/api/v1/next-sample?smell=XX", Some("bob"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    // ... until the lease runs out
    clock.advance(Duration::minutes(31));
    let (st, body) = call(&app, "GET", "/api/v1/next-sample?smell=LC", Some("bob"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["lease"]["reviewer_id"], "bob");
}

#[tokio::test]
async fn annotate_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, recs) = synthetic(dir.path());
    let app = app(&cfg, TestClock::new());
    let fe = recs.iter().find(|r| r.group == Group::MGroup && r.smell == Smell::FeatureEnvy).unwrap();
    let auto = &recs[0];

    let (st, _) = call(&app, "POST", "/api/v1/annotations", None, Some(negative(&fe.id, fe.smell))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(json!({"sample_id": fe.id}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(negative("ffffffffffffffff", fe.smell))).await;
    assert_eq!((st, body["kind"].clone()), (StatusCode::NOT_FOUND, json!("NOT_FOUND")));

    let mut partial = negative(&fe.id, fe.smell);
    partial["answers"].as_object_mut().unwrap().remove("FE-Q2");
    let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(partial)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "answers.FE-Q2");

    let bad_target = json!({"sample_id": fe.id, "verdict": "POSITIVE", "answers": yes(fe.smell),
                            "action": {"kind": "MOVE_METHOD", "move_target": "p.Nowhere"}});
    let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(bad_target)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "action.move_target");

    let (st, _) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(negative(&auto.id, auto.smell))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let ok = json!({"sample_id": fe.id, "verdict": "POSITIVE", "answers": yes(fe.smell),
                    "action": {"kind": "MOVE_METHOD", "move_target": "p.Other"}});
    let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(ok.clone())).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    assert_eq!(body["reviewer_id"], "ann");
    assert_eq!(body["action"]["move_target"], "p.Other");

    let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("bob"), Some(ok)).await;
    assert_eq!((st, body["kind"].clone()), (StatusCode::CONFLICT, json!("CONFLICT")));

    let log = std::fs::read_to_string(cfg.artifacts().annotations()).unwrap();
    assert_eq!(log.lines().count(), 1, "only accepted annotations are logged");
}

#[tokio::test]
async fn leased_sample_cannot_be_taken_by_another_reviewer() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = synthetic(dir.path());
    let app = app(&cfg, TestClock::new());
    let (_, body) = call(&app, "GET", "/api/v1/next-sample", Some("ann"), None).await;
    let id = body["sample"]["id"].as_str().unwrap().to_string();
    let smell = smell_of(&body["sample"]);
    let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("bob"), Some(negative(&id, smell))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert!(body["reason"].as_str().unwrap().contains("ann"));
    let (st, _) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(negative(&id, smell))).await;
    assert_eq!(st, StatusCode::CREATED);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reviewers_get_distinct_samples() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, recs) = synthetic(dir.path());
    let pending = recs.iter().filter(|r| r.group == Group::MGroup).count();
    let app = app(&cfg, TestClock::new());
    let tasks: Vec<_> = (0..pending + 3)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move { call(&app, "GET", "/api/v1/next-sample", Some(&format!("r{i}")), None).await })
        })
        .collect();
    let mut ids = Vec::new();
    let mut empty = 0;
    for t in tasks {
        let (st, body) = t.await.unwrap();
        match st {
            StatusCode::OK => ids.push(body["sample"]["id"].as_str().unwrap().to_string()),
            StatusCode::NO_CONTENT => empty += 1,
            s => panic!("unexpected {s}"),
        }
    }
    let distinct: std::collections::BTreeSet<_> = ids.iter().collect();
    assert_eq!((ids.len(), distinct.len(), empty), (pending, pending, 3));
    let (_, st) = call(&app, "GET", "/api/v1/stats", None, None).await;
    assert_eq!(st["leased"], pending);
}

#[tokio::test]
async fn extract_lines_round_trip_through_export_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, recs) = synthetic(dir.path());
    let clock = TestClock::new();
    let app1 = app(&cfg, clock.clone());
    let lm = recs.iter().find(|r| r.group == Group::MGroup && r.smell == Smell::LongMethod).unwrap();
    let action = json!({"kind": "EXTRACT_LINES", "extract_lines": [{"start": 12, "end": 25}]});
    let req = json!({"sample_id": lm.id, "verdict": "POSITIVE", "answers": yes(Smell::LongMethod), "action": action});
    let (st, _) = call(&app1, "POST", "/api/v1/annotations", Some("ann"), Some(req)).await;
    assert_eq!(st, StatusCode::CREATED);
    let too_far = json!({"sample_id": recs.iter().filter(|r| r.smell == Smell::LongMethod).nth(1).unwrap().id,
        "verdict": "POSITIVE", "answers": yes(Smell::LongMethod),
        "action": {"kind": "EXTRACT_LINES", "extract_lines": [{"start": 12, "end": 31}]}});
    let (st, _) = call(&app1, "POST", "/api/v1/annotations", Some("ann"), Some(too_far)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let (st, view) = call(&app1, "GET", &format!("/api/v1/samples/{}", lm.id), None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(view["annotation"]["action"], action);
    assert_eq!(view["annotation"]["timestamp"], json!(clock.now()));

    // a fresh service replays the log
    let app2 = app(&cfg, clock.clone());
    let (_, view2) = call(&app2, "GET", &format!("/api/v1/samples/{}", lm.id), None, None).await;
    assert_eq!(view2, view);
    let (st, summary) = call(&app2, "POST", "/api/v1/export", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(summary["records"], 3);
    let ds = pipeline::read_dataset(&cfg.artifacts().dataset()).unwrap();
    let r = ds.iter().find(|r| r.id == lm.id).unwrap();
    assert_eq!(r.label, Some(Label::Positive));
    assert_eq!(r.ground_truth.as_ref().unwrap().extract_lines, Some(vec![LineRange::new(12, 25)]));
    assert_eq!(r.provenance.label_source.as_deref(), Some("annotation:ann"));
    pipeline::validate(&cfg, &ds).unwrap();
}

#[tokio::test]
async fn sample_checklist_and_stats_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, recs) = synthetic(dir.path());
    let app = app(&cfg, TestClock::new());

    let (st, _) = call(&app, "GET", "/api/v1/samples/nope", None, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, v) = call(&app, "GET", &format!("/api/v1/samples/{}", recs[0].id), None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["annotation"], Value::Null);

    for (s, n) in [("LM", 4), ("LARGE_CLASS", 6), ("fe", 5)] {
        let (st, v) = call(&app, "GET", &format!("/api/v1/checklists/{s}"), None, None).await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(v["questions"].as_array().unwrap().len(), n);
    }
    let (st, _) = call(&app, "GET", "/api/v1/checklists/GOD_CLASS", None, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (_, body) = call(&app, "GET", "/api/v1/next-sample", Some("ann"), None).await;
    let id = body["sample"]["id"].as_str().unwrap().to_string();
    call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(negative(&id, smell_of(&body["sample"])))).await;
    let (st, s) = call(&app, "GET", "/api/v1/stats", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!((s["a_group"].clone(), s["m_group"].clone(), s["annotated"].clone(), s["pending"].clone()), (json!(2), json!(5), json!(1), json!(4)));
    assert_eq!(s["by_smell"]["LM"]["annotated"], 1);
}

#[tokio::test]
async fn review_of_the_demo_corpus_exports_a_valid_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/demo/src");
    let cfg = config(dir.path(), "demo", root);
    let before = pipeline::run(&cfg).unwrap();
    let app = app(&cfg, TestClock::new());
    let mut reviewed = 0;
    loop {
        let (st, body) = call(&app, "GET", "/api/v1/next-sample", Some("ann"), None).await;
        if st == StatusCode::NO_CONTENT {
            break;
        }
        let s = &body["sample"];
        let smell = smell_of(s);
        // accept generated samples with their recorded refactoring, reject originals
        let req = if s["origin"] == "GENERATED" {
            json!({"sample_id": s["id"], "verdict": "POSITIVE", "answers": yes(smell), "action": s["ground_truth"]})
        } else {
            negative(s["id"].as_str().unwrap(), smell)
        };
        let (st, body) = call(&app, "POST", "/api/v1/annotations", Some("ann"), Some(req)).await;
        assert_eq!(st, StatusCode::CREATED, "{body}");
        reviewed += 1;
    }
    let m_group: usize = Smell::ALL.iter().map(|&s| before.grouped.group_count(s, Group::MGroup, Split::Train)).sum();
    assert_eq!(reviewed, m_group);
    let (_, summary) = call(&app, "POST", "/api/v1/export", None, None).await;
    assert_eq!(summary["records"], json!(before.stats.total + reviewed));
    let ds = pipeline::read_dataset(&cfg.artifacts().dataset()).unwrap();
    pipeline::validate(&cfg, &ds).unwrap();
}
