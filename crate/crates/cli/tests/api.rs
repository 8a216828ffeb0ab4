use std::sync::Arc;

use axum::{
    body::Body,
    http::{Request, StatusCode},
    Router,
};
use dermcascade::{
    anonymizer::generate_review_partition,
    corpus::{ClinicalRecord, LabeledCorpus},
    review::{ReviewSession, VerdictStore},
};
use dermcascade_cli::server::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn session(n: usize, overlap: f64) -> Arc<ReviewSession> {
    let recs = (0..n)
        .map(|i| ClinicalRecord::new(format!("r{i:04}"), format!("paciente <PER> acude {i}"), "psoriasis"))
        .collect();
    let p = generate_review_partition(&LabeledCorpus::new(recs).unwrap(), 1.0, overlap, 11).unwrap();
    Arc::new(ReviewSession::new(p, ["ana".into(), "bea".into()], VerdictStore::in_memory()).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn verdict(id: &str, who: &str, judgment: &str) -> Value {
    json!({ "record_id": id, "reviewer_id": who, "judgment": judgment })
}

#[tokio::test]
async fn health_and_roster() {
    let app = router(session(20, 0.2), None);
    assert_eq!(json_call(&app, "GET", "/api/v1/health", None).await, (StatusCode::OK, json!({"status": "ok"})));
    let (s, v) = json_call(&app, "GET", "/api/v1/reviewers", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["reviewers"], json!(["ana", "bea"]));
}

#[tokio::test]
async fn shared_set_of_112_with_4_conflicts() {
    let s = session(1000, 0.112);
    assert_eq!(s.partition().shared.len(), 112);
    let app = router(s.clone(), None);

    let (st, v) = json_call(&app, "GET", "/api/v1/agreement", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["status"], "incomplete");

    let shared: Vec<String> = s.partition().shared.iter().cloned().collect();
    for (i, id) in shared.iter().enumerate() {
        let (st, _) = json_call(&app, "POST", "/api/v1/verdicts", Some(verdict(id, "ana", "correct"))).await;
        assert_eq!(st, StatusCode::CREATED);
        let jb = if i < 4 { "under-masked" } else { "correct" };
        let (st, _) = json_call(&app, "POST", "/api/v1/verdicts", Some(verdict(id, "bea", jb))).await;
        assert_eq!(st, StatusCode::CREATED);
    }

    let (st, v) = json_call(&app, "GET", "/api/v1/agreement", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["status"], "complete");
    assert_eq!(v["shared"], 112);
    assert_eq!(v["matching"], 108);
    assert!((v["raw_agreement"].as_f64().unwrap() - 108.0 / 112.0).abs() < 1e-12);

    let (st, v) = json_call(&app, "GET", "/api/v1/disagreements", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 4);
    let (st, csv) = call(&app, "GET", "/api/v1/disagreements?format=csv", None).await;
    assert_eq!(st, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("record_id,label,"));

    let (_, v) = json_call(&app, "GET", "/api/v1/progress", None).await;
    assert_eq!(v["shared_judged_by_both"], 112);
}

#[tokio::test]
async fn error_statuses() {
    let s = session(20, 0.2);
    let app = router(s.clone(), None);
    let only_b = s.partition().unique_b().next().unwrap().clone();
    let (st, v) = json_call(&app, "POST", "/api/v1/verdicts", Some(verdict(&only_b, "ana", "correct"))).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    assert!(v["error"].is_string());

    let (st, _) = json_call(&app, "GET", "/api/v1/reviewers/eve/next", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = json_call(&app, "POST", "/api/v1/verdicts", Some(verdict("nope", "ana", "correct"))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, v) = json_call(&app, "GET", "/api/v1/reviewers/ana/next", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["status"], "pending");
    let id = v["item"]["record_id"].as_str().unwrap().to_string();
    assert!(v["item"].get("original_text").is_none_or(Value::is_null));
    assert_eq!(
        json_call(&app, "POST", "/api/v1/verdicts", Some(verdict(&id, "ana", "correct"))).await.0,
        StatusCode::CREATED
    );
    let (st, _) = json_call(&app, "POST", "/api/v1/verdicts", Some(verdict(&id, "ana", "over-masked"))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let mut sup = verdict(&id, "ana", "over-masked");
    sup["supersede"] = json!(true);
    assert_eq!(json_call(&app, "POST", "/api/v1/verdicts", Some(sup)).await.0, StatusCode::CREATED);

    let (st, _) = call(&app, "POST", "/api/v1/verdicts", Some(json!({"record_id": id}))).await;
    assert!(st.is_client_error());
}

#[tokio::test]
async fn queue_drains_to_done() {
    let s = session(10, 0.2);
    let app = router(s.clone(), None);
    loop {
        let (_, v) = json_call(&app, "GET", "/api/v1/reviewers/bea/next", None).await;
        if v["status"] == "done" {
            assert_eq!(v["judged"], v["assigned"]);
            break;
        }
        let id = v["item"]["record_id"].as_str().unwrap();
        assert_eq!(
            json_call(&app, "POST", "/api/v1/verdicts", Some(verdict(id, "bea", "correct"))).await.0,
            StatusCode::CREATED
        );
    }
}
