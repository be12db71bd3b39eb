use std::collections::BTreeMap;
use std::sync::Arc;

use argchat::server::{router, AppState};
use argchat_core::dialogue::DialogueEngine;
use argchat_core::fixtures;
use argchat_core::store::{SessionDefaults, SessionStore};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let engines = BTreeMap::from([
        ("reference".to_owned(), DialogueEngine::new(Arc::new(fixtures::reference_kb()))),
        ("small".to_owned(), DialogueEngine::new(Arc::new(fixtures::baseline_only_kb()))),
    ]);
    let store = SessionStore::in_memory(engines, SessionDefaults::default());
    router(Arc::new(AppState { store, default_kb: "reference".into() }))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, variant: &str, policy: &str) -> String {
    let (status, body) =
        call(app, Method::POST, "/sessions", Some(json!({"variant": variant, "policy": policy}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_owned()
}

async fn input(app: &Router, id: &str, seq: u64, value: &str) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/sessions/{id}/input"), Some(json!({"seq": seq, "value": value}))).await
}

#[tokio::test]
async fn health_lists_kbs() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["kbs"], json!(["reference", "small"]));
}

#[tokio::test]
async fn create_returns_intention_prompt() {
    let app = app();
    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({"variant": "I", "policy": "strategic"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["next_seq"], 0);
    assert_eq!(body["prompt"]["input"]["options"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn create_errors() {
    let app = app();
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"variant": "I", "policy": "baseline", "kb_id": "nope"})),
    )
    .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_kb")));

    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"variant": "II", "policy": "strategic", "kb_id": "small"})),
    )
    .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("policy_unavailable")));

    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({"variant": "III", "policy": "baseline"}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let (status, body) = call(&app, Method::GET, "/sessions/s999999", None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));
}

#[tokio::test]
async fn invalid_stance_lists_allowed_values() {
    let app = app();
    let id = create(&app, "I", "strategic").await;
    for (seq, v) in ["probably_wouldnt", "health", "taste"].into_iter().enumerate() {
        assert_eq!(input(&app, &id, seq as u64, v).await.0, StatusCode::OK);
    }
    let (status, body) = input(&app, &id, 3, "maybe").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "invalid_input");
    assert_eq!(body["allowed"], json!(["agree", "disagree"]));
    // Rejected input does not consume the sequence number.
    assert_eq!(input(&app, &id, 3, "agree").await.0, StatusCode::OK);
}

#[tokio::test]
async fn retries_are_idempotent() {
    let app = app();
    let id = create(&app, "II", "baseline").await;
    let first = input(&app, &id, 0, "might").await;
    let (_, view) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let len = view["transcript"].as_array().unwrap().len();

    let again = input(&app, &id, 0, "might").await;
    assert_eq!(first, again);
    let (_, view) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(view["transcript"].as_array().unwrap().len(), len);
    assert_eq!(view["next_seq"], 1);

    let (status, body) = input(&app, &id, 0, "definitely_would").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("seq_conflict")));
    assert_eq!(body["expected_seq"], 1);
    let (status, body) = input(&app, &id, 5, "health").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("seq_conflict")));
}

#[tokio::test]
async fn full_session_reports_summary() {
    let app = app();
    let id = create(&app, "I", "baseline").await;
    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/summary"), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("not_done")));

    let mut script = vec!["probably_wouldnt", "environment", "it tastes good"];
    script.extend(std::iter::repeat_n("agree", 12));
    script.push("might");
    let mut last = Value::Null;
    for (seq, v) in script.iter().enumerate() {
        let (status, body) = input(&app, &id, seq as u64, v).await;
        assert_eq!(status, StatusCode::OK, "{v}: {body}");
        last = body;
    }
    assert!(last.get("prompt").is_none());
    assert_eq!(last["done_summary"]["intention_points"], 1);

    let (status, view) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["status"], "done");
    assert!(view["prompt"].is_null());
    let transcript = view["transcript"].as_array().unwrap();
    let counters: Vec<&Value> = transcript.iter().filter(|e| e["kind"] == "counterargument").collect();
    assert_eq!(counters.len(), 12);
    assert!(counters.iter().all(|c| c["counter_id"].is_string() && c["text"] != c["counter_id"]));

    let (status, summary) = call(&app, Method::GET, &format!("/sessions/{id}/summary"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["n_participants"], 1);
    assert_eq!(summary["sum_intention_points"], 1);

    let (status, body) = input(&app, &id, script.len() as u64, "agree").await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("session_done")));

    let (_, list) = call(&app, Method::GET, "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn chi_square_endpoint() {
    let app = app();
    let (status, body) =
        call(&app, Method::POST, "/analysis/chi-square", Some(json!({"table": [[5, 22], [17, 9]]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert!((body["statistic"].as_f64().unwrap() - 11.98).abs() < 0.01, "{body}");
    assert_eq!(body["df"], 1);
    assert!((body["p_value"].as_f64().unwrap() - 0.000537).abs() < 1e-5);

    let (status, body) =
        call(&app, Method::POST, "/analysis/chi-square", Some(json!({"table": [[0, 0], [3, 4]]}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_table")));
    let (status, _) = call(&app, Method::POST, "/analysis/chi-square", Some(json!({"table": [[1, 2], [3]]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
