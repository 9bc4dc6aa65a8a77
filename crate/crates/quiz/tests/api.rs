mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::{pool_config, shaped_answers};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::sync::Arc;
use teegen_core::metrics::round1;
use teegen_quiz::http::router;
use teegen_quiz::session::sample_order;
use teegen_quiz::{QuizConfig, QuizService};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, ctype)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b, _) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

/// Participant-facing payloads must never mention ids, sources or truth.
fn assert_blind(cfg: &QuizConfig, payload: &[u8]) {
    let text = String::from_utf8_lossy(payload).to_lowercase();
    for word in ["truth", "source", "generator", "cut", "cyclegan", "synthetic_", "img_"] {
        assert!(!text.contains(word), "payload leaks `{word}`: {text}");
    }
    for p in &cfg.pool {
        assert!(!text.contains(&p.image_id.to_lowercase()));
        assert!(!text.contains(&p.path.display().to_string().to_lowercase()));
    }
}

fn app_with(cfg: QuizConfig) -> Router {
    router(Arc::new(QuizService::open(cfg, None).unwrap()))
}

#[tokio::test]
async fn full_session_is_blinded_until_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pool_config(dir.path());
    let app = app_with(cfg.clone());

    let (status, body, _) = call(&app, "POST", "/sessions", Some(json!({"participant_id": "p1", "role": "expert"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_blind(&cfg, &body);
    let view: Value = serde_json::from_slice(&body).unwrap();
    let id = view["session_id"].as_str().unwrap().to_string();
    assert_eq!(view["total"], 120);
    assert_eq!(view["state"], "familiarizing");
    assert_eq!(view["familiarization_count"], 5);

    let (s, png, ctype) = call(&app, "GET", &format!("/sessions/{id}/familiarization/0"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("image/png"));
    assert!(png.starts_with(b"\x89PNG"));

    let (s, body, _) = call(&app, "POST", &format!("/sessions/{id}/start"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_blind(&cfg, &body);

    let (s, _) = call_json(&app, "GET", &format!("/sessions/{id}/results"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let order = sample_order(&cfg, "p1");
    let answers = shaped_answers(&cfg, &order, [55, 5, 1, 59]);
    let tokens: Vec<String> = view["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["token"].as_str().unwrap().to_string())
        .collect();
    for (n, answer) in answers.iter().enumerate() {
        let (s, img, _) = call(&app, "GET", &format!("/sessions/{id}/images/{}", tokens[n]), None).await;
        assert_eq!(s, StatusCode::OK);
        let expected = std::fs::read(&cfg.pool.iter().find(|p| p.image_id == order[n]).unwrap().path).unwrap();
        assert_eq!(img, expected);
        let body = if n % 2 == 0 {
            json!({"index": n, "answer": answer})
        } else {
            json!({"token": tokens[n], "answer": answer})
        };
        let (s, payload, _) = call(&app, "POST", &format!("/sessions/{id}/responses"), Some(body)).await;
        assert_eq!(s, StatusCode::OK);
        if n + 1 < answers.len() {
            assert_blind(&cfg, &payload);
        }
    }

    let (s, v) = call_json(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["state"], "complete");
    assert_eq!(v["answered"], 120);

    let (s, results) = call_json(&app, "GET", &format!("/sessions/{id}/results"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(results["responses"].as_array().unwrap().len(), 120);
    assert_eq!(round1(results["summary"]["accuracy"].as_f64().unwrap()), 95.0);
    assert_eq!(round1(results["summary"]["f1"].as_f64().unwrap()), 94.8);

    let (s, report) = call_json(&app, "GET", "/analytics", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(report["by_participant"]["p1"]["r_as_s"], 5);
    assert_eq!(report["completed_sessions"], 1);

    // Completed sessions reject changes but accept an identical resubmission.
    let first = answers[0];
    let flipped = match first {
        teegen_core::metrics::Verdict::Real => "synthetic",
        _ => "real",
    };
    let (s, _) = call_json(&app, "POST", &format!("/sessions/{id}/responses"), Some(json!({"index": 0, "answer": flipped}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call_json(&app, "POST", &format!("/sessions/{id}/responses"), Some(json!({"index": 0, "answer": first}))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn analytics_before_any_completion_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(pool_config(dir.path()));
    let (s, body) = call_json(&app, "GET", "/analytics", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("none completed"));
}

#[tokio::test]
async fn revisit_rules() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pool_config(dir.path());
    let app = app_with(cfg.clone());
    let (_, v) = call_json(&app, "POST", "/sessions", Some(json!({"participant_id": "a", "role": "researcher"}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/responses");
    assert_eq!(call_json(&app, "POST", &uri, Some(json!({"index": 3, "answer": "real"}))).await.0, StatusCode::OK);
    let (s, v) = call_json(&app, "POST", &uri, Some(json!({"index": 3, "answer": "synthetic"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["items"][3]["answer"], "synthetic");
    assert_eq!(v["answered"], 1);
    assert_eq!(v["state"], "active");

    cfg.allow_revisit = false;
    let app = app_with(cfg);
    let (_, v) = call_json(&app, "POST", "/sessions", Some(json!({"participant_id": "a", "role": "researcher"}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/responses");
    assert_eq!(call_json(&app, "POST", &uri, Some(json!({"index": 3, "answer": "real"}))).await.0, StatusCode::OK);
    // Double submission of the same answer is harmless.
    assert_eq!(call_json(&app, "POST", &uri, Some(json!({"index": 3, "answer": "real"}))).await.0, StatusCode::OK);
    let (s, body) = call_json(&app, "POST", &uri, Some(json!({"index": 3, "answer": "synthetic"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("revisiting"));
}

#[tokio::test]
async fn bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(pool_config(dir.path()));
    assert_eq!(call_json(&app, "GET", "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/sessions/nope/images/0", None).await.0, StatusCode::NOT_FOUND);
    let (_, v) = call_json(&app, "POST", "/sessions", Some(json!({"participant_id": "z", "role": "expert"}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/images/120"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/images/bogus"), None).await.0, StatusCode::NOT_FOUND);
    let uri = format!("/sessions/{id}/responses");
    assert_eq!(
        call_json(&app, "POST", &uri, Some(json!({"answer": "real"}))).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        call_json(&app, "POST", &uri, Some(json!({"index": 999, "answer": "real"}))).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call_json(&app, "POST", "/sessions", Some(json!({"participant_id": " ", "role": "expert"}))).await.0,
        StatusCode::BAD_REQUEST
    );
}
