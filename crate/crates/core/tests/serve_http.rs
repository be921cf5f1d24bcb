mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use sentibench::bench::predict_json_lines;
use sentibench::model_store::{Family, ModelArtifact};
use sentibench::serve::{router, MAX_BODY_BYTES};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(artifact: &Arc<ModelArtifact>, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(artifact.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn post(body: impl Into<Body>) -> Request<Body> {
    Request::post("/predict")
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap()
}

#[tokio::test]
async fn predict_matches_cli_output_for_every_family() {
    let text = "Mengecewakan! Barang tidak sesuai spesifikasi yang dijanjikan.";
    for family in Family::ALL {
        let artifact = Arc::new(common::trained_artifact(family, 9));
        let (status, body) = call(&artifact, post(json!({ "text": text }).to_string())).await;
        assert_eq!(status, StatusCode::OK);
        let cli: Value = serde_json::from_str(&predict_json_lines(&artifact, &[text]).unwrap()[0]).unwrap();
        assert_eq!(body, cli, "{family}");
        assert_eq!(body["model_family"], family.as_str());
        assert!(body["label"].is_string());
        if family == Family::SvmLinear {
            assert!(body["probabilities"].is_null());
        } else {
            let sum: f64 = body["probabilities"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}

#[tokio::test]
async fn batch_predict_keeps_order() {
    let artifact = Arc::new(common::trained_artifact(Family::Logistic, 9));
    let texts = common::random_inputs(5, 1);
    let (status, body) = call(&artifact, post(json!({ "texts": texts }).to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let cli: Vec<Value> = predict_json_lines(&artifact, &texts)
        .unwrap()
        .iter()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(body, Value::Array(cli));
}

#[tokio::test]
async fn empty_text_is_no_signal() {
    let artifact = Arc::new(common::trained_artifact(Family::Gbdt, 9));
    let (status, body) = call(&artifact, post(r#"{"text": ""}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["no_signal"], true);
    assert_eq!(body["label"], "neutral");
}

#[tokio::test]
async fn health_reports_metadata() {
    let artifact = Arc::new(common::trained_artifact(Family::Bilstm, 9));
    let req = Request::get("/health").body(Body::empty()).unwrap();
    let (status, body) = call(&artifact, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["family"], "bilstm");
    assert_eq!(body["params"], artifact.param_count() as u64);
    assert_eq!(body["seed"], 9);
    assert_eq!(body["config_hash"], artifact.metadata.config_hash.as_str());
}

#[tokio::test]
async fn malformed_json_is_400() {
    let artifact = Arc::new(common::trained_artifact(Family::Logistic, 9));
    for bad in ["{not json", r#"{"txt": "a"}"#, r#"{"text": 5}"#, "[]", ""] {
        let (status, body) = call(&artifact, post(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert!(body["error"].is_string());
    }
}

#[tokio::test]
async fn oversized_body_is_413() {
    let artifact = Arc::new(common::trained_artifact(Family::Logistic, 9));
    let big = format!(r#"{{"text": "{}"}}"#, "a".repeat(MAX_BODY_BYTES));
    let (status, _) = call(&artifact, post(big)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    let fits = format!(r#"{{"text": "{}"}}"#, "a ".repeat(1000));
    let (status, _) = call(&artifact, post(fits)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let artifact = Arc::new(common::trained_artifact(Family::SvmLinear, 9));
    let texts = common::random_inputs(16, 4);
    let handles: Vec<_> = texts
        .iter()
        .map(|t| {
            let a = artifact.clone();
            let body = json!({ "text": t }).to_string();
            tokio::spawn(async move { call(&a, post(body)).await })
        })
        .collect();
    for (h, t) in handles.into_iter().zip(&texts) {
        let (status, body) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        let cli: Value = serde_json::from_str(&predict_json_lines(&artifact, &[t]).unwrap()[0]).unwrap();
        assert_eq!(body, cli);
    }
}
