use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use hdal_cli::commands;
use hdal_cli::service::{router, AppState};
use hdal_cli::session::session_file;
use hdal_core::harness::{read_curve, RunOptions};
use hdal_core::Strategy;

fn session_body(strategy: &str) -> Value {
    json!({
        "dataset_ref": {
            "kind": "blobs",
            "classes": 4,
            "features": 8,
            "train_per_class": 50,
            "test_per_class": 20,
            "seed": 9
        },
        "strategy": strategy,
        "K": 20,
        "n_init": 20,
        "seed": 1,
        "label_budget": 80,
        "ensemble": { "dim": 512, "members": 4, "bandwidth": 0.35 }
    })
}

/// Ground-truth pool labels, in pool order, for the dataset above.
fn truth() -> Vec<usize> {
    let ds = hdal_core::harness::synth_blobs(&hdal_core::harness::BlobSpec {
        classes: 4,
        features: 8,
        train_per_class: 50,
        test_per_class: 20,
        seed: 9,
        ..Default::default()
    });
    ds.train_labels()
}

fn app(state_dir: &Path) -> Router {
    router(Arc::new(AppState::open(state_dir, Path::new(".")).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, body: &Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(&body.to_string())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn batch_indices(batch: &Value) -> Vec<usize> {
    batch["samples"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["index"].as_u64().unwrap() as usize)
        .collect()
}

fn labels_for(indices: &[usize], truth: &[usize]) -> String {
    let labels: Vec<Value> = indices.iter().map(|&i| json!({"index": i, "label": truth[i]})).collect();
    json!({ "labels": labels }).to_string()
}

#[tokio::test]
async fn state_machine_walk() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let truth = truth();
    let id = create(&app, &session_body("heal")).await;

    let (_, status) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status["status"], "idle");
    assert_eq!(status["round"], 1);
    assert_eq!(status["labeled_count"], 0);
    assert!(status["latest_test_accuracy"].is_null());

    let (code, batch) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(batch["round"], 1);
    let indices = batch_indices(&batch);
    assert_eq!(indices.len(), 20);
    let first = &batch["samples"][0];
    assert!(first["pseudo_label"].is_null());
    assert_eq!(first["features"].as_array().unwrap().len(), 8);

    // Requesting again returns the same pending batch.
    let (_, again) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(again, batch);
    let (_, status) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status["status"], "awaiting_labels");

    let (code, resp) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&indices[..5], &truth))).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(resp, json!({"accepted": 5, "remaining": 15}));
    let (_, partial) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(partial["samples"][0]["label"], truth[indices[0]]);

    let (_, resp) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&indices[5..], &truth))).await;
    assert_eq!(resp, json!({"accepted": 15, "remaining": 0}));

    let (_, status) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status["status"], "idle");
    assert_eq!(status["round"], 2);
    assert_eq!(status["labeled_count"], 20);
    assert!(status["latest_test_accuracy"].as_f64().unwrap() > 0.0);

    // Labels without a pending batch are a conflict.
    let (code, _) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&indices[..1], &truth))).await;
    assert_eq!(code, StatusCode::CONFLICT);

    let (_, batch) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(batch["round"], 2);
    assert!(batch["samples"][0]["pseudo_label"].is_u64());
    assert!(batch["samples"][0]["score"].as_f64().unwrap() <= 0.0);
    let next = batch_indices(&batch);
    assert!(next.iter().all(|i| !indices.contains(i)));

    // Drive to the label budget.
    call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&next, &truth))).await;
    for _ in 0..2 {
        let (_, batch) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
        call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&batch_indices(&batch), &truth))).await;
    }
    let (_, status) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status["status"], "finished");
    assert_eq!(status["labeled_count"], 80);
    assert_eq!(status["round"], 4);
    let (code, _) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(code, StatusCode::CONFLICT);
    let (_, curve) = call(&app, "GET", &format!("/sessions/{id}/curve"), None).await;
    assert_eq!(curve["points"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn rejected_labels_leave_session_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let truth = truth();
    let id = create(&app, &session_body("heal_diverse")).await;
    let (_, batch) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    let indices = batch_indices(&batch);
    call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&indices[..3], &truth))).await;

    let file = session_file(dir.path(), &id);
    let saved = fs::read(&file).unwrap();
    let (_, status_before) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    let not_pending = (0..truth.len()).find(|i| !indices.contains(i)).unwrap();

    // One bad entry rejects the whole request.
    let mixed = labels_for(&[indices[3], not_pending], &truth);
    let (code, err) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&mixed)).await;
    assert_eq!(code, StatusCode::CONFLICT);
    assert!(err["error"].as_str().unwrap().contains(&not_pending.to_string()));

    let bad_label = json!({"labels": [{"index": indices[3], "label": 99}]}).to_string();
    let (code, _) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&bad_label)).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);

    for body in ["not json", "{}", r#"{"labels": [{"index": 1}]}"#, r#"{"labels": [], "extra": 1}"#] {
        let (code, _) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(body)).await;
        assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    }

    assert_eq!(fs::read(&file).unwrap(), saved);
    let (_, status_after) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status_after, status_before);
    let (_, batch_after) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(batch_indices(&batch_after), indices);
    let accepted = batch_after["samples"].as_array().unwrap().iter().filter(|s| !s["label"].is_null()).count();
    assert_eq!(accepted, 3);
}

#[tokio::test]
async fn unknown_sessions_and_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for (method, path) in [("GET", "batch"), ("GET", "status"), ("GET", "curve"), ("POST", "labels")] {
        let (code, _) = call(&app, method, &format!("/sessions/nope/{path}"), Some(r#"{"labels": []}"#)).await;
        assert_eq!(code, StatusCode::NOT_FOUND, "{path}");
    }

    let mut unknown_strategy = session_body("heal");
    unknown_strategy["strategy"] = json!("bald");
    let mut zero_k = session_body("heal");
    zero_k["K"] = json!(0);
    let mut missing_file = session_body("heal");
    missing_file["dataset_ref"] = json!({"kind": "csv", "train": "no/such.csv", "label_column": "y"});
    let mut extra = session_body("heal");
    extra["colour"] = json!("blue");
    for body in [unknown_strategy, zero_k, missing_file, extra] {
        let (code, err) = call(&app, "POST", "/sessions", Some(&body.to_string())).await;
        assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY, "{body}: {err}");
    }
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());

    let (code, v) = call(&app, "GET", "/strategies", None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(v["strategies"].as_array().unwrap().len(), Strategy::ALL.len());
}

#[tokio::test]
async fn restart_resumes_pending_batch() {
    let dir = tempfile::tempdir().unwrap();
    let truth = truth();
    let (id, batch, status) = {
        let app = app(dir.path());
        let id = create(&app, &session_body("heal")).await;
        let (_, b) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
        call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&batch_indices(&b), &truth))).await;
        let (_, b) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
        call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&batch_indices(&b)[..4], &truth))).await;
        let (_, b) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
        let (_, s) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
        (id, b, s)
    };

    let app = app(dir.path());
    let (_, status_after) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status_after, status);
    assert_eq!(status_after["status"], "awaiting_labels");
    let (_, batch_after) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(batch_after, batch);
    let rest = &batch_indices(&batch)[4..];
    let (_, resp) = call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(rest, &truth))).await;
    assert_eq!(resp["remaining"], 0);
}

#[tokio::test]
async fn crash_during_training_completes_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let truth = truth();
    let id = {
        let app = app(dir.path());
        let id = create(&app, &session_body("heal")).await;
        let (_, b) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
        let indices = batch_indices(&b);
        call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&indices[..19], &truth))).await;
        // Simulate a crash right after the last label was persisted and
        // training began.
        let file = session_file(dir.path(), &id);
        let mut saved: Value = serde_json::from_slice(&fs::read(&file).unwrap()).unwrap();
        saved["accepted"].as_array_mut().unwrap().push(json!([indices[19], truth[indices[19]]]));
        saved["status"] = json!("training");
        fs::write(&file, saved.to_string()).unwrap();
        id
    };
    let app = app(dir.path());
    let (_, status) = call(&app, "GET", &format!("/sessions/{id}/status"), None).await;
    assert_eq!(status["status"], "idle");
    assert_eq!(status["labeled_count"], 20);
    assert_eq!(status["round"], 2);
}

#[tokio::test]
async fn simulated_oracle_session_matches_cli_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
strategies = ["heal_diverse"]
batch_size = 20
n_init = 20
seeds = [1]
label_budget = 80
output = "out"

[dataset]
kind = "blobs"
classes = 4
features = 8
train_per_class = 50
test_per_class = 20
seed = 9

[ensemble]
dim = 512
members = 4
bandwidth = 0.35
"#;
    let config_path = dir.path().join("run.toml");
    fs::write(&config_path, config).unwrap();
    commands::run(&config_path, &RunOptions::default()).unwrap();
    let expected = read_curve(&dir.path().join("out"), "blobs", Strategy::HealDiverse, 1);

    let state_dir = dir.path().join("sessions");
    let app = app(&state_dir);
    let truth = truth();
    let id = create(&app, &session_body("heal_diverse")).await;
    loop {
        let (code, batch) = call(&app, "GET", &format!("/sessions/{id}/batch"), None).await;
        if code == StatusCode::CONFLICT {
            break;
        }
        call(&app, "POST", &format!("/sessions/{id}/labels"), Some(&labels_for(&batch_indices(&batch), &truth))).await;
    }
    let (_, curve) = call(&app, "GET", &format!("/sessions/{id}/curve"), None).await;
    let got: Vec<(u64, u64, f64)> = curve["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            (
                p["round"].as_u64().unwrap(),
                p["labeled_count"].as_u64().unwrap(),
                p["test_accuracy"].as_f64().unwrap(),
            )
        })
        .collect();
    let expected = expected.unwrap();
    let want: Vec<(u64, u64, f64)> = expected
        .points
        .iter()
        .map(|p| (p.round as u64, p.labeled_count as u64, p.test_accuracy))
        .collect();
    assert_eq!(got.len(), 4);
    assert_eq!(got, want);
}
