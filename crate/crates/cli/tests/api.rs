use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use bop2te_cli::server::{router, AppState};
use bop2te_cli::store::Store;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn scenario4() -> Value {
    json!({
        "eta_e": 0.6, "eta_e_null": 0.3, "eta_t": 0.2, "eta_t_null": 0.4,
        "alpha_targets": {"alpha00": 0.025, "alpha01": 0.1, "alpha10": 0.1},
        "schedule": [{"n": 9, "check_efficacy": false}, {"n": 18}, {"n": 36}]
    })
}

fn app() -> Router {
    router(AppState::new(Arc::new(Store::in_memory()), 2))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router) -> String {
    let (status, doc) = call(app, Method::POST, "/designs", Some(scenario4())).await;
    assert_eq!(status, StatusCode::OK, "{doc}");
    doc["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn healthz() {
    let (status, body) = call(&app(), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn design_lifecycle() {
    let app = app();
    let id = create(&app).await;

    let (status, doc) = call(&app, Method::GET, &format!("/designs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let looks = doc["result"]["boundaries"]["looks"].as_array().unwrap();
    let le: Vec<_> = looks.iter().map(|l| l["l_e"].clone()).collect();
    let lt: Vec<_> = looks.iter().map(|l| l["l_t"].clone()).collect();
    assert_eq!(le, vec![Value::Null, json!(5), json!(14)]);
    assert_eq!(lt, vec![json!(4), json!(7), json!(11)]);
    assert_eq!(doc["spec_hash"], doc["result_spec_hash"]);

    let (status, oc) =
        call(&app, Method::POST, &format!("/designs/{id}/oc"), Some(json!({"phi_grid": [0.5, 2.0]}))).await;
    assert_eq!(status, StatusCode::OK);
    let pcp00 = oc["hypotheses"][0]["pcp"].as_f64().unwrap();
    assert!(pcp00 <= 0.025);
    assert_eq!(oc["phi_sensitivity"].as_array().unwrap().len(), 2);
    // empty body means defaults
    let (status, _) = call(&app, Method::POST, &format!("/designs/{id}/oc"), None).await;
    assert_eq!(status, StatusCode::OK);

    let url = format!("/designs/{id}/decisions");
    let (status, d) = call(&app, Method::POST, &url, Some(json!({"n": 9, "x_e": 1, "x_t": 2}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["decision"], "go");
    let (status, d) = call(&app, Method::POST, &url, Some(json!({"n": 18, "x_e": 6, "x_t": 5}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["decision"], "go");
    let (status, err) = call(&app, Method::POST, &url, Some(json!({"n": 9, "x_e": 1, "x_t": 2}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "conflict");
    // counts cannot shrink between looks
    let (status, _) = call(&app, Method::POST, &url, Some(json!({"n": 36, "x_e": 4, "x_t": 5}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    // not a scheduled look
    let (status, _) = call(&app, Method::POST, &url, Some(json!({"n": 30, "x_e": 10, "x_t": 5}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, log) = call(&app, Method::GET, &url, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(log.as_array().unwrap().iter().map(|e| e["n"].as_u64().unwrap()).collect::<Vec<_>>(), vec![9, 18]);

    let (status, p1) = call(&app, Method::GET, &format!("/designs/{id}/protocol"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, p2) = call(&app, Method::GET, &format!("/designs/{id}/protocol"), None).await;
    assert_eq!(p1, p2);
    assert!(p1["text"].as_str().unwrap().contains(&id));
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (status, err) = call(&app, Method::GET, "/designs/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["kind"], "not_found");
    for uri in ["/designs/nope/protocol", "/designs/nope/decisions", "/jobs/nope"] {
        assert_eq!(call(&app, Method::GET, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, _) =
        call(&app, Method::POST, "/designs/nope/decisions", Some(json!({"n": 9, "x_e": 0, "x_t": 0}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let mut bad = scenario4();
    bad["alpha_targets"]["alpha01"] = json!(-0.1);
    let (status, err) = call(&app, Method::POST, "/designs", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "validation");
    assert!(err["error"]["field"].as_str().unwrap().contains("alpha"));

    let (status, _) = call(&app, Method::POST, "/designs", Some(json!({"eta_e": 0.6}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, "/designs", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

async fn wait_for(app: &Router, job: &str) -> Value {
    for _ in 0..600 {
        let (status, body) = call(app, Method::GET, &format!("/jobs/{job}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if body["status"] == "succeeded" || body["status"] == "failed" {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {job} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn async_jobs() {
    let app = app();
    let mut req = scenario4();
    req["async"] = json!(true);
    let (status, accepted) = call(&app, Method::POST, "/designs", Some(req)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = accepted["job_id"].as_str().unwrap().to_string();
    assert_eq!(accepted["status_url"], format!("/jobs/{job}"));
    let done = wait_for(&app, &job).await;
    assert_eq!(done["status"], "succeeded", "{done}");
    let id = done["result"]["id"].as_str().unwrap();
    assert_eq!(call(&app, Method::GET, &format!("/designs/{id}"), None).await.0, StatusCode::OK);

    let body = json!({
        "arms": ["low", "high"],
        "per_arm_design": {
            "eta_e": 0.56, "eta_e_null": 0.24, "eta_t": 0.18, "eta_t_null": 0.42,
            "alpha_targets": {"alpha00": 0.025, "alpha01": 0.1, "alpha10": 0.1},
            "schedule": [{"n": 12}, {"n": 24}]
        },
        "truth": [{"pi_e": 0.3, "pi_t": 0.1}, {"pi_e": 0.6, "pi_t": 0.2}],
        "replicates": 300,
        "seed": 9,
        "async": true
    });
    let (status, accepted) = call(&app, Method::POST, "/simulations/multidose", Some(body.clone())).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let done = wait_for(&app, accepted["job_id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "succeeded");

    let mut sync = body;
    sync["async"] = json!(false);
    let (status, direct) = call(&app, Method::POST, "/simulations/multidose", Some(sync)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(direct, done["result"]);
}

#[tokio::test]
async fn multidose_validation() {
    let app = app();
    let body = |arms: Value, truth: Value, reps: u64| json!({"arms": arms, "per_arm_design": scenario4(), "truth": truth, "replicates": reps});
    let one = json!([{"pi_e": 0.3, "pi_t": 0.1}]);
    let (status, r) =
        call(&app, Method::POST, "/simulations/multidose", Some(body(json!(["only"]), one.clone(), 200))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["arms"].as_array().unwrap().len(), 1);
    for bad in
        [body(json!([]), json!([]), 200), body(json!(["a", "b"]), one.clone(), 200), body(json!(["only"]), one, 0)]
    {
        let (status, err) = call(&app, Method::POST, "/simulations/multidose", Some(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{err}");
    }
}

#[tokio::test]
async fn cli_and_api_agree() {
    let app = app();
    let id = create(&app).await;
    let (_, api_doc) = call(&app, Method::GET, &format!("/designs/{id}"), None).await;
    let (_, api_oc) =
        call(&app, Method::POST, &format!("/designs/{id}/oc"), Some(json!({"phi_grid": [0.5, 2.0]}))).await;

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.json");
    std::fs::write(&cfg, scenario4().to_string()).unwrap();
    let run = |args: &[&str]| -> Value {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_bop2te"))
            .args(args)
            .env("BOP2TE_STORE", dir.path().join("s.jsonl"))
            .output()
            .unwrap();
        assert!(out.status.success());
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let cli_doc = run(&["design", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(cli_doc["result"], api_doc["result"]);
    assert_eq!(cli_doc["result_hash"], api_doc["result_hash"]);
    let cli_oc = run(&["oc", "--id", cli_doc["id"].as_str().unwrap(), "--phi-grid", "0.5,2", "--format", "json"]);
    assert_eq!(cli_oc["hypotheses"], api_oc["hypotheses"]);
    assert_eq!(cli_oc["phi_sensitivity"], api_oc["phi_sensitivity"]);
}
