mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use galaxysearch::cli::{cmd_build, cmd_map};
use galaxysearch::pipeline::{parse_timestamps, RunConfig};
use galaxysearch::service::router;

use common::*;

fn app(fixture: &str) -> Router {
    router(fixture_source(fixture))
}

async fn send(app: Router, req: Request<Body>) -> (StatusCode, String) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
}

fn error_kind(body: &str) -> String {
    let v: Value = serde_json::from_str(body).unwrap();
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health() {
    let (status, body) = send(app("abortion"), get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap(), json!({"status": "ok"}));
}

#[tokio::test]
async fn seeds() {
    let (status, body) = send(app("abortion"), get("/api/seeds?q=abortion&limit=1")).await;
    assert_eq!(status, StatusCode::OK);
    let doc: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(doc["schema"], "galaxysearch.seeds/v1");
    assert_eq!(doc["titles"], json!(["Abortion"]));

    let (status, body) = send(app("abortion"), get("/api/seeds?q=")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_kind(&body), "config");
    let (status, _) = send(app("abortion"), get("/api/seeds?q=abortion&limit=lots")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn graph_rejects_bad_configs() {
    for body in [
        json!({"seeds": []}),
        json!({"seeds": ["Abortion"], "threshold": 1.5}),
        json!({"seeds": ["Abortion"], "max_nodes": 0}),
        json!({"seeds": ["Abortion"], "weights": [0, 0, 0, 0]}),
        json!({"seeds": ["Abortion"], "no_such_field": 1}),
        json!({"seeds": ["Abortion"], "backend": "live"}),
    ] {
        let (status, resp) = send(app("abortion"), post("/api/graph", body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}: {resp}");
        assert_eq!(error_kind(&resp), "config");
    }
    let req = Request::post("/api/graph").body(Body::from("{not json")).unwrap();
    assert_eq!(send(app("abortion"), req).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_seed_is_404() {
    let (status, body) = send(app("abortion"), post("/api/graph", json!({"seeds": ["Nonexistent article"]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_kind(&body), "not_found");
}

#[tokio::test]
async fn graph_matches_cli() {
    let cfg = RunConfig {
        seeds: vec!["Abortion".into(), "Pregnancy".into()],
        weights: "1,0,0,0".parse().unwrap(),
        threshold: 0.0,
        ..RunConfig::default()
    };
    let cli = cmd_build(&fixture_source("abortion"), &cfg, None).unwrap();
    let (status, body) = send(app("abortion"), post("/api/graph", serde_json::to_value(&cfg).unwrap())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, cli);
}

#[tokio::test]
async fn series_matches_cli() {
    let cfg = RunConfig { seeds: vec!["Dominique Strauss-Kahn".into()], ..RunConfig::default() };
    let stamps = parse_timestamps("2010-10-15,2011-07-15").unwrap();
    let cli = cmd_map(&fixture_source("dsk"), &cfg, &stamps, None).unwrap();
    let mut body = serde_json::to_value(&cfg).unwrap();
    body["timestamps"] = json!(["2010-10-15", "2011-07-15T00:00:00Z"]);
    let (status, resp) = send(app("dsk"), post("/api/series", body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(resp, cli);
    let doc: Value = serde_json::from_str(&resp).unwrap();
    assert_eq!(doc["schema"], "galaxysearch.series/v1");
    assert_eq!(doc["frames"].as_array().unwrap().len(), 2);

    let bad = json!({"seeds": ["Dominique Strauss-Kahn"], "timestamps": ["2011-07-15", "2010-10-15"]});
    assert_eq!(send(app("dsk"), post("/api/series", bad)).await.0, StatusCode::BAD_REQUEST);
    let missing = json!({"seeds": ["Dominique Strauss-Kahn"]});
    assert_eq!(send(app("dsk"), post("/api/series", missing)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_agree() {
    let app = app("abortion");
    let body = json!({"seeds": ["Abortion"], "weights": [1, 1, 0, 0]});
    let handles: Vec<_> =
        (0..8).map(|_| tokio::spawn(send(app.clone(), post("/api/graph", body.clone())))).collect();
    let mut bodies = Vec::new();
    for h in handles {
        let (status, b) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
