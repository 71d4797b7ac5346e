//! The REST task queue, driven end to end without leaving the process.
//!
//! `Service::start` spawns the worker pool and returns an axum router that
//! can be served on a socket (`skytest serve`) or, as here, called directly.
//! Tasks move Queued -> Running -> Done; results are plain files under the
//! data directory, and the report endpoint returns exactly those bytes.

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use skytest::service::Service;
use tower::ServiceExt;

const SCENARIO: &str = r#"{
  "format_version": 1,
  "uavs": [
    {
      "id": "queued-flight",
      "home": {"ned": [-300.0, 150.0, 0.0]},
      "plan": {"waypoints": [{"position": {"ned": [-100.0, 150.0, -30.0]}, "capture_radius_m": 10.0}]}
    }
  ],
  "test_properties": [{"id": "contact", "kind": "no_collision"}],
  "sim": {"dt_s": 0.02, "max_duration_s": 90.0, "seed": 11}
}"#;

async fn call(router: &axum::Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri).header(header::CONTENT_TYPE, "application/json");
    let request = match body {
        Some(b) => builder.body(Body::from(b.to_string())).unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data_dir = tempfile::tempdir()?;
    let service = Service::start(data_dir.path(), 1)?;
    let router = service.router();

    let (status, body) = call(&router, "GET", "/api/v1/health", None).await;
    println!("health: {status} {}", String::from_utf8_lossy(&body));

    // A malformed submission is rejected synchronously and never queued.
    let (status, body) = call(&router, "POST", "/api/v1/simulations", Some(r#"{"format_version": 1}"#)).await;
    println!("invalid submission: {status} {}", String::from_utf8_lossy(&body));

    let (status, body) = call(&router, "POST", "/api/v1/simulations", Some(SCENARIO)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let accepted: serde_json::Value = serde_json::from_slice(&body)?;
    let id = accepted["task_id"].as_str().unwrap().to_string();
    println!("accepted: task {id} ({})", accepted["status"]);

    // Poll until the worker finishes; early polls may see 409 on the report.
    let report = loop {
        let (status, body) = call(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        match status {
            StatusCode::OK => break body,
            StatusCode::CONFLICT => tokio::time::sleep(std::time::Duration::from_millis(10)).await,
            other => panic!("unexpected status {other}: {}", String::from_utf8_lossy(&body)),
        }
    };
    let parsed: skytest::AcceptanceReport = serde_json::from_slice(&report)?;
    println!("report: verdict {:?}, {} violation(s)", parsed.verdict, parsed.violations.len());

    let on_disk = std::fs::read(data_dir.path().join(&id).join("report.json"))?;
    assert_eq!(report, on_disk);
    println!("the endpoint served the report file byte for byte");

    service.shutdown();
    Ok(())
}
