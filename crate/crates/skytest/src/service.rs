//! A local REST task queue over the simulation and fuzzing pipelines.
//!
//! The service accepts scenario and campaign submissions over HTTP,
//! validates them synchronously (malformed documents never enter the
//! queue), and executes them on a small worker pool in submission order.
//! Results are the same files the library writes everywhere else, stored
//! under `<data_dir>/<task_id>/`; the HTTP layer is a thin file server over
//! them, so a report fetched over HTTP is byte-identical to one produced
//! directly.
//!
//! With the default single worker, completion order equals submission
//! order. With more workers, start order still follows submission order but
//! completions may interleave. Finished tasks persist across restarts;
//! queued or running tasks do not survive one and are marked failed when
//! their directories are found again.
//!
//! There is no authentication: the bind address (loopback unless
//! overridden) is the safety boundary.

use crate::diag::{Diagnostic, Issue};
use crate::engine::run_simulation;
use crate::fuzz::{decode_fuzz_spec, run_campaign, validate_fuzz_spec, write_campaign, FuzzSpec};
use crate::report::{build_report, write_outputs, Verdict};
use crate::scenario::{decode_scenario, prepare_world, validate_semantics, ScenarioSpec};
use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot prepare data directory {path}: {source}")]
    DataDir { path: String, source: std::io::Error },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(#[from] std::io::Error),
}

/// Runtime configuration, assembled from defaults, environment variables,
/// and (in the CLI) flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { bind: "127.0.0.1".to_string(), port: 7878, data_dir: PathBuf::from("skytest-data"), workers: 1 }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `SKYTEST_BIND`, `SKYTEST_PORT`,
    /// `SKYTEST_DATA_DIR`, and `SKYTEST_WORKERS`.
    pub fn from_env() -> Result<Self, String> {
        let mut cfg = ServiceConfig::default();
        if let Ok(v) = std::env::var("SKYTEST_BIND") {
            cfg.bind = v;
        }
        if let Ok(v) = std::env::var("SKYTEST_PORT") {
            cfg.port = v.parse().map_err(|_| format!("SKYTEST_PORT must be a port number, got \"{v}\""))?;
        }
        if let Ok(v) = std::env::var("SKYTEST_DATA_DIR") {
            cfg.data_dir = PathBuf::from(v);
        }
        if let Ok(v) = std::env::var("SKYTEST_WORKERS") {
            cfg.workers = v.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                format!("SKYTEST_WORKERS must be a positive worker count, got \"{v}\"")
            })?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Simulation,
    Campaign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Queued,
    Running,
    Done,
    Failed,
}

/// One task's lifecycle snapshot; persisted as `task.json` in the task
/// directory on every transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub kind: TaskKind,
    pub status: TaskStatus,
    /// Unix epoch seconds.
    pub submitted_at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<f64>,
    /// Result file within the task directory, once Done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Violation episodes (simulations) or failing variants (campaigns).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

enum Job {
    Simulation { id: String, spec: Box<ScenarioSpec> },
    Campaign { id: String, base: Box<ScenarioSpec>, fuzz: Box<FuzzSpec> },
}

pub struct ServiceState {
    data_dir: PathBuf,
    tasks: Mutex<BTreeMap<String, TaskRecord>>,
    queue: Mutex<Option<mpsc::Sender<Job>>>,
    // Kept on the state, not the workers, so a zero-worker service still
    // accepts submissions instead of seeing a closed channel.
    backlog: Arc<Mutex<mpsc::Receiver<Job>>>,
}

/// A running task queue: shared state plus its worker threads. Dropping it
/// stops accepting work, drains the queue, and joins the workers.
pub struct Service {
    state: Arc<ServiceState>,
    workers: Vec<JoinHandle<()>>,
}

fn now_s() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).expect("clock after 1970").as_secs_f64()
}

impl Service {
    /// Opens (or creates) `data_dir`, restores finished tasks from previous
    /// runs, and spawns `workers` execution threads. Zero workers is legal
    /// and leaves every submission queued, which tests use to observe the
    /// queued state deterministically.
    pub fn start(data_dir: &Path, workers: usize) -> Result<Service, ServiceError> {
        std::fs::create_dir_all(data_dir)
            .map_err(|source| ServiceError::DataDir { path: data_dir.display().to_string(), source })?;
        let mut tasks = BTreeMap::new();
        for entry in std::fs::read_dir(data_dir)
            .map_err(|source| ServiceError::DataDir { path: data_dir.display().to_string(), source })?
        {
            let Ok(entry) = entry else { continue };
            let task_path = entry.path().join("task.json");
            let Ok(text) = std::fs::read_to_string(&task_path) else { continue };
            let Ok(mut record) = serde_json::from_str::<TaskRecord>(&text) else { continue };
            if matches!(record.status, TaskStatus::Queued | TaskStatus::Running) {
                // The queue itself did not survive; only its artifacts did.
                record.status = TaskStatus::Failed;
                record.error = Some("interrupted by service restart".to_string());
                record.finished_at = record.finished_at.or(record.started_at).or(Some(record.submitted_at));
                let _ = persist_record(&entry.path(), &record);
            }
            tasks.insert(record.task_id.clone(), record);
        }

        let (sender, receiver) = mpsc::channel::<Job>();
        let state = Arc::new(ServiceState {
            data_dir: data_dir.to_path_buf(),
            tasks: Mutex::new(tasks),
            queue: Mutex::new(Some(sender)),
            backlog: Arc::new(Mutex::new(receiver)),
        });
        let workers = (0..workers)
            .map(|_| {
                let state = Arc::clone(&state);
                std::thread::spawn(move || worker_loop(state))
            })
            .collect();
        Ok(Service { state, workers })
    }

    pub fn state(&self) -> Arc<ServiceState> {
        Arc::clone(&self.state)
    }

    pub fn router(&self) -> Router {
        build_router(self.state())
    }

    /// Stops accepting submissions, lets the workers drain what was already
    /// accepted, and joins them.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        *self.state.queue.lock().expect("queue lock") = None;
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn build_router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/simulations", post(submit_simulation))
        .route("/api/v1/campaigns", post(submit_campaign))
        .route("/api/v1/tasks", get(list_tasks))
        .route("/api/v1/tasks/{id}", get(get_status))
        .route("/api/v1/tasks/{id}/report", get(get_report))
        .with_state(state)
}

/// Binds and serves until interrupted, then drains the queue.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let service = Service::start(&config.data_dir, config.workers)?;
    let addr = format!("{}:{}", config.bind, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or(addr);
    println!("listening on http://{local} (data dir {}, {} workers)", config.data_dir.display(), config.workers);
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    println!("draining the task queue");
    service.shutdown();
    Ok(())
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn list_tasks(State(state): State<Arc<ServiceState>>) -> Json<Value> {
    let tasks = state.tasks.lock().expect("tasks lock");
    let mut list: Vec<&TaskRecord> = tasks.values().collect();
    list.sort_by(|a, b| a.submitted_at.total_cmp(&b.submitted_at).then_with(|| a.task_id.cmp(&b.task_id)));
    Json(json!({"tasks": list}))
}

async fn get_status(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> Response {
    let tasks = state.tasks.lock().expect("tasks lock");
    match tasks.get(&id) {
        Some(record) => (StatusCode::OK, Json(serde_json::to_value(record).expect("record serializes"))).into_response(),
        None => (StatusCode::NOT_FOUND, Json(json!({"error": format!("unknown task \"{id}\"")}))).into_response(),
    }
}

async fn get_report(State(state): State<Arc<ServiceState>>, UrlPath(id): UrlPath<String>) -> Response {
    let record = {
        let tasks = state.tasks.lock().expect("tasks lock");
        tasks.get(&id).cloned()
    };
    let Some(record) = record else {
        return (StatusCode::NOT_FOUND, Json(json!({"error": format!("unknown task \"{id}\"")}))).into_response();
    };
    match record.status {
        TaskStatus::Queued | TaskStatus::Running => (
            StatusCode::CONFLICT,
            Json(json!({"error": "task is not finished", "status": record.status})),
        )
            .into_response(),
        TaskStatus::Failed => (
            StatusCode::GONE,
            Json(json!({"error": "task failed", "detail": record.error})),
        )
            .into_response(),
        TaskStatus::Done => {
            let file = record.result.as_deref().unwrap_or("report.json");
            match std::fs::read(state.data_dir.join(&id).join(file)) {
                Ok(bytes) => Response::builder()
                    .status(StatusCode::OK)
                    .header(header::CONTENT_TYPE, "application/json")
                    .body(Body::from(bytes))
                    .expect("static response parts"),
                Err(e) => (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    Json(json!({"error": format!("result file is missing: {e}")})),
                )
                    .into_response(),
            }
        }
    }
}

async fn submit_simulation(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let value = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let spec = match decode_scenario(&value) {
        Ok(s) => s,
        Err(issues) => return invalid_document("invalid scenario", issues),
    };
    let warnings = match semantic_gate(&spec, "") {
        Ok(w) => w,
        Err(r) => return r,
    };
    enqueue(&state, TaskKind::Simulation, spec, None, warnings)
}

async fn submit_campaign(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let value = match parse_body(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let Some(obj) = value.as_object() else {
        return invalid_document("invalid campaign request", vec![Issue::new("$", "expected an object with \"scenario\" and \"fuzz\" keys")]);
    };
    let mut issues = Vec::new();
    for key in obj.keys() {
        if key != "scenario" && key != "fuzz" {
            issues.push(Issue::new(key.clone(), "unknown key; a campaign request has exactly \"scenario\" and \"fuzz\""));
        }
    }
    let scenario = match obj.get("scenario") {
        Some(v) => match decode_scenario(v) {
            Ok(s) => Some(s),
            Err(sub) => {
                issues.extend(sub.into_iter().map(|i| prefix_issue("scenario", i)));
                None
            }
        },
        None => {
            issues.push(Issue::new("scenario", "required key is missing"));
            None
        }
    };
    let fuzz = match obj.get("fuzz") {
        Some(v) => match decode_fuzz_spec(v) {
            Ok(f) => Some(f),
            Err(sub) => {
                issues.extend(sub.into_iter().map(|i| prefix_issue("fuzz", i)));
                None
            }
        },
        None => {
            issues.push(Issue::new("fuzz", "required key is missing"));
            None
        }
    };
    if let (Some(scenario), Some(fuzz)) = (&scenario, &fuzz) {
        issues.extend(validate_fuzz_spec(fuzz, scenario).into_iter().map(|i| prefix_issue("fuzz", i)));
    }
    if !issues.is_empty() {
        return invalid_document("invalid campaign request", issues);
    }
    let (scenario, fuzz) = (scenario.expect("checked"), fuzz.expect("checked"));
    let warnings = match semantic_gate(&scenario, "scenario") {
        Ok(w) => w,
        Err(r) => return r,
    };
    enqueue(&state, TaskKind::Campaign, scenario, Some(fuzz), warnings)
}

fn parse_body(body: &Bytes) -> Result<Value, Response> {
    serde_json::from_slice(body).map_err(|e| {
        (
            StatusCode::BAD_REQUEST,
            Json(json!({"error": "request body is not valid json", "detail": e.to_string()})),
        )
            .into_response()
    })
}

fn invalid_document(error: &str, issues: Vec<Issue>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({"error": error, "issues": issues}))).into_response()
}

fn prefix_issue(prefix: &str, issue: Issue) -> Issue {
    let path = if issue.path.is_empty() || issue.path == "$" {
        prefix.to_string()
    } else {
        format!("{prefix}.{}", issue.path)
    };
    Issue::new(path, issue.message)
}

fn prefix_diagnostic(prefix: &str, d: Diagnostic) -> Diagnostic {
    if prefix.is_empty() {
        return d;
    }
    let path = if d.path.is_empty() || d.path == "$" { prefix.to_string() } else { format!("{prefix}.{}", d.path) };
    Diagnostic { severity: d.severity, path, message: d.message }
}

/// Builds the world and checks scenario semantics; errors reject the
/// submission with 422, warnings ride along in the 202 body.
fn semantic_gate(spec: &ScenarioSpec, prefix: &str) -> Result<Vec<Diagnostic>, Response> {
    let world = match prepare_world(&spec.environment, None) {
        Ok(w) => w,
        Err(e) => {
            let d = prefix_diagnostic(prefix, Diagnostic::error("environment.map", e.to_string()));
            return Err((
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(json!({"error": "scenario failed semantic validation", "diagnostics": [d]})),
            )
                .into_response());
        }
    };
    let diagnostics: Vec<Diagnostic> =
        validate_semantics(spec, &world).into_iter().map(|d| prefix_diagnostic(prefix, d)).collect();
    if diagnostics.iter().any(|d| d.is_error()) {
        return Err((
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({"error": "scenario failed semantic validation", "diagnostics": diagnostics})),
        )
            .into_response());
    }
    Ok(diagnostics)
}

fn enqueue(
    state: &Arc<ServiceState>,
    kind: TaskKind,
    scenario: ScenarioSpec,
    fuzz: Option<FuzzSpec>,
    warnings: Vec<Diagnostic>,
) -> Response {
    let id = uuid::Uuid::new_v4().to_string();
    let dir = state.data_dir.join(&id);
    let record = TaskRecord {
        task_id: id.clone(),
        kind,
        status: TaskStatus::Queued,
        submitted_at: now_s(),
        started_at: None,
        finished_at: None,
        result: None,
        verdict: None,
        failure_count: None,
        error: None,
    };
    let stored = std::fs::create_dir_all(&dir)
        .and_then(|_| write_json(&dir.join("scenario.json"), &scenario))
        .and_then(|_| match &fuzz {
            Some(f) => write_json(&dir.join("fuzz.json"), f),
            None => Ok(()),
        })
        .and_then(|_| persist_record(&dir, &record));
    if let Err(e) = stored {
        return (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": format!("cannot store the task: {e}")})),
        )
            .into_response();
    }

    let job = match kind {
        TaskKind::Simulation => Job::Simulation { id: id.clone(), spec: Box::new(scenario) },
        TaskKind::Campaign => Job::Campaign {
            id: id.clone(),
            base: Box::new(scenario),
            fuzz: Box::new(fuzz.expect("campaign jobs carry a fuzz spec")),
        },
    };
    // The record must be visible before the job is, or a fast worker would
    // report against a task the map does not know yet.
    state.tasks.lock().expect("tasks lock").insert(id.clone(), record);
    {
        let queue = state.queue.lock().expect("queue lock");
        let sent = queue.as_ref().map(|s| s.send(job));
        match sent {
            Some(Ok(())) => {}
            _ => {
                state.tasks.lock().expect("tasks lock").remove(&id);
                return (
                    StatusCode::SERVICE_UNAVAILABLE,
                    Json(json!({"error": "the service is shutting down"})),
                )
                    .into_response();
            }
        }
    }

    let mut body = json!({"task_id": id, "status": "queued", "kind": kind});
    if !warnings.is_empty() {
        body["warnings"] = serde_json::to_value(&warnings).expect("diagnostics serialize");
    }
    (StatusCode::ACCEPTED, Json(body)).into_response()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn persist_record(dir: &Path, record: &TaskRecord) -> std::io::Result<()> {
    write_json(&dir.join("task.json"), record)
}

fn worker_loop(state: Arc<ServiceState>) {
    let backlog = Arc::clone(&state.backlog);
    loop {
        // Holding the lock while waiting serializes the pulls, which is
        // exactly the submission-order start guarantee.
        let job = { backlog.lock().expect("backlog lock").recv() };
        let Ok(job) = job else { break };
        execute_job(&state, job);
    }
}

fn update_record(state: &ServiceState, id: &str, apply: impl FnOnce(&mut TaskRecord)) {
    let snapshot = {
        let mut tasks = state.tasks.lock().expect("tasks lock");
        let Some(record) = tasks.get_mut(id) else { return };
        apply(record);
        record.clone()
    };
    if let Err(e) = persist_record(&state.data_dir.join(id), &snapshot) {
        eprintln!("warning: cannot persist task {id}: {e}");
    }
}

fn execute_job(state: &ServiceState, job: Job) {
    let id = match &job {
        Job::Simulation { id, .. } | Job::Campaign { id, .. } => id.clone(),
    };
    update_record(state, &id, |r| {
        r.status = TaskStatus::Running;
        r.started_at = Some(now_s());
    });

    let outcome: Result<(String, Verdict, usize), String> = match job {
        Job::Simulation { spec, .. } => run_simulation_job(state, &id, &spec),
        Job::Campaign { base, fuzz, .. } => run_campaign_job(state, &id, &base, &fuzz),
    };

    update_record(state, &id, |r| {
        r.finished_at = Some(now_s());
        match outcome {
            Ok((result, verdict, failure_count)) => {
                r.status = TaskStatus::Done;
                r.result = Some(result);
                r.verdict = Some(verdict);
                r.failure_count = Some(failure_count);
            }
            Err(error) => {
                r.status = TaskStatus::Failed;
                r.error = Some(error);
            }
        }
    });
}

fn run_simulation_job(state: &ServiceState, id: &str, spec: &ScenarioSpec) -> Result<(String, Verdict, usize), String> {
    let world = prepare_world(&spec.environment, None).map_err(|e| e.to_string())?;
    let art = run_simulation(spec, &world).map_err(|e| e.to_string())?;
    let report = build_report(&art);
    write_outputs(&art, &state.data_dir.join(id)).map_err(|e| e.to_string())?;
    Ok(("report.json".to_string(), report.verdict, art.violations.len()))
}

fn run_campaign_job(
    state: &ServiceState,
    id: &str,
    base: &ScenarioSpec,
    fuzz: &FuzzSpec,
) -> Result<(String, Verdict, usize), String> {
    let world = prepare_world(&base.environment, None).map_err(|e| e.to_string())?;
    let dir = state.data_dir.join(id);
    let report = run_campaign(base, fuzz, &world, Some(&dir), 1).map_err(|e| e.to_string())?;
    write_campaign(&report, &dir).map_err(|e| e.to_string())?;
    Ok(("campaign.json".to_string(), report.verdict, report.failing_variants.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::AcceptanceReport;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let builder = axum::http::Request::builder()
            .method(method)
            .uri(uri)
            .header(header::CONTENT_TYPE, "application/json");
        let request = match body {
            Some(v) => builder.body(Body::from(serde_json::to_vec(&v).unwrap())).unwrap(),
            None => builder.body(Body::empty()).unwrap(),
        };
        let response = router.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    async fn call_json(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = call(router, method, uri, body).await;
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    fn quick_scenario(seed: u64) -> Value {
        json!({
            "format_version": 1,
            "uavs": [{
                "id": "solo",
                "home": {"ned": [0, 0, 0]},
                "plan": {"waypoints": [{"position": {"ned": [30, 0, -20]}, "capture_radius_m": 15.0}]}
            }],
            "test_properties": [{"id": "path", "kind": "max_path_deviation", "max_m": 10.0}],
            "sim": {"dt_s": 0.02, "max_duration_s": 60.0, "seed": seed}
        })
    }

    async fn wait_done(router: &Router, id: &str) -> Value {
        for _ in 0..2000 {
            let (status, task) = call_json(router, "GET", &format!("/api/v1/tasks/{id}"), None).await;
            assert_eq!(status, StatusCode::OK);
            match task["status"].as_str().unwrap() {
                "done" | "failed" => return task,
                _ => tokio::time::sleep(std::time::Duration::from_millis(5)).await,
            }
        }
        panic!("task {id} never finished");
    }

    #[tokio::test]
    async fn health_answers() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 0).unwrap();
        let (status, body) = call_json(&service.router(), "GET", "/api/v1/health", None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, json!({"status": "ok"}));
    }

    #[tokio::test]
    async fn rejects_malformed_bodies_synchronously() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 0).unwrap();
        let router = service.router();

        let request = axum::http::Request::builder()
            .method("POST")
            .uri("/api/v1/simulations")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from("{not json"))
            .unwrap();
        let response = router.clone().oneshot(request).await.unwrap();
        assert_eq!(response.status(), StatusCode::BAD_REQUEST);

        // Negative wind speed: schema-invalid, named by exact path.
        let mut bad = quick_scenario(0);
        bad["environment"] = json!({"wind": {"speed_mps": -3.0}});
        let (status, body) = call_json(&router, "POST", "/api/v1/simulations", Some(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        let issues = body["issues"].as_array().unwrap();
        assert!(issues.iter().any(|i| i["path"] == "environment.wind.speed_mps"), "{body}");

        // Home inside an obstacle: schema-valid but semantically wrong.
        let mut inside = quick_scenario(0);
        inside["uavs"][0]["home"] = json!({"ned": [100.0, 100.0, -5.0]});
        let (status, body) = call_json(&router, "POST", "/api/v1/simulations", Some(inside)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        let diags = body["diagnostics"].as_array().unwrap();
        assert!(diags.iter().any(|d| d["path"] == "uavs[0].home" && d["severity"] == "error"), "{body}");

        // Nothing entered the queue.
        let (_, list) = call_json(&router, "GET", "/api/v1/tasks", None).await;
        assert_eq!(list["tasks"].as_array().unwrap().len(), 0);
    }

    #[tokio::test]
    async fn simulation_task_lifecycle_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 1).unwrap();
        let router = service.router();

        let (status, body) = call_json(&router, "POST", "/api/v1/simulations", Some(quick_scenario(5))).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        assert_eq!(body["status"], "queued");
        assert_eq!(body["kind"], "simulation");
        let id = body["task_id"].as_str().unwrap().to_string();

        let task = wait_done(&router, &id).await;
        assert_eq!(task["status"], "done");
        assert_eq!(task["verdict"], "pass");
        assert_eq!(task["failure_count"], 0);
        assert_eq!(task["result"], "report.json");
        assert!(task["started_at"].as_f64().unwrap() >= task["submitted_at"].as_f64().unwrap());
        assert!(task["finished_at"].as_f64().unwrap() >= task["started_at"].as_f64().unwrap());

        let (status, first) = call(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        assert_eq!(status, StatusCode::OK);
        let report: AcceptanceReport = serde_json::from_slice(&first).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.scenario.sim.seed, 5);

        // Bytes are stable across fetches.
        let (_, second) = call(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        assert_eq!(first, second);

        // And identical to the file on disk.
        let on_disk = std::fs::read(dir.path().join(&id).join("report.json")).unwrap();
        assert_eq!(first, on_disk);
    }

    #[tokio::test]
    async fn report_is_409_until_done_and_404_when_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 0).unwrap();
        let router = service.router();

        let (_, body) = call_json(&router, "POST", "/api/v1/simulations", Some(quick_scenario(0))).await;
        let id = body["task_id"].as_str().unwrap().to_string();

        let (status, task) = call_json(&router, "GET", &format!("/api/v1/tasks/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(task["status"], "queued");

        let (status, body) = call_json(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(body["status"], "queued");

        let (status, _) = call_json(&router, "GET", "/api/v1/tasks/no-such-task", None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        let (status, _) = call_json(&router, "GET", "/api/v1/tasks/no-such-task/report", None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn single_worker_finishes_in_submission_order() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 1).unwrap();
        let router = service.router();

        let mut ids = Vec::new();
        for seed in 0..3u64 {
            let (status, body) = call_json(&router, "POST", "/api/v1/simulations", Some(quick_scenario(seed))).await;
            assert_eq!(status, StatusCode::ACCEPTED);
            ids.push(body["task_id"].as_str().unwrap().to_string());
        }
        let mut finished = Vec::new();
        for id in &ids {
            let task = wait_done(&router, id).await;
            assert_eq!(task["status"], "done");
            finished.push(task["finished_at"].as_f64().unwrap());
        }
        assert!(finished[0] <= finished[1] && finished[1] <= finished[2], "completion order broke: {finished:?}");
    }

    #[tokio::test]
    async fn campaign_task_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 1).unwrap();
        let router = service.router();

        let fuzz = json!({
            "format_version": 1,
            "parameters": [{"target": "wind.speed_mps", "range": [0.0, 9.0]}],
            "n_variants": 3,
            "campaign_seed": 11
        });
        let body = json!({"scenario": quick_scenario(0), "fuzz": fuzz});
        let (status, response) = call_json(&router, "POST", "/api/v1/campaigns", Some(body)).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{response}");
        assert_eq!(response["kind"], "campaign");
        let id = response["task_id"].as_str().unwrap().to_string();

        let task = wait_done(&router, &id).await;
        assert_eq!(task["status"], "done");
        assert_eq!(task["result"], "campaign.json");

        let (status, bytes) = call(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        assert_eq!(status, StatusCode::OK);
        let campaign: crate::fuzz::CampaignReport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(campaign.n_variants, 3);
        // The per-variant artifacts are also on disk under the task.
        assert!(dir.path().join(&id).join("variant_0000").join("report.json").is_file());
    }

    #[tokio::test]
    async fn campaign_bodies_are_validated_with_prefixed_paths() {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::start(dir.path(), 0).unwrap();
        let router = service.router();

        let body = json!({
            "scenario": quick_scenario(0),
            "fuzz": {"format_version": 1, "parameters": [{"target": "wind.warp", "range": [0, 1]}]},
            "extra": true
        });
        let (status, response) = call_json(&router, "POST", "/api/v1/campaigns", Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        let issues = response["issues"].as_array().unwrap();
        assert!(issues.iter().any(|i| i["path"] == "fuzz.parameters[0].target"), "{response}");
        assert!(issues.iter().any(|i| i["path"] == "extra"), "{response}");

        let (status, response) = call_json(&router, "POST", "/api/v1/campaigns", Some(json!({"fuzz": {}}))).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        let issues = response["issues"].as_array().unwrap();
        assert!(issues.iter().any(|i| i["path"] == "scenario"), "{response}");
    }

    #[tokio::test]
    async fn failed_executions_surface_as_410() {
        let dir = tempfile::tempdir().unwrap();
        let map = json!({
            "name": "vanishing",
            "origin": {"lat": 38.0, "lon": -90.0, "alt": 150.0},
            "bounds": {"min_north_m": -500.0, "max_north_m": 500.0, "min_east_m": -500.0, "max_east_m": 500.0},
            "heightmap": {"cell_size_m": 1000.0, "rows": 2, "cols": 2, "samples": [0, 0, 0, 0]}
        });
        let map_path = dir.path().join("vanishing.json");
        std::fs::write(&map_path, serde_json::to_string(&map).unwrap()).unwrap();

        // Occupies the single worker long enough for the deletion below to
        // land while the second task is still queued: six loitering UAVs
        // that run out the clock tick by tick.
        let blocker = json!({
            "format_version": 1,
            "uavs": (0..6).map(|i| json!({
                "id": format!("holder-{i}"),
                "home": {"ned": [0.0, -230.0 + 80.0 * i as f64, 0.0]},
                "plan": {"waypoints": [{"position": {"ned": [350.0, -230.0 + 80.0 * i as f64, -40.0]}}]}
            })).collect::<Vec<_>>(),
            "sim": {"dt_s": 0.0025, "max_duration_s": 600.0, "seed": 0}
        });
        let doomed = json!({
            "format_version": 1,
            "environment": {"map": map_path.to_str().unwrap()},
            "uavs": [{
                "id": "solo",
                "home": {"ned": [0, 0, 0]},
                "plan": {"waypoints": [{"position": {"ned": [30, 0, -20]}, "capture_radius_m": 15.0}]}
            }],
            "sim": {"dt_s": 0.02, "max_duration_s": 60.0, "seed": 0}
        });

        let service = Service::start(&dir.path().join("data"), 1).unwrap();
        let router = service.router();
        let (status, _) = call_json(&router, "POST", "/api/v1/simulations", Some(blocker)).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        // Validates against the file now; the worker will re-read it later.
        let (status, body) = call_json(&router, "POST", "/api/v1/simulations", Some(doomed)).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{body}");
        let id = body["task_id"].as_str().unwrap().to_string();
        std::fs::remove_file(&map_path).unwrap();

        let task = wait_done(&router, &id).await;
        assert_eq!(task["status"], "failed", "{task}");
        let (status, body) = call_json(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        assert_eq!(status, StatusCode::GONE);
        assert!(body["detail"].as_str().unwrap().contains("vanishing.json"), "{body}");
    }

    #[tokio::test]
    async fn finished_tasks_survive_restart_and_interrupted_ones_fail() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let service = Service::start(dir.path(), 1).unwrap();
            let router = service.router();
            let (_, body) = call_json(&router, "POST", "/api/v1/simulations", Some(quick_scenario(3))).await;
            let id = body["task_id"].as_str().unwrap().to_string();
            let task = wait_done(&router, &id).await;
            assert_eq!(task["status"], "done");
            service.shutdown();
            id
        };

        // Fabricate a task that was queued when the service died.
        let ghost_dir = dir.path().join("ghost-task");
        std::fs::create_dir_all(&ghost_dir).unwrap();
        let ghost = TaskRecord {
            task_id: "ghost-task".to_string(),
            kind: TaskKind::Simulation,
            status: TaskStatus::Queued,
            submitted_at: 1.0,
            started_at: None,
            finished_at: None,
            result: None,
            verdict: None,
            failure_count: None,
            error: None,
        };
        persist_record(&ghost_dir, &ghost).unwrap();

        let service = Service::start(dir.path(), 1).unwrap();
        let router = service.router();
        let (status, task) = call_json(&router, "GET", &format!("/api/v1/tasks/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(task["status"], "done");
        // The report is still served from disk.
        let (status, bytes) = call(&router, "GET", &format!("/api/v1/tasks/{id}/report"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert!(serde_json::from_slice::<AcceptanceReport>(&bytes).is_ok());

        let (_, ghost_task) = call_json(&router, "GET", "/api/v1/tasks/ghost-task", None).await;
        assert_eq!(ghost_task["status"], "failed");
        assert!(ghost_task["error"].as_str().unwrap().contains("restart"));
    }

    #[tokio::test]
    async fn config_reads_environment() {
        // Env-var tests must not run concurrently with each other; this is
        // the only test touching these variables.
        std::env::set_var("SKYTEST_BIND", "0.0.0.0");
        std::env::set_var("SKYTEST_PORT", "9100");
        std::env::set_var("SKYTEST_DATA_DIR", "/tmp/sky-queue");
        std::env::set_var("SKYTEST_WORKERS", "4");
        let cfg = ServiceConfig::from_env().unwrap();
        assert_eq!(cfg.bind, "0.0.0.0");
        assert_eq!(cfg.port, 9100);
        assert_eq!(cfg.data_dir, PathBuf::from("/tmp/sky-queue"));
        assert_eq!(cfg.workers, 4);

        std::env::set_var("SKYTEST_WORKERS", "0");
        assert!(ServiceConfig::from_env().is_err());
        std::env::set_var("SKYTEST_PORT", "seventy");
        std::env::remove_var("SKYTEST_WORKERS");
        assert!(ServiceConfig::from_env().is_err());
        for var in ["SKYTEST_BIND", "SKYTEST_PORT", "SKYTEST_DATA_DIR", "SKYTEST_WORKERS"] {
            std::env::remove_var(var);
        }
    }
}
