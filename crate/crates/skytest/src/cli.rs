//! Command-line entry points: `run`, `fuzz`, `validate`, `serve`, `bench`.
//!
//! Exit codes are part of the contract so shells and CI can branch on them:
//! 0 means the command succeeded and every monitored property passed, 1
//! means the run or campaign completed but found violations, 2 means the
//! command itself failed (unreadable input, invalid document, engine error).

use crate::engine::run_simulation;
use crate::fuzz::{parse_fuzz_spec, run_campaign, write_campaign, VariantOutcome};
use crate::report::{build_report, write_outputs, Verdict};
use crate::scenario::{parse_scenario, prepare_world, validate_semantics, ScenarioSpec};
use crate::service::{serve, ServiceConfig};
use crate::world::WorldModel;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "skytest",
    version,
    about = "Deterministic multi-UAV simulation test harness",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and grade its safety properties.
    Run(RunArgs),
    /// Sweep environment parameters across many seeded variants.
    Fuzz(FuzzArgs),
    /// Check a scenario document without simulating it.
    Validate(ValidateArgs),
    /// Serve the REST task queue until interrupted.
    Serve(ServeArgs),
    /// Measure simulation throughput on synthetic fleets.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    scenario: PathBuf,
    /// Directory for report.json and the telemetry series.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FuzzArgs {
    /// Base scenario file (JSON).
    scenario: PathBuf,
    /// Fuzz specification file (JSON).
    fuzz_spec: PathBuf,
    /// Directory for campaign.json and per-variant outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel variant executions.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file (JSON).
    scenario: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Address to bind (default 127.0.0.1, or SKYTEST_BIND).
    #[arg(long)]
    bind: Option<String>,
    /// Port to listen on (default 7878, or SKYTEST_PORT).
    #[arg(long)]
    port: Option<u16>,
    /// Where task artifacts live (default ./skytest-data, or SKYTEST_DATA_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Concurrent task executors (default 1, or SKYTEST_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Fleet sizes to measure, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "5,20")]
    uavs: Vec<usize>,
    /// Simulated seconds per measurement.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Simulation timestep in seconds.
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    /// Directory for per-tick timing series and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    /// Something went wrong and the details were already printed.
    Reported,
    Message(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Message(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main(args: impl IntoIterator<Item = String>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version land on stdout with a zero exit; real usage
            // errors go to stderr with the command-failure code.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Fuzz(args) => cmd_fuzz(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Serve(args) => cmd_serve(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Reported) => 2,
        Err(Failure::Message(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Message(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec, Failure> {
    let text = read_to_string(path)?;
    parse_scenario(&text).map_err(|issues| {
        eprintln!("{} is not a valid scenario:", path.display());
        for issue in &issues {
            eprintln!("  error: {issue}");
        }
        Failure::Reported
    })
}

/// Builds the world and checks scenario semantics. Warnings are printed and
/// tolerated; errors are printed and fail the command.
fn check_semantics(spec: &ScenarioSpec, scenario_path: &Path) -> Result<WorldModel, Failure> {
    let world = prepare_world(&spec.environment, scenario_path.parent())
        .map_err(|e| Failure::Message(format!("environment.map: {e}")))?;
    let diagnostics = validate_semantics(spec, &world);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if diagnostics.iter().any(|d| d.is_error()) {
        return Err(Failure::Reported);
    }
    Ok(world)
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let mut spec = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        spec.sim.seed = seed;
    }
    let world = check_semantics(&spec, &args.scenario)?;
    let art = run_simulation(&spec, &world)?;
    let report = build_report(&art);

    println!(
        "run: {} after {} ticks ({} s simulated), seed {}",
        art.termination.as_str(),
        art.ticks_executed,
        art.ticks_executed as f64 * art.dt_s,
        art.seed
    );
    if report.property_results.is_empty() {
        println!("properties: none monitored");
    } else {
        println!("properties:");
        for p in &report.property_results {
            let verdict = if p.verdict.is_pass() { "pass" } else { "FAIL" };
            println!("  {verdict} {} ({}): {}", p.property_id, p.kind, p.summary);
        }
    }
    if let Some(out) = &args.out {
        let written = write_outputs(&art, out)?;
        println!("outputs: {}", written.report_path.display());
    }
    println!("verdict: {}", if report.verdict.is_pass() { "pass" } else { "fail" });
    Ok(if report.verdict.is_pass() { 0 } else { 1 })
}

fn cmd_fuzz(args: FuzzArgs) -> Result<u8, Failure> {
    let base = load_scenario(&args.scenario)?;
    let fuzz_text = read_to_string(&args.fuzz_spec)?;
    let fuzz = parse_fuzz_spec(&fuzz_text).map_err(|issues| {
        eprintln!("{} is not a valid fuzz spec:", args.fuzz_spec.display());
        for issue in &issues {
            eprintln!("  error: {issue}");
        }
        Failure::Reported
    })?;
    let world = check_semantics(&base, &args.scenario)?;

    let report = run_campaign(&base, &fuzz, &world, args.out.as_deref(), args.jobs).map_err(|e| {
        match e {
            crate::fuzz::FuzzError::Invalid(issues) => {
                eprintln!("{} does not apply to this scenario:", args.fuzz_spec.display());
                for issue in &issues {
                    eprintln!("  error: {issue}");
                }
                Failure::Reported
            }
            other => Failure::Message(other.to_string()),
        }
    })?;

    for v in &report.variants {
        let values: Vec<String> = v.values.iter().map(|(k, val)| format!("{k}={val}")).collect();
        let outcome = match v.outcome {
            VariantOutcome::Pass => "pass".to_string(),
            VariantOutcome::Violations => format!("FAIL ({})", v.failed_properties.join(", ")),
            VariantOutcome::Error => format!("ERROR ({})", v.error.as_deref().unwrap_or("unknown")),
        };
        println!("variant {:04}: {} [{}]", v.index, outcome, values.join(", "));
    }
    if let Some(out) = &args.out {
        let path = write_campaign(&report, out)?;
        println!("outputs: {}", path.display());
    }
    println!(
        "campaign: {}; {} of {} variants failing, {} errored",
        if report.verdict.is_pass() { "pass" } else { "fail" },
        report.failing_variants.len(),
        report.n_variants,
        report.error_variants.len()
    );
    Ok(if report.verdict == Verdict::Pass && report.error_variants.is_empty() { 0 } else { 1 })
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, Failure> {
    let spec = load_scenario(&args.scenario)?;
    check_semantics(&spec, &args.scenario)?;
    println!(
        "ok: {} uav(s), {} propert{}, {} ticks at dt {} s",
        spec.uavs.len(),
        spec.test_properties.len(),
        if spec.test_properties.len() == 1 { "y" } else { "ies" },
        spec.sim.ticks(),
        spec.sim.dt_s
    );
    Ok(0)
}

fn cmd_serve(args: ServeArgs) -> Result<u8, Failure> {
    let mut config = ServiceConfig::from_env()?;
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(data_dir) = args.data_dir {
        config.data_dir = data_dir;
    }
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(Failure::Message("--workers must be at least 1".to_string()));
        }
        config.workers = workers;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(config))?;
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Failure> {
    if args.uavs.is_empty() || args.uavs.contains(&0) {
        return Err(Failure::Message("--uavs needs at least one positive fleet size".to_string()));
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| Failure::Message(format!("cannot create {}: {e}", out.display())))?;
    }
    let mut summaries = Vec::new();
    for &n in &args.uavs {
        let spec = bench_scenario(n, args.duration, args.dt).map_err(|issues| {
            eprintln!("synthetic bench scenario is invalid (check --duration and --dt):");
            for issue in &issues {
                eprintln!("  error: {issue}");
            }
            Failure::Reported
        })?;
        let world = prepare_world(&spec.environment, None)?;
        let art = run_simulation(&spec, &world)?;

        let wall: f64 = art.tick_wall_s.iter().sum();
        let mut sorted = art.tick_wall_s.clone();
        sorted.sort_by(f64::total_cmp);
        let mean_us = wall / sorted.len() as f64 * 1e6;
        let median_us = sorted[sorted.len() / 2] * 1e6;
        let p95_us = sorted[(sorted.len() * 95).div_ceil(100).saturating_sub(1)] * 1e6;
        let sim_s = art.ticks_executed as f64 * art.dt_s;
        let realtime = sim_s / wall;
        println!(
            "bench: uavs={n} ticks={} dt={} wall={wall:.3} s sim={sim_s} s realtime={realtime:.1}x \
             mean_tick={mean_us:.1} us median_tick={median_us:.1} us p95_tick={p95_us:.1} us",
            art.ticks_executed, art.dt_s
        );

        if let Some(out) = &args.out {
            let mut writer = csv::Writer::from_path(out.join(format!("bench_{n}_uavs.csv")))
                .map_err(|e| Failure::Message(e.to_string()))?;
            writer.write_record(["tick", "wall_s"]).map_err(|e| Failure::Message(e.to_string()))?;
            for (tick, wall_s) in art.tick_wall_s.iter().enumerate() {
                writer
                    .write_record([(tick + 1).to_string(), wall_s.to_string()])
                    .map_err(|e| Failure::Message(e.to_string()))?;
            }
            writer.flush().map_err(|e| Failure::Message(e.to_string()))?;
        }
        summaries.push(json!({
            "uavs": n,
            "ticks": art.ticks_executed,
            "dt_s": art.dt_s,
            "sim_s": sim_s,
            "wall_s": wall,
            "realtime_factor": realtime,
            "mean_tick_us": mean_us,
            "median_tick_us": median_us,
            "p95_tick_us": p95_us,
        }));
    }
    if let Some(out) = &args.out {
        let path = out.join("bench.json");
        let mut text = serde_json::to_string_pretty(&json!({"measurements": summaries}))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Failure::Message(format!("cannot write {}: {e}", path.display())))?;
        println!("outputs: {}", path.display());
    }
    Ok(0)
}

/// A synthetic fleet on the built-in obstacle map: `n` UAVs in parallel
/// north-south corridors above the boxes, monitored by every property kind
/// that can fire in flight. Corridors are spaced so the fleet never
/// violates anything; the workload is measurement, not a test.
fn bench_scenario(n: usize, duration_s: f64, dt_s: f64) -> Result<ScenarioSpec, Vec<crate::diag::Issue>> {
    let uavs: Vec<serde_json::Value> = (0..n)
        .map(|i| {
            // Corridors spread across the map, all above the 20 m boxes;
            // homes sit at north -400 where the lattice has no rows.
            let east = -450.0 + 900.0 * (i as f64 + 0.5) / n as f64;
            let alt = 40.0 + 3.0 * (i % 8) as f64;
            json!({
                "id": format!("uav-{i:02}"),
                "home": {"ned": [-400.0, east, 0.0]},
                "plan": {"waypoints": [
                    {"position": {"ned": [400.0, east, -alt]}, "capture_radius_m": 5.0},
                    {"position": {"ned": [-400.0, east, -alt]}, "capture_radius_m": 5.0}
                ]}
            })
        })
        .collect();
    let doc = json!({
        "format_version": 1,
        "environment": {"map": "blocks", "wind": {"speed_mps": 2.0, "direction_deg": 90.0}},
        "uavs": uavs,
        "test_properties": [
            {"id": "corridor", "kind": "max_path_deviation", "max_m": 200.0},
            {"id": "spacing", "kind": "min_separation", "min_m": 2.0},
            {"id": "contact", "kind": "no_collision"},
            {"id": "keep-out", "kind": "no_fly_zone",
             "polygon": [[460.0, 460.0], [495.0, 460.0], [495.0, 495.0], [460.0, 495.0]]}
        ],
        "sim": {"dt_s": dt_s, "max_duration_s": duration_s, "seed": 0}
    });
    crate::scenario::decode_scenario(&doc)
}
