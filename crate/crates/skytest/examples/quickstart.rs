//! Parse a scenario, simulate it, and grade its safety properties.
//!
//! This is the whole pipeline in one screen: JSON text in, verdict out.

use skytest::{build_report, parse_scenario, prepare_world, run_simulation};

const SCENARIO: &str = r#"{
  "format_version": 1,
  "environment": {
    "map": "blocks",
    "wind": {"speed_mps": 3.0, "direction_deg": 90.0}
  },
  "uavs": [
    {
      "id": "demo",
      "home": {"ned": [-400.0, 50.0, 0.0]},
      "plan": {
        "land_after": true,
        "waypoints": [
          {"position": {"ned": [-400.0, 250.0, -40.0]}, "capture_radius_m": 8.0},
          {"position": {"ned": [-400.0, 250.0, -12.0]}, "capture_radius_m": 8.0}
        ]
      }
    }
  ],
  "test_properties": [
    {"id": "corridor", "kind": "max_path_deviation", "max_m": 20.0},
    {"id": "contact", "kind": "no_collision"}
  ],
  "sim": {"dt_s": 0.02, "max_duration_s": 120.0, "seed": 1}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = parse_scenario(SCENARIO).map_err(|issues| {
        issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n")
    })?;
    let world = prepare_world(&spec.environment, None)?;

    let artifacts = run_simulation(&spec, &world)?;
    println!(
        "{} after {} ticks ({} s simulated)",
        artifacts.termination.as_str(),
        artifacts.ticks_executed,
        artifacts.ticks_executed as f64 * artifacts.dt_s
    );

    let report = build_report(&artifacts);
    for p in &report.property_results {
        println!("  {} {} ({}): {}", if p.verdict.is_pass() { "pass" } else { "FAIL" }, p.property_id, p.kind, p.summary);
    }
    println!("verdict: {}", if report.verdict.is_pass() { "pass" } else { "fail" });
    Ok(())
}
