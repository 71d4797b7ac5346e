//! A geofence violation, reported as one episode with its worst incursion.
//!
//! No-fly zones are horizontal polygons with an altitude band. The monitor
//! opens an episode when a UAV is inside the polygon and the band, extends
//! it while the incursion lasts, and closes it on exit, so a single transit
//! yields a single record regardless of tick rate.

use skytest::{build_report, parse_scenario, prepare_world, run_simulation};

const SCENARIO: &str = r#"{
  "format_version": 1,
  "uavs": [
    {
      "id": "transit",
      "home": {"ned": [-350.0, -250.0, 0.0]},
      "plan": {"waypoints": [{"position": {"ned": [350.0, -250.0, -35.0]}, "capture_radius_m": 8.0}]}
    }
  ],
  "test_properties": [
    {
      "id": "keep-out",
      "kind": "no_fly_zone",
      "polygon": [[-50.0, -300.0], [80.0, -300.0], [80.0, -200.0], [-50.0, -200.0]],
      "floor_m": 10.0,
      "ceiling_m": 120.0
    }
  ],
  "sim": {"dt_s": 0.02, "max_duration_s": 120.0, "seed": 3}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = parse_scenario(SCENARIO).map_err(|i| format!("{i:?}"))?;
    let world = prepare_world(&spec.environment, None)?;
    let art = run_simulation(&spec, &world)?;

    println!("route crosses a 130 x 100 m keep-out box between 10 and 120 m altitude");
    for v in &art.violations {
        println!(
            "episode: {} inside \"{}\" from {:.2} s to {:.2} s, deepest {:.1} {} at ({:.0} N, {:.0} E)",
            v.uav_ids.join("+"),
            v.property_id,
            v.start_time_s,
            v.end_time_s,
            v.worst_value,
            v.units,
            v.position.north_m,
            v.position.east_m
        );
    }
    let report = build_report(&art);
    println!("verdict: {}", if report.verdict.is_pass() { "pass" } else { "fail" });
    assert_eq!(art.violations.len(), 1, "one transit is one episode");
    Ok(())
}
