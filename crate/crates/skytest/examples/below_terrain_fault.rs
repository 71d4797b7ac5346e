//! The classic mission-planning fault: a waypoint below the ground.
//!
//! The leg descends through the terrain surface mid-flight. The collision
//! monitor reports exactly one terrain violation, the vehicle transitions
//! to crashed on the tick the altitude reaches zero, and its state freezes
//! there for the rest of the run.

use skytest::{parse_scenario, prepare_world, run_simulation};

const SCENARIO: &str = r#"{
  "format_version": 1,
  "uavs": [
    {
      "id": "digger",
      "home": {"ned": [-350.0, -250.0, 0.0]},
      "plan": {
        "waypoints": [
          {"position": {"ned": [-250.0, -250.0, -30.0]}, "capture_radius_m": 8.0},
          {"position": {"ned": [150.0, -250.0, 10.0]}, "capture_radius_m": 8.0}
        ]
      }
    }
  ],
  "test_properties": [{"id": "contact", "kind": "no_collision"}],
  "sim": {"dt_s": 0.02, "max_duration_s": 120.0, "seed": 4}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = parse_scenario(SCENARIO).map_err(|i| format!("{i:?}"))?;
    let world = prepare_world(&spec.environment, None)?;
    let art = run_simulation(&spec, &world)?;

    println!("second waypoint commands 10 m below ground level");
    assert_eq!(art.violations.len(), 1);
    let v = &art.violations[0];
    println!(
        "violation: {} at {:.2} s, {} ({})",
        v.uav_ids[0],
        v.start_time_s,
        v.property_id,
        v.detail.as_deref().unwrap_or("no detail")
    );

    let crash = art
        .telemetry
        .iter()
        .find(|r| r.phase.as_str() == "crashed")
        .expect("the descent must end in a crash");
    println!(
        "crashed at {:.2} s, position ({:.1} N, {:.1} E), {:.2} m above the terrain datum",
        crash.time_s,
        crash.position.north_m,
        crash.position.east_m,
        -crash.position.down_m
    );
    // With every UAV down there is nothing left to simulate; the run ends
    // on the crash tick instead of idling to the duration cap.
    println!("termination: {} at {:.2} s of a {} s budget", art.termination.as_str(), crash.time_s, spec.sim.max_duration_s);
    assert_eq!(art.termination.as_str(), "all_crashed");
    assert_eq!(art.telemetry.last().unwrap().tick, crash.tick);
    Ok(())
}
