//! How simulation cost scales with fleet size.
//!
//! The loop is single-threaded and dominated by per-UAV work plus the
//! pairwise separation and contact checks, so cost grows a bit faster than
//! linearly in fleet size. The point of the numbers is the real-time
//! factor: how many simulated seconds fit in one wall-clock second.

use serde_json::json;
use skytest::scenario::decode_scenario;
use skytest::{prepare_world, run_simulation};

fn fleet(n: usize) -> serde_json::Value {
    let uavs: Vec<serde_json::Value> = (0..n)
        .map(|i| {
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
    json!({
        "format_version": 1,
        "environment": {"map": "blocks", "wind": {"speed_mps": 2.0, "direction_deg": 90.0}},
        "uavs": uavs,
        "test_properties": [
            {"id": "spacing", "kind": "min_separation", "min_m": 2.0},
            {"id": "contact", "kind": "no_collision"}
        ],
        "sim": {"dt_s": 0.02, "max_duration_s": 60.0, "seed": 0}
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("60 simulated seconds at dt = 0.02 (3000 ticks), parallel corridors over the box grid:");
    for n in [1, 5, 10, 20] {
        let spec = decode_scenario(&fleet(n)).map_err(|i| format!("{i:?}"))?;
        let world = prepare_world(&spec.environment, None)?;
        let art = run_simulation(&spec, &world)?;

        let wall: f64 = art.tick_wall_s.iter().sum();
        let sim_s = art.ticks_executed as f64 * art.dt_s;
        let mut ticks = art.tick_wall_s.clone();
        ticks.sort_by(f64::total_cmp);
        let median_us = ticks[ticks.len() / 2] * 1e6;
        println!(
            "  {n:>2} uavs: wall {:6.3} s, {:7.0}x realtime, median tick {median_us:6.1} us",
            wall,
            sim_s / wall
        );
    }
    println!("use `skytest bench` for the command-line version with CSV timing series");
    Ok(())
}
