//! Headless, deterministic multi-UAV simulation test harness.
//!
//! skytest generates parameterized world models, flies waypoint missions for
//! one or more simulated UAVs under configurable wind and sensor noise, checks
//! a set of safety properties while the simulation runs, and emits machine-
//! readable acceptance reports. Everything is driven by a fixed random seed:
//! two runs of the same scenario with the same seed produce byte-identical
//! telemetry and reports, which is what makes the output usable as a
//! regression gate in CI.
//!
//! The crate is organized bottom-up:
//!
//! * [`geodesy`]: WGS-84 geodetic coordinates and the local NED tangent frame.
//! * [`world`]: terrain heightmaps, box obstacles, wind, geofence polygons.
//! * [`vehicle`]: UAV state, flight phases, kinematics, noisy sensor models.
//! * [`mission`]: waypoint plans and the proportional velocity controller.
//! * [`monitors`]: safety properties and the episode-based violation tracker.
//! * [`engine`]: the fixed-timestep simulation loop tying the above together.
//! * [`scenario`]: the JSON scenario format, parser, and semantic validation.
//! * [`report`]: acceptance report construction and on-disk output layout.
//! * [`fuzz`]: environment fuzzing campaigns over scenario parameters.
//! * [`service`]: a local REST task queue wrapping run and fuzz execution.
//! * [`cli`]: the `skytest` command-line entry points.
//!
//! The `examples/` directory is the guided tour; each example is a small
//! runnable program exercising one capability end to end. File formats are
//! documented in `FORMATS.md` at the repository root.

pub mod diag;
mod jsonx;

pub mod geodesy;
pub mod world;

pub mod mission;
pub mod vehicle;

pub mod monitors;

pub mod engine;
pub mod scenario;

pub mod fuzz;
pub mod report;

pub mod cli;
pub mod service;

pub use engine::{run_simulation, RunArtifacts, SimulationConfig, Termination};
pub use fuzz::{parse_fuzz_spec, run_campaign, CampaignReport, FuzzSpec};
pub use geodesy::{FrameOrigin, GeodeticCoord, NedPosition, NedVelocity};
pub use monitors::{SafetyProperty, ViolationRecord};
pub use report::{build_report, write_outputs, AcceptanceReport, Verdict};
pub use scenario::{parse_scenario, prepare_world, validate_semantics, ScenarioSpec};
pub use world::WorldModel;
