//! Waypoint plans and the per-tick velocity controller.
//!
//! The controller is a proportional go-to-waypoint law with a magnitude
//! clamp: `cmd = clamp(gain * (waypoint - estimate), max_speed)`. It is the
//! minimal controller that captures waypoints smoothly while leaving room for
//! wind and navigation noise to bend the flown path away from the intended
//! one, which is exactly the failure class the deviation monitor measures.
//!
//! "Intended flight path" always means the straight segment between
//! consecutive waypoints (from home to the first waypoint initially), so the
//! deviation monitor has unambiguous geometry to measure against.

use crate::geodesy::{NedPosition, NedVelocity};
use serde::{Deserialize, Serialize};

/// Where the controller gets its position estimate: ground truth isolates
/// environmental effects; GPS feeds the noisy fix back into control, which
/// composes sensor degradation into the flown path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NavigationSource {
    #[default]
    Truth,
    Gps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: NedPosition,
    pub capture_radius_m: f64,
}

impl Waypoint {
    pub fn new(position: NedPosition, capture_radius_m: f64) -> Self {
        Waypoint { position, capture_radius_m }
    }
}

/// An ordered waypoint mission for one UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub waypoints: Vec<Waypoint>,
    pub land_after: bool,
    pub navigation: NavigationSource,
}

/// Controller configuration, derived from the vehicle parameters plus the
/// proportional gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub gain_per_s: f64,
    pub max_speed_mps: f64,
    pub descent_speed_mps: f64,
}

/// What the controller wants this tick.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub command: NedVelocity,
    /// Waypoint cursor after any captures this tick; never decreases.
    pub active_idx: usize,
    /// Indices captured this tick, in order (several when waypoints coincide).
    pub captured: Vec<usize>,
    /// Set once the plan is exhausted and `land_after` is true: the engine
    /// should transition the UAV to Landing and hold the descent command.
    pub request_landing: bool,
    /// Set once the plan is exhausted and `land_after` is false: the UAV
    /// holds position and counts as done.
    pub mission_complete: bool,
}

/// One controller evaluation.
///
/// Starting at `active_idx`, consumes every waypoint whose capture radius
/// already contains the estimate, then steers proportionally toward the next
/// one with the command magnitude clamped to `max_speed`. Past the last
/// waypoint the output is either a pure descent (`land_after`) or a
/// station-keeping command toward the last waypoint with `mission_complete`
/// set.
pub fn compute_command(
    est_position: NedPosition,
    plan: &MissionPlan,
    active_idx: usize,
    params: &ControllerParams,
) -> CommandOutput {
    let mut idx = active_idx;
    let mut captured = Vec::new();
    while idx < plan.waypoints.len() {
        let wp = &plan.waypoints[idx];
        if est_position.distance_to(&wp.position) <= wp.capture_radius_m {
            captured.push(idx);
            idx += 1;
        } else {
            break;
        }
    }

    if idx < plan.waypoints.len() {
        let command = steer_toward(est_position, plan.waypoints[idx].position, params);
        return CommandOutput { command, active_idx: idx, captured, request_landing: false, mission_complete: false };
    }

    if plan.land_after {
        CommandOutput {
            command: NedVelocity::new(0.0, 0.0, params.descent_speed_mps),
            active_idx: idx,
            captured,
            request_landing: true,
            mission_complete: false,
        }
    } else {
        // Station-keep at the last waypoint so wind cannot blow a finished
        // UAV off station while others are still flying.
        let command = match plan.waypoints.last() {
            Some(wp) => steer_toward(est_position, wp.position, params),
            None => NedVelocity::ZERO,
        };
        CommandOutput { command, active_idx: idx, captured, request_landing: false, mission_complete: true }
    }
}

/// Proportional velocity toward `target`, clamped to the speed limit.
fn steer_toward(est_position: NedPosition, target: NedPosition, params: &ControllerParams) -> NedVelocity {
    let raw = NedVelocity::new(
        (target.north_m - est_position.north_m) * params.gain_per_s,
        (target.east_m - est_position.east_m) * params.gain_per_s,
        (target.down_m - est_position.down_m) * params.gain_per_s,
    );
    let mag = raw.magnitude();
    if mag > params.max_speed_mps {
        raw.scaled(params.max_speed_mps / mag)
    } else {
        raw
    }
}

/// The intended-path segment for a given cursor: previous waypoint (or home
/// when the cursor is at the first waypoint) to the active waypoint. Past the
/// end of the plan the segment degenerates to the last waypoint, so deviation
/// becomes plain distance to that point.
pub fn active_segment(plan: &MissionPlan, home: NedPosition, active_idx: usize) -> (NedPosition, NedPosition) {
    let n = plan.waypoints.len();
    debug_assert!(n > 0, "plans are non-empty by construction");
    if active_idx == 0 {
        (home, plan.waypoints[0].position)
    } else if active_idx < n {
        (plan.waypoints[active_idx - 1].position, plan.waypoints[active_idx].position)
    } else {
        let last = plan.waypoints[n - 1].position;
        (last, last)
    }
}
