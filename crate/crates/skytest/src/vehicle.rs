//! UAV state, kinematic dynamics, and sensor simulation.
//!
//! The dynamics model is a velocity-commanded point mass: each tick the
//! commanded velocity plus the ambient wind integrates directly into
//! position. That is deliberately the simplest model in which wind and noisy
//! navigation measurably bend a trajectory; rotor dynamics and attitude add
//! no signal the safety monitors look at, and that fidelity boundary is
//! documented rather than hidden.
//!
//! Sensors (GPS, barometer, magnetometer) read ground truth plus zero-mean
//! Gaussian noise from per-UAV, per-sensor seeded streams owned by the
//! engine. Camera and lidar may appear in scenario files for fidelity with
//! real configurations; they are accepted, echoed in reports, and warned
//! about, never simulated.

use crate::geodesy::{wrap_deg_360, FrameOrigin, GeodesyError, GeodeticCoord, NedPosition, NedVelocity};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("{0} sensor is disabled")]
    Disabled(&'static str),
    #[error(transparent)]
    Frame(#[from] GeodesyError),
}

/// Flight phase. Transitions only move forward along
/// Idle -> Enroute -> Landing -> Landed, with Crashed reachable from any
/// non-terminal phase. Landed and Crashed are terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlightPhase {
    Idle,
    Enroute,
    Landing,
    Landed,
    Crashed,
}

impl FlightPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlightPhase::Idle => "idle",
            FlightPhase::Enroute => "enroute",
            FlightPhase::Landing => "landing",
            FlightPhase::Landed => "landed",
            FlightPhase::Crashed => "crashed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, FlightPhase::Landed | FlightPhase::Crashed)
    }

    /// Airborne phases are the ones safety monitors evaluate.
    pub fn is_airborne(&self) -> bool {
        matches!(self, FlightPhase::Enroute | FlightPhase::Landing)
    }

    /// Whether `next` is a legal successor. Staying in place is always legal.
    pub fn can_transition_to(&self, next: FlightPhase) -> bool {
        if *self == next {
            return true;
        }
        match (self, next) {
            (_, FlightPhase::Crashed) => !self.is_terminal(),
            (FlightPhase::Idle, FlightPhase::Enroute) => true,
            (FlightPhase::Enroute, FlightPhase::Landing) => true,
            (FlightPhase::Landing, FlightPhase::Landed) => true,
            _ => false,
        }
    }
}

/// Ground-truth state of one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: String,
    pub position: NedPosition,
    pub velocity: NedVelocity,
    pub heading_deg: f64,
    pub phase: FlightPhase,
    pub time_s: f64,
}

impl UavState {
    pub fn at_rest(id: impl Into<String>, position: NedPosition) -> Self {
        UavState {
            id: id.into(),
            position,
            velocity: NedVelocity::ZERO,
            heading_deg: 0.0,
            phase: FlightPhase::Idle,
            time_s: 0.0,
        }
    }
}

/// Physical limits of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub max_speed_mps: f64,
    pub descent_speed_mps: f64,
    pub body_radius_m: f64,
    pub gain_per_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams { max_speed_mps: 10.0, descent_speed_mps: 2.0, body_radius_m: 0.3, gain_per_s: 1.0 }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("max_speed_mps", self.max_speed_mps),
            ("descent_speed_mps", self.descent_speed_mps),
            ("body_radius_m", self.body_radius_m),
            ("gain_per_s", self.gain_per_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsConfig {
    pub enabled: bool,
    pub noise_std_m: f64,
    pub update_hz: f64,
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig { enabled: true, noise_std_m: 0.0, update_hz: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarometerConfig {
    pub enabled: bool,
    pub noise_std_m: f64,
}

impl Default for BarometerConfig {
    fn default() -> Self {
        BarometerConfig { enabled: true, noise_std_m: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetometerConfig {
    pub enabled: bool,
    pub noise_std_deg: f64,
}

impl Default for MagnetometerConfig {
    fn default() -> Self {
        MagnetometerConfig { enabled: true, noise_std_deg: 0.0 }
    }
}

/// Per-UAV sensor configuration. `declared_unsupported` lists sensors the
/// scenario asked for that this harness does not simulate (camera, lidar);
/// they are kept so reports echo the full requested configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorSuiteConfig {
    pub gps: GpsConfig,
    pub barometer: BarometerConfig,
    pub magnetometer: MagnetometerConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub declared_unsupported: Vec<String>,
}

impl SensorSuiteConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gps.noise_std_m.is_finite() && self.gps.noise_std_m >= 0.0) {
            return Err(format!("gps.noise_std_m must be >= 0, got {}", self.gps.noise_std_m));
        }
        if !(self.gps.update_hz.is_finite() && self.gps.update_hz > 0.0) {
            return Err(format!("gps.update_hz must be > 0, got {}", self.gps.update_hz));
        }
        if !(self.barometer.noise_std_m.is_finite() && self.barometer.noise_std_m >= 0.0) {
            return Err(format!("barometer.noise_std_m must be >= 0, got {}", self.barometer.noise_std_m));
        }
        if !(self.magnetometer.noise_std_deg.is_finite() && self.magnetometer.noise_std_deg >= 0.0) {
            return Err(format!("magnetometer.noise_std_deg must be >= 0, got {}", self.magnetometer.noise_std_deg));
        }
        Ok(())
    }
}

/// One GPS sample: the noisy position in both frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub time_s: f64,
    pub ned: NedPosition,
    pub geodetic: GeodeticCoord,
}

/// Commanded velocity below which the heading holds its last value. A
/// vertical-only command has no horizontal course, so the threshold applies
/// to the horizontal component of the command.
pub const HEADING_HOLD_SPEED_MPS: f64 = 0.1;

/// One Euler step of the point-mass dynamics: the ground velocity is the
/// command plus wind, integrated over `dt`. Phase is untouched; the engine
/// owns phase transitions. Pure arithmetic, no randomness.
pub fn step_dynamics(
    state: &UavState,
    cmd: NedVelocity,
    wind: NedVelocity,
    dt: f64,
    params: &VehicleParams,
) -> UavState {
    debug_assert!(dt > 0.0);
    debug_assert!(cmd.magnitude() <= params.max_speed_mps + 1e-9, "controller must clamp the command");
    let velocity = cmd.plus(wind);
    let heading_deg = if cmd.horizontal_magnitude() > HEADING_HOLD_SPEED_MPS {
        wrap_deg_360(cmd.east_mps.atan2(cmd.north_mps).to_degrees())
    } else {
        state.heading_deg
    };
    UavState {
        id: state.id.clone(),
        position: state.position.offset(velocity, dt),
        velocity,
        heading_deg,
        phase: state.phase,
        time_s: state.time_s + dt,
    }
}

fn gaussian(rng: &mut impl Rng, std: f64) -> f64 {
    // Always draw, even at std = 0: the stream advances identically whether
    // or not a particular sensor is noisy, which keeps runs comparable when
    // only noise levels differ.
    let z: f64 = rng.sample(StandardNormal);
    std * z
}

/// Samples the GPS: ground truth plus independent Gaussian noise on north,
/// east, and down (one std for all three axes).
pub fn sample_gps(
    state: &UavState,
    frame: &FrameOrigin,
    cfg: &GpsConfig,
    rng: &mut impl Rng,
) -> Result<GpsFix, SensorError> {
    if !cfg.enabled {
        return Err(SensorError::Disabled("gps"));
    }
    let ned = NedPosition::new(
        state.position.north_m + gaussian(rng, cfg.noise_std_m),
        state.position.east_m + gaussian(rng, cfg.noise_std_m),
        state.position.down_m + gaussian(rng, cfg.noise_std_m),
    );
    let geodetic = frame.ned_to_geodetic(ned)?;
    Ok(GpsFix { time_s: state.time_s, ned, geodetic })
}

/// Samples the barometer: altitude above the ellipsoid with Gaussian noise.
pub fn sample_barometer(
    state: &UavState,
    origin_alt_m: f64,
    cfg: &BarometerConfig,
    rng: &mut impl Rng,
) -> Result<f64, SensorError> {
    if !cfg.enabled {
        return Err(SensorError::Disabled("barometer"));
    }
    Ok(origin_alt_m - state.position.down_m + gaussian(rng, cfg.noise_std_m))
}

fn magnetometer_reading(heading_deg: f64, noise_deg: f64) -> f64 {
    wrap_deg_360(heading_deg + noise_deg)
}

/// Samples the magnetometer: heading with Gaussian noise, wrapped to [0, 360).
pub fn sample_magnetometer(
    state: &UavState,
    cfg: &MagnetometerConfig,
    rng: &mut impl Rng,
) -> Result<f64, SensorError> {
    if !cfg.enabled {
        return Err(SensorError::Disabled("magnetometer"));
    }
    Ok(magnetometer_reading(state.heading_deg, gaussian(rng, cfg.noise_std_deg)))
}
