//! The scenario format: parsing, validation, and canonical serialization.
//!
//! A scenario is one JSON document with four top-level sections plus a
//! required `format_version`: `environment` (map, wind, origin override),
//! `uavs` (home, sensors, plan, vehicle parameters), `test_properties`
//! (the safety properties to monitor), and `sim` (timestep, duration, seed).
//! Every optional field has a documented default that is materialized at
//! parse time, so a parsed [`ScenarioSpec`] is fully explicit and the report
//! echo is self-contained.
//!
//! Parsing is strict and multi-error: unknown fields are rejected, and all
//! problems are reported together, each with a JSON-path location. A typo in
//! a safety threshold silently ignored would be the worst possible failure
//! mode for a testing tool, so nothing is skipped silently except the two
//! declared-but-unsimulated sensors (camera, lidar), which are recorded and
//! surfaced as warnings by [`validate_semantics`].
//!
//! [`parse_scenario`] checks the document shape; [`validate_semantics`]
//! cross-checks a parsed spec against a loaded map (homes inside bounds and
//! outside obstacles, scopes referencing real UAV ids, and so on). The
//! service maps the former to HTTP 400 and the latter to 422.

use crate::diag::{Diagnostic, Issue};
use crate::engine::SimulationConfig;
use crate::geodesy::{FrameOrigin, GeodesyError, GeodeticCoord, NedPosition};
use crate::jsonx::{self, Cx, ObjReader};
use crate::mission::{MissionPlan, NavigationSource, Waypoint};
use crate::monitors::{LandingZone, PropertyKind, SafetyProperty, Scope};
use crate::vehicle::{SensorSuiteConfig, VehicleParams};
use crate::world::{AltitudeBand, Polygon2D, WindField, WorldError, WorldModel, BLOCKS_MAP};
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use std::path::Path;

/// The scenario format version this build reads and writes.
pub const FORMAT_VERSION: u64 = 1;

/// A fully parsed scenario with every default materialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub format_version: u64,
    pub environment: EnvironmentSpec,
    pub uavs: Vec<UavSpec>,
    pub test_properties: Vec<SafetyProperty>,
    pub sim: SimulationConfig,
}

impl<'de> Deserialize<'de> for ScenarioSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        // Route through the strict decoder so serde-based consumers (the
        // report echo) accept exactly what parse_scenario accepts.
        let value = Value::deserialize(deserializer)?;
        decode_scenario(&value).map_err(|issues| {
            let joined: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
            D::Error::custom(joined.join("; "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentSpec {
    pub map: String,
    /// Replaces the map's geodetic anchor when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<GeodeticCoord>,
    pub wind: WindField,
    /// Metadata only; recorded in reports, never used by the dynamics.
    pub time_of_day: String,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec {
            map: BLOCKS_MAP.to_string(),
            origin: None,
            wind: WindField::default(),
            time_of_day: "12:00".to_string(),
        }
    }
}

/// A position given either directly in the local frame or geodetically.
/// Geodetic positions are converted through the map's frame during
/// validation and resolution, never at parse time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionSpec {
    Ned(NedPosition),
    Geodetic(GeodeticCoord),
}

impl PositionSpec {
    pub fn to_ned(&self, frame: &FrameOrigin) -> Result<NedPosition, GeodesyError> {
        match self {
            PositionSpec::Ned(p) => Ok(*p),
            PositionSpec::Geodetic(g) => frame.geodetic_to_ned(*g),
        }
    }
}

impl Serialize for PositionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1))?;
        match self {
            PositionSpec::Ned(p) => map.serialize_entry("ned", &[p.north_m, p.east_m, p.down_m])?,
            PositionSpec::Geodetic(g) => map.serialize_entry("geodetic", g)?,
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UavSpec {
    pub id: String,
    pub home: PositionSpec,
    pub sensors: SensorSuiteConfig,
    pub plan: PlanSpec,
    pub params: VehicleParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSpec {
    pub waypoints: Vec<WaypointSpec>,
    pub land_after: bool,
    pub navigation: NavigationSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaypointSpec {
    pub position: PositionSpec,
    pub capture_radius_m: f64,
}

/// Converts a UAV's home and waypoints to the local frame, producing the
/// engine-ready mission plan.
pub fn resolve_mission(uav: &UavSpec, frame: &FrameOrigin) -> Result<(NedPosition, MissionPlan), GeodesyError> {
    let home = uav.home.to_ned(frame)?;
    let mut waypoints = Vec::with_capacity(uav.plan.waypoints.len());
    for wp in &uav.plan.waypoints {
        waypoints.push(Waypoint::new(wp.position.to_ned(frame)?, wp.capture_radius_m));
    }
    Ok((
        home,
        MissionPlan { waypoints, land_after: uav.plan.land_after, navigation: uav.plan.navigation },
    ))
}

/// Parses and schema-checks a scenario document. All problems are returned
/// together, each with a JSON-path location.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, Vec<Issue>> {
    let mut cx = Cx::new();
    let Some(value) = jsonx::parse_document(&mut cx, text) else {
        return Err(cx.errors);
    };
    decode_scenario(&value)
}

/// Decodes an already-parsed JSON value; the service uses this directly on
/// request bodies.
pub fn decode_scenario(value: &Value) -> Result<ScenarioSpec, Vec<Issue>> {
    let mut cx = Cx::new();
    let mut root = ObjReader::new(&mut cx, Some(value), "");

    if let Some(v) = root.req(&mut cx, "format_version") {
        if let Some(n) = jsonx::u64_at(&mut cx, v, "format_version") {
            if n != FORMAT_VERSION {
                cx.err("format_version", format!("unsupported format version {n}, this build reads version {FORMAT_VERSION}"));
            }
        }
    }

    let environment = decode_environment(&mut cx, root.opt("environment"));

    let mut uavs = Vec::new();
    if let Some(arr) = root.arr_req(&mut cx, "uavs") {
        if arr.is_empty() {
            cx.err("uavs", "at least one uav is required");
        }
        for (i, v) in arr.iter().enumerate() {
            if let Some(u) = decode_uav(&mut cx, v, &jsonx::idx_path("uavs", i)) {
                uavs.push(u);
            }
        }
    }

    let mut test_properties = Vec::new();
    if let Some(arr) = root.arr_opt(&mut cx, "test_properties") {
        for (i, v) in arr.iter().enumerate() {
            if let Some(p) = decode_property(&mut cx, v, &jsonx::idx_path("test_properties", i)) {
                test_properties.push(p);
            }
        }
    }

    let sim = decode_sim(&mut cx, root.opt("sim"));
    root.deny_unknown(&mut cx);
    cx.finish(ScenarioSpec { format_version: FORMAT_VERSION, environment, uavs, test_properties, sim })
}

fn decode_environment(cx: &mut Cx, v: Option<&Value>) -> EnvironmentSpec {
    let mut env = ObjReader::new(cx, v, "environment");
    let map = env.str_or(cx, "map", BLOCKS_MAP);

    let origin = env.opt("origin").and_then(|v| {
        let path = env.child_path("origin");
        decode_geodetic(cx, v, &path).and_then(|g| {
            if g.lat_deg.abs() >= crate::geodesy::POLAR_LATITUDE_LIMIT_DEG {
                cx.err(jsonx::key_path(&path, "lat_deg"), "origin must be more than 1 degree from the poles");
                None
            } else {
                Some(g)
            }
        })
    });

    let wind_path = env.child_path("wind");
    let mut wind_reader = ObjReader::new(cx, env.opt("wind"), wind_path);
    let direction_deg = wind_reader.f64_or(cx, "direction_deg", 0.0);
    let speed_mps = wind_reader.f64_or(cx, "speed_mps", 0.0);
    let gust_amplitude_mps = wind_reader.f64_or(cx, "gust_amplitude_mps", 0.0);
    let gust_period_s = wind_reader.f64_or(cx, "gust_period_s", 10.0);
    if speed_mps < 0.0 {
        cx.err(wind_reader.child_path("speed_mps"), format!("wind speed must be >= 0, got {speed_mps}"));
    }
    if gust_amplitude_mps < 0.0 {
        cx.err(wind_reader.child_path("gust_amplitude_mps"), format!("gust amplitude must be >= 0, got {gust_amplitude_mps}"));
    }
    if gust_amplitude_mps > 0.0 && gust_period_s <= 0.0 {
        cx.err(wind_reader.child_path("gust_period_s"), format!("gust period must be > 0 when gusting, got {gust_period_s}"));
    }
    wind_reader.deny_unknown(cx);
    let wind = WindField::new(direction_deg, speed_mps, gust_amplitude_mps, gust_period_s)
        .unwrap_or_default();

    let time_of_day = env.str_or(cx, "time_of_day", "12:00");
    if !valid_time_of_day(&time_of_day) {
        cx.err(env.child_path("time_of_day"), format!("expected HH:MM wall-clock time, got \"{time_of_day}\""));
    }

    env.deny_unknown(cx);
    EnvironmentSpec { map, origin, wind, time_of_day }
}

fn valid_time_of_day(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 5
        && b[2] == b':'
        && b[0].is_ascii_digit()
        && b[1].is_ascii_digit()
        && b[3].is_ascii_digit()
        && b[4].is_ascii_digit()
        && (b[0] - b'0') * 10 + (b[1] - b'0') < 24
        && (b[3] - b'0') * 10 + (b[4] - b'0') < 60
}

fn decode_geodetic(cx: &mut Cx, v: &Value, path: &str) -> Option<GeodeticCoord> {
    let mut reader = ObjReader::new(cx, Some(v), path);
    let lat = reader.f64_req(cx, "lat_deg");
    let lon = reader.f64_req(cx, "lon_deg");
    let alt_m = reader.f64_or(cx, "alt_m", 0.0);
    if let Some(lat) = lat {
        if !(-90.0..=90.0).contains(&lat) {
            cx.err(reader.child_path("lat_deg"), format!("latitude must be in [-90, 90], got {lat}"));
        }
    }
    reader.deny_unknown(cx);
    let (lat_deg, lon_deg) = (lat?, lon?);
    GeodeticCoord::new(lat_deg, lon_deg, alt_m).ok()
}

fn decode_position(cx: &mut Cx, v: &Value, path: &str) -> Option<PositionSpec> {
    let mut reader = ObjReader::new(cx, Some(v), path);
    let ned = reader.opt("ned");
    let geo = reader.opt("geodetic");
    reader.deny_unknown(cx);
    match (ned, geo) {
        (Some(n), None) => {
            let [north_m, east_m, down_m] = jsonx::f64_tuple::<3>(cx, n, &reader.child_path("ned"))?;
            Some(PositionSpec::Ned(NedPosition::new(north_m, east_m, down_m)))
        }
        (None, Some(g)) => decode_geodetic(cx, g, &reader.child_path("geodetic")).map(PositionSpec::Geodetic),
        _ => {
            cx.err(path, "expected exactly one of \"ned\" or \"geodetic\"");
            None
        }
    }
}

fn decode_uav(cx: &mut Cx, v: &Value, path: &str) -> Option<UavSpec> {
    let mut reader = ObjReader::new(cx, Some(v), path);

    let id = reader.str_req(cx, "id").unwrap_or_default();
    if reader.opt("id").is_some_and(|v| v.as_str() == Some("")) {
        cx.err(reader.child_path("id"), "uav id must not be empty");
    }

    let home = reader
        .req(cx, "home")
        .and_then(|v| decode_position(cx, v, &reader.child_path("home")))
        .unwrap_or(PositionSpec::Ned(NedPosition::ZERO));

    let sensors = decode_sensors(cx, reader.opt("sensors"), &reader.child_path("sensors"));
    let plan = decode_plan(cx, reader.opt("plan"), &reader.child_path("plan"));
    let params = decode_params(cx, reader.opt("params"), &reader.child_path("params"));
    reader.deny_unknown(cx);
    Some(UavSpec { id, home, sensors, plan, params })
}

fn decode_sensors(cx: &mut Cx, v: Option<&Value>, path: &str) -> SensorSuiteConfig {
    let mut reader = ObjReader::new(cx, v, path);
    let mut cfg = SensorSuiteConfig::default();

    let mut gps = ObjReader::new(cx, reader.opt("gps"), reader.child_path("gps"));
    cfg.gps.enabled = gps.bool_or(cx, "enabled", true);
    cfg.gps.noise_std_m = gps.f64_or(cx, "noise_std_m", 0.0);
    cfg.gps.update_hz = gps.f64_or(cx, "update_hz", 10.0);
    if cfg.gps.noise_std_m < 0.0 {
        cx.err(gps.child_path("noise_std_m"), format!("noise std must be >= 0, got {}", cfg.gps.noise_std_m));
    }
    if cfg.gps.update_hz <= 0.0 {
        cx.err(gps.child_path("update_hz"), format!("update rate must be > 0, got {}", cfg.gps.update_hz));
    }
    gps.deny_unknown(cx);

    let mut baro = ObjReader::new(cx, reader.opt("barometer"), reader.child_path("barometer"));
    cfg.barometer.enabled = baro.bool_or(cx, "enabled", true);
    cfg.barometer.noise_std_m = baro.f64_or(cx, "noise_std_m", 0.0);
    if cfg.barometer.noise_std_m < 0.0 {
        cx.err(baro.child_path("noise_std_m"), format!("noise std must be >= 0, got {}", cfg.barometer.noise_std_m));
    }
    baro.deny_unknown(cx);

    let mut mag = ObjReader::new(cx, reader.opt("magnetometer"), reader.child_path("magnetometer"));
    cfg.magnetometer.enabled = mag.bool_or(cx, "enabled", true);
    cfg.magnetometer.noise_std_deg = mag.f64_or(cx, "noise_std_deg", 0.0);
    if cfg.magnetometer.noise_std_deg < 0.0 {
        cx.err(mag.child_path("noise_std_deg"), format!("noise std must be >= 0, got {}", cfg.magnetometer.noise_std_deg));
    }
    mag.deny_unknown(cx);

    // Accepted but not simulated: recorded so validation can warn and the
    // report echo shows what was asked for.
    let mut declared = Vec::new();
    for name in ["camera", "lidar"] {
        if reader.opt(name).is_some() {
            declared.push(name.to_string());
        }
    }
    if let Some(arr) = reader.arr_opt(cx, "declared_unsupported") {
        for (i, item) in arr.iter().enumerate() {
            if let Some(s) = jsonx::str_at(cx, item, &jsonx::idx_path(&reader.child_path("declared_unsupported"), i)) {
                declared.push(s);
            }
        }
    }
    declared.sort();
    declared.dedup();
    cfg.declared_unsupported = declared;

    reader.deny_unknown(cx);
    cfg
}

fn decode_plan(cx: &mut Cx, v: Option<&Value>, path: &str) -> PlanSpec {
    let mut reader = ObjReader::required(cx, v, path);

    let mut waypoints = Vec::new();
    if let Some(arr) = reader.arr_req(cx, "waypoints") {
        if arr.is_empty() {
            cx.err(reader.child_path("waypoints"), "at least one waypoint is required");
        }
        for (i, v) in arr.iter().enumerate() {
            let wp_path = jsonx::idx_path(&reader.child_path("waypoints"), i);
            let mut wp = ObjReader::new(cx, Some(v), &wp_path);
            let position = wp
                .req(cx, "position")
                .and_then(|v| decode_position(cx, v, &wp.child_path("position")))
                .unwrap_or(PositionSpec::Ned(NedPosition::ZERO));
            let capture_radius_m = wp.f64_or(cx, "capture_radius_m", 1.0);
            if capture_radius_m <= 0.0 {
                cx.err(wp.child_path("capture_radius_m"), format!("capture radius must be > 0, got {capture_radius_m}"));
            }
            wp.deny_unknown(cx);
            waypoints.push(WaypointSpec { position, capture_radius_m });
        }
    }

    let land_after = reader.bool_or(cx, "land_after", true);
    let navigation = match reader.str_opt(cx, "navigation") {
        None => NavigationSource::Truth,
        Some(s) => match s.as_str() {
            "truth" => NavigationSource::Truth,
            "gps" => NavigationSource::Gps,
            other => {
                cx.err(reader.child_path("navigation"), format!("expected \"truth\" or \"gps\", got \"{other}\""));
                NavigationSource::Truth
            }
        },
    };
    reader.deny_unknown(cx);
    PlanSpec { waypoints, land_after, navigation }
}

fn decode_params(cx: &mut Cx, v: Option<&Value>, path: &str) -> VehicleParams {
    let mut reader = ObjReader::new(cx, v, path);
    let defaults = VehicleParams::default();
    let params = VehicleParams {
        max_speed_mps: reader.f64_or(cx, "max_speed_mps", defaults.max_speed_mps),
        descent_speed_mps: reader.f64_or(cx, "descent_speed_mps", defaults.descent_speed_mps),
        body_radius_m: reader.f64_or(cx, "body_radius_m", defaults.body_radius_m),
        gain_per_s: reader.f64_or(cx, "gain_per_s", defaults.gain_per_s),
    };
    for (key, v) in [
        ("max_speed_mps", params.max_speed_mps),
        ("descent_speed_mps", params.descent_speed_mps),
        ("body_radius_m", params.body_radius_m),
        ("gain_per_s", params.gain_per_s),
    ] {
        if v <= 0.0 {
            cx.err(reader.child_path(key), format!("must be > 0, got {v}"));
        }
    }
    reader.deny_unknown(cx);
    params
}

fn decode_scope(cx: &mut Cx, v: Option<&Value>, path: &str) -> Scope {
    let Some(v) = v else { return Scope::All };
    match v {
        Value::String(s) if s == "all" => Scope::All,
        Value::Array(items) => {
            if items.is_empty() {
                cx.err(path, "scope id list must not be empty");
            }
            let mut ids = Vec::new();
            for (i, item) in items.iter().enumerate() {
                if let Some(s) = jsonx::str_at(cx, item, &jsonx::idx_path(path, i)) {
                    ids.push(s);
                }
            }
            Scope::Ids(ids)
        }
        other => {
            cx.err(path, format!("expected \"all\" or an array of uav ids, found {}", scope_found(other)));
            Scope::All
        }
    }
}

fn scope_found(v: &Value) -> String {
    match v {
        Value::String(s) => format!("\"{s}\""),
        other => jsonx::type_name(other).to_string(),
    }
}

fn decode_polygon(cx: &mut Cx, v: &Value, path: &str) -> Option<Polygon2D> {
    let arr = jsonx::arr_at(cx, v, path)?;
    let mut vertices = Vec::with_capacity(arr.len());
    let mut ok = true;
    for (i, item) in arr.iter().enumerate() {
        match jsonx::f64_tuple::<2>(cx, item, &jsonx::idx_path(path, i)) {
            Some(p) => vertices.push(p),
            None => ok = false,
        }
    }
    if !ok {
        return None;
    }
    match Polygon2D::new(vertices) {
        Ok(p) => Some(p),
        Err(e) => {
            cx.err(path, e.to_string());
            None
        }
    }
}

fn decode_zone(cx: &mut Cx, v: &Value, path: &str) -> Option<LandingZone> {
    let mut reader = ObjReader::new(cx, Some(v), path);
    let circle = reader.opt("circle");
    let polygon = reader.opt("polygon");
    reader.deny_unknown(cx);
    match (circle, polygon) {
        (Some(c), None) => {
            let c_path = reader.child_path("circle");
            let mut cr = ObjReader::new(cx, Some(c), &c_path);
            let center = cr.req(cx, "center_ned").and_then(|v| jsonx::f64_tuple::<2>(cx, v, &cr.child_path("center_ned")));
            let radius_m = cr.f64_req(cx, "radius_m");
            if let Some(r) = radius_m {
                if r <= 0.0 {
                    cx.err(cr.child_path("radius_m"), format!("radius must be > 0, got {r}"));
                }
            }
            cr.deny_unknown(cx);
            Some(LandingZone::Circle { center_ned: center?, radius_m: radius_m? })
        }
        (None, Some(p)) => decode_polygon(cx, p, &reader.child_path("polygon")).map(LandingZone::Polygon),
        _ => {
            cx.err(path, "expected exactly one of \"circle\" or \"polygon\"");
            None
        }
    }
}

fn decode_property(cx: &mut Cx, v: &Value, path: &str) -> Option<SafetyProperty> {
    let mut reader = ObjReader::new(cx, Some(v), path);
    let id = reader.str_req(cx, "id").unwrap_or_default();
    if reader.opt("id").is_some_and(|v| v.as_str() == Some("")) {
        cx.err(reader.child_path("id"), "property id must not be empty");
    }
    let kind_name = reader.str_req(cx, "kind")?;
    let scope = decode_scope(cx, reader.opt("scope"), &reader.child_path("scope"));

    let kind = match kind_name.as_str() {
        "max_path_deviation" => {
            let max_m = reader.f64_req(cx, "max_m");
            if let Some(m) = max_m {
                if m <= 0.0 {
                    cx.err(reader.child_path("max_m"), format!("threshold must be > 0, got {m}"));
                }
            }
            PropertyKind::MaxPathDeviation { max_m: max_m.unwrap_or(1.0), scope }
        }
        "min_separation" => {
            let min_m = reader.f64_req(cx, "min_m");
            if let Some(m) = min_m {
                if m <= 0.0 {
                    cx.err(reader.child_path("min_m"), format!("threshold must be > 0, got {m}"));
                }
            }
            PropertyKind::MinSeparation { min_m: min_m.unwrap_or(1.0), scope }
        }
        "no_collision" => PropertyKind::NoCollision { scope },
        "safe_landing" => {
            let mut zones = Vec::new();
            if let Some(arr) = reader.arr_req(cx, "zones") {
                if arr.is_empty() {
                    cx.err(reader.child_path("zones"), "at least one landing zone is required");
                }
                for (i, z) in arr.iter().enumerate() {
                    if let Some(zone) = decode_zone(cx, z, &jsonx::idx_path(&reader.child_path("zones"), i)) {
                        zones.push(zone);
                    }
                }
            }
            PropertyKind::SafeLanding { zones, scope }
        }
        "no_fly_zone" => {
            let polygon = reader.req(cx, "polygon").and_then(|v| decode_polygon(cx, v, &reader.child_path("polygon")));
            let floor_m = reader.f64_or(cx, "floor_m", 0.0);
            let ceiling_m = reader.f64_opt(cx, "ceiling_m");
            let band = match AltitudeBand::new(floor_m, ceiling_m) {
                Ok(b) => b,
                Err(e) => {
                    cx.err(reader.child_path("ceiling_m"), e.to_string());
                    AltitudeBand { floor_m: 0.0, ceiling_m: None }
                }
            };
            PropertyKind::NoFlyZone { polygon: polygon?, band, scope }
        }
        other => {
            cx.err(
                reader.child_path("kind"),
                format!(
                    "unknown property kind \"{other}\"; expected one of max_path_deviation, \
                     min_separation, no_collision, safe_landing, no_fly_zone"
                ),
            );
            // Unknown kind: remaining fields cannot be judged, skip them.
            return None;
        }
    };
    reader.deny_unknown(cx);
    Some(SafetyProperty { id, kind })
}

fn decode_sim(cx: &mut Cx, v: Option<&Value>) -> SimulationConfig {
    let mut reader = ObjReader::new(cx, v, "sim");
    let defaults = SimulationConfig::default();
    let dt_s = reader.f64_or(cx, "dt_s", defaults.dt_s);
    let max_duration_s = reader.f64_or(cx, "max_duration_s", defaults.max_duration_s);
    let seed = reader.u64_or(cx, "seed", defaults.seed);
    if !(dt_s > 0.0 && dt_s <= crate::engine::MAX_DT_S) {
        cx.err(reader.child_path("dt_s"), format!("timestep must be in (0, {}], got {dt_s}", crate::engine::MAX_DT_S));
    } else if max_duration_s <= 0.0 {
        cx.err(reader.child_path("max_duration_s"), format!("duration must be > 0, got {max_duration_s}"));
    } else {
        let raw_ticks = max_duration_s / dt_s;
        if (raw_ticks - raw_ticks.round()).abs() > raw_ticks.round().max(1.0) * 1e-9 || raw_ticks.round() < 1.0 {
            cx.err(reader.child_path("max_duration_s"), format!("duration must be a whole number of {dt_s} s ticks, got {max_duration_s}"));
        }
    }
    reader.deny_unknown(cx);
    SimulationConfig { dt_s, max_duration_s, seed }
}

/// Cross-checks a parsed spec against its loaded map. Errors make the
/// scenario unrunnable; warnings flag suspicious but runnable configurations.
pub fn validate_semantics(spec: &ScenarioSpec, world: &WorldModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let frame = &world.frame;

    let ids: Vec<&str> = spec.uavs.iter().map(|u| u.id.as_str()).collect();
    for (i, uav) in spec.uavs.iter().enumerate() {
        let path = jsonx::idx_path("uavs", i);
        if ids[..i].contains(&uav.id.as_str()) {
            out.push(Diagnostic::error(jsonx::key_path(&path, "id"), format!("duplicate uav id \"{}\"", uav.id)));
        }

        match uav.home.to_ned(frame) {
            Err(e) => out.push(Diagnostic::error(
                jsonx::key_path(&path, "home"),
                format!("uav \"{}\": cannot resolve home: {e}", uav.id),
            )),
            Ok(home) => {
                if !world.bounds.contains(home.north_m, home.east_m) {
                    out.push(Diagnostic::error(
                        jsonx::key_path(&path, "home"),
                        format!("uav \"{}\": home is outside the map bounds", uav.id),
                    ));
                } else {
                    for (k, obstacle) in world.obstacles.iter().enumerate() {
                        if obstacle.contains(&home) {
                            out.push(Diagnostic::error(
                                jsonx::key_path(&path, "home"),
                                format!("uav \"{}\": home is inside obstacle {k}", uav.id),
                            ));
                            break;
                        }
                    }
                }
            }
        }

        if uav.plan.navigation == NavigationSource::Gps && !uav.sensors.gps.enabled {
            out.push(Diagnostic::error(
                jsonx::key_path(&path, "plan.navigation"),
                format!("uav \"{}\": gps navigation requires an enabled gps", uav.id),
            ));
        }

        for (j, wp) in uav.plan.waypoints.iter().enumerate() {
            let wp_path = jsonx::idx_path(&jsonx::key_path(&path, "plan.waypoints"), j);
            match wp.position.to_ned(frame) {
                Err(e) => out.push(Diagnostic::error(wp_path, format!("uav \"{}\": cannot resolve waypoint: {e}", uav.id))),
                Ok(p) => {
                    if !world.bounds.contains(p.north_m, p.east_m) {
                        out.push(Diagnostic::warning(wp_path, format!("uav \"{}\": waypoint is outside the map bounds", uav.id)));
                    } else if world.altitude_above_terrain(&p) < 0.0 {
                        out.push(Diagnostic::warning(
                            wp_path,
                            format!("uav \"{}\": waypoint is below terrain; flying there will crash", uav.id),
                        ));
                    }
                }
            }
        }

        if !uav.sensors.declared_unsupported.is_empty() {
            out.push(Diagnostic::warning(
                jsonx::key_path(&path, "sensors"),
                format!(
                    "uav \"{}\": declared sensors are not simulated: {}",
                    uav.id,
                    uav.sensors.declared_unsupported.join(", ")
                ),
            ));
        }
    }

    let mut prop_ids: Vec<&str> = Vec::new();
    for (k, prop) in spec.test_properties.iter().enumerate() {
        let path = jsonx::idx_path("test_properties", k);
        if prop_ids.contains(&prop.id.as_str()) {
            out.push(Diagnostic::error(jsonx::key_path(&path, "id"), format!("duplicate property id \"{}\"", prop.id)));
        }
        prop_ids.push(&prop.id);
        if let Scope::Ids(scope_ids) = prop.kind.scope() {
            for sid in scope_ids {
                if !ids.contains(&sid.as_str()) {
                    out.push(Diagnostic::error(
                        jsonx::key_path(&path, "scope"),
                        format!("scope references unknown uav id \"{sid}\""),
                    ));
                }
            }
        }
    }

    out
}

/// Loads the scenario's map and applies its origin override. Relative map
/// paths resolve against `base_dir` (normally the scenario file's directory).
pub fn prepare_world(env: &EnvironmentSpec, base_dir: Option<&Path>) -> Result<WorldModel, WorldError> {
    let mut world = if env.map == BLOCKS_MAP {
        WorldModel::blocks()
    } else {
        let p = Path::new(&env.map);
        match (p.is_relative(), base_dir) {
            (true, Some(dir)) => WorldModel::load(&dir.join(p).to_string_lossy())?,
            _ => WorldModel::load(&env.map)?,
        }
    };
    if let Some(origin) = env.origin {
        world = world.with_origin(origin)?;
    }
    Ok(world)
}
