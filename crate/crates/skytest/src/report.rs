//! Acceptance reports and their on-disk layout.
//!
//! A report is the machine-readable answer to "did this scenario pass": one
//! verdict per configured property, the violation episodes behind any
//! failure, and a manifest of the time-series files written next to it. The
//! JSON document embeds the scenario as it ran (defaults materialized), so a
//! report alone is enough to reproduce the run exactly.
//!
//! Everything written here is deterministic: field order is fixed by the
//! struct definitions, floats render through the standard shortest
//! round-trip formatter, and rows follow tick and scenario order. Two runs
//! of the same scenario produce byte-identical files, which is what lets a
//! stored report serve as a CI regression baseline.

use crate::engine::{RunArtifacts, Termination};
use crate::geodesy::GeodeticCoord;
use crate::mission::active_segment;
use crate::monitors::{cross_track_deviation, PropertyKind, ViolationRecord};
use crate::scenario::ScenarioSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_FORMAT_VERSION: u64 = 1;

/// Normative column order of `telemetry.csv`.
pub const TELEMETRY_COLUMNS: [&str; 13] = [
    "tick",
    "time_s",
    "uav_id",
    "north_m",
    "east_m",
    "down_m",
    "lat_deg",
    "lon_deg",
    "alt_m",
    "speed_mps",
    "heading_deg",
    "phase",
    "active_waypoint",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot encode report: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("cannot write series row: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        *self == Verdict::Pass
    }
}

/// The complete result document written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub format_version: u64,
    /// Fails if any property fails.
    pub verdict: Verdict,
    pub run: RunSummary,
    pub property_results: Vec<PropertyResult>,
    /// Every violation episode, ordered by start time.
    pub violations: Vec<ViolationRecord>,
    /// Time-series files written alongside the report; empty when the
    /// report was built without file output.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesEntry>,
    /// The scenario exactly as run, defaults included.
    pub scenario: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub termination: Termination,
    pub ticks_executed: u64,
    pub dt_s: f64,
    /// `ticks_executed * dt_s`: how much simulated time actually ran.
    pub sim_duration_s: f64,
    /// Geodetic anchor of the local frame all NED values refer to.
    pub frame_origin: GeodeticCoord,
}

/// Verdict for a single configured property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub property_id: String,
    pub kind: String,
    pub verdict: Verdict,
    pub violation_count: usize,
    /// The worst observed value across all episodes; null when passing.
    pub worst_value: Option<f64>,
    pub threshold: f64,
    pub units: String,
    /// One human-readable sentence.
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    /// File name relative to the report.
    pub file: String,
    pub columns: Vec<String>,
    pub description: String,
}

/// Paths produced by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenOutputs {
    pub dir: PathBuf,
    pub report_path: PathBuf,
    pub telemetry_path: PathBuf,
    pub deviation_paths: Vec<PathBuf>,
    pub separation_path: Option<PathBuf>,
}

/// Summarizes one run into a report document (without the series manifest,
/// which only [`write_outputs`] can fill in).
pub fn build_report(art: &RunArtifacts) -> AcceptanceReport {
    let property_results: Vec<PropertyResult> =
        art.scenario.test_properties.iter().map(|p| summarize_property(p, &art.violations)).collect();
    let verdict =
        if property_results.iter().all(|r| r.verdict.is_pass()) { Verdict::Pass } else { Verdict::Fail };
    AcceptanceReport {
        format_version: REPORT_FORMAT_VERSION,
        verdict,
        run: RunSummary {
            seed: art.seed,
            termination: art.termination,
            ticks_executed: art.ticks_executed,
            dt_s: art.dt_s,
            sim_duration_s: art.ticks_executed as f64 * art.dt_s,
            frame_origin: art.frame.origin(),
        },
        property_results,
        violations: art.violations.clone(),
        series: Vec::new(),
        scenario: art.scenario.clone(),
    }
}

fn summarize_property(property: &crate::monitors::SafetyProperty, violations: &[ViolationRecord]) -> PropertyResult {
    let mine: Vec<&ViolationRecord> = violations.iter().filter(|v| v.property_id == property.id).collect();
    // "Worst" runs downward for separation (smaller is worse) and upward for
    // everything else.
    let worst = if mine.is_empty() {
        None
    } else if matches!(property.kind, PropertyKind::MinSeparation { .. }) {
        mine.iter().map(|v| v.worst_value).min_by(f64::total_cmp)
    } else {
        mine.iter().map(|v| v.worst_value).max_by(f64::total_cmp)
    };
    let verdict = if mine.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let threshold = property.kind.threshold();
    let units = property.kind.units();
    let summary = match worst {
        None => "no violations".to_string(),
        Some(w) => format!(
            "{} episode{}; worst {:.3} {} against a threshold of {} {}",
            mine.len(),
            if mine.len() == 1 { "" } else { "s" },
            w,
            units,
            threshold,
            units,
        ),
    };
    PropertyResult {
        property_id: property.id.clone(),
        kind: property.kind.name().to_string(),
        verdict,
        violation_count: mine.len(),
        worst_value: worst,
        threshold,
        units: units.to_string(),
        summary,
    }
}

/// Writes the full output set for one run into `out_dir` (created if
/// missing): `report.json`, `telemetry.csv`, one `deviation_<uav>.csv` per
/// UAV, and `separation.csv` when the scenario has more than one UAV.
pub fn write_outputs(art: &RunArtifacts, out_dir: &Path) -> Result<WrittenOutputs, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io { path: display(out_dir), source })?;
    let mut report = build_report(art);

    let telemetry_path = out_dir.join("telemetry.csv");
    write_telemetry(art, &telemetry_path)?;
    report.series.push(SeriesEntry {
        file: "telemetry.csv".to_string(),
        columns: TELEMETRY_COLUMNS.iter().map(|c| c.to_string()).collect(),
        description: "full state of every uav at every tick".to_string(),
    });

    let mut deviation_paths = Vec::new();
    for (i, name) in series_file_names(&art.uav_ids).into_iter().enumerate() {
        let path = out_dir.join(&name);
        write_deviation_series(art, i, &path)?;
        report.series.push(SeriesEntry {
            file: name,
            columns: vec!["time_s".into(), "deviation_m".into(), "threshold_m".into()],
            description: format!("cross-track distance from the planned path for uav \"{}\"", art.uav_ids[i]),
        });
        deviation_paths.push(path);
    }

    let separation_path = if art.uav_ids.len() >= 2 {
        let path = out_dir.join("separation.csv");
        write_separation_series(art, &path)?;
        report.series.push(SeriesEntry {
            file: "separation.csv".to_string(),
            columns: vec![
                "time_s".into(),
                "min_separation_m".into(),
                "threshold_m".into(),
                "uav_a".into(),
                "uav_b".into(),
            ],
            description: "closest airborne pair at every tick".to_string(),
        });
        Some(path)
    } else {
        None
    };

    let report_path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&report_path, text).map_err(|source| ReportError::Io { path: display(&report_path), source })?;

    Ok(WrittenOutputs { dir: out_dir.to_path_buf(), report_path, telemetry_path, deviation_paths, separation_path })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn write_telemetry(art: &RunArtifacts, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| io_or_csv(e, path))?;
    w.write_record(TELEMETRY_COLUMNS)?;
    for r in &art.telemetry {
        w.write_record([
            r.tick.to_string(),
            r.time_s.to_string(),
            r.uav_id.clone(),
            r.position.north_m.to_string(),
            r.position.east_m.to_string(),
            r.position.down_m.to_string(),
            r.geodetic.lat_deg.to_string(),
            r.geodetic.lon_deg.to_string(),
            r.geodetic.alt_m.to_string(),
            r.speed_mps.to_string(),
            r.heading_deg.to_string(),
            r.phase.as_str().to_string(),
            r.active_waypoint.to_string(),
        ])?;
    }
    w.flush().map_err(|source| ReportError::Io { path: display(path), source })?;
    Ok(())
}

fn io_or_csv(e: csv::Error, path: &Path) -> ReportError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => ReportError::Io { path: display(path), source },
            _ => unreachable!("is_io_error was true"),
        }
    } else {
        ReportError::Csv(e)
    }
}

/// Smallest deviation limit that applies to the UAV, if any property does.
fn deviation_threshold(spec: &ScenarioSpec, uav_id: &str) -> Option<f64> {
    spec.test_properties
        .iter()
        .filter_map(|p| match &p.kind {
            PropertyKind::MaxPathDeviation { max_m, scope } if scope.includes(uav_id) => Some(*max_m),
            _ => None,
        })
        .min_by(f64::total_cmp)
}

fn separation_threshold(spec: &ScenarioSpec) -> Option<f64> {
    spec.test_properties
        .iter()
        .filter_map(|p| match &p.kind {
            PropertyKind::MinSeparation { min_m, .. } => Some(*min_m),
            _ => None,
        })
        .min_by(f64::total_cmp)
}

fn write_deviation_series(art: &RunArtifacts, uav_index: usize, path: &Path) -> Result<(), ReportError> {
    let threshold = deviation_threshold(&art.scenario, &art.uav_ids[uav_index]);
    let threshold_text = threshold.map(|t| t.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_or_csv(e, path))?;
    w.write_record(["time_s", "deviation_m", "threshold_m"])?;
    let n = art.uav_ids.len();
    for r in art.telemetry.iter().skip(uav_index).step_by(n) {
        // Deviation is only defined while tracking the planned path.
        if r.phase != crate::vehicle::FlightPhase::Enroute {
            continue;
        }
        let (a, b) = active_segment(&art.plans[uav_index], art.homes[uav_index], r.active_waypoint);
        let d = cross_track_deviation(&r.position, &a, &b);
        w.write_record([r.time_s.to_string(), d.to_string(), threshold_text.clone()])?;
    }
    w.flush().map_err(|source| ReportError::Io { path: display(path), source })?;
    Ok(())
}

fn write_separation_series(art: &RunArtifacts, path: &Path) -> Result<(), ReportError> {
    let threshold_text = separation_threshold(&art.scenario).map(|t| t.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_or_csv(e, path))?;
    w.write_record(["time_s", "min_separation_m", "threshold_m", "uav_a", "uav_b"])?;
    let n = art.uav_ids.len();
    for tick_rows in art.telemetry.chunks(n) {
        let airborne: Vec<_> = tick_rows.iter().filter(|r| r.phase.is_airborne()).collect();
        let mut best: Option<(f64, &str, &str)> = None;
        for (k, a) in airborne.iter().enumerate() {
            for b in &airborne[k + 1..] {
                let d = a.position.distance_to(&b.position);
                if best.is_none_or(|(cur, _, _)| d < cur) {
                    best = Some((d, &a.uav_id, &b.uav_id));
                }
            }
        }
        if let Some((d, ia, ib)) = best {
            w.write_record([
                tick_rows[0].time_s.to_string(),
                d.to_string(),
                threshold_text.clone(),
                ia.to_string(),
                ib.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|source| ReportError::Io { path: display(path), source })?;
    Ok(())
}

/// Per-UAV deviation file names: `deviation_<id>.csv` with the id reduced to
/// path-safe characters, disambiguated by position when two ids collide
/// after sanitizing.
pub fn series_file_names(uav_ids: &[String]) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(uav_ids.len());
    for id in uav_ids {
        let mut stem: String =
            id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
        if stem.is_empty() {
            stem.push_str("uav");
        }
        let mut name = format!("deviation_{stem}.csv");
        let mut k = 2;
        while names.contains(&name) {
            name = format!("deviation_{stem}_{k}.csv");
            k += 1;
        }
        names.push(name);
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_simulation;
    use crate::monitors::{PropertyKind, SafetyProperty, Scope};
    use crate::scenario::parse_scenario;
    use crate::world::WorldModel;

    fn crash_and_pass_scenario() -> crate::scenario::ScenarioSpec {
        let text = r#"{
            "format_version": 1,
            "uavs": [
                {"id": "crasher", "home": {"ned": [0, 0, 0]}, "plan": {"waypoints": [{"position": {"ned": [100, 100, -10]}}]}},
                {"id": "clean", "home": {"ned": [0, -150, 0]}, "plan": {"waypoints": [{"position": {"ned": [-300, -150, -30]}}]}}
            ],
            "test_properties": [
                {"id": "no-collision", "kind": "no_collision"},
                {"id": "path", "kind": "max_path_deviation", "max_m": 50.0},
                {"id": "spacing", "kind": "min_separation", "min_m": 5.0}
            ],
            "sim": {"max_duration_s": 120.0, "seed": 1}
        }"#;
        parse_scenario(text).unwrap()
    }

    #[test]
    fn report_grades_each_property() {
        let spec = crash_and_pass_scenario();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let report = build_report(&art);
        assert_eq!(report.verdict, Verdict::Fail);
        assert_eq!(report.property_results.len(), 3);
        let by_id = |id: &str| report.property_results.iter().find(|r| r.property_id == id).unwrap();
        let col = by_id("no-collision");
        assert_eq!(col.verdict, Verdict::Fail);
        assert_eq!(col.violation_count, 1);
        assert!(col.worst_value.unwrap() > 0.0);
        assert!(col.summary.contains("1 episode"));
        let path = by_id("path");
        assert_eq!(path.verdict, Verdict::Pass);
        assert_eq!(path.worst_value, None);
        assert_eq!(path.summary, "no violations");
        assert_eq!(report.run.sim_duration_s, report.run.ticks_executed as f64 * report.run.dt_s);
        assert_eq!(report.run.frame_origin.lat_deg, 38.0);
    }

    #[test]
    fn worst_separation_is_the_smallest_value() {
        // Head-on pass: two UAVs swap stations along the same east-west line.
        let text = r#"{
            "format_version": 1,
            "uavs": [
                {"id": "w", "home": {"ned": [50, -40, 0]}, "plan": {"waypoints": [{"position": {"ned": [50, 40, -30]}, "capture_radius_m": 3.0}], "land_after": false}},
                {"id": "e", "home": {"ned": [50, 40, 0]}, "plan": {"waypoints": [{"position": {"ned": [50, -40, -30]}, "capture_radius_m": 3.0}], "land_after": false}}
            ],
            "test_properties": [{"id": "spacing", "kind": "min_separation", "min_m": 20.0}],
            "sim": {"max_duration_s": 60.0, "seed": 0}
        }"#;
        let spec = parse_scenario(text).unwrap();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let report = build_report(&art);
        let spacing = &report.property_results[0];
        assert_eq!(spacing.verdict, Verdict::Fail);
        let worst = spacing.worst_value.unwrap();
        // They converge head-on to nearly zero lateral offset.
        assert!(worst < 5.0, "worst separation {worst}");
        assert!(report
            .violations
            .iter()
            .all(|v| v.property_id == "spacing" && v.worst_value >= worst));
    }

    #[test]
    fn outputs_round_trip_and_are_deterministic() {
        let spec = crash_and_pass_scenario();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let out = write_outputs(&art, &a).unwrap();
        write_outputs(&art, &b).unwrap();

        for name in ["report.json", "telemetry.csv", "deviation_crasher.csv", "deviation_clean.csv", "separation.csv"]
        {
            let left = std::fs::read(a.join(name)).unwrap();
            let right = std::fs::read(b.join(name)).unwrap();
            assert!(!left.is_empty());
            assert_eq!(left, right, "{name} differs between identical writes");
        }

        // The written report parses back to the same value, scenario included.
        let text = std::fs::read_to_string(&out.report_path).unwrap();
        let parsed: AcceptanceReport = serde_json::from_str(&text).unwrap();
        let mut expected = build_report(&art);
        expected.series = parsed.series.clone();
        assert_eq!(parsed, expected);
        assert_eq!(parsed.series.len(), 4);

        // Telemetry has one row per uav per tick plus the header.
        let telemetry = std::fs::read_to_string(&out.telemetry_path).unwrap();
        let rows = telemetry.lines().count();
        assert_eq!(rows as u64, 2 * art.ticks_executed + 1);
        assert_eq!(telemetry.lines().next().unwrap(), TELEMETRY_COLUMNS.join(","));
    }

    #[test]
    fn deviation_series_covers_enroute_only() {
        let text = r#"{
            "format_version": 1,
            "uavs": [{"id": "solo", "home": {"ned": [0, 0, 0]}, "plan": {"waypoints": [{"position": {"ned": [60, 0, -30]}}]}}],
            "test_properties": [{"id": "path", "kind": "max_path_deviation", "max_m": 10.0}],
            "sim": {"max_duration_s": 120.0, "seed": 0}
        }"#;
        let spec = parse_scenario(text).unwrap();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = write_outputs(&art, dir.path()).unwrap();
        assert!(out.separation_path.is_none());

        let series = std::fs::read_to_string(&out.deviation_paths[0]).unwrap();
        let enroute_ticks =
            art.telemetry.iter().filter(|r| r.phase == crate::vehicle::FlightPhase::Enroute).count();
        assert_eq!(series.lines().count(), enroute_ticks + 1);
        // Every data row carries the threshold and a small deviation.
        for line in series.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[2], "10");
            assert!(fields[1].parse::<f64>().unwrap() < 10.0);
        }
    }

    #[test]
    fn file_names_survive_hostile_ids() {
        let ids = vec!["a/b".to_string(), "a_b".to_string(), "a b".to_string(), "".to_string()];
        let names = series_file_names(&ids);
        assert_eq!(names[0], "deviation_a_b.csv");
        assert_eq!(names[1], "deviation_a_b_2.csv");
        assert_eq!(names[2], "deviation_a_b_3.csv");
        assert_eq!(names[3], "deviation_uav.csv");
    }

    #[test]
    fn report_without_files_has_no_series() {
        let spec = crash_and_pass_scenario();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let report = build_report(&art);
        assert!(report.series.is_empty());
        let json = serde_json::to_value(&report).unwrap();
        assert!(json.get("series").is_none(), "empty manifest is omitted");
        // Worst-value null keeps its key so consumers can rely on it.
        assert!(json["property_results"][1]["worst_value"].is_null());
    }

    #[test]
    fn scoped_deviation_threshold_lands_in_the_right_file() {
        let text = r#"{
            "format_version": 1,
            "uavs": [
                {"id": "tight", "home": {"ned": [0, 0, 0]}, "plan": {"waypoints": [{"position": {"ned": [60, 0, -30]}}]}},
                {"id": "loose", "home": {"ned": [0, 50, 0]}, "plan": {"waypoints": [{"position": {"ned": [60, 50, -30]}}]}}
            ],
            "test_properties": [{"id": "path", "kind": "max_path_deviation", "max_m": 7.5, "scope": ["tight"]}],
            "sim": {"max_duration_s": 120.0, "seed": 0}
        }"#;
        let spec = parse_scenario(text).unwrap();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = write_outputs(&art, dir.path()).unwrap();
        let tight = std::fs::read_to_string(&out.deviation_paths[0]).unwrap();
        let loose = std::fs::read_to_string(&out.deviation_paths[1]).unwrap();
        assert!(tight.lines().nth(1).unwrap().ends_with(",7.5"));
        assert!(loose.lines().nth(1).unwrap().ends_with(","), "no threshold for out-of-scope uav");
    }

    #[test]
    fn summary_sentences_read_cleanly() {
        let spec = crash_and_pass_scenario();
        let art = run_simulation(&spec, &WorldModel::blocks()).unwrap();
        let report = build_report(&art);
        for r in &report.property_results {
            assert!(!r.summary.is_empty());
            if r.verdict == Verdict::Fail {
                assert!(r.summary.contains(&r.units), "{}", r.summary);
            }
        }
    }

    #[test]
    fn scope_threshold_helpers() {
        let spec = crash_and_pass_scenario();
        assert_eq!(deviation_threshold(&spec, "crasher"), Some(50.0));
        assert_eq!(separation_threshold(&spec), Some(5.0));
        let mut none = spec.clone();
        none.test_properties
            .retain(|p| !matches!(p.kind, PropertyKind::MaxPathDeviation { .. } | PropertyKind::MinSeparation { .. }));
        assert_eq!(deviation_threshold(&none, "crasher"), None);
        assert_eq!(separation_threshold(&none), None);
        let scoped = SafetyProperty {
            id: "x".into(),
            kind: PropertyKind::MaxPathDeviation { max_m: 3.0, scope: Scope::Ids(vec!["other".into()]) },
        };
        let mut narrowed = none.clone();
        narrowed.test_properties.push(scoped);
        assert_eq!(deviation_threshold(&narrowed, "crasher"), None);
        assert_eq!(deviation_threshold(&narrowed, "other"), Some(3.0));
    }
}
