//! Environment fuzzing: sweeping scenario parameters over ranges to find
//! the conditions under which a mission stops being safe.
//!
//! A campaign takes a base scenario plus a fuzz document naming numeric
//! targets (wind components, sensor noise figures) and a range for each. It
//! materializes `n_variants` scenario variants, runs every one, and grades
//! them individually. Variants 0 and 1 pin all parameters to the low and
//! high ends of their ranges, because the boundaries are where monotone
//! failures live; the rest draw uniformly.
//!
//! Campaigns are deterministic and order-free: each variant's parameter
//! values and run seed derive from the campaign seed and the variant index
//! alone, so running with one worker or eight produces the identical
//! campaign report, byte for byte.

use crate::diag::Issue;
use crate::engine::{derive_seed, run_simulation};
use crate::jsonx::{self, Cx, ObjReader};
use crate::report::{write_outputs, ReportError, Verdict};
use crate::scenario::ScenarioSpec;
use crate::world::{WindField, WorldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

pub const FUZZ_FORMAT_VERSION: u64 = 1;
pub const CAMPAIGN_FORMAT_VERSION: u64 = 1;

/// Sub-seed tags under the campaign seed; distinct per purpose so adding a
/// new derived stream can never shift an existing one.
const SEED_TAG_RUN: u64 = 1;
const SEED_TAG_VALUE: u64 = 2;

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("invalid fuzz spec")]
    Invalid(Vec<Issue>),
    #[error(transparent)]
    Output(#[from] ReportError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot encode campaign report: {0}")]
    Encode(#[from] serde_json::Error),
}

/// A fuzzable scalar in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzTarget {
    Wind(WindParam),
    Sensor { uav: UavSelector, param: SensorParam },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindParam {
    SpeedMps,
    DirectionDeg,
    GustAmplitudeMps,
    GustPeriodS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavSelector {
    All,
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorParam {
    GpsNoiseStdM,
    GpsUpdateHz,
    BarometerNoiseStdM,
    MagnetometerNoiseStdDeg,
}

impl SensorParam {
    fn suffix(&self) -> &'static str {
        match self {
            SensorParam::GpsNoiseStdM => "sensors.gps.noise_std_m",
            SensorParam::GpsUpdateHz => "sensors.gps.update_hz",
            SensorParam::BarometerNoiseStdM => "sensors.barometer.noise_std_m",
            SensorParam::MagnetometerNoiseStdDeg => "sensors.magnetometer.noise_std_deg",
        }
    }
}

pub const TARGET_NAMES: [&str; 8] = [
    "wind.speed_mps",
    "wind.direction_deg",
    "wind.gust_amplitude_mps",
    "wind.gust_period_s",
    "uav[*].sensors.gps.noise_std_m",
    "uav[*].sensors.gps.update_hz",
    "uav[*].sensors.barometer.noise_std_m",
    "uav[*].sensors.magnetometer.noise_std_deg",
];

impl fmt::Display for FuzzTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuzzTarget::Wind(WindParam::SpeedMps) => write!(f, "wind.speed_mps"),
            FuzzTarget::Wind(WindParam::DirectionDeg) => write!(f, "wind.direction_deg"),
            FuzzTarget::Wind(WindParam::GustAmplitudeMps) => write!(f, "wind.gust_amplitude_mps"),
            FuzzTarget::Wind(WindParam::GustPeriodS) => write!(f, "wind.gust_period_s"),
            FuzzTarget::Sensor { uav: UavSelector::All, param } => write!(f, "uav[*].{}", param.suffix()),
            FuzzTarget::Sensor { uav: UavSelector::Index(i), param } => write!(f, "uav[{i}].{}", param.suffix()),
        }
    }
}

impl FromStr for FuzzTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wind.speed_mps" => return Ok(FuzzTarget::Wind(WindParam::SpeedMps)),
            "wind.direction_deg" => return Ok(FuzzTarget::Wind(WindParam::DirectionDeg)),
            "wind.gust_amplitude_mps" => return Ok(FuzzTarget::Wind(WindParam::GustAmplitudeMps)),
            "wind.gust_period_s" => return Ok(FuzzTarget::Wind(WindParam::GustPeriodS)),
            _ => {}
        }
        let err = || {
            format!(
                "unknown fuzz target \"{s}\"; expected one of {} (uav index may replace *)",
                TARGET_NAMES.join(", ")
            )
        };
        let rest = s.strip_prefix("uav[").ok_or_else(err)?;
        let close = rest.find(']').ok_or_else(err)?;
        let uav = if &rest[..close] == "*" {
            UavSelector::All
        } else {
            UavSelector::Index(rest[..close].parse::<usize>().map_err(|_| err())?)
        };
        let suffix = rest[close + 1..].strip_prefix('.').ok_or_else(err)?;
        let param = match suffix {
            "sensors.gps.noise_std_m" => SensorParam::GpsNoiseStdM,
            "sensors.gps.update_hz" => SensorParam::GpsUpdateHz,
            "sensors.barometer.noise_std_m" => SensorParam::BarometerNoiseStdM,
            "sensors.magnetometer.noise_std_deg" => SensorParam::MagnetometerNoiseStdDeg,
            _ => return Err(err()),
        };
        Ok(FuzzTarget::Sensor { uav, param })
    }
}

impl Serialize for FuzzTarget {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// One fuzzed parameter: a target and the closed range it sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FuzzParameter {
    pub target: FuzzTarget,
    pub range: [f64; 2],
}

/// A fuzz campaign document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzSpec {
    pub format_version: u64,
    pub parameters: Vec<FuzzParameter>,
    pub n_variants: usize,
    pub campaign_seed: u64,
}

impl<'de> Deserialize<'de> for FuzzSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        decode_fuzz_spec(&value).map_err(|issues| {
            let joined: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
            serde::de::Error::custom(joined.join("; "))
        })
    }
}

/// Parses and schema-checks a fuzz document.
pub fn parse_fuzz_spec(text: &str) -> Result<FuzzSpec, Vec<Issue>> {
    let mut cx = Cx::new();
    let Some(value) = jsonx::parse_document(&mut cx, text) else {
        return Err(cx.errors);
    };
    decode_fuzz_spec(&value)
}

/// Decodes an already-parsed fuzz document; the service uses this directly.
pub fn decode_fuzz_spec(value: &Value) -> Result<FuzzSpec, Vec<Issue>> {
    let mut cx = Cx::new();
    let mut root = ObjReader::new(&mut cx, Some(value), "");

    if let Some(v) = root.req(&mut cx, "format_version") {
        if let Some(n) = jsonx::u64_at(&mut cx, v, "format_version") {
            if n != FUZZ_FORMAT_VERSION {
                cx.err(
                    "format_version",
                    format!("unsupported format version {n}, this build reads version {FUZZ_FORMAT_VERSION}"),
                );
            }
        }
    }

    let mut parameters = Vec::new();
    if let Some(arr) = root.arr_req(&mut cx, "parameters") {
        if arr.is_empty() {
            cx.err("parameters", "at least one parameter is required");
        }
        for (i, v) in arr.iter().enumerate() {
            let path = jsonx::idx_path("parameters", i);
            let mut reader = ObjReader::new(&mut cx, Some(v), &path);
            let target = reader.str_req(&mut cx, "target").and_then(|s| match s.parse::<FuzzTarget>() {
                Ok(t) => Some(t),
                Err(message) => {
                    cx.err(reader.child_path("target"), message);
                    None
                }
            });
            let range = reader.req(&mut cx, "range").and_then(|v| {
                let range_path = reader.child_path("range");
                let pair = jsonx::f64_tuple::<2>(&mut cx, v, &range_path)?;
                if pair[0] > pair[1] {
                    cx.err(range_path, format!("range low {} exceeds high {}", pair[0], pair[1]));
                    return None;
                }
                Some(pair)
            });
            reader.deny_unknown(&mut cx);
            if let (Some(target), Some(range)) = (target, range) {
                if let Err(message) = range_fits_domain(target, range) {
                    cx.err(reader.child_path("range"), message);
                } else {
                    parameters.push(FuzzParameter { target, range });
                }
            }
        }
    }
    for (i, p) in parameters.iter().enumerate() {
        if parameters[..i].iter().any(|q| q.target == p.target) {
            cx.err(jsonx::idx_path("parameters", i), format!("duplicate fuzz target \"{}\"", p.target));
        }
    }

    let n_variants = root.u64_or(&mut cx, "n_variants", 16) as usize;
    if n_variants == 0 {
        cx.err("n_variants", "at least one variant is required");
    }
    let campaign_seed = root.u64_or(&mut cx, "campaign_seed", 0);
    root.deny_unknown(&mut cx);
    cx.finish(FuzzSpec { format_version: FUZZ_FORMAT_VERSION, parameters, n_variants, campaign_seed })
}

/// The physical domain each target admits; ranges must stay inside it so
/// every variant is a valid scenario.
fn range_fits_domain(target: FuzzTarget, range: [f64; 2]) -> Result<(), String> {
    let lo = range[0];
    match target {
        FuzzTarget::Wind(WindParam::DirectionDeg) => Ok(()),
        FuzzTarget::Wind(WindParam::SpeedMps) | FuzzTarget::Wind(WindParam::GustAmplitudeMps) => {
            if lo < 0.0 {
                Err(format!("\"{target}\" cannot go below 0, range starts at {lo}"))
            } else {
                Ok(())
            }
        }
        FuzzTarget::Wind(WindParam::GustPeriodS) => {
            if lo <= 0.0 {
                Err(format!("\"{target}\" must stay above 0, range starts at {lo}"))
            } else {
                Ok(())
            }
        }
        FuzzTarget::Sensor { param, .. } => match param {
            SensorParam::GpsNoiseStdM | SensorParam::BarometerNoiseStdM | SensorParam::MagnetometerNoiseStdDeg => {
                if lo < 0.0 {
                    Err(format!("\"{target}\" cannot go below 0, range starts at {lo}"))
                } else {
                    Ok(())
                }
            }
            SensorParam::GpsUpdateHz => {
                if lo <= 0.0 {
                    Err(format!("\"{target}\" must stay above 0, range starts at {lo}"))
                } else {
                    Ok(())
                }
            }
        },
    }
}

/// Checks a fuzz spec against the scenario it will mutate. Currently this
/// verifies that indexed UAV targets exist.
pub fn validate_fuzz_spec(fuzz: &FuzzSpec, base: &ScenarioSpec) -> Vec<Issue> {
    let mut issues = Vec::new();
    for (i, p) in fuzz.parameters.iter().enumerate() {
        if let FuzzTarget::Sensor { uav: UavSelector::Index(idx), .. } = p.target {
            if idx >= base.uavs.len() {
                issues.push(Issue::new(
                    jsonx::key_path(&jsonx::idx_path("parameters", i), "target"),
                    format!("uav index {idx} is out of range; the scenario has {} uavs", base.uavs.len()),
                ));
            }
        }
    }
    issues
}

fn apply_value(spec: &mut ScenarioSpec, target: FuzzTarget, value: f64) {
    match target {
        FuzzTarget::Wind(param) => {
            let w = spec.environment.wind;
            let (mut dir, mut speed, mut amp, mut period) =
                (w.direction_deg, w.speed_mps, w.gust_amplitude_mps, w.gust_period_s);
            match param {
                WindParam::SpeedMps => speed = value,
                WindParam::DirectionDeg => dir = value,
                WindParam::GustAmplitudeMps => amp = value,
                WindParam::GustPeriodS => period = value,
            }
            spec.environment.wind =
                WindField::new(dir, speed, amp, period).expect("fuzz ranges are domain-checked at parse");
        }
        FuzzTarget::Sensor { uav, param } => {
            for (i, u) in spec.uavs.iter_mut().enumerate() {
                if let UavSelector::Index(idx) = uav {
                    if i != idx {
                        continue;
                    }
                }
                match param {
                    SensorParam::GpsNoiseStdM => u.sensors.gps.noise_std_m = value,
                    SensorParam::GpsUpdateHz => u.sensors.gps.update_hz = value,
                    SensorParam::BarometerNoiseStdM => u.sensors.barometer.noise_std_m = value,
                    SensorParam::MagnetometerNoiseStdDeg => u.sensors.magnetometer.noise_std_deg = value,
                }
            }
        }
    }
}

/// One materialized variant, before execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub index: usize,
    pub seed: u64,
    /// Parameter values keyed by target name, in target-name order.
    pub values: BTreeMap<String, f64>,
    pub scenario: ScenarioSpec,
}

/// Builds all variant scenarios. Variant 0 takes every range's low end and
/// variant 1 the high end; later variants draw each parameter uniformly from
/// a stream derived from (campaign seed, variant index, parameter index).
/// The base scenario's own seed is ignored: each variant runs under a seed
/// derived from the campaign seed.
pub fn generate_variants(base: &ScenarioSpec, fuzz: &FuzzSpec) -> Vec<Variant> {
    (0..fuzz.n_variants)
        .map(|index| {
            let mut scenario = base.clone();
            let mut values = BTreeMap::new();
            for (pi, p) in fuzz.parameters.iter().enumerate() {
                let [lo, hi] = p.range;
                let value = match index {
                    0 => lo,
                    1 => hi,
                    _ => {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                            fuzz.campaign_seed,
                            &[SEED_TAG_VALUE, index as u64, pi as u64],
                        ));
                        rng.random_range(lo..=hi)
                    }
                };
                apply_value(&mut scenario, p.target, value);
                values.insert(p.target.to_string(), value);
            }
            let seed = derive_seed(fuzz.campaign_seed, &[SEED_TAG_RUN, index as u64]);
            scenario.sim.seed = seed;
            Variant { index, seed, values, scenario }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantOutcome {
    Pass,
    Violations,
    Error,
}

/// How one variant fared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub index: usize,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    pub outcome: VariantOutcome,
    pub violation_count: usize,
    /// Ids of the properties that failed, scenario order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_properties: Vec<String>,
    /// Directory of this variant's full report, relative to the campaign
    /// directory; absent when the campaign ran without file output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The whole-campaign result document written as `campaign.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub format_version: u64,
    /// Fails when any variant observed violations.
    pub verdict: Verdict,
    pub campaign_seed: u64,
    pub n_variants: usize,
    pub parameters: Vec<CampaignParameter>,
    pub variants: Vec<VariantSummary>,
    pub failing_variants: Vec<usize>,
    pub error_variants: Vec<usize>,
    /// The base scenario the variants were derived from.
    pub scenario: ScenarioSpec,
}

/// Serialized echo of one fuzzed parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignParameter {
    pub target: String,
    pub range: [f64; 2],
}

/// Runs every variant and grades the lot. With `out_dir` set, each variant's
/// full outputs land in `<out_dir>/variant_<index>/` and the caller usually
/// follows up with [`write_campaign`]. `jobs` workers run variants in
/// parallel; the report is identical for any worker count.
pub fn run_campaign(
    base: &ScenarioSpec,
    fuzz: &FuzzSpec,
    world: &WorldModel,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<CampaignReport, FuzzError> {
    let issues = validate_fuzz_spec(fuzz, base);
    if !issues.is_empty() {
        return Err(FuzzError::Invalid(issues));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| FuzzError::Io { path: dir.display().to_string(), source })?;
    }

    let variants = generate_variants(base, fuzz);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<VariantSummary, FuzzError>>>> =
        Mutex::new((0..variants.len()).map(|_| None).collect());
    let workers = jobs.max(1).min(variants.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= variants.len() {
                    break;
                }
                let summary = execute_variant(&variants[k], world, out_dir);
                results.lock().expect("no panics hold this lock")[k] = Some(summary);
            });
        }
    });

    let mut variants_out = Vec::with_capacity(variants.len());
    for slot in results.into_inner().expect("workers joined") {
        variants_out.push(slot.expect("every slot filled")?);
    }

    let failing_variants: Vec<usize> =
        variants_out.iter().filter(|v| v.outcome == VariantOutcome::Violations).map(|v| v.index).collect();
    let error_variants: Vec<usize> =
        variants_out.iter().filter(|v| v.outcome == VariantOutcome::Error).map(|v| v.index).collect();
    let verdict = if failing_variants.is_empty() { Verdict::Pass } else { Verdict::Fail };

    Ok(CampaignReport {
        format_version: CAMPAIGN_FORMAT_VERSION,
        verdict,
        campaign_seed: fuzz.campaign_seed,
        n_variants: fuzz.n_variants,
        parameters: fuzz
            .parameters
            .iter()
            .map(|p| CampaignParameter { target: p.target.to_string(), range: p.range })
            .collect(),
        variants: variants_out,
        failing_variants,
        error_variants,
        scenario: base.clone(),
    })
}

fn execute_variant(variant: &Variant, world: &WorldModel, out_dir: Option<&Path>) -> Result<VariantSummary, FuzzError> {
    let mut summary = VariantSummary {
        index: variant.index,
        seed: variant.seed,
        values: variant.values.clone(),
        outcome: VariantOutcome::Pass,
        violation_count: 0,
        failed_properties: Vec::new(),
        report_dir: None,
        error: None,
    };
    match run_simulation(&variant.scenario, world) {
        Ok(art) => {
            summary.violation_count = art.violations.len();
            if !art.violations.is_empty() {
                summary.outcome = VariantOutcome::Violations;
                summary.failed_properties = variant
                    .scenario
                    .test_properties
                    .iter()
                    .filter(|p| art.violations.iter().any(|v| v.property_id == p.id))
                    .map(|p| p.id.clone())
                    .collect();
            }
            if let Some(dir) = out_dir {
                let name = format!("variant_{:04}", variant.index);
                write_outputs(&art, &dir.join(&name))?;
                summary.report_dir = Some(name);
            }
        }
        // A variant that cannot run is a campaign finding, not a harness
        // failure.
        Err(e) => {
            summary.outcome = VariantOutcome::Error;
            summary.error = Some(e.to_string());
        }
    }
    Ok(summary)
}

/// Writes `campaign.json` into `dir` and returns its path.
pub fn write_campaign(report: &CampaignReport, dir: &Path) -> Result<PathBuf, FuzzError> {
    std::fs::create_dir_all(dir).map_err(|source| FuzzError::Io { path: dir.display().to_string(), source })?;
    let path = dir.join("campaign.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| FuzzError::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

// serde derives cannot express "struct with a custom-parsed field list", so
// FuzzParameter round-trips through CampaignParameter's shape manually.
impl<'de> Deserialize<'de> for FuzzParameter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            target: String,
            range: [f64; 2],
        }
        let raw = Raw::deserialize(deserializer)?;
        let target = raw.target.parse::<FuzzTarget>().map_err(serde::de::Error::custom)?;
        Ok(FuzzParameter { target, range: raw.range })
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Variant", 4)?;
        s.serialize_field("index", &self.index)?;
        s.serialize_field("seed", &self.seed)?;
        s.serialize_field("values", &self.values)?;
        s.serialize_field("scenario", &self.scenario)?;
        s.end()
    }
}
