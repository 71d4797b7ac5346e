//! Safety properties and the episode-based violation tracker.
//!
//! Five property kinds are supported: maximum path deviation, minimum
//! pairwise separation, no-collision, safe landing, and no-fly zones. Each
//! configured property watches a scope of UAVs every tick; consecutive
//! violating ticks coalesce into one episode carrying the worst observed
//! value, so a five-second excursion is a single finding rather than
//! hundreds of rows.
//!
//! Phase rules: deviation is measured only while Enroute (a landing descent
//! is intentional vertical motion, not path error); separation and no-fly
//! consider airborne UAVs (Enroute or Landing); collision applies to any
//! non-terminal UAV and is always evaluated by the engine because it drives
//! the Crashed transition, with a configured NoCollision property controlling
//! only whether events are reported; safe landing is judged at touchdown, and
//! at run end for scoped UAVs that never landed.
//!
//! Monitors are pure observers: they consume no randomness and never touch
//! vehicle state, so configuring them cannot change a trajectory.

use crate::geodesy::NedPosition;
use crate::vehicle::{FlightPhase, UavState};
use crate::world::{AltitudeBand, Polygon2D, WorldModel};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("landing check requires phase landed, found {0:?}")]
    NotLanded(FlightPhase),
}

/// Which UAVs a property watches: everyone, or an explicit id list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Scope {
    #[default]
    All,
    Ids(Vec<String>),
}

impl Scope {
    pub fn includes(&self, id: &str) -> bool {
        match self {
            Scope::All => true,
            Scope::Ids(ids) => ids.iter().any(|i| i == id),
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scope::All => serializer.serialize_str("all"),
            Scope::Ids(ids) => ids.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Ids(Vec<String>),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Word(w) if w == "all" => Ok(Scope::All),
            Raw::Word(w) => Err(D::Error::custom(format!("scope must be \"all\" or an id list, got \"{w}\""))),
            Raw::Ids(ids) => Ok(Scope::Ids(ids)),
        }
    }
}

/// A place where landing is acceptable: a circle or a polygon, both in the
/// horizontal plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandingZone {
    Circle { center_ned: [f64; 2], radius_m: f64 },
    Polygon(Polygon2D),
}

impl LandingZone {
    pub fn contains(&self, north_m: f64, east_m: f64) -> bool {
        self.distance_to(north_m, east_m) <= 0.0
    }

    /// Horizontal distance to the zone; 0 inside (boundary-inclusive).
    pub fn distance_to(&self, north_m: f64, east_m: f64) -> f64 {
        match self {
            LandingZone::Circle { center_ned, radius_m } => {
                ((north_m - center_ned[0]).hypot(east_m - center_ned[1]) - radius_m).max(0.0)
            }
            LandingZone::Polygon(poly) => {
                if poly.contains(north_m, east_m) {
                    0.0
                } else {
                    poly.boundary_distance(north_m, east_m)
                }
            }
        }
    }
}

/// One configured safety property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyProperty {
    pub id: String,
    #[serde(flatten)]
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropertyKind {
    /// Flown position must stay within `max_m` of the intended segment.
    MaxPathDeviation { max_m: f64, scope: Scope },
    /// Every airborne pair must stay at least `min_m` apart.
    MinSeparation { min_m: f64, scope: Scope },
    /// No terrain, obstacle, or UAV-to-UAV contact.
    NoCollision { scope: Scope },
    /// Touchdown must happen inside one of the zones.
    SafeLanding { zones: Vec<LandingZone>, scope: Scope },
    /// Stay out of the polygon while inside the altitude band.
    NoFlyZone {
        polygon: Polygon2D,
        #[serde(flatten)]
        band: AltitudeBand,
        scope: Scope,
    },
}

impl PropertyKind {
    pub fn scope(&self) -> &Scope {
        match self {
            PropertyKind::MaxPathDeviation { scope, .. }
            | PropertyKind::MinSeparation { scope, .. }
            | PropertyKind::NoCollision { scope }
            | PropertyKind::SafeLanding { scope, .. }
            | PropertyKind::NoFlyZone { scope, .. } => scope,
        }
    }

    /// Stable kind name matching the scenario format.
    pub fn name(&self) -> &'static str {
        match self {
            PropertyKind::MaxPathDeviation { .. } => "max_path_deviation",
            PropertyKind::MinSeparation { .. } => "min_separation",
            PropertyKind::NoCollision { .. } => "no_collision",
            PropertyKind::SafeLanding { .. } => "safe_landing",
            PropertyKind::NoFlyZone { .. } => "no_fly_zone",
        }
    }

    /// The configured threshold as reported (0 for the event-like kinds).
    pub fn threshold(&self) -> f64 {
        match self {
            PropertyKind::MaxPathDeviation { max_m, .. } => *max_m,
            PropertyKind::MinSeparation { min_m, .. } => *min_m,
            PropertyKind::NoCollision { .. } | PropertyKind::SafeLanding { .. } | PropertyKind::NoFlyZone { .. } => 0.0,
        }
    }

    pub fn units(&self) -> &'static str {
        match self {
            PropertyKind::MaxPathDeviation { .. } => "m",
            PropertyKind::MinSeparation { .. } => "m",
            PropertyKind::NoCollision { .. } => "m penetration",
            PropertyKind::SafeLanding { .. } => "m outside zones",
            PropertyKind::NoFlyZone { .. } => "m incursion",
        }
    }
}

/// One violation episode: a maximal run of consecutive violating ticks for
/// one property and one subject (a UAV, or a pair for separation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub property_id: String,
    /// One id, or two (index-ordered) for separation episodes.
    pub uav_ids: Vec<String>,
    pub start_time_s: f64,
    pub end_time_s: f64,
    /// The worst sample in the episode: largest deviation/penetration/
    /// incursion, or smallest separation.
    pub worst_value: f64,
    pub units: String,
    pub threshold: f64,
    /// Position at the worst sample (pair midpoint for separation).
    pub position: NedPosition,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

/// 3D distance from a point to the closed segment `(from, to)`.
pub fn cross_track_deviation(pos: &NedPosition, from: &NedPosition, to: &NedPosition) -> f64 {
    let ab = [to.north_m - from.north_m, to.east_m - from.east_m, to.down_m - from.down_m];
    let ap = [pos.north_m - from.north_m, pos.east_m - from.east_m, pos.down_m - from.down_m];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    };
    let closest = NedPosition::new(
        from.north_m + t * ab[0],
        from.east_m + t * ab[1],
        from.down_m + t * ab[2],
    );
    pos.distance_to(&closest)
}

/// Minimum 3D separation over all airborne pairs, with the achieving pair as
/// indices into the input slice. `None` when fewer than two UAVs are
/// airborne. Landed, crashed, and idle UAVs never form pairs.
pub fn min_pairwise_separation(states: &[UavState]) -> Option<(f64, (usize, usize))> {
    let airborne: Vec<usize> = (0..states.len()).filter(|&i| states[i].phase.is_airborne()).collect();
    let mut best: Option<(f64, (usize, usize))> = None;
    for (k, &i) in airborne.iter().enumerate() {
        for &j in &airborne[k + 1..] {
            let d = states[i].position.distance_to(&states[j].position);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, (i, j)));
            }
        }
    }
    best
}

/// True iff the position is horizontally inside the polygon (boundary
/// inclusive) and the altitude (`-down`) is within the band.
pub fn check_no_fly(pos: &NedPosition, polygon: &Polygon2D, band: &AltitudeBand) -> bool {
    band.contains(-pos.down_m) && polygon.contains(pos.north_m, pos.east_m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollisionKind {
    Terrain,
    Obstacle { index: usize },
    UavContact { other_id: String },
}

impl CollisionKind {
    pub fn describe(&self) -> String {
        match self {
            CollisionKind::Terrain => "terrain".to_string(),
            CollisionKind::Obstacle { index } => format!("obstacle {index}"),
            CollisionKind::UavContact { other_id } => format!("contact with {other_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub kind: CollisionKind,
    /// Overlap depth in meters (0 at grazing contact).
    pub penetration_m: f64,
    pub position: NedPosition,
}

/// Collision check for one UAV against terrain, obstacles, then other UAVs,
/// in that order; the first matching category wins. UAV contact triggers at
/// center distance below twice the body radius. `others` should hold only
/// non-terminal UAVs.
pub fn check_collision(
    state: &UavState,
    world: &WorldModel,
    others: &[&UavState],
    body_radius_m: f64,
) -> Option<CollisionEvent> {
    let alt = world.altitude_above_terrain(&state.position);
    if alt <= 0.0 {
        return Some(CollisionEvent { kind: CollisionKind::Terrain, penetration_m: -alt, position: state.position });
    }
    for (index, obstacle) in world.obstacles.iter().enumerate() {
        let d = obstacle.distance_to_point(&state.position);
        if d < body_radius_m {
            return Some(CollisionEvent {
                kind: CollisionKind::Obstacle { index },
                penetration_m: body_radius_m - d,
                position: state.position,
            });
        }
    }
    let mut worst: Option<CollisionEvent> = None;
    for other in others {
        if other.id == state.id {
            continue;
        }
        let d = state.position.distance_to(&other.position);
        let limit = 2.0 * body_radius_m;
        if d < limit {
            let penetration_m = limit - d;
            if worst.as_ref().is_none_or(|w| penetration_m > w.penetration_m) {
                worst = Some(CollisionEvent {
                    kind: CollisionKind::UavContact { other_id: other.id.clone() },
                    penetration_m,
                    position: state.position,
                });
            }
        }
    }
    worst
}

/// Minimum distance from a horizontal point to any zone; 0 when inside one.
pub fn landing_zone_distance(zones: &[LandingZone], north_m: f64, east_m: f64) -> f64 {
    zones
        .iter()
        .map(|z| z.distance_to(north_m, east_m))
        .fold(f64::INFINITY, f64::min)
}

/// Whether a landed UAV touched down inside at least one zone.
pub fn check_landing(final_state: &UavState, zones: &[LandingZone]) -> Result<bool, MonitorError> {
    if final_state.phase != FlightPhase::Landed {
        return Err(MonitorError::NotLanded(final_state.phase));
    }
    Ok(zones.iter().any(|z| z.contains(final_state.position.north_m, final_state.position.east_m)))
}

/// Everything the monitors see for one tick. States, segments, and collision
/// events are index-aligned with the engine's UAV order.
pub struct TickSnapshot<'a> {
    pub time_s: f64,
    pub states: &'a [UavState],
    /// Active intended-path segment per UAV.
    pub segments: &'a [(NedPosition, NedPosition)],
    /// Collision event per UAV for this tick, if any.
    pub collisions: &'a [Option<CollisionEvent>],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SubjectKey {
    Uav(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone)]
struct OpenEpisode {
    start_time_s: f64,
    last_time_s: f64,
    worst_value: f64,
    worst_position: NedPosition,
    detail: Option<String>,
}

/// Whether larger or smaller samples are worse for a property.
#[derive(Clone, Copy, PartialEq)]
enum Worseness {
    Larger,
    Smaller,
}

struct PropRuntime {
    property: SafetyProperty,
    open: BTreeMap<SubjectKey, OpenEpisode>,
}

/// Tracks violation episodes for a configured property set across a run.
///
/// Call [`MonitorBank::evaluate_tick`] once per tick on the post-step
/// snapshot, [`MonitorBank::record_touchdown`] when a UAV transitions to
/// Landed, and [`MonitorBank::finalize`] once at the end of the run to close
/// open episodes and collect the sorted records.
pub struct MonitorBank {
    uav_ids: Vec<String>,
    props: Vec<PropRuntime>,
    closed: Vec<(usize, SubjectKey, ViolationRecord)>,
}

impl MonitorBank {
    pub fn new(properties: &[SafetyProperty], uav_ids: &[String]) -> Self {
        MonitorBank {
            uav_ids: uav_ids.to_vec(),
            props: properties
                .iter()
                .map(|p| PropRuntime { property: p.clone(), open: BTreeMap::new() })
                .collect(),
            closed: Vec::new(),
        }
    }

    fn worseness(kind: &PropertyKind) -> Worseness {
        match kind {
            PropertyKind::MinSeparation { .. } => Worseness::Smaller,
            _ => Worseness::Larger,
        }
    }

    /// Feeds one violating sample for (property, subject); opens or extends
    /// the episode.
    fn hit(
        prop: &mut PropRuntime,
        key: SubjectKey,
        time_s: f64,
        value: f64,
        position: NedPosition,
        detail: Option<String>,
    ) {
        let worse = Self::worseness(&prop.property.kind);
        let ep = prop.open.entry(key).or_insert_with(|| OpenEpisode {
            start_time_s: time_s,
            last_time_s: time_s,
            worst_value: value,
            worst_position: position,
            detail: detail.clone(),
        });
        ep.last_time_s = time_s;
        let is_worse = match worse {
            Worseness::Larger => value > ep.worst_value,
            Worseness::Smaller => value < ep.worst_value,
        };
        if is_worse {
            ep.worst_value = value;
            ep.worst_position = position;
            ep.detail = detail;
        }
    }

    fn close(&mut self, prop_idx: usize, key: SubjectKey) {
        let prop = &mut self.props[prop_idx];
        let Some(ep) = prop.open.remove(&key) else { return };
        let uav_ids = match key {
            SubjectKey::Uav(i) => vec![self.uav_ids[i].clone()],
            SubjectKey::Pair(i, j) => vec![self.uav_ids[i].clone(), self.uav_ids[j].clone()],
        };
        self.closed.push((
            prop_idx,
            key,
            ViolationRecord {
                property_id: prop.property.id.clone(),
                uav_ids,
                start_time_s: ep.start_time_s,
                end_time_s: ep.last_time_s,
                worst_value: ep.worst_value,
                units: prop.property.kind.units().to_string(),
                threshold: prop.property.kind.threshold(),
                position: ep.worst_position,
                detail: ep.detail,
            },
        ));
    }

    /// Evaluates all tick-based properties on a post-step snapshot.
    pub fn evaluate_tick(&mut self, snap: &TickSnapshot<'_>) {
        debug_assert_eq!(snap.states.len(), self.uav_ids.len());
        debug_assert_eq!(snap.segments.len(), snap.states.len());
        debug_assert_eq!(snap.collisions.len(), snap.states.len());
        for prop_idx in 0..self.props.len() {
            // Collect this tick's violating subjects, then reconcile with the
            // open-episode table.
            let mut violating: Vec<(SubjectKey, f64, NedPosition, Option<String>)> = Vec::new();
            let kind = self.props[prop_idx].property.kind.clone();
            match &kind {
                PropertyKind::MaxPathDeviation { max_m, scope } => {
                    for (i, s) in snap.states.iter().enumerate() {
                        if s.phase != FlightPhase::Enroute || !scope.includes(&s.id) {
                            continue;
                        }
                        let (from, to) = snap.segments[i];
                        let dev = cross_track_deviation(&s.position, &from, &to);
                        if dev > *max_m {
                            violating.push((SubjectKey::Uav(i), dev, s.position, None));
                        }
                    }
                }
                PropertyKind::MinSeparation { min_m, scope } => {
                    for i in 0..snap.states.len() {
                        for j in (i + 1)..snap.states.len() {
                            let (a, b) = (&snap.states[i], &snap.states[j]);
                            if !(a.phase.is_airborne() && b.phase.is_airborne()) {
                                continue;
                            }
                            if !(scope.includes(&a.id) && scope.includes(&b.id)) {
                                continue;
                            }
                            let d = a.position.distance_to(&b.position);
                            if d < *min_m {
                                let mid = NedPosition::new(
                                    (a.position.north_m + b.position.north_m) / 2.0,
                                    (a.position.east_m + b.position.east_m) / 2.0,
                                    (a.position.down_m + b.position.down_m) / 2.0,
                                );
                                violating.push((SubjectKey::Pair(i, j), d, mid, None));
                            }
                        }
                    }
                }
                PropertyKind::NoCollision { scope } => {
                    for (i, ev) in snap.collisions.iter().enumerate() {
                        let s = &snap.states[i];
                        if !scope.includes(&s.id) {
                            continue;
                        }
                        if let Some(ev) = ev {
                            violating.push((
                                SubjectKey::Uav(i),
                                ev.penetration_m,
                                ev.position,
                                Some(ev.kind.describe()),
                            ));
                        }
                    }
                }
                // Judged at touchdown / finalize, not per tick.
                PropertyKind::SafeLanding { .. } => {}
                PropertyKind::NoFlyZone { polygon, band, scope } => {
                    for (i, s) in snap.states.iter().enumerate() {
                        if !s.phase.is_airborne() || !scope.includes(&s.id) {
                            continue;
                        }
                        if check_no_fly(&s.position, polygon, band) {
                            let depth = polygon.incursion_depth(s.position.north_m, s.position.east_m);
                            violating.push((SubjectKey::Uav(i), depth, s.position, None));
                        }
                    }
                }
            }

            let violating_keys: Vec<SubjectKey> = violating.iter().map(|(k, ..)| *k).collect();
            let to_close: Vec<SubjectKey> = self.props[prop_idx]
                .open
                .keys()
                .filter(|k| !violating_keys.contains(k))
                .copied()
                .collect();
            for key in to_close {
                self.close(prop_idx, key);
            }
            for (key, value, position, detail) in violating {
                Self::hit(&mut self.props[prop_idx], key, snap.time_s, value, position, detail);
            }
        }
    }

    /// Judges safe-landing properties for a UAV that just touched down.
    pub fn record_touchdown(&mut self, uav_index: usize, time_s: f64, position: NedPosition) {
        for prop_idx in 0..self.props.len() {
            let PropertyKind::SafeLanding { zones, scope } = &self.props[prop_idx].property.kind else {
                continue;
            };
            let id = &self.uav_ids[uav_index];
            if !scope.includes(id) {
                continue;
            }
            let dist = landing_zone_distance(zones, position.north_m, position.east_m);
            if dist > 0.0 {
                Self::hit(
                    &mut self.props[prop_idx],
                    SubjectKey::Uav(uav_index),
                    time_s,
                    dist,
                    position,
                    Some("touchdown outside all landing zones".to_string()),
                );
                self.close(prop_idx, SubjectKey::Uav(uav_index));
            }
        }
    }

    /// Closes every open episode, judges never-landed UAVs against
    /// safe-landing properties, and returns all records sorted by start time,
    /// property order, then subject.
    pub fn finalize(mut self, end_time_s: f64, final_states: &[UavState]) -> Vec<ViolationRecord> {
        for prop_idx in 0..self.props.len() {
            if let PropertyKind::SafeLanding { zones, scope } = self.props[prop_idx].property.kind.clone() {
                for (i, s) in final_states.iter().enumerate() {
                    if !scope.includes(&s.id) || s.phase == FlightPhase::Landed {
                        continue;
                    }
                    let dist = landing_zone_distance(&zones, s.position.north_m, s.position.east_m);
                    Self::hit(
                        &mut self.props[prop_idx],
                        SubjectKey::Uav(i),
                        end_time_s,
                        dist,
                        s.position,
                        Some("never landed".to_string()),
                    );
                }
            }
            let keys: Vec<SubjectKey> = self.props[prop_idx].open.keys().copied().collect();
            for key in keys {
                self.close(prop_idx, key);
            }
        }
        let mut closed = std::mem::take(&mut self.closed);
        closed.sort_by(|(pa, ka, ra), (pb, kb, rb)| {
            ra.start_time_s
                .total_cmp(&rb.start_time_s)
                .then(pa.cmp(pb))
                .then(ka.cmp(kb))
        });
        closed.into_iter().map(|(_, _, r)| r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::NedVelocity;

    fn uav(id: &str, n: f64, e: f64, d: f64, phase: FlightPhase) -> UavState {
        UavState {
            id: id.to_string(),
            position: NedPosition::new(n, e, d),
            velocity: NedVelocity::ZERO,
            heading_deg: 0.0,
            phase,
            time_s: 0.0,
        }
    }

    #[test]
    fn deviation_examples() {
        let from = NedPosition::new(0.0, 0.0, 0.0);
        let to = NedPosition::new(10.0, 0.0, 0.0);
        assert_eq!(cross_track_deviation(&NedPosition::new(0.0, 1.0, 0.0), &from, &to), 1.0);
        // Beyond the far endpoint: distance to the endpoint, not the line.
        assert_eq!(cross_track_deviation(&NedPosition::new(12.0, 0.0, 0.0), &from, &to), 2.0);
        assert_eq!(cross_track_deviation(&NedPosition::new(5.0, 0.0, 0.0), &from, &to), 0.0);
        // Degenerate segment: plain distance.
        assert_eq!(cross_track_deviation(&NedPosition::new(3.0, 4.0, 0.0), &to, &to), NedPosition::new(3.0, 4.0, 0.0).distance_to(&to));
    }

    #[test]
    fn deviation_bounded_by_endpoint_distances() {
        let from = NedPosition::new(-3.0, 2.0, -1.0);
        let to = NedPosition::new(7.0, -4.0, -9.0);
        for p in [
            NedPosition::new(0.0, 0.0, 0.0),
            NedPosition::new(10.0, 10.0, 10.0),
            NedPosition::new(-5.0, 3.0, -2.0),
        ] {
            let d = cross_track_deviation(&p, &from, &to);
            assert!(d <= p.distance_to(&from) + 1e-12);
            assert!(d <= p.distance_to(&to) + 1e-12);
        }
    }

    #[test]
    fn separation_examples() {
        // 3-4-5 triangle: minimum is the 3 m pair.
        let states = vec![
            uav("a", 0.0, 0.0, -10.0, FlightPhase::Enroute),
            uav("b", 3.0, 0.0, -10.0, FlightPhase::Enroute),
            uav("c", 0.0, 4.0, -10.0, FlightPhase::Enroute),
        ];
        let (d, pair) = min_pairwise_separation(&states).unwrap();
        assert_eq!(d, 3.0);
        assert_eq!(pair, (0, 1));

        assert!(min_pairwise_separation(&states[..1]).is_none());

        // Landed and crashed UAVs form no pairs.
        let mut grounded = states.clone();
        grounded[1].phase = FlightPhase::Landed;
        let (d, pair) = min_pairwise_separation(&grounded).unwrap();
        assert_eq!(d, 4.0);
        assert_eq!(pair, (0, 2));
        grounded[2].phase = FlightPhase::Crashed;
        assert!(min_pairwise_separation(&grounded).is_none());
    }

    #[test]
    fn separation_symmetric_under_permutation() {
        let states = vec![
            uav("a", 0.0, 0.0, -10.0, FlightPhase::Enroute),
            uav("b", 3.0, 0.0, -10.0, FlightPhase::Enroute),
            uav("c", 0.0, 4.0, -10.0, FlightPhase::Enroute),
        ];
        let mut reversed: Vec<UavState> = states.clone();
        reversed.reverse();
        let (d1, _) = min_pairwise_separation(&states).unwrap();
        let (d2, _) = min_pairwise_separation(&reversed).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn no_fly_band_logic() {
        let poly = Polygon2D::new(vec![[0.0, 0.0], [0.0, 10.0], [10.0, 10.0], [10.0, 0.0]]).unwrap();
        let band = AltitudeBand::new(0.0, Some(50.0)).unwrap();
        assert!(check_no_fly(&NedPosition::new(5.0, 5.0, -30.0), &poly, &band));
        // Above the ceiling: overflight is allowed.
        assert!(!check_no_fly(&NedPosition::new(5.0, 5.0, -60.0), &poly, &band));
        assert!(!check_no_fly(&NedPosition::new(50.0, 50.0, -30.0), &poly, &band));
        // Boundary point counts as inside.
        assert!(check_no_fly(&NedPosition::new(0.0, 5.0, -30.0), &poly, &band));
    }

    #[test]
    fn collision_categories_and_order() {
        let world = WorldModel::blocks();
        // Below terrain: down > 0 means under the 0 m surface.
        let s = uav("a", 50.0, 50.0, 0.5, FlightPhase::Enroute);
        let ev = check_collision(&s, &world, &[], 0.3).unwrap();
        assert_eq!(ev.kind, CollisionKind::Terrain);
        assert!((ev.penetration_m - 0.5).abs() < 1e-12);

        // 0.2 m from an obstacle face with radius 0.3: obstacle contact.
        // Blocks obstacle at (100, 100) has half extents (5, 5, 10).
        let s = uav("a", 105.2, 100.0, -10.0, FlightPhase::Enroute);
        let ev = check_collision(&s, &world, &[], 0.3).unwrap();
        assert!(matches!(ev.kind, CollisionKind::Obstacle { .. }));
        assert!((ev.penetration_m - 0.1).abs() < 1e-12);

        // Free space, nearest object far away: no event.
        let s = uav("a", 50.0, 50.0, -30.0, FlightPhase::Enroute);
        assert!(check_collision(&s, &world, &[], 0.3).is_none());

        // UAV contact below 2 * body_radius.
        let other = uav("b", 50.0, 50.4, -30.0, FlightPhase::Enroute);
        let ev = check_collision(&s, &world, &[&other], 0.3).unwrap();
        assert_eq!(ev.kind, CollisionKind::UavContact { other_id: "b".to_string() });
        assert!((ev.penetration_m - 0.2).abs() < 1e-12);

        // Terrain wins over everything when both would fire.
        let s_under = uav("a", 50.0, 50.0, 0.5, FlightPhase::Enroute);
        let other_close = uav("b", 50.0, 50.1, 0.5, FlightPhase::Enroute);
        let ev = check_collision(&s_under, &world, &[&other_close], 0.3).unwrap();
        assert_eq!(ev.kind, CollisionKind::Terrain);
    }

    #[test]
    fn landing_checks() {
        let zones = vec![
            LandingZone::Circle { center_ned: [0.0, 0.0], radius_m: 5.0 },
            LandingZone::Polygon(Polygon2D::new(vec![[100.0, 100.0], [100.0, 110.0], [110.0, 110.0], [110.0, 100.0]]).unwrap()),
        ];
        let mut s = uav("a", 0.0, 0.0, 0.0, FlightPhase::Landed);
        assert!(check_landing(&s, &zones).unwrap());
        s.position = NedPosition::new(0.0, 5.0, 0.0);
        assert!(check_landing(&s, &zones).unwrap());
        s.position = NedPosition::new(105.0, 105.0, 0.0);
        assert!(check_landing(&s, &zones).unwrap());
        s.position = NedPosition::new(50.0,
            50.0, 0.0);
        assert!(!check_landing(&s, &zones).unwrap());

        s.phase = FlightPhase::Enroute;
        assert!(matches!(check_landing(&s, &zones), Err(MonitorError::NotLanded(_))));

        assert!((landing_zone_distance(&zones, 0.0, 8.0) - 3.0).abs() < 1e-12);
        assert_eq!(landing_zone_distance(&zones, 1.0, 1.0), 0.0);
    }

    fn deviation_prop(max_m: f64) -> SafetyProperty {
        SafetyProperty {
            id: "dev".to_string(),
            kind: PropertyKind::MaxPathDeviation { max_m, scope: Scope::All },
        }
    }

    /// Drives a bank over a synthetic single-UAV run where the east offset
    /// (= deviation from a north-running segment) follows `offsets`.
    fn run_deviation(offsets: &[f64], max_m: f64) -> Vec<ViolationRecord> {
        let ids = vec!["u1".to_string()];
        let mut bank = MonitorBank::new(&[deviation_prop(max_m)], &ids);
        let seg = (NedPosition::new(0.0, 0.0, -10.0), NedPosition::new(1000.0, 0.0, -10.0));
        let dt = 0.1;
        for (tick, &e) in offsets.iter().enumerate() {
            let t = (tick as f64 + 1.0) * dt;
            let states = vec![uav("u1", (tick as f64 + 1.0) * 2.0, e, -10.0, FlightPhase::Enroute)];
            let snap = TickSnapshot { time_s: t, states: &states, segments: &[seg], collisions: &[None] };
            bank.evaluate_tick(&snap);
        }
        let final_states = vec![uav("u1", 0.0, 0.0, -10.0, FlightPhase::Landed)];
        bank.finalize(offsets.len() as f64 * dt, &final_states)
    }

    #[test]
    fn episode_open_extend_close() {
        // Violating ticks 10..=20 (1-based) out of 30: exactly one record
        // spanning [10 dt, 20 dt] with the worst value inside.
        let mut offsets = vec![0.0; 30];
        for (i, off) in offsets.iter_mut().enumerate() {
            let tick = i + 1;
            if (10..=20).contains(&tick) {
                *off = if tick == 15 { 9.0 } else { 5.0 };
            }
        }
        let records = run_deviation(&offsets, 2.0);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert!((r.start_time_s - 1.0).abs() < 1e-12);
        assert!((r.end_time_s - 2.0).abs() < 1e-12);
        assert_eq!(r.worst_value, 9.0);
        assert_eq!(r.uav_ids, vec!["u1".to_string()]);
        assert_eq!(r.threshold, 2.0);
        // Worst position is where the 9 m sample happened.
        assert_eq!(r.position.east_m, 9.0);
    }

    #[test]
    fn disjoint_intervals_make_two_records() {
        let mut offsets = vec![0.0; 30];
        for (i, off) in offsets.iter_mut().enumerate() {
            let tick = i + 1;
            if (5..=8).contains(&tick) || (20..=22).contains(&tick) {
                *off = 4.0;
            }
        }
        let records = run_deviation(&offsets, 2.0);
        assert_eq!(records.len(), 2);
        assert!(records[0].start_time_s < records[1].start_time_s);
    }

    #[test]
    fn no_violation_no_records() {
        let records = run_deviation(&[0.0, 1.0, 1.5, 0.5], 2.0);
        assert!(records.is_empty());
    }

    #[test]
    fn open_episode_closes_at_run_end() {
        // Still violating at the last tick.
        let records = run_deviation(&[0.0, 5.0, 5.0], 2.0);
        assert_eq!(records.len(), 1);
        assert!((records[0].end_time_s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn separation_episode_tracks_pair_and_midpoint() {
        let prop = SafetyProperty {
            id: "sep".to_string(),
            kind: PropertyKind::MinSeparation { min_m: 5.0, scope: Scope::All },
        };
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut bank = MonitorBank::new(&[prop], &ids);
        let seg = (NedPosition::ZERO, NedPosition::ZERO);
        // Distances per tick: 6 (ok), 4, 2 (worst), 4.8, 7 (ok).
        for (tick, d) in [6.0, 4.0, 2.0, 4.8, 7.0].into_iter().enumerate() {
            let states = vec![
                uav("a", 0.0, 0.0, -10.0, FlightPhase::Enroute),
                uav("b", d, 0.0, -10.0, FlightPhase::Enroute),
            ];
            let snap = TickSnapshot {
                time_s: (tick as f64 + 1.0) * 0.1,
                states: &states,
                segments: &[seg, seg],
                collisions: &[None, None],
            };
            bank.evaluate_tick(&snap);
        }
        let final_states = vec![
            uav("a", 0.0, 0.0, -10.0, FlightPhase::Landed),
            uav("b", 7.0, 0.0, -10.0, FlightPhase::Landed),
        ];
        let records = bank.finalize(0.5, &final_states);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.uav_ids, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(r.worst_value, 2.0);
        assert!((r.start_time_s - 0.2).abs() < 1e-12);
        assert!((r.end_time_s - 0.4).abs() < 1e-12);
        // Midpoint of the 2 m closest pass.
        assert_eq!(r.position, NedPosition::new(1.0, 0.0, -10.0));
    }

    #[test]
    fn touchdown_inside_zone_is_silent_outside_is_reported() {
        let zones = vec![LandingZone::Circle { center_ned: [0.0, 0.0], radius_m: 5.0 }];
        let prop = SafetyProperty {
            id: "land".to_string(),
            kind: PropertyKind::SafeLanding { zones, scope: Scope::All },
        };
        let ids = vec!["a".to_string()];

        let mut bank = MonitorBank::new(&[prop.clone()], &ids);
        bank.record_touchdown(0, 12.0, NedPosition::new(1.0, 1.0, 0.0));
        let landed = vec![uav("a", 1.0, 1.0, 0.0, FlightPhase::Landed)];
        assert!(bank.finalize(20.0, &landed).is_empty());

        let mut bank = MonitorBank::new(&[prop], &ids);
        bank.record_touchdown(0, 12.0, NedPosition::new(8.0, 0.0, 0.0));
        let landed = vec![uav("a", 8.0, 0.0, 0.0, FlightPhase::Landed)];
        let records = bank.finalize(20.0, &landed);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].start_time_s, 12.0);
        assert_eq!(records[0].end_time_s, 12.0);
        assert!((records[0].worst_value - 3.0).abs() < 1e-12);
        assert_eq!(records[0].detail.as_deref(), Some("touchdown outside all landing zones"));
    }

    #[test]
    fn crashed_uav_reported_as_never_landed() {
        let zones = vec![LandingZone::Circle { center_ned: [0.0, 0.0], radius_m: 5.0 }];
        let prop = SafetyProperty {
            id: "land".to_string(),
            kind: PropertyKind::SafeLanding { zones, scope: Scope::All },
        };
        let ids = vec!["a".to_string()];
        let bank = MonitorBank::new(&[prop], &ids);
        let crashed = vec![uav("a", 30.0, 40.0, 0.0, FlightPhase::Crashed)];
        let records = bank.finalize(60.0, &crashed);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.detail.as_deref(), Some("never landed"));
        assert_eq!(r.start_time_s, 60.0);
        assert_eq!(r.end_time_s, 60.0);
        // Distance from (30, 40) to the circle edge: 50 - 5.
        assert!((r.worst_value - 45.0).abs() < 1e-12);
    }

    #[test]
    fn scope_filters_subjects() {
        let prop = SafetyProperty {
            id: "dev-b".to_string(),
            kind: PropertyKind::MaxPathDeviation { max_m: 1.0, scope: Scope::Ids(vec!["b".to_string()]) },
        };
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut bank = MonitorBank::new(&[prop], &ids);
        let seg = (NedPosition::new(0.0, 0.0, -10.0), NedPosition::new(100.0, 0.0, -10.0));
        // Both UAVs are 5 m off the segment; only b is in scope.
        let states = vec![
            uav("a", 10.0, 5.0, -10.0, FlightPhase::Enroute),
            uav("b", 10.0, 5.0, -10.0, FlightPhase::Enroute),
        ];
        let snap = TickSnapshot { time_s: 0.1, states: &states, segments: &[seg, seg], collisions: &[None, None] };
        bank.evaluate_tick(&snap);
        let final_states = vec![
            uav("a", 0.0, 0.0, 0.0, FlightPhase::Landed),
            uav("b", 0.0, 0.0, 0.0, FlightPhase::Landed),
        ];
        let records = bank.finalize(0.1, &final_states);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].uav_ids, vec!["b".to_string()]);
    }

    #[test]
    fn landing_phase_not_counted_as_deviation() {
        let ids = vec!["u1".to_string()];
        let mut bank = MonitorBank::new(&[deviation_prop(2.0)], &ids);
        let last = NedPosition::new(100.0, 0.0, -30.0);
        // Descending through 15 m below the last waypoint: far from the
        // degenerate segment but intentionally so.
        let states = vec![uav("u1", 100.0, 0.0, -15.0, FlightPhase::Landing)];
        let snap = TickSnapshot { time_s: 0.1, states: &states, segments: &[(last, last)], collisions: &[None] };
        bank.evaluate_tick(&snap);
        let final_states = vec![uav("u1", 100.0, 0.0, 0.0, FlightPhase::Landed)];
        assert!(bank.finalize(0.2, &final_states).is_empty());
    }

    #[test]
    fn scaling_by_k_scales_worst_values_exactly() {
        // Scale all geometry and thresholds by 2: same violating ticks,
        // worst values exactly doubled.
        let k = 2.0;
        let offsets = [0.0, 3.0, 5.0, 1.0, 4.0, 0.0];
        let base = run_deviation(&offsets, 2.0);
        let scaled_offsets: Vec<f64> = offsets.iter().map(|x| x * k).collect();
        let scaled = run_deviation(&scaled_offsets, 2.0 * k);
        assert_eq!(base.len(), scaled.len());
        for (b, s) in base.iter().zip(&scaled) {
            assert_eq!(b.start_time_s, s.start_time_s);
            assert_eq!(b.end_time_s, s.end_time_s);
            assert_eq!(s.worst_value, b.worst_value * k);
        }
    }

    #[test]
    fn property_serde_round_trip() {
        let props = vec![
            deviation_prop(10.0),
            SafetyProperty {
                id: "sep".to_string(),
                kind: PropertyKind::MinSeparation { min_m: 5.0, scope: Scope::Ids(vec!["a".into(), "b".into()]) },
            },
            SafetyProperty { id: "col".to_string(), kind: PropertyKind::NoCollision { scope: Scope::All } },
            SafetyProperty {
                id: "land".to_string(),
                kind: PropertyKind::SafeLanding {
                    zones: vec![
                        LandingZone::Circle { center_ned: [1.0, 2.0], radius_m: 5.0 },
                        LandingZone::Polygon(
                            Polygon2D::new(vec![[0.0, 0.0], [0.0, 5.0], [5.0, 5.0]]).unwrap(),
                        ),
                    ],
                    scope: Scope::All,
                },
            },
            SafetyProperty {
                id: "nfz".to_string(),
                kind: PropertyKind::NoFlyZone {
                    polygon: Polygon2D::new(vec![[0.0, 0.0], [0.0, 5.0], [5.0, 5.0]]).unwrap(),
                    band: AltitudeBand::new(0.0, Some(100.0)).unwrap(),
                    scope: Scope::All,
                },
            },
        ];
        for p in props {
            let text = serde_json::to_string(&p).unwrap();
            let back: SafetyProperty = serde_json::from_str(&text).unwrap();
            assert_eq!(p, back);
        }
        // The wire shape is flat: kind tag and fields at one level.
        let v: serde_json::Value = serde_json::to_value(deviation_prop(10.0)).unwrap();
        assert_eq!(v["kind"], "max_path_deviation");
        assert_eq!(v["max_m"], 10.0);
        assert_eq!(v["scope"], "all");
    }
}
