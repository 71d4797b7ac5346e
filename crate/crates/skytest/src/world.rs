//! Environment model: terrain heightmap, static box obstacles, wind field,
//! the map registry, and the 2D geometry shared by zone checks.
//!
//! One map is built in: `"blocks"`, a flat 1 km x 1 km court with a regular
//! grid of box obstacles, intended as a lightweight default for tests and
//! benchmarks. Anything else is loaded from a JSON map file; the format is
//! documented in `FORMATS.md` and exercised by `examples/custom_map.rs`.

use crate::diag::Issue;
use crate::geodesy::{wrap_deg_360, FrameOrigin, GeodeticCoord, GeodesyError, NedPosition, NedVelocity};
use crate::jsonx::{self, Cx, ObjReader};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown map '{0}': not a built-in map name or a readable file")]
    UnknownMap(String),
    #[error("failed to read map file '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid map '{path}':\n{}", format_issues(.issues))]
    Parse { path: String, issues: Vec<Issue> },
    #[error("terrain query ({north_m:.1}, {east_m:.1}) is outside the heightmap extent")]
    OutOfBounds { north_m: f64, east_m: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error(transparent)]
    Frame(#[from] GeodesyError),
}

fn format_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

/// Axis-aligned horizontal extent of a map, meters in the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds2D {
    pub min_north_m: f64,
    pub max_north_m: f64,
    pub min_east_m: f64,
    pub max_east_m: f64,
}

impl Bounds2D {
    pub fn contains(&self, north_m: f64, east_m: f64) -> bool {
        north_m >= self.min_north_m
            && north_m <= self.max_north_m
            && east_m >= self.min_east_m
            && east_m <= self.max_east_m
    }
}

/// Regular elevation grid, row-major with rows advancing north and columns
/// advancing east from the anchor corner. Elevations are meters above the
/// frame origin's ground level (a sample of `h` puts the surface at
/// `down = -h`).
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    origin_north_m: f64,
    origin_east_m: f64,
    cell_size_m: f64,
    rows: usize,
    cols: usize,
    samples: Vec<f64>,
}

impl Heightmap {
    pub fn new(
        origin_north_m: f64,
        origin_east_m: f64,
        cell_size_m: f64,
        rows: usize,
        cols: usize,
        samples: Vec<f64>,
    ) -> Result<Self, WorldError> {
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(WorldError::InvalidGeometry(format!("heightmap cell size must be > 0, got {cell_size_m}")));
        }
        if rows < 2 || cols < 2 {
            return Err(WorldError::InvalidGeometry(format!(
                "heightmap needs at least a 2x2 grid for interpolation, got {rows}x{cols}"
            )));
        }
        if samples.len() != rows * cols {
            return Err(WorldError::InvalidGeometry(format!(
                "heightmap declares {rows}x{cols} = {} samples but carries {}",
                rows * cols,
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(WorldError::InvalidGeometry(format!("heightmap sample {i} is not finite")));
        }
        if !(origin_north_m.is_finite() && origin_east_m.is_finite()) {
            return Err(WorldError::InvalidGeometry("heightmap anchor is not finite".into()));
        }
        Ok(Heightmap { origin_north_m, origin_east_m, cell_size_m, rows, cols, samples })
    }

    /// A uniform-elevation grid covering `bounds` exactly with a 2x2 grid.
    pub fn flat(bounds: &Bounds2D, elevation_m: f64) -> Self {
        let cell_n = bounds.max_north_m - bounds.min_north_m;
        let cell_e = bounds.max_east_m - bounds.min_east_m;
        Heightmap::new(
            bounds.min_north_m,
            bounds.min_east_m,
            cell_n.max(cell_e),
            2,
            2,
            vec![elevation_m; 4],
        )
        .expect("flat grid parameters are valid by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Inclusive (min, max) north coordinates covered by the grid.
    pub fn north_extent(&self) -> (f64, f64) {
        (self.origin_north_m, self.origin_north_m + (self.rows - 1) as f64 * self.cell_size_m)
    }

    pub fn east_extent(&self) -> (f64, f64) {
        (self.origin_east_m, self.origin_east_m + (self.cols - 1) as f64 * self.cell_size_m)
    }

    /// Bilinear interpolation of the four surrounding samples. At a grid node
    /// the interpolation weights collapse and the stored sample is returned
    /// exactly; between nodes the result is bounded by the cell's corner
    /// values.
    pub fn elevation_at(&self, north_m: f64, east_m: f64) -> Result<f64, WorldError> {
        let u = (north_m - self.origin_north_m) / self.cell_size_m;
        let v = (east_m - self.origin_east_m) / self.cell_size_m;
        if u < 0.0 || v < 0.0 || u > (self.rows - 1) as f64 || v > (self.cols - 1) as f64 {
            return Err(WorldError::OutOfBounds { north_m, east_m });
        }
        Ok(self.interpolate(u, v))
    }

    /// Like [`Heightmap::elevation_at`] but queries outside the extent clamp
    /// to the nearest edge. Collision checks use this so a vehicle that
    /// wanders off the grid still sees plausible terrain.
    pub fn elevation_clamped(&self, north_m: f64, east_m: f64) -> f64 {
        let u = ((north_m - self.origin_north_m) / self.cell_size_m).clamp(0.0, (self.rows - 1) as f64);
        let v = ((east_m - self.origin_east_m) / self.cell_size_m).clamp(0.0, (self.cols - 1) as f64);
        self.interpolate(u, v)
    }

    fn interpolate(&self, u: f64, v: f64) -> f64 {
        let i0 = (u.floor() as usize).min(self.rows - 2);
        let j0 = (v.floor() as usize).min(self.cols - 2);
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let s = |i: usize, j: usize| self.samples[i * self.cols + j];
        s(i0, j0) * (1.0 - fu) * (1.0 - fv)
            + s(i0 + 1, j0) * fu * (1.0 - fv)
            + s(i0, j0 + 1) * (1.0 - fu) * fv
            + s(i0 + 1, j0 + 1) * fu * fv
    }
}

/// An axis-aligned box obstacle. `half_extents` are the half widths along
/// north, east, and down, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub center: NedPosition,
    pub half_extents: [f64; 3],
}

impl ObstacleBox {
    pub fn new(center: NedPosition, half_extents: [f64; 3]) -> Result<Self, WorldError> {
        if !center.is_finite() {
            return Err(WorldError::InvalidGeometry("obstacle center is not finite".into()));
        }
        for (axis, he) in ["north", "east", "down"].iter().zip(half_extents) {
            if !(he.is_finite() && he > 0.0) {
                return Err(WorldError::InvalidGeometry(format!(
                    "obstacle half extent along {axis} must be > 0, got {he}"
                )));
            }
        }
        Ok(ObstacleBox { center, half_extents })
    }

    /// Euclidean distance from a point to the box surface; 0 inside.
    pub fn distance_to_point(&self, p: &NedPosition) -> f64 {
        let dn = ((p.north_m - self.center.north_m).abs() - self.half_extents[0]).max(0.0);
        let de = ((p.east_m - self.center.east_m).abs() - self.half_extents[1]).max(0.0);
        let dd = ((p.down_m - self.center.down_m).abs() - self.half_extents[2]).max(0.0);
        (dn * dn + de * de + dd * dd).sqrt()
    }

    pub fn contains(&self, p: &NedPosition) -> bool {
        (p.north_m - self.center.north_m).abs() <= self.half_extents[0]
            && (p.east_m - self.center.east_m).abs() <= self.half_extents[1]
            && (p.down_m - self.center.down_m).abs() <= self.half_extents[2]
    }
}

/// Steady wind plus an optional sinusoidal gust, both along a fixed bearing.
///
/// `direction_deg` is the direction **toward which** the air moves, degrees
/// clockwise from north (so 90 pushes a hovering vehicle east). This is the
/// opposite of the meteorological "wind from" convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindField {
    pub direction_deg: f64,
    pub speed_mps: f64,
    pub gust_amplitude_mps: f64,
    pub gust_period_s: f64,
}

impl Default for WindField {
    fn default() -> Self {
        WindField { direction_deg: 0.0, speed_mps: 0.0, gust_amplitude_mps: 0.0, gust_period_s: 10.0 }
    }
}

impl WindField {
    pub fn new(
        direction_deg: f64,
        speed_mps: f64,
        gust_amplitude_mps: f64,
        gust_period_s: f64,
    ) -> Result<Self, WorldError> {
        if !(direction_deg.is_finite() && speed_mps.is_finite() && gust_amplitude_mps.is_finite() && gust_period_s.is_finite()) {
            return Err(WorldError::InvalidGeometry("wind parameters must be finite".into()));
        }
        if speed_mps < 0.0 {
            return Err(WorldError::InvalidGeometry(format!("wind speed must be >= 0, got {speed_mps}")));
        }
        if gust_amplitude_mps < 0.0 {
            return Err(WorldError::InvalidGeometry(format!(
                "gust amplitude must be >= 0, got {gust_amplitude_mps}"
            )));
        }
        if gust_amplitude_mps > 0.0 && gust_period_s <= 0.0 {
            return Err(WorldError::InvalidGeometry(format!(
                "gust period must be > 0 when gusting, got {gust_period_s}"
            )));
        }
        Ok(WindField {
            direction_deg: wrap_deg_360(direction_deg),
            speed_mps,
            gust_amplitude_mps,
            gust_period_s,
        })
    }

    pub fn calm() -> Self {
        WindField::default()
    }

    /// Wind velocity at simulation time `t`. The gust modulates the magnitude
    /// along the same bearing; the down component is always zero.
    pub fn wind_at(&self, t_s: f64) -> NedVelocity {
        let mut magnitude = self.speed_mps;
        if self.gust_amplitude_mps > 0.0 {
            magnitude += self.gust_amplitude_mps * (2.0 * std::f64::consts::PI * t_s / self.gust_period_s).sin();
        }
        if magnitude == 0.0 {
            return NedVelocity::ZERO;
        }
        let theta = self.direction_deg.to_radians();
        NedVelocity::new(magnitude * theta.cos(), magnitude * theta.sin(), 0.0)
    }
}

/// A simple (non-self-intersecting) polygon in the horizontal plane.
/// Vertices are `[north_m, east_m]` pairs in order, either winding.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

/// Points within this distance of an edge count as inside: conservative for
/// no-fly checks, and it pins down the otherwise ambiguous boundary case.
pub const BOUNDARY_EPSILON_M: f64 = 1e-9;

impl Polygon2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self, WorldError> {
        if vertices.len() < 3 {
            return Err(WorldError::InvalidGeometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(WorldError::InvalidGeometry("polygon vertex is not finite".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(WorldError::InvalidGeometry(format!("polygon has a zero-length edge at vertex {i}")));
            }
        }
        // Shoelace area; zero means the vertices are collinear.
        let mut area2 = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            area2 += vertices[i][0] * vertices[j][1] - vertices[j][0] * vertices[i][1];
        }
        if area2.abs() < 1e-9 {
            return Err(WorldError::InvalidGeometry("polygon has zero area".into()));
        }
        // Simplicity: no two non-adjacent edges may touch. O(n^2) is fine for
        // the handful of vertices zones use.
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
                let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
                if segments_touch(a1, a2, b1, b2) {
                    return Err(WorldError::InvalidGeometry(format!(
                        "polygon is self-intersecting: edge {i} crosses edge {j}"
                    )));
                }
            }
        }
        Ok(Polygon2D { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Even-odd ray-casting containment, with points on the boundary counted
    /// as inside.
    pub fn contains(&self, north_m: f64, east_m: f64) -> bool {
        if self.boundary_distance(north_m, east_m) <= BOUNDARY_EPSILON_M {
            return true;
        }
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            // Cast the ray in the +east direction; count edges that straddle
            // the query's north coordinate and cross east of it.
            if (a[0] > north_m) != (b[0] > north_m) {
                let east_crossing = a[1] + (north_m - a[0]) * (b[1] - a[1]) / (b[0] - a[0]);
                if east_m < east_crossing {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from a point to the nearest polygon edge (not signed).
    pub fn boundary_distance(&self, north_m: f64, east_m: f64) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let d = point_segment_distance([north_m, east_m], self.vertices[i], self.vertices[(i + 1) % n]);
            if d < best {
                best = d;
            }
        }
        best
    }

    /// How far inside the polygon a point is: its boundary distance if
    /// contained, otherwise 0.
    pub fn incursion_depth(&self, north_m: f64, east_m: f64) -> f64 {
        if self.contains(north_m, east_m) {
            self.boundary_distance(north_m, east_m)
        } else {
            0.0
        }
    }
}

impl Serialize for Polygon2D {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.vertices.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polygon2D {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let vertices = Vec::<[f64; 2]>::deserialize(deserializer)?;
        Polygon2D::new(vertices).map_err(D::Error::custom)
    }
}

/// Containment predicate on a polygon; boundary points count as inside.
pub fn point_in_polygon(poly: &Polygon2D, north_m: f64, east_m: f64) -> bool {
    poly.contains(north_m, east_m)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// True when segments ab and cd share any point, including endpoints.
fn segments_touch(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) };
    let closest = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - closest[0]).hypot(p[1] - closest[1])
}

/// A vertical slab of airspace, in meters of altitude above the frame
/// origin's ground level (`altitude = -down`). `ceiling_m: None` means
/// unbounded above. Both limits are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltitudeBand {
    pub floor_m: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ceiling_m: Option<f64>,
}

impl AltitudeBand {
    pub fn new(floor_m: f64, ceiling_m: Option<f64>) -> Result<Self, WorldError> {
        if !floor_m.is_finite() {
            return Err(WorldError::InvalidGeometry("altitude band floor must be finite".into()));
        }
        if let Some(c) = ceiling_m {
            if !c.is_finite() {
                return Err(WorldError::InvalidGeometry("altitude band ceiling must be finite".into()));
            }
            if floor_m >= c {
                return Err(WorldError::InvalidGeometry(format!(
                    "altitude band floor {floor_m} must be below ceiling {c}"
                )));
            }
        }
        Ok(AltitudeBand { floor_m, ceiling_m })
    }

    /// Everything at or above ground level.
    pub fn above_ground() -> Self {
        AltitudeBand { floor_m: 0.0, ceiling_m: None }
    }

    pub fn contains(&self, altitude_m: f64) -> bool {
        altitude_m >= self.floor_m && self.ceiling_m.is_none_or(|c| altitude_m <= c)
    }
}

/// An immutable environment: frame, terrain, obstacles, and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub name: String,
    pub frame: FrameOrigin,
    pub heightmap: Heightmap,
    pub obstacles: Vec<ObstacleBox>,
    pub bounds: Bounds2D,
}

/// The built-in map name.
pub const BLOCKS_MAP: &str = "blocks";

/// Geodetic anchor of the built-in blocks map.
pub const BLOCKS_ORIGIN: GeodeticCoord = GeodeticCoord { lat_deg: 38.0, lon_deg: -90.0, alt_m: 150.0 };

impl WorldModel {
    /// The built-in map: flat terrain at 0 m elevation, bounds of +-500 m,
    /// and a 5x5 lattice of 10 m x 10 m x 20 m tall boxes at 100 m spacing
    /// centered on the origin, with the center cell left open as a court.
    pub fn blocks() -> Self {
        let bounds = Bounds2D { min_north_m: -500.0, max_north_m: 500.0, min_east_m: -500.0, max_east_m: 500.0 };
        let mut obstacles = Vec::with_capacity(24);
        for ni in -2i32..=2 {
            for ei in -2i32..=2 {
                if ni == 0 && ei == 0 {
                    continue;
                }
                let center = NedPosition::new(f64::from(ni) * 100.0, f64::from(ei) * 100.0, -10.0);
                obstacles.push(ObstacleBox::new(center, [5.0, 5.0, 10.0]).expect("static layout is valid"));
            }
        }
        WorldModel {
            name: BLOCKS_MAP.to_string(),
            frame: FrameOrigin::new(BLOCKS_ORIGIN).expect("blocks origin is not polar"),
            heightmap: Heightmap::flat(&bounds, 0.0),
            obstacles,
            bounds,
        }
    }

    /// Resolves a map reference: the built-in name or a map file path.
    pub fn load(reference: &str) -> Result<Self, WorldError> {
        if reference == BLOCKS_MAP {
            return Ok(WorldModel::blocks());
        }
        let path = Path::new(reference);
        if !path.is_file() {
            return Err(WorldError::UnknownMap(reference.to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: reference.to_string(),
            source,
        })?;
        WorldModel::from_json_str(&text).map_err(|e| match e {
            WorldError::Parse { issues, .. } => WorldError::Parse { path: reference.to_string(), issues },
            other => other,
        })
    }

    /// Parses and validates a map document. All problems are reported
    /// together in [`WorldError::Parse`].
    pub fn from_json_str(text: &str) -> Result<Self, WorldError> {
        let mut cx = Cx::new();
        let doc = jsonx::parse_document(&mut cx, text);
        let mut root = ObjReader::new(&mut cx, doc.as_ref(), "");

        let name = root.str_req(&mut cx, "name").unwrap_or_default();
        if name.is_empty() && cx.errors.is_empty() {
            cx.err("name", "map name must be non-empty");
        }

        let mut origin_r = ObjReader::required(&mut cx, root.opt("origin"), "origin");
        let lat = origin_r.f64_req(&mut cx, "lat");
        let lon = origin_r.f64_req(&mut cx, "lon");
        let alt = origin_r.f64_req(&mut cx, "alt");
        origin_r.deny_unknown(&mut cx);
        let frame = match (lat, lon, alt) {
            (Some(lat), Some(lon), Some(alt)) => match GeodeticCoord::new(lat, lon, alt).and_then(FrameOrigin::new) {
                Ok(f) => Some(f),
                Err(e) => {
                    cx.err("origin", e.to_string());
                    None
                }
            },
            _ => None,
        };

        let mut bounds_r = ObjReader::required(&mut cx, root.opt("bounds"), "bounds");
        let min_n = bounds_r.f64_req(&mut cx, "min_north_m");
        let max_n = bounds_r.f64_req(&mut cx, "max_north_m");
        let min_e = bounds_r.f64_req(&mut cx, "min_east_m");
        let max_e = bounds_r.f64_req(&mut cx, "max_east_m");
        bounds_r.deny_unknown(&mut cx);
        let bounds = match (min_n, max_n, min_e, max_e) {
            (Some(min_north_m), Some(max_north_m), Some(min_east_m), Some(max_east_m)) => {
                if min_north_m >= max_north_m || min_east_m >= max_east_m {
                    cx.err("bounds", "min must be strictly below max on both axes");
                    None
                } else {
                    Some(Bounds2D { min_north_m, max_north_m, min_east_m, max_east_m })
                }
            }
            _ => None,
        };

        let mut hm_r = ObjReader::required(&mut cx, root.opt("heightmap"), "heightmap");
        let cell = hm_r.f64_req(&mut cx, "cell_size_m");
        let rows = hm_r.usize_req(&mut cx, "rows");
        let cols = hm_r.usize_req(&mut cx, "cols");
        let samples = hm_r.arr_req(&mut cx, "samples").map(|arr| {
            let path = hm_r.child_path("samples");
            arr.iter()
                .enumerate()
                .filter_map(|(i, v)| jsonx::f64_at(&mut cx, v, &jsonx::idx_path(&path, i)))
                .collect::<Vec<f64>>()
        });
        hm_r.deny_unknown(&mut cx);
        let heightmap = match (cell, rows, cols, samples, bounds) {
            (Some(cell), Some(rows), Some(cols), Some(samples), Some(b)) => {
                match Heightmap::new(b.min_north_m, b.min_east_m, cell, rows, cols, samples) {
                    Ok(hm) => {
                        let (_, max_n) = hm.north_extent();
                        let (_, max_e) = hm.east_extent();
                        if max_n < b.max_north_m || max_e < b.max_east_m {
                            cx.err(
                                "heightmap",
                                format!(
                                    "grid covers {:.1} m north x {:.1} m east from the bounds corner but the bounds require {:.1} x {:.1}",
                                    max_n - b.min_north_m,
                                    max_e - b.min_east_m,
                                    b.max_north_m - b.min_north_m,
                                    b.max_east_m - b.min_east_m
                                ),
                            );
                            None
                        } else {
                            Some(hm)
                        }
                    }
                    Err(e) => {
                        cx.err("heightmap", e.to_string());
                        None
                    }
                }
            }
            _ => None,
        };

        let mut obstacles = Vec::new();
        if let Some(arr) = root.arr_opt(&mut cx, "obstacles") {
            for (i, item) in arr.iter().enumerate() {
                let path = jsonx::idx_path("obstacles", i);
                let mut ob = ObjReader::new(&mut cx, Some(item), path.clone());
                let center = ob
                    .req(&mut cx, "center_ned")
                    .and_then(|v| jsonx::f64_tuple::<3>(&mut cx, v, &ob.child_path("center_ned")));
                let he = ob
                    .req(&mut cx, "half_extents")
                    .and_then(|v| jsonx::f64_tuple::<3>(&mut cx, v, &ob.child_path("half_extents")));
                ob.deny_unknown(&mut cx);
                if let (Some(c), Some(he)) = (center, he) {
                    match ObstacleBox::new(NedPosition::new(c[0], c[1], c[2]), he) {
                        Ok(b) => obstacles.push(b),
                        Err(e) => cx.err(path, e.to_string()),
                    }
                }
            }
        }
        if let Some(b) = bounds {
            for (i, ob) in obstacles.iter().enumerate() {
                let inside = b.contains(ob.center.north_m - ob.half_extents[0], ob.center.east_m - ob.half_extents[1])
                    && b.contains(ob.center.north_m + ob.half_extents[0], ob.center.east_m + ob.half_extents[1]);
                if !inside {
                    cx.err(jsonx::idx_path("obstacles", i), "obstacle extends outside the map bounds");
                }
            }
        }

        root.deny_unknown(&mut cx);
        let (frame, heightmap, bounds) = match (frame, heightmap, bounds) {
            (Some(f), Some(h), Some(b)) if cx.errors.is_empty() => (f, h, b),
            _ => {
                return Err(WorldError::Parse { path: "<string>".to_string(), issues: cx.errors });
            }
        };
        cx.finish(WorldModel { name, frame, heightmap, obstacles, bounds })
            .map_err(|issues| WorldError::Parse { path: "<string>".to_string(), issues })
    }

    /// Serializes to the map file format, the inverse of
    /// [`WorldModel::from_json_str`].
    pub fn to_json_string(&self) -> String {
        let origin = self.frame.origin();
        let obstacles: Vec<serde_json::Value> = self
            .obstacles
            .iter()
            .map(|o| {
                serde_json::json!({
                    "center_ned": [o.center.north_m, o.center.east_m, o.center.down_m],
                    "half_extents": o.half_extents,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "name": self.name,
            "origin": {"lat": origin.lat_deg, "lon": origin.lon_deg, "alt": origin.alt_m},
            "bounds": {
                "min_north_m": self.bounds.min_north_m,
                "max_north_m": self.bounds.max_north_m,
                "min_east_m": self.bounds.min_east_m,
                "max_east_m": self.bounds.max_east_m,
            },
            "heightmap": {
                "cell_size_m": self.heightmap.cell_size_m(),
                "rows": self.heightmap.rows(),
                "cols": self.heightmap.cols(),
                "samples": self.heightmap.samples(),
            },
            "obstacles": obstacles,
        });
        serde_json::to_string_pretty(&doc).expect("map document serializes")
    }

    /// Rebases the map on a different geodetic origin, keeping the local
    /// geometry unchanged. Used by scenarios that override the map origin.
    pub fn with_origin(mut self, origin: GeodeticCoord) -> Result<Self, GeodesyError> {
        self.frame = FrameOrigin::new(origin)?;
        Ok(self)
    }

    /// Terrain elevation above origin ground level, erroring outside the
    /// heightmap extent.
    pub fn terrain_elevation(&self, north_m: f64, east_m: f64) -> Result<f64, WorldError> {
        self.heightmap.elevation_at(north_m, east_m)
    }

    /// Terrain elevation with out-of-extent queries clamped to the edge.
    pub fn terrain_elevation_clamped(&self, north_m: f64, east_m: f64) -> f64 {
        self.heightmap.elevation_clamped(north_m, east_m)
    }

    /// Altitude of a point above the local terrain surface.
    pub fn altitude_above_terrain(&self, p: &NedPosition) -> f64 {
        -p.down_m - self.terrain_elevation_clamped(p.north_m, p.east_m)
    }
}

impl fmt::Display for WorldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "map '{}': {}x{} grid at {} m cells, {} obstacles, bounds [{}, {}] x [{}, {}] m",
            self.name,
            self.heightmap.rows(),
            self.heightmap.cols(),
            self.heightmap.cell_size_m(),
            self.obstacles.len(),
            self.bounds.min_north_m,
            self.bounds.max_north_m,
            self.bounds.min_east_m,
            self.bounds.max_east_m,
        )
    }
}
