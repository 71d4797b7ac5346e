//! WGS-84 geodetic coordinates and the local NED tangent frame.
//!
//! Simulation runs in a local north-east-down frame anchored at a geodetic
//! origin. The mapping between frames is the flat-earth small-angle
//! approximation: per-degree scale factors are computed once from the WGS-84
//! meridional and prime-vertical radii of curvature at the origin latitude
//! and then treated as constants. That keeps the transform exactly invertible
//! and is accurate to well under a meter over the 50 km envelope the frame
//! accepts.
//!
//! Conventions used throughout the crate:
//! * NED axes: north, east, down. Down is positive toward the ground, so a
//!   vehicle 30 m above the origin altitude has `down_m == -30.0`.
//! * Longitudes normalize to `[-180, 180)`; headings wrap to `[0, 360)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// WGS-84 semi-major axis, meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257223563;

/// Horizontal envelope of the flat-earth frame, meters from the origin.
pub const MAX_FRAME_RADIUS_M: f64 = 50_000.0;

/// Frame origins this close to a pole are rejected: the longitude scale
/// collapses and the flat-earth mapping stops being meaningful.
pub const POLAR_LATITUDE_LIMIT_DEG: f64 = 89.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("latitude {0} deg is outside [-90, 90]")]
    LatitudeRange(f64),
    #[error("coordinate component is not finite")]
    NonFinite,
    #[error("frame origin latitude {0} deg is within {POLAR_LATITUDE_LIMIT_DEG} deg of a pole")]
    PolarOrigin(f64),
    #[error("point lies {0:.1} m from the frame origin, beyond the {MAX_FRAME_RADIUS_M:.0} m flat-earth envelope")]
    OutOfFrame(f64),
}

/// Wraps an angle in degrees to `[0, 360)`.
pub fn wrap_deg_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can return 360.0 when deg is a tiny negative number.
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Normalizes a longitude in degrees to `[-180, 180)`.
pub fn normalize_lon_deg(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

/// A WGS-84 geodetic position. Altitude is meters above the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticCoord {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl GeodeticCoord {
    /// Validates latitude and finiteness; normalizes longitude to `[-180, 180)`.
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self, GeodesyError> {
        if !lat_deg.is_finite() || !lon_deg.is_finite() || !alt_m.is_finite() {
            return Err(GeodesyError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeodesyError::LatitudeRange(lat_deg));
        }
        Ok(GeodeticCoord { lat_deg, lon_deg: normalize_lon_deg(lon_deg), alt_m })
    }
}

/// A position in the local NED frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NedPosition {
    pub north_m: f64,
    pub east_m: f64,
    pub down_m: f64,
}

impl NedPosition {
    pub const ZERO: NedPosition = NedPosition { north_m: 0.0, east_m: 0.0, down_m: 0.0 };

    pub fn new(north_m: f64, east_m: f64, down_m: f64) -> Self {
        NedPosition { north_m, east_m, down_m }
    }

    pub fn distance_to(&self, other: &NedPosition) -> f64 {
        let dn = self.north_m - other.north_m;
        let de = self.east_m - other.east_m;
        let dd = self.down_m - other.down_m;
        (dn * dn + de * de + dd * dd).sqrt()
    }

    pub fn horizontal_distance_to(&self, other: &NedPosition) -> f64 {
        let dn = self.north_m - other.north_m;
        let de = self.east_m - other.east_m;
        dn.hypot(de)
    }

    /// Position after moving at `v` for `dt` seconds.
    pub fn offset(&self, v: NedVelocity, dt: f64) -> NedPosition {
        NedPosition {
            north_m: self.north_m + v.north_mps * dt,
            east_m: self.east_m + v.east_mps * dt,
            down_m: self.down_m + v.down_mps * dt,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.north_m.is_finite() && self.east_m.is_finite() && self.down_m.is_finite()
    }
}

/// A velocity in the local NED frame, meters per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NedVelocity {
    pub north_mps: f64,
    pub east_mps: f64,
    pub down_mps: f64,
}

impl NedVelocity {
    pub const ZERO: NedVelocity = NedVelocity { north_mps: 0.0, east_mps: 0.0, down_mps: 0.0 };

    pub fn new(north_mps: f64, east_mps: f64, down_mps: f64) -> Self {
        NedVelocity { north_mps, east_mps, down_mps }
    }

    pub fn magnitude(&self) -> f64 {
        (self.north_mps * self.north_mps + self.east_mps * self.east_mps + self.down_mps * self.down_mps).sqrt()
    }

    pub fn horizontal_magnitude(&self) -> f64 {
        self.north_mps.hypot(self.east_mps)
    }

    pub fn scaled(&self, k: f64) -> NedVelocity {
        NedVelocity::new(self.north_mps * k, self.east_mps * k, self.down_mps * k)
    }

    pub fn plus(&self, other: NedVelocity) -> NedVelocity {
        NedVelocity::new(
            self.north_mps + other.north_mps,
            self.east_mps + other.east_mps,
            self.down_mps + other.down_mps,
        )
    }
}

/// A local tangent frame anchored at a geodetic origin, with the per-degree
/// scale factors frozen at construction.
///
/// The latitude scale comes from the meridional radius of curvature M, the
/// longitude scale from the prime-vertical radius N times cos(lat):
///
/// ```text
/// lat_scale = M(lat) * pi/180      M = a(1-e^2) / (1 - e^2 sin^2 lat)^(3/2)
/// lon_scale = N(lat) * cos(lat) * pi/180      N = a / sqrt(1 - e^2 sin^2 lat)
/// ```
///
/// Note that near the equator the longitude scale *exceeds* the latitude
/// scale (111319 vs 110574 m/deg at 0 deg); they cross at roughly 6.6 deg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOrigin {
    origin: GeodeticCoord,
    lat_scale_m_per_deg: f64,
    lon_scale_m_per_deg: f64,
}

impl FrameOrigin {
    pub fn new(origin: GeodeticCoord) -> Result<Self, GeodesyError> {
        if origin.lat_deg.abs() >= POLAR_LATITUDE_LIMIT_DEG {
            return Err(GeodesyError::PolarOrigin(origin.lat_deg));
        }
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let lat_rad = origin.lat_deg.to_radians();
        let sin_lat = lat_rad.sin();
        let w2 = 1.0 - e2 * sin_lat * sin_lat;
        let meridional = WGS84_A * (1.0 - e2) / (w2 * w2.sqrt());
        let prime_vertical = WGS84_A / w2.sqrt();
        let deg = std::f64::consts::PI / 180.0;
        Ok(FrameOrigin {
            origin,
            lat_scale_m_per_deg: meridional * deg,
            lon_scale_m_per_deg: prime_vertical * lat_rad.cos() * deg,
        })
    }

    pub fn origin(&self) -> GeodeticCoord {
        self.origin
    }

    /// Meters of north displacement per degree of latitude at the origin.
    pub fn lat_scale_m_per_deg(&self) -> f64 {
        self.lat_scale_m_per_deg
    }

    /// Meters of east displacement per degree of longitude at the origin.
    pub fn lon_scale_m_per_deg(&self) -> f64 {
        self.lon_scale_m_per_deg
    }

    /// Geodetic to local NED. Errors if the point is farther than
    /// [`MAX_FRAME_RADIUS_M`] horizontally from the origin.
    pub fn geodetic_to_ned(&self, p: GeodeticCoord) -> Result<NedPosition, GeodesyError> {
        let north_m = (p.lat_deg - self.origin.lat_deg) * self.lat_scale_m_per_deg;
        // Longitude differences wrap so a frame near the antimeridian behaves.
        let dlon = normalize_lon_deg(p.lon_deg - self.origin.lon_deg);
        let east_m = dlon * self.lon_scale_m_per_deg;
        let horizontal = north_m.hypot(east_m);
        if horizontal > MAX_FRAME_RADIUS_M {
            return Err(GeodesyError::OutOfFrame(horizontal));
        }
        Ok(NedPosition { north_m, east_m, down_m: self.origin.alt_m - p.alt_m })
    }

    /// Local NED back to geodetic. The algebraic inverse of
    /// [`FrameOrigin::geodetic_to_ned`]; no envelope check is applied so the
    /// round trip is exact for any finite input, but a position that maps to
    /// an impossible latitude is rejected.
    pub fn ned_to_geodetic(&self, p: NedPosition) -> Result<GeodeticCoord, GeodesyError> {
        if !p.is_finite() {
            return Err(GeodesyError::NonFinite);
        }
        GeodeticCoord::new(
            self.origin.lat_deg + p.north_m / self.lat_scale_m_per_deg,
            self.origin.lon_deg + p.east_m / self.lon_scale_m_per_deg,
            self.origin.alt_m - p.down_m,
        )
    }
}
