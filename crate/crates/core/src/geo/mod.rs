//! Great-circle radius filters and neighborhood polygons.

mod polygon;

pub use polygon::{winding_number, Neighborhood, NeighborhoodSet, Polygon};

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const DEFAULT_RADIUS_M: f64 = 450.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid coordinate lat={lat} lon={lon}")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("station {name}: radius must be positive, got {radius}")]
    InvalidRadius { name: String, radius: f64 },
    #[error("polygon {0} needs at least 3 distinct vertices")]
    TooFewVertices(String),
    #[error("polygon {0} has zero area")]
    ZeroArea(String),
    #[error("duplicate name {0}")]
    DuplicateName(String),
    #[error("geometry file: {0}")]
    Geometry(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
            Ok(Self { lat, lon })
        } else {
            Err(GeoError::InvalidPoint { lat, lon })
        }
    }

    /// Point reached by travelling `distance_m` along a great circle with
    /// initial bearing `bearing_deg` (clockwise from north).
    pub fn destination(self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        let (phi1, lambda1) = (self.lat.to_radians(), self.lon.to_radians());
        let theta = bearing_deg.to_radians();
        let delta = distance_m / EARTH_RADIUS_M;
        let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
        let lambda2 = lambda1 + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
        let lon = (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint { lat: phi2.to_degrees(), lon }
    }
}

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Anything with an optional WGS84 location.
pub trait Located {
    fn location(&self) -> Option<GeoPoint>;
}

impl Located for GeoPoint {
    fn location(&self) -> Option<GeoPoint> {
        Some(*self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationFilter {
    pub name: String,
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl StationFilter {
    pub fn new(name: impl Into<String>, center: GeoPoint, radius_m: f64) -> Result<Self, GeoError> {
        let name = name.into();
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(GeoError::InvalidRadius { name, radius: radius_m });
        }
        Ok(Self { name, center, radius_m })
    }

    /// Boundary inclusive.
    pub fn contains(&self, p: GeoPoint) -> bool {
        haversine_m(self.center, p) <= self.radius_m
    }
}

/// Records whose location lies within the filter's circle. Records without a
/// location are dropped.
pub fn within_radius<'a, T: Located>(records: &'a [T], filter: &StationFilter) -> Vec<&'a T> {
    records
        .iter()
        .filter(|r| r.location().is_some_and(|p| filter.contains(p)))
        .collect()
}

#[derive(Debug, Deserialize)]
struct StationRow {
    name: String,
    lat: f64,
    lon: f64,
    radius_m: Option<f64>,
}

/// Reads `name,lat,lon,radius_m` rows; an empty radius means 450 m.
pub fn read_stations<R: Read>(r: R) -> Result<Vec<StationFilter>, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
    let mut out: Vec<StationFilter> = Vec::new();
    for row in rdr.deserialize() {
        let row: StationRow = row?;
        if out.iter().any(|s| s.name == row.name) {
            return Err(GeoError::DuplicateName(row.name));
        }
        let center = GeoPoint::new(row.lat, row.lon)?;
        out.push(StationFilter::new(row.name, center, row.radius_m.unwrap_or(DEFAULT_RADIUS_M))?);
    }
    Ok(out)
}

pub fn load_stations(path: &Path) -> Result<Vec<StationFilter>, GeoError> {
    read_stations(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_degree_of_longitude_on_equator() {
        let d = haversine_m(GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(0.0, 1.0).unwrap());
        let exact = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M / 360.0;
        assert!((d - exact).abs() < 1e-6);
        assert!((d - 111_195.0).abs() < 1.0);
    }

    #[test]
    fn destination_round_trips() {
        let c = GeoPoint::new(34.01405, -118.49134).unwrap();
        for bearing in [0.0, 45.0, 90.0, 200.0, 333.0] {
            for dist in [1.0, 449.0, 451.0, 5_000.0] {
                let p = c.destination(bearing, dist);
                assert!((haversine_m(c, p) - dist).abs() < 1e-6, "{bearing} {dist}");
            }
        }
    }

    #[test]
    fn radius_boundary() {
        let c = GeoPoint::new(34.0, -118.5).unwrap();
        let f = StationFilter::new("s", c, 450.0).unwrap();
        let pts = [c, c.destination(0.0, 451.0), c.destination(90.0, 449.9)];
        let kept = within_radius(&pts, &f);
        assert_eq!(kept.len(), 2);
        assert!(f.contains(c));
        assert!(!f.contains(c.destination(0.0, 451.0)));
        assert!(StationFilter::new("bad", c, 0.0).is_err());
    }

    #[test]
    fn invalid_points() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn station_csv() {
        let text = "name,lat,lon,radius_m\n# comment\nA,34.0,-118.5,450\nB,34.1,-118.4,\n";
        let s = read_stations(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].radius_m, 450.0);
        let dup = "name,lat,lon,radius_m\nA,34.0,-118.5,450\nA,34.1,-118.4,300\n";
        assert!(matches!(read_stations(dup.as_bytes()), Err(GeoError::DuplicateName(_))));
    }
}
