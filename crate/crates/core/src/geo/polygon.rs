//! Simple polygons in the lon/lat plane and GeoJSON loading.

use std::path::Path;

use serde_json::Value;

use super::{GeoError, GeoPoint, Located};

/// Implicitly closed ring of vertices; the first vertex is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<GeoPoint>,
}

impl Polygon {
    pub fn new(name: &str, mut vertices: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeoError::TooFewVertices(name.to_string()));
        }
        let p = Self { vertices };
        if p.signed_area() == 0.0 {
            return Err(GeoError::ZeroArea(name.to_string()));
        }
        Ok(p)
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    /// Shoelace area in squared degrees, positive when counter-clockwise.
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a.lon * b.lat - b.lon * a.lat
            })
            .sum::<f64>()
            / 2.0
    }

    fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn on_boundary(&self, p: GeoPoint) -> bool {
        self.edges().any(|(a, b)| on_segment(a, b, p))
    }

    /// Even-odd ray casting towards +lon; points on an edge or vertex count as inside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        if self.on_boundary(p) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            // half-open rule on latitude so a vertex is counted once
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
                if p.lon < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let scale = (b.lon - a.lon).abs().max((b.lat - a.lat).abs());
    if cross.abs() > 1e-12 * scale.max(1e-12) {
        return false;
    }
    p.lon >= a.lon.min(b.lon) && p.lon <= a.lon.max(b.lon) && p.lat >= a.lat.min(b.lat) && p.lat <= a.lat.max(b.lat)
}

/// Winding number of the ring around `p` (zero when outside). Used as an
/// independent check of [`Polygon::contains`] away from the boundary.
pub fn winding_number(poly: &Polygon, p: GeoPoint) -> i32 {
    let is_left = |a: GeoPoint, b: GeoPoint| (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat);
    let mut wn = 0;
    for (a, b) in poly.edges() {
        if a.lat <= p.lat {
            if b.lat > p.lat && is_left(a, b) > 0.0 {
                wn += 1;
            }
        } else if b.lat <= p.lat && is_left(a, b) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub name: String,
    pub polygon: Polygon,
}

/// Ordered named polygons; overlaps resolve to the first match.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborhoodSet {
    items: Vec<Neighborhood>,
}

impl NeighborhoodSet {
    pub fn new(items: Vec<Neighborhood>) -> Result<Self, GeoError> {
        for (i, n) in items.iter().enumerate() {
            if items[..i].iter().any(|m| m.name == n.name) {
                return Err(GeoError::DuplicateName(n.name.clone()));
            }
        }
        Ok(Self { items })
    }

    pub fn names(&self) -> Vec<&str> {
        self.items.iter().map(|n| n.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighborhood> {
        self.items.iter()
    }

    pub fn assign_point(&self, p: GeoPoint) -> Option<&str> {
        self.items.iter().find(|n| n.polygon.contains(p)).map(|n| n.name.as_str())
    }

    pub fn assign<T: Located>(&self, record: &T) -> Option<&str> {
        record.location().and_then(|p| self.assign_point(p))
    }

    /// Parses a GeoJSON FeatureCollection of `Polygon` features, each named
    /// by its `name` property. Coordinates are `[lon, lat]`; holes are rejected.
    pub fn from_geojson(text: &str) -> Result<Self, GeoError> {
        let bad = |m: &str| GeoError::Geometry(m.to_string());
        let doc: Value = serde_json::from_str(text).map_err(|e| GeoError::Geometry(e.to_string()))?;
        if doc["type"] != "FeatureCollection" {
            return Err(bad("expected a FeatureCollection"));
        }
        let features = doc["features"].as_array().ok_or_else(|| bad("missing features array"))?;
        let mut items = Vec::with_capacity(features.len());
        for f in features {
            let name = f["properties"]["name"]
                .as_str()
                .ok_or_else(|| bad("feature without a name property"))?
                .to_string();
            let geom = &f["geometry"];
            if geom["type"] != "Polygon" {
                return Err(GeoError::Geometry(format!("{name}: only Polygon geometries are supported")));
            }
            let rings = geom["coordinates"].as_array().ok_or_else(|| bad("polygon without coordinates"))?;
            if rings.len() != 1 {
                return Err(GeoError::Geometry(format!("{name}: polygons with holes are not supported")));
            }
            let ring = rings[0].as_array().ok_or_else(|| bad("ring is not an array"))?;
            let mut vertices = Vec::with_capacity(ring.len());
            for pos in ring {
                let (lon, lat) = match pos.as_array().map(|a| a.as_slice()) {
                    Some([lon, lat, ..]) => (lon.as_f64(), lat.as_f64()),
                    _ => (None, None),
                };
                let (Some(lon), Some(lat)) = (lon, lat) else {
                    return Err(GeoError::Geometry(format!("{name}: malformed position")));
                };
                vertices.push(GeoPoint::new(lat, lon)?);
            }
            let polygon = Polygon::new(&name, vertices)?;
            items.push(Neighborhood { name, polygon });
        }
        Self::new(items)
    }

    pub fn load(path: &Path) -> Result<Self, GeoError> {
        Self::from_geojson(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    fn square(x0: f64, y0: f64, s: f64) -> Polygon {
        Polygon::new("sq", vec![pt(x0, y0), pt(x0 + s, y0), pt(x0 + s, y0 + s), pt(x0, y0 + s)]).unwrap()
    }

    #[test]
    fn unit_square() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(sq.contains(pt(0.5, 0.5)));
        assert!(!sq.contains(pt(1.5, 0.5)));
        for p in [pt(0.0, 0.0), pt(1.0, 1.0), pt(0.5, 0.0), pt(1.0, 0.3), pt(0.0, 0.9)] {
            assert!(sq.contains(p), "{p:?}");
        }
        assert!((sq.signed_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closing_vertex_is_dropped_and_degenerates_rejected() {
        let p = Polygon::new("p", vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0), pt(0.0, 0.0)]).unwrap();
        assert_eq!(p.vertices().len(), 3);
        assert!(matches!(Polygon::new("l", vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 2.0)]), Err(GeoError::ZeroArea(_))));
        assert!(matches!(Polygon::new("t", vec![pt(0.0, 0.0), pt(1.0, 1.0)]), Err(GeoError::TooFewVertices(_))));
    }

    #[test]
    fn concave_polygon() {
        // a "U": the notch between the arms is outside
        let u = Polygon::new(
            "u",
            vec![pt(0.0, 0.0), pt(3.0, 0.0), pt(3.0, 3.0), pt(2.0, 3.0), pt(2.0, 1.0), pt(1.0, 1.0), pt(1.0, 3.0), pt(0.0, 3.0)],
        )
        .unwrap();
        assert!(!u.contains(pt(1.5, 2.0)));
        assert!(u.contains(pt(0.5, 2.0)));
        assert!(u.contains(pt(1.5, 0.5)));
        // ray from here passes exactly through the vertices at lat 1
        assert!(!u.contains(pt(-1.0, 1.0)));
        assert!(u.contains(pt(1.5, 1.0)));
    }

    #[test]
    fn first_match_wins() {
        let set = NeighborhoodSet::new(vec![
            Neighborhood { name: "a".into(), polygon: square(0.0, 0.0, 2.0) },
            Neighborhood { name: "b".into(), polygon: square(1.0, 1.0, 2.0) },
        ])
        .unwrap();
        assert_eq!(set.assign_point(pt(1.5, 1.5)), Some("a"));
        assert_eq!(set.assign_point(pt(2.5, 2.5)), Some("b"));
        assert_eq!(set.assign_point(pt(5.0, 5.0)), None);
    }

    #[test]
    fn geojson_parsing() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"name":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}
        ]}"#;
        let set = NeighborhoodSet::from_geojson(text).unwrap();
        assert_eq!(set.names(), vec!["A"]);
        assert_eq!(set.assign_point(pt(0.2, 0.7)), Some("A"));
        let holes = text.replace("[[[0,0]", "[[[0,0],[1,0],[1,1],[0,1],[0,0]],[[0,0]");
        assert!(matches!(NeighborhoodSet::from_geojson(&holes), Err(GeoError::Geometry(_))));
        let dup = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"name":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}},
            {"type":"Feature","properties":{"name":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}}
        ]}"#;
        assert!(matches!(NeighborhoodSet::from_geojson(dup), Err(GeoError::DuplicateName(_))));
    }
}
