//! GeoJSON FeatureCollection reader for planar Polygon/MultiPolygon
//! features. MultiPolygons are exploded into one [`PolygonGeometry`] per
//! part, all sharing the feature `id`.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geom::PolygonGeometry;
use crate::grid::Point;

pub fn read_polygons_geojson(path: impl AsRef<Path>) -> Result<Vec<PolygonGeometry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root: Value = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), format!("invalid JSON: {e}")))?;

    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::parse(path, 1, "expected a FeatureCollection".to_string()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(path, 1, "FeatureCollection has no `features` array".to_string()))?;

    let mut out = Vec::new();
    for (idx, feature) in features.iter().enumerate() {
        let feat_no = idx + 1;
        let geom_err = |message: String| Error::InvalidGeometry {
            context: format!("{} feature {feat_no}", path.display()),
            message,
        };

        let properties = parse_properties(feature);
        if !properties.contains_key("id") {
            return Err(geom_err("missing `id` property".into()));
        }

        let geometry = feature
            .get("geometry")
            .ok_or_else(|| geom_err("missing geometry".into()))?;
        let gtype = geometry
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| geom_err("geometry has no type".into()))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| geom_err("geometry has no coordinates".into()))?;

        match gtype {
            "Polygon" => {
                out.push(parse_polygon(coords, &properties).map_err(|m| geom_err(m))?);
            }
            "MultiPolygon" => {
                let parts = coords
                    .as_array()
                    .ok_or_else(|| geom_err("MultiPolygon coordinates not an array".into()))?;
                for part in parts {
                    out.push(parse_polygon(part, &properties).map_err(|m| geom_err(m))?);
                }
            }
            other => {
                return Err(geom_err(format!("unsupported geometry type `{other}`")));
            }
        }
    }
    Ok(out)
}

fn parse_properties(feature: &Value) -> BTreeMap<String, String> {
    let mut properties = BTreeMap::new();
    if let Some(obj) = feature.get("properties").and_then(Value::as_object) {
        for (k, v) in obj {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            properties.insert(k.clone(), text);
        }
    }
    // Top-level feature `id` is also accepted, GeoJSON-style.
    if !properties.contains_key("id") {
        if let Some(id) = feature.get("id") {
            let text = match id {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            properties.insert("id".to_string(), text);
        }
    }
    properties
}

fn parse_polygon(coords: &Value, properties: &BTreeMap<String, String>) -> std::result::Result<PolygonGeometry, String> {
    let rings = coords.as_array().ok_or("Polygon coordinates not an array")?;
    if rings.is_empty() {
        return Err("Polygon has no rings".to_string());
    }
    let mut parsed: Vec<Vec<Point>> = Vec::with_capacity(rings.len());
    for ring in rings {
        let positions = ring.as_array().ok_or("ring is not an array")?;
        let mut points = Vec::with_capacity(positions.len());
        for pos in positions {
            let xy = pos.as_array().ok_or("position is not an array")?;
            if xy.len() < 2 {
                return Err("position has fewer than 2 coordinates".to_string());
            }
            let x = xy[0].as_f64().ok_or("x is not a number")?;
            let y = xy[1].as_f64().ok_or("y is not a number")?;
            points.push(Point::new(x, y));
        }
        parsed.push(points);
    }
    let outer = parsed.remove(0);
    PolygonGeometry::new(outer, parsed, properties.clone()).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(dir: &tempfile::TempDir, content: &str) -> std::path::PathBuf {
        let p = dir.path().join("polys.geojson");
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn one_square_polygon() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp(
            &dir,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{"id":"a"},
                 "geometry":{"type":"Polygon","coordinates":[[[0,0],[100,0],[100,100],[0,100],[0,0]]]}}]}"#,
        );
        let polys = read_polygons_geojson(p).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].id(), "a");
        assert_eq!(polys[0].outer_ring.len(), 5);
        assert!(polys[0].holes.is_empty());
    }

    #[test]
    fn multipolygon_explodes_sharing_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp(
            &dir,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{"id":7},
                 "geometry":{"type":"MultiPolygon","coordinates":[
                    [[[0,0],[10,0],[10,10],[0,10],[0,0]]],
                    [[[20,0],[30,0],[30,10],[20,10],[20,0]]]]}}]}"#,
        );
        let polys = read_polygons_geojson(p).unwrap();
        assert_eq!(polys.len(), 2);
        assert_eq!(polys[0].id(), "7");
        assert_eq!(polys[1].id(), "7");
    }

    #[test]
    fn linestring_feature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp(
            &dir,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{"id":"x"},
                 "geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]}"#,
        );
        let err = read_polygons_geojson(p).unwrap_err();
        assert!(err.to_string().contains("unsupported geometry type"), "{err}");
        assert!(err.to_string().contains("feature 1"), "{err}");
    }

    #[test]
    fn unclosed_ring_rejected_naming_feature() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp(
            &dir,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{"id":"x"},
                 "geometry":{"type":"Polygon","coordinates":[[[0,0],[10,0],[10,10],[0,10]]]}}]}"#,
        );
        let err = read_polygons_geojson(p).unwrap_err();
        assert!(err.to_string().contains("feature 1"), "{err}");
        assert!(err.to_string().contains("closed"), "{err}");
    }

    #[test]
    fn missing_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp(
            &dir,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{},
                 "geometry":{"type":"Polygon","coordinates":[[[0,0],[10,0],[10,10],[0,10],[0,0]]]}}]}"#,
        );
        assert!(read_polygons_geojson(p).is_err());
    }

    #[test]
    fn polygon_with_hole_parsed() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp(
            &dir,
            r#"{"type":"FeatureCollection","features":[
                {"type":"Feature","properties":{"id":"h"},
                 "geometry":{"type":"Polygon","coordinates":[
                    [[0,0],[100,0],[100,100],[0,100],[0,0]],
                    [[40,40],[60,40],[60,60],[40,60],[40,40]]]}}]}"#,
        );
        let polys = read_polygons_geojson(p).unwrap();
        assert_eq!(polys[0].holes.len(), 1);
        assert!(!polys[0].contains(Point::new(50.0, 50.0)));
        assert!(polys[0].contains(Point::new(20.0, 20.0)));
    }
}
