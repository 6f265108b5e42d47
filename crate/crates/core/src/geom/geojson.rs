//! GeoJSON-style building ingestion.
//!
//! Accepts a `FeatureCollection` whose features carry `Polygon` or
//! `MultiPolygon` geometries in planar meters and a numeric `height`
//! property. An optional top-level `bbox` (`[min_x, min_y, max_x, max_y]`)
//! sets the study area; otherwise the bounding box of all footprints is used.

use serde_json::{json, Value};

use super::{Building, BuildingMap, GeomError, Point2, Polygon, Rect};

pub fn load_building_map(source: &str) -> Result<BuildingMap, GeomError> {
    let doc: Value =
        serde_json::from_str(source).map_err(|e| GeomError::Malformed(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(GeomError::Malformed("expected a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeomError::Malformed("missing features array".into()))?;
    if features.is_empty() {
        return Err(GeomError::Empty);
    }

    let mut buildings = Vec::new();
    for (i, feature) in features.iter().enumerate() {
        let height = feature
            .get("properties")
            .and_then(|p| p.get("height"))
            .and_then(Value::as_f64)
            .ok_or(GeomError::BadHeight { feature: i })?;
        if !(height.is_finite() && height > 0.0) {
            return Err(GeomError::BadHeight { feature: i });
        }
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| GeomError::Malformed(format!("feature {i}: missing geometry")))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| GeomError::Malformed(format!("feature {i}: missing coordinates")))?;
        match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => {
                buildings.push(Building::new(parse_polygon(coords, i)?, height));
            }
            Some("MultiPolygon") => {
                let parts = coords.as_array().ok_or_else(|| {
                    GeomError::Malformed(format!("feature {i}: bad multipolygon"))
                })?;
                for part in parts {
                    buildings.push(Building::new(parse_polygon(part, i)?, height));
                }
            }
            other => {
                return Err(GeomError::Malformed(format!(
                    "feature {i}: unsupported geometry {other:?}"
                )))
            }
        }
    }

    let extent = match doc.get("bbox") {
        Some(b) => parse_bbox(b)?,
        None => buildings
            .iter()
            .map(|b| b.footprint.bbox())
            .reduce(|a, b| a.union(&b))
            .ok_or(GeomError::Empty)?,
    };
    BuildingMap::new(buildings, extent)
}

/// Serialize a map back into the format accepted by [`load_building_map`].
pub fn map_to_geojson(map: &BuildingMap) -> String {
    let ring = |r: &[Point2]| -> Value {
        let mut pts: Vec<Value> = r.iter().map(|p| json!([p.x, p.y])).collect();
        pts.push(json!([r[0].x, r[0].y]));
        Value::Array(pts)
    };
    let features: Vec<Value> = map
        .buildings()
        .iter()
        .map(|b| {
            let rings: Vec<Value> = b.footprint.rings().map(ring).collect();
            json!({
                "type": "Feature",
                "properties": { "height": b.height },
                "geometry": { "type": "Polygon", "coordinates": rings },
            })
        })
        .collect();
    let e = map.extent();
    let doc = json!({
        "type": "FeatureCollection",
        "bbox": [e.min.x, e.min.y, e.max.x, e.max.y],
        "features": features,
    });
    serde_json::to_string_pretty(&doc).expect("json serialization")
}

fn parse_bbox(v: &Value) -> Result<Rect, GeomError> {
    let nums: Option<Vec<f64>> = v
        .as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>());
    match nums.as_deref() {
        Some(&[x0, y0, x1, y1]) if x1 > x0 && y1 > y0 => {
            Ok(Rect::new(Point2::new(x0, y0), Point2::new(x1, y1)))
        }
        _ => Err(GeomError::Malformed(
            "bbox must be [min_x, min_y, max_x, max_y]".into(),
        )),
    }
}

fn parse_polygon(v: &Value, feature: usize) -> Result<Polygon, GeomError> {
    let rings = v.as_array().ok_or_else(|| {
        GeomError::Malformed(format!("feature {feature}: rings must be an array"))
    })?;
    let mut parsed = rings
        .iter()
        .map(|r| parse_ring(r, feature))
        .collect::<Result<Vec<_>, _>>()?;
    if parsed.is_empty() {
        return Err(GeomError::DegenerateRing { feature, count: 0 });
    }
    let outer = parsed.remove(0);
    Polygon::with_feature(outer, parsed, feature)
}

fn parse_ring(v: &Value, feature: usize) -> Result<Vec<Point2>, GeomError> {
    let bad = || GeomError::Malformed(format!("feature {feature}: bad coordinate"));
    v.as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|p| {
            let xy = p.as_array().ok_or_else(bad)?;
            match (
                xy.first().and_then(Value::as_f64),
                xy.get(1).and_then(Value::as_f64),
            ) {
                (Some(x), Some(y)) => Ok(Point2::new(x, y)),
                _ => Err(bad()),
            }
        })
        .collect()
}
