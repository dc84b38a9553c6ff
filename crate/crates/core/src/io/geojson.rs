//! Building footprints as GeoJSON polygons with a `height_m` property.

use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo_scene::{Building, LocalProjection};

fn feature_err(path: &Path, index: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: index,
        msg: format!("feature {index}: {msg}"),
    }
}

fn ring(path: &Path, index: usize, v: &Value, proj: &LocalProjection) -> Result<Vec<[f64; 2]>> {
    let pts = v.as_array().ok_or_else(|| feature_err(path, index, "ring is not an array"))?;
    pts.iter()
        .map(|p| {
            let lon = p.get(0).and_then(Value::as_f64);
            let lat = p.get(1).and_then(Value::as_f64);
            match (lon, lat) {
                (Some(lon), Some(lat)) => Ok(proj.to_local(lon, lat)),
                _ => Err(feature_err(path, index, "bad coordinate")),
            }
        })
        .collect()
}

/// Parses footprints into the local frame. Polygons use their exterior ring;
/// each part of a MultiPolygon becomes its own building. `line` in parse
/// errors is the feature index.
pub fn parse_buildings(text: &str, path: &Path, proj: &LocalProjection) -> Result<Vec<Building>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| feature_err(path, 0, "expected a FeatureCollection"))?;

    let mut out = Vec::new();
    let mut next_auto_id = 0u64;
    for (i, f) in features.iter().enumerate() {
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let height = props
            .get("height_m")
            .and_then(Value::as_f64)
            .ok_or_else(|| feature_err(path, i, "missing numeric height_m"))?;
        let base = props.get("base_elev_m").and_then(Value::as_f64).unwrap_or(0.0);
        let id = f
            .get("id")
            .and_then(Value::as_u64)
            .or_else(|| props.get("id").and_then(Value::as_u64));
        let geom = f.get("geometry").ok_or_else(|| feature_err(path, i, "missing geometry"))?;
        let coords = geom.get("coordinates").unwrap_or(&Value::Null);
        let polygons: Vec<&Value> = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![coords],
            Some("MultiPolygon") => coords
                .as_array()
                .map(|a| a.iter().collect())
                .ok_or_else(|| feature_err(path, i, "bad MultiPolygon"))?,
            other => return Err(feature_err(path, i, format!("unsupported geometry {other:?}"))),
        };
        for (part, poly) in polygons.into_iter().enumerate() {
            let exterior = poly
                .get(0)
                .ok_or_else(|| feature_err(path, i, "polygon has no rings"))?;
            let footprint = ring(path, i, exterior, proj)?;
            let bid = match (id, part) {
                (Some(id), 0) => id,
                _ => {
                    // synthesized ids live above any plausible explicit id
                    next_auto_id += 1;
                    u64::MAX - next_auto_id
                }
            };
            out.push(Building::new(bid, footprint, base, height).map_err(|e| feature_err(path, i, e))?);
        }
    }
    Ok(out)
}

pub fn read_buildings(path: &Path, proj: &LocalProjection) -> Result<Vec<Building>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_buildings(&text, path, proj)
}

pub fn buildings_to_geojson(buildings: &[Building], proj: &LocalProjection) -> Value {
    let features: Vec<Value> = buildings
        .iter()
        .map(|b| {
            let mut ring: Vec<Value> = b
                .footprint
                .iter()
                .map(|&p| {
                    let (lon, lat) = proj.to_geo(p);
                    json!([lon, lat])
                })
                .collect();
            ring.push(ring[0].clone());
            json!({
                "type": "Feature",
                "id": b.id,
                "properties": {"height_m": b.height_m, "base_elev_m": b.base_elev_m},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_buildings(path: &Path, buildings: &[Building], proj: &LocalProjection) -> Result<()> {
    let text = serde_json::to_string(&buildings_to_geojson(buildings, proj)).expect("json serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
