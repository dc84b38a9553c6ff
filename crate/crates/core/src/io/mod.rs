//! File formats and ingestion.

pub mod geojson;
pub mod grid;
pub mod kml;
pub mod measurements;

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{assemble_features, engineered_columns, FeatureOptions, RecordFeatures};
use crate::geo_scene::Scene;
use crate::pipeline::MetricKind;
use crate::record::MeasurementRecord;

pub use geojson::{read_buildings, write_buildings};
pub use grid::{read_terrain, write_terrain};
pub use kml::write_kml;
pub use measurements::{read_measurements, write_measurements, DroppedRow, MeasurementTable};

pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const BUILDINGS_FILE: &str = "buildings.geojson";
pub const TERRAIN_FILE: &str = "terrain.asc";

/// Loads `terrain.asc` and `buildings.geojson` from a data directory.
pub fn load_scene(dir: &Path) -> Result<Scene> {
    let terrain = read_terrain(&dir.join(TERRAIN_FILE))?;
    let proj = Scene::projection_for(&terrain);
    let buildings = read_buildings(&dir.join(BUILDINGS_FILE), &proj)?;
    Scene::new(terrain, buildings)
}

pub fn save_scene(dir: &Path, scene: &Scene) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_terrain(&dir.join(TERRAIN_FILE), scene.terrain())?;
    write_buildings(&dir.join(BUILDINGS_FILE), scene.buildings(), &scene.projection())
}

/// Validated records with their features.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<MeasurementRecord>,
    pub features: Vec<RecordFeatures>,
    pub total_rows: usize,
    pub dropped: Vec<DroppedRow>,
}

impl Ingested {
    /// Set when the input had no usable rows.
    pub fn notice(&self) -> Option<String> {
        if self.total_rows == 0 {
            Some("measurement file has no data rows".into())
        } else if self.records.is_empty() {
            Some(format!("all {} rows were dropped", self.total_rows))
        } else {
            None
        }
    }
}

/// Reads measurements and keeps rows whose features can be assembled
/// against `scene`. When `metric` needs RSRQ, the `rsrq_db` column must be
/// present and rows without a value are dropped.
pub fn ingest(
    path: &Path,
    scene: &Scene,
    options: &FeatureOptions,
    metric: Option<MetricKind>,
) -> Result<Ingested> {
    let table = read_measurements(path)?;
    let needs_rsrq = matches!(metric, Some(MetricKind::Rsrq | MetricKind::Rssi));
    if needs_rsrq && !table.has_rsrq {
        return Err(Error::Schema(format!(
            "{}: missing column {}",
            path.display(),
            measurements::RSRQ_COLUMN
        )));
    }
    let assembled: Vec<Result<RecordFeatures>> = table
        .records
        .par_iter()
        .map(|r| assemble_features(r, scene, options))
        .collect();

    let mut out = Ingested {
        total_rows: table.total_rows,
        dropped: table.dropped,
        ..Ingested::default()
    };
    for ((r, f), line) in table.records.into_iter().zip(assembled).zip(table.lines) {
        let record_id = r.record_id;
        let reason = match f {
            Ok(_) if needs_rsrq && r.rsrq_db.is_none() => Some("rsrq_db missing".to_string()),
            Ok(f) => {
                out.records.push(r);
                out.features.push(f);
                None
            }
            Err(Error::OutOfRange { field, .. }) => Some(format!("{field} out of range")),
            Err(Error::OutsideExtent { .. }) => Some("outside scene extent".to_string()),
            Err(e) => Some(e.to_string()),
        };
        if let Some(reason) = reason {
            out.dropped.push(DroppedRow {
                line,
                record_id: Some(record_id),
                reason,
            });
        }
    }
    out.dropped.sort_by_key(|d| d.line);
    if let Some(n) = out.notice() {
        log::warn!("{n}");
    }
    Ok(out)
}

pub fn write_drop_log(path: &Path, dropped: &[DroppedRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let to_err = |e: csv::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    w.write_record(["line", "record_id", "reason"]).map_err(to_err)?;
    for d in dropped {
        w.write_record([
            d.line.to_string(),
            d.record_id.map(|i| i.to_string()).unwrap_or_default(),
            d.reason.clone(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Engineered features per record, plus LOS class and indoor flag.
pub fn write_features(path: &Path, records: &[MeasurementRecord], features: &[RecordFeatures]) -> Result<()> {
    let temporal = features.first().is_some_and(|f| f.engineered.temporal.is_some());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let to_err = |e: csv::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut header = vec!["record_id".to_string()];
    header.extend(engineered_columns(temporal).into_iter().map(String::from));
    header.extend(["los_class".to_string(), "indoor".to_string()]);
    w.write_record(&header).map_err(to_err)?;
    for (r, f) in records.iter().zip(features) {
        let mut row = vec![r.record_id.to_string()];
        row.extend(f.engineered.to_vec().iter().map(f64::to_string));
        row.push(serde_json::to_value(f.los_class).expect("enum serializes").as_str().unwrap_or("").to_string());
        row.push(f.indoor().to_string());
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
