//! Per-record feature assembly and z-score standardization.
//!
//! Two feature sets are produced per record: the seven path-loss inputs that
//! drive the seed model, and the wider engineered set fed to the correction
//! network. Column order is fixed (see [`engineered_columns`]).

use chrono::{Datelike, FixedOffset, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo_scene::{LosClass, Scene};
use crate::record::MeasurementRecord;

pub const FREQUENCY_RANGE_MHZ: (f64, f64) = (700.0, 2680.0);
pub const DISTANCE_MAX_KM: f64 = 3.0;
pub const TX_HEIGHT_RANGE_M: (f64, f64) = (5.0, 120.0);
pub const UE_ALTITUDE_RANGE_M: (f64, f64) = (0.0, 325.0);
pub const TX_POWER_RANGE_DBM: (f64, f64) = (29.0, 70.0);

pub const PATH_LOSS_COLUMNS: [&str; 7] = [
    "downlink_frequency",
    "distance_to_transmitter_km",
    "tx_height_m",
    "ue_altitude_ag_m",
    "line_of_sight",
    "building_penetration_length_m",
    "total_obstruction_length_3d_m",
];

const ENGINEERED_EXTRA: [&str; 4] = [
    "distance_x_km",
    "distance_y_km",
    "tx_power",
    "building_intersection_count_3d",
];

const TEMPORAL_COLUMNS: [&str; 2] = ["day_of_week", "hour_of_day"];

/// Engineered column names in vector order.
pub fn engineered_columns(temporal: bool) -> Vec<&'static str> {
    let mut cols: Vec<&'static str> = PATH_LOSS_COLUMNS.to_vec();
    cols.extend(ENGINEERED_EXTRA);
    if temporal {
        cols.extend(TEMPORAL_COLUMNS);
    }
    cols
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossFeatures {
    /// MHz.
    pub downlink_frequency: f64,
    pub distance_to_transmitter_km: f64,
    pub tx_height_m: f64,
    pub ue_altitude_ag_m: f64,
    /// Binary LOS projection, 1.0 or 0.0.
    pub line_of_sight: f64,
    pub building_penetration_length_m: f64,
    pub total_obstruction_length_3d_m: f64,
}

impl PathLossFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.downlink_frequency,
            self.distance_to_transmitter_km,
            self.tx_height_m,
            self.ue_altitude_ag_m,
            self.line_of_sight,
            self.building_penetration_length_m,
            self.total_obstruction_length_3d_m,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Temporal {
    /// 0 = Monday.
    pub day_of_week: u8,
    pub hour_of_day: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineeredFeatures {
    pub path_loss: PathLossFeatures,
    /// Signed east offset of the UE from the transmitter.
    pub distance_x_km: f64,
    /// Signed north offset of the UE from the transmitter.
    pub distance_y_km: f64,
    pub tx_power: f64,
    pub building_intersection_count_3d: f64,
    pub temporal: Option<Temporal>,
}

impl EngineeredFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.path_loss.to_vec();
        v.extend([
            self.distance_x_km,
            self.distance_y_km,
            self.tx_power,
            self.building_intersection_count_3d,
        ]);
        if let Some(t) = self.temporal {
            v.extend([t.day_of_week as f64, t.hour_of_day as f64]);
        }
        v
    }
}

/// Switches that shape the engineered feature set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub temporal: bool,
    /// Fixed offset from UTC used to derive day/hour, minutes.
    pub utc_offset_minutes: i32,
}

/// Assembled features plus the geometric context reused for reports and KML.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFeatures {
    pub path_loss: PathLossFeatures,
    pub engineered: EngineeredFeatures,
    pub los_class: LosClass,
    pub ue_building: Option<u64>,
}

impl RecordFeatures {
    pub fn indoor(&self) -> bool {
        self.ue_building.is_some()
    }
}

fn check_range(field: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { field, value })
    }
}

pub fn temporal_of(record: &MeasurementRecord, utc_offset_minutes: i32) -> Result<Temporal> {
    let offset = FixedOffset::east_opt(utc_offset_minutes * 60)
        .ok_or_else(|| Error::InvalidInput(format!("utc offset {utc_offset_minutes} min")))?;
    let local = record.timestamp.with_timezone(&offset);
    Ok(Temporal {
        day_of_week: local.weekday().num_days_from_monday() as u8,
        hour_of_day: local.hour() as u8,
    })
}

pub fn assemble_features(
    record: &MeasurementRecord,
    scene: &Scene,
    options: &FeatureOptions,
) -> Result<RecordFeatures> {
    let tx = &record.tx;
    check_range("downlink_frequency", tx.frequency_mhz, FREQUENCY_RANGE_MHZ.0, FREQUENCY_RANGE_MHZ.1)?;
    check_range("tx_height_m", tx.height_m, TX_HEIGHT_RANGE_M.0, TX_HEIGHT_RANGE_M.1)?;
    check_range("ue_altitude_ag_m", record.ue.alt_ag_m, UE_ALTITUDE_RANGE_M.0, UE_ALTITUDE_RANGE_M.1)?;
    check_range("tx_power", tx.power_dbm, TX_POWER_RANGE_DBM.0, TX_POWER_RANGE_DBM.1)?;

    // horizontal distance bounds the 3D one from below, and a far tower may
    // sit off the terrain grid, so reject before tracing
    let p = scene.projection();
    let (a, b) = (p.to_local(tx.lon, tx.lat), p.to_local(record.ue.lon, record.ue.lat));
    let horizontal_km = (a[0] - b[0]).hypot(a[1] - b[1]) / 1000.0;
    if horizontal_km > DISTANCE_MAX_KM {
        return Err(Error::OutOfRange {
            field: "distance_to_transmitter_km",
            value: horizontal_km,
        });
    }

    let link = scene.link(&tx.antenna()?, &record.ue)?;
    let distance_km = link.distance_3d_m / 1000.0;
    if !(distance_km > 0.0 && distance_km <= DISTANCE_MAX_KM) {
        return Err(Error::OutOfRange {
            field: "distance_to_transmitter_km",
            value: distance_km,
        });
    }

    let path_loss = PathLossFeatures {
        downlink_frequency: tx.frequency_mhz,
        distance_to_transmitter_km: distance_km,
        tx_height_m: tx.height_m,
        ue_altitude_ag_m: record.ue.alt_ag_m,
        line_of_sight: link.los.as_binary() as f64,
        building_penetration_length_m: link.penetration_m,
        total_obstruction_length_3d_m: link.obstruction_m,
    };
    let temporal = if options.temporal {
        Some(temporal_of(record, options.utc_offset_minutes)?)
    } else {
        None
    };
    let engineered = EngineeredFeatures {
        path_loss,
        distance_x_km: link.dx_m / 1000.0,
        distance_y_km: link.dy_m / 1000.0,
        tx_power: tx.power_dbm,
        building_intersection_count_3d: link.intersection_count as f64,
        temporal,
    };
    Ok(RecordFeatures {
        path_loss,
        engineered,
        los_class: link.los,
        ue_building: link.ue_building,
    })
}

/// Per-column z-score statistics fitted on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Digest of the split the statistics came from.
    pub fitted_on: String,
}

impl Standardizer {
    /// Column means and population standard deviations; constant columns get std 1.
    pub fn fit(rows: &[Vec<f64>], fitted_on: impl Into<String>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Empty("standardizer needs at least 2 rows"));
        }
        let dim = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            mean,
            std,
            fitted_on: fitted_on.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| x * s + m)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_scene::{Building, GeoPoint, TerrainGrid};
    use crate::record::Transmitter;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn scene(buildings: Vec<Building>) -> Scene {
        let t = TerrainGrid::flat(-79.41, 43.63, 0.001, 21, 21, 80.0).unwrap();
        Scene::new(t, buildings).unwrap()
    }

    fn record(scene: &Scene, ue_xy: [f64; 2], ue_alt: f64, ts: (i32, u32, u32, u32)) -> MeasurementRecord {
        let proj = scene.projection();
        let (tx_lon, tx_lat) = proj.to_geo([0.0, 0.0]);
        let (lon, lat) = proj.to_geo(ue_xy);
        MeasurementRecord {
            record_id: 1,
            timestamp: Utc.with_ymd_and_hms(ts.0, ts.1, ts.2, ts.3, 0, 0).unwrap(),
            ue: GeoPoint::new(lon, lat, ue_alt).unwrap(),
            tx: Transmitter {
                id: "T1".into(),
                lon: tx_lon,
                lat: tx_lat,
                height_m: 30.0,
                power_dbm: 43.0,
                frequency_mhz: 1900.0,
            },
            rsrp_dbm: -90.0,
            rsrq_db: Some(-11.0),
        }
    }


    #[test]
    fn column_layout() {
        assert_eq!(engineered_columns(false).len(), 11);
        assert_eq!(engineered_columns(true).len(), 13);
        assert_eq!(engineered_columns(true)[11], "day_of_week");
    }

    #[test]
    fn outdoor_los_in_empty_scene() {
        let s = scene(vec![]);
        let r = record(&s, [300.0, 400.0], 1.5, (2024, 1, 2, 14));
        let f = assemble_features(&r, &s, &FeatureOptions::default()).unwrap();
        assert_eq!(f.path_loss.line_of_sight, 1.0);
        assert_eq!(f.path_loss.building_penetration_length_m, 0.0);
        assert_eq!(f.path_loss.total_obstruction_length_3d_m, 0.0);
        assert_eq!(f.engineered.building_intersection_count_3d, 0.0);
        let e = &f.engineered;
        let horiz = (e.distance_x_km.powi(2) + e.distance_y_km.powi(2)).sqrt();
        assert!((horiz - 0.5).abs() < 1e-9);
        let d3 = (0.5f64.powi(2) + (0.0285f64).powi(2)).sqrt();
        assert!((f.path_loss.distance_to_transmitter_km - d3).abs() < 1e-9);
        assert!(e.temporal.is_none());
        assert_eq!(e.to_vec().len(), 11);
    }

    #[test]
    fn vertical_link_has_zero_horizontal_offsets() {
        let s = scene(vec![]);
        let mut r = record(&s, [0.0, 0.0], 300.0, (2024, 1, 2, 14));
        r.tx.height_m = 5.0;
        let f = assemble_features(&r, &s, &FeatureOptions::default()).unwrap();
        assert_eq!(f.engineered.distance_x_km, 0.0);
        assert_eq!(f.engineered.distance_y_km, 0.0);
        assert!((f.path_loss.distance_to_transmitter_km - 0.295).abs() < 1e-12);
    }

    #[test]
    fn tuesday_afternoon() {
        let s = scene(vec![]);
        // 2024-01-02 was a Tuesday
        let r = record(&s, [100.0, 0.0], 1.5, (2024, 1, 2, 14));
        let opts = FeatureOptions {
            temporal: true,
            utc_offset_minutes: 0,
        };
        let f = assemble_features(&r, &s, &opts).unwrap();
        assert_eq!(
            f.engineered.temporal,
            Some(Temporal {
                day_of_week: 1,
                hour_of_day: 14
            })
        );
        let shifted = FeatureOptions {
            temporal: true,
            utc_offset_minutes: -300,
        };
        let t = assemble_features(&r, &s, &shifted).unwrap().engineered.temporal.unwrap();
        assert_eq!((t.day_of_week, t.hour_of_day), (1, 9));
    }

    #[test]
    fn out_of_range_is_flagged() {
        let s = scene(vec![]);
        let mut r = record(&s, [100.0, 0.0], 1.5, (2024, 1, 2, 14));
        r.tx.frequency_mhz = 3500.0;
        assert!(matches!(
            assemble_features(&r, &s, &FeatureOptions::default()),
            Err(Error::OutOfRange { field: "downlink_frequency", .. })
        ));
    }

    #[test]
    fn indoor_record_features() {
        let s = scene(vec![Building::rect(4, [200.0, -20.0], [240.0, 20.0], 80.0, 30.0).unwrap()]);
        let r = record(&s, [210.0, 0.0], 10.0, (2024, 1, 2, 14));
        let f = assemble_features(&r, &s, &FeatureOptions::default()).unwrap();
        assert!(f.indoor());
        assert!(f.path_loss.building_penetration_length_m > 9.0);
        assert_eq!(f.path_loss.total_obstruction_length_3d_m, 0.0);
    }

    #[test]
    fn standardizer_examples() {
        let rows = vec![vec![5.0, 0.0, 1.0], vec![5.0, 2.0, 0.0]];
        let st = Standardizer::fit(&rows, "train").unwrap();
        assert_eq!(st.mean, vec![5.0, 1.0, 0.5]);
        assert_eq!(st.std, vec![1.0, 1.0, 0.5]);
        assert_eq!(st.apply(&[5.0, 1.0, 0.5]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(st.apply(&[6.0, 2.0, 1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        // binary column goes through the same z-score: (0 - 0.5) / 0.5
        assert_eq!(st.apply(&[5.0, 1.0, 0.0]).unwrap()[2], -1.0);
        assert!(st.apply(&[1.0]).is_err());
        assert!(Standardizer::fit(&[vec![1.0]], "x").is_err());
        assert!(Standardizer::fit(&[], "x").is_err());
    }

    proptest! {
        #[test]
        fn standardized_fit_set_has_zero_mean(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 4), 2..40)) {
            let st = Standardizer::fit(&rows, "t").unwrap();
            let z: Vec<Vec<f64>> = rows.iter().map(|r| st.apply(r).unwrap()).collect();
            for c in 0..4 {
                let m: f64 = z.iter().map(|r| r[c]).sum::<f64>() / z.len() as f64;
                prop_assert!(m.abs() < 1e-9);
            }
            for (r, zr) in rows.iter().zip(&z) {
                let back = st.invert(zr).unwrap();
                for (a, b) in r.iter().zip(&back) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
