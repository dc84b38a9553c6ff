use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geo_scene::GeoPoint;
use crate::geohash;
use crate::pipeline::MetricKind;
use crate::propagation::rssi_from_rsrp_rsrq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    pub height_m: f64,
    pub power_dbm: f64,
    pub frequency_mhz: f64,
}

impl Transmitter {
    /// Antenna position, height above local ground.
    pub fn antenna(&self) -> Result<GeoPoint> {
        GeoPoint::new(self.lon, self.lat, self.height_m)
    }
}

/// One crowdsourced sample with its serving transmitter denormalized in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub record_id: u64,
    pub timestamp: DateTime<Utc>,
    pub ue: GeoPoint,
    pub tx: Transmitter,
    pub rsrp_dbm: f64,
    pub rsrq_db: Option<f64>,
}

impl MeasurementRecord {
    pub fn rssi_dbm(&self, n_rb: u32) -> Option<f64> {
        self.rsrq_db
            .and_then(|q| rssi_from_rsrp_rsrq(self.rsrp_dbm, q, n_rb).ok())
    }

    /// Measured value of `metric`, if this record carries it.
    pub fn target(&self, metric: MetricKind, n_rb: u32) -> Option<f64> {
        match metric {
            MetricKind::Rsrp => Some(self.rsrp_dbm),
            MetricKind::Rsrq => self.rsrq_db,
            MetricKind::Rssi => self.rssi_dbm(n_rb),
        }
    }

    pub fn geohash(&self, precision: usize) -> Result<String> {
        geohash::encode(self.ue.lat, self.ue.lon, precision)
    }

    /// The record's split cell (precision 6).
    pub fn cell(&self) -> Result<String> {
        self.geohash(geohash::SPLIT_PRECISION)
    }
}
