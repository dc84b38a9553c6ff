//! Link-budget formulas: free-space and clutter path loss, the RSRP estimate
//! derived from transmit power and path loss, the residual composition, and
//! the RSSI/RSRQ/RSRP identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PathLossFeatures;

/// FSPL constant for frequency in MHz and distance in km.
pub const FSPL_CONST_DB: f64 = 32.44778;

/// Resource blocks in a 20 MHz LTE carrier.
pub const DEFAULT_N_RB: u32 = 100;

pub fn fspl_db(frequency_mhz: f64, distance_km: f64) -> Result<f64> {
    if !(frequency_mhz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "frequency must be positive, got {frequency_mhz}"
        )));
    }
    if !(distance_km > 0.0) {
        return Err(Error::InvalidInput(format!(
            "distance must be positive, got {distance_km}"
        )));
    }
    Ok(FSPL_CONST_DB + 20.0 * frequency_mhz.log10() + 20.0 * distance_km.log10())
}

/// Caller-supplied path-loss model, e.g. a separately trained regressor.
pub trait ExternalPathLoss: Send + Sync {
    fn path_loss_db(&self, p: &PathLossFeatures) -> f64;
}

impl<F> ExternalPathLoss for F
where
    F: Fn(&PathLossFeatures) -> f64 + Send + Sync,
{
    fn path_loss_db(&self, p: &PathLossFeatures) -> f64 {
        self(p)
    }
}

/// Seed path-loss model used to form the initial estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLossModel {
    FsplOnly,
    LogDistanceClutter {
        /// Distance exponent.
        exponent: f64,
        /// Loss per meter of obstructing building, dB/m.
        obstruction_db_per_m: f64,
        /// Flat loss applied when the UE is indoors, dB.
        entry_loss_db: f64,
    },
    External {
        name: String,
    },
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel::LogDistanceClutter {
            exponent: 3.0,
            obstruction_db_per_m: 0.3,
            entry_loss_db: 12.0,
        }
    }
}

impl PathLossModel {
    pub fn clutter(exponent: f64, obstruction_db_per_m: f64, entry_loss_db: f64) -> Self {
        PathLossModel::LogDistanceClutter {
            exponent,
            obstruction_db_per_m,
            entry_loss_db,
        }
    }

    pub fn estimate(&self, p: &PathLossFeatures, external: Option<&dyn ExternalPathLoss>) -> Result<f64> {
        match self {
            PathLossModel::FsplOnly => fspl_db(p.downlink_frequency, p.distance_to_transmitter_km),
            PathLossModel::LogDistanceClutter {
                exponent,
                obstruction_db_per_m,
                entry_loss_db,
            } => {
                fspl_db(p.downlink_frequency, 1.0)?;
                if !(p.distance_to_transmitter_km > 0.0) {
                    return Err(Error::InvalidInput("distance must be positive".into()));
                }
                let indoor = if p.building_penetration_length_m > 0.0 {
                    *entry_loss_db
                } else {
                    0.0
                };
                Ok(FSPL_CONST_DB
                    + 20.0 * p.downlink_frequency.log10()
                    + 10.0 * exponent * p.distance_to_transmitter_km.log10()
                    + obstruction_db_per_m * p.total_obstruction_length_3d_m
                    + indoor)
            }
            PathLossModel::External { .. } => external
                .map(|f| f.path_loss_db(p))
                .ok_or(Error::MissingDelegate),
        }
    }
}

fn rb_power_share_db(n_rb: u32) -> Result<f64> {
    if n_rb < 1 {
        return Err(Error::InvalidInput("resource block count must be >= 1".into()));
    }
    Ok(10.0 * (12.0 * n_rb as f64).log10())
}

/// Per-resource-element RSRP estimate: transmit power minus path loss,
/// spread over `12 * n_rb` subcarriers.
pub fn rsrp_estimate(tx_power_dbm: f64, alpha_db: f64, n_rb: u32) -> Result<f64> {
    Ok(tx_power_dbm - alpha_db - rb_power_share_db(n_rb)?)
}

/// How the network output becomes a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// prediction = correction + estimate
    Residual,
    /// prediction = network output; the estimate only feeds the network
    Direct,
}

pub fn compose_prediction(beta_dbm: f64, correction_db: f64, mode: Composition) -> f64 {
    match mode {
        Composition::Residual => correction_db + beta_dbm,
        Composition::Direct => correction_db,
    }
}

/// RSSI from RSRP and RSRQ via RSRQ = N * RSRP / RSSI.
pub fn rssi_from_rsrp_rsrq(rsrp_dbm: f64, rsrq_db: f64, n_rb: u32) -> Result<f64> {
    if n_rb < 1 {
        return Err(Error::InvalidInput("resource block count must be >= 1".into()));
    }
    Ok(rsrp_dbm - rsrq_db + 10.0 * (n_rb as f64).log10())
}

pub fn rsrq_from_rsrp_rssi(rsrp_dbm: f64, rssi_dbm: f64, n_rb: u32) -> Result<f64> {
    if n_rb < 1 {
        return Err(Error::InvalidInput("resource block count must be >= 1".into()));
    }
    Ok(10.0 * (n_rb as f64).log10() + rsrp_dbm - rssi_dbm)
}

/// Path loss and the derived RSRP estimate for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioEstimate {
    alpha_db: f64,
    beta_dbm: f64,
    tx_power_dbm: f64,
    n_resource_blocks: u32,
}

impl RadioEstimate {
    pub fn new(tx_power_dbm: f64, alpha_db: f64, n_resource_blocks: u32) -> Result<Self> {
        Ok(Self {
            alpha_db,
            beta_dbm: rsrp_estimate(tx_power_dbm, alpha_db, n_resource_blocks)?,
            tx_power_dbm,
            n_resource_blocks,
        })
    }

    pub fn alpha_db(&self) -> f64 {
        self.alpha_db
    }

    pub fn beta_dbm(&self) -> f64 {
        self.beta_dbm
    }

    pub fn tx_power_dbm(&self) -> f64 {
        self.tx_power_dbm
    }

    pub fn n_resource_blocks(&self) -> u32 {
        self.n_resource_blocks
    }
}
