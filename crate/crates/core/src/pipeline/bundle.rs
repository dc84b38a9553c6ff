//! On-disk model bundles: a JSON manifest plus a little-endian f64 weight blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::input_columns;
use super::split::SplitManifest;
use super::MetricKind;
use crate::error::{Error, Result};
use crate::features::{FeatureOptions, Standardizer};
use crate::net::{Architecture, LayerShape, Network, TrainConfig};
use crate::propagation::PathLossModel;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub train_records: usize,
    pub validation_records: usize,
    pub test_records: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_rmse: f64,
    pub validation_rmse: Option<f64>,
}

/// A trained correction network with everything needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub metric: MetricKind,
    pub n_rb: u32,
    pub features: FeatureOptions,
    pub input_columns: Vec<String>,
    pub path_loss: PathLossModel,
    pub train: TrainConfig,
    pub center_output: bool,
    pub standardizer: Standardizer,
    pub split: SplitManifest,
    pub split_digest: String,
    pub summary: TrainingSummary,
    pub network: Network,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsEntry {
    file: String,
    dtype: String,
    count: usize,
    sha256: String,
    layers: Vec<LayerShape>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    metric: MetricKind,
    n_rb: u32,
    features: FeatureOptions,
    input_columns: Vec<String>,
    input_dim: usize,
    architecture: Architecture,
    path_loss: PathLossModel,
    train: TrainConfig,
    center_output: bool,
    standardizer: Standardizer,
    split: SplitManifest,
    split_digest: String,
    summary: TrainingSummary,
    weights: WeightsEntry,
}

fn weight_bytes(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

impl ModelBundle {
    /// Confirms the stored columns and dimensions agree with each other.
    pub fn check_schema(&self) -> Result<()> {
        let expected = input_columns(self.features.temporal);
        if self.input_columns != expected {
            return Err(Error::Schema(format!(
                "bundle columns {:?} do not match {:?}",
                self.input_columns, expected
            )));
        }
        if self.standardizer.dim() != expected.len() || self.network.input_dim() != expected.len() {
            return Err(Error::Schema(format!(
                "standardizer dim {} / network input {} vs {} columns",
                self.standardizer.dim(),
                self.network.input_dim(),
                expected.len()
            )));
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.check_schema()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let blob = weight_bytes(self.network.params());
        let manifest = Manifest {
            format_version: self.format_version,
            metric: self.metric,
            n_rb: self.n_rb,
            features: self.features,
            input_columns: self.input_columns.clone(),
            input_dim: self.network.input_dim(),
            architecture: self.network.architecture().clone(),
            path_loss: self.path_loss.clone(),
            train: self.train.clone(),
            center_output: self.center_output,
            standardizer: self.standardizer.clone(),
            split: self.split.clone(),
            split_digest: self.split_digest.clone(),
            summary: self.summary.clone(),
            weights: WeightsEntry {
                file: WEIGHTS_FILE.into(),
                dtype: "f64le".into(),
                count: self.network.params().len(),
                sha256: hex::encode(Sha256::digest(&blob)),
                layers: self.network.shapes().to_vec(),
            },
        };
        let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Bundle(e.to_string()))?;
        json.push(b'\n');
        let mpath = dir.join(MANIFEST_FILE);
        fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
        let wpath = dir.join(WEIGHTS_FILE);
        fs::write(&wpath, blob).map_err(|e| Error::io(&wpath, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let probe: serde_json::Value =
            serde_json::from_slice(&text).map_err(|e| Error::Bundle(format!("manifest: {e}")))?;
        match probe.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == BUNDLE_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Bundle(format!(
                    "unsupported bundle format version {v} (expected {BUNDLE_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Bundle("manifest lacks format_version".into())),
        }
        let m: Manifest = serde_json::from_value(probe).map_err(|e| Error::Bundle(format!("manifest: {e}")))?;

        if m.weights.dtype != "f64le" {
            return Err(Error::Bundle(format!("unsupported weight dtype {}", m.weights.dtype)));
        }
        let wpath = dir.join(&m.weights.file);
        let blob = fs::read(&wpath).map_err(|e| Error::io(&wpath, e))?;
        if blob.len() != m.weights.count * 8 {
            return Err(Error::Bundle(format!(
                "weight blob has {} bytes, manifest says {} values",
                blob.len(),
                m.weights.count
            )));
        }
        if hex::encode(Sha256::digest(&blob)) != m.weights.sha256 {
            return Err(Error::Bundle("weight blob checksum mismatch".into()));
        }
        let params: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let network = Network::from_params(m.architecture, m.input_dim, params)
            .map_err(|e| Error::Bundle(e.to_string()))?;
        if network.shapes() != m.weights.layers.as_slice() {
            return Err(Error::Bundle("layer table does not match architecture".into()));
        }
        let bundle = Self {
            format_version: m.format_version,
            metric: m.metric,
            n_rb: m.n_rb,
            features: m.features,
            input_columns: m.input_columns,
            path_loss: m.path_loss,
            train: m.train,
            center_output: m.center_output,
            standardizer: m.standardizer,
            split: m.split,
            split_digest: m.split_digest,
            summary: m.summary,
            network,
        };
        bundle.check_schema()?;
        Ok(bundle)
    }
}
