use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::{ModelBundle, TrainingSummary, BUNDLE_FORMAT_VERSION};
use super::config::PipelineConfig;
use super::split::{split_records, SplitManifest};
use super::MetricKind;
use crate::error::{Error, Result};
use crate::features::{assemble_features, engineered_columns, EngineeredFeatures, RecordFeatures, Standardizer};
use crate::geo_scene::{LosClass, Scene};
use crate::net::{fit, Dataset, Network};
use crate::propagation::{compose_prediction, Composition, ExternalPathLoss, PathLossModel, RadioEstimate};
use crate::record::MeasurementRecord;

/// Minimum train-split size accepted by [`train_prepared`].
pub const MIN_TRAIN_RECORDS: usize = 100;

/// A record with its features, estimate and target resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub record_id: u64,
    pub features: RecordFeatures,
    pub alpha_db: f64,
    pub beta_dbm: f64,
    pub target: f64,
}

/// Records ready for training, with their split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub records: Vec<PreparedRecord>,
    /// Records left out, with the reason.
    pub excluded: Vec<(u64, String)>,
    pub manifest: SplitManifest,
}

/// Network input: engineered features followed by the estimate.
pub fn input_row(engineered: &EngineeredFeatures, beta_dbm: f64) -> Vec<f64> {
    let mut v = engineered.to_vec();
    v.push(beta_dbm);
    v
}

pub fn input_columns(temporal: bool) -> Vec<String> {
    let mut c: Vec<String> = engineered_columns(temporal).into_iter().map(String::from).collect();
    c.push("beta".into());
    c
}

fn offset_for(metric: MetricKind, beta: f64) -> f64 {
    match metric.composition() {
        Composition::Residual => beta,
        Composition::Direct => 0.0,
    }
}

/// Features, estimates and targets for every usable record; unusable ones are
/// listed in `excluded` rather than failing the run.
pub fn prepare(
    records: &[MeasurementRecord],
    scene: &Scene,
    config: &PipelineConfig,
    external: Option<&dyn ExternalPathLoss>,
) -> Result<PreparedData> {
    let options = config.feature_options();
    let assembled: Vec<Result<RecordFeatures>> = records
        .par_iter()
        .map(|r| assemble_features(r, scene, &options))
        .collect();

    let mut kept = Vec::new();
    let mut kept_records = Vec::new();
    let mut excluded = Vec::new();
    for (r, f) in records.iter().zip(assembled) {
        let f = match f {
            Ok(f) => f,
            Err(e) => {
                excluded.push((r.record_id, e.to_string()));
                continue;
            }
        };
        let Some(target) = r.target(config.metric, config.n_rb) else {
            excluded.push((r.record_id, format!("no {:?} target", config.metric)));
            continue;
        };
        let alpha = config.path_loss.estimate(&f.path_loss, external)?;
        let est = RadioEstimate::new(r.tx.power_dbm, alpha, config.n_rb)?;
        kept.push(PreparedRecord {
            record_id: r.record_id,
            features: f,
            alpha_db: alpha,
            beta_dbm: est.beta_dbm(),
            target,
        });
        kept_records.push(r.clone());
    }
    if !excluded.is_empty() {
        log::warn!("{} of {} records excluded from training", excluded.len(), records.len());
    }
    let manifest = split_records(&kept_records, &config.split)?;
    Ok(PreparedData {
        records: kept,
        excluded,
        manifest,
    })
}

struct Splits {
    train: Vec<usize>,
    validation: Vec<usize>,
}

fn split_indices(data: &PreparedData) -> Splits {
    let pos: HashMap<u64, usize> = data
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.record_id, i))
        .collect();
    let lookup = |ids: &[u64]| ids.iter().filter_map(|id| pos.get(id).copied()).collect();
    Splits {
        train: lookup(&data.manifest.train_ids),
        validation: lookup(&data.manifest.validation_ids),
    }
}

fn dataset(
    data: &PreparedData,
    rows: &[usize],
    standardizer: &Standardizer,
    metric: MetricKind,
) -> Result<Dataset> {
    let mut ds = Dataset::new(standardizer.dim());
    for &i in rows {
        let r = &data.records[i];
        let x = standardizer.apply(&input_row(&r.features.engineered, r.beta_dbm))?;
        ds.push(&x, offset_for(metric, r.beta_dbm), r.target);
    }
    Ok(ds)
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub bundle: ModelBundle,
    pub history: Vec<crate::net::EpochStats>,
}

/// Trains on the train split with early stopping on the validation split.
/// Blind-test records are never read.
pub fn train_prepared(data: &PreparedData, config: &PipelineConfig) -> Result<TrainedModel> {
    config.validate()?;
    let splits = split_indices(data);
    if splits.train.len() < MIN_TRAIN_RECORDS {
        return Err(Error::InvalidInput(format!(
            "train split has {} records, need at least {MIN_TRAIN_RECORDS}",
            splits.train.len()
        )));
    }

    let rows: Vec<Vec<f64>> = splits
        .train
        .iter()
        .map(|&i| {
            let r = &data.records[i];
            input_row(&r.features.engineered, r.beta_dbm)
        })
        .collect();
    let mut standardizer = Standardizer::fit(&rows, data.manifest.train_digest())?;
    if !config.features.standardize_beta {
        let last = standardizer.dim() - 1;
        standardizer.mean[last] = 0.0;
        standardizer.std[last] = 1.0;
    }

    let train = dataset(data, &splits.train, &standardizer, config.metric)?;
    let val = dataset(data, &splits.validation, &standardizer, config.metric)?;

    let arch = config.resolved_architecture();
    let train_cfg = config.resolved_train();
    let mut net = Network::init(arch, standardizer.dim(), config.seed)?;
    if config.center_output {
        let preds = train.predictions(&net)?;
        let shift = train
            .targets
            .iter()
            .zip(&preds)
            .map(|(t, p)| t - p)
            .sum::<f64>()
            / train.len() as f64;
        let bias = net.shapes().last().expect("network has layers").bias_offset;
        net.params_mut()[bias] += shift;
    }

    let outcome = fit(net, &train, &val, &train_cfg)?;
    let train_rmse = train.rmse(&outcome.network)?;
    let validation_rmse = if val.is_empty() {
        None
    } else {
        Some(val.rmse(&outcome.network)?)
    };
    let options = config.feature_options();
    let bundle = ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        metric: config.metric,
        n_rb: config.n_rb,
        features: options,
        input_columns: input_columns(options.temporal),
        path_loss: config.path_loss.clone(),
        train: train_cfg,
        center_output: config.center_output,
        standardizer,
        split: data.manifest.clone(),
        split_digest: data.manifest.digest(),
        summary: TrainingSummary {
            train_records: train.len(),
            validation_records: val.len(),
            test_records: data.manifest.test_ids.len(),
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len(),
            train_rmse,
            validation_rmse,
        },
        network: outcome.network,
    };
    Ok(TrainedModel {
        bundle,
        history: outcome.history,
    })
}

pub fn train_model(
    records: &[MeasurementRecord],
    scene: &Scene,
    config: &PipelineConfig,
    external: Option<&dyn ExternalPathLoss>,
) -> Result<TrainedModel> {
    let data = prepare(records, scene, config, external)?;
    train_prepared(&data, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: u64,
    /// Measured value, when the record carries this metric.
    pub target: Option<f64>,
    pub prediction: f64,
    pub alpha_db: f64,
    pub beta_dbm: f64,
    pub indoor: bool,
    pub los: LosClass,
}

#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    pub predictions: Vec<Prediction>,
    pub skipped: Vec<(u64, String)>,
}

/// Applies a trained bundle to records. Records whose features cannot be
/// assembled are skipped and listed.
pub fn predict(
    bundle: &ModelBundle,
    records: &[MeasurementRecord],
    scene: &Scene,
    external: Option<&dyn ExternalPathLoss>,
) -> Result<PredictionSet> {
    bundle.check_schema()?;
    if matches!(bundle.path_loss, PathLossModel::External { .. }) && external.is_none() {
        return Err(Error::MissingDelegate);
    }
    let assembled: Vec<Result<RecordFeatures>> = records
        .par_iter()
        .map(|r| assemble_features(r, scene, &bundle.features))
        .collect();

    let mut out = PredictionSet::default();
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for (r, f) in records.iter().zip(assembled) {
        let f = match f {
            Ok(f) => f,
            Err(e) => {
                out.skipped.push((r.record_id, e.to_string()));
                continue;
            }
        };
        let alpha = bundle.path_loss.estimate(&f.path_loss, external)?;
        let beta = RadioEstimate::new(r.tx.power_dbm, alpha, bundle.n_rb)?.beta_dbm();
        rows.extend(bundle.standardizer.apply(&input_row(&f.engineered, beta))?);
        meta.push((r, f, alpha, beta));
    }
    let corrections = bundle.network.forward_batch(&rows)?;
    let mode = bundle.metric.composition();
    for ((r, f, alpha, beta), c) in meta.into_iter().zip(corrections) {
        out.predictions.push(Prediction {
            record_id: r.record_id,
            target: r.target(bundle.metric, bundle.n_rb),
            prediction: compose_prediction(beta, c, mode),
            alpha_db: alpha,
            beta_dbm: beta,
            indoor: f.indoor(),
            los: f.los_class,
        });
    }
    Ok(out)
}
