//! Random hyperparameter search over architectures and optimizer settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, SearchSpace};
use super::model::{train_prepared, PreparedData};
use crate::error::{Error, Result};
use crate::net::{Architecture, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub trunk: Vec<usize>,
    pub head: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// `None` when the trial diverged.
    pub validation_rmse: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: PipelineConfig,
    pub best_trial: usize,
    pub trials: Vec<TrialRow>,
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        (rng.random_range(lo.ln()..=hi.ln())).exp()
    }
}

/// Draws trial `index`'s settings; each trial has its own stream so results
/// do not depend on evaluation order.
pub fn sample_trial(space: &SearchSpace, base: &TrainConfig, seed: u64, index: usize) -> (Architecture, TrainConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let depth = rng.random_range(space.trunk_depth.0..=space.trunk_depth.1);
    let width = space.widths[rng.random_range(0..space.widths.len())];
    let head = space.head_templates[rng.random_range(0..space.head_templates.len())].clone();
    let train = TrainConfig {
        batch_size: rng.random_range(space.batch_size.0..=space.batch_size.1),
        learning_rate: log_uniform(&mut rng, space.learning_rate),
        weight_decay: log_uniform(&mut rng, space.weight_decay),
        max_epochs: rng.random_range(space.max_epochs.0..=space.max_epochs.1),
        ..base.clone()
    };
    let arch = Architecture::new(vec![width; depth], head).expect("search heads validated");
    (arch, train)
}

/// Runs `trials` independent trainings in parallel and keeps the one with the
/// lowest validation RMSE (earliest trial on ties). Diverged trials are
/// recorded, not fatal, unless every trial diverges.
pub fn hyper_search(data: &PreparedData, base: &PipelineConfig, trials: usize) -> Result<SearchOutcome> {
    base.validate()?;
    if trials == 0 {
        return Err(Error::Config("search needs at least one trial".into()));
    }
    let configs: Vec<PipelineConfig> = (0..trials)
        .map(|i| {
            let (arch, train) = sample_trial(&base.search, &base.resolved_train(), base.seed, i);
            PipelineConfig {
                architecture: Some(arch),
                train: Some(train),
                ..base.clone()
            }
        })
        .collect();

    let results: Vec<Result<f64>> = configs
        .par_iter()
        .map(|cfg| {
            let m = train_prepared(data, cfg)?;
            Ok(m.bundle
                .summary
                .validation_rmse
                .unwrap_or(m.bundle.summary.train_rmse))
        })
        .collect();

    let mut rows = Vec::with_capacity(trials);
    let mut best: Option<(usize, f64)> = None;
    for (i, (cfg, res)) in configs.iter().zip(results).enumerate() {
        let arch = cfg.resolved_architecture();
        let train = cfg.resolved_train();
        let (rmse, status) = match res {
            Ok(v) if v.is_finite() => (Some(v), "ok".to_string()),
            Ok(_) => (None, "diverged".to_string()),
            Err(Error::NonFiniteLoss { epoch, step }) => (None, format!("diverged at epoch {epoch} step {step}")),
            Err(e) => return Err(e),
        };
        if let Some(v) = rmse {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        rows.push(TrialRow {
            trial: i,
            trunk: arch.trunk,
            head: arch.head,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            max_epochs: train.max_epochs,
            validation_rmse: rmse,
            status,
        });
    }
    let (best_trial, _) = best.ok_or(Error::AllTrialsDiverged(trials))?;
    Ok(SearchOutcome {
        best: configs[best_trial].clone(),
        best_trial,
        trials: rows,
    })
}
