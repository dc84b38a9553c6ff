use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdamW, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub loss_alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            max_epochs: 50,
            patience: 10,
            loss_alpha: super::DEFAULT_ALPHA_DB,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if !(self.loss_alpha > 0.0) {
            return Err(Error::Config("loss_alpha must be > 0".into()));
        }
        Ok(())
    }
}

/// Network-ready rows: inputs, the additive offset each output is composed
/// with, and the measured target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub offsets: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn push(&mut self, input: &[f64], offset: f64, target: f64) {
        debug_assert_eq!(input.len(), self.dim);
        self.inputs.extend_from_slice(input);
        self.offsets.push(offset);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn gather(&self, rows: &[usize]) -> Dataset {
        let mut out = Dataset::new(self.dim);
        for &r in rows {
            out.push(&self.inputs[r * self.dim..(r + 1) * self.dim], self.offsets[r], self.targets[r]);
        }
        out
    }

    pub fn predictions(&self, net: &Network) -> Result<Vec<f64>> {
        let out = net.forward_batch(&self.inputs)?;
        Ok(out.iter().zip(&self.offsets).map(|(y, o)| y + o).collect())
    }

    pub fn rmse(&self, net: &Network) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Empty("rmse over an empty dataset"));
        }
        let p = self.predictions(net)?;
        let mse = p
            .iter()
            .zip(&self.targets)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / p.len() as f64;
        Ok(mse.sqrt())
    }
}

/// One optimizer step on a batch; returns the batch loss before the update.
pub fn train_step(net: &mut Network, opt: &mut AdamW, batch: &Dataset, alpha: f64) -> Result<f64> {
    let (loss, grads) = net.loss_and_gradients(&batch.inputs, &batch.offsets, &batch.targets, alpha)?;
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss { epoch: 0, step: 0 });
    }
    opt.update(net.params_mut(), &grads);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_rmse: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Weights from the epoch with the lowest validation RMSE.
    pub network: Network,
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub history: Vec<EpochStats>,
}

/// Mini-batch training with early stopping on validation RMSE.
///
/// When `val` is empty the training RMSE drives early stopping instead.
pub fn fit(mut net: Network, train: &Dataset, val: &Dataset, config: &TrainConfig) -> Result<FitOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.dim != net.input_dim() || (!val.is_empty() && val.dim != net.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: train.dim,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = AdamW::new(net.params().len(), config.learning_rate, config.weight_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let score = |net: &Network| -> Result<f64> {
        if val.is_empty() {
            train.rmse(net)
        } else {
            val.rmse(net)
        }
    };
    let mut best = net.clone();
    let mut best_val = score(&net)?;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (step, rows) in order.chunks(config.batch_size).enumerate() {
            let batch = train.gather(rows);
            let loss = train_step(&mut net, &mut opt, &batch, config.loss_alpha).map_err(|e| match e {
                Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { epoch, step },
                other => other,
            })?;
            loss_sum += loss * rows.len() as f64;
        }
        let train_rmse = train.rmse(&net)?;
        let val_rmse = score(&net)?;
        if !val_rmse.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step: 0 });
        }
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_rmse,
            val_rmse,
        });
        log::debug!("epoch {epoch}: train rmse {train_rmse:.4}, val rmse {val_rmse:.4}");
        if val_rmse < best_val {
            best_val = val_rmse;
            best = net.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    Ok(FitOutcome {
        network: best,
        best_epoch,
        best_val_rmse: best_val,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Architecture;

    fn toy() -> Dataset {
        // y = 2 x0 - x1 + 3 with the second input standing in for the estimate
        let mut d = Dataset::new(2);
        for i in 0..64 {
            let x0 = (i as f64 / 32.0) - 1.0;
            let x1 = ((i * 7 % 64) as f64 / 32.0) - 1.0;
            d.push(&[x0, x1], 0.0, 2.0 * x0 - x1 + 3.0);
        }
        d
    }

    #[test]
    fn loss_non_increasing_on_tiny_dataset() {
        let data = toy();
        let mut net = Network::init(Architecture::new(vec![8], vec![1]).unwrap(), 2, 5).unwrap();
        let mut opt = AdamW::new(net.params().len(), 1e-3, 0.0);
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let loss = train_step(&mut net, &mut opt, &data, 5.0).unwrap();
            assert!(loss <= prev + 1e-12, "{loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn fit_is_deterministic_and_learns() {
        let data = toy();
        let cfg = TrainConfig {
            batch_size: 8,
            learning_rate: 1e-2,
            max_epochs: 200,
            patience: 200,
            ..TrainConfig::default()
        };
        let net = Network::init(Architecture::new(vec![8], vec![1]).unwrap(), 2, 5).unwrap();
        let a = fit(net.clone(), &data, &Dataset::new(2), &cfg).unwrap();
        let b = fit(net, &data, &Dataset::new(2), &cfg).unwrap();
        assert_eq!(a.network.params(), b.network.params());
        assert!(a.best_val_rmse < 0.2, "rmse {}", a.best_val_rmse);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut d = Dataset::new(1);
        d.push(&[1.0], 0.0, f64::NAN);
        d.push(&[0.0], 0.0, 1.0);
        let net = Network::init(Architecture::new(vec![], vec![1]).unwrap(), 1, 0).unwrap();
        let err = fit(net, &d, &Dataset::new(1), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
