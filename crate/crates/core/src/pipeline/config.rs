use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::SplitRule;
use super::MetricKind;
use crate::error::{Error, Result};
use crate::features::FeatureOptions;
use crate::net::{Architecture, TrainConfig};
use crate::propagation::{PathLossModel, DEFAULT_N_RB};
use crate::synth::SynthConfig;

/// Tuned architecture and optimizer settings per metric.
pub fn preset(metric: MetricKind) -> (Architecture, TrainConfig) {
    let (trunk, head, batch_size, learning_rate, weight_decay) = match metric {
        MetricKind::Rsrp => (vec![64; 6], vec![64, 256, 10, 1], 69, 3.03e-2, 2.07e-4),
        MetricKind::Rsrq => (vec![64; 6], vec![64, 32, 10, 1], 55, 6.06e-6, 3.8e-3),
        MetricKind::Rssi => (vec![16; 5], vec![16, 512, 10, 1], 52, 6.29e-4, 3.17e-7),
    };
    let arch = Architecture::new(trunk, head).expect("preset architectures are valid");
    let train = TrainConfig {
        batch_size,
        learning_rate,
        weight_decay,
        max_epochs: 100,
        ..TrainConfig::default()
    };
    (arch, train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Append day-of-week and hour-of-day; defaults to on for RSRQ and RSSI.
    pub temporal: Option<bool>,
    #[serde(default)]
    pub utc_offset_minutes: i32,
    /// Z-score the appended estimate like any other input.
    #[serde(default = "yes")]
    pub standardize_beta: bool,
}

fn yes() -> bool {
    true
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            temporal: None,
            utc_offset_minutes: 0,
            standardize_beta: true,
        }
    }
}

/// Bounds sampled by the hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub batch_size: (usize, usize),
    pub trunk_depth: (usize, usize),
    pub widths: Vec<usize>,
    pub head_templates: Vec<Vec<usize>>,
    pub learning_rate: (f64, f64),
    pub weight_decay: (f64, f64),
    pub max_epochs: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            batch_size: (32, 128),
            trunk_depth: (2, 6),
            widths: vec![16, 32, 64],
            head_templates: vec![
                vec![64, 256, 10, 1],
                vec![64, 32, 10, 1],
                vec![16, 512, 10, 1],
                vec![32, 10, 1],
            ],
            learning_rate: (1e-5, 3e-2),
            weight_decay: (1e-7, 1e-2),
            max_epochs: (10, 60),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, lo: f64, hi: f64, positive: bool| {
            if lo > hi || (positive && !(lo > 0.0)) {
                Err(Error::Config(format!("search range {name} = ({lo}, {hi}) is invalid")))
            } else {
                Ok(())
            }
        };
        ordered("batch_size", self.batch_size.0 as f64, self.batch_size.1 as f64, true)?;
        ordered("trunk_depth", self.trunk_depth.0 as f64, self.trunk_depth.1 as f64, false)?;
        ordered("learning_rate", self.learning_rate.0, self.learning_rate.1, true)?;
        ordered("weight_decay", self.weight_decay.0, self.weight_decay.1, true)?;
        ordered("max_epochs", self.max_epochs.0 as f64, self.max_epochs.1 as f64, true)?;
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("search widths must be non-empty and positive".into()));
        }
        if self.head_templates.is_empty() {
            return Err(Error::Config("search needs at least one head template".into()));
        }
        for h in &self.head_templates {
            Architecture::new(vec![], h.clone()).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub metric: MetricKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_rb")]
    pub n_rb: u32,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub path_loss: PathLossModel,
    /// Falls back to the metric preset.
    pub architecture: Option<Architecture>,
    /// Falls back to the metric preset.
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub split: SplitRule,
    /// Start the output bias at the mean training residual.
    #[serde(default = "yes")]
    pub center_output: bool,
    #[serde(default)]
    pub search: SearchSpace,
    /// Synthetic-world settings used by data generation.
    pub synth: Option<SynthConfig>,
}

fn default_n_rb() -> u32 {
    DEFAULT_N_RB
}

impl PipelineConfig {
    pub fn new(metric: MetricKind) -> Self {
        Self {
            metric,
            seed: 0,
            n_rb: DEFAULT_N_RB,
            features: FeatureConfig::default(),
            path_loss: PathLossModel::default(),
            architecture: None,
            train: None,
            split: SplitRule::default(),
            center_output: true,
            search: SearchSpace::default(),
            synth: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rb == 0 {
            return Err(Error::Config("n_rb must be >= 1".into()));
        }
        if let Some(a) = &self.architecture {
            a.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.resolved_train().validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        self.search.validate()
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            temporal: self
                .features
                .temporal
                .unwrap_or(self.metric != MetricKind::Rsrp),
            utc_offset_minutes: self.features.utc_offset_minutes,
        }
    }

    pub fn resolved_architecture(&self) -> Architecture {
        self.architecture.clone().unwrap_or_else(|| preset(self.metric).0)
    }

    /// Training settings with the run seed applied.
    pub fn resolved_train(&self) -> TrainConfig {
        let mut t = self.train.clone().unwrap_or_else(|| preset(self.metric).1);
        t.seed = self.seed;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_tuned_values() {
        let (a, t) = preset(MetricKind::Rsrp);
        assert_eq!(a.trunk, vec![64; 6]);
        assert_eq!(a.head, vec![64, 256, 10, 1]);
        assert_eq!((t.batch_size, t.learning_rate, t.weight_decay), (69, 3.03e-2, 2.07e-4));
        let (a, t) = preset(MetricKind::Rsrq);
        assert_eq!(a.head, vec![64, 32, 10, 1]);
        assert_eq!((t.batch_size, t.learning_rate, t.weight_decay), (55, 6.06e-6, 3.8e-3));
        let (a, t) = preset(MetricKind::Rssi);
        assert_eq!(a.trunk, vec![16; 5]);
        assert_eq!(a.head, vec![16, 512, 10, 1]);
        assert_eq!((t.batch_size, t.learning_rate, t.weight_decay), (52, 6.29e-4, 3.17e-7));
    }

    #[test]
    fn minimal_toml() {
        let cfg = PipelineConfig::from_toml_str("metric = \"rsrq\"\nseed = 7\n").unwrap();
        assert_eq!(cfg.metric, MetricKind::Rsrq);
        assert!(cfg.feature_options().temporal);
        assert_eq!(cfg.resolved_train().seed, 7);
        assert_eq!(cfg.n_rb, 100);
    }

    #[test]
    fn full_round_trip() {
        let text = r#"
metric = "rssi"
seed = 3
center_output = false

[features]
temporal = false
standardize_beta = false

[path_loss]
kind = "fspl_only"

[architecture]
trunk = [8, 8]
head = [4, 1]
negative_slope = 0.01

[train]
batch_size = 16
learning_rate = 0.001
weight_decay = 0.0
max_epochs = 5
patience = 2
loss_alpha = 5.0
seed = 0

[synth]
samples = 500
lots_x = 8

[split]
holdout = ["dpz833"]
boundary = { kind = "polyline", vertices = [[-79.4, 43.6], [-79.4, 43.7]], train_side = "left" }
"#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.path_loss, PathLossModel::FsplOnly);
        assert_eq!(cfg.resolved_architecture().trunk, vec![8, 8]);
        assert_eq!(cfg.synth.as_ref().unwrap().samples, 500);
        let again = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_configs() {
        assert!(PipelineConfig::from_toml_str("metric = \"snr\"").is_err());
        assert!(PipelineConfig::from_toml_str("metric = \"rsrp\"\nbogus = 1").is_err());
        assert!(PipelineConfig::from_toml_str("metric = \"rsrp\"\nn_rb = 0").is_err());
        let bad_head = "metric = \"rsrp\"\n[architecture]\ntrunk = [4]\nhead = [3]\nnegative_slope = 0.01\n";
        assert!(PipelineConfig::from_toml_str(bad_head).is_err());
    }
}
