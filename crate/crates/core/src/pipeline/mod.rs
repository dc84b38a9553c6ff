pub mod bundle;
pub mod config;
pub mod model;
pub mod search;
pub mod split;

pub use bundle::{ModelBundle, TrainingSummary, BUNDLE_FORMAT_VERSION};
pub use config::{preset, FeatureConfig, PipelineConfig, SearchSpace};
pub use model::{
    input_columns, input_row, predict, prepare, train_model, train_prepared, Prediction, PredictionSet,
    PreparedData, PreparedRecord, TrainedModel,
};
pub use search::{hyper_search, SearchOutcome, TrialRow};
pub use split::{split_records, Boundary, Side, SplitManifest, SplitRule};

use serde::{Deserialize, Serialize};

use crate::propagation::Composition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Rsrp,
    Rsrq,
    Rssi,
}

impl MetricKind {
    pub fn composition(self) -> Composition {
        match self {
            MetricKind::Rsrp | MetricKind::Rssi => Composition::Residual,
            MetricKind::Rsrq => Composition::Direct,
        }
    }
}
