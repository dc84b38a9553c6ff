//! Radio-metric prediction for LTE coverage: 3D link geometry over building
//! and terrain data, a path-loss estimate, and a neural correction trained on
//! crowdsourced measurements.

pub mod error;
pub mod eval;
pub mod features;
pub mod geo_scene;
pub mod geohash;
pub mod io;
pub mod net;
pub mod pipeline;
pub mod propagation;
pub mod record;
pub mod synth;

pub use error::{Error, Result};
