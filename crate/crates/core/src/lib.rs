//! Random Similarity Forests: tree ensembles whose nodes split on a
//! distance-based projection of a single feature, for datasets that mix
//! numbers, sequences of sets, time series, graphs and precomputed distances.

pub mod data;
pub mod distances;
pub mod error;
pub mod eval;
pub mod forest;
pub mod manifest;
pub mod params;
mod prepared;
pub mod rng;
pub mod splitter;
pub mod synth;
pub mod tree;

pub use data::{Dataset, DistanceMatrix, FeatureColumn, FeatureValue, Graph, ItemSet, ValueKind};
pub use error::{Error, Result};
pub use eval::{auc, repeated_cv, EvalReport};
pub use forest::{fit, fit_with, FitOptions, ForestModel};
pub use params::{Hyperparams, MaxFeatures, StoppingRule};
pub use manifest::{load_manifest, write_manifest};
pub use synth::{bag_of_items, generate, Mode, SynthConfig};
