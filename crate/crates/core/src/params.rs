use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 42;

/// Number of features screened at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// Fraction of all features, rounded up.
    Fraction(f64),
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(&self, n_features: usize) -> Result<usize> {
        if n_features == 0 {
            return Err(Error::Config("dataset has no features".into()));
        }
        match *self {
            MaxFeatures::Fraction(f) if f > 0.0 && f <= 1.0 => {
                // slack absorbs representation error, e.g. 0.3 * 10
                let k = (f * n_features as f64 - 1e-9).ceil() as usize;
                Ok(k.clamp(1, n_features))
            }
            MaxFeatures::Fraction(f) => Err(Error::Config(format!("max_features fraction {f} outside (0, 1]"))),
            MaxFeatures::Count(k) if (1..=n_features).contains(&k) => Ok(k),
            MaxFeatures::Count(k) => Err(Error::Config(format!(
                "max_features {k} outside [1, {n_features}]"
            ))),
        }
    }
}

impl Default for MaxFeatures {
    fn default() -> Self {
        MaxFeatures::Fraction(0.5)
    }
}

/// Pre-pruning rules; a node becomes a leaf as soon as any of them fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_trees: usize,
    pub max_features: MaxFeatures,
    pub max_pairs: usize,
    pub stopping: StoppingRule,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_trees: 100,
            max_features: MaxFeatures::default(),
            max_pairs: 1,
            stopping: StoppingRule::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.max_trees < 1 {
            return Err(Error::Config("max_trees must be at least 1".into()));
        }
        if self.max_pairs < 1 {
            return Err(Error::Config("max_pairs must be at least 1".into()));
        }
        self.max_features.resolve(n_features)?;
        self.stopping.validate()
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Hyperparams { seed, ..self }
    }

    pub fn with_trees(self, max_trees: usize) -> Self {
        Hyperparams { max_trees, ..self }
    }
}
