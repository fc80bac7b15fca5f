//! Bagged ensembles of Random Similarity Trees.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DistanceMatrix, FeatureColumn, FeatureValue, ValueKind};
use crate::distances::{self, DistanceMeasure};
use crate::error::{Error, Result};
use crate::params::Hyperparams;
use crate::prepared::PreparedDataset;
use crate::rng::{substream, Rng};
use crate::splitter::{BuildStats, SearchParams};
use crate::tree::{grow, normalize, GrownTree, RandomSimilarityTree};

pub const MODEL_VERSION: u64 = 1;

/// `n` uniform draws with replacement from `0..n`.
pub fn bootstrap_sample(n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Empty("bootstrap population"));
    }
    Ok((0..n).map(|_| rng.random_range(0..n)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// Training threads; `None` lets the thread pool decide.
    pub workers: Option<usize>,
    /// Skip distance dispatch on numeric euclidean columns.
    pub numeric_fast_path: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            workers: None,
            numeric_fast_path: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ValueKind,
    pub measure: String,
    /// Row count of the training matrix, for precomputed columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_size: Option<usize>,
}

impl ColumnMeta {
    fn of(c: &FeatureColumn) -> Self {
        ColumnMeta {
            name: c.name.clone(),
            kind: c.kind,
            measure: c.measure.clone(),
            matrix_size: c.matrix.as_ref().map(DistanceMatrix::size),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub hyperparams: Hyperparams,
    /// Class labels in index order; index 1 is the positive class.
    pub classes: Vec<String>,
    pub columns: Vec<ColumnMeta>,
    pub trees: Vec<RandomSimilarityTree>,
}

pub(crate) fn fit_rows(
    prep: &PreparedDataset,
    rows: &[usize],
    hp: &Hyperparams,
    workers: Option<usize>,
) -> Result<(Vec<GrownTree>, BuildStats)> {
    let params = SearchParams::from_hyperparams(hp, prep.ds.n_features())?;
    let build = |t: usize| {
        let mut rng = substream(hp.seed, &[t as u64]);
        let sample = bootstrap_sample(rows.len(), &mut rng)?;
        let sample = sample.into_iter().map(|i| rows[i]).collect();
        let mut stats = BuildStats::default();
        let tree = grow(prep, sample, params, &hp.stopping, &mut rng, &mut stats);
        Ok((tree, stats))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let built: Vec<Result<(GrownTree, BuildStats)>> = pool.install(|| (0..hp.max_trees).into_par_iter().map(build).collect());
    let mut trees = Vec::with_capacity(built.len());
    let mut stats = BuildStats::default();
    for b in built {
        let (tree, s) = b?;
        stats.merge(&s);
        trees.push(tree);
    }
    Ok((trees, stats))
}

/// Mean of the trees' leaf frequencies for a row of the prepared dataset.
pub(crate) fn predict_prepared(trees: &[GrownTree], prep: &PreparedDataset, row: usize) -> [f64; 2] {
    let mut sum = [0.0; 2];
    for t in trees {
        let p = t.predict_row(prep, row);
        sum[0] += p[0];
        sum[1] += p[1];
    }
    let k = trees.len() as f64;
    [sum[0] / k, sum[1] / k]
}

pub fn fit(ds: &Dataset, hp: &Hyperparams) -> Result<ForestModel> {
    fit_with(ds, hp, &FitOptions::default()).map(|(m, _)| m)
}

/// Like [`fit`], also returning counters gathered while growing.
pub fn fit_with(ds: &Dataset, hp: &Hyperparams, opts: &FitOptions) -> Result<(ForestModel, BuildStats)> {
    let prep = PreparedDataset::new(ds, opts.numeric_fast_path)?;
    let rows: Vec<usize> = (0..ds.n_examples()).collect();
    let (trees, stats) = fit_rows(&prep, &rows, hp, opts.workers)?;
    let model = ForestModel {
        hyperparams: *hp,
        classes: ds.class_values.clone(),
        columns: ds.columns.iter().map(ColumnMeta::of).collect(),
        trees: trees.into_iter().map(|t| t.tree).collect(),
    };
    Ok((model, stats))
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    version: u64,
    hyperparams: &'a Hyperparams,
    classes: &'a [String],
    columns: &'a [ColumnMeta],
    trees: &'a [RandomSimilarityTree],
}

#[derive(Deserialize)]
struct ModelFile {
    hyperparams: Hyperparams,
    classes: Vec<String>,
    columns: Vec<ColumnMeta>,
    trees: Vec<RandomSimilarityTree>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

impl ForestModel {
    fn measures(&self) -> Result<Vec<DistanceMeasure>> {
        self.columns.iter().map(|c| distances::resolve(c.kind, &c.measure)).collect()
    }

    /// Checks that `columns` line up with the training columns.
    fn check_columns(&self, columns: &[FeatureColumn]) -> Result<usize> {
        if columns.len() != self.columns.len() {
            return Err(Error::Incompatible(format!(
                "model has {} columns, input has {}",
                self.columns.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, FeatureColumn::len);
        for (meta, col) in self.columns.iter().zip(columns) {
            if meta.name != col.name || meta.kind != col.kind || meta.measure != col.measure {
                return Err(Error::Incompatible(format!(
                    "column '{}' ({} / {}) does not match model column '{}' ({} / {})",
                    col.name, col.kind, col.measure, meta.name, meta.kind, meta.measure
                )));
            }
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    left: col.len(),
                    right: n,
                });
            }
            if let Some(size) = meta.matrix_size {
                let m = col.matrix.as_ref().ok_or_else(|| Error::MissingMatrix(col.name.clone()))?;
                if m.size() != size {
                    return Err(Error::Incompatible(format!(
                        "column '{}': precomputed columns can only score examples of the training matrix \
                         ({size} rows), got a {}-row matrix",
                        col.name,
                        m.size()
                    )));
                }
            }
        }
        Ok(n)
    }

    /// Class probabilities per example, columns laid out as at training time.
    pub fn predict_proba(&self, columns: &[FeatureColumn]) -> Result<Vec<[f64; 2]>> {
        let n = self.check_columns(columns)?;
        let measures = self.measures()?;
        let matrices: Vec<Option<&DistanceMatrix>> = columns.iter().map(|c| c.matrix.as_ref()).collect();
        (0..n)
            .map(|i| {
                let example: Vec<&FeatureValue> = columns.iter().map(|c| &c.values[i]).collect();
                let mut sum = [0.0; 2];
                for tree in &self.trees {
                    let counts = tree.route(|split| {
                        let f = split.feature_index;
                        let m = &measures[f];
                        Ok(m.eval(&split.exemplar_q, example[f], matrices[f])?
                            - m.eval(&split.exemplar_p, example[f], matrices[f])?)
                    })?;
                    let p = normalize(counts);
                    sum[0] += p[0];
                    sum[1] += p[1];
                }
                let k = self.trees.len() as f64;
                Ok([sum[0] / k, sum[1] / k])
            })
            .collect()
    }

    /// Most probable class per example; exact ties go to the first class.
    pub fn predict(&self, columns: &[FeatureColumn]) -> Result<Vec<String>> {
        Ok(self
            .predict_proba(columns)?
            .into_iter()
            .map(|p| self.classes[usize::from(p[1] > p[0])].clone())
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFileRef {
            version: MODEL_VERSION,
            hyperparams: &self.hyperparams,
            classes: &self.classes,
            columns: &self.columns,
            trees: &self.trees,
        };
        serde_json::to_string(&file).map_err(|e| Error::Config(format!("serializing model: {e}")))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let format = |e: serde_json::Error| Error::Format {
            path: origin.to_path_buf(),
            message: e.to_string(),
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(format)?;
        if probe.version != MODEL_VERSION {
            return Err(Error::Version {
                found: probe.version,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text).map_err(format)?;
        if file.classes.len() != 2 {
            return Err(Error::Incompatible(format!("model has {} classes", file.classes.len())));
        }
        if file.trees.is_empty() {
            return Err(Error::Incompatible("model has no trees".into()));
        }
        for c in &file.columns {
            distances::resolve(c.kind, &c.measure)?;
        }
        for t in &file.trees {
            t.check(file.columns.len())?;
        }
        Ok(ForestModel {
            hyperparams: file.hyperparams,
            classes: file.classes,
            columns: file.columns,
            trees: file.trees,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
