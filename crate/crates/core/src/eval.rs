//! Repeated stratified cross-validation scored by AUC.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_rows, predict_prepared, FitOptions};
use crate::params::Hyperparams;
use crate::prepared::PreparedDataset;
use crate::rng::{derive_seed, substream, Rng};
use crate::splitter::BuildStats;

/// Area under the ROC curve for `scores` of examples labelled 0 (negative)
/// or 1 (positive): the share of positive/negative pairs ranked correctly,
/// ties counting one half.
pub fn auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Config(format!("label {bad} is not a binary class index")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Empty("class in AUC input"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives keeps averaged tie ranks integral
    let mut rank_sum2: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u64;
        // ranks start + 1 ..= end average to (start + end + 1) / 2
        rank_sum2 += positives * (start + end + 1) as u64;
        start = end;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Splits example indices into `k` folds so that each class is spread as
/// evenly as possible. Folds are returned with indices in ascending order.
pub fn stratified_kfold(labels: &[usize], k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::Config(format!(
                "class {c} has {} examples, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(rng);
        for (j, &m) in members.iter().enumerate() {
            folds[(offset + j) % k].push(m);
        }
        offset += members.len();
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Fold assignments of every repetition of a repeated CV run.
pub fn cv_plan(labels: &[usize], reps: usize, k: usize, seed: u64) -> Result<Vec<Vec<Vec<usize>>>> {
    (0..reps)
        .map(|r| stratified_kfold(labels, k, &mut substream(seed, &[r as u64])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub rep: usize,
    pub fold: usize,
    pub auc: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Free-form dataset label used when rendering.
    pub name: String,
    pub hyperparams: Hyperparams,
    pub reps: usize,
    pub folds: usize,
    pub seed: u64,
    /// Class scored as positive (the larger label).
    pub positive_class: String,
    pub fold_results: Vec<FoldResult>,
    pub mean_auc: f64,
    /// Sample standard deviation over folds.
    pub std_auc: f64,
}

pub fn repeated_cv(ds: &Dataset, hp: &Hyperparams, reps: usize, k: usize, seed: u64) -> Result<EvalReport> {
    repeated_cv_with(ds, hp, reps, k, seed, &FitOptions::default()).map(|(r, _)| r)
}

/// [`repeated_cv`] with explicit fit options, also returning the merged
/// build counters of every fold's forest.
pub fn repeated_cv_with(
    ds: &Dataset,
    hp: &Hyperparams,
    reps: usize,
    k: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<(EvalReport, BuildStats)> {
    if reps < 1 {
        return Err(Error::Config("need at least one repetition".into()));
    }
    let prep = PreparedDataset::new(ds, opts.numeric_fast_path)?;
    hp.validate(ds.n_features())?;
    let plan = cv_plan(&ds.targets, reps, k, seed)?;
    let mut results = Vec::with_capacity(reps * k);
    let mut stats = BuildStats::default();
    for (r, folds) in plan.iter().enumerate() {
        for (f, test) in folds.iter().enumerate() {
            let mut in_test = vec![false; ds.n_examples()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..ds.n_examples()).filter(|&i| !in_test[i]).collect();
            let fold_hp = hp.with_seed(derive_seed(seed, &[r as u64, f as u64]));
            let (trees, s) = fit_rows(&prep, &train, &fold_hp, opts.workers)?;
            stats.merge(&s);
            let scores: Vec<f64> = test.iter().map(|&i| predict_prepared(&trees, &prep, i)[1]).collect();
            let labels: Vec<usize> = test.iter().map(|&i| ds.targets[i]).collect();
            results.push(FoldResult {
                rep: r,
                fold: f,
                auc: auc(&scores, &labels)?,
                n_train: train.len(),
                n_test: test.len(),
            });
        }
    }
    let n = results.len() as f64;
    let mean = results.iter().map(|f| f.auc).sum::<f64>() / n;
    let var = results.iter().map(|f| (f.auc - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let report = EvalReport {
        name: String::new(),
        hyperparams: *hp,
        reps,
        folds: k,
        seed,
        positive_class: ds.class_values[1].clone(),
        fold_results: results,
        mean_auc: mean,
        std_auc: var.sqrt(),
    };
    Ok((report, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureColumn;

    fn brute_auc(scores: &[f64], labels: &[usize]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.3, 0.6, 0.1], &[1, 0, 0, 1]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn auc_matches_pair_counting_with_ties() {
        let scores = [0.5, 0.2, 0.5, 0.9, 0.2, 0.2, 0.7];
        let labels = [1, 0, 0, 1, 1, 0, 0];
        assert!((auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() < 1e-15);
    }

    #[test]
    fn folds_examples() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let folds = stratified_kfold(&labels, 2, &mut substream(4, &[])).unwrap();
        assert_eq!(folds.len(), 2);
        for f in &folds {
            let pos = f.iter().filter(|&&i| labels[i] == 1).count();
            let neg = f.len() - pos;
            assert!(pos.abs_diff(neg) <= 1 && (pos == 2 || pos == 3));
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(stratified_kfold(&labels, 2, &mut substream(4, &[])).unwrap(), folds);
        assert!(stratified_kfold(&[0, 0, 0, 1, 1], 3, &mut substream(4, &[])).is_err());
    }

    #[test]
    fn cv_on_separable_data() {
        let values: Vec<f64> = (0..40).map(|i| if i < 20 { i as f64 } else { 100.0 + i as f64 }).collect();
        let labels: Vec<&str> = (0..40).map(|i| if i < 20 { "a" } else { "b" }).collect();
        let ds = Dataset::new(vec![FeatureColumn::numeric("x", values)], &labels).unwrap();
        let hp = Hyperparams::default().with_trees(10);
        let report = repeated_cv(&ds, &hp, 3, 2, 9).unwrap();
        assert_eq!(report.fold_results.len(), 6);
        assert!(report.mean_auc >= 0.99);
        assert_eq!(report.positive_class, "b");
        assert_eq!(repeated_cv(&ds, &hp, 3, 2, 9).unwrap(), report);
        for f in &report.fold_results {
            assert_eq!(f.n_train + f.n_test, 40);
        }
    }
}
