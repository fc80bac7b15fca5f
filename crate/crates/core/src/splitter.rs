//! Node splitting: exemplar-pair selection, distance-based projection, Gini
//! impurity and threshold search.
//!
//! Split quality is compared exactly. For a binary split with per-class
//! counts `l` and `r`, the weighted Gini index is
//! `1 - (sum(l_c^2)/n_l + sum(r_c^2)/n_r) / n`, so within one node minimizing
//! it is the same as maximizing the rational `sum(l_c^2)/n_l + sum(r_c^2)/n_r`,
//! which [`SplitScore`] keeps as an integer fraction. Ties are then real ties,
//! not artifacts of rounding.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{has_variation, Dataset, FeatureColumn, FeatureValue};
use crate::distances::DistanceMeasure;
use crate::error::{Error, Result};
use crate::params::Hyperparams;
use crate::prepared::{PreparedColumn, PreparedDataset};
use crate::rng::Rng;

/// Redraws allowed when looking for a second exemplar with a different value.
pub const EXEMPLAR_REDRAWS: usize = 10;

/// Members per class used by the pairwise dispersion estimate.
pub const DISPERSION_SUBSAMPLE: usize = 20;

pub type ClassCounts = [usize; 2];

pub fn gini(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("node"));
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

pub fn weighted_gini(left: &[usize], right: &[usize]) -> Result<f64> {
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    if nl == 0 || nr == 0 {
        return Err(Error::Empty("child"));
    }
    Ok((nl as f64 * gini(left)? + nr as f64 * gini(right)?) / (nl + nr) as f64)
}

/// `sum(l_c^2)/n_l + sum(r_c^2)/n_r` as `num / den`; larger is purer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitScore {
    num: u128,
    den: u128,
    n: u128,
}

impl SplitScore {
    fn new(left: ClassCounts, right: ClassCounts) -> Self {
        let sq = |c: ClassCounts| (c[0] * c[0] + c[1] * c[1]) as u128;
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        SplitScore {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
            n: nl + nr,
        }
    }

    /// Weighted Gini index of the split.
    pub fn impurity(&self) -> f64 {
        let total = self.n * self.den;
        (total - self.num) as f64 / total as f64
    }

    /// Whether the split does not raise impurity above `parent`'s.
    fn within_parent(&self, parent: ClassCounts) -> bool {
        let sq = (parent[0] * parent[0] + parent[1] * parent[1]) as u128;
        self.num * self.n >= sq * self.den
    }
}

impl PartialEq for SplitScore {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SplitScore {}

impl PartialOrd for SplitScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SplitScore {
    /// Greater means lower impurity.
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ThresholdChoice {
    pub threshold: f64,
    pub score: SplitScore,
    pub balance: usize,
}

impl ThresholdChoice {
    /// Lower impurity first, then smaller balance; equal ones keep `self`.
    fn beats(&self, other: &ThresholdChoice) -> bool {
        match self.score.cmp(&other.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.balance < other.balance,
        }
    }
}

fn class_counts(rows: impl IntoIterator<Item = usize>, targets: &[usize]) -> ClassCounts {
    let mut c = [0; 2];
    for r in rows {
        c[targets[r]] += 1;
    }
    c
}

/// Scans every "projection <= thr" split, `thr` ranging over the distinct
/// projection values except the largest. `observe` sees each evaluated
/// split's score.
pub(crate) fn scan_thresholds(
    projection: &[f64],
    labels: &[usize],
    mut observe: impl FnMut(&SplitScore),
) -> Option<ThresholdChoice> {
    let n = projection.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| projection[a].total_cmp(&projection[b]).then(a.cmp(&b)));
    let total = class_counts(0..n, labels);
    let mut left = [0; 2];
    let mut best: Option<ThresholdChoice> = None;
    for k in 0..n.saturating_sub(1) {
        left[labels[order[k]]] += 1;
        let value = projection[order[k]];
        if value == projection[order[k + 1]] {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let score = SplitScore::new(left, right);
        observe(&score);
        let size = k + 1;
        let candidate = ThresholdChoice {
            threshold: value,
            score,
            balance: size.abs_diff(n - size),
        };
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
    }
    best
}

/// Best "projection <= thr" split as `(threshold, weighted gini, balance)`.
///
/// Impurity ties go to the more balanced split, remaining ties to the
/// smallest threshold. `None` when the projection has a single distinct value.
pub fn best_threshold(projection: &[f64], labels: &[usize]) -> Result<Option<(f64, f64, usize)>> {
    if projection.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: projection.len(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Config(format!("label {bad} is not a binary class index")));
    }
    Ok(scan_thresholds(projection, labels, |_| {})
        .map(|c| (c.threshold, c.score.impurity(), c.balance)))
}

/// `delta(x_q, x_i) - delta(x_p, x_i)` for every indexed example.
pub fn project(
    column: &FeatureColumn,
    measure: &DistanceMeasure,
    x_p: &FeatureValue,
    x_q: &FeatureValue,
    indices: &[usize],
) -> Result<Vec<f64>> {
    if measure.kind() != column.kind {
        return Err(Error::KindMismatch {
            measure: measure.name(),
            expected: measure.kind(),
            found: column.kind,
        });
    }
    let matrix = column.matrix.as_ref();
    indices
        .iter()
        .map(|&i| {
            let x = column.values.get(i).ok_or(Error::IndexOutOfBounds {
                index: i,
                len: column.len(),
            })?;
            Ok(measure.eval(x_q, x, matrix)? - measure.eval(x_p, x, matrix)?)
        })
        .collect()
}

/// A fitted node split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub exemplar_p: FeatureValue,
    pub exemplar_q: FeatureValue,
    pub threshold: f64,
    /// Weighted Gini index of the two children.
    pub impurity: f64,
    /// Absolute difference of the children's sizes.
    pub balance: usize,
}

/// Counters collected while growing trees.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub nodes: u64,
    pub leaves: u64,
    /// Calls to the split search on impure nodes.
    pub split_searches: u64,
    pub features_evaluated: u64,
    /// Largest number of features screened by a single search.
    pub max_features_per_search: u64,
    /// Exemplar pairs projected.
    pub candidates: u64,
    /// Pair slots that found no second exemplar with a different value.
    pub exhausted_pairs: u64,
    pub thresholds_evaluated: u64,
    /// Evaluated splits whose weighted child Gini exceeded the parent's.
    pub concavity_violations: u64,
}

impl BuildStats {
    pub fn merge(&mut self, other: &BuildStats) {
        self.nodes += other.nodes;
        self.leaves += other.leaves;
        self.split_searches += other.split_searches;
        self.features_evaluated += other.features_evaluated;
        self.max_features_per_search = self.max_features_per_search.max(other.max_features_per_search);
        self.candidates += other.candidates;
        self.exhausted_pairs += other.exhausted_pairs;
        self.thresholds_evaluated += other.thresholds_evaluated;
        self.concavity_violations += other.concavity_violations;
    }
}

/// Winning split of a node, with the projection that produced it.
pub(crate) struct NodeSplit {
    pub feature: usize,
    pub p_row: usize,
    pub q_row: usize,
    pub choice: ThresholdChoice,
    /// Aligned with the node's rows.
    pub projection: Vec<f64>,
}

impl NodeSplit {
    pub fn candidate(&self, prep: &PreparedDataset) -> SplitCandidate {
        let values = &prep.ds.columns[self.feature].values;
        SplitCandidate {
            feature_index: self.feature,
            exemplar_p: values[self.p_row].clone(),
            exemplar_q: values[self.q_row].clone(),
            threshold: self.choice.threshold,
            impurity: self.choice.score.impurity(),
            balance: self.choice.balance,
        }
    }
}

fn sample_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// Within-class spread of `members` on one feature: sample variance for
/// numeric columns, otherwise the mean squared pairwise distance over at most
/// [`DISPERSION_SUBSAMPLE`] members.
fn dispersion(col: &PreparedColumn, members: &[usize], rng: &mut Rng) -> f64 {
    if let Some(x) = col.scalars() {
        return sample_variance(members.iter().map(|&r| x[r]));
    }
    if let FeatureValue::Numeric(_) = col.column.values[members[0]] {
        let values = &col.column.values;
        return sample_variance(members.iter().map(|&r| match values[r] {
            FeatureValue::Numeric(x) => x,
            _ => unreachable!("numeric column"),
        }));
    }
    let picked: Vec<usize> = if members.len() > DISPERSION_SUBSAMPLE {
        index::sample(rng, members.len(), DISPERSION_SUBSAMPLE)
            .into_iter()
            .map(|i| members[i])
            .collect()
    } else {
        members.to_vec()
    };
    let k = picked.len();
    if k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            let d = col.distance(picked[a], picked[b]);
            total += d * d;
        }
    }
    total / (k * (k - 1) / 2) as f64
}

/// Class with the smaller dispersion (ties to class 0).
fn tighter_class(col: &PreparedColumn, by_class: &[Vec<usize>; 2], rng: &mut Rng) -> usize {
    let d0 = dispersion(col, &by_class[0], rng);
    let d1 = dispersion(col, &by_class[1], rng);
    usize::from(d1 < d0)
}

fn draw_pair(
    col: &PreparedColumn,
    c1: usize,
    by_class: &[Vec<usize>; 2],
    node_rows: &[usize],
    rng: &mut Rng,
) -> Option<(usize, usize)> {
    let own = &by_class[c1];
    let other = &by_class[1 - c1];
    let p = own[rng.random_range(0..own.len())];
    for _ in 0..EXEMPLAR_REDRAWS {
        let q = other[rng.random_range(0..other.len())];
        if !col.column.same_value(p, q, node_rows) {
            return Some((p, q));
        }
    }
    None
}

fn members_by_class(rows: &[usize], targets: &[usize]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for &r in rows {
        by_class[targets[r]].push(r);
    }
    by_class
}

fn project_rows(col: &PreparedColumn, p: usize, q: usize, rows: &[usize]) -> Vec<f64> {
    match col.scalars() {
        Some(x) => rows.iter().map(|&r| (x[q] - x[r]).abs() - (x[p] - x[r]).abs()).collect(),
        None => rows.iter().map(|&r| col.distance(q, r) - col.distance(p, r)).collect(),
    }
}

/// Resolved per-node search settings.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SearchParams {
    pub max_features: usize,
    pub max_pairs: usize,
}

impl SearchParams {
    pub fn from_hyperparams(hp: &Hyperparams, n_features: usize) -> Result<Self> {
        hp.validate(n_features)?;
        Ok(SearchParams {
            max_features: hp.max_features.resolve(n_features)?,
            max_pairs: hp.max_pairs,
        })
    }
}

/// Best split of the node holding `rows` (a multiset of dataset rows).
pub(crate) fn search_split(
    prep: &PreparedDataset,
    rows: &[usize],
    params: SearchParams,
    rng: &mut Rng,
    stats: &mut BuildStats,
) -> Option<NodeSplit> {
    let targets = &prep.ds.targets;
    let by_class = members_by_class(rows, targets);
    if by_class.iter().any(Vec::is_empty) {
        return None;
    }
    stats.split_searches += 1;
    let parent = [by_class[0].len(), by_class[1].len()];
    let eligible: Vec<usize> = (0..prep.columns.len())
        .filter(|&f| has_variation(prep.columns[f].column, rows).unwrap_or(false))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let amount = params.max_features.min(eligible.len());
    let chosen = index::sample(rng, eligible.len(), amount);
    stats.features_evaluated += amount as u64;
    stats.max_features_per_search = stats.max_features_per_search.max(amount as u64);
    let labels: Vec<usize> = rows.iter().map(|&r| targets[r]).collect();

    let mut best: Option<NodeSplit> = None;
    for slot in chosen {
        let feature = eligible[slot];
        let col = &prep.columns[feature];
        let c1 = tighter_class(col, &by_class, rng);
        for _ in 0..params.max_pairs {
            let Some((p_row, q_row)) = draw_pair(col, c1, &by_class, rows, rng) else {
                stats.exhausted_pairs += 1;
                continue;
            };
            stats.candidates += 1;
            let projection = project_rows(col, p_row, q_row, rows);
            let choice = scan_thresholds(&projection, &labels, |score| {
                stats.thresholds_evaluated += 1;
                if !score.within_parent(parent) {
                    stats.concavity_violations += 1;
                }
            });
            let Some(choice) = choice else { continue };
            if best.as_ref().is_none_or(|b| choice.beats(&b.choice)) {
                best = Some(NodeSplit {
                    feature,
                    p_row,
                    q_row,
                    choice,
                    projection,
                });
            }
        }
    }
    best
}

/// Exemplar pair `(p, q)` for one feature of the node holding `indices`:
/// `p` from the class with the smaller within-class dispersion, `q` from the
/// other class with a structurally different value. `None` when no such `q`
/// turns up within [`EXEMPLAR_REDRAWS`] draws.
pub fn select_exemplar_pair(
    column: &FeatureColumn,
    measure: &DistanceMeasure,
    indices: &[usize],
    labels: &[usize],
    rng: &mut Rng,
) -> Result<Option<(usize, usize)>> {
    if measure.kind() != column.kind {
        return Err(Error::KindMismatch {
            measure: measure.name(),
            expected: measure.kind(),
            found: column.kind,
        });
    }
    if labels.len() != column.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: column.len(),
        });
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= column.len()) {
        return Err(Error::IndexOutOfBounds {
            index: bad,
            len: column.len(),
        });
    }
    let col = PreparedColumn::with_measure(column, *measure, true)?;
    let by_class = members_by_class(indices, labels);
    if by_class.iter().any(Vec::is_empty) {
        return Ok(None);
    }
    let c1 = tighter_class(&col, &by_class, rng);
    Ok(draw_pair(&col, c1, &by_class, indices, rng))
}

/// Best split over `max_features` sampled features of the node holding
/// `indices`, or `None` when no feature yields a valid threshold.
pub fn find_best_split(
    ds: &Dataset,
    indices: &[usize],
    hp: &Hyperparams,
    rng: &mut Rng,
) -> Result<Option<SplitCandidate>> {
    let prep = PreparedDataset::new(ds, true)?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= ds.n_examples()) {
        return Err(Error::IndexOutOfBounds {
            index: bad,
            len: ds.n_examples(),
        });
    }
    let params = SearchParams::from_hyperparams(hp, ds.n_features())?;
    let mut stats = BuildStats::default();
    Ok(search_split(&prep, indices, params, rng, &mut stats).map(|s| s.candidate(&prep)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ItemSet, ValueKind};
    use crate::distances::resolve;
    use crate::rng::substream;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[2, 2]).unwrap(), 0.5);
        assert_eq!(gini(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[1, 3]).unwrap(), 0.375);
        assert!(gini(&[0, 0]).is_err());
    }

    #[test]
    fn weighted_gini_examples() {
        assert_eq!(weighted_gini(&[2, 0], &[0, 3]).unwrap(), 0.0);
        assert_eq!(weighted_gini(&[1, 1], &[1, 1]).unwrap(), 0.5);
        assert!((weighted_gini(&[2, 0], &[1, 2]).unwrap() - 4.0 / 15.0).abs() < 1e-15);
        assert!(weighted_gini(&[0, 0], &[1, 2]).is_err());
    }

    #[test]
    fn score_matches_float_gini() {
        for l in [[2, 0], [1, 1], [3, 5], [0, 7]] {
            for r in [[0, 3], [1, 2], [4, 4], [9, 1]] {
                let s = SplitScore::new(l, r);
                assert!((s.impurity() - weighted_gini(&l, &r).unwrap()).abs() < 1e-15);
            }
        }
        assert!(SplitScore::new([2, 0], [0, 3]) > SplitScore::new([2, 0], [1, 2]));
        // 1/3 reached by two different count patterns is an exact tie
        assert_eq!(SplitScore::new([1, 0], [1, 2]), SplitScore::new([2, 1], [0, 1]));
    }

    #[test]
    fn threshold_examples() {
        let t = best_threshold(&[-2.0, -1.0, 3.0, 4.0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(t, Some((-1.0, 0.0, 0)));
        assert_eq!(best_threshold(&[1.0, 1.0, 1.0], &[0, 1, 0]).unwrap(), None);
        let (thr, imp, bal) = best_threshold(&[0.0, 1.0, 2.0, 3.0], &[0, 1, 0, 1]).unwrap().unwrap();
        assert_eq!((thr, bal), (0.0, 2));
        assert!((imp - 1.0 / 3.0).abs() < 1e-15);
        assert!(best_threshold(&[0.0, 1.0], &[0]).is_err());
    }

    #[test]
    fn balance_breaks_impurity_ties() {
        // sizes 1, 6 and 8 on the left all give 4/9; the 6/3 split is most balanced
        let proj: Vec<f64> = (0..9).map(f64::from).collect();
        let labels = [0, 1, 0, 1, 0, 0, 1, 1, 0];
        let (thr, imp, bal) = best_threshold(&proj, &labels).unwrap().unwrap();
        assert_eq!((thr, bal), (5.0, 3));
        assert!((imp - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let col = FeatureColumn::numeric("x", [3.0, 0.0, 10.0]);
        let m = resolve(ValueKind::Numeric, "euclidean").unwrap();
        let (xp, xq) = (FeatureValue::Numeric(0.0), FeatureValue::Numeric(10.0));
        assert_eq!(project(&col, &m, &xp, &xq, &[0, 1, 2]).unwrap(), vec![4.0, 10.0, -10.0]);
        let dtw = resolve(ValueKind::TimeSeries, "dtw").unwrap();
        assert!(project(&col, &dtw, &xp, &xq, &[0]).is_err());
        assert!(project(&col, &m, &xp, &xq, &[3]).is_err());
    }

    #[test]
    fn pair_from_tighter_class() {
        // class 0 values {5, 5}, class 1 values {1, 9}
        let col = FeatureColumn::numeric("x", [5.0, 1.0, 5.0, 9.0]);
        let m = resolve(ValueKind::Numeric, "euclidean").unwrap();
        let labels = [0, 1, 0, 1];
        for seed in 0..20 {
            let mut rng = substream(seed, &[]);
            let (p, q) = select_exemplar_pair(&col, &m, &[0, 1, 2, 3], &labels, &mut rng).unwrap().unwrap();
            assert!(p == 0 || p == 2);
            assert!(q == 1 || q == 3);
        }
    }

    #[test]
    fn pair_exhaustion() {
        // every cross-class candidate shares the exemplar's value
        let col = FeatureColumn::numeric("x", [5.0, 5.0, 5.0, 1.0]);
        let m = resolve(ValueKind::Numeric, "euclidean").unwrap();
        let labels = [0, 1, 0, 1];
        let mut rng = substream(1, &[]);
        assert_eq!(select_exemplar_pair(&col, &m, &[0, 1, 2], &labels, &mut rng).unwrap(), None);
        let dtw = resolve(ValueKind::TimeSeries, "dtw").unwrap();
        assert!(select_exemplar_pair(&col, &dtw, &[0, 1], &labels, &mut rng).is_err());
    }

    #[test]
    fn split_on_separable_feature() {
        let ds = Dataset::new(vec![FeatureColumn::numeric("x", [1.0, 2.0, 3.0, 4.0])], &["a", "a", "b", "b"]).unwrap();
        let hp = Hyperparams {
            max_features: crate::params::MaxFeatures::Count(1),
            ..Hyperparams::default()
        };
        for seed in 0..10 {
            let s = find_best_split(&ds, &[0, 1, 2, 3], &hp, &mut substream(seed, &[])).unwrap().unwrap();
            assert_eq!(s.impurity, 0.0);
            assert_eq!(s.balance, 0);
        }
    }

    #[test]
    fn separating_feature_wins_over_noise() {
        let noise = FeatureColumn::numeric("noise", [3.0, 1.0, 1.0, 3.0, 2.0, 2.0]);
        let signal = FeatureColumn::numeric("signal", [1.0, 2.0, 3.0, 7.0, 8.0, 9.0]);
        let ds = Dataset::new(vec![noise, signal], &["a", "a", "a", "b", "b", "b"]).unwrap();
        let hp = Hyperparams {
            max_features: crate::params::MaxFeatures::Count(2),
            ..Hyperparams::default()
        };
        for seed in 0..10 {
            let s = find_best_split(&ds, &[0, 1, 2, 3, 4, 5], &hp, &mut substream(seed, &[])).unwrap().unwrap();
            assert_eq!((s.feature_index, s.impurity), (1, 0.0));
        }
    }

    #[test]
    fn no_variation_means_no_split() {
        let ds = Dataset::new(vec![FeatureColumn::numeric("x", [1.0, 1.0, 1.0])], &["a", "b", "a"]).unwrap();
        let split = find_best_split(&ds, &[0, 1, 2], &Hyperparams::default(), &mut substream(0, &[])).unwrap();
        assert!(split.is_none());
    }

    #[test]
    fn setseq_split() {
        let seq = |s: &[&[&str]]| FeatureValue::SetSequence(s.iter().map(|x| ItemSet::new(x.iter().copied())).collect());
        let values = vec![
            seq(&[&["a"], &["b"]]),
            seq(&[&["a"], &["b"], &["c"]]),
            seq(&[&["x"], &["y"]]),
            seq(&[&["x"], &["y"], &["z"]]),
        ];
        let col = FeatureColumn::new("s", ValueKind::SetSeq, "editjaccard", values);
        let ds = Dataset::new(vec![col], &["0", "0", "1", "1"]).unwrap();
        let s = find_best_split(&ds, &[0, 1, 2, 3], &Hyperparams::default(), &mut substream(3, &[]))
            .unwrap()
            .unwrap();
        assert_eq!(s.impurity, 0.0);
    }
}
