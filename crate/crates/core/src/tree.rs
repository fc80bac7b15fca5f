//! A single Random Similarity Tree, stored as a flat arena of nodes.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureValue};
use crate::distances::DistanceMeasure;
use crate::error::{Error, Result};
use crate::params::{Hyperparams, StoppingRule};
use crate::prepared::PreparedDataset;
use crate::rng::Rng;
use crate::splitter::{search_split, BuildStats, ClassCounts, SearchParams, SplitCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Internal {
        split: SplitCandidate,
        /// Arena index of the "projection <= threshold" child.
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: ClassCounts,
        depth: usize,
    },
}

/// Nodes in depth-first order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSimilarityTree {
    nodes: Vec<TreeNode>,
}

impl RandomSimilarityTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&ClassCounts, usize)> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { class_counts, depth } => Some((class_counts, *depth)),
            TreeNode::Internal { .. } => None,
        })
    }

    pub fn splits(&self) -> impl Iterator<Item = &SplitCandidate> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Internal { split, .. } => Some(split),
            TreeNode::Leaf { .. } => None,
        })
    }

    #[cfg(test)]
    pub(crate) fn leaf_only(class_counts: ClassCounts) -> Self {
        RandomSimilarityTree {
            nodes: vec![TreeNode::Leaf { class_counts, depth: 0 }],
        }
    }

    pub fn depth(&self) -> usize {
        self.leaves().map(|(_, d)| d).max().unwrap_or(0)
    }

    /// Index of the leaf reached by an example, given a routing function that
    /// returns the projection of the example at an internal node.
    pub(crate) fn route(&self, mut projection: impl FnMut(&SplitCandidate) -> Result<f64>) -> Result<&ClassCounts> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { class_counts, .. } => return Ok(class_counts),
                TreeNode::Internal { split, left, right } => {
                    at = if projection(split)? <= split.threshold { *left } else { *right };
                }
            }
        }
    }

    /// Structural checks applied to deserialized trees.
    pub(crate) fn check(&self, n_features: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Incompatible(format!("malformed tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes");
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Internal { split, left, right } => {
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return bad("child index out of order");
                    }
                    if split.feature_index >= n_features {
                        return bad("feature index out of range");
                    }
                }
                TreeNode::Leaf { class_counts, .. } => {
                    if class_counts[0] + class_counts[1] == 0 {
                        return bad("empty leaf");
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn normalize(counts: &ClassCounts) -> [f64; 2] {
    let n = (counts[0] + counts[1]) as f64;
    [counts[0] as f64 / n, counts[1] as f64 / n]
}

struct Pending {
    rows: Vec<usize>,
    depth: usize,
    /// Slot in the parent to patch with this node's index.
    parent: Option<(usize, bool)>,
}

fn is_leaf(rows: &[usize], counts: ClassCounts, depth: usize, stop: &StoppingRule) -> bool {
    counts[0] == 0
        || counts[1] == 0
        || stop.max_depth.is_some_and(|d| depth >= d)
        || rows.len() < stop.min_samples_split
}

/// A tree fresh from training, remembering which dataset rows supplied each
/// node's exemplars so it can be evaluated against the same prepared data.
pub(crate) struct GrownTree {
    pub tree: RandomSimilarityTree,
    /// `(p, q)` rows per node; zeros at leaves.
    pub exemplar_rows: Vec<(usize, usize)>,
}

impl GrownTree {
    pub fn predict_row(&self, prep: &PreparedDataset, row: usize) -> [f64; 2] {
        let mut at = 0;
        loop {
            match &self.tree.nodes[at] {
                TreeNode::Leaf { class_counts, .. } => return normalize(class_counts),
                TreeNode::Internal { split, left, right } => {
                    let (p, q) = self.exemplar_rows[at];
                    let col = &prep.columns[split.feature_index];
                    let v = col.distance(q, row) - col.distance(p, row);
                    at = if v <= split.threshold { *left } else { *right };
                }
            }
        }
    }
}

pub(crate) fn grow(
    prep: &PreparedDataset,
    rows: Vec<usize>,
    params: SearchParams,
    stop: &StoppingRule,
    rng: &mut Rng,
    stats: &mut BuildStats,
) -> GrownTree {
    let targets = &prep.ds.targets;
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut exemplar_rows = Vec::new();
    let mut stack = vec![Pending {
        rows,
        depth: 0,
        parent: None,
    }];
    while let Some(Pending { rows, depth, parent }) = stack.pop() {
        let index = nodes.len();
        if let Some((p, is_left)) = parent {
            if let TreeNode::Internal { left, right, .. } = &mut nodes[p] {
                *(if is_left { left } else { right }) = index;
            }
        }
        stats.nodes += 1;
        let mut counts = [0; 2];
        for &r in &rows {
            counts[targets[r]] += 1;
        }
        let leaf = TreeNode::Leaf {
            class_counts: counts,
            depth,
        };
        if is_leaf(&rows, counts, depth, stop) {
            stats.leaves += 1;
            nodes.push(leaf);
            exemplar_rows.push((0, 0));
            continue;
        }
        let Some(split) = search_split(prep, &rows, params, rng, stats) else {
            stats.leaves += 1;
            nodes.push(leaf);
            exemplar_rows.push((0, 0));
            continue;
        };
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for (&r, &v) in rows.iter().zip(&split.projection) {
            if v <= split.choice.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        if left_rows.len() < stop.min_samples_leaf || right_rows.len() < stop.min_samples_leaf {
            stats.leaves += 1;
            nodes.push(leaf);
            exemplar_rows.push((0, 0));
            continue;
        }
        nodes.push(TreeNode::Internal {
            split: split.candidate(prep),
            left: 0,
            right: 0,
        });
        exemplar_rows.push((split.p_row, split.q_row));
        // right is pushed first so the left subtree is laid out next
        stack.push(Pending {
            rows: right_rows,
            depth: depth + 1,
            parent: Some((index, false)),
        });
        stack.push(Pending {
            rows: left_rows,
            depth: depth + 1,
            parent: Some((index, true)),
        });
    }
    GrownTree {
        tree: RandomSimilarityTree { nodes },
        exemplar_rows,
    }
}

/// Grows a tree on `indices`, a multiset of example rows such as a bootstrap
/// sample.
pub fn build_tree(ds: &Dataset, indices: &[usize], hp: &Hyperparams, rng: &mut Rng) -> Result<RandomSimilarityTree> {
    if indices.is_empty() {
        return Err(Error::Empty("tree sample"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= ds.n_examples()) {
        return Err(Error::IndexOutOfBounds {
            index: bad,
            len: ds.n_examples(),
        });
    }
    let prep = PreparedDataset::new(ds, true)?;
    let params = SearchParams::from_hyperparams(hp, ds.n_features())?;
    let mut stats = BuildStats::default();
    Ok(grow(&prep, indices.to_vec(), params, &hp.stopping, rng, &mut stats).tree)
}

/// Class probabilities for one example given as one value per feature.
///
/// `measures` and `matrices` are per feature; the matrix is only used by
/// precomputed columns.
pub fn predict_tree(
    tree: &RandomSimilarityTree,
    example: &[FeatureValue],
    measures: &[DistanceMeasure],
    matrices: &[Option<&crate::data::DistanceMatrix>],
) -> Result<[f64; 2]> {
    if example.len() != measures.len() || matrices.len() != measures.len() {
        return Err(Error::LengthMismatch {
            left: example.len(),
            right: measures.len(),
        });
    }
    let counts = tree.route(|split| {
        let f = split.feature_index;
        let x = &example[f];
        Ok(measures[f].eval(&split.exemplar_q, x, matrices[f])? - measures[f].eval(&split.exemplar_p, x, matrices[f])?)
    })?;
    Ok(normalize(counts))
}
