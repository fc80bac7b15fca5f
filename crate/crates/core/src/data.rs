//! Heterogeneous dataset representation.
//!
//! A [`Dataset`] is a list of [`FeatureColumn`]s plus binary class labels.
//! Each column holds values of a single [`ValueKind`] and names the distance
//! measure used to compare them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distances;
use crate::error::{Error, Result, Violations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Numeric,
    SetSeq,
    TimeSeries,
    Graph,
    Precomputed,
}

impl ValueKind {
    pub const ALL: [ValueKind; 5] = [
        ValueKind::Numeric,
        ValueKind::SetSeq,
        ValueKind::TimeSeries,
        ValueKind::Graph,
        ValueKind::Precomputed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Numeric => "numeric",
            ValueKind::SetSeq => "setseq",
            ValueKind::TimeSeries => "timeseries",
            ValueKind::Graph => "graph",
            ValueKind::Precomputed => "precomputed",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ValueKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// A finite set of item identifiers, kept sorted and deduplicated so that
/// derived equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ItemSet(Vec<String>);

impl ItemSet {
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut items: Vec<String> = items.into_iter().map(Into::into).collect();
        items.sort_unstable();
        items.dedup();
        ItemSet(items)
    }

    pub fn items(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Smallest identifier in the set.
    pub fn min_item(&self) -> Option<&str> {
        self.0.first().map(String::as_str)
    }

    /// (|A ∩ B|, |A ∪ B|) by merging the two sorted lists.
    pub fn overlap(&self, other: &ItemSet) -> (usize, usize) {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        (common, a.len() + b.len() - common)
    }
}

impl From<Vec<String>> for ItemSet {
    fn from(items: Vec<String>) -> Self {
        ItemSet::new(items)
    }
}

impl From<ItemSet> for Vec<String> {
    fn from(set: ItemSet) -> Self {
        set.0
    }
}

/// Undirected simple graph. Edges are stored as `(u, v)` with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        Graph::new(raw.n, raw.edges.into_iter().map(|[u, v]| (u, v)))
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph {
            n: g.nodes,
            edges: g.edges.into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl Graph {
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut normalized = Vec::new();
        for (u, v) in edges {
            if u >= nodes || v >= nodes {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) references a node outside [0, {nodes})"
                )));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop on node {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Graph(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Graph {
            nodes,
            edges: normalized,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

/// One cell of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum FeatureValue {
    Numeric(f64),
    #[serde(rename = "setseq")]
    SetSequence(Vec<ItemSet>),
    #[serde(rename = "timeseries")]
    TimeSeries(Vec<f64>),
    Graph(Graph),
    #[serde(rename = "precomputed")]
    PrecomputedRef(usize),
}

impl FeatureValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            FeatureValue::Numeric(_) => ValueKind::Numeric,
            FeatureValue::SetSequence(_) => ValueKind::SetSeq,
            FeatureValue::TimeSeries(_) => ValueKind::TimeSeries,
            FeatureValue::Graph(_) => ValueKind::Graph,
            FeatureValue::PrecomputedRef(_) => ValueKind::Precomputed,
        }
    }
}

/// Square row-major distance matrix backing a precomputed column.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::Config(format!(
                    "distance matrix row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(DistanceMatrix { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    fn violations(&self) -> Vec<&'static str> {
        let mut found = Vec::new();
        let n = self.size;
        if self.data.iter().any(|v| !v.is_finite()) {
            found.push("matrix has non-finite entries");
        }
        if self.data.iter().any(|&v| v < 0.0) {
            found.push("matrix has negative entries");
        }
        if (0..n).any(|i| self.get(i, i) != 0.0) {
            found.push("matrix diagonal is not zero");
        }
        if (0..n).any(|i| (i + 1..n).any(|j| self.get(i, j) != self.get(j, i))) {
            found.push("matrix not symmetric");
        }
        found
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ValueKind,
    pub values: Vec<FeatureValue>,
    pub measure: String,
    pub matrix: Option<DistanceMatrix>,
}

impl FeatureColumn {
    pub fn new(
        name: impl Into<String>,
        kind: ValueKind,
        measure: impl Into<String>,
        values: Vec<FeatureValue>,
    ) -> Self {
        FeatureColumn {
            name: name.into(),
            kind,
            values,
            measure: measure.into(),
            matrix: None,
        }
    }

    pub fn numeric(name: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        FeatureColumn::new(
            name,
            ValueKind::Numeric,
            "euclidean",
            values.into_iter().map(FeatureValue::Numeric).collect(),
        )
    }

    /// A precomputed column whose example `i` refers to row `i` of `matrix`.
    pub fn precomputed(name: impl Into<String>, matrix: DistanceMatrix) -> Self {
        let values = (0..matrix.size()).map(FeatureValue::PrecomputedRef).collect();
        FeatureColumn {
            name: name.into(),
            kind: ValueKind::Precomputed,
            values,
            measure: "precomputed".into(),
            matrix: Some(matrix),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Structural equality of two examples' values on this column.
    ///
    /// Precomputed references compare by their matrix rows restricted to
    /// `scope` (the examples of the current node).
    pub fn same_value(&self, a: usize, b: usize, scope: &[usize]) -> bool {
        match (&self.values[a], &self.values[b], &self.matrix) {
            (FeatureValue::PrecomputedRef(i), FeatureValue::PrecomputedRef(j), Some(m)) => {
                i == j
                    || scope.iter().all(|&k| match self.values[k] {
                        FeatureValue::PrecomputedRef(r) => m.get(*i, r) == m.get(*j, r),
                        _ => true,
                    })
            }
            (x, y, _) => x == y,
        }
    }
}

/// Test for the presence of at least two structurally distinct values among
/// `indices`.
pub fn has_variation(column: &FeatureColumn, indices: &[usize]) -> Result<bool> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= column.len()) {
        return Err(Error::IndexOutOfBounds {
            index: bad,
            len: column.len(),
        });
    }
    let Some((&first, rest)) = indices.split_first() else {
        return Err(Error::Empty("index list"));
    };
    Ok(rest.iter().any(|&i| !column.same_value(first, i, indices)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<FeatureColumn>,
    /// Class index of each example, into `class_values`.
    pub targets: Vec<usize>,
    /// Distinct labels in sorted order.
    pub class_values: Vec<String>,
}

impl Dataset {
    /// Assembles a dataset without validating it; see [`validate_dataset`].
    pub fn from_labels<S: AsRef<str>>(columns: Vec<FeatureColumn>, labels: &[S]) -> Self {
        let class_values: Vec<String> = labels
            .iter()
            .map(|l| l.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let targets = labels
            .iter()
            .map(|l| {
                class_values
                    .binary_search_by(|c| c.as_str().cmp(l.as_ref()))
                    .expect("label present")
            })
            .collect();
        Dataset {
            columns,
            targets,
            class_values,
        }
    }

    /// Builds and validates.
    pub fn new<S: AsRef<str>>(columns: Vec<FeatureColumn>, labels: &[S]) -> Result<Self> {
        let ds = Dataset::from_labels(columns, labels);
        validate_dataset(&ds)?;
        Ok(ds)
    }

    pub fn n_examples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.class_values[self.targets[i]]
    }

    pub fn labels(&self) -> Vec<&str> {
        (0..self.n_examples()).map(|i| self.label(i)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_values.len()];
        for &t in &self.targets {
            counts[t] += 1;
        }
        counts
    }
}

/// Checks every dataset invariant and reports all violations at once.
pub fn validate_dataset(ds: &Dataset) -> Result<()> {
    let mut v = Vec::new();
    let n = ds.n_examples();
    if n < 2 {
        v.push(format!("need at least 2 examples, got {n}"));
    }
    match ds.class_values.len() {
        0 | 1 => v.push("fewer than two classes".to_string()),
        2 => {}
        m => v.push(format!("binary classification only ({m} classes found)")),
    }
    if ds.targets.iter().any(|&t| t >= ds.class_values.len()) {
        v.push("label index outside the class list".to_string());
    }
    if ds.columns.is_empty() {
        v.push("no feature columns".to_string());
    }
    for col in &ds.columns {
        validate_column(col, n, &mut v);
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(Violations(v)))
    }
}

fn validate_column(col: &FeatureColumn, n: usize, v: &mut Vec<String>) {
    let name = &col.name;
    if col.len() != n {
        v.push(format!("column '{name}' has {} values, expected {n}", col.len()));
    }
    if let Err(e) = distances::resolve(col.kind, &col.measure) {
        v.push(format!("column '{name}': {e}"));
    }
    if let Some(i) = col.values.iter().position(|x| x.kind() != col.kind) {
        v.push(format!(
            "column '{name}' record {i}: {} value in a {} column",
            col.values[i].kind(),
            col.kind
        ));
        return;
    }
    for (i, value) in col.values.iter().enumerate() {
        let problem = match value {
            FeatureValue::Numeric(x) if !x.is_finite() => Some("non-finite value".to_string()),
            FeatureValue::TimeSeries(s) if s.is_empty() => Some("empty time series".to_string()),
            FeatureValue::TimeSeries(s) if s.iter().any(|x| !x.is_finite()) => {
                Some("non-finite value in time series".to_string())
            }
            FeatureValue::SetSequence(seq) if seq.iter().any(ItemSet::is_empty) => {
                Some("empty set in sequence".to_string())
            }
            FeatureValue::Graph(g) if g.node_count() < 2 && col.measure == "ipsenmikhailov" => {
                Some(format!("graph with {} nodes", g.node_count()))
            }
            FeatureValue::PrecomputedRef(r) => match &col.matrix {
                Some(m) if *r >= m.size() => Some(format!(
                    "reference {r} outside the {0}x{0} matrix",
                    m.size()
                )),
                _ => None,
            },
            _ => None,
        };
        if let Some(p) = problem {
            v.push(format!("column '{name}' record {i}: {p}"));
        }
    }
    if col.kind == ValueKind::TimeSeries && matches!(col.measure.as_str(), "euclidean" | "cosine")
    {
        let lengths: BTreeSet<usize> = col
            .values
            .iter()
            .map(|x| match x {
                FeatureValue::TimeSeries(s) => s.len(),
                _ => 0,
            })
            .collect();
        if lengths.len() > 1 {
            v.push(format!(
                "column '{name}': measure '{}' needs equal-length series",
                col.measure
            ));
        }
    }
    match (&col.matrix, col.kind) {
        (None, ValueKind::Precomputed) => {
            v.push(format!("column '{name}': precomputed column without a matrix"))
        }
        (Some(_), k) if k != ValueKind::Precomputed => {
            v.push(format!("column '{name}': matrix attached to a {k} column"))
        }
        (Some(m), _) => {
            for p in m.violations() {
                v.push(format!("column '{name}': {p}"));
            }
        }
        _ => {}
    }
}
