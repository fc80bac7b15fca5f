//! Per-kind distance measures and the registry that resolves them by name.

mod graph;
mod quadrature;
mod sequence;
mod vector;

pub use graph::{degree_divergence, graph_jaccard, ipsen_mikhailov, DegreeHistogram, Spectrum, SpectralConfig};
pub use quadrature::integrate;
pub use sequence::{edit_distance_by, seqset_edit_distance, set_jaccard};
pub(crate) use sequence::jaccard_from_counts as jaccard_counts;
pub use vector::{cosine_distance, dtw, euclidean_scalar, euclidean_vector};

use crate::data::{DistanceMatrix, FeatureValue, ValueKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    Cosine,
    Dtw,
    EditJaccard,
    GraphJaccard,
    DegreeDivergence,
    IpsenMikhailov(SpectralConfig),
    /// Looks up `matrix[i][j]` for two precomputed references.
    Precomputed,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
            Metric::Dtw => "dtw",
            Metric::EditJaccard => "editjaccard",
            Metric::GraphJaccard => "graphjaccard",
            Metric::DegreeDivergence => "degreedivergence",
            Metric::IpsenMikhailov(_) => "ipsenmikhailov",
            Metric::Precomputed => "precomputed",
        }
    }
}

const REGISTRY: &[(ValueKind, Metric)] = &[
    (ValueKind::Numeric, Metric::Euclidean),
    (ValueKind::TimeSeries, Metric::Euclidean),
    (ValueKind::TimeSeries, Metric::Cosine),
    (ValueKind::TimeSeries, Metric::Dtw),
    (ValueKind::SetSeq, Metric::EditJaccard),
    (ValueKind::Graph, Metric::GraphJaccard),
    (ValueKind::Graph, Metric::DegreeDivergence),
    (ValueKind::Graph, Metric::IpsenMikhailov(SpectralConfig::DEFAULT)),
    (ValueKind::Precomputed, Metric::Precomputed),
];

/// A distance measure bound to the value kind it accepts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceMeasure {
    kind: ValueKind,
    metric: Metric,
}

/// Names registered for `kind`.
pub fn measure_names(kind: ValueKind) -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|(k, _)| *k == kind)
        .map(|(_, m)| m.name())
        .collect()
}

pub fn resolve(kind: ValueKind, name: &str) -> Result<DistanceMeasure> {
    REGISTRY
        .iter()
        .find(|(k, m)| *k == kind && m.name() == name)
        .map(|&(kind, metric)| DistanceMeasure { kind, metric })
        .ok_or_else(|| Error::UnknownMeasure {
            kind,
            name: name.to_string(),
            valid: measure_names(kind),
        })
}

impl DistanceMeasure {
    /// Ipsen–Mikhailov with a non-default spectral configuration.
    pub fn ipsen_mikhailov(config: SpectralConfig) -> Self {
        DistanceMeasure {
            kind: ValueKind::Graph,
            metric: Metric::IpsenMikhailov(config),
        }
    }

    pub fn name(&self) -> &'static str {
        self.metric.name()
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// `matrix` is only consulted by the precomputed pseudo-measure.
    pub fn eval(&self, a: &FeatureValue, b: &FeatureValue, matrix: Option<&DistanceMatrix>) -> Result<f64> {
        use FeatureValue as V;
        let mismatch = |v: &FeatureValue| Error::KindMismatch {
            measure: self.name(),
            expected: self.kind,
            found: v.kind(),
        };
        for v in [a, b] {
            if v.kind() != self.kind {
                return Err(mismatch(v));
            }
        }
        match (self.metric, a, b) {
            (Metric::Euclidean, V::Numeric(x), V::Numeric(y)) => euclidean_scalar(*x, *y),
            (Metric::Euclidean, V::TimeSeries(x), V::TimeSeries(y)) => euclidean_vector(x, y),
            (Metric::Cosine, V::TimeSeries(x), V::TimeSeries(y)) => cosine_distance(x, y),
            (Metric::Dtw, V::TimeSeries(x), V::TimeSeries(y)) => dtw(x, y),
            (Metric::EditJaccard, V::SetSequence(s), V::SetSequence(t)) => Ok(seqset_edit_distance(s, t)),
            (Metric::GraphJaccard, V::Graph(g), V::Graph(h)) => Ok(graph_jaccard(g, h)),
            (Metric::DegreeDivergence, V::Graph(g), V::Graph(h)) => Ok(degree_divergence(g, h)),
            (Metric::IpsenMikhailov(cfg), V::Graph(g), V::Graph(h)) => ipsen_mikhailov(g, h, &cfg),
            (Metric::Precomputed, V::PrecomputedRef(i), V::PrecomputedRef(j)) => {
                let m = matrix.ok_or_else(|| Error::MissingMatrix(String::new()))?;
                for &r in [i, j] {
                    if r >= m.size() {
                        return Err(Error::PrecomputedOutOfRange { index: r, size: m.size() });
                    }
                }
                Ok(m.get(*i, *j))
            }
            _ => Err(mismatch(a)),
        }
    }
}
