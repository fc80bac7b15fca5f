//! Training-time view of a dataset: per-column representations that make
//! row-to-row distances cheap, and a shared memo of computed pairs.
//!
//! Every fast representation performs the same floating-point operations as
//! [`DistanceMeasure::eval`] on the original values, so memoized or
//! precomputed distances are bit-identical to direct evaluation.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::data::{validate_dataset, Dataset, FeatureColumn, FeatureValue, ValueKind};
use crate::distances::{self, edit_distance_by, DegreeHistogram, DistanceMeasure, Metric, Spectrum};
use crate::error::Result;

/// Rows above this count are not memoized (the triangle would exceed ~67 MB).
const MAX_CACHED_ROWS: usize = 4096;

pub(crate) struct PreparedDataset<'a> {
    pub ds: &'a Dataset,
    pub columns: Vec<PreparedColumn<'a>>,
}

impl<'a> PreparedDataset<'a> {
    /// `numeric_fast_path` lets numeric euclidean columns bypass the distance
    /// dispatch entirely.
    pub fn new(ds: &'a Dataset, numeric_fast_path: bool) -> Result<Self> {
        validate_dataset(ds)?;
        let columns = ds
            .columns
            .iter()
            .map(|c| PreparedColumn::new(c, numeric_fast_path))
            .collect::<Result<_>>()?;
        Ok(PreparedDataset { ds, columns })
    }
}

pub(crate) struct PreparedColumn<'a> {
    pub column: &'a FeatureColumn,
    pub measure: DistanceMeasure,
    repr: Repr,
    cache: Option<PairCache>,
}

enum Repr {
    Scalar(Vec<f64>),
    Values,
    SetSeq(Bitsets),
    Spectra(Vec<Spectrum>),
    Degrees(Vec<DegreeHistogram>),
}

impl<'a> PreparedColumn<'a> {
    pub fn new(column: &'a FeatureColumn, numeric_fast_path: bool) -> Result<Self> {
        let measure = distances::resolve(column.kind, &column.measure)?;
        Self::with_measure(column, measure, numeric_fast_path)
    }

    pub fn with_measure(column: &'a FeatureColumn, measure: DistanceMeasure, numeric_fast_path: bool) -> Result<Self> {
        let repr = match (column.kind, measure.metric()) {
            (ValueKind::Numeric, Metric::Euclidean) if numeric_fast_path => Repr::Scalar(
                column
                    .values
                    .iter()
                    .map(|v| match v {
                        FeatureValue::Numeric(x) => *x,
                        _ => unreachable!("validated numeric column"),
                    })
                    .collect(),
            ),
            (ValueKind::SetSeq, Metric::EditJaccard) => Repr::SetSeq(Bitsets::new(column)),
            (ValueKind::Graph, Metric::IpsenMikhailov(cfg)) => Repr::Spectra(
                column
                    .values
                    .iter()
                    .map(|v| match v {
                        FeatureValue::Graph(g) => Spectrum::of(g, cfg.gamma),
                        _ => unreachable!("validated graph column"),
                    })
                    .collect::<Result<_>>()?,
            ),
            (ValueKind::Graph, Metric::DegreeDivergence) => Repr::Degrees(
                column
                    .values
                    .iter()
                    .map(|v| match v {
                        FeatureValue::Graph(g) => DegreeHistogram::of(g),
                        _ => unreachable!("validated graph column"),
                    })
                    .collect(),
            ),
            _ => Repr::Values,
        };
        let cache = match (&repr, column.kind) {
            (Repr::Scalar(_), _) | (_, ValueKind::Numeric) | (_, ValueKind::Precomputed) => None,
            _ if column.len() <= MAX_CACHED_ROWS => Some(PairCache::new(column.len())),
            _ => None,
        };
        Ok(PreparedColumn {
            column,
            measure,
            repr,
            cache,
        })
    }

    /// Raw values when the numeric fast path is active.
    pub fn scalars(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Scalar(v) => Some(v),
            _ => None,
        }
    }

    /// Distance between dataset rows `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.cache {
            Some(cache) => cache.get_or_insert(i, j, || self.compute(i, j)),
            None => self.compute(i, j),
        }
    }

    fn compute(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Scalar(v) => (v[i] - v[j]).abs(),
            Repr::SetSeq(b) => b.edit_distance(i, j),
            Repr::Spectra(s) => match self.measure.metric() {
                Metric::IpsenMikhailov(cfg) => s[i].distance(&s[j], &cfg),
                _ => unreachable!(),
            },
            Repr::Degrees(h) => h[i].divergence(&h[j]),
            Repr::Values => self
                .measure
                .eval(
                    &self.column.values[i],
                    &self.column.values[j],
                    self.column.matrix.as_ref(),
                )
                .expect("distance on a validated column"),
        }
    }
}

/// Sequences of sets re-encoded as bitsets over the column's vocabulary.
struct Bitsets {
    words: usize,
    /// Example `i` owns sets `starts[i]..starts[i + 1]`.
    starts: Vec<usize>,
    bits: Vec<u64>,
    sizes: Vec<usize>,
}

impl Bitsets {
    fn new(column: &FeatureColumn) -> Self {
        let mut vocab: Vec<&str> = column
            .values
            .iter()
            .flat_map(|v| match v {
                FeatureValue::SetSequence(seq) => seq.iter().flat_map(|s| s.items()).map(String::as_str).collect(),
                _ => Vec::new(),
            })
            .collect();
        vocab.sort_unstable();
        vocab.dedup();
        let words = vocab.len().div_ceil(64).max(1);
        let mut starts = vec![0];
        let mut bits = Vec::new();
        let mut sizes = Vec::new();
        for v in &column.values {
            if let FeatureValue::SetSequence(seq) = v {
                for set in seq {
                    let base = bits.len();
                    bits.resize(base + words, 0u64);
                    for item in set.items() {
                        let id = vocab.binary_search(&item.as_str()).expect("item in vocabulary");
                        bits[base + id / 64] |= 1 << (id % 64);
                    }
                    sizes.push(set.len());
                }
            }
            starts.push(sizes.len());
        }
        Bitsets {
            words,
            starts,
            bits,
            sizes,
        }
    }

    #[inline]
    fn jaccard(&self, s: usize, t: usize) -> f64 {
        let a = &self.bits[s * self.words..(s + 1) * self.words];
        let b = &self.bits[t * self.words..(t + 1) * self.words];
        let common: usize = a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum();
        distances::jaccard_counts(common, self.sizes[s] + self.sizes[t] - common)
    }

    fn edit_distance(&self, i: usize, j: usize) -> f64 {
        let (si, sj) = (self.starts[i], self.starts[j]);
        let n = self.starts[i + 1] - si;
        let m = self.starts[j + 1] - sj;
        edit_distance_by(n, m, |a, b| self.jaccard(si + a, sj + b))
    }
}

/// Lazily filled upper triangle of pairwise distances. Concurrent fills of
/// the same pair store the same value.
struct PairCache {
    n: usize,
    slots: Vec<AtomicU64>,
}

const EMPTY: u64 = u64::MAX;

impl PairCache {
    fn new(n: usize) -> Self {
        let len = n * n.saturating_sub(1) / 2;
        PairCache {
            n,
            slots: (0..len).map(|_| AtomicU64::new(EMPTY)).collect(),
        }
    }

    fn get_or_insert(&self, i: usize, j: usize, compute: impl FnOnce() -> f64) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        // row-major upper triangle without the diagonal
        let idx = lo * (2 * self.n - lo - 1) / 2 + (hi - lo - 1);
        let slot = &self.slots[idx];
        let bits = slot.load(Ordering::Relaxed);
        if bits != EMPTY {
            return f64::from_bits(bits);
        }
        let d = compute();
        slot.store(d.to_bits(), Ordering::Relaxed);
        d
    }
}
