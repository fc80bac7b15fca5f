//! Synthetic two-class datasets of sequences of sets, and the bag-of-items
//! count transform.
//!
//! Every example is a sequence of item sets. Lengths are Poisson around
//! `mean_length`, set sizes Poisson around `mean_set_size` (clamped to the
//! vocabulary), and items are drawn without replacement from a categorical
//! distribution over the vocabulary. The modes differ only in what separates
//! the classes:
//!
//! * `items`: each class draws items from its own permutation of one Zipf
//!   weight vector; the two permutations differ by one exchanged pair.
//! * `lengths`: class 1's mean length is 40% longer.
//! * `order`: class 1's sets are sorted by their smallest item.
//!
//! In `lengths` and `order` each set is drawn around a uniformly chosen anchor
//! item, with weights decaying away from it, so sets are internally coherent
//! while the pooled item distribution is the same for both classes.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureColumn, FeatureValue, ItemSet, ValueKind};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};

/// Exponent of the Zipf weights used by [`Mode::Items`].
pub const ZIPF_EXPONENT: f64 = 1.0;

/// Zero-based Zipf ranks whose weights class 1 exchanges under [`Mode::Items`].
pub const SWAPPED_RANKS: (usize, usize) = (14, 39);

/// Relative increase of class 1's mean length under [`Mode::Lengths`].
pub const LENGTH_OFFSET: f64 = 0.4;

/// Decay length, in items, of the anchored set weights.
pub const ANCHOR_BANDWIDTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Items,
    Lengths,
    Order,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Items, Mode::Lengths, Mode::Order];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Items => "items",
            Mode::Lengths => "lengths",
            Mode::Order => "order",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}' (expected items, lengths or order)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_examples: usize,
    pub vocab_size: usize,
    pub mean_length: usize,
    pub mean_set_size: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(mode: Mode, seed: u64) -> Self {
        SynthConfig {
            n_examples: 400,
            vocab_size: 50,
            mean_length: 20,
            mean_set_size: 20,
            mode,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_examples < 4 || self.n_examples % 2 != 0 {
            return fail(format!("n_examples must be even and at least 4, got {}", self.n_examples));
        }
        if self.vocab_size < 2 {
            return fail("vocab_size must be at least 2".into());
        }
        if self.mean_length < 1 || self.mean_set_size < 1 {
            return fail("mean_length and mean_set_size must be positive".into());
        }
        if self.mean_set_size > self.vocab_size {
            return fail("mean_set_size exceeds vocab_size".into());
        }
        if self.mode == Mode::Items && self.vocab_size < 2 * self.mean_set_size {
            return fail("items mode needs vocab_size >= 2 * mean_set_size".into());
        }
        if self.mode == Mode::Items && self.vocab_size <= SWAPPED_RANKS.1 {
            return fail(format!("items mode needs vocab_size > {}", SWAPPED_RANKS.1));
        }
        Ok(())
    }
}

/// Item identifiers, zero-padded so string order equals numeric order.
pub fn vocabulary(vocab_size: usize) -> Vec<String> {
    let width = (vocab_size.max(2) - 1).to_string().len();
    (0..vocab_size).map(|i| format!("i{i:0width$}")).collect()
}

fn poisson(mean: f64, rng: &mut Rng) -> usize {
    // mean >= 1 always makes the distribution valid
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

struct Sampler<'a> {
    cfg: &'a SynthConfig,
    vocab: Vec<String>,
    /// Per-class item weights; `None` for anchored sets.
    weights: Option<[Vec<f64>; 2]>,
}

impl Sampler<'_> {
    fn item_weights(&self, class: usize, rng: &mut Rng) -> Vec<f64> {
        match &self.weights {
            Some(w) => w[class].clone(),
            None => {
                let anchor = rng.random_range(0..self.cfg.vocab_size) as f64;
                (0..self.cfg.vocab_size)
                    .map(|i| (-(i as f64 - anchor).abs() / ANCHOR_BANDWIDTH).exp())
                    .collect()
            }
        }
    }

    fn set(&self, class: usize, rng: &mut Rng) -> ItemSet {
        let size = poisson(self.cfg.mean_set_size as f64, rng).clamp(1, self.cfg.vocab_size);
        let w = self.item_weights(class, rng);
        let picked = index::sample_weighted(rng, w.len(), |i| w[i], size).expect("positive weights");
        ItemSet::new(picked.into_iter().map(|i| self.vocab[i].as_str()))
    }

    fn sequence(&self, class: usize, rng: &mut Rng) -> Vec<ItemSet> {
        let mean = match (self.cfg.mode, class) {
            (Mode::Lengths, 1) => self.cfg.mean_length as f64 * (1.0 + LENGTH_OFFSET),
            _ => self.cfg.mean_length as f64,
        };
        let length = poisson(mean, rng).max(1);
        let mut seq: Vec<ItemSet> = (0..length).map(|_| self.set(class, rng)).collect();
        if self.cfg.mode == Mode::Order && class == 1 {
            seq.sort_by(|a, b| a.min_item().cmp(&b.min_item()));
        }
        seq
    }
}

/// Balanced dataset with labels "0" and "1" alternating and a single
/// set-sequence column named "seq" measured by edit distance.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, &[]);
    let weights = (cfg.mode == Mode::Items).then(|| {
        let zipf: Vec<f64> = (1..=cfg.vocab_size).map(|r| (r as f64).powf(-ZIPF_EXPONENT)).collect();
        let mut rank_of: Vec<usize> = (0..cfg.vocab_size).collect();
        rank_of.shuffle(&mut rng);
        let (a, b) = SWAPPED_RANKS;
        let swapped = |r: usize| if r == a { b } else if r == b { a } else { r };
        [
            rank_of.iter().map(|&r| zipf[r]).collect(),
            rank_of.iter().map(|&r| zipf[swapped(r)]).collect(),
        ]
    });
    let sampler = Sampler {
        cfg,
        vocab: vocabulary(cfg.vocab_size),
        weights,
    };
    let mut values = Vec::with_capacity(cfg.n_examples);
    let mut labels = Vec::with_capacity(cfg.n_examples);
    for i in 0..cfg.n_examples {
        let class = i % 2;
        values.push(FeatureValue::SetSequence(sampler.sequence(class, &mut rng)));
        labels.push(if class == 0 { "0" } else { "1" });
    }
    let column = FeatureColumn::new("seq", ValueKind::SetSeq, "editjaccard", values);
    Dataset::new(vec![column], &labels)
}

/// Replaces set-sequence column `column` with one numeric count column per
/// item seen in it.
pub fn bag_of_items(ds: &Dataset, column: usize) -> Result<Dataset> {
    let col = set_column(ds, column)?;
    let vocab: BTreeSet<&str> = col
        .values
        .iter()
        .flat_map(|v| match v {
            FeatureValue::SetSequence(seq) => seq.iter().flat_map(|s| s.items()).map(String::as_str).collect(),
            _ => Vec::new(),
        })
        .collect();
    let vocab: Vec<String> = vocab.into_iter().map(str::to_string).collect();
    bag_of_items_with_vocab(ds, column, &vocab)
}

/// [`bag_of_items`] over an explicit vocabulary, as needed to score new data
/// with a model trained on counts. Items outside the vocabulary are ignored.
pub fn bag_of_items_with_vocab(ds: &Dataset, column: usize, vocab: &[String]) -> Result<Dataset> {
    let col = set_column(ds, column)?;
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let mut counts = vec![vec![0.0; col.len()]; vocab.len()];
    for (row, v) in col.values.iter().enumerate() {
        let FeatureValue::SetSequence(seq) = v else {
            return Err(Error::KindMismatch {
                measure: "bag_of_items",
                expected: ValueKind::SetSeq,
                found: v.kind(),
            });
        };
        for item in seq.iter().flat_map(|s| s.items()) {
            if let Some(&id) = ids.get(item.as_str()) {
                counts[id][row] += 1.0;
            }
        }
    }
    let bag = vocab
        .iter()
        .zip(counts)
        .map(|(item, c)| FeatureColumn::numeric(format!("{}[{item}]", col.name), c));
    let mut columns = Vec::with_capacity(ds.n_features() - 1 + vocab.len());
    columns.extend(ds.columns[..column].iter().cloned());
    columns.extend(bag);
    columns.extend(ds.columns[column + 1..].iter().cloned());
    Ok(Dataset {
        columns,
        targets: ds.targets.clone(),
        class_values: ds.class_values.clone(),
    })
}

fn set_column(ds: &Dataset, column: usize) -> Result<&FeatureColumn> {
    let col = ds.columns.get(column).ok_or(Error::IndexOutOfBounds {
        index: column,
        len: ds.n_features(),
    })?;
    if col.kind != ValueKind::SetSeq {
        return Err(Error::KindMismatch {
            measure: "bag_of_items",
            expected: ValueKind::SetSeq,
            found: col.kind,
        });
    }
    Ok(col)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(ds: &Dataset) -> Vec<(&[ItemSet], usize)> {
        ds.columns[0]
            .values
            .iter()
            .zip(&ds.targets)
            .map(|(v, &t)| match v {
                FeatureValue::SetSequence(s) => (s.as_slice(), t),
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn vocabulary_sorts_numerically() {
        let v = vocabulary(12);
        assert_eq!(v[0], "i00");
        assert_eq!(v[11], "i11");
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, v);
    }

    #[test]
    fn generated_shape() {
        for mode in Mode::ALL {
            let ds = generate(&SynthConfig::new(mode, 3)).unwrap();
            assert_eq!(ds.n_examples(), 400);
            assert_eq!(ds.class_counts(), vec![200, 200]);
            for (s, _) in seqs(&ds) {
                assert!(!s.is_empty());
                assert!(s.iter().all(|set| !set.is_empty() && set.len() <= 50));
            }
            assert_eq!(generate(&SynthConfig::new(mode, 3)).unwrap(), ds);
        }
    }

    #[test]
    fn order_mode_sorts_class_one() {
        let ds = generate(&SynthConfig::new(Mode::Order, 8)).unwrap();
        let mut unsorted_zero = 0;
        for (s, t) in seqs(&ds) {
            let sorted = s.windows(2).all(|w| w[0].min_item() <= w[1].min_item());
            if t == 1 {
                assert!(sorted);
            } else if !sorted {
                unsorted_zero += 1;
            }
        }
        assert!(unsorted_zero > 150);
    }

    #[test]
    fn lengths_mode_offsets_mean_length() {
        let ds = generate(&SynthConfig::new(Mode::Lengths, 5)).unwrap();
        let mut total = [0.0; 2];
        for (s, t) in seqs(&ds) {
            total[t] += s.len() as f64;
        }
        let ratio = total[1] / total[0];
        assert!((ratio - 1.4).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn bag_counts() {
        let value = FeatureValue::SetSequence(vec![ItemSet::new(["a"]), ItemSet::new(["a", "b"])]);
        let other = FeatureValue::SetSequence(vec![ItemSet::new(["c"])]);
        let col = FeatureColumn::new("s", ValueKind::SetSeq, "editjaccard", vec![value, other]);
        let ds = Dataset::new(vec![col], &["x", "y"]).unwrap();
        let vocab: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let bag = bag_of_items_with_vocab(&ds, 0, &vocab).unwrap();
        let row0: Vec<f64> = bag
            .columns
            .iter()
            .map(|c| match c.values[0] {
                FeatureValue::Numeric(x) => x,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(row0, vec![2.0, 1.0, 0.0]);
        assert_eq!(bag.columns[1].name, "s[b]");
        assert_eq!(bag_of_items(&ds, 0).unwrap(), bag);
        assert!(bag_of_items(&bag, 0).is_err());
        let narrow = bag_of_items_with_vocab(&ds, 0, &vocab[..2]).unwrap();
        assert_eq!(narrow.n_features(), 2);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SynthConfig::new(Mode::Items, 0);
        cfg.n_examples = 5;
        assert!(generate(&cfg).is_err());
        let mut cfg = SynthConfig::new(Mode::Items, 0);
        cfg.vocab_size = 30;
        assert!(generate(&cfg).is_err());
        assert_eq!("order".parse::<Mode>().unwrap(), Mode::Order);
        assert!("shuffle".parse::<Mode>().is_err());
    }
}

