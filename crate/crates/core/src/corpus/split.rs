use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, LinkMatrix, Pair};
use crate::config::{ConfigError, KvConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// Fraction of links kept for training, in (0, 1).
    pub train_fraction: f64,
    pub rng_seed: u64,
    /// Test negatives drawn per test positive.
    pub negatives_per_positive: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            rng_seed: 0,
            negatives_per_positive: 1.0,
        }
    }
}

impl SplitSpec {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut s = Self::default();
        kv.set("train_fraction", &mut s.train_fraction)?;
        kv.set("negatives_per_positive", &mut s.negatives_per_positive)?;
        s.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CorpusError::Split(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.negatives_per_positive >= 0.0 && self.negatives_per_positive.is_finite()) {
            return Err(CorpusError::Split(format!(
                "negatives_per_positive must be >= 0, got {}",
                self.negatives_per_positive
            )));
        }
        Ok(())
    }
}

/// Result of [`split_links`]. All pair lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: LinkMatrix,
    pub test_positive: Vec<Pair>,
    /// Pairs with no link anywhere in the full matrix.
    pub test_negative: Vec<Pair>,
}

/// Split the links uniformly at random into train and held-out positives,
/// then sample negatives from pairs absent from the full matrix.
pub fn split_links(matrix: &LinkMatrix, spec: &SplitSpec) -> Result<Split, CorpusError> {
    spec.validate()?;
    if matrix.is_empty() {
        return Err(CorpusError::NoLinks);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut links: Vec<Pair> = matrix.links().collect();
    links.shuffle(&mut rng);
    let n_test = (links.len() as f64 * (1.0 - spec.train_fraction)).round() as usize;
    let mut test_positive = links.split_off(links.len() - n_test);
    test_positive.sort_unstable();
    let train = matrix.with_links(links)?;

    let wanted = (test_positive.len() as f64 * spec.negatives_per_positive).round() as usize;
    let test_negative = sample_negatives(matrix, wanted, &mut rng)?;
    Ok(Split {
        train,
        test_positive,
        test_negative,
    })
}

fn sample_negatives(
    matrix: &LinkMatrix,
    wanted: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Pair>, CorpusError> {
    let (n, m) = (matrix.n_investors(), matrix.n_companies());
    let available = n * m - matrix.len();
    if wanted > available {
        return Err(CorpusError::InsufficientNegatives { wanted, available });
    }
    if wanted == 0 {
        return Ok(Vec::new());
    }
    let mut out: Vec<Pair>;
    if wanted * 2 > available {
        // dense request: enumerate the complement
        out = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| !matrix.contains(i, j))
            .collect();
        out.shuffle(rng);
        out.truncate(wanted);
    } else {
        let mut chosen = BTreeSet::new();
        while chosen.len() < wanted {
            let pair = (rng.random_range(0..n), rng.random_range(0..m));
            if !matrix.contains(pair.0, pair.1) {
                chosen.insert(pair);
            }
        }
        out = chosen.into_iter().collect();
    }
    out.sort_unstable();
    Ok(out)
}
