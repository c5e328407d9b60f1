//! Hashed n-gram featurization for one- and two-segment text.
//!
//! No fitted vocabulary: the same config maps the same text to the same
//! vector forever, so old-task featurization never depends on discarded
//! corpora. Both segments share one D-dimensional space; distinct salts keep
//! their contributions apart.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};
use crate::nn::mix64;

const SALT_TAG_A: u64 = 0x7365676d656e7441; // "segmentA"
const SALT_TAG_B: u64 = 0x7365676d656e7442; // "segmentB"

fn default_dim() -> usize {
    4096
}

fn default_orders() -> Vec<usize> {
    vec![1, 2]
}

/// Featurizer configuration; two configs with equal fields featurize
/// identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturizerConfig {
    /// Number of hash buckets; must be a power of two.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// n-gram orders to hash, e.g. {1, 2}.
    #[serde(default = "default_orders")]
    pub ngram_orders: Vec<usize>,
    /// Seed from which the two segment salts are derived.
    #[serde(default)]
    pub seed: u64,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            dim: default_dim(),
            ngram_orders: default_orders(),
            seed: 0,
        }
    }
}

impl FeaturizerConfig {
    pub fn with_dim(dim: usize) -> Self {
        FeaturizerConfig {
            dim,
            ..Default::default()
        }
    }
}

/// Sparse feature vector: sorted unique indices into a `dim`-sized space.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    /// Writes the nonzero entries into `buf` (which must be zeroed and of
    /// length `dim`); pair with [`SparseVec::clear_from`] to reuse the buffer.
    pub fn scatter_into(&self, buf: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            buf[i as usize] = v;
        }
    }

    pub fn clear_from(&self, buf: &mut [f64]) {
        for &i in &self.indices {
            buf[i as usize] = 0.0;
        }
    }
}

/// Deterministic sign-hashing featurizer over lowercased whitespace tokens.
#[derive(Debug, Clone)]
pub struct HashingFeaturizer {
    config: FeaturizerConfig,
    salt_a: u64,
    salt_b: u64,
    mask: u64,
}

impl HashingFeaturizer {
    pub fn new(config: FeaturizerConfig) -> Result<Self> {
        if config.dim < 2 || !config.dim.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "featurizer dim must be a power of two >= 2, got {}",
                config.dim
            )));
        }
        if config.ngram_orders.is_empty() || config.ngram_orders.iter().any(|&k| k == 0) {
            return Err(Error::InvalidInput(
                "ngram orders must be a nonempty list of positive integers".into(),
            ));
        }
        let salt_a = mix64(config.seed ^ SALT_TAG_A);
        let salt_b = mix64(config.seed ^ SALT_TAG_B);
        let mask = (config.dim - 1) as u64;
        Ok(HashingFeaturizer {
            config,
            salt_a,
            salt_b,
            mask,
        })
    }

    pub fn config(&self) -> &FeaturizerConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// L2-normalized dense feature vector of length `dim`.
    pub fn featurize(&self, example: &Example) -> Result<Vec<f64>> {
        Ok(self.featurize_sparse(example)?.to_dense())
    }

    /// Sparse form of [`HashingFeaturizer::featurize`].
    pub fn featurize_sparse(&self, example: &Example) -> Result<SparseVec> {
        if example.text_a.trim().is_empty() {
            return Err(Error::InvalidInput("text_a must be nonempty".into()));
        }
        let mut buckets: BTreeMap<u32, f64> = BTreeMap::new();
        self.hash_segment(&example.text_a, self.salt_a, &mut buckets);
        if let Some(text_b) = &example.text_b {
            self.hash_segment(text_b, self.salt_b, &mut buckets);
        }

        let norm: f64 = buckets.values().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        let mut indices = Vec::with_capacity(buckets.len());
        let mut values = Vec::with_capacity(buckets.len());
        for (i, v) in buckets {
            if v == 0.0 {
                continue;
            }
            indices.push(i);
            values.push(v * scale);
        }
        Ok(SparseVec {
            dim: self.config.dim,
            indices,
            values,
        })
    }

    fn hash_segment(&self, text: &str, salt: u64, buckets: &mut BTreeMap<u32, f64>) {
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        for &order in &self.config.ngram_orders {
            if tokens.len() < order {
                continue;
            }
            for window in tokens.windows(order) {
                let h = hash_ngram(salt, window);
                let bucket = (h & self.mask) as u32;
                let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
                *buckets.entry(bucket).or_insert(0.0) += sign;
            }
        }
    }
}

/// FNV-1a over the n-gram bytes (with a token separator), salted and then
/// mixed; stable across platforms and releases.
fn hash_ngram(salt: u64, tokens: &[&str]) -> u64 {
    let mut h = salt ^ 0xcbf29ce484222325;
    for token in tokens {
        for b in token.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0x1e;
        h = h.wrapping_mul(0x100000001b3);
    }
    mix64(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;

    fn pair_example(a: &str, b: &str) -> Example {
        Example {
            id: 0,
            text_a: a.to_string(),
            text_b: Some(b.to_string()),
            label: None,
            split: "train".to_string(),
        }
    }

    fn featurizer(dim: usize) -> HashingFeaturizer {
        HashingFeaturizer::new(FeaturizerConfig {
            dim,
            ngram_orders: vec![1, 2],
            seed: 13,
        })
        .unwrap()
    }

    #[test]
    fn featurization_is_deterministic() {
        let f = featurizer(512);
        let ex = pair_example("the cat sat on the mat", "a dog barked");
        let v1 = f.featurize(&ex).unwrap();
        let v2 = f.featurize(&ex).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn output_is_unit_norm() {
        let f = featurizer(512);
        let ex = pair_example("some short sentence here", "and another one");
        let v = f.featurize(&ex).unwrap();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn swapping_segments_changes_the_vector() {
        // Golden probe pair: with distinct segment salts the swapped pair
        // lands far away (L2 distance ~sqrt(2) for disjoint supports).
        let f = featurizer(1024);
        let fwd = f
            .featurize(&pair_example("what language did tesla study", "tesla was the fourth child"))
            .unwrap();
        let swapped = f
            .featurize(&pair_example("tesla was the fourth child", "what language did tesla study"))
            .unwrap();
        let dist: f64 = fwd
            .iter()
            .zip(&swapped)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 0.5, "swapped-segment distance {dist}");
    }

    #[test]
    fn empty_text_a_is_invalid() {
        let f = featurizer(512);
        let ex = Example {
            id: 0,
            text_a: "   ".to_string(),
            text_b: None,
            label: None,
            split: "train".to_string(),
        };
        assert!(f.featurize(&ex).is_err());
    }

    #[test]
    fn lowercasing_folds_case() {
        let f = featurizer(512);
        let a = f.featurize(&pair_example("Hello World", "x")).unwrap();
        let b = f.featurize(&pair_example("hello world", "x")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dim_must_be_power_of_two() {
        assert!(HashingFeaturizer::new(FeaturizerConfig {
            dim: 1000,
            ngram_orders: vec![1],
            seed: 0,
        })
        .is_err());
    }

    #[test]
    fn sparse_matches_dense() {
        let f = featurizer(256);
        let ex = pair_example("alpha beta gamma alpha", "delta epsilon");
        let sparse = f.featurize_sparse(&ex).unwrap();
        let dense = f.featurize(&ex).unwrap();
        assert_eq!(sparse.to_dense(), dense);
        let mut buf = vec![0.0; 256];
        sparse.scatter_into(&mut buf);
        assert_eq!(buf, dense);
        sparse.clear_from(&mut buf);
        assert!(buf.iter().all(|&v| v == 0.0));
    }
}
