//! Hashed character n-gram features.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Definition of the hashed feature space.
///
/// Each whitespace token contributes its char n-grams of orders
/// `min_order..=max_order` plus, optionally, the token itself. N-grams never
/// cross token boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSpace {
    pub min_order: usize,
    pub max_order: usize,
    pub token_unigrams: bool,
    pub dimension: usize,
}

impl Default for FeatureSpace {
    fn default() -> Self {
        Self { min_order: 2, max_order: 4, token_unigrams: true, dimension: 1 << 18 }
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|(_, v)| v * v).sum())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i as usize] * v).sum()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(tag: u8, text: &str) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in core::iter::once(&tag).chain(text.as_bytes()) {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Bucket of a char n-gram (tag `c`) or a whole token (tag `w`).
pub fn bucket(tag: u8, feature: &str, dimension: usize) -> u32 {
    (fnv1a(tag, feature) % dimension as u64) as u32
}

/// Lowercased, hashed, L2-normalized feature vector of `text`.
pub fn featurize(text: &str, space: &FeatureSpace) -> SparseVector {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    let mut gram = String::new();
    for token in text.split_whitespace() {
        let chars: Vec<char> = token.chars().flat_map(char::to_lowercase).collect();
        for order in space.min_order..=space.max_order {
            if order == 0 || order > chars.len() {
                continue;
            }
            for window in chars.windows(order) {
                gram.clear();
                gram.extend(window);
                *counts.entry(bucket(b'c', &gram, space.dimension)).or_default() += 1.0;
            }
        }
        if space.token_unigrams {
            gram.clear();
            gram.extend(&chars);
            *counts.entry(bucket(b'w', &gram, space.dimension)).or_default() += 1.0;
        }
    }
    let mut vector = SparseVector { entries: counts.into_iter().collect() };
    let norm = vector.norm();
    if norm > 0.0 {
        for (_, v) in &mut vector.entries {
            *v /= norm;
        }
    }
    vector
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bigrams_only(dimension: usize) -> FeatureSpace {
        FeatureSpace { min_order: 2, max_order: 2, token_unigrams: false, dimension }
    }

    #[test]
    fn deterministic() {
        let space = FeatureSpace::default();
        assert_eq!(featurize("右下腹痛 fever", &space), featurize("右下腹痛 fever", &space));
    }

    #[test]
    fn abc_bigrams_hit_two_buckets() {
        // FNV-1a 64 of b"cab" and b"cbc", reduced mod 16, computed out of band.
        assert_eq!(bucket(b'c', "ab", 16), 1);
        assert_eq!(bucket(b'c', "bc", 16), 9);
        let v = featurize("abc", &bigrams_only(16));
        let h = 1.0 / libm::sqrt(2.0);
        assert_eq!(v.entries, [(1, h), (9, h)]);
    }

    #[test]
    fn duplicated_text_keeps_direction() {
        let space = FeatureSpace::default();
        let once = featurize("dry cough at night", &space);
        let twice = featurize("dry cough at night dry cough at night", &space);
        assert_eq!(once.entries.len(), twice.entries.len());
        for (a, b) in once.entries.iter().zip(&twice.entries) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_norm_and_case_folding() {
        let space = FeatureSpace::default();
        let v = featurize("Severe HEADACHE", &space);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert_eq!(v, featurize("severe headache", &space));
    }

    #[test]
    fn single_char_without_unigrams_is_zero() {
        let v = featurize("a", &bigrams_only(1024));
        assert_eq!(v.nnz(), 0);
    }
}
