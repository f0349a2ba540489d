//! Population-wide filter of retired passwords.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_CAPACITY: u64 = 100_000;
pub const DEFAULT_FALSE_POSITIVE_RATE: f64 = 0.01;
const SIZING_HEADROOM: f64 = 0.9;

fn predicted_rate(bits: u64, hashes: u32, inserted: u64) -> f64 {
    let k = hashes as f64;
    (1.0 - (-k * inserted as f64 / bits as f64).exp()).powf(k)
}

/// A Bloom filter over password strings. Never yields a false negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetiredPasswordFilter {
    words: Vec<u64>,
    bit_count: u64,
    hash_count: u32,
    inserted: u64,
}

impl Default for RetiredPasswordFilter {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_CAPACITY, DEFAULT_FALSE_POSITIVE_RATE)
    }
}

impl RetiredPasswordFilter {
    /// Sizes the filter with the optimal `m = -n ln p / ln² 2` and
    /// `k = (m / n) ln 2`, then grows `m` until the predicted rate with the
    /// rounded `k` is at most 90% of the target, so that an empirical audit
    /// at capacity stays under the target.
    pub fn with_capacity(capacity: u64, false_positive_rate: f64) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        assert!(
            false_positive_rate > 0.0 && false_positive_rate < 1.0,
            "false-positive rate must lie in (0, 1)"
        );
        let ln2 = std::f64::consts::LN_2;
        let n = capacity as f64;
        let hashes = |m: u64| ((m as f64 / n) * ln2).round().max(1.0) as u32;
        let mut m = (-n * false_positive_rate.ln() / (ln2 * ln2)).ceil().max(64.0) as u64;
        while predicted_rate(m, hashes(m), capacity) > SIZING_HEADROOM * false_positive_rate {
            m += m.div_ceil(200);
        }
        RetiredPasswordFilter {
            words: vec![0; m.div_ceil(64) as usize],
            bit_count: m,
            hash_count: hashes(m),
            inserted: 0,
        }
    }

    /// `(1 - e^{-k n / m})^k` after `inserted` insertions.
    pub fn predicted_false_positive_rate(&self, inserted: u64) -> f64 {
        predicted_rate(self.bit_count, self.hash_count, inserted)
    }

    pub fn bit_count(&self) -> u64 {
        self.bit_count
    }

    pub fn hash_count(&self) -> u32 {
        self.hash_count
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Bit positions for `password` by double hashing a SHA-256 digest.
    pub fn positions(&self, password: &str) -> Vec<u64> {
        let digest = Sha256::new()
            .chain_update(b"tpp-retired\0")
            .chain_update(password.as_bytes())
            .finalize();
        let h1 = u64::from_le_bytes(digest[0..8].try_into().unwrap());
        let h2 = u64::from_le_bytes(digest[8..16].try_into().unwrap()) | 1;
        (0..self.hash_count as u64)
            .map(|i| h1.wrapping_add(i.wrapping_mul(h2)) % self.bit_count)
            .collect()
    }

    /// Inserts `password` and returns the bit positions it set.
    pub fn insert(&mut self, password: &str) -> Vec<u64> {
        let positions = self.positions(password);
        self.set_positions(&positions);
        positions
    }

    /// Replays an insertion from its bit positions.
    pub fn set_positions(&mut self, positions: &[u64]) {
        for &p in positions {
            let p = p % self.bit_count;
            self.words[(p / 64) as usize] |= 1 << (p % 64);
        }
        self.inserted += 1;
    }

    pub fn contains(&self, password: &str) -> bool {
        self.positions(password)
            .into_iter()
            .all(|p| self.words[(p / 64) as usize] & (1 << (p % 64)) != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_sizing_starts_from_the_optimal_formulas() {
        let f = RetiredPasswordFilter::default();
        // Optimal: m = ceil(1e5 * ln(100) / ln(2)^2) = 958506, k = 7, which
        // predicts 1.003% at capacity.
        let optimal = (1.0 - (-7.0 * 1e5 / 958_506.0f64).exp()).powi(7);
        assert!(optimal > 0.01);
        assert!(f.bit_count() >= 958_506 && f.bit_count() < 1_010_000, "{}", f.bit_count());
        assert_eq!(f.hash_count(), 7);
        let predicted = f.predicted_false_positive_rate(DEFAULT_CAPACITY);
        assert!(predicted <= 0.009 && predicted > 0.0085, "{predicted}");
    }

    #[test]
    fn empty_filter_says_fresh() {
        let f = RetiredPasswordFilter::default();
        assert!(!f.contains("S7Ay"));
        assert!(!f.contains(""));
    }

    #[test]
    fn inserted_password_is_retired() {
        let mut f = RetiredPasswordFilter::default();
        f.insert("S7Ay");
        assert!(f.contains("S7Ay"));
        assert_eq!(f.inserted(), 1);
    }

    #[test]
    fn replayed_positions_rebuild_the_filter() {
        let mut a = RetiredPasswordFilter::with_capacity(100, 0.01);
        let mut b = a.clone();
        let pos = a.insert("anhour");
        b.set_positions(&pos);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn no_false_negatives(words in proptest::collection::vec(".{0,12}", 1..50)) {
            let mut f = RetiredPasswordFilter::with_capacity(64, 0.05);
            for w in &words {
                f.insert(w);
            }
            for w in &words {
                prop_assert!(f.contains(w));
            }
        }
    }
}
