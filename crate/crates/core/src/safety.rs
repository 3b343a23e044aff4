//! Safety labels: per-user labels from visited blocks, and a venue safety
//! index computed from the venue's published safety histogram.
//!
//! All values live in [0, 1]; 1 is safest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lcp::{DimensionKind, DimensionSpec};

pub const DEFAULT_BUCKETS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafetyError {
    #[error("empty input")]
    Empty,
    #[error("invalid buckets: {0}")]
    Buckets(String),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("histogram has {got} entries, expected {expected}")]
    Length { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Midpoint,
    UpperBound,
}

/// Ordered, disjoint sub-intervals covering [0, 1]. The last one is closed
/// on the right so that 1.0 belongs to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyBuckets {
    edges: Vec<f64>,
    mode: WeightMode,
}

impl SafetyBuckets {
    pub fn equal(count: usize, mode: WeightMode) -> Result<Self, SafetyError> {
        if count == 0 {
            return Err(SafetyError::Buckets("need at least one bucket".into()));
        }
        let edges = (0..=count).map(|i| i as f64 / count as f64).collect();
        Ok(Self { edges, mode })
    }

    pub fn from_edges(edges: Vec<f64>, mode: WeightMode) -> Result<Self, SafetyError> {
        if edges.len() < 2 || edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
            return Err(SafetyError::Buckets("edges must run from 0 to 1".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SafetyError::Buckets("edges must be strictly increasing".into()));
        }
        Ok(Self { edges, mode })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn weight(&self, bucket: usize) -> f64 {
        let (lo, hi) = (self.edges[bucket], self.edges[bucket + 1]);
        match self.mode {
            WeightMode::Midpoint => (lo + hi) / 2.0,
            WeightMode::UpperBound => hi,
        }
    }

    pub fn bucket_of(&self, value: f64) -> Result<usize, SafetyError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(SafetyError::OutOfRange(value));
        }
        let last = self.len() - 1;
        Ok(self.edges[1..=last].iter().take_while(|&&edge| edge <= value).count())
    }

    /// The matching profile dimension, usable in a venue's configuration.
    pub fn dimension(&self, name: impl Into<String>) -> DimensionSpec {
        DimensionSpec {
            name: name.into(),
            kind: DimensionKind::Interval { boundaries: self.edges.clone(), closed_upper: true },
        }
    }
}

/// Frequency-weighted mean of the labels of the blocks a user visited.
pub fn user_label_from_blocks(labels: &[f64], frequencies: &[f64]) -> Result<f64, SafetyError> {
    if labels.is_empty() || labels.len() != frequencies.len() {
        return Err(SafetyError::Empty);
    }
    if let Some(&bad) = labels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(SafetyError::OutOfRange(bad));
    }
    if frequencies.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(SafetyError::Buckets("frequencies must be non-negative".into()));
    }
    let total: f64 = frequencies.iter().sum();
    if total <= 0.0 {
        return Err(SafetyError::Empty);
    }
    let weighted: f64 = labels.iter().zip(frequencies).map(|(l, f)| l * f).sum();
    Ok((weighted / total).clamp(0.0, 1.0))
}

/// Weighted average of bucket weights by the published counts.
pub fn venue_safety(histogram: &[u64], buckets: &SafetyBuckets) -> Result<f64, SafetyError> {
    if histogram.len() != buckets.len() {
        return Err(SafetyError::Length { got: histogram.len(), expected: buckets.len() });
    }
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(SafetyError::Empty);
    }
    let weighted: f64 = histogram.iter().enumerate().map(|(i, &c)| c as f64 * buckets.weight(i)).sum();
    Ok((weighted / total as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcp::{ProfileValue, SubRange};
    use proptest::prelude::*;

    fn five() -> SafetyBuckets {
        SafetyBuckets::equal(5, WeightMode::Midpoint).unwrap()
    }

    #[test]
    fn user_labels() {
        assert!((user_label_from_blocks(&[0.8, 0.4], &[3.0, 1.0]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(user_label_from_blocks(&[0.5], &[2.0]).unwrap(), 0.5);
        assert_eq!(user_label_from_blocks(&[0.5, 0.1], &[0.0, 0.0]), Err(SafetyError::Empty));
        assert_eq!(user_label_from_blocks(&[], &[]), Err(SafetyError::Empty));
        assert_eq!(user_label_from_blocks(&[1.5], &[1.0]), Err(SafetyError::OutOfRange(1.5)));
    }

    #[test]
    fn venue_index_examples() {
        assert!((venue_safety(&[0, 0, 0, 0, 7], &five()).unwrap() - 0.9).abs() < 1e-12);
        assert!((venue_safety(&[1, 0, 0, 0, 1], &five()).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(venue_safety(&[0; 5], &five()), Err(SafetyError::Empty));
        assert!(matches!(venue_safety(&[1, 2], &five()), Err(SafetyError::Length { .. })));
        let upper = SafetyBuckets::equal(5, WeightMode::UpperBound).unwrap();
        assert!((venue_safety(&[0, 0, 0, 0, 7], &upper).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn buckets_cover_unit_interval() {
        let b = five();
        assert_eq!(b.bucket_of(0.0).unwrap(), 0);
        assert_eq!(b.bucket_of(0.2).unwrap(), 1);
        assert_eq!(b.bucket_of(0.79).unwrap(), 3);
        assert_eq!(b.bucket_of(1.0).unwrap(), 4);
        assert!(b.bucket_of(-0.1).is_err());
        assert!(SafetyBuckets::from_edges(vec![0.0, 0.5, 0.4, 1.0], WeightMode::Midpoint).is_err());
        assert!(SafetyBuckets::equal(0, WeightMode::Midpoint).is_err());
    }

    #[test]
    fn dimension_agrees_with_bucketing() {
        let b = five();
        let spec = b.dimension("safety");
        for value in [0.0, 0.1, 0.2, 0.45, 0.6, 0.99, 1.0] {
            let j = spec.classify(&ProfileValue::Number(value)).unwrap();
            assert_eq!(j, SubRange(b.bucket_of(value).unwrap() + 1), "{value}");
        }
    }

    proptest! {
        #[test]
        fn index_in_range_and_monotone(counts in proptest::collection::vec(0u64..20, 5), from in 0usize..4) {
            let b = five();
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let base = venue_safety(&counts, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            if counts[from] > 0 {
                let mut shifted = counts.clone();
                shifted[from] -= 1;
                shifted[from + 1] += 1;
                prop_assert!(venue_safety(&shifted, &b).unwrap() > base);
            }
        }
    }
}
