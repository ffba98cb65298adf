//! Allelic partitions: `a_i` alleles are each carried by exactly `i` genes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allele counts `(a_1, …, a_n)` with `Σ i·a_i = n`.
///
/// The stored vector always has length `n`. Serialized as a JSON array of
/// counts, e.g. `[0,1]` for two genes of a single allele.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct AllelicPartition {
    counts: Vec<u32>,
}

impl AllelicPartition {
    /// Build from counts; trailing zeros may be omitted or padded.
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        let n: u64 = counts
            .iter()
            .enumerate()
            .map(|(i, &a)| (i as u64 + 1) * a as u64)
            .sum();
        if n == 0 {
            return Err(Error::InvalidPartition("sample size must be positive".into()));
        }
        let n = n as usize;
        let mut counts = counts;
        while counts.len() > n {
            match counts.pop() {
                Some(0) => {}
                _ => unreachable!("a nonzero count beyond index n would exceed n"),
            }
        }
        counts.resize(n, 0);
        Ok(Self { counts })
    }

    /// Build from the list of allele class sizes (any order).
    pub fn from_sizes<I: IntoIterator<Item = usize>>(sizes: I) -> Result<Self> {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        if sizes.contains(&0) {
            return Err(Error::InvalidPartition("allele class of size zero".into()));
        }
        let n: usize = sizes.iter().sum();
        if n == 0 {
            return Err(Error::InvalidPartition("sample size must be positive".into()));
        }
        let mut counts = vec![0u32; n];
        for s in sizes {
            counts[s - 1] += 1;
        }
        Ok(Self { counts })
    }

    /// Sample size `n`.
    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Number of distinct alleles `K = Σ a_i`.
    pub fn k(&self) -> usize {
        self.counts.iter().map(|&a| a as usize).sum()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `a_size`, zero outside `1..=n`.
    pub fn count(&self, size: usize) -> u32 {
        if size == 0 {
            0
        } else {
            self.counts.get(size - 1).copied().unwrap_or(0)
        }
    }

    /// Allele class sizes, largest first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k());
        for (i, &a) in self.counts.iter().enumerate().rev() {
            out.extend(std::iter::repeat_n(i + 1, a as usize));
        }
        out
    }

    /// Iteration order: ascending in `(a_n, a_{n-1}, …, a_1)`.
    pub fn colex_cmp(&self, other: &Self) -> Ordering {
        self.counts
            .iter()
            .rev()
            .cmp(other.counts.iter().rev())
            .then(self.counts.len().cmp(&other.counts.len()))
    }

    /// All partitions of `n` in colexicographic order.
    pub fn enumerate(n: usize) -> Vec<AllelicPartition> {
        assert!(n >= 1, "partitions of a positive integer");
        let mut out = Vec::new();
        let mut parts = Vec::new();
        gen_parts(n, n, &mut parts, &mut out);
        out.sort_by(|a, b| a.colex_cmp(b));
        out
    }
}

fn gen_parts(remaining: usize, max_part: usize, parts: &mut Vec<usize>, out: &mut Vec<AllelicPartition>) {
    if remaining == 0 {
        out.push(AllelicPartition::from_sizes(parts.iter().copied()).expect("non-empty"));
        return;
    }
    for part in (1..=max_part.min(remaining)).rev() {
        parts.push(part);
        gen_parts(remaining - part, part, parts, out);
        parts.pop();
    }
}

impl TryFrom<Vec<u32>> for AllelicPartition {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AllelicPartition> for Vec<u32> {
    fn from(p: AllelicPartition) -> Self {
        p.counts
    }
}

impl fmt::Display for AllelicPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partition_counts_match_p_of_n() {
        let p = [1, 2, 3, 5, 7, 11, 15, 22, 30, 42, 56, 77];
        for (n, &expected) in (1..=12).zip(p.iter()) {
            assert_eq!(AllelicPartition::enumerate(n).len(), expected, "p({n})");
        }
    }

    #[test]
    fn colex_order_for_three() {
        let got: Vec<Vec<u32>> = AllelicPartition::enumerate(3).into_iter().map(Into::into).collect();
        assert_eq!(got, vec![vec![3, 0, 0], vec![1, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn trailing_zeros_normalized() {
        let a = AllelicPartition::new(vec![0, 1]).unwrap();
        let b = AllelicPartition::new(vec![0, 1, 0, 0, 0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 2);
        assert_eq!(a.k(), 1);
    }

    #[test]
    fn empty_partition_rejected() {
        assert!(AllelicPartition::new(vec![]).is_err());
        assert!(AllelicPartition::new(vec![0, 0]).is_err());
        assert!(AllelicPartition::from_sizes([2, 0]).is_err());
    }

    #[test]
    fn json_form_is_count_array() {
        let p = AllelicPartition::from_sizes([2]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[0,1]");
        let back: AllelicPartition = serde_json::from_str("[2,1,0,0]").unwrap();
        assert_eq!(back.sizes(), vec![2, 1, 1]);
        assert!(serde_json::from_str::<AllelicPartition>("[0,0]").is_err());
    }

    proptest! {
        #[test]
        fn sizes_roundtrip(sizes in proptest::collection::vec(1usize..8, 1..8)) {
            let p = AllelicPartition::from_sizes(sizes.iter().copied()).unwrap();
            prop_assert_eq!(p.n(), sizes.iter().sum::<usize>());
            prop_assert_eq!(p.k(), sizes.len());
            let mut sorted = sizes.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            prop_assert_eq!(p.sizes(), sorted);
            let weighted: usize = p.counts().iter().enumerate().map(|(i, &a)| (i + 1) * a as usize).sum();
            prop_assert_eq!(weighted, p.n());
        }
    }
}
