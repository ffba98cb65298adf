//! Random permutations and random mappings, whose cycle and component sizes
//! follow the ESF with θ = 1 exactly and θ = ½ in the limit.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::AllelicPartition;
use crate::rng::{replicate_map, rng_from_seed};
use crate::stats::MeanEstimate;

/// `a_j` cycles (or components) of size `j`.
pub type CycleType = AllelicPartition;

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    Ok(())
}

/// Cycle type of a permutation of `0..n` given in one-line notation.
pub fn permutation_cycle_type(perm: &[usize]) -> Result<CycleType> {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            len += 1;
            i = *perm.get(i).filter(|&&x| x < n).ok_or_else(|| Error::Validation("not a permutation".into()))?;
        }
        if i != start {
            return Err(Error::Validation("not a permutation".into()));
        }
        sizes.push(len);
    }
    AllelicPartition::from_sizes(sizes)
}

pub fn random_permutation_cycle_type_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CycleType {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    permutation_cycle_type(&perm).expect("shuffle is a permutation")
}

pub fn random_permutation_cycle_type(n: usize, seed: u64) -> Result<CycleType> {
    check_n(n)?;
    Ok(random_permutation_cycle_type_with(n, &mut rng_from_seed(seed)))
}

/// Cycle-type law of a uniform permutation of `n`, by visiting all `n!`.
pub fn exhaustive_cycle_type_law(n: usize) -> Result<BTreeMap<Vec<u32>, BigRational>> {
    check_n(n)?;
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut total = 0u64;
    for perm in (0..n).permutations(n) {
        let ct = permutation_cycle_type(&perm).expect("permutation");
        *counts.entry(ct.counts().to_vec()).or_default() += 1;
        total += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, BigRational::new(c.into(), total.into())))
        .collect())
}

/// `P(longest cycle > n/2) = 1 − ½ + ⅓ − ⋯ ± 1/n`.
pub fn longest_cycle_exact_tail(n: usize) -> Result<BigRational> {
    check_n(n)?;
    let mut acc = BigRational::zero();
    for i in 1..=n {
        let term = BigRational::new(1.into(), i.into());
        if i % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(acc)
}

/// Same tail, counted over all `n!` permutations.
pub fn longest_cycle_tail_by_enumeration(n: usize) -> Result<BigRational> {
    let law = exhaustive_cycle_type_law(n)?;
    Ok(law
        .iter()
        .filter(|(counts, _)| counts.iter().enumerate().any(|(i, &a)| a > 0 && 2 * (i + 1) > n))
        .map(|(_, p)| p.clone())
        .sum())
}

/// Component sizes of the functional graph `i → f[i]`.
///
/// Each unvisited point is followed until the walk meets either an already
/// labeled point (joining its component) or itself (a new cycle).
pub fn mapping_component_sizes(f: &[usize]) -> Result<CycleType> {
    let n = f.len();
    if f.iter().any(|&x| x >= n) {
        return Err(Error::Validation("mapping leaves its domain".into()));
    }
    const NONE: usize = usize::MAX;
    let mut comp = vec![NONE; n];
    let mut on_path = vec![false; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut path = Vec::new();
    for start in 0..n {
        if comp[start] != NONE {
            continue;
        }
        let mut i = start;
        while comp[i] == NONE && !on_path[i] {
            on_path[i] = true;
            path.push(i);
            i = f[i];
        }
        let c = if comp[i] != NONE {
            comp[i]
        } else {
            sizes.push(0);
            sizes.len() - 1
        };
        for &p in &path {
            comp[p] = c;
            on_path[p] = false;
        }
        sizes[c] += path.len();
        path.clear();
    }
    AllelicPartition::from_sizes(sizes)
}

pub fn random_mapping_component_sizes_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CycleType {
    let f: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    mapping_component_sizes(&f).expect("valid mapping")
}

pub fn random_mapping_component_sizes(n: usize, seed: u64) -> Result<CycleType> {
    check_n(n)?;
    Ok(random_mapping_component_sizes_with(n, &mut rng_from_seed(seed)))
}

fn largest_part(p: &CycleType) -> usize {
    p.counts().iter().rposition(|&a| a > 0).map_or(0, |i| i + 1)
}

/// Monte Carlo summary of the largest cycle or component.
#[derive(Clone, Debug, Serialize)]
pub struct LargestPartSummary {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Largest part divided by `n`.
    pub mean_fraction: MeanEstimate,
    /// Indicator that the largest part exceeds `n/2`.
    pub exceeds_half: MeanEstimate,
}

fn summarize(n: usize, replicates: usize, seed: u64, parts: Vec<CycleType>) -> LargestPartSummary {
    let largest: Vec<usize> = parts.iter().map(largest_part).collect();
    LargestPartSummary {
        n,
        replicates,
        seed,
        mean_fraction: MeanEstimate::from_values(largest.iter().map(|&l| l as f64 / n as f64)),
        exceeds_half: MeanEstimate::from_values(largest.iter().map(|&l| if 2 * l > n { 1.0 } else { 0.0 })),
    }
}

pub fn permutation_largest_cycle(n: usize, replicates: usize, seed: u64) -> Result<LargestPartSummary> {
    check_n(n)?;
    let parts = replicate_map(seed, replicates, |_, s| random_permutation_cycle_type_with(n, &mut rng_from_seed(s)));
    Ok(summarize(n, replicates, seed, parts))
}

pub fn mapping_largest_component(n: usize, replicates: usize, seed: u64) -> Result<LargestPartSummary> {
    check_n(n)?;
    let parts = replicate_map(seed, replicates, |_, s| random_mapping_component_sizes_with(n, &mut rng_from_seed(s)));
    Ok(summarize(n, replicates, seed, parts))
}
