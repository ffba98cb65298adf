//! Kingman n-coalescent, with and without infinitely-many-alleles mutation.
//!
//! Time is measured in units of 2N generations. At `j` lineages each of the
//! `j(j−1)/2` pairs merges at rate 1 and, under mutation, each lineage mutates
//! at rate θ/2.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::AllelicPartition;
use crate::rng::{replicate_map, rng_from_seed};
use crate::stats::MeanEstimate;
use crate::theta::Theta;

/// Two classes merging at `time`. Leaves are classes `0..n`; the class formed
/// by the `i`-th event gets id `n + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoalescenceEvent {
    pub time: f64,
    pub left: usize,
    pub right: usize,
    pub merged: usize,
}

/// Equivalence classes of the leaves at some time in the past.
#[derive(Clone, Debug)]
pub struct CoalescentState {
    ids: Vec<usize>,
    classes: Vec<Vec<usize>>,
    pub time: f64,
    n: usize,
    next_id: usize,
}

impl CoalescentState {
    pub fn new(n: usize) -> Self {
        Self {
            ids: (0..n).collect(),
            classes: (0..n).map(|i| vec![i]).collect(),
            time: 0.0,
            n,
            next_id: n,
        }
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Apply one event, checking that it joins two live classes forward in time.
    pub fn apply(&mut self, event: &CoalescenceEvent) -> Result<()> {
        let find = |id: usize| self.ids.iter().position(|&x| x == id);
        let (a, b) = match (find(event.left), find(event.right)) {
            (Some(a), Some(b)) if a != b => (a, b),
            _ => return Err(Error::Validation(format!("event {event:?} does not join two live classes"))),
        };
        if event.time < self.time || event.merged != self.next_id {
            return Err(Error::Validation(format!("event {event:?} out of order")));
        }
        let (hi, lo) = (a.max(b), a.min(b));
        let moved = self.classes.swap_remove(hi);
        self.ids.swap_remove(hi);
        self.classes[lo].extend(moved);
        self.classes[lo].sort_unstable();
        self.ids[lo] = event.merged;
        self.next_id += 1;
        self.time = event.time;
        Ok(())
    }

    /// True when the classes partition `{0..n}`.
    pub fn is_partition(&self) -> bool {
        let mut seen = vec![false; self.n];
        for c in &self.classes {
            for &leaf in c {
                if leaf >= self.n || seen[leaf] {
                    return false;
                }
                seen[leaf] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn pair_rate(j: usize) -> f64 {
    (j * (j - 1)) as f64 / 2.0
}

/// Two distinct uniform indices below `j`.
fn uniform_pair<R: Rng + ?Sized>(j: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..j);
    let mut b = rng.random_range(0..j - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

pub fn simulate_tree_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<CoalescenceEvent>> {
    if n < 2 {
        return Err(Error::Domain("a tree needs at least two leaves".into()));
    }
    let mut live: Vec<usize> = (0..n).collect();
    let mut time = 0.0;
    let mut events = Vec::with_capacity(n - 1);
    for j in (2..=n).rev() {
        time += Exp::new(pair_rate(j)).expect("positive rate").sample(rng);
        let (a, b) = uniform_pair(j, rng);
        let merged = n + events.len();
        events.push(CoalescenceEvent { time, left: live[a], right: live[b], merged });
        let (hi, lo) = (a.max(b), a.min(b));
        live.swap_remove(hi);
        live[lo] = merged;
    }
    Ok(events)
}

/// Coalescence events of one n-coalescent tree, most recent first.
pub fn simulate_tree(n: usize, seed: u64) -> Result<Vec<CoalescenceEvent>> {
    simulate_tree_with(n, &mut rng_from_seed(seed))
}

/// One run of the coalescent with infinitely-many-alleles mutation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoalescentReplicate {
    pub partition: AllelicPartition,
    pub k: usize,
    pub t_mrcas: f64,
    /// Sample count of the oldest allele in the sample.
    pub x_n: usize,
    /// Sample count of the allele carried by the sample's common ancestor.
    pub y_n: usize,
    pub seed: u64,
}

/// Allele labels of a simulated sample. Allele ids grow backward in time, so
/// a larger id is an older mutation; Eve's type is [`ImaSample::eve`].
#[derive(Clone, Debug)]
pub struct ImaSample {
    pub allele_of_leaf: Vec<usize>,
    pub eve: usize,
    pub t_mrcas: f64,
    /// Events that removed a lineage still subtending unlabeled leaves; always `n`.
    pub defining_events: usize,
}

/// Backward simulation over the full tree.
///
/// At `j` lineages the next event is a mutation with probability
/// `θ/(j+θ−1)`, else a coalescence; each event waits `Exp(j(j+θ−1)/2)`.
/// A mutation labels the still-unlabeled leaves below a uniform lineage with a
/// fresh allele. Leaves unlabeled when one lineage remains carry Eve's type.
/// `leaf_order[i]` is the leaf initially carried by lineage `i`.
pub fn simulate_ima_with<R: Rng + ?Sized>(
    theta: &Theta,
    leaf_order: &[usize],
    rng: &mut R,
) -> Result<ImaSample> {
    let n = leaf_order.len();
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let t = theta.value();
    const UNSET: usize = usize::MAX;
    let mut allele_of_leaf = vec![UNSET; n];
    let mut lineages: Vec<Vec<usize>> = leaf_order.iter().map(|&l| vec![l]).collect();
    let mut next_allele = 0usize;
    let mut active = n;
    let mut defining_events = 0usize;
    let mut time = 0.0;
    while lineages.len() > 1 && active > 0 {
        let j = lineages.len();
        let total = j as f64 * (j as f64 - 1.0 + t) / 2.0;
        time += Exp::new(total).expect("positive rate").sample(rng);
        if rng.random::<f64>() < t / (j as f64 - 1.0 + t) {
            let i = rng.random_range(0..j);
            let leaves = std::mem::take(&mut lineages[i]);
            if !leaves.is_empty() {
                for leaf in leaves {
                    allele_of_leaf[leaf] = next_allele;
                }
                next_allele += 1;
                active -= 1;
                defining_events += 1;
            }
        } else {
            let (a, b) = uniform_pair(j, rng);
            let (hi, lo) = (a.max(b), a.min(b));
            let moved = lineages.swap_remove(hi);
            if !moved.is_empty() && !lineages[lo].is_empty() {
                active -= 1;
                defining_events += 1;
            }
            lineages[lo].extend(moved);
        }
    }
    // Finish the time overlay once every leaf is labeled: the remaining
    // coalescences no longer affect the sample's types.
    for j in (2..=lineages.len()).rev() {
        time += Exp::new(pair_rate(j)).expect("positive rate").sample(rng);
    }
    let eve = next_allele;
    if active == 1 {
        for lineage in &lineages {
            for &leaf in lineage {
                allele_of_leaf[leaf] = eve;
            }
        }
        defining_events += 1;
    }
    debug_assert!(allele_of_leaf.iter().all(|&a| a != UNSET));
    Ok(ImaSample { allele_of_leaf, eve, t_mrcas: time, defining_events })
}

impl ImaSample {
    pub fn replicate(&self, seed: u64) -> CoalescentReplicate {
        let mut counts = vec![0usize; self.eve + 1];
        for &a in &self.allele_of_leaf {
            counts[a] += 1;
        }
        let y_n = counts[self.eve];
        let x_n = counts.iter().rev().copied().find(|&c| c > 0).expect("non-empty sample");
        let partition =
            AllelicPartition::from_sizes(counts.iter().copied().filter(|&c| c > 0)).expect("positive sizes");
        CoalescentReplicate { k: partition.k(), partition, t_mrcas: self.t_mrcas, x_n, y_n, seed }
    }
}

pub fn run_ima_replicate(n: usize, theta: &Theta, seed: u64) -> Result<CoalescentReplicate> {
    let order: Vec<usize> = (0..n).collect();
    let sample = simulate_ima_with(theta, &order, &mut rng_from_seed(seed))?;
    Ok(sample.replicate(seed))
}

/// Independent replicates; replicate `i` uses the `i`-th derived seed, which is
/// stored in the record so it can be rerun alone.
pub fn run_ima_replicates(n: usize, theta: &Theta, replicates: usize, seed: u64) -> Result<Vec<CoalescentReplicate>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    replicate_map(seed, replicates, |_, s| run_ima_replicate(n, theta, s)).into_iter().collect()
}

/// Number of mutations among the `n` defining events `j = n, …, 1`, each a
/// mutation with probability `θ/(j+θ−1)` (certain at `j = 1`).
pub fn k_from_defining_events_with<R: Rng + ?Sized>(n: usize, theta: &Theta, rng: &mut R) -> usize {
    let t = theta.value();
    (1..=n)
        .rev()
        .filter(|&j| rng.random::<f64>() < t / (j as f64 - 1.0 + t))
        .count()
}

pub fn k_from_defining_events(n: usize, theta: &Theta, seed: u64) -> Result<usize> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    Ok(k_from_defining_events_with(n, theta, &mut rng_from_seed(seed)))
}

/// Height of an n-coalescent tree: a sum of independent `Exp(j(j−1)/2)`.
pub fn sample_tmrca<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    (2..=n).rev().map(|j| Exp::new(pair_rate(j)).expect("positive rate").sample(rng)).sum()
}

/// `E T_MRCAS = 2(1 − 1/n)`.
pub fn tmrca_mean(n: usize) -> f64 {
    2.0 * (1.0 - 1.0 / n as f64)
}

/// `Var T_MRCAS = Σ_{j=2}^{n} 4/(j²(j−1)²)`.
pub fn tmrca_variance(n: usize) -> f64 {
    (2..=n).map(|j| 4.0 / ((j * j * (j - 1) * (j - 1)) as f64)).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Values at or beyond the last bin edge.
    pub overflow: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TmrcaStatistics {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub mean: MeanEstimate,
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
    pub histogram: Histogram,
}

const HISTOGRAM_BINS: usize = 40;

pub fn t_mrcas_statistics(n: usize, replicates: usize, seed: u64) -> Result<TmrcaStatistics> {
    if n < 2 {
        return Err(Error::Domain("a tree needs at least two leaves".into()));
    }
    if replicates < 1000 {
        return Err(Error::Domain("at least 1000 replicates are required".into()));
    }
    let heights = replicate_map(seed, replicates, |_, s| sample_tmrca(n, &mut rng_from_seed(s)));
    let mean = MeanEstimate::from_values(heights.iter().copied());
    // bins cover [0, 4): the mean is below 2 and the sd below 1.1
    let bin_width = 4.0 / HISTOGRAM_BINS as f64;
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    let mut overflow = 0;
    for &h in &heights {
        match counts.get_mut((h / bin_width) as usize) {
            Some(c) => *c += 1,
            None => overflow += 1,
        }
    }
    Ok(TmrcaStatistics {
        n,
        replicates,
        seed,
        variance: mean.std_dev * mean.std_dev,
        mean,
        expected_mean: tmrca_mean(n),
        expected_variance: tmrca_variance(n),
        histogram: Histogram { bin_width, counts, overflow },
    })
}
