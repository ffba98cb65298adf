//! Finite populations of `2N` genes: the Moran model, Hoppe's urn for
//! age-ordered counts, Kelly's exact oldest-allele law, mean ages, the
//! charge-state model and Kesten's λ.
//!
//! Every function here takes the number of genes `two_n = 2N` directly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ExactProbability, Formula};
use crate::gem::{all_same_type_probabilities, draw_fraction, oldest_count_law};
use crate::partition::AllelicPartition;
use crate::rng::{replicate_map, rng_from_seed};
use crate::theta::{bigint_ln, Theta};

fn check_two_n(two_n: usize) -> Result<()> {
    if two_n == 0 {
        return Err(Error::Domain("population must hold at least one gene".into()));
    }
    Ok(())
}

fn check_u(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("mutation probability {u} must lie in (0, 1)")));
    }
    Ok(())
}

/// Moran θ = 2Nu/(1−u).
pub fn moran_theta(two_n: usize, u: f64) -> Result<Theta> {
    check_two_n(two_n)?;
    check_u(u)?;
    Theta::new(two_n as f64 * u / (1.0 - u))
}

/// Moran θ in exact arithmetic.
pub fn moran_theta_exact(two_n: usize, u: &BigRational) -> Result<Theta> {
    check_two_n(two_n)?;
    if !(u.is_positive() && u < &BigRational::one()) {
        return Err(Error::Domain(format!("mutation probability {u} must lie in (0, 1)")));
    }
    Theta::from_rational(BigRational::from_integer(two_n.into()) * u / (BigRational::one() - u))
}

/// The mutation probability giving Moran θ: `u = θ/(2N+θ)`.
pub fn moran_u_for_theta(two_n: usize, theta: &Theta) -> f64 {
    let t = theta.value();
    t / (two_n as f64 + t)
}

/// `2N` genes under birth–death with infinitely-many-alleles mutation.
#[derive(Clone, Debug, Serialize)]
pub struct MoranPopulation {
    pub genes: Vec<u64>,
    pub u: f64,
    pub next_label: u64,
    /// Forbid the dying gene from also being the parent.
    pub exclude_self: bool,
}

impl MoranPopulation {
    /// All genes of one allele.
    pub fn monomorphic(two_n: usize, u: f64) -> Result<Self> {
        check_two_n(two_n)?;
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!("mutation probability {u} must lie in [0, 1)")));
        }
        Ok(Self { genes: vec![0; two_n], u, next_label: 1, exclude_self: false })
    }

    pub fn with_exclusion(mut self, exclude_self: bool) -> Self {
        self.exclude_self = exclude_self;
        self
    }

    /// One gene dies and an independently chosen gene reproduces into its slot.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let size = self.genes.len();
        let dying = rng.random_range(0..size);
        let parent = if self.exclude_self && size > 1 {
            let p = rng.random_range(0..size - 1);
            if p >= dying {
                p + 1
            } else {
                p
            }
        } else {
            rng.random_range(0..size)
        };
        let label = if rng.random::<f64>() < self.u {
            self.next_label += 1;
            self.next_label - 1
        } else {
            self.genes[parent]
        };
        self.genes[dying] = label;
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: u64, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
    }

    fn partition_of(labels: impl Iterator<Item = u64>) -> AllelicPartition {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for l in labels {
            *counts.entry(l).or_default() += 1;
        }
        AllelicPartition::from_sizes(counts.into_values()).expect("non-empty population")
    }

    pub fn partition(&self) -> AllelicPartition {
        Self::partition_of(self.genes.iter().copied())
    }

    /// Partition of `size` genes drawn without replacement.
    pub fn subsample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<AllelicPartition> {
        if size == 0 || size > self.genes.len() {
            return Err(Error::Domain(format!("cannot draw {size} of {} genes", self.genes.len())));
        }
        let picks = index::sample(rng, self.genes.len(), size);
        Ok(Self::partition_of(picks.iter().map(|i| self.genes[i])))
    }
}

/// Settings for sampling the long-run Moran partition.
#[derive(Clone, Debug, Serialize)]
pub struct MoranConfig {
    pub two_n: usize,
    pub u: f64,
    pub exclude_self: bool,
    pub burn_in: u64,
    pub thinning: u64,
}

impl MoranConfig {
    /// Burn-in `20(2N)²` and thinning `(2N)²` steps.
    pub fn new(two_n: usize, u: f64) -> Self {
        let sq = (two_n * two_n) as u64;
        Self { two_n, u, exclude_self: false, burn_in: 20 * sq, thinning: sq }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MoranSample {
    pub partition: AllelicPartition,
    /// Two genes drawn without replacement share an allele.
    pub pair_same_type: bool,
}

/// `chains` independent chains, each burnt in and then sampled
/// `samples_per_chain` times with the configured thinning.
pub fn moran_stationary_samples(
    config: &MoranConfig,
    chains: usize,
    samples_per_chain: usize,
    seed: u64,
) -> Result<Vec<MoranSample>> {
    check_two_n(config.two_n)?;
    check_u(config.u)?;
    if config.two_n < 2 {
        return Err(Error::Domain("pair sub-samples need at least two genes".into()));
    }
    let per_chain = replicate_map(seed, chains, |_, s| {
        let mut rng = rng_from_seed(s);
        let mut pop = MoranPopulation::monomorphic(config.two_n, config.u)
            .expect("validated")
            .with_exclusion(config.exclude_self);
        pop.run(config.burn_in, &mut rng);
        let mut out = Vec::with_capacity(samples_per_chain);
        for i in 0..samples_per_chain {
            if i > 0 {
                pop.run(config.thinning, &mut rng);
            }
            let pair = pop.subsample(2, &mut rng).expect("two genes");
            out.push(MoranSample { partition: pop.partition(), pair_same_type: pair.k() == 1 });
        }
        out
    });
    Ok(per_chain.into_iter().flatten().collect())
}

/// Hoppe's urn: sizes `N_1, N_2, …` of the alleles of a population of `2N`
/// genes listed by age, oldest first. `N_i − 1` is binomial on the genes not
/// yet assigned (less one) with a GEM fraction as success probability.
pub fn hoppe_age_counts_with<R: Rng + ?Sized>(two_n: usize, theta: &Theta, rng: &mut R) -> Vec<usize> {
    let mut remaining = two_n as u64;
    let mut out = Vec::new();
    while remaining > 0 {
        let (x, _) = draw_fraction(theta.value(), rng);
        let extra = Binomial::new(remaining - 1, x).expect("fraction in [0,1]").sample(rng);
        out.push(1 + extra as usize);
        remaining -= 1 + extra;
    }
    out
}

pub fn hoppe_age_counts(two_n: usize, theta: &Theta, seed: u64) -> Result<Vec<usize>> {
    check_two_n(two_n)?;
    Ok(hoppe_age_counts_with(two_n, theta, &mut rng_from_seed(seed)))
}

/// `P(N_1 = 2N) = (2N−1)!/((1+θ)(2+θ)⋯(2N−1+θ))`.
pub fn hoppe_monomorphism_probability(two_n: usize, theta: &Theta) -> Result<ExactProbability> {
    check_two_n(two_n)?;
    Ok(all_same_type_probabilities(two_n, theta)?.any_type)
}

/// Kelly: the oldest allele in the population is carried by `j` genes with
/// probability `(θ/2N) C(2N,j) C(2N+θ−1,j)^{-1}`.
pub fn kelly_population_oldest_distribution(two_n: usize, theta: &Theta) -> Result<BTreeMap<usize, ExactProbability>> {
    check_two_n(two_n)?;
    oldest_count_law(two_n, theta, Formula::PopulationOldest)
}

/// `E N_1 = (2N+θ)/(1+θ)`.
pub fn mean_oldest_count(two_n: usize, theta: &Theta) -> f64 {
    let t = theta.value();
    (two_n as f64 + t) / (1.0 + t)
}

fn age_term(two_n: usize, j: usize, theta: f64) -> f64 {
    2.0 * two_n as f64 / (j as f64 * (j as f64 + theta - 1.0))
}

/// Mean age in generations of the oldest allele: `Σ_{j=1}^{2N} 4N/(j(j+θ−1))`.
pub fn mean_age_oldest(two_n: usize, theta: &Theta) -> Result<f64> {
    check_two_n(two_n)?;
    Ok((1..=two_n).map(|j| age_term(two_n, j, theta.value())).sum())
}

/// Mean age of an allele seen at population frequency `p`:
/// `Σ_{j=1}^{2N} 4N/(j(j+θ−1)) (1−(1−p)^j)`.
pub fn mean_age_given_frequency(two_n: usize, theta: &Theta, p: f64) -> Result<f64> {
    check_two_n(two_n)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("frequency {p} must lie in (0, 1]")));
    }
    let ln_q = (-p).ln_1p();
    Ok((1..=two_n)
        .map(|j| age_term(two_n, j, theta.value()) * -(j as f64 * ln_q).exp_m1())
        .sum())
}

/// Mean age of the oldest allele in a sample of `n`: `4N Σ_{j=1}^{n} 1/(j(j+θ−1))`.
pub fn mean_age_oldest_in_sample(two_n: usize, n: usize, theta: &Theta) -> Result<f64> {
    check_two_n(two_n)?;
    if n == 0 || n > two_n {
        return Err(Error::Domain(format!("sample of {n} from {two_n} genes")));
    }
    Ok((1..=n).map(|j| age_term(two_n, j, theta.value())).sum())
}

/// Integer charges under Wright–Fisher resampling with ±1 mutation.
#[derive(Clone, Debug, Serialize)]
pub struct ChargeStatePopulation {
    pub charges: Vec<i64>,
    pub u: f64,
}

impl ChargeStatePopulation {
    pub fn new(two_n: usize, u: f64) -> Result<Self> {
        check_two_n(two_n)?;
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("mutation probability {u} must lie in [0, 1]")));
        }
        Ok(Self { charges: vec![0; two_n], u })
    }

    /// One generation: every offspring copies a uniform parent, then shifts
    /// by ±1 with probability `u`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let size = self.charges.len();
        let next: Vec<i64> = (0..size)
            .map(|_| {
                let c = self.charges[rng.random_range(0..size)];
                if rng.random::<f64>() < self.u {
                    if rng.random::<bool>() {
                        c + 1
                    } else {
                        c - 1
                    }
                } else {
                    c
                }
            })
            .collect();
        self.charges = next;
    }

    pub fn range(&self) -> i64 {
        let max = self.charges.iter().max().expect("non-empty");
        let min = self.charges.iter().min().expect("non-empty");
        max - min
    }

    pub fn occupied_states(&self) -> usize {
        let mut c = self.charges.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChargeSnapshot {
    pub generation: u64,
    pub range: i64,
    pub occupied: usize,
}

/// Run from a monomorphic start, recording every `record_every` generations.
pub fn charge_state_run(
    two_n: usize,
    u: f64,
    generations: u64,
    record_every: u64,
    seed: u64,
) -> Result<Vec<ChargeSnapshot>> {
    if record_every == 0 {
        return Err(Error::Domain("record interval must be positive".into()));
    }
    let mut pop = ChargeStatePopulation::new(two_n, u)?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    for g in 1..=generations {
        pop.step(&mut rng);
        if g % record_every == 0 {
            out.push(ChargeSnapshot { generation: g, range: pop.range(), occupied: pop.occupied_states() });
        }
    }
    Ok(out)
}

/// A population size, either written out or as an exact power of ten.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PopulationSize {
    Exact(BigUint),
    PowerOfTen(u64),
}

impl PopulationSize {
    fn ln(&self) -> f64 {
        match self {
            PopulationSize::Exact(x) if x.is_zero() => f64::NEG_INFINITY,
            PopulationSize::Exact(x) => bigint_ln(&BigInt::from(x.clone())),
            PopulationSize::PowerOfTen(e) => *e as f64 * std::f64::consts::LN_10,
        }
    }
}

impl From<u64> for PopulationSize {
    fn from(v: u64) -> Self {
        PopulationSize::Exact(v.into())
    }
}

impl FromStr for PopulationSize {
    type Err = Error;

    /// Accepts plain digits or `10^E`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Domain(format!("cannot read population size {s:?}"));
        if let Some(e) = s.strip_prefix("10^") {
            return e.parse().map(PopulationSize::PowerOfTen).map_err(|_| bad());
        }
        s.parse::<BigUint>().map(PopulationSize::Exact).map_err(|_| bad())
    }
}

impl fmt::Display for PopulationSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationSize::Exact(x) => write!(f, "{x}"),
            PopulationSize::PowerOfTen(e) => write!(f, "10^{e}"),
        }
    }
}

/// Kesten's λ(2N): the largest `k` with `γ_k < 2N`, where `γ_0 = 1` and
/// `γ_{k+1} = e^{γ_k}`. Since `γ_{k+1} < 2N ⇔ γ_k < ln 2N` the comparison is
/// done on `ln 2N`. Returns 0 when no `k` qualifies (2N = 1).
pub fn kesten_lambda(two_n: &PopulationSize) -> Result<u32> {
    if *two_n == PopulationSize::Exact(BigUint::zero()) {
        return Err(Error::Domain("population must hold at least one gene".into()));
    }
    let ln = two_n.ln();
    let mut k = 0;
    let mut gamma = 1.0f64;
    while gamma < ln {
        k += 1;
        gamma = gamma.exp();
    }
    Ok(k)
}
