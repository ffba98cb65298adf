//! Watterson's homozygosity test of neutrality, with the null law of the
//! partition conditional on the observed number of alleles.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::AllelicPartition;
use crate::rng::{replicate_map, rng_from_seed};

/// `F = Σ_j a_j (j/n)²`.
pub fn sample_homozygosity(p: &AllelicPartition) -> f64 {
    homozygosity_numerator(p) as f64 / (p.n() * p.n()) as f64
}

/// `n² F = Σ_j a_j j²`, exact, so ties compare exactly.
fn homozygosity_numerator(p: &AllelicPartition) -> u64 {
    p.counts()
        .iter()
        .enumerate()
        .map(|(i, &a)| a as u64 * ((i + 1) * (i + 1)) as u64)
        .sum()
}

/// `Σ_{i=1}^{n} θ/(θ+i−1)`, the mean number of alleles.
fn mean_alleles(n: usize, theta: f64) -> f64 {
    (0..n).map(|i| theta / (theta + i as f64)).sum()
}

/// θ with `E K = k`, by bisection on the log scale. Needs `1 < k < n`.
pub fn theta_for_allele_count(n: usize, k: usize) -> f64 {
    let target = k as f64;
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mean_alleles(n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// Draws from the ESF partition law conditional on `K = k`.
#[derive(Clone, Debug)]
pub struct ConditionalSampler {
    n: usize,
    k: usize,
    theta: f64,
}

impl ConditionalSampler {
    /// Tune θ so that `k` alleles are typical.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        let theta = if 1 < k && k < n { theta_for_allele_count(n, k) } else { 1.0 };
        Ok(Self { n, k, theta })
    }

    /// Use a given urn θ; the conditional law does not depend on it.
    pub fn with_theta(n: usize, k: usize, theta: f64) -> Result<Self> {
        check_nk(n, k)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("urn theta {theta} must be positive")));
        }
        Ok(Self { n, k, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Sequential urn: gene `i` starts a new allele with probability
    /// `θ/(θ+i−1)`, otherwise copies a uniform earlier gene. Paths that
    /// cannot end with exactly `k` alleles are restarted.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AllelicPartition {
        let (n, k) = (self.n, self.k);
        if k == n {
            return AllelicPartition::new(vec![n as u32]).expect("valid");
        }
        if k == 1 {
            let mut c = vec![0; n];
            c[n - 1] = 1;
            return AllelicPartition::new(c).expect("valid");
        }
        let mut owner: Vec<usize> = Vec::with_capacity(n);
        let mut sizes: Vec<usize> = Vec::with_capacity(k);
        'attempt: loop {
            owner.clear();
            sizes.clear();
            for i in 0..n {
                let fresh = rng.random::<f64>() < self.theta / (self.theta + i as f64);
                if fresh {
                    if sizes.len() == k {
                        continue 'attempt;
                    }
                    owner.push(sizes.len());
                    sizes.push(1);
                } else {
                    let a = owner[rng.random_range(0..i)];
                    owner.push(a);
                    sizes[a] += 1;
                }
                if sizes.len() + (n - i - 1) < k {
                    continue 'attempt;
                }
            }
            return AllelicPartition::from_sizes(sizes.iter().copied()).expect("positive sizes");
        }
    }
}

pub fn conditional_null_sample(n: usize, k: usize, seed: u64) -> Result<AllelicPartition> {
    Ok(ConditionalSampler::new(n, k)?.sample(&mut rng_from_seed(seed)))
}

#[derive(Clone, Debug, Serialize)]
pub struct NeutralityReport {
    pub statistic: f64,
    pub k: usize,
    pub n: usize,
    /// `P(F ≤ observed)` under the null; small values point to heterozygote advantage.
    pub p_lower: f64,
    /// `P(F ≥ observed)` under the null; small values point to deleterious alleles.
    pub p_upper: f64,
    pub replicates: usize,
    pub seed: u64,
    /// θ used by the urn; the null law does not depend on it.
    pub urn_theta: f64,
}

pub const MIN_REPLICATES: usize = 10_000;

pub fn neutrality_test(p: &AllelicPartition, replicates: usize, seed: u64) -> Result<NeutralityReport> {
    if replicates < MIN_REPLICATES {
        return Err(Error::Domain(format!("at least {MIN_REPLICATES} replicates are required")));
    }
    let sampler = ConditionalSampler::new(p.n(), p.k())?;
    let observed = homozygosity_numerator(p);
    let null = replicate_map(seed, replicates, |_, s| homozygosity_numerator(&sampler.sample(&mut rng_from_seed(s))));
    let below = null.iter().filter(|&&f| f <= observed).count();
    let above = null.iter().filter(|&&f| f >= observed).count();
    Ok(NeutralityReport {
        statistic: sample_homozygosity(p),
        k: p.k(),
        n: p.n(),
        p_lower: below as f64 / replicates as f64,
        p_upper: above as f64 / replicates as f64,
        replicates,
        seed,
        urn_theta: sampler.theta(),
    })
}
