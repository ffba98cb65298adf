//! GEM (age-ordered) allele frequencies and the sampling formulas that come
//! with them: oldest allele in a sample, age-ordered sample law, all-same-type
//! probabilities, and size-biased permutation.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::esf::{ln_rising_factorial, rising};
use crate::exact::{use_exact, ExactProbability, Formula};
use crate::partition::AllelicPartition;
use crate::rng::rng_from_seed;
use crate::theta::{Field, Theta};

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// One stick-breaking fraction with density `θ(1−x)^{θ−1}` on (0,1).
///
/// Inverse CDF: `x = 1 − U^{1/θ}`, written as `−expm1(ln U / θ)` so that
/// small fractions at large θ keep full precision. Returns `(x, ln(1−x))`.
pub fn draw_fraction<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> (f64, f64) {
    let u: f64 = 1.0 - rng.random::<f64>();
    let ln_keep = u.ln() / theta;
    (-ln_keep.exp_m1(), ln_keep)
}

/// Infinite stick-breaking sequence `w_j = x_j Π_{i<j}(1 − x_i)`.
///
/// Yields `(w_j, residual_after_j)`. Never terminates on its own.
pub struct StickBreaker<'a, R: Rng + ?Sized> {
    theta: f64,
    ln_residual: f64,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> StickBreaker<'a, R> {
    pub fn new(theta: &Theta, rng: &'a mut R) -> Self {
        Self { theta: theta.value(), ln_residual: 0.0, rng }
    }
}

impl<R: Rng + ?Sized> Iterator for StickBreaker<'_, R> {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        let (x, ln_keep) = draw_fraction(self.theta, self.rng);
        let before = self.ln_residual.exp();
        self.ln_residual += ln_keep;
        Some((before * x, self.ln_residual.exp()))
    }
}

/// A GEM draw truncated once the unallocated mass falls below `epsilon`.
#[derive(Clone, Debug, Serialize)]
pub struct StickWeights {
    pub weights: Vec<f64>,
    pub residual: f64,
    pub theta: Theta,
    pub seed: u64,
}

/// Draw GEM weights (age order, oldest first) until the residual is below `epsilon`.
pub fn sample_gem(theta: &Theta, epsilon: f64, seed: u64) -> Result<StickWeights> {
    let mut rng = rng_from_seed(seed);
    let (weights, residual) = sample_gem_with(theta, epsilon, &mut rng)?;
    Ok(StickWeights { weights, residual, theta: theta.clone(), seed })
}

pub fn sample_gem_with<R: Rng + ?Sized>(theta: &Theta, epsilon: f64, rng: &mut R) -> Result<(Vec<f64>, f64)> {
    if !(epsilon > 0.0 && epsilon <= 1e-6) {
        return Err(Error::Domain(format!("truncation epsilon must lie in (0, 1e-6], got {epsilon}")));
    }
    let mut weights = Vec::new();
    let mut residual = 1.0;
    for (w, rest) in StickBreaker::new(theta, rng) {
        weights.push(w);
        residual = rest;
        if rest < epsilon {
            break;
        }
    }
    Ok((weights, residual))
}

/// Mean population frequency of the j-th oldest allele: `(1/(1+θ))(θ/(1+θ))^{j−1}`.
pub fn mean_jth_oldest(j: usize, theta: &Theta) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain("allele age rank starts at 1".into()));
    }
    let t = theta.value();
    Ok((t / (1.0 + t)).powi(j as i32 - 1) / (1.0 + t))
}

/// `C(n,j) / C(n+θ−1,j) = Π_{i<j} (n−i)/(n+θ−1−i)` in field `T`.
fn binomial_ratio<T: Field>(n: usize, j: usize, theta: &T) -> T {
    let nt = T::from_usize_exact(n);
    (0..j).fold(T::one(), |acc, i| {
        let i = T::from_usize_exact(i);
        acc * (nt.clone() - i.clone()) / (nt.clone() + theta.clone() - T::one() - i)
    })
}

fn ln_binomial_ratio(n: usize, j: usize, theta: f64) -> f64 {
    let n = n as f64;
    let j = j as f64;
    ln_gamma(n + 1.0) - ln_gamma(n - j + 1.0) - ln_gamma(n + theta) + ln_gamma(n + theta - j)
}

/// Kelly: the oldest allele in a sample of `n` is carried by `j` genes with
/// probability `(θ/n) C(n,j) C(n+θ−1,j)^{-1}`, `j = 1..=n`.
pub fn oldest_sample_count_distribution(n: usize, theta: &Theta) -> Result<BTreeMap<usize, ExactProbability>> {
    oldest_count_law(n, theta, Formula::OldestInSample)
}

pub(crate) fn oldest_count_law(n: usize, theta: &Theta, formula: Formula) -> Result<BTreeMap<usize, ExactProbability>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let mut out = BTreeMap::new();
    for j in 1..=n {
        let p = if use_exact(n) {
            let th = theta.exact();
            let v = th / BigRational::from_integer(n.into()) * binomial_ratio(n, j, th);
            ExactProbability::rational(v, formula)
        } else {
            let t = theta.value();
            ExactProbability::log(t.ln() - (n as f64).ln() + ln_binomial_ratio(n, j, t), formula)
        };
        out.insert(j, p);
    }
    Ok(out)
}

/// Donnelly: the oldest allele in the whole population appears `j` times in a
/// sample of `n` with probability `(θ/(n+θ)) C(n,j) C(n+θ−1,j)^{-1}`, `j = 0..=n`.
pub fn population_oldest_in_sample_distribution(
    n: usize,
    theta: &Theta,
) -> Result<BTreeMap<usize, ExactProbability>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let formula = Formula::PopulationOldestInSample;
    let mut out = BTreeMap::new();
    for j in 0..=n {
        let p = if use_exact(n) {
            let th = theta.exact();
            let lead = th / (th + BigRational::from_integer(n.into()));
            ExactProbability::rational(lead * binomial_ratio(n, j, th), formula)
        } else {
            let t = theta.value();
            ExactProbability::log(t.ln() - (n as f64 + t).ln() + ln_binomial_ratio(n, j, t), formula)
        };
        out.insert(j, p);
    }
    Ok(out)
}

/// Allele counts of a sample listed by age, oldest first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AgeOrderedSample {
    counts: Vec<usize>,
}

impl AgeOrderedSample {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidPartition("age-ordered sample needs at least one allele".into()));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidPartition("age-ordered counts must be positive".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn partition(&self) -> AllelicPartition {
        AllelicPartition::from_sizes(self.counts.iter().copied()).expect("validated counts")
    }
}

/// Donnelly–Tavaré law of a sample's allele counts in age order:
/// `θ^k (n−1)! / (S_n(θ) · n_(k)(n_(k)+n_(k−1))⋯(n_(k)+⋯+n_(2)))`.
///
/// The denominator chain has `k−1` factors, so for a single allele it is empty.
pub fn age_ordered_sample_probability(sample: &AgeOrderedSample, theta: &Theta) -> ExactProbability {
    let n = sample.n();
    if use_exact(n) {
        ExactProbability::rational(age_ordered_value(sample, theta.exact()), Formula::AgeOrdered)
    } else {
        let t = theta.value();
        let mut ln = sample.k() as f64 * t.ln() + ln_gamma(n as f64) - ln_rising_factorial(t, n);
        let mut tail = 0usize;
        for &c in sample.counts[1..].iter().rev() {
            tail += c;
            ln -= (tail as f64).ln();
        }
        ExactProbability::log(ln, Formula::AgeOrdered)
    }
}

pub fn age_ordered_value<T: Field>(sample: &AgeOrderedSample, theta: &T) -> T {
    let n = sample.n();
    let mut num = T::one();
    for _ in 0..sample.k() {
        num = num * theta.clone();
    }
    for i in 1..n {
        num = num * T::from_usize_exact(i);
    }
    let mut denom = rising(theta, n);
    let mut tail = 0usize;
    for &c in sample.counts[1..].iter().rev() {
        tail += c;
        denom = denom * T::from_usize_exact(tail);
    }
    num / denom
}

/// Every distinct age ordering of the allele classes of `p`.
pub fn distinct_age_orders(p: &AllelicPartition) -> Vec<AgeOrderedSample> {
    fn rec(remaining: &mut Vec<(usize, u32)>, current: &mut Vec<usize>, out: &mut Vec<AgeOrderedSample>) {
        if remaining.iter().all(|&(_, c)| c == 0) {
            out.push(AgeOrderedSample { counts: current.clone() });
            return;
        }
        for idx in 0..remaining.len() {
            if remaining[idx].1 == 0 {
                continue;
            }
            remaining[idx].1 -= 1;
            current.push(remaining[idx].0);
            rec(remaining, current, out);
            current.pop();
            remaining[idx].1 += 1;
        }
    }
    let mut remaining: Vec<(usize, u32)> = p
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(i, &a)| (i + 1, a))
        .collect();
    let mut out = Vec::new();
    rec(&mut remaining, &mut Vec::new(), &mut out);
    out
}

/// Probabilities that `n` genes drawn from the population are all of one type.
#[derive(Clone, Debug, Serialize)]
pub struct AllSameType {
    /// `n!/((1+θ)⋯(n+θ))`: all of the oldest allele's type.
    pub as_oldest: ExactProbability,
    /// `(n−1)!/((1+θ)⋯(n−1+θ))`: all of some single type.
    pub any_type: ExactProbability,
    /// Ratio of the two, `n/(n+θ)`.
    pub oldest_given_same: ExactProbability,
}

pub fn all_same_type_probabilities(n: usize, theta: &Theta) -> Result<AllSameType> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    if use_exact(n) {
        let th = theta.exact();
        let product = |m: usize| -> BigRational {
            (1..=m).fold(BigRational::one(), |acc, i| {
                let i = BigRational::from_integer(i.into());
                acc * &i / (&i + th)
            })
        };
        let as_oldest = product(n);
        let any_type = product(n - 1);
        let ratio = &as_oldest / &any_type;
        Ok(AllSameType {
            as_oldest: ExactProbability::rational(as_oldest, Formula::AllSameOldest),
            any_type: ExactProbability::rational(any_type, Formula::AllSameAny),
            oldest_given_same: ExactProbability::rational(ratio, Formula::OldestGivenSame),
        })
    } else {
        let t = theta.value();
        // ln(m!/Π(i+θ)) = ln Γ(m+1) + ln Γ(1+θ) − ln Γ(m+1+θ)
        let ln_product = |m: usize| ln_gamma(m as f64 + 1.0) + ln_gamma(1.0 + t) - ln_gamma(m as f64 + 1.0 + t);
        let a = ln_product(n);
        let b = ln_product(n - 1);
        Ok(AllSameType {
            as_oldest: ExactProbability::log(a, Formula::AllSameOldest),
            any_type: ExactProbability::log(b, Formula::AllSameAny),
            oldest_given_same: ExactProbability::log(a - b, Formula::OldestGivenSame),
        })
    }
}

const NORMALIZATION_TOL: f64 = 1e-9;

/// Reorder `freqs` by successive size-biased picks without replacement.
pub fn size_biased_permutation(freqs: &[f64], seed: u64) -> Result<Vec<f64>> {
    size_biased_permutation_with(freqs, &mut rng_from_seed(seed))
}

/// Each item gets an exponential arrival time with rate equal to its
/// frequency; sorting by arrival gives a size-biased order.
pub fn size_biased_permutation_with<R: Rng + ?Sized>(freqs: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if freqs.is_empty() || freqs.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::Validation("frequencies must be positive and finite".into()));
    }
    let total: f64 = freqs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Validation(format!("frequencies sum to {total}, not 1")));
    }
    let mut keyed: Vec<(f64, f64)> = freqs
        .iter()
        .map(|&f| {
            let e: f64 = Exp1.sample(rng);
            (e / f, f)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(keyed.into_iter().map(|(_, f)| f).collect())
}

/// Sum of `age_ordered_sample_probability` over the age orders of `p`.
pub fn aggregate_age_orders<T: Field>(p: &AllelicPartition, theta: &T) -> T {
    distinct_age_orders(p)
        .iter()
        .fold(T::zero(), |acc, s| acc + age_ordered_value(s, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esf::{esf_value, k_distribution};
    use crate::rng::stream;

    fn th(s: &str) -> Theta {
        s.parse().unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn gem_weights_sum_with_residual() {
        for t in ["0.5", "1", "5"] {
            let g = sample_gem(&th(t), 1e-12, 11).unwrap();
            let total: f64 = g.weights.iter().sum::<f64>() + g.residual;
            assert!((total - 1.0).abs() < 1e-12);
            assert!(g.residual < 1e-12);
            assert!(g.weights.iter().all(|&w| w > 0.0 && w < 1.0));
        }
        assert!(sample_gem(&th("1"), 1e-3, 1).is_err());
        assert!(sample_gem(&th("1"), 0.0, 1).is_err());
    }

    #[test]
    fn gem_is_deterministic_in_seed() {
        let a = sample_gem(&th("2"), 1e-12, 99).unwrap();
        let b = sample_gem(&th("2"), 1e-12, 99).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn theta_one_fractions_are_uniform() {
        let mut rng = stream(3, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| draw_fraction(1.0, &mut rng).0).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * (1.0 / 12.0f64 / n as f64).sqrt() + 1e-3);
        let below: usize = xs.iter().filter(|&&x| x < 0.25).count();
        assert!((below as f64 / n as f64 - 0.25).abs() < 0.006);
    }

    #[test]
    fn mean_oldest_weights_match_closed_form() {
        let reps = 100_000u64;
        for (t, j) in [("0.01", 1usize), ("2", 2)] {
            let theta = th(t);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for r in 0..reps {
                let mut rng = stream(17, r);
                let w = StickBreaker::new(&theta, &mut rng).nth(j - 1).unwrap().0;
                sum += w;
                sum_sq += w * w;
            }
            let mean = sum / reps as f64;
            let se = ((sum_sq / reps as f64 - mean * mean) / reps as f64).sqrt();
            let expected = mean_jth_oldest(j, &theta).unwrap();
            assert!((mean - expected).abs() < 4.0 * se + 1e-9, "θ={t} j={j}: {mean} vs {expected}");
        }
    }

    #[test]
    fn mean_jth_oldest_examples() {
        let one = th("1");
        assert_eq!(mean_jth_oldest(1, &one).unwrap(), 0.5);
        assert_eq!(mean_jth_oldest(2, &one).unwrap(), 0.25);
        assert_eq!(mean_jth_oldest(3, &one).unwrap(), 0.125);
        assert!((mean_jth_oldest(2, &th("0.5")).unwrap() - 0.22222).abs() < 1e-5);
        let partial: f64 = (1..=200).map(|j| mean_jth_oldest(j, &th("3")).unwrap()).sum();
        assert!((partial - 1.0).abs() < 1e-12);
        assert!(mean_jth_oldest(0, &one).is_err());
    }

    #[test]
    fn kelly_examples() {
        let d = oldest_sample_count_distribution(2, &th("1")).unwrap();
        assert_eq!(d[&1].as_rational().unwrap(), &rat(1, 2));
        assert_eq!(d[&2].as_rational().unwrap(), &rat(1, 2));
        let d = oldest_sample_count_distribution(1, &th("0.3")).unwrap();
        assert!(d[&1].as_rational().unwrap().is_one());
    }

    #[test]
    fn kelly_top_cell_is_the_product_form() {
        for t in ["0.5", "1", "2"] {
            let theta = th(t);
            for n in 1..=20 {
                let d = oldest_sample_count_distribution(n, &theta).unwrap();
                let total: BigRational = d.values().map(|p| p.as_rational().unwrap().clone()).sum();
                assert!(total.is_one());
                let product = (2..=n).fold(BigRational::one(), |acc, k| {
                    let k1 = BigRational::from_integer((k - 1).into());
                    acc * &k1 / (&k1 + theta.exact())
                });
                assert_eq!(d[&n].as_rational().unwrap(), &product);
            }
        }
    }

    #[test]
    fn donnelly_examples_and_conditioning() {
        let d = population_oldest_in_sample_distribution(2, &th("1")).unwrap();
        for j in 0..=2 {
            assert_eq!(d[&j].as_rational().unwrap(), &rat(1, 3));
        }
        for t in ["0.5", "1", "2"] {
            let theta = th(t);
            for n in 1..=20 {
                let pop = population_oldest_in_sample_distribution(n, &theta).unwrap();
                let kelly = oldest_sample_count_distribution(n, &theta).unwrap();
                let present = BigRational::one() - pop[&0].as_rational().unwrap();
                let n_r = BigRational::from_integer(n.into());
                assert_eq!(present, &n_r / (&n_r + theta.exact()));
                for j in 1..=n {
                    let cond = pop[&j].as_rational().unwrap() / &present;
                    assert_eq!(&cond, kelly[&j].as_rational().unwrap());
                }
            }
        }
    }

    #[test]
    fn log_mode_kelly_matches_exact() {
        let theta = th("1.3");
        let exact = oldest_sample_count_distribution(100, &theta).unwrap();
        let t = theta.value();
        for j in [1usize, 7, 50, 100] {
            let ln = t.ln() - 100f64.ln() + ln_binomial_ratio(100, j, t);
            assert!((exact[&j].ln() - ln).abs() < 1e-9, "j={j}");
        }
        let big = oldest_sample_count_distribution(400, &theta).unwrap();
        let total: f64 = big.values().map(ExactProbability::value).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn age_ordered_examples() {
        let one = th("1");
        let p = |c: &[usize]| {
            age_ordered_sample_probability(&AgeOrderedSample::new(c.to_vec()).unwrap(), &one)
                .as_rational()
                .unwrap()
                .clone()
        };
        assert_eq!(p(&[2]), rat(1, 2));
        assert_eq!(p(&[1, 1]), rat(1, 2));
        // n=3: oldest singleton then a pair, and the reverse
        assert_eq!(p(&[1, 2]), rat(1, 6));
        assert_eq!(p(&[2, 1]), rat(1, 3));
        assert_eq!(p(&[1, 2]) + p(&[2, 1]), rat(1, 2));
        assert!(AgeOrderedSample::new(vec![]).is_err());
        assert!(AgeOrderedSample::new(vec![2, 0]).is_err());
    }

    fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 1 {
            return vec![vec![n]];
        }
        let mut out = Vec::new();
        for first in 1..=n - (k - 1) {
            for mut rest in compositions(n - first, k - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    #[test]
    fn age_ordered_marginal_is_allele_count_law() {
        for t in ["0.5", "1", "2"] {
            let theta = th(t);
            for n in 1..=8 {
                let kd = k_distribution(n, &theta).unwrap();
                for k in 1..=n {
                    let total: BigRational = compositions(n, k)
                        .into_iter()
                        .map(|c| age_ordered_value(&AgeOrderedSample::new(c).unwrap(), theta.exact()))
                        .sum();
                    assert_eq!(&total, kd[&k].as_rational().unwrap(), "n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn age_orders_aggregate_to_esf() {
        for t in ["0.5", "1", "3"] {
            let theta = th(t);
            for n in 1..=8 {
                for p in AllelicPartition::enumerate(n) {
                    assert_eq!(aggregate_age_orders(&p, theta.exact()), esf_value(&p, theta.exact()));
                }
            }
        }
        let p = AllelicPartition::from_sizes([2, 1, 1]).unwrap();
        assert_eq!(distinct_age_orders(&p).len(), 3);
    }

    #[test]
    fn age_ordered_log_mode_matches_exact() {
        let theta = th("0.8");
        let s = AgeOrderedSample::new(vec![30, 1, 50, 19]).unwrap();
        let exact = age_ordered_sample_probability(&s, &theta);
        let big = AgeOrderedSample::new(vec![30, 1, 50, 19, 1]).unwrap();
        assert!(exact.is_exact());
        assert!(!age_ordered_sample_probability(&big, &theta).is_exact());
        let t = theta.value();
        let ln = 4.0 * t.ln() + ln_gamma(100.0) - ln_rising_factorial(t, 100) - (19f64).ln() - (69f64).ln() - (70f64).ln();
        assert!((exact.ln() - ln).abs() < 1e-9);
    }

    #[test]
    fn all_same_type_examples() {
        let s = all_same_type_probabilities(1, &th("1")).unwrap();
        assert_eq!(s.as_oldest.as_rational().unwrap(), &rat(1, 2));
        assert!(s.any_type.as_rational().unwrap().is_one());
        assert_eq!(s.oldest_given_same.as_rational().unwrap(), &rat(1, 2));
        let s = all_same_type_probabilities(2, &th("1")).unwrap();
        assert_eq!(s.as_oldest.as_rational().unwrap(), &rat(1, 3));
        assert_eq!(s.any_type.as_rational().unwrap(), &rat(1, 2));
        assert_eq!(s.oldest_given_same.as_rational().unwrap(), &rat(2, 3));
        for t in ["0.4", "2.5"] {
            let theta = th(t);
            for n in 1..=12 {
                let s = all_same_type_probabilities(n, &theta).unwrap();
                let mono = AllelicPartition::from_sizes([n]).unwrap();
                assert_eq!(s.any_type.as_rational().unwrap(), &esf_value(&mono, theta.exact()));
                let n_r = BigRational::from_integer(n.into());
                assert_eq!(s.oldest_given_same.as_rational().unwrap(), &(&n_r / (&n_r + theta.exact())));
            }
        }
    }

    #[test]
    fn size_biased_permutation_basics() {
        assert_eq!(size_biased_permutation(&[1.0], 5).unwrap(), vec![1.0]);
        let first_counts = (0..20_000u64)
            .filter(|&s| size_biased_permutation(&[0.25, 0.75], s).unwrap()[0] == 0.25)
            .count();
        assert!((first_counts as f64 / 20_000.0 - 0.25).abs() < 0.015);
        assert_eq!(size_biased_permutation(&[0.5, 0.5], 3).unwrap(), vec![0.5, 0.5]);
        assert!(size_biased_permutation(&[0.5, 0.4], 1).is_err());
        assert!(size_biased_permutation(&[], 1).is_err());
        assert!(size_biased_permutation(&[1.5, -0.5], 1).is_err());
    }
}
