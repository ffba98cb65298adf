//! Ewens sampling formula and the quantities derived from it.
//!
//! Every routine runs in exact rational arithmetic up to
//! [`EXACT_THRESHOLD`](crate::exact::EXACT_THRESHOLD) genes and in log-space
//! doubles beyond it.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::exact::{use_exact, ExactProbability, Formula, Quantity};
use crate::partition::AllelicPartition;
use crate::theta::{Field, Theta};

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// ln S_n(θ) = ln Γ(θ+n) − ln Γ(θ).
pub fn ln_rising_factorial(theta: f64, n: usize) -> f64 {
    ln_gamma(theta + n as f64) - ln_gamma(theta)
}

/// `θ(θ+1)⋯(θ+n−1)` in any field.
pub fn rising<T: Field>(theta: &T, n: usize) -> T {
    (0..n).fold(T::one(), |acc, i| acc * (theta.clone() + T::from_usize_exact(i)))
}

/// S_n(θ) = θ(θ+1)⋯(θ+n−1).
pub fn rising_factorial(theta: &Theta, n: usize) -> Result<Quantity> {
    if n == 0 {
        return Err(Error::Domain("rising factorial needs n >= 1".into()));
    }
    Ok(if use_exact(n) {
        Quantity::Rational(rising(theta.exact(), n))
    } else {
        Quantity::Log(ln_rising_factorial(theta.value(), n))
    })
}

/// Row `n` of the unsigned Stirling numbers of the first kind, indexed by
/// `k = 0..=n`, from `|s(n,k)| = |s(n−1,k−1)| + (n−1)|s(n−1,k)|`.
pub fn stirling_first_row(n: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for m in 1..=n {
        let mut next = vec![BigUint::zero(); m + 1];
        for k in 1..=m {
            let mut v = row[k - 1].clone();
            if k < m {
                v += &row[k] * BigUint::from(m - 1);
            }
            next[k] = v;
        }
        row = next;
    }
    row
}

fn factorial<T: Field>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, i| acc * T::from_usize_exact(i))
}

fn powi<T: Field>(base: &T, e: usize) -> T {
    (0..e).fold(T::one(), |acc, _| acc * base.clone())
}

/// ESF probability of `p` evaluated in field `T`.
pub fn esf_value<T: Field>(p: &AllelicPartition, theta: &T) -> T {
    let n = p.n();
    let mut denom = rising(theta, n);
    for (i, &a) in p.counts().iter().enumerate() {
        if a > 0 {
            denom = denom * powi(&T::from_usize_exact(i + 1), a as usize) * factorial::<T>(a as usize);
        }
    }
    factorial::<T>(n) * powi(theta, p.k()) / denom
}

fn esf_ln(p: &AllelicPartition, theta: f64) -> f64 {
    let n = p.n();
    let mut ln = ln_factorial(n) + p.k() as f64 * theta.ln() - ln_rising_factorial(theta, n);
    for (i, &a) in p.counts().iter().enumerate() {
        if a > 0 {
            ln -= a as f64 * ((i + 1) as f64).ln() + ln_factorial(a as usize);
        }
    }
    ln
}

/// Stationary probability of the allelic partition `p` under the neutral
/// infinitely-many-alleles model.
pub fn esf_probability(p: &AllelicPartition, theta: &Theta) -> ExactProbability {
    if use_exact(p.n()) {
        ExactProbability::rational(esf_value(p, theta.exact()), Formula::Esf)
    } else {
        ExactProbability::log(esf_ln(p, theta.value()), Formula::Esf)
    }
}

/// The full ESF over partitions of `n`, in colexicographic order.
pub fn esf_distribution<T: Field>(n: usize, theta: &T) -> Vec<(AllelicPartition, T)> {
    AllelicPartition::enumerate(n)
        .into_iter()
        .map(|p| {
            let v = esf_value(&p, theta);
            (p, v)
        })
        .collect()
}

/// `P(K = k) = |s(n,k)| θ^k / S_n(θ)` for `k = 1..=n`.
pub fn k_distribution(n: usize, theta: &Theta) -> Result<BTreeMap<usize, ExactProbability>> {
    if n == 0 {
        return Err(Error::Domain("k_distribution needs n >= 1".into()));
    }
    let mut out = BTreeMap::new();
    if use_exact(n) {
        let row = stirling_first_row(n);
        let th = theta.exact();
        let sn = rising(th, n);
        let mut power = BigRational::one();
        for (k, s) in row.iter().enumerate().skip(1) {
            power *= th;
            let v = BigRational::from_integer(BigInt::from(s.clone())) * &power / &sn;
            out.insert(k, ExactProbability::rational(v, Formula::AlleleCount));
        }
    } else {
        // K is a sum of independent Bernoulli(θ/(θ+i−1)) indicators, i = 1..n.
        let th = theta.value();
        let mut dist = vec![0.0f64; n + 1];
        dist[0] = 1.0;
        for i in 1..=n {
            let p = th / (th + (i - 1) as f64);
            for k in (0..=i).rev() {
                let stay = if k < i { dist[k] * (1.0 - p) } else { 0.0 };
                let step = if k > 0 { dist[k - 1] * p } else { 0.0 };
                dist[k] = stay + step;
            }
        }
        for (k, &v) in dist.iter().enumerate().skip(1) {
            out.insert(k, ExactProbability::log(v.ln(), Formula::AlleleCount));
        }
    }
    Ok(out)
}

/// Mean number of distinct alleles in a sample of `n`.
pub fn expected_k(n: usize, theta: &Theta) -> Result<f64> {
    let dist = k_distribution(n, theta)?;
    if use_exact(n) {
        let mean = dist.iter().fold(BigRational::zero(), |acc, (&k, p)| {
            acc + BigRational::from_integer(k.into()) * p.as_rational().expect("exact mode")
        });
        Ok(mean.to_f64_lossy())
    } else {
        Ok(dist.iter().map(|(&k, p)| k as f64 * p.value()).sum())
    }
}

/// Law of the partition given `K = k`; free of θ because K is sufficient.
///
/// Evaluated as the ratio ESF / P(K=k) at θ = 1 and θ = 2 and the two results
/// are required to agree.
pub fn conditional_partition_given_k(p: &AllelicPartition, k: usize) -> Result<ExactProbability> {
    if p.k() != k {
        return Err(Error::Inconsistent(format!("partition {p} has {} alleles, not {k}", p.k())));
    }
    let n = p.n();
    let thetas = [Theta::from_ratio(1, 1)?, Theta::from_ratio(2, 1)?];
    let ratio = |theta: &Theta| -> Result<ExactProbability> {
        let num = esf_probability(p, theta);
        let den = k_distribution(n, theta)?.remove(&k).expect("1 <= k <= n");
        Ok(match (num.as_rational(), den.as_rational()) {
            (Some(a), Some(b)) => ExactProbability::rational(a / b, Formula::ConditionalGivenK),
            _ => ExactProbability::log(num.ln() - den.ln(), Formula::ConditionalGivenK),
        })
    };
    let first = ratio(&thetas[0])?;
    let second = ratio(&thetas[1])?;
    let agree = match (first.as_rational(), second.as_rational()) {
        (Some(a), Some(b)) => a == b,
        _ => (first.ln() - second.ln()).abs() <= 1e-12 * first.ln().abs().max(1.0),
    };
    if !agree {
        return Err(Error::Inconsistent(format!(
            "conditional law depends on theta: {} vs {}",
            first.value(),
            second.value()
        )));
    }
    Ok(first)
}

/// Outcome of a structural check on a family of partition distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOutcome {
    pub pass: bool,
    pub max_residual: f64,
}

const NORMALIZATION_TOL: f64 = 1e-12;
const RECURSION_TOL: f64 = 1e-10;
const NONINTERFERENCE_TOL: f64 = 1e-10;

fn check_normalized<T: Field>(dist: &HashMap<AllelicPartition, T>, n: usize, label: &str) -> Result<()> {
    if let Some(bad) = dist.keys().find(|p| p.n() != n) {
        return Err(Error::Validation(format!("{label}: partition {bad} is not a partition of {n}")));
    }
    let total = dist.values().fold(T::zero(), |acc, v| acc + v.clone());
    let err = (total.to_f64_lossy() - 1.0).abs();
    if err > NORMALIZATION_TOL {
        return Err(Error::Validation(format!("{label}: total mass differs from 1 by {err:e}")));
    }
    Ok(())
}

/// Sampling consistency: removing one gene at random from a sample of `n+1`
/// must reproduce the law on samples of `n`.
///
/// For every partition `a` of `n` evaluates
/// `P_n(a) − [(a_1+1)/(n+1) P_{n+1}(a+e_1) + Σ_{j≥2} j(a_j+1)/(n+1) P_{n+1}(a−e_{j−1}+e_j)]`.
pub fn check_consistency_recursion<T: Field>(
    dist_n: &HashMap<AllelicPartition, T>,
    dist_n1: &HashMap<AllelicPartition, T>,
) -> Result<CheckOutcome> {
    let n = dist_n
        .keys()
        .next()
        .map(AllelicPartition::n)
        .ok_or_else(|| Error::Validation("empty distribution".into()))?;
    check_normalized(dist_n, n, "dist_n")?;
    check_normalized(dist_n1, n + 1, "dist_n1")?;

    let lookup = |counts: Vec<u32>| -> T {
        AllelicPartition::new(counts)
            .ok()
            .and_then(|p| dist_n1.get(&p).cloned())
            .unwrap_or_else(T::zero)
    };
    let n1 = T::from_usize_exact(n + 1);
    let mut max_residual = 0.0f64;
    for p in AllelicPartition::enumerate(n) {
        let mut base: Vec<u32> = p.counts().to_vec();
        base.push(0);
        let mut predicted = {
            let mut c = base.clone();
            c[0] += 1;
            T::from_usize_exact(base[0] as usize + 1) * lookup(c) / n1.clone()
        };
        for j in 2..=n + 1 {
            if base[j - 2] == 0 {
                continue;
            }
            let mut c = base.clone();
            c[j - 2] -= 1;
            c[j - 1] += 1;
            let weight = T::from_usize_exact(j * (base[j - 1] as usize + 1));
            predicted = predicted + weight * lookup(c) / n1.clone();
        }
        let observed = dist_n.get(&p).cloned().unwrap_or_else(T::zero);
        let residual = (observed - predicted).abs_value().to_f64_lossy();
        max_residual = max_residual.max(residual);
    }
    Ok(CheckOutcome { pass: max_residual <= RECURSION_TOL, max_residual })
}

/// Removing the allelic class of a randomly chosen gene must leave a sample
/// of `n − r` genes that again follows the ESF with the same θ.
///
/// Returns the largest total-variation distance over `r = 1..n−1`, computed
/// by exact summation over partitions.
pub fn check_noninterference(n: usize, theta: &Theta) -> Result<CheckOutcome> {
    if n < 2 {
        return Err(Error::Domain("non-interference needs n >= 2".into()));
    }
    if use_exact(n) {
        Ok(noninterference_in::<BigRational>(n, theta.exact()))
    } else {
        Ok(noninterference_in::<f64>(n, &theta.value()))
    }
}

fn noninterference_in<T: Field>(n: usize, theta: &T) -> CheckOutcome {
    let nt = T::from_usize_exact(n);
    // joint[r][residual partition] = P(chosen class has size r, remainder = b)
    let mut joint: Vec<HashMap<AllelicPartition, T>> = vec![HashMap::new(); n];
    for (p, prob) in esf_distribution(n, theta) {
        for r in 1..n {
            let a_r = p.count(r);
            if a_r == 0 {
                continue;
            }
            let mut counts = p.counts().to_vec();
            counts[r - 1] -= 1;
            let rest = AllelicPartition::new(counts).expect("n - r >= 1 genes remain");
            let w = prob.clone() * T::from_usize_exact(r * a_r as usize) / nt.clone();
            let slot = joint[r].entry(rest).or_insert_with(T::zero);
            *slot = slot.clone() + w;
        }
    }
    let mut max_tv = 0.0f64;
    for (r, cond) in joint.iter().enumerate().skip(1) {
        let mass = cond.values().fold(T::zero(), |acc, v| acc + v.clone());
        if mass == T::zero() {
            continue;
        }
        let mut tv = T::zero();
        for (b, target) in esf_distribution(n - r, theta) {
            let got = cond.get(&b).cloned().unwrap_or_else(T::zero) / mass.clone();
            tv = tv + (got - target).abs_value();
        }
        let tv = tv.to_f64_lossy() / 2.0;
        max_tv = max_tv.max(tv);
    }
    CheckOutcome { pass: max_tv <= NONINTERFERENCE_TOL, max_residual: max_tv }
}
