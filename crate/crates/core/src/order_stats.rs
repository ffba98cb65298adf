//! Order statistics of the Kingman (Poisson–Dirichlet) frequencies.
//!
//! Closed forms are available only where the top frequencies are large
//! enough that no smaller allele can interfere; everything else is estimated
//! by sorting GEM draws.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gem::{mean_jth_oldest, StickBreaker, DEFAULT_EPSILON};
use crate::quadrature::integrate;
use crate::rng::{replicate_map, split_seed};
use crate::stats::MeanEstimate;
use crate::theta::Theta;

const QUAD_TOL: f64 = 1e-12;

/// Truncated decreasing population frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderedFrequencies {
    values: Vec<f64>,
    residual: f64,
}

impl OrderedFrequencies {
    pub fn new(values: Vec<f64>, residual: f64) -> Result<Self> {
        if values.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::Validation("frequencies must lie in (0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation("frequencies must be non-increasing".into()));
        }
        if residual < 0.0 {
            return Err(Error::Validation("residual mass must be non-negative".into()));
        }
        let total: f64 = values.iter().sum::<f64>() + residual;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("frequencies and residual sum to {total}")));
        }
        Ok(Self { values, residual })
    }

    /// Sort GEM weights into decreasing order.
    pub fn from_gem(mut weights: Vec<f64>, residual: f64) -> Result<Self> {
        weights.sort_by(|a, b| b.total_cmp(a));
        Self::new(weights, residual)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Joint density of the top `r` frequencies where it has the simple form
/// `θ^r (x_1⋯x_r)^{-1} (1 − x_1 − ⋯ − x_r)^{θ−1}`, valid only when
/// `x_1 + ⋯ + x_{r−1} + 2x_r ≥ 1`.
pub fn top_density_simplified(x: &[f64], theta: &Theta) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain("need at least one frequency".into()));
    }
    if x.iter().any(|&v| !(v > 0.0)) || x.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("frequencies must be positive and strictly decreasing".into()));
    }
    let total: f64 = x.iter().sum();
    if total > 1.0 {
        return Err(Error::Domain(format!("frequencies sum to {total} > 1")));
    }
    let last = *x.last().expect("non-empty");
    if total + last < 1.0 {
        return Err(Error::OutOfRegion(format!(
            "x_1+…+x_(r-1)+2x_r = {} < 1; the density has no closed form here, use Monte Carlo",
            total + last
        )));
    }
    let t = theta.value();
    let rest = 1.0 - total;
    let product: f64 = x.iter().product();
    Ok(t.powi(x.len() as i32) / product * rest.powf(t - 1.0))
}

/// `P(x_(1) > lower) = ∫_lower^1 θ x^{-1} (1−x)^{θ−1} dx` for `lower ≥ ½`.
fn largest_tail(lower: f64, theta: f64) -> f64 {
    if theta >= 1.0 {
        integrate(|x| theta / x * (1.0 - x).powf(theta - 1.0), lower, 1.0, QUAD_TOL).0
    } else {
        // u = (1−x)^θ removes the endpoint singularity: integrand 1/(1 − u^{1/θ})
        let top = (1.0 - lower).powf(theta);
        integrate(|u| 1.0 / (1.0 - u.powf(1.0 / theta)), 0.0, top, QUAD_TOL).0
    }
}

/// Probability that the most frequent allele has frequency above `threshold`.
///
/// Exact for `threshold ∈ (½, 1)`; behaves like `(1 − threshold)^θ` as the
/// threshold approaches 1 (see [`monomorphism_leading_order`]).
pub fn monomorphism_probability(threshold: f64, theta: &Theta) -> Result<f64> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(Error::OutOfRegion(format!("threshold {threshold} must lie in (1/2, 1)")));
    }
    Ok(largest_tail(threshold, theta.value()))
}

/// Leading-order form `(1 − threshold)^θ` of [`monomorphism_probability`].
pub fn monomorphism_leading_order(threshold: f64, theta: &Theta) -> Result<f64> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(Error::OutOfRegion(format!("threshold {threshold} must lie in (1/2, 1)")));
    }
    Ok((1.0 - threshold).powf(theta.value()))
}

/// `P(x_(1) > ½)`; `log 2` at θ = 1 and `log(1+√2)` at θ = ½.
pub fn largest_exceeds_half_probability(theta: &Theta) -> f64 {
    largest_tail(0.5, theta.value())
}

/// Bounds `(½)^θ ≤ E x_(1) ≤ 1 − θ(1−θ) log 2`. The upper bound says
/// something only for θ < 1.
pub fn mean_largest_bounds(theta: &Theta) -> (f64, f64) {
    let t = theta.value();
    (0.5f64.powf(t), 1.0 - t * (1.0 - t) * std::f64::consts::LN_2)
}

/// The `rank`-th largest GEM weight of one draw.
///
/// Stops as soon as the unallocated mass cannot beat the current `rank`-th
/// largest weight, or when it drops below `epsilon`. The flag is set when the
/// truncation was reached first, i.e. the answer is only residual-bounded.
pub fn gem_order_statistic<R: Rng + ?Sized>(
    rank: usize,
    theta: &Theta,
    epsilon: f64,
    rng: &mut R,
) -> (f64, bool) {
    debug_assert!(rank >= 1);
    let mut top: Vec<f64> = Vec::with_capacity(rank + 1);
    for (w, residual) in StickBreaker::new(theta, rng) {
        let pos = top.partition_point(|&v| v >= w);
        if pos < rank {
            top.insert(pos, w);
            top.truncate(rank);
        }
        let settled = top.len() == rank && residual <= top[rank - 1];
        if settled {
            return (top[rank - 1], false);
        }
        if residual < epsilon {
            let v = top.get(rank - 1).copied().unwrap_or(0.0);
            return (v, true);
        }
    }
    unreachable!("stick breaking never ends")
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderStatEstimate {
    pub rank: usize,
    pub theta: Theta,
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: usize,
    /// Replicates whose value was bounded by the truncation residual.
    pub flagged: usize,
    pub seed: u64,
}

/// Monte Carlo mean of the `rank`-th largest population frequency.
pub fn estimate_mean_order_statistic(
    rank: usize,
    theta: &Theta,
    replicates: usize,
    seed: u64,
) -> Result<OrderStatEstimate> {
    if rank == 0 {
        return Err(Error::Domain("rank starts at 1".into()));
    }
    if replicates < 1000 {
        return Err(Error::Domain("at least 1000 replicates are required".into()));
    }
    let draws = replicate_map(seed, replicates, |_, s| {
        let mut rng = crate::rng::rng_from_seed(s);
        gem_order_statistic(rank, theta, DEFAULT_EPSILON, &mut rng)
    });
    let flagged = draws.iter().filter(|d| d.1).count();
    let est = MeanEstimate::from_values(draws.iter().map(|d| d.0));
    Ok(OrderStatEstimate {
        rank,
        theta: theta.clone(),
        estimate: est.mean,
        std_error: est.std_error,
        replicates,
        flagged,
        seed,
    })
}

/// Monte Carlo estimate of `P(x_(1) > ½)`.
pub fn estimate_largest_exceeds_half(theta: &Theta, replicates: usize, seed: u64) -> Result<MeanEstimate> {
    if replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let draws = replicate_map(seed, replicates, |_, s| {
        let mut rng = crate::rng::rng_from_seed(s);
        let (top, _) = gem_order_statistic(1, theta, DEFAULT_EPSILON, &mut rng);
        if top > 0.5 {
            1.0
        } else {
            0.0
        }
    });
    Ok(MeanEstimate::from_values(draws))
}

/// One column of the comparison between the most frequent and the oldest
/// allele's mean population frequency.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyRow {
    pub theta: Theta,
    /// Monte Carlo `E x_(1)`.
    pub most_frequent: f64,
    pub most_frequent_se: f64,
    /// Exact `1/(1+θ)`.
    pub oldest: f64,
}

/// Mean frequency of the most frequent and of the oldest allele for each θ.
/// Column `i` uses the `i`-th derived seed.
pub fn most_frequent_vs_oldest(thetas: &[Theta], replicates: usize, seed: u64) -> Result<Vec<FrequencyRow>> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let est = estimate_mean_order_statistic(1, theta, replicates, split_seed(seed, i as u64))?;
            Ok(FrequencyRow {
                theta: theta.clone(),
                most_frequent: est.estimate,
                most_frequent_se: est.std_error,
                oldest: mean_jth_oldest(1, theta)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gem::sample_gem_with;
    use crate::rng::stream;

    fn th(s: &str) -> Theta {
        s.parse().unwrap()
    }

    #[test]
    fn simplified_density_examples() {
        assert!((top_density_simplified(&[0.6], &th("1")).unwrap() - 1.0 / 0.6).abs() < 1e-12);
        assert!((top_density_simplified(&[0.5], &th("2")).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(top_density_simplified(&[0.3], &th("1")), Err(Error::OutOfRegion(_))));
        // two frequencies: 0.5 + 2·0.3 ≥ 1
        let v = top_density_simplified(&[0.5, 0.3], &th("2")).unwrap();
        assert!((v - 4.0 / 0.15 * 0.2).abs() < 1e-12);
        assert!(matches!(top_density_simplified(&[0.5, 0.2], &th("2")), Err(Error::OutOfRegion(_))));
        assert!(top_density_simplified(&[0.3, 0.5], &th("1")).is_err());
        assert!(top_density_simplified(&[], &th("1")).is_err());
    }

    #[test]
    fn largest_exceeds_half_closed_forms() {
        assert!((largest_exceeds_half_probability(&th("1")) - 2f64.ln()).abs() < 1e-10);
        let target = (1.0 + 2f64.sqrt()).ln();
        assert!((largest_exceeds_half_probability(&th("0.5")) - target).abs() < 1e-10);
        assert!((target - 0.881374).abs() < 1e-6);
    }

    #[test]
    fn largest_exceeds_half_decreases_in_theta() {
        let thetas = ["0.05", "0.1", "0.5", "1", "2", "5", "10", "20", "50"];
        let vals: Vec<f64> = thetas.iter().map(|t| largest_exceeds_half_probability(&th(t))).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(vals.last().unwrap() < &1e-10 && *vals.last().unwrap() > 0.0);
    }

    #[test]
    fn monomorphism_examples() {
        // θ = 1: ∫_t^1 dx/x = −ln t
        let v = monomorphism_probability(0.99, &th("1")).unwrap();
        assert!((v + 0.99f64.ln()).abs() < 1e-12);
        // θ = 2: 2(−ln t − (1 − t))
        let v = monomorphism_probability(0.99, &th("2")).unwrap();
        assert!((v - 2.0 * (-(0.99f64.ln()) - 0.01)).abs() < 1e-12);
        assert!((v / monomorphism_leading_order(0.99, &th("2")).unwrap() - 1.0).abs() < 0.02);
        // small θ: the leading-order form is tight
        let v = monomorphism_probability(0.99, &th("0.05")).unwrap();
        let lead = monomorphism_leading_order(0.99, &th("0.05")).unwrap();
        assert!((v - lead).abs() / lead < 0.01);
        // near the boundary it approaches the half tail
        let v = monomorphism_probability(0.5 + 1e-9, &th("1")).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-8);
        assert!(matches!(monomorphism_probability(0.5, &th("1")), Err(Error::OutOfRegion(_))));
        assert!(monomorphism_probability(1.0, &th("1")).is_err());
    }

    #[test]
    fn tail_is_consistent_with_density() {
        // ∫_{1/2}^{t} + ∫_t^1 = ∫_{1/2}^1 at a θ<1 and a θ>1
        for t in ["0.3", "3"] {
            let theta = th(t);
            let split = 0.7;
            let (head, _) = integrate(|x| top_density_simplified(&[x], &theta).unwrap(), 0.5, split, 1e-13);
            let tail = monomorphism_probability(split, &theta).unwrap();
            assert!((head + tail - largest_exceeds_half_probability(&theta)).abs() < 1e-10);
        }
    }

    #[test]
    fn bounds_examples() {
        let (lo, hi) = mean_largest_bounds(&th("1"));
        assert_eq!((lo, hi), (0.5, 1.0));
        let (lo, hi) = mean_largest_bounds(&th("0.1"));
        assert!((lo - 0.9330).abs() < 1e-4 && (hi - 0.9376).abs() < 1e-4);
        assert!(lo < 0.936 && 0.936 < hi);
        let (lo, hi) = mean_largest_bounds(&th("0.5"));
        assert!((lo - 0.7071).abs() < 1e-4 && (hi - 0.8267).abs() < 1e-4);
    }

    #[test]
    fn early_stopping_agrees_with_full_sort() {
        for t in ["0.5", "2", "10"] {
            let theta = th(t);
            for seed in 0..200u64 {
                for rank in 1..=3 {
                    let (fast, flagged) = gem_order_statistic(rank, &theta, DEFAULT_EPSILON, &mut stream(seed, 0));
                    assert!(!flagged);
                    let mut rng = stream(seed, 0);
                    let (weights, residual) = sample_gem_with(&theta, DEFAULT_EPSILON, &mut rng).unwrap();
                    let sorted = OrderedFrequencies::from_gem(weights, residual).unwrap();
                    assert_eq!(fast, sorted.values()[rank - 1], "θ={t} seed={seed} rank={rank}");
                }
            }
        }
    }

    #[test]
    fn ordered_frequencies_validate() {
        assert!(OrderedFrequencies::new(vec![0.6, 0.3], 0.1).is_ok());
        assert!(OrderedFrequencies::new(vec![0.3, 0.6], 0.1).is_err());
        assert!(OrderedFrequencies::new(vec![0.6, 0.3], 0.2).is_err());
        assert!(OrderedFrequencies::new(vec![0.6, 0.0], 0.4).is_err());
    }

    #[test]
    fn estimator_is_deterministic_and_validates() {
        let a = estimate_mean_order_statistic(1, &th("1"), 2000, 5).unwrap();
        let b = estimate_mean_order_statistic(1, &th("1"), 2000, 5).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.flagged, 0);
        assert!(estimate_mean_order_statistic(1, &th("1"), 999, 5).is_err());
        assert!(estimate_mean_order_statistic(0, &th("1"), 2000, 5).is_err());
    }

    #[test]
    fn second_largest_at_theta_one() {
        let e = estimate_mean_order_statistic(2, &th("1"), 100_000, 8).unwrap();
        assert!((e.estimate - 0.20958).abs() < 0.002, "{}", e.estimate);
        let e = estimate_mean_order_statistic(2, &th("0.5"), 100_000, 8).unwrap();
        assert!((e.estimate - 0.170910).abs() < 0.002, "{}", e.estimate);
    }

    #[test]
    fn largest_at_theta_one_has_known_spread() {
        let draws: Vec<f64> = (0..100_000u64)
            .map(|i| gem_order_statistic(1, &th("1"), DEFAULT_EPSILON, &mut stream(21, i)).0)
            .collect();
        let est = MeanEstimate::from_values(draws.iter().copied());
        assert!((est.mean - 0.624).abs() < 0.002);
        assert!((est.std_dev - 0.1921).abs() < 0.003);
    }
}
