use num_rational::BigRational;

use neutral_core::combinatorics::exhaustive_cycle_type_law;
use neutral_core::esf::{esf_probability, esf_value, expected_k, k_distribution};
use neutral_core::eve::solve_eve_recurrence;
use neutral_core::gem::{age_ordered_sample_probability, aggregate_age_orders, distinct_age_orders};
use neutral_core::{AllelicPartition, Theta};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn esf_at_theta_one_is_the_cycle_law() {
    let theta = rat(1, 1);
    for (counts, p) in exhaustive_cycle_type_law(5).unwrap() {
        assert_eq!(esf_value(&AllelicPartition::new(counts).unwrap(), &theta), p);
    }
}

#[test]
fn age_orders_sum_to_the_unordered_probability() {
    let theta = Theta::from_ratio(3, 2).unwrap();
    for p in AllelicPartition::enumerate(6) {
        let total: BigRational = distinct_age_orders(&p)
            .iter()
            .map(|s| age_ordered_sample_probability(s, &theta).as_rational().unwrap().clone())
            .sum();
        assert_eq!(&total, esf_probability(&p, &theta).as_rational().unwrap(), "{p}");
        assert_eq!(&aggregate_age_orders(&p, theta.exact()), esf_probability(&p, &theta).as_rational().unwrap());
    }
}

#[test]
fn k_law_mean_matches_expected_k() {
    let theta = Theta::new(0.8).unwrap();
    let law = k_distribution(30, &theta).unwrap();
    let mean: f64 = law.iter().map(|(k, p)| *k as f64 * p.value()).sum();
    assert!((mean - expected_k(30, &theta).unwrap()).abs() < 1e-10);
}

#[test]
fn eve_law_is_a_distribution() {
    let theta = Theta::from_ratio(1, 2).unwrap();
    let law = solve_eve_recurrence(8, &theta).unwrap();
    let total: BigRational = law.q.values().map(|p| p.as_rational().unwrap().clone()).sum();
    assert_eq!(total, rat(1, 1));
}
