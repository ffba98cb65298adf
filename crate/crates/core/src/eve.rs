//! Law of the number of sample genes still carrying the allelic type of the
//! sample's most recent common ancestor ("Eve").

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{use_exact, ExactProbability, Formula, Quantity};
use crate::theta::{Field, Theta};

/// `q_n(j) = P(Y_n = j)` for `j = 0..=n`.
#[derive(Clone, Debug, Serialize)]
pub struct EveDistribution {
    pub n: usize,
    pub theta: Theta,
    pub q: BTreeMap<usize, ExactProbability>,
}

impl EveDistribution {
    pub fn get(&self, j: usize) -> f64 {
        self.q.get(&j).map_or(0.0, ExactProbability::value)
    }

    pub fn mean(&self) -> f64 {
        self.q.iter().map(|(&j, p)| j as f64 * p.value()).sum()
    }

    /// Σ j q_n(j) in exact arithmetic, when the table is exact.
    pub fn exact_mean(&self) -> Option<BigRational> {
        let mut acc = BigRational::from_integer(0.into());
        for (&j, p) in &self.q {
            acc += BigRational::from_integer(j.into()) * p.as_rational()?;
        }
        Some(acc)
    }
}

/// Rows `q_1, …, q_n` of the recurrence, each indexed by `j = 0..=m`.
///
/// For each `m` the row is filled from `j = m` down to `0`:
/// `[m(m−1)+jθ] q_m(j) = m(j−1) q_{m−1}(j−1) + m(m−j−1) q_{m−1}(j) + (j+1)θ q_m(j+1)`,
/// with `q_1(1) = 1` and every out-of-range entry zero.
pub fn eve_table<T: Field>(n: usize, theta: &T) -> Vec<Vec<T>> {
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
    rows.push(vec![T::zero(), T::one()]);
    for m in 2..=n {
        let prev = &rows[m - 2];
        let mut row = vec![T::zero(); m + 1];
        for j in (0..=m).rev() {
            let mut rhs = T::zero();
            if j >= 2 {
                rhs = rhs + T::from_usize_exact(m * (j - 1)) * prev[j - 1].clone();
            }
            if j + 1 < m {
                rhs = rhs + T::from_usize_exact(m * (m - j - 1)) * prev[j].clone();
            }
            if j < m {
                rhs = rhs + T::from_usize_exact(j + 1) * theta.clone() * row[j + 1].clone();
            }
            let lhs = T::from_usize_exact(m * (m - 1)) + T::from_usize_exact(j) * theta.clone();
            row[j] = rhs / lhs;
        }
        rows.push(row);
    }
    rows
}

pub fn solve_eve_recurrence(n: usize, theta: &Theta) -> Result<EveDistribution> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let q = if use_exact(n) {
        let row = eve_table(n, theta.exact()).pop().expect("n >= 1");
        row.into_iter()
            .enumerate()
            .map(|(j, v)| (j, ExactProbability::rational(v, Formula::EveCount)))
            .collect()
    } else {
        let row = eve_table(n, &theta.value()).pop().expect("n >= 1");
        row.into_iter()
            .enumerate()
            .map(|(j, v)| (j, ExactProbability::log(v.ln(), Formula::EveCount)))
            .collect()
    };
    Ok(EveDistribution { n, theta: theta.clone(), q })
}

/// `E(Y_n) = n Π_{j=2}^{n} j(j−1)/(j(j−1)+θ)` in any field.
pub fn expected_eve_value<T: Field>(n: usize, theta: &T) -> T {
    (2..=n).fold(T::from_usize_exact(n), |acc, j| {
        let c = T::from_usize_exact(j * (j - 1));
        acc * c.clone() / (c + theta.clone())
    })
}

pub fn expected_eve_count(n: usize, theta: &Theta) -> Result<Quantity> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    Ok(if use_exact(n) {
        Quantity::Rational(expected_eve_value(n, theta.exact()))
    } else {
        let t = theta.value();
        let ln = (n as f64).ln()
            - (2..=n).map(|j| (t / (j * (j - 1)) as f64).ln_1p()).sum::<f64>();
        Quantity::Log(ln)
    })
}

/// Bounds on the limiting probability that Eve's allele is lost:
/// `θ²/((2+θ)(1+θ)) < q_∞(0) ≤ (θe^θ−θ)/(θe^θ+1)`.
pub fn eve_extinction_bounds(theta: &Theta) -> (f64, f64) {
    let t = theta.value();
    let lower = t * t / ((2.0 + t) * (1.0 + t));
    let upper = t * t.exp_m1() / (t * t.exp() + 1.0);
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn th(s: &str) -> Theta {
        s.parse().unwrap()
    }

    #[test]
    fn two_genes_hand_solution() {
        let d = solve_eve_recurrence(2, &th("1")).unwrap();
        let got: Vec<BigRational> = d.q.values().map(|p| p.as_rational().unwrap().clone()).collect();
        assert_eq!(got, vec![rat(1, 6), rat(1, 3), rat(1, 2)]);
        // general θ: q_2(0) = θ²/((2+θ)(1+θ))
        for t in ["0.5", "2", "7/3"] {
            let theta = th(t);
            let x = theta.exact().clone();
            let q0 = &x * &x / ((rat(2, 1) + &x) * (rat(1, 1) + &x));
            let d = solve_eve_recurrence(2, &theta).unwrap();
            assert_eq!(d.q[&0].as_rational().unwrap(), &q0);
        }
    }

    #[test]
    fn single_gene_is_eve() {
        let d = solve_eve_recurrence(1, &th("3")).unwrap();
        assert_eq!(d.get(1), 1.0);
        assert_eq!(d.get(0), 0.0);
        assert_eq!(expected_eve_count(1, &th("0.2")).unwrap().value(), 1.0);
    }

    #[test]
    fn rows_sum_to_one_exactly() {
        for t in ["0.5", "1", "2"] {
            let rows = eve_table(25, th(t).exact());
            for row in rows {
                let s: BigRational = row.iter().sum();
                assert_eq!(s, rat(1, 1));
            }
        }
    }

    #[test]
    fn all_eve_matches_product() {
        let theta = th("0.7");
        for n in 1..=15 {
            let d = solve_eve_recurrence(n, &theta).unwrap();
            let prod = (2..=n).fold(rat(1, 1), |acc, k| {
                acc * rat(k as i64 - 1, 1) / (rat(k as i64 - 1, 1) + theta.exact())
            });
            assert_eq!(d.q[&n].as_rational().unwrap(), &prod);
            let same = crate::gem::all_same_type_probabilities(n, &theta).unwrap();
            assert_eq!(same.any_type.as_rational().unwrap(), &prod);
        }
    }

    #[test]
    fn mean_matches_closed_form() {
        assert_eq!(expected_eve_count(2, &th("1")).unwrap().rational().unwrap(), &rat(4, 3));
        assert_eq!(expected_eve_count(3, &th("1")).unwrap().rational().unwrap(), &rat(12, 7));
        for t in ["0.5", "1", "2"] {
            let theta = th(t);
            for n in 1..=30 {
                let d = solve_eve_recurrence(n, &theta).unwrap();
                let closed = expected_eve_count(n, &theta).unwrap();
                assert_eq!(&d.exact_mean().unwrap(), closed.rational().unwrap());
            }
        }
    }

    #[test]
    fn float_path_agrees_with_exact() {
        let theta = th("1.3");
        let exact = eve_table(40, theta.exact()).pop().unwrap();
        let float = eve_table(40, &theta.value()).pop().unwrap();
        for (e, f) in exact.iter().zip(&float) {
            assert!((e.to_f64_lossy() - f).abs() < 1e-13);
        }
        let big = solve_eve_recurrence(150, &theta).unwrap();
        let s: f64 = big.q.values().map(|p| p.value()).sum();
        assert!((s - 1.0).abs() < 1e-10);
        let m = expected_eve_count(150, &theta).unwrap().value();
        assert!((big.mean() - m).abs() / m < 1e-10);
    }

    #[test]
    fn extinction_grows_with_n_within_bounds() {
        for t in ["0.5", "1", "2"] {
            let theta = th(t);
            let (lo, hi) = eve_extinction_bounds(&theta);
            let rows = eve_table(40, theta.exact());
            let q0: Vec<BigRational> = rows.iter().skip(1).map(|r| r[0].clone()).collect();
            for w in q0.windows(2) {
                assert!(w[0] <= w[1]);
            }
            for (i, q) in q0.iter().enumerate() {
                let v = q.to_f64_lossy();
                assert!(v >= lo - 1e-15 && v <= hi, "n={} q0={v}", i + 2);
            }
            assert!((q0[0].to_f64_lossy() - lo).abs() < 1e-15);
        }
    }

    #[test]
    fn bound_values() {
        let e = std::f64::consts::E;
        let (lo, hi) = eve_extinction_bounds(&th("1"));
        assert!((lo - 1.0 / 6.0).abs() < 1e-15);
        assert!((hi - (e - 1.0) / (e + 1.0)).abs() < 1e-15);
        let (lo, hi) = eve_extinction_bounds(&th("2"));
        assert!((lo - 1.0 / 3.0).abs() < 1e-15);
        assert!((hi - (2.0 * e * e - 2.0) / (2.0 * e * e + 1.0)).abs() < 1e-15);
        assert!((hi - 0.809_863).abs() < 1e-6);
        let (lo, hi) = eve_extinction_bounds(&th("1e-9"));
        assert!(lo < 1e-17 && hi < 1e-17);
        assert!(lo < hi);
    }
}
