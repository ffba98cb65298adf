//! Small statistics toolkit for checking simulators against exact laws.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Two-pass mean and unbiased variance, summed in iteration order.
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let count = values.len();
        if count == 0 {
            return Self { mean: f64::NAN, std_dev: f64::NAN, std_error: f64::NAN, count };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Self { mean, std_dev, std_error: std_dev / (count as f64).sqrt(), count }
    }

    /// `|mean − target| ≤ k · std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling sparse ones.
    pub cells: usize,
}

impl ChiSquareResult {
    /// Not rejected at significance `alpha`.
    pub fn accepts(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

fn chi_square_p_value(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(statistic)
}

/// Pearson goodness of fit of `observed` counts against cell probabilities.
///
/// Cells with expected count below `min_expected` are pooled into one extra
/// cell (which is itself merged into the largest cell if still too small).
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(observed.len(), probabilities.len(), "one probability per cell");
    let total: u64 = observed.iter().sum();
    let total_f = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0f64, 0.0f64);
    for (&o, &p) in observed.iter().zip(probabilities) {
        let e = p * total_f;
        if e < min_expected {
            pooled.0 += o as f64;
            pooled.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        if pooled.1 >= min_expected || cells.is_empty() {
            cells.push(pooled);
        } else {
            let largest = cells
                .iter_mut()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            largest.0 += pooled.0;
            largest.1 += pooled.1;
        }
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquareResult { statistic, dof, p_value: chi_square_p_value(statistic, dof), cells: cells.len() }
}

/// Pearson test that two count vectors over the same cells share one law.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let n = na + nb;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let ea = col * na / n;
        let eb = col * nb / n;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = cells.saturating_sub(1);
    ChiSquareResult { statistic, dof, p_value: chi_square_p_value(statistic, dof), cells }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical_value(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let (na, nb) = (na as f64, nb as f64);
    c * ((na + nb) / (na * nb)).sqrt()
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_estimate_basics() {
        let e = MeanEstimate::from_values([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((e.std_error - e.std_dev / 2.0).abs() < 1e-15);
        assert!(e.within(2.6, 1.0));
        assert!(!e.within(4.0, 1.0));
    }

    #[test]
    fn chi_square_known_values() {
        // perfectly matching counts
        let r = chi_square_gof(&[25, 25, 50], &[0.25, 0.25, 0.5], 5.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        // χ² = (60−50)²/50 + (40−50)²/50 = 4 on 1 dof → p = 0.0455
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5], 5.0);
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.045_500_263_896_358_4).abs() < 1e-9);
    }

    #[test]
    fn sparse_cells_are_pooled() {
        let r = chi_square_gof(&[500, 497, 2, 1], &[0.5, 0.497, 0.002, 0.001], 5.0);
        assert_eq!(r.cells, 2);
        assert_eq!(r.dof, 1);
        let r = chi_square_gof(&[4992, 4992, 8, 8], &[0.4992, 0.4992, 0.0004, 0.0004], 5.0);
        assert_eq!(r.cells, 3);
    }

    #[test]
    fn two_sample_chi_square() {
        let r = chi_square_two_sample(&[100, 200, 300], &[100, 200, 300]);
        assert_eq!(r.statistic, 0.0);
        let r = chi_square_two_sample(&[100, 300], &[300, 100]);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_statistics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
        // c(0.01) ≈ 1.628
        let c = ks_critical_value(0.01, 1, 1) / 2f64.sqrt();
        assert!((c - 1.6276).abs() < 1e-3);
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&grid, |x| x) <= 0.0005 + 1e-12);
    }
}
