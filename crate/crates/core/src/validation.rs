//! End-to-end cross-checks of every simulator against the exact laws.
//!
//! Each criterion is a list of individual checks; a criterion passes when all
//! of its checks do. Randomness for criterion `i` comes from sub-stream `i` of
//! the run seed, so a report is reproducible from its seed.

use std::collections::HashMap;
use std::time::Instant;

use num_rational::BigRational;
use serde::Serialize;

use crate::coalescent::{run_ima_replicates, sample_tmrca, tmrca_mean};
use crate::combinatorics::{
    exhaustive_cycle_type_law, longest_cycle_exact_tail, mapping_largest_component, permutation_largest_cycle,
};
use crate::error::Result;
use crate::esf::{check_consistency_recursion, check_noninterference, esf_distribution, esf_value, k_distribution};
use crate::eve::{eve_extinction_bounds, eve_table, expected_eve_value, solve_eve_recurrence};
use crate::finite::{
    charge_state_run, hoppe_age_counts_with, kelly_population_oldest_distribution, kesten_lambda,
    moran_stationary_samples, moran_theta_exact, MoranConfig, PopulationSize,
};
use crate::gem::{aggregate_age_orders, oldest_sample_count_distribution, population_oldest_in_sample_distribution};
use crate::order_stats::{
    estimate_largest_exceeds_half, largest_exceeds_half_probability, most_frequent_vs_oldest, top_density_simplified,
};
use crate::partition::AllelicPartition;
use crate::quadrature::integrate;
use crate::rng::{replicate_map, rng_from_seed, split_seed};
use crate::stats::{chi_square_gof, MeanEstimate};
use crate::theta::{rational_to_f64, Theta};

pub const DEFAULT_SEED: u64 = 20_240_917;
/// Significance level of every goodness-of-fit check.
pub const ALPHA: f64 = 0.001;
/// Monte Carlo means must lie within this many standard errors.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Criteria run by [`run_all`]; criterion 13 is derived from their timing.
pub const CRITERIA: [u8; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];
pub const TIME_BUDGET_SECS: f64 = 600.0;

const TABLE_THETAS: [&str; 8] = ["0.1", "0.2", "0.5", "1", "2", "5", "10", "20"];
const TABLE_MOST_FREQUENT: [f64; 8] = [0.936, 0.882, 0.758, 0.624, 0.476, 0.297, 0.195, 0.122];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub pass: bool,
    pub seconds: f64,
    pub criteria: Vec<CriterionResult>,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, pass: bool, detail: impl Into<String>) {
        self.0.push(Check { pass, detail: detail.into() });
    }

    fn within(&mut self, label: &str, est: &MeanEstimate, target: f64) {
        let z = est.z_score(target);
        self.push(
            est.within(target, SE_MULTIPLIER),
            format!("{label}: {:.5} ± {:.5} vs {target:.5} (z = {z:.2})", est.mean, est.std_error),
        );
    }

    fn close(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        self.push((value - target).abs() <= tol, format!("{label}: {value:.6} vs {target:.6} (tol {tol})"));
    }
}

fn th(s: &str) -> Theta {
    s.parse().expect("literal theta")
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn most_frequent_row(seed: u64, c: &mut Checks) -> Result<()> {
    let start = Instant::now();
    let thetas: Vec<Theta> = TABLE_THETAS.iter().map(|t| th(t)).collect();
    let rows = most_frequent_vs_oldest(&thetas, 100_000, seed)?;
    for (row, &target) in rows.iter().zip(&TABLE_MOST_FREQUENT) {
        c.close(&format!("θ={} E x_(1)", row.theta), row.most_frequent, target, 0.01);
        let exact = rational_to_f64(&(BigRational::from_integer(1.into()) / (BigRational::from_integer(1.into()) + row.theta.exact())));
        c.push(row.oldest == exact, format!("θ={} oldest {} = 1/(1+θ)", row.theta, row.oldest));
    }
    let secs = start.elapsed().as_secs_f64();
    c.push(secs < 60.0, format!("runtime {secs:.1}s < 60s"));
    Ok(())
}

fn kingman_tails(seed: u64, c: &mut Checks) -> Result<()> {
    let ln2 = std::f64::consts::LN_2;
    let ln_silver = (1.0 + 2f64.sqrt()).ln();
    for (i, (t, closed)) in [("1", ln2), ("0.5", ln_silver)].into_iter().enumerate() {
        let theta = th(t);
        c.close(&format!("θ={t} P(x_(1) > 1/2) by quadrature"), largest_exceeds_half_probability(&theta), closed, 1e-8);
        let mc = estimate_largest_exceeds_half(&theta, 100_000, split_seed(seed, i as u64))?;
        c.within(&format!("θ={t} Monte Carlo tail"), &mc, closed);
    }
    Ok(())
}

fn partition_counts(parts: &[AllelicPartition], sample: impl Iterator<Item = AllelicPartition>) -> Vec<u64> {
    let index: HashMap<&AllelicPartition, usize> = parts.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut counts = vec![0u64; parts.len()];
    for p in sample {
        counts[index[&p]] += 1;
    }
    counts
}

fn coalescent_esf(seed: u64, c: &mut Checks) -> Result<()> {
    let theta = th("1");
    let reps = run_ima_replicates(5, &theta, 100_000, seed)?;
    let esf = esf_distribution(5, &1.0f64);
    let parts: Vec<AllelicPartition> = esf.iter().map(|(p, _)| p.clone()).collect();
    let probs: Vec<f64> = esf.iter().map(|(_, v)| *v).collect();
    let observed = partition_counts(&parts, reps.iter().map(|r| r.partition.clone()));
    let r = chi_square_gof(&observed, &probs, 5.0);
    c.push(r.accepts(ALPHA), format!("partition law: χ² = {:.2} on {} dof, p = {:.4}", r.statistic, r.dof, r.p_value));
    let kd = k_distribution(5, &theta)?;
    let mut k_obs = vec![0u64; 5];
    for rep in &reps {
        k_obs[rep.k - 1] += 1;
    }
    let k_probs: Vec<f64> = kd.values().map(|p| p.value()).collect();
    let r = chi_square_gof(&k_obs, &k_probs, 5.0);
    c.push(r.accepts(ALPHA), format!("K law: χ² = {:.2} on {} dof, p = {:.4}", r.statistic, r.dof, r.p_value));
    Ok(())
}

fn tmrca(seed: u64, c: &mut Checks) -> Result<()> {
    for (i, n) in [2usize, 3, 10, 50].into_iter().enumerate() {
        let h = replicate_map(split_seed(seed, i as u64), 100_000, |_, s| sample_tmrca(n, &mut rng_from_seed(s)));
        c.within(&format!("n={n} mean T_MRCAS"), &MeanEstimate::from_values(h), tmrca_mean(n));
    }
    let h = replicate_map(split_seed(seed, 99), 1_000_000, |_, s| sample_tmrca(2, &mut rng_from_seed(s)));
    let m = MeanEstimate::from_values(h);
    c.push((0.99..=1.01).contains(&m.mean), format!("n=2 mean over 10^6 = {:.5} in [0.99, 1.01]", m.mean));
    Ok(())
}

fn eve_suite(seed: u64, c: &mut Checks) -> Result<()> {
    let q2 = solve_eve_recurrence(2, &th("1"))?;
    let got: Vec<BigRational> = q2.q.values().map(|p| p.as_rational().expect("exact").clone()).collect();
    let want: Vec<BigRational> = [(1, 6), (1, 3), (1, 2)].iter().map(|&(a, b)| BigRational::new(a.into(), b.into())).collect();
    c.push(got == want, format!("q_2(·; θ=1) = ({}, {}, {})", got[0], got[1], got[2]));

    for t in ["0.5", "1", "2"] {
        let theta = th(t);
        let rows = eve_table(30, theta.exact());
        let mut worst = 0.0f64;
        for (i, row) in rows.iter().enumerate() {
            let n = i + 1;
            let mean: BigRational =
                row.iter().enumerate().map(|(j, q)| BigRational::from_integer(j.into()) * q).sum();
            let closed = expected_eve_value(n, theta.exact());
            worst = worst.max(rational_to_f64(&((&mean - &closed) / &closed)).abs());
        }
        c.push(worst <= 1e-10, format!("θ={t}: Σ j q_n(j) vs closed-form mean, n ≤ 30, max rel err {worst:e}"));

        let (lo, hi) = eve_extinction_bounds(&theta);
        let q0: Vec<f64> = eve_table(40, theta.exact()).iter().skip(1).map(|r| rational_to_f64(&r[0])).collect();
        let monotone = q0.windows(2).all(|w| w[0] <= w[1]);
        c.push(monotone, format!("θ={t}: q_n(0) non-decreasing for n = 2..40"));
        let inside = q0.iter().all(|&q| q >= lo && q <= hi);
        c.push(inside, format!("θ={t}: {lo:.5} ≤ q_n(0) ≤ {hi:.5} for n = 2..40 (q_40(0) = {:.5})", q0[q0.len() - 1]));
    }

    let n = 5;
    let exact = solve_eve_recurrence(n, &th("1"))?;
    let reps = run_ima_replicates(n, &th("1"), 100_000, seed)?;
    for j in 0..=n {
        let est = MeanEstimate::from_values(reps.iter().map(|r| indicator(r.y_n == j)));
        let q = exact.get(j);
        // binomial standard error from the exact cell probability
        let se = (q * (1.0 - q) / reps.len() as f64).sqrt();
        let ok = (est.mean - q).abs() <= SE_MULTIPLIER * se;
        c.push(ok, format!("q̂_5({j}) = {:.5} vs {q:.5} (se {se:.5})", est.mean));
    }
    Ok(())
}

fn consistency(c: &mut Checks) -> Result<()> {
    for t in ["0.5", "1", "2"] {
        let theta = th(t);
        let dist = |n: usize| -> HashMap<AllelicPartition, BigRational> {
            esf_distribution(n, theta.exact()).into_iter().collect()
        };
        for n in 2..=8 {
            let out = check_consistency_recursion(&dist(n), &dist(n + 1))?;
            c.push(out.pass, format!("θ={t} n={n}: consistency residual {:e}", out.max_residual));
            let out = check_noninterference(n, &theta)?;
            c.push(out.pass, format!("θ={t} n={n}: non-interference TV {:e}", out.max_residual));
        }
    }
    Ok(())
}

fn moran(seed: u64, c: &mut Checks) -> Result<()> {
    let two_n = 4;
    let u = BigRational::new(1.into(), 5.into());
    let theta = moran_theta_exact(two_n, &u)?;
    c.push(theta.value() == 1.0, format!("u = 1/5 gives θ = {theta}"));
    let config = MoranConfig::new(two_n, rational_to_f64(&u));
    let samples = moran_stationary_samples(&config, 100_000, 1, seed)?;
    let esf = esf_distribution(two_n, &theta.value());
    let parts: Vec<AllelicPartition> = esf.iter().map(|(p, _)| p.clone()).collect();
    let probs: Vec<f64> = esf.iter().map(|(_, v)| *v).collect();
    let observed = partition_counts(&parts, samples.iter().map(|s| s.partition.clone()));
    let r = chi_square_gof(&observed, &probs, 5.0);
    c.push(
        r.accepts(ALPHA),
        format!("2N=4 partition law vs ESF: χ² = {:.2} on {} dof, p = {:.4}", r.statistic, r.dof, r.p_value),
    );
    let same = MeanEstimate::from_values(samples.iter().map(|s| indicator(s.pair_same_type)));
    c.within("P(pair of genes same type)", &same, 1.0 / (1.0 + theta.value()));
    Ok(())
}

fn hoppe_kelly(seed: u64, c: &mut Checks) -> Result<()> {
    let mut stream = 0u64;
    for two_n in [4usize, 10] {
        for t in ["1", "2"] {
            let theta = th(t);
            let target = (two_n as f64 + theta.value()) / (1.0 + theta.value());
            stream += 1;
            let n1 = replicate_map(split_seed(seed, stream), 100_000, |_, s| {
                hoppe_age_counts_with(two_n, &theta, &mut rng_from_seed(s))[0] as f64
            });
            c.within(&format!("2N={two_n} θ={t} mean N_1"), &MeanEstimate::from_values(n1), target);
            let kelly = kelly_population_oldest_distribution(two_n, &theta)?;
            let mean: BigRational = kelly
                .iter()
                .map(|(&j, p)| BigRational::from_integer(j.into()) * p.as_rational().expect("exact"))
                .sum();
            let err = (rational_to_f64(&mean) - target).abs();
            c.push(err <= 1e-12, format!("2N={two_n} θ={t} exact oldest-count mean {} (err {err:e})", rational_to_f64(&mean)));
        }
    }
    Ok(())
}

fn combinatorial(seed: u64, c: &mut Checks) -> Result<()> {
    let one = BigRational::from_integer(1.into());
    for n in 1..=6 {
        let law = exhaustive_cycle_type_law(n)?;
        let parts = AllelicPartition::enumerate(n);
        let ok = law.len() == parts.len()
            && parts.iter().all(|p| law.get(p.counts()) == Some(&esf_value(p, &one)));
        c.push(ok, format!("n={n}: cycle-type law over all {n}! permutations equals ESF(θ=1)"));
    }
    let n = 1000;
    let tail = rational_to_f64(&longest_cycle_exact_tail(n)?);
    let perm = permutation_largest_cycle(n, 100_000, split_seed(seed, 0))?;
    c.close("P(longest cycle > n/2), n=1000", perm.exceeds_half.mean, tail, 0.01);
    let map = mapping_largest_component(n, 100_000, split_seed(seed, 1))?;
    c.close("mean largest mapping component / n", map.mean_fraction.mean, 0.758, 0.01);
    c.close("P(largest mapping component > n/2)", map.exceeds_half.mean, 0.881374, 0.01);
    Ok(())
}

fn age_ordered(c: &mut Checks) -> Result<()> {
    for t in ["0.5", "1", "2"] {
        let theta = th(t);
        let x = theta.exact();
        let agg_ok = (1..=8).all(|n| {
            AllelicPartition::enumerate(n)
                .iter()
                .all(|p| aggregate_age_orders(p, x) == esf_value(p, x))
        });
        c.push(agg_ok, format!("θ={t}: age-ordered law summed over orders equals ESF for every partition, n ≤ 8"));

        let mut cond_ok = true;
        for n in 1..=20 {
            let kelly = oldest_sample_count_distribution(n, &theta)?;
            let donnelly = population_oldest_in_sample_distribution(n, &theta)?;
            let present = BigRational::from_integer(1.into()) - donnelly[&0].as_rational().expect("exact");
            for j in 1..=n {
                let cond = donnelly[&j].as_rational().expect("exact") / &present;
                cond_ok &= Some(&cond) == kelly[&j].as_rational();
            }
        }
        c.push(
            cond_ok,
            format!("θ={t}: population-oldest count given presence equals sample-oldest law, n ≤ 20"),
        );
    }
    Ok(())
}

fn kesten(c: &mut Checks) -> Result<()> {
    for (input, want) in [("10", 1u32), ("2", 0), ("10^1656520", 3)] {
        let got = kesten_lambda(&input.parse::<PopulationSize>()?)?;
        c.push(got == want, format!("λ({input}) = {got}, expected {want}"));
    }
    Ok(())
}

fn substitutes(seed: u64, c: &mut Checks) -> Result<()> {
    // Kesten: ranges stay bounded and few states are occupied.
    let snaps = charge_state_run(20, 0.05, 40_000, 10, split_seed(seed, 0))?;
    let q99 = |w: &[crate::finite::ChargeSnapshot]| {
        let mut r: Vec<i64> = w.iter().map(|s| s.range).collect();
        r.sort_unstable();
        r[(r.len() * 99) / 100]
    };
    let half = snaps.len() / 2;
    let (early, late) = (q99(&snaps[400..half]), q99(&snaps[half..]));
    c.push(
        late <= 2 * early + 2 && early <= 2 * late + 2,
        format!("charge-state 2N=20: 99th percentile range {early} then {late}"),
    );
    let snaps = charge_state_run(100, 0.001, 20_000, 100, split_seed(seed, 1))?;
    let most = snaps.iter().map(|s| s.occupied).max().unwrap_or(0);
    c.push(most < 10, format!("charge-state 2N=100, 4Nu=0.2: at most {most} occupied states"));

    // Kingman density: the simplified form is used only where it holds.
    for t in ["1", "2", "3"] {
        let theta = th(t);
        let (mass, _) = integrate(|x| top_density_simplified(&[x], &theta).unwrap_or(0.0), 0.5, 1.0, 1e-12);
        let reference = largest_exceeds_half_probability(&theta);
        c.close(&format!("θ={t}: simplified density mass on (1/2, 1)"), mass, reference, 1e-6);
    }
    let outside = top_density_simplified(&[0.3, 0.2], &th("1"));
    c.push(outside.is_err(), "simplified density refuses x_1 + 2x_2 < 1");
    Ok(())
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "most frequent vs oldest allele mean frequency",
        2 => "largest-frequency tail above one half",
        3 => "coalescent partitions follow the ESF",
        4 => "mean time to the sample's common ancestor",
        5 => "Eve's allele",
        6 => "sampling consistency and non-interference",
        7 => "Moran model stationary partition",
        8 => "Hoppe urn and Kelly oldest-allele law",
        9 => "random permutations and mappings",
        10 => "age-ordered sampling formulas",
        11 => "Kesten lambda",
        12 => "desk-scale substitutes for asymptotic claims",
        13 => "full run within the time budget",
        _ => "unknown",
    }
}

pub fn run_criterion(id: u8, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let s = split_seed(seed, id as u64);
    let mut c = Checks::default();
    let outcome = match id {
        1 => most_frequent_row(s, &mut c),
        2 => kingman_tails(s, &mut c),
        3 => coalescent_esf(s, &mut c),
        4 => tmrca(s, &mut c),
        5 => eve_suite(s, &mut c),
        6 => consistency(&mut c),
        7 => moran(s, &mut c),
        8 => hoppe_kelly(s, &mut c),
        9 => combinatorial(s, &mut c),
        10 => age_ordered(&mut c),
        11 => kesten(&mut c),
        12 => substitutes(s, &mut c),
        _ => Err(crate::Error::Domain(format!("no criterion {id}"))),
    };
    if let Err(e) = outcome {
        c.push(false, format!("error: {e}"));
    }
    let checks = c.0;
    CriterionResult {
        id,
        title: title(id).to_string(),
        pass: !checks.is_empty() && checks.iter().all(|k| k.pass),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    }
}

/// Run every criterion, then add criterion 13: all of 1–11 passed within
/// [`TIME_BUDGET_SECS`].
pub fn run_all(seed: u64, mut progress: impl FnMut(&CriterionResult)) -> ValidationReport {
    let start = Instant::now();
    let mut criteria = Vec::new();
    for id in CRITERIA {
        let r = run_criterion(id, seed);
        progress(&r);
        criteria.push(r);
    }
    let core: Vec<&CriterionResult> = criteria.iter().filter(|r| r.id <= 11).collect();
    let core_secs: f64 = core.iter().map(|r| r.seconds).sum();
    let core_pass = core.iter().all(|r| r.pass);
    let last = CriterionResult {
        id: 13,
        title: title(13).to_string(),
        pass: core_pass && core_secs < TIME_BUDGET_SECS,
        seconds: 0.0,
        checks: vec![
            Check { pass: core_pass, detail: "criteria 1-11 all pass".into() },
            Check {
                pass: core_secs < TIME_BUDGET_SECS,
                detail: format!("criteria 1-11 took {core_secs:.1}s (budget {TIME_BUDGET_SECS}s)"),
            },
        ],
    };
    progress(&last);
    criteria.push(last);
    ValidationReport {
        seed,
        pass: criteria.iter().all(|r| r.pass),
        seconds: start.elapsed().as_secs_f64(),
        criteria,
    }
}
