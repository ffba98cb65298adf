//! `neutral`: exact laws and simulators of neutral population genetics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use neutral_core::coalescent::{run_ima_replicates, t_mrcas_statistics};
use neutral_core::combinatorics::{
    longest_cycle_exact_tail, mapping_largest_component, permutation_largest_cycle, random_mapping_component_sizes,
    random_permutation_cycle_type,
};
use neutral_core::esf::{esf_distribution, esf_probability, k_distribution};
use neutral_core::eve::{eve_extinction_bounds, expected_eve_count, solve_eve_recurrence};
use neutral_core::finite::{
    charge_state_run, hoppe_age_counts, hoppe_monomorphism_probability, kelly_population_oldest_distribution,
    kesten_lambda, mean_age_given_frequency, mean_age_oldest, mean_age_oldest_in_sample, mean_oldest_count,
    moran_stationary_samples, moran_theta, moran_u_for_theta, MoranConfig, PopulationSize,
};
use neutral_core::gem::{
    age_ordered_sample_probability, oldest_sample_count_distribution, population_oldest_in_sample_distribution,
    sample_gem, AgeOrderedSample, DEFAULT_EPSILON,
};
use neutral_core::neutrality::neutrality_test;
use neutral_core::order_stats::{estimate_mean_order_statistic, most_frequent_vs_oldest};
use neutral_core::rng::replicate_map;
use neutral_core::stats::MeanEstimate;
use neutral_core::validation::{run_all, DEFAULT_SEED};
use neutral_core::{AllelicPartition, ExactProbability, Theta};

#[derive(Parser)]
#[command(name = "neutral", version, about = "Exact laws and simulators of neutral population genetics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output format; csv is available for tabular results.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write the output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// A partition given either as allele counts `a_1,a_2,…` or as class sizes.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct PartitionArg {
    /// Counts a_1,…,a_n: a_i alleles carried by exactly i genes.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<u32>>,
    /// Allele class sizes, in any order.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

impl PartitionArg {
    fn partition(&self) -> neutral_core::Result<AllelicPartition> {
        match (&self.counts, &self.sizes) {
            (Some(c), _) => AllelicPartition::new(c.clone()),
            (_, Some(s)) => AllelicPartition::from_sizes(s.iter().copied()),
            _ => unreachable!("clap enforces one of the two"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ewens sampling formula for one partition, or the whole law with --n.
    Esf {
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["sizes", "n"])]
        counts: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',', conflicts_with = "n")]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        theta: Theta,
    },
    /// Law of the number of distinct alleles in a sample.
    KDist {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: Theta,
    },
    /// Probability of an age-ordered sample (counts oldest first).
    AgeDist {
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        #[arg(long)]
        theta: Theta,
    },
    /// Sample count of the oldest allele (in the sample, or in the population with --population).
    Oldest {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: Theta,
        #[arg(long)]
        population: bool,
    },
    /// One GEM draw of age-ordered population frequencies.
    GemSample {
        #[arg(long)]
        theta: Theta,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo mean of the rank-th largest population frequency.
    OrderStats {
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long)]
        theta: Theta,
        #[arg(long, default_value_t = 100_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Coalescent replicates as JSON lines, or time-to-ancestor summary with --summary.
    Coalescent {
        #[arg(long)]
        n: usize,
        #[arg(long, required_unless_present = "summary")]
        theta: Option<Theta>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        summary: bool,
    },
    /// Law of the sample count of the common ancestor's allele.
    Eve {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: Theta,
    },
    /// Long-run Moran partitions from independent chains, against the ESF.
    Moran {
        #[arg(long)]
        two_n: usize,
        #[arg(long, conflicts_with = "theta", required_unless_present = "theta")]
        u: Option<f64>,
        #[arg(long)]
        theta: Option<Theta>,
        #[arg(long, default_value_t = 10_000)]
        chains: usize,
        #[arg(long, default_value_t = 1)]
        samples_per_chain: usize,
        #[arg(long)]
        exclude_self: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Hoppe urn allele counts by age for a population of 2N genes.
    Hoppe {
        #[arg(long)]
        two_n: usize,
        #[arg(long)]
        theta: Theta,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every replicate's counts as JSON lines.
        #[arg(long)]
        raw: bool,
    },
    /// Mean ages in generations.
    Ages {
        #[arg(long)]
        two_n: usize,
        #[arg(long)]
        theta: Theta,
        /// Population frequency of the allele.
        #[arg(long)]
        p: Option<f64>,
        /// Sample size for the oldest allele in a sample.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Charge-state model under Wright–Fisher generations.
    ChargeState {
        #[arg(long)]
        two_n: usize,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 10_000)]
        generations: u64,
        #[arg(long, default_value_t = 100)]
        record_every: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Kesten's lambda for a population of 2N genes.
    Lambda {
        #[arg(long, conflicts_with = "two_n_exponent", required_unless_present = "two_n_exponent")]
        two_n: Option<String>,
        /// 2N = 10^E.
        #[arg(long)]
        two_n_exponent: Option<u64>,
    },
    /// Cycle type of a random permutation, or a longest-cycle summary with --replicates.
    Perm {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Component sizes of a random mapping, or a largest-component summary with --replicates.
    Mapping {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Homozygosity test of neutrality.
    Neutrality {
        #[command(flatten)]
        partition: PartitionArg,
        #[arg(long, default_value_t = 100_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean frequency of the most frequent and of the oldest allele.
    #[command(name = "table-3-1")]
    Table31 {
        #[arg(long, default_value_t = 100_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full cross-validation suite.
    Validate {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<neutral_core::Error> for Failure {
    fn from(e: neutral_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("serializable");
    s.push('\n');
    s
}

fn json_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| json(&v)).collect()
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn no_csv(format: Format, command: &str) -> Result<(), Failure> {
    if format == Format::Csv {
        return Err(Failure::Usage(format!("{command} has no tabular output; use --format json")));
    }
    Ok(())
}

fn distribution_out(format: Format, key: &str, dist: &BTreeMap<usize, ExactProbability>) -> String {
    match format {
        Format::Json => json(dist),
        Format::Csv => csv_table(
            &[key, "probability", "exact"],
            dist.iter().map(|(k, p)| vec![k.to_string(), p.value().to_string(), p.quantity.to_string()]),
        ),
    }
}

#[derive(Serialize)]
struct EsfRow {
    partition: AllelicPartition,
    probability: f64,
    exact: Option<String>,
}

fn esf_row(p: AllelicPartition, theta: &Theta) -> EsfRow {
    let prob = esf_probability(&p, theta);
    EsfRow { exact: prob.as_rational().map(|r| r.to_string()), probability: prob.value(), partition: p }
}

fn run(command: Command, format: Format) -> Outcome {
    Ok(match command {
        Command::Esf { counts, sizes, n, theta } => {
            let rows: Vec<EsfRow> = match (counts, sizes, n) {
                (Some(c), _, _) => vec![esf_row(AllelicPartition::new(c)?, &theta)],
                (_, Some(s), _) => vec![esf_row(AllelicPartition::from_sizes(s)?, &theta)],
                (_, _, Some(n)) => {
                    if n == 0 {
                        return Err(Failure::Usage("n must be positive".into()));
                    }
                    esf_distribution(n, &theta.value())
                        .into_iter()
                        .map(|(p, _)| esf_row(p, &theta))
                        .collect()
                }
                _ => return Err(Failure::Usage("give --counts, --sizes or --n".into())),
            };
            match format {
                Format::Json if rows.len() == 1 => json(&rows[0]),
                Format::Json => json(&rows),
                Format::Csv => csv_table(
                    &["partition", "probability", "exact"],
                    rows.into_iter().map(|r| {
                        vec![r.partition.to_string(), r.probability.to_string(), r.exact.unwrap_or_default()]
                    }),
                ),
            }
        }
        Command::KDist { n, theta } => distribution_out(format, "k", &k_distribution(n, &theta)?),
        Command::AgeDist { counts, theta } => {
            no_csv(format, "age-dist")?;
            let sample = AgeOrderedSample::new(counts)?;
            let p = age_ordered_sample_probability(&sample, &theta);
            json(&serde_json::json!({
                "counts": sample.counts(),
                "probability": p.value(),
                "exact": p.as_rational().map(|r| r.to_string()),
            }))
        }
        Command::Oldest { n, theta, population } => {
            let dist = if population {
                population_oldest_in_sample_distribution(n, &theta)?
            } else {
                oldest_sample_count_distribution(n, &theta)?
            };
            distribution_out(format, "j", &dist)
        }
        Command::GemSample { theta, epsilon, seed } => {
            let draw = sample_gem(&theta, epsilon, seed)?;
            match format {
                Format::Json => json(&draw),
                Format::Csv => csv_table(
                    &["age_rank", "weight"],
                    draw.weights.iter().enumerate().map(|(i, w)| vec![(i + 1).to_string(), w.to_string()]),
                ),
            }
        }
        Command::OrderStats { rank, theta, replicates, seed } => {
            no_csv(format, "order-stats")?;
            json(&estimate_mean_order_statistic(rank, &theta, replicates, seed)?)
        }
        Command::Coalescent { n, theta, replicates, seed, summary } => {
            if summary {
                no_csv(format, "coalescent --summary")?;
                json(&t_mrcas_statistics(n, replicates, seed)?)
            } else {
                let theta = theta.expect("clap requires theta without --summary");
                let reps = run_ima_replicates(n, &theta, replicates, seed)?;
                match format {
                    Format::Json => json_lines(reps),
                    Format::Csv => csv_table(
                        &["partition", "k", "t_mrcas", "x_n", "y_n", "seed"],
                        reps.into_iter().map(|r| {
                            vec![
                                r.partition.to_string(),
                                r.k.to_string(),
                                r.t_mrcas.to_string(),
                                r.x_n.to_string(),
                                r.y_n.to_string(),
                                r.seed.to_string(),
                            ]
                        }),
                    ),
                }
            }
        }
        Command::Eve { n, theta } => {
            let dist = solve_eve_recurrence(n, &theta)?;
            match format {
                Format::Csv => distribution_out(format, "j", &dist.q),
                Format::Json => {
                    let (lower, upper) = eve_extinction_bounds(&theta);
                    json(&serde_json::json!({
                        "n": n,
                        "theta": theta,
                        "q": dist.q,
                        "mean": expected_eve_count(n, &theta)?.value(),
                        "limit_extinction_bounds": {"lower": lower, "upper": upper},
                    }))
                }
            }
        }
        Command::Moran { two_n, u, theta, chains, samples_per_chain, exclude_self, seed } => {
            let u = match (u, theta) {
                (Some(u), _) => u,
                (_, Some(t)) => moran_u_for_theta(two_n, &t),
                _ => unreachable!("clap requires one"),
            };
            let theta = moran_theta(two_n, u)?;
            let mut config = MoranConfig::new(two_n, u);
            config.exclude_self = exclude_self;
            let samples = moran_stationary_samples(&config, chains, samples_per_chain, seed)?;
            let total = samples.len() as f64;
            let mut freq: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
            for s in &samples {
                *freq.entry(s.partition.counts().to_vec()).or_default() += 1;
            }
            let rows: Vec<(String, f64, f64)> = esf_distribution(two_n, &theta.value())
                .into_iter()
                .map(|(p, e)| {
                    let observed = freq.get(p.counts()).copied().unwrap_or(0) as f64 / total;
                    (p.to_string(), observed, e)
                })
                .collect();
            let pair = MeanEstimate::from_values(samples.iter().map(|s| if s.pair_same_type { 1.0 } else { 0.0 }));
            match format {
                Format::Csv => csv_table(
                    &["partition", "observed", "esf"],
                    rows.into_iter().map(|(p, o, e)| vec![p, o.to_string(), e.to_string()]),
                ),
                Format::Json => json(&serde_json::json!({
                    "config": config,
                    "theta": theta,
                    "samples": samples.len(),
                    "partitions": rows.iter().map(|(p, o, e)| serde_json::json!({"partition": p, "observed": o, "esf": e})).collect::<Vec<_>>(),
                    "pair_same_type": pair,
                    "pair_same_type_exact": 1.0 / (1.0 + theta.value()),
                })),
            }
        }
        Command::Hoppe { two_n, theta, replicates, seed, raw } => {
            no_csv(format, "hoppe")?;
            if replicates == 0 {
                return Err(Failure::Usage("need at least one replicate".into()));
            }
            let draws: Vec<Vec<usize>> = replicate_map(seed, replicates, |_, s| hoppe_age_counts(two_n, &theta, s))
                .into_iter()
                .collect::<neutral_core::Result<_>>()?;
            if raw {
                json_lines(draws)
            } else {
                let n1 = MeanEstimate::from_values(draws.iter().map(|d| d[0] as f64));
                let mono = MeanEstimate::from_values(draws.iter().map(|d| if d[0] == two_n { 1.0 } else { 0.0 }));
                json(&serde_json::json!({
                    "two_n": two_n,
                    "theta": theta,
                    "replicates": replicates,
                    "seed": seed,
                    "mean_n1": n1,
                    "mean_n1_exact": mean_oldest_count(two_n, &theta),
                    "monomorphic": mono,
                    "monomorphic_exact": hoppe_monomorphism_probability(two_n, &theta)?.value(),
                    "oldest_count_law": kelly_population_oldest_distribution(two_n, &theta)?,
                }))
            }
        }
        Command::Ages { two_n, theta, p, n } => {
            no_csv(format, "ages")?;
            let mut out = serde_json::Map::new();
            out.insert("mean_age_oldest".into(), mean_age_oldest(two_n, &theta)?.into());
            if let Some(p) = p {
                out.insert("mean_age_given_frequency".into(), mean_age_given_frequency(two_n, &theta, p)?.into());
            }
            if let Some(n) = n {
                out.insert("mean_age_oldest_in_sample".into(), mean_age_oldest_in_sample(two_n, n, &theta)?.into());
            }
            json(&out)
        }
        Command::ChargeState { two_n, u, generations, record_every, seed } => {
            let snaps = charge_state_run(two_n, u, generations, record_every, seed)?;
            match format {
                Format::Json => json(&snaps),
                Format::Csv => csv_table(
                    &["generation", "range", "occupied"],
                    snaps.iter().map(|s| vec![s.generation.to_string(), s.range.to_string(), s.occupied.to_string()]),
                ),
            }
        }
        Command::Lambda { two_n, two_n_exponent } => {
            no_csv(format, "lambda")?;
            let size = match (two_n, two_n_exponent) {
                (Some(s), _) => s.parse::<PopulationSize>()?,
                (_, Some(e)) => PopulationSize::PowerOfTen(e),
                _ => unreachable!("clap requires one"),
            };
            json(&kesten_lambda(&size)?)
        }
        Command::Perm { n, seed, replicates } => {
            no_csv(format, "perm")?;
            match replicates {
                None => json(&random_permutation_cycle_type(n, seed)?),
                Some(r) => {
                    let summary = permutation_largest_cycle(n, r, seed)?;
                    let tail = longest_cycle_exact_tail(n)?;
                    json(&serde_json::json!({
                        "summary": summary,
                        "exact_tail": neutral_core::theta::rational_to_f64(&tail),
                    }))
                }
            }
        }
        Command::Mapping { n, seed, replicates } => {
            no_csv(format, "mapping")?;
            match replicates {
                None => json(&random_mapping_component_sizes(n, seed)?),
                Some(r) => json(&mapping_largest_component(n, r, seed)?),
            }
        }
        Command::Neutrality { partition, replicates, seed } => {
            no_csv(format, "neutrality")?;
            let p = partition.partition()?;
            json(&neutrality_test(&p, replicates, seed)?)
        }
        Command::Table31 { replicates, seed } => {
            let thetas: Vec<Theta> = ["0.1", "0.2", "0.5", "1", "2", "5", "10", "20"]
                .iter()
                .map(|t| t.parse().expect("literal"))
                .collect();
            let rows = most_frequent_vs_oldest(&thetas, replicates, seed)?;
            match format {
                Format::Json => json(&rows),
                Format::Csv => {
                    let mut header = vec!["row".to_string()];
                    header.extend(rows.iter().map(|r| format!("theta={}", r.theta)));
                    let most = std::iter::once("most_frequent".to_string())
                        .chain(rows.iter().map(|r| format!("{:.3}", r.most_frequent)))
                        .collect();
                    let oldest = std::iter::once("oldest".to_string())
                        .chain(rows.iter().map(|r| format!("{:.3}", r.oldest)))
                        .collect();
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    csv_table(&header, [most, oldest])
                }
            }
        }
        Command::Validate { seed } => {
            let report = run_all(seed, |r| {
                eprintln!("criterion {:>2} {} {}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.title);
            });
            let text = match format {
                Format::Json => json(&report),
                Format::Csv => csv_table(
                    &["criterion", "pass", "seconds", "title"],
                    report.criteria.iter().map(|r| {
                        vec![r.id.to_string(), r.pass.to_string(), format!("{:.2}", r.seconds), r.title.clone()]
                    }),
                ),
            };
            if !report.pass {
                return Err(Failure::Validation(text));
            }
            text
        }
    })
}

fn write_output(text: &str, out: Option<&PathBuf>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.common.out.clone();
    let (text, code) = match run(cli.command, cli.common.format) {
        Ok(text) => (text, ExitCode::SUCCESS),
        Err(Failure::Validation(text)) => (text, ExitCode::from(1)),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_output(&text, out.as_ref()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    code
}
