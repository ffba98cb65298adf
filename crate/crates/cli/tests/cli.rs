use std::process::{Command, Output};

fn neutral(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neutral")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = neutral(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

#[test]
fn k_distribution_for_two_genes() {
    assert_eq!(stdout(&["k-dist", "--n", "2", "--theta", "1", "--format", "json"]), "{\"1\":0.5,\"2\":0.5}\n");
}

#[test]
fn k_distribution_csv() {
    let text = stdout(&["k-dist", "--n", "3", "--theta", "1", "--format", "csv"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,probability,exact");
    assert_eq!(lines[1], "1,0.3333333333333333,1/3");
    assert_eq!(lines.len(), 4);
}

#[test]
fn esf_single_and_enumerated() {
    let v = json(&["esf", "--sizes", "2,1", "--theta", "1"]);
    assert_eq!(v["exact"], "1/2");
    let all = json(&["esf", "--n", "4", "--theta", "2"]);
    let total: f64 = all.as_array().unwrap().iter().map(|r| r["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(all.as_array().unwrap().len(), 5);
}

#[test]
fn lambda_values() {
    assert_eq!(stdout(&["lambda", "--two-n-exponent", "1656520"]).trim(), "3");
    assert_eq!(stdout(&["lambda", "--two-n", "1000000"]).trim(), "2");
}

#[test]
fn oldest_allele_law_is_uniform_at_theta_one() {
    let v = json(&["oldest", "--n", "4", "--theta", "1"]);
    for j in 1..=4 {
        assert!((v[j.to_string()].as_f64().unwrap() - 0.25).abs() < 1e-12);
    }
}

#[test]
fn eve_law_sums_to_one() {
    let v = json(&["eve", "--n", "6", "--theta", "1.5"]);
    let total: f64 = v["q"].as_object().unwrap().values().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn seeded_runs_are_reproducible() {
    for args in [
        &["coalescent", "--n", "6", "--theta", "2", "--replicates", "50", "--seed", "9"][..],
        &["gem-sample", "--theta", "0.7", "--seed", "4"],
        &["mapping", "--n", "200", "--replicates", "300", "--seed", "1"],
        &["moran", "--two-n", "4", "--theta", "1", "--chains", "200", "--seed", "3"],
    ] {
        assert_eq!(stdout(args), stdout(args), "{args:?}");
    }
    let a = stdout(&["gem-sample", "--theta", "0.7", "--seed", "4"]);
    let b = stdout(&["gem-sample", "--theta", "0.7", "--seed", "5"]);
    assert_ne!(a, b);
}

#[test]
fn coalescent_emits_one_line_per_replicate() {
    let text = stdout(&["coalescent", "--n", "5", "--theta", "1", "--replicates", "7", "--seed", "2"]);
    assert_eq!(text.lines().count(), 7);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let counts = v["partition"].as_array().unwrap();
        let n: u64 = counts.iter().enumerate().map(|(i, a)| (i as u64 + 1) * a.as_u64().unwrap()).sum();
        assert_eq!(n, 5);
    }
}

#[test]
fn oldest_row_matches_closed_form() {
    let rows = json(&["table-3-1", "--replicates", "2000", "--seed", "1"]);
    for row in rows.as_array().unwrap() {
        let theta = row["theta"].as_f64().unwrap();
        assert!((row["oldest"].as_f64().unwrap() - 1.0 / (1.0 + theta)).abs() < 1e-12);
    }
}

#[test]
fn output_file() {
    let path = std::env::temp_dir().join(format!("neutral-cli-{}.json", std::process::id()));
    let out = neutral(&["k-dist", "--n", "2", "--theta", "1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "{\"1\":0.5,\"2\":0.5}\n");
    std::fs::remove_file(path).unwrap();
}

#[test]
fn bad_input_exits_with_two() {
    for args in [
        &["k-dist", "--bogus"][..],
        &["k-dist", "--n", "3", "--theta", "-1"],
        &["k-dist", "--n", "0", "--theta", "1"],
        &["neutrality", "--sizes", "3,2", "--replicates", "10"],
        &["lambda", "--two-n", "0"],
        &["eve", "--n", "3", "--theta", "1", "--format", "nope"],
    ] {
        assert_eq!(neutral(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn validate_passes() {
    let out = neutral(&["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 13);
}
