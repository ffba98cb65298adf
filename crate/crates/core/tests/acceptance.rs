use std::process::ExitCode;

use neutral_core::validation::{run_all, DEFAULT_SEED};

fn main() -> ExitCode {
    let report = run_all(DEFAULT_SEED, |r| {
        println!("criterion {:>2} {} ({:.1}s): {}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.seconds, r.title);
        for c in &r.checks {
            println!("    [{}] {}", if c.pass { "ok" } else { "XX" }, c.detail);
        }
    });
    println!("total {:.1}s", report.seconds);
    let failed: Vec<u8> = report.criteria.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
