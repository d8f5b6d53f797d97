//! A1–A14 as one pass/fail line each. Runs without the libtest harness so the lines
//! come out in order; the process fails if any criterion does.

use std::process::ExitCode;
use std::time::Instant;

use mcl_core::harness::acceptance::{run_acceptance, CriterionResult};

fn main() -> ExitCode {
    let started = Instant::now();
    println!("acceptance suite");
    let results = run_acceptance(|r: &CriterionResult| {
        println!("{} {:<4} {:<28} {:>7.2}s  {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.title, r.runtime_s, r.detail);
    });
    let elapsed = started.elapsed().as_secs_f64();
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    // whole-suite budget
    let in_budget = elapsed < 300.0;
    println!("{} {:<4} {:<28} {:>7.2}s  budget 300s", if in_budget { "PASS" } else { "FAIL" }, "time", "suite runtime", elapsed);
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() && in_budget {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
