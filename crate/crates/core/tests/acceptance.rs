//! One line per acceptance criterion; exits nonzero if any criterion fails.

use std::process::ExitCode;

use harnad_core::suite::{run_criterion, run_flow_case, two_group_flow_case};

const SEED: u64 = 20_240_601;

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for id in 1..=10 {
        let r = run_criterion(id, SEED);
        println!("{}", r.line());
        if !r.passed {
            failed.push(id);
        }
    }
    // not a criterion: the two-eigenvalue irregular flow is reported only
    let diag = run_flow_case("two-group irregular", two_group_flow_case(), SEED);
    println!("diagnostic    {} {}", if diag.passed { "pass" } else { "fail" }, diag.describe());
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
