//! Reference checks 1 to 13 at their stated tolerances.
//!
//! Prints the detailed report, then one PASS/FAIL line per criterion, and
//! exits non-zero if any criterion fails. `ACCEPTANCE_FILTER` narrows the
//! run to matching ids or names.

use std::process::ExitCode;

use lyorad::validation::run_validation_suite;

fn main() -> ExitCode {
    let filter = std::env::var("ACCEPTANCE_FILTER").ok();
    let report = run_validation_suite(filter.as_deref());
    print!("{}", report.render());

    println!();
    println!("acceptance summary");
    for c in &report.criteria {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {:<26} {status}", c.id, c.name);
    }
    let failed = report.criteria.iter().filter(|c| !c.passed()).count();
    println!("{} of {} criteria passed", report.criteria.len() - failed, report.criteria.len());
    if failed == 0 && !report.criteria.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
