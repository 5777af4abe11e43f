//! Acceptance run against the bundled reference configuration. Prints one
//! line per criterion and fails if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use twinbeam_core::config::Config;
use twinbeam_core::validation::{run_all, ACCEPTANCE_SEED};

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let start = Instant::now();
    let criteria = match run_all(&Config::reference(), ACCEPTANCE_SEED) {
        Ok(c) => c,
        Err(e) => {
            println!("[FAIL] reference setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &criteria {
        println!("{c}");
    }
    let failed = criteria.iter().filter(|c| !c.passed).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
