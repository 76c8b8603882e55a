//! Release gate: one line per criterion, non-zero exit if any fails.

use hubbard_core::verify::{run, Level, CRITERIA};

fn main() {
    let mut failed = 0;
    for (id, _, _) in CRITERIA {
        let check = run(id, Level::Full);
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} [{:.1}s] {}: {}", check.id, check.seconds, check.name, check.detail);
        if !check.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
