//! Acceptance run: one PASS/FAIL line per criterion, seed 42.
//!
//! Exits nonzero when a criterion fails, except for the check listed in
//! `KNOWN_FAILURES`, which is reported as FAIL but does not stop the run.

use std::process::ExitCode;
use std::time::Instant;

use lpproj::oracles::OracleConfig;
use lpproj::suite::{self, Check};

const SEED: u64 = 42;

/// The stated special value is `x^M`, but the derivative along `x` on the
/// scaled branch is `λ x^M` with `λ < 1`, so this check cannot pass.
const KNOWN_FAILURES: [&str; 1] = ["masked ball scaled branch derivative along x is x^M"];

fn main() -> ExitCode {
    let cfg = OracleConfig::default();
    let criteria: Vec<(&str, Box<dyn Fn() -> Vec<Check>>)> = vec![
        ("duality map identities", Box::new(|| suite::duality_identities(SEED))),
        ("decomposition and power additivity", Box::new(|| suite::decomposition(SEED))),
        ("psi against difference quotients", Box::new(|| suite::psi_checks(SEED))),
        ("generalized projection matches brute oracle", Box::new(|| suite::gpi_oracle_agreement(SEED, &cfg))),
        ("metric projection matches brute oracle", Box::new(|| suite::mpi_oracle_agreement(SEED, &cfg))),
        ("variational inequality certificates", Box::new(|| suite::certificates(SEED, &cfg))),
        ("p = 2 collapse", Box::new(|| suite::hilbert_collapse(SEED))),
        ("discrepancy witness", Box::new(|| suite::discrepancy_witness(&cfg))),
        ("derivatives match finite differences", Box::new(|| suite::derivative_fd_agreement(SEED, &cfg))),
        ("special values", Box::new(|| suite::special_values(SEED))),
        ("structural property suites", Box::new(|| suite::structural_properties(SEED, &cfg))),
        ("cylinder auxiliary and routing", Box::new(|| suite::cylinder_auxiliary(SEED, &cfg))),
    ];

    let start = Instant::now();
    let mut unexpected = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let checks = run();
        let failing: Vec<&Check> = checks.iter().filter(|c| !c.ok()).collect();
        let instances: usize = checks.iter().map(|c| c.instances).sum();
        let verdict = if failing.is_empty() { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {title} ({} checks, {instances} instances)", i + 1, checks.len());
        for c in failing {
            let known = KNOWN_FAILURES.contains(&c.name.as_str());
            if !known {
                unexpected += 1;
            }
            println!(
                "        {}: {}/{} passed, worst {:e}, tolerance {:e}{}",
                c.name,
                c.passed,
                c.instances,
                c.worst,
                c.tolerance,
                if known { " (known)" } else { "" }
            );
            for f in c.failures.iter().take(3) {
                println!("          seed {}: {}", f.seed, f.detail);
            }
        }
    }
    println!("acceptance finished in {:.1?}", start.elapsed());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failing checks");
        ExitCode::FAILURE
    }
}
