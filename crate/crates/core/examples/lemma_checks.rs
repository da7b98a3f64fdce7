//! Runs the lemma checks at small scale and prints the report summary.
//!
//! cargo run --example lemma_checks

use hypercube_pam::harness::{run_lemma_checks, CheckStatus, ExperimentConfig};

fn main() -> hypercube_pam::Result<()> {
    let cfg = ExperimentConfig {
        n: 10,
        seeds: (0..5).collect(),
        lemma_ns: vec![10, 12],
        ..Default::default()
    };
    let report = run_lemma_checks(&cfg)?;
    for c in &report.checks {
        if c.seed.is_none() || c.status != CheckStatus::Pass {
            let v = c.value.map_or("-".into(), |v| format!("{v:.4}"));
            println!("{:<24} n = {:<3} {:<20} {v:>8}  {}", c.name, c.n, format!("{:?}", c.status), c.detail);
        }
    }
    println!("passed: {}", report.passed);
    Ok(())
}
