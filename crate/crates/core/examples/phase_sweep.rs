//! Growth phase transition around alpha* = 1/xi_(1,k) on a small grid.
//!
//! cargo run --example phase_sweep

use hypercube_pam::harness::{run_phase_sweep, ExperimentConfig, Regime};

fn main() -> hypercube_pam::Result<()> {
    let cfg = ExperimentConfig {
        n: 12,
        seeds: (0..8).collect(),
        alpha_grid: vec![0.2, 0.5, 2.0, 5.0],
        ..Default::default()
    };
    let rows = run_phase_sweep(&cfg)?;
    println!("alpha/alpha*   closer to the predicted branch");
    for &a in &cfg.alpha_grid {
        let cell: Vec<_> = rows
            .iter()
            .filter(|r| r.error.is_none() && (r.alpha.unwrap() / r.alpha_star.unwrap() - a).abs() < 1e-9)
            .collect();
        let want = if a < 1.0 { Regime::Short } else { Regime::Long };
        let hits = cell.iter().filter(|r| r.closer_branch() == Some(want)).count();
        println!("{a:>11}   {hits}/{}", cell.len());
    }
    hypercube_pam::harness::write_csv(std::io::stdout().lock(), &rows[..4], false)
}
