//! Where does the mass started at x_2 sit at time alpha c_n?
//!
//! cargo run --example localization_sweep

use hypercube_pam::harness::{run_localization_sweep, ExperimentConfig};

fn main() -> hypercube_pam::Result<()> {
    let cfg = ExperimentConfig {
        n: 12,
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let rows = run_localization_sweep(&cfg)?;
    println!("seed  alpha/alpha*   u(x_1)    u(x_2)");
    for r in rows.iter().filter(|r| r.error.is_none()) {
        println!(
            "{:>4}  {:>12.3}  {:>8.4}  {:>8.4}",
            r.seed,
            r.alpha.unwrap() / r.alpha_star.unwrap(),
            r.u_at_x1.unwrap(),
            r.u_at_xk.unwrap()
        );
    }
    for seed in &cfg.seeds {
        if let Some(r) = rows.iter().find(|r| r.seed == *seed) {
            let hat = r.alpha_hat.map_or(f64::NAN, |h| h / r.alpha_star.unwrap());
            println!("seed {seed}: crossover alpha_hat/alpha* = {hat:.3}");
        }
    }
    Ok(())
}
