//! Solves the equation from flat initial data and watches the growth rate
//! at x_2 move from `xi_2 - kappa` to the principal eigenvalue.
//!
//! cargo run --example evolve_growth -- 14 0

use hypercube_pam::evolution::{default_tracked, EvolutionState, Evolver, Method, DEFAULT_TOL};
use hypercube_pam::harness::c_n;
use hypercube_pam::potential::sample_coupled;
use hypercube_pam::spectral::principal_eig;
use hypercube_pam::TailModel;

fn main() -> hypercube_pam::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(14, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let kappa = 1.0;
    let field = sample_coupled(n, seed, TailModel::Gaussian)?;
    let lambda = principal_eig(kappa, &field, 1, 1, 1e-12)?.lambda;
    let x2 = field.vertex_of_rank(2);

    let times: Vec<f64> = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0].iter().map(|a| a * c_n(n)).collect();
    let ev = Evolver::new(kappa, &field, Method::Auto, DEFAULT_TOL)?;
    let recs = ev.records(EvolutionState::flat(n), &times, &default_tracked(&field, &[]))?;

    println!("xi_2 - kappa = {:.4}, lambda_1 = {lambda:.4}", field.top(2) - kappa);
    println!("  alpha        t   log v(x_2)/t   u(x_1)   u(x_2)   mean fitness");
    for r in &recs {
        println!(
            "{:>7.3}  {:>7.2}  {:>13.4}  {:>7.4}  {:>7.4}  {:>13.4}",
            r.t / c_n(n),
            r.t,
            r.log_v_at[&x2] / r.t,
            r.u_at[&field.vertex_of_rank(1)],
            r.u_at[&x2],
            r.mean_fitness
        );
    }
    Ok(())
}
