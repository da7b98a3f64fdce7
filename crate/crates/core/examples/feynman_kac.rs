//! Feynman–Kac estimates of the total mass, checked against the PDE.
//!
//! cargo run --example feynman_kac -- 8 1.0

use hypercube_pam::evolution::{EvolutionState, Evolver, Method, DEFAULT_TOL};
use hypercube_pam::fkmc::{estimate_endpoint, estimate_total_mass};
use hypercube_pam::potential::sample_rem;

fn main() -> hypercube_pam::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(8, |s| s.parse().expect("n"));
    let t: f64 = args.next().map_or(1.0, |s| s.parse().expect("t"));
    let kappa = 1.0;

    println!("seed  PDE total mass   MC mean        std err   |z|");
    for seed in 0..5 {
        let field = sample_rem(n, seed)?;
        let y = field.vertex_of_rank(1);
        let ev = Evolver::new(kappa, &field, Method::Auto, DEFAULT_TOL)?;
        // v(t, x, y) is symmetric, so the total mass from y is the flat solution at y.
        let mut s = EvolutionState::flat(n);
        ev.propagate(&mut s, t)?;
        let pde = s.log_v(y).exp();
        let mc = estimate_total_mass(y, t, kappa, &field, 100_000, seed)?;
        println!(
            "{seed:>4}  {pde:>14.6e}  {:>12.6e}  {:>9.2e}  {:.2}",
            mc.mean,
            mc.std_error,
            (mc.mean - pde).abs() / mc.std_error
        );
    }

    let field = sample_rem(n, 0)?;
    let y = field.vertex_of_rank(1);
    let e = estimate_endpoint(y, y, t, kappa, &field, 100_000, 0)?;
    println!("v(t, x_1, x_1) ~ {:.6e} +- {:.1e} from {} returns", e.mean, e.std_error, e.hits);
    Ok(())
}
