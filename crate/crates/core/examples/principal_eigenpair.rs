//! Principal eigenpairs of the restricted operators and their gaps.
//!
//! cargo run --example principal_eigenpair -- 14 3

use hypercube_pam::harness::c_n;
use hypercube_pam::potential::sample_coupled;
use hypercube_pam::spectral::{eigenfunction_profile, principal_eig_with_gap, DEFAULT_TOL};
use hypercube_pam::TailModel;

fn main() -> hypercube_pam::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(14, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(3, |s| s.parse().expect("seed"));
    let kappa = 1.0;
    let field = sample_coupled(n, seed, TailModel::Gaussian)?;

    println!(" i  l      lambda   xi_i - kappa   n^2 shift      gap   bound xi_i - xi_(l+1)");
    for l in 1..=3 {
        for i in 1..=l {
            let r = principal_eig_with_gap(kappa, &field, i, l, DEFAULT_TOL)?;
            let shift = (n * n) as f64 * (r.lambda - field.top(i) + kappa);
            println!(
                "{i:>2} {l:>2}  {:>10.6}  {:>13.6}  {shift:>10.4}  {:>7.4}  {:>10.4}",
                r.lambda,
                field.top(i) - kappa,
                r.gap.unwrap(),
                field.top(i) - field.top(l + 1),
            );
        }
    }

    let r = principal_eig_with_gap(kappa, &field, 1, 1, DEFAULT_TOL)?;
    let p = eigenfunction_profile(&r, &field, 2)?;
    println!(
        "nu_(1,1): mass off peak {:.3e}, log nu(x_2) / -c_n = {:.3}{}",
        p.mass_off_peak,
        p.log_nu_at_xk / -c_n(n),
        if p.resolved { "" } else { " (below resolution floor)" }
    );
    Ok(())
}
