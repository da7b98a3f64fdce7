mod common;

use common::{free_heat_kernel, positive_log_kernel, Reference};
use hypercube_pam::evolution::{mutation_selection, EvolutionState, Evolver, Method, DEFAULT_TOL};
use hypercube_pam::fkmc::{estimate_eigenfunction, estimate_endpoint};
use hypercube_pam::hypercube::{hamiltonian_apply, laplacian_apply};
use hypercube_pam::potential::{sample_rem, PotentialField};
use hypercube_pam::spectral::{boundary_set, dense_oracle, principal_eig, principal_eig_with_gap};
use hypercube_pam::{StateVector, Vertex};

#[test]
fn free_laplacian_spectrum_is_binomial() {
    for n in 1..=8usize {
        let f = PotentialField::constant(n, 0.0).unwrap();
        let r = Reference::new(1.0, &f, &[]);
        let mut got = r.values.clone();
        got.sort_by(|a, b| b.total_cmp(a));
        let mut want = Vec::new();
        let mut binom = 1u64;
        for k in 0..=n {
            want.extend(std::iter::repeat(-2.0 * k as f64 / n as f64).take(binom as usize));
            binom = binom * (n - k) as u64 / (k + 1) as u64;
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "n = {n}: {g} vs {w}");
        }
    }
}

#[test]
fn operator_matches_the_dense_definition() {
    let n = 7;
    let f = sample_rem(n, 4).unwrap();
    let b = boundary_set(&f, 2, 3);
    let m = common::dense_matrix(0.8, f.values(), n, &b);
    let g: Vec<f64> = (0..128).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
    let h = hamiltonian_apply(&StateVector::from_vec(n, g.clone()).unwrap(), 0.8, &f, &b).unwrap();
    let want = &m * nalgebra::DVector::from_vec(g.clone());
    for x in 0..128 {
        assert!((h[x] - want[x]).abs() < 1e-12);
    }
    let zero = PotentialField::constant(n, 0.0).unwrap();
    let lap = laplacian_apply(&StateVector::from_vec(n, g.clone()).unwrap(), n).unwrap();
    let want = common::dense_matrix(1.0, zero.values(), n, &[]) * nalgebra::DVector::from_vec(g);
    for x in 0..128 {
        assert!((lap[x] - want[x]).abs() < 1e-12);
    }
}

#[test]
fn flat_potential_evolution_is_the_product_heat_kernel() {
    let n = 12;
    let kappa = 0.7;
    let f = PotentialField::constant(n, 0.0).unwrap();
    let y = Vertex(0b1010_0110_0001);
    let ev = Evolver::new(kappa, &f, Method::Krylov, DEFAULT_TOL).unwrap();
    let mut s = EvolutionState::delta(n, y);
    for t in [0.3, 2.0, 9.0, 40.0] {
        ev.propagate(&mut s, t).unwrap();
        // The integrator error is relative to the whole vector, so entries
        // far below the peak carry no relative accuracy.
        let floor = free_heat_kernel(kappa, n, t, y, y).ln() + 1e-6f64.ln();
        let mut checked = 0;
        for x in (0..4096u32).map(Vertex) {
            let exact = free_heat_kernel(kappa, n, t, x, y).ln();
            if exact < floor {
                continue;
            }
            checked += 1;
            assert!((s.log_v(x) - exact).abs() < 1e-9 * exact.abs().max(1.0), "t = {t}, x = {x}");
        }
        assert!(checked > n);
        assert!(s.log_total_mass().abs() < 1e-10 * t.max(1.0));
    }
}

#[test]
fn uniformization_is_accurate_in_every_entry() {
    // Compared down to 1e-30 of the column peak, where a spectral or Krylov
    // solution has no relative accuracy left.
    let n = 8;
    for seed in [3, 14] {
        let f = sample_rem(n, seed).unwrap();
        let ev = Evolver::new(1.0, &f, Method::Uniformization, DEFAULT_TOL).unwrap();
        for y in [f.vertex_of_rank(1), f.vertex_of_rank(200), Vertex(154)] {
            let mut s = EvolutionState::delta(n, y);
            for t in [0.5, 3.0] {
                ev.propagate(&mut s, t).unwrap();
                let k = positive_log_kernel(1.0, &f, t);
                let col = k.column(y.index());
                let top = col.max();
                for x in 0..256 {
                    if col[x] < top - 69.0 {
                        continue;
                    }
                    let got = s.log_v(Vertex(x as u32));
                    assert!((got - col[x]).abs() < 1e-11 * col[x].abs().max(1.0), "seed {seed}, y = {y:?}, x = {x}");
                }
            }
        }
    }
}

#[test]
fn constant_potential_only_shifts_by_ct() {
    let n = 9;
    let f = PotentialField::constant(n, 2.5).unwrap();
    let ev = Evolver::new(1.0, &f, Method::Krylov, DEFAULT_TOL).unwrap();
    let mut s = EvolutionState::delta(n, Vertex(3));
    ev.propagate(&mut s, 4.0).unwrap();
    let x = Vertex(300);
    let exact = free_heat_kernel(1.0, n, 4.0, x, Vertex(3)).ln() + 2.5 * 4.0;
    assert!((s.log_v(x) - exact).abs() < 1e-10 * exact.abs());
}

#[test]
fn principal_eigenpair_matches_the_dense_reference() {
    for seed in 0..5 {
        let f = sample_rem(8, seed).unwrap();
        for (i, l) in [(1, 1), (1, 2), (2, 2), (3, 3)] {
            let b = boundary_set(&f, i, l);
            let r = Reference::new(1.0, &f, &b);
            let got = principal_eig(1.0, &f, i, l, 1e-12).unwrap();
            assert!((got.lambda - r.top()).abs() < 1e-10, "seed {seed} ({i},{l})");
            // eigenvector agreement, after peak normalization
            let j = r.values.iter().position(|&v| v == r.top()).unwrap();
            let q = r.vectors.column(j);
            let p = q[got.peak.index()];
            for x in 0..256 {
                assert!((q[x] / p - got.nu[x]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn spectral_gap_matches_the_dense_reference() {
    for seed in 0..5 {
        let f = sample_rem(8, seed).unwrap();
        let r = principal_eig_with_gap(1.0, &f, 1, 2, 1e-12).unwrap();
        let d = dense_oracle(1.0, &f, &boundary_set(&f, 1, 2)).unwrap();
        assert!((r.gap.unwrap() - (d.values[0] - d.values[1])).abs() < 1e-9);
    }
}

#[test]
fn mutation_selection_solves_its_own_equation() {
    // d/dt u = κΔu + (ξ − ξ̄)u, checked by a central difference in time.
    let n = 8;
    let f = sample_rem(n, 2).unwrap();
    let ev = Evolver::new(1.0, &f, Method::Krylov, DEFAULT_TOL).unwrap();
    let h = 1e-4;
    let t = 1.5;
    let at = |t: f64| {
        let mut s = EvolutionState::flat(n);
        ev.propagate(&mut s, t).unwrap();
        mutation_selection(&s, &f).unwrap()
    };
    let (um, _) = at(t - h);
    let (up, _) = at(t + h);
    let (u, mean) = at(t);
    let lap = laplacian_apply(&u, n).unwrap();
    for x in 0..256 {
        let lhs = (up[x] - um[x]) / (2.0 * h);
        let rhs = lap[x] + (f.values()[x] - mean) * u[x];
        assert!((lhs - rhs).abs() < 1e-6, "x = {x}: {lhs} vs {rhs}");
    }
    assert!((u.sum() - 1.0).abs() < 1e-12);
}

#[test]
fn endpoint_monte_carlo_agrees_with_the_dense_kernel() {
    let n = 6;
    let f = sample_rem(n, 5).unwrap();
    let r = Reference::new(1.0, &f, &[]);
    let t = 0.8;
    let k = r.log_kernel(t);
    let y = f.vertex_of_rank(1);
    for x in [y, f.vertex_of_rank(2), Vertex(y.0 ^ 1)] {
        let est = estimate_endpoint(x, y, t, 1.0, &f, 200_000, 11).unwrap();
        let exact = k[(x.index(), y.index())].exp();
        assert!(est.within(exact, 4.0), "{} vs {exact} +- {}", est.mean, est.std_error);
    }
}

#[test]
fn eigenfunction_monte_carlo_agrees_with_lanczos() {
    let n = 4;
    let kappa = 2.0;
    let f = sample_rem(n, 1).unwrap();
    let r = principal_eig(kappa, &f, 1, 1, 1e-12).unwrap();
    let x = Vertex(r.peak.0 ^ 1);
    let est = estimate_eigenfunction(x, r.peak, r.lambda, &[], kappa, &f, 200_000, 50.0 / kappa, 3).unwrap();
    let width = 4.0 * est.std_error + est.censored_fraction.unwrap_or(0.0) * r.nu[x.index()];
    assert!((est.mean - r.nu[x.index()]).abs() <= width, "{} vs {}", est.mean, r.nu[x.index()]);
}
