//! Draws a coupled REM potential and prints its extremal order statistics
//! next to the limiting gaps.
//!
//! cargo run --example sample_potential -- 16 7

use hypercube_pam::hypercube::hamming;
use hypercube_pam::potential::{gap_limit, level_set_geometry, sample_coupled, TailModel};

fn main() -> hypercube_pam::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(16, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let tail = TailModel::Gaussian;
    let field = sample_coupled(n, seed, tail)?;
    println!("n = {n}, seed = {seed}, theta = {:.6}", tail.theta());
    println!("rank  vertex        xi   xi_1 - xi_k   limit gap   d(x_1, x_k)");
    let x1 = field.vertex_of_rank(1);
    for k in 1..=6 {
        let x = field.vertex_of_rank(k);
        let limit = if k == 1 { 0.0 } else { gap_limit(1, k, &field, &tail)? };
        println!(
            "{k:>4}  {:>6}  {:>9.4}  {:>12.4}  {:>10.4}  {:>11}",
            x.0,
            field.top(k),
            field.top(1) - field.top(k),
            limit,
            hamming(x1, x)
        );
    }

    let g = level_set_geometry(&field, 0.75)?;
    println!("high level set at delta = 0.75: {} vertices, min distance {}", g.size, g.d_min);
    Ok(())
}
