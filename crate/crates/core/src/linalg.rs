//! Krylov-subspace kernels shared by the eigensolver and the propagator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{PamError, Result};
use crate::hypercube::{dot, norm2};
use crate::rng;

pub(crate) type Operator<'a> = dyn Fn(&[f64], &mut [f64]) + 'a;

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn scale(a: f64, x: &mut [f64]) {
    for v in x {
        *v *= a;
    }
}

/// Orthogonalize `w` against every vector in `basis` (two passes) and
/// return the accumulated projection coefficients.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, b) in coef.iter_mut().zip(basis) {
            let p = dot(b, w);
            *c += p;
            axpy(-p, b, w);
        }
    }
    coef
}

/// Eigen-decomposition with eigenvalues sorted in decreasing order.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let k = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

#[derive(Clone, Debug)]
pub(crate) struct LanczosOptions {
    pub max_matvecs: usize,
    pub basis: usize,
    pub keep: usize,
    /// Absolute residual target `‖Ay − θy‖₂` for a unit Ritz vector.
    pub tol: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub(crate) struct Eigenpair {
    pub value: f64,
    /// Unit 2-norm.
    pub vector: Vec<f64>,
    /// Explicitly recomputed `‖Ay − θy‖₂`.
    pub residual: f64,
    pub matvecs: usize,
}

/// Largest eigenpair of a symmetric operator by thick-restart Lanczos with
/// full reorthogonalization.
///
/// The iteration runs in the orthogonal complement of `deflate` (orthonormal
/// vectors), so passing a known eigenvector yields the next one. `mask`
/// restricts random restart vectors to the operator's invariant subspace.
pub(crate) fn largest_eigenpair(
    op: &Operator,
    mask: &dyn Fn(&mut [f64]),
    start: Vec<f64>,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<Eigenpair> {
    let dim = start.len();
    let mut rng = rng::stream(opts.seed, rng::LANCZOS_STREAM);
    let mut fresh = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            mask(&mut v);
            orthogonalize(&mut v, deflate);
            orthogonalize(&mut v, basis);
            let nv = norm2(&v);
            if nv > 1e-8 {
                scale(1.0 / nv, &mut v);
                return Some(v);
            }
        }
        None
    };

    let mut v0 = start;
    orthogonalize(&mut v0, deflate);
    let nv = norm2(&v0);
    let v0 = if nv > 1e-12 {
        scale(1.0 / nv, &mut v0);
        v0
    } else {
        fresh(&[]).ok_or_else(|| PamError::InvalidArgument("operator has no free subspace".into()))?
    };

    let cap = opts.basis.max(2);
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut t = DMatrix::<f64>::zeros(cap, cap);
    let mut w = vec![0.0; dim];
    let mut matvecs = 0;
    let mut best = f64::INFINITY;

    loop {
        // Expand from the newest basis vector until full or invariant.
        let (beta, exhausted) = loop {
            let j = basis.len() - 1;
            op(&basis[j], &mut w);
            matvecs += 1;
            orthogonalize(&mut w, deflate);
            let coef = orthogonalize(&mut w, &basis);
            for (i, &c) in coef.iter().enumerate() {
                t[(i, j)] = c;
                t[(j, i)] = c;
            }
            let beta = norm2(&w);
            let scale_ref = t[(j, j)].abs().max(1.0);
            if beta <= 1e-13 * scale_ref {
                break (0.0, true);
            }
            if basis.len() == cap || matvecs >= opts.max_matvecs {
                break (beta, false);
            }
            let mut next = w.clone();
            scale(1.0 / beta, &mut next);
            basis.push(next);
        };

        let k = basis.len();
        let (theta, s) = sorted_eigen(t.view((0, 0), (k, k)).into_owned());
        let estimate = beta * s[(k - 1, 0)].abs();
        best = best.min(estimate);

        if estimate <= 0.5 * opts.tol || exhausted {
            let mut y = vec![0.0; dim];
            for (i, b) in basis.iter().enumerate() {
                axpy(s[(i, 0)], b, &mut y);
            }
            let ny = norm2(&y);
            scale(1.0 / ny, &mut y);
            let mut ay = vec![0.0; dim];
            op(&y, &mut ay);
            matvecs += 1;
            orthogonalize(&mut ay, deflate);
            axpy(-theta[0], &y, &mut ay);
            let residual = norm2(&ay);
            best = best.min(residual);
            if residual <= opts.tol {
                return Ok(Eigenpair {
                    value: theta[0],
                    vector: y,
                    residual,
                    matvecs,
                });
            }
        }
        if matvecs >= opts.max_matvecs {
            return Err(PamError::NonConvergence {
                iterations: matvecs,
                best_residual: best,
            });
        }

        // Thick restart: keep the leading Ritz vectors plus the residual direction.
        let p = opts.keep.clamp(1, k.saturating_sub(1).max(1));
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(cap);
        for c in 0..p {
            let mut y = vec![0.0; dim];
            for (i, b) in basis.iter().enumerate() {
                axpy(s[(i, c)], b, &mut y);
            }
            kept.push(y);
        }
        // re-normalize against drift
        for i in 0..kept.len() {
            let (done, rest) = kept.split_at_mut(i);
            orthogonalize(&mut rest[0], done);
            let nr = norm2(&rest[0]);
            scale(1.0 / nr, &mut rest[0]);
        }
        t.fill(0.0);
        for (c, &th) in theta.iter().take(p).enumerate() {
            t[(c, c)] = th;
        }
        let next = if exhausted {
            fresh(&kept)
        } else {
            let mut f = w.clone();
            orthogonalize(&mut f, &kept);
            let nf = norm2(&f);
            if nf > 1e-13 * beta.max(1e-300) {
                scale(1.0 / nf, &mut f);
                Some(f)
            } else {
                fresh(&kept)
            }
        };
        basis = kept;
        match next {
            Some(v) => basis.push(v),
            None => {
                return Err(PamError::NonConvergence {
                    iterations: matvecs,
                    best_residual: best,
                })
            }
        }
    }
}

/// Krylov basis for `exp(τA)v` at a fixed starting vector; the subspace
/// does not depend on `τ`, so several step sizes can be tried cheaply.
pub(crate) struct KrylovExp {
    norm: f64,
    basis: Vec<Vec<f64>>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    /// Decomposition of the leading block of dimension `k − KRYLOV_CHECK`,
    /// for the difference error estimate.
    coarse: Option<(Vec<f64>, DMatrix<f64>)>,
    beta: f64,
}

/// How many dimensions smaller the comparison subspace is.
const KRYLOV_CHECK: usize = 4;

/// `Q exp(τ(Λ − θ)) Qᵀ e₁`.
fn exp_first_column(values: &[f64], q: &DMatrix<f64>, tau: f64, top: f64) -> Vec<f64> {
    let mut c = vec![0.0; values.len()];
    for (j, &lam) in values.iter().enumerate() {
        let a = q[(0, j)] * (tau * (lam - top)).exp();
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += q[(i, j)] * a;
        }
    }
    c
}

impl KrylovExp {
    pub fn new(op: &Operator, v: &[f64], m: usize) -> Self {
        let dim = v.len();
        let norm = norm2(v);
        let mut basis = Vec::with_capacity(m);
        let mut first = v.to_vec();
        if norm > 0.0 {
            scale(1.0 / norm, &mut first);
        }
        basis.push(first);
        let mut t = DMatrix::<f64>::zeros(m, m);
        let mut w = vec![0.0; dim];
        let mut beta = 0.0;
        if norm > 0.0 {
            loop {
                let j = basis.len() - 1;
                op(&basis[j], &mut w);
                let coef = orthogonalize(&mut w, &basis);
                for (i, &c) in coef.iter().enumerate() {
                    t[(i, j)] = c;
                    t[(j, i)] = c;
                }
                beta = norm2(&w);
                if beta <= 1e-14 * t[(j, j)].abs().max(1.0) {
                    beta = 0.0;
                    break;
                }
                if basis.len() == m {
                    break;
                }
                let mut next = w.clone();
                scale(1.0 / beta, &mut next);
                basis.push(next);
            }
        }
        let k = basis.len();
        let (values, vectors) = sorted_eigen(t.view((0, 0), (k, k)).into_owned());
        // after a breakdown the projection is exact and needs no check
        let coarse = (beta > 0.0 && k > KRYLOV_CHECK + 1)
            .then(|| sorted_eigen(t.view((0, 0), (k - KRYLOV_CHECK, k - KRYLOV_CHECK)).into_owned()));
        Self {
            norm,
            basis,
            values,
            vectors,
            coarse,
            beta,
        }
    }

    /// Coefficients of `exp(τA)v` in the basis scaled by `exp(−τθ)`, where
    /// `θ` is the top Ritz value, together with `τθ` and an error estimate
    /// relative to the scaled result. The estimate is the larger of the
    /// residual-based one and the change from the smaller subspace; the
    /// former alone is optimistic before the approximation converges.
    pub fn coefficients(&self, tau: f64) -> (Vec<f64>, f64, f64) {
        let k = self.basis.len();
        let top = self.values[0];
        let c = exp_first_column(&self.values, &self.vectors, tau, top);
        let size = norm2(&c);
        if !(size > 0.0) {
            return (c, tau * top, f64::INFINITY);
        }
        let mut err = self.beta * c[k - 1].abs();
        if let Some((values, q)) = &self.coarse {
            let d = exp_first_column(values, q, tau, top);
            let diff = c
                .iter()
                .enumerate()
                .map(|(i, ci)| (ci - d.get(i).copied().unwrap_or(0.0)).powi(2))
                .sum::<f64>()
                .sqrt();
            err = err.max(diff);
        }
        (c, tau * top, err / size)
    }

    pub fn combine(&self, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ci, b) in c.iter().zip(&self.basis) {
            axpy(self.norm * ci, b, out);
        }
    }
}
