//! Dense reference built straight from the definition, independent of the
//! library's own dense path.
#![allow(dead_code)]

use hypercube_pam::{PotentialField, Vertex};
use nalgebra::{DMatrix, SymmetricEigen};

/// `κΔ + ξ` on the full cube as a dense matrix, boundary rows and columns
/// zeroed.
pub fn dense_matrix(kappa: f64, xi: &[f64], n: usize, boundary: &[Vertex]) -> DMatrix<f64> {
    let size = 1usize << n;
    let dead = |x: usize| boundary.iter().any(|b| b.index() == x);
    DMatrix::from_fn(size, size, |r, c| {
        if dead(r) || dead(c) {
            0.0
        } else if r == c {
            xi[r] - kappa
        } else if (r ^ c).count_ones() == 1 {
            kappa / n as f64
        } else {
            0.0
        }
    })
}

pub struct Reference {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Reference {
    pub fn new(kappa: f64, field: &PotentialField, boundary: &[Vertex]) -> Self {
        let m = dense_matrix(kappa, field.values(), field.n(), boundary);
        let e = SymmetricEigen::new(m);
        Self {
            values: e.eigenvalues.iter().copied().collect(),
            vectors: e.eigenvectors,
        }
    }

    pub fn top(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `log v(t, x, y)` for every pair, as a matrix indexed `(x, y)`.
    pub fn log_kernel(&self, t: f64) -> DMatrix<f64> {
        let top = self.top();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|l| ((l - top) * t).exp()),
        ));
        let k = &self.vectors * d * self.vectors.transpose();
        k.map(|v| v.ln() + top * t)
    }
}

/// `v(t, x, y)` for `ξ ≡ 0`: the walk's coordinates flip independently at
/// rate `κ/n`, so the kernel factorizes over coordinates.
pub fn free_heat_kernel(kappa: f64, n: usize, t: f64, x: Vertex, y: Vertex) -> f64 {
    let d = (x.0 ^ y.0).count_ones() as i32;
    let e = (-2.0 * kappa * t / n as f64).exp();
    (0.5 * (1.0 + e)).powi(n as i32 - d) * (0.5 * (1.0 - e)).powi(d)
}

/// `log v(t, x, y)` with relative accuracy in every entry, however small.
///
/// `H − ρ = α(P − I)` with `ρ = max ξ`, `α = ρ − min ξ + κ` makes `P`
/// entrywise nonnegative, so `e^{α t P}` can be built from a Taylor series at
/// a small scale and repeated squaring without a single subtraction. The
/// spectral reference above loses `ε / |q(y)|` wherever an eigenvector is
/// tiny; this one does not.
pub fn positive_log_kernel(kappa: f64, field: &PotentialField, t: f64) -> DMatrix<f64> {
    let xi = field.values();
    let size = xi.len();
    let rho = xi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let low = xi.iter().cloned().fold(f64::INFINITY, f64::min);
    let alpha = rho - low + kappa;
    let mut p = dense_matrix(kappa, xi, field.n(), &[]) / alpha;
    for i in 0..size {
        p[(i, i)] += 1.0 - rho / alpha;
    }
    let mut squarings = 0;
    let mut s = alpha * t;
    while s > 0.5 {
        s /= 2.0;
        squarings += 1;
    }
    let sp = p * s;
    let mut term = DMatrix::<f64>::identity(size, size);
    let mut m = term.clone();
    for k in 1..=30 {
        term = &term * &sp / k as f64;
        m += &term;
    }
    // true value is m · e^scale
    let mut scale = 0.0;
    for _ in 0..squarings {
        m = &m * &m;
        scale *= 2.0;
        let top = m.max();
        m /= top;
        scale += top.ln();
    }
    m.map(|v| v.ln() + scale - alpha * t + rho * t)
}
