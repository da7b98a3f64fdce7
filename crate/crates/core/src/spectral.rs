//! Principal eigenpairs of `κΔ + ξ` with zero boundary conditions on
//! subsets of the top order statistics.
//!
//! The restricted operator for ranks `(i, l)` has Dirichlet conditions on
//! `Γ_l \ {x_i}`. Its principal eigenfunction `ν_{i,l}` is positive on the
//! interior and is normalized to one at `x_i`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::hypercube::{hamming, norm2, Hamiltonian, StateVector, Vertex};
use crate::linalg::{largest_eigenpair, sorted_eigen, LanczosOptions};
use crate::potential::PotentialField;

/// Default relative tolerance (residual over `‖H‖`).
pub const DEFAULT_TOL: f64 = 1e-12;

/// Largest dimension accepted by [`dense_oracle`].
pub const DENSE_MAX_DIM: usize = 10;

/// Entries of `ν` smaller than this multiple of the residual are not trusted.
pub const RESOLUTION_FACTOR: f64 = 100.0;

const JACOBI_SWEEPS: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub lambda: f64,
    /// Peak-normalized eigenfunction, zero on the boundary.
    pub nu: StateVector,
    /// `‖Hν − λν‖₂ / ‖ν‖₂`.
    pub residual: f64,
    /// `λ` minus the second eigenvalue, when computed.
    pub gap: Option<f64>,
    pub boundary: Vec<Vertex>,
    pub peak: Vertex,
    pub matvecs: usize,
}

impl SpectralResult {
    /// Smallest value of `ν` that is considered resolved.
    pub fn resolution_floor(&self) -> f64 {
        RESOLUTION_FACTOR * self.residual
    }

    pub fn to_json(&self, with_vector: bool) -> Result<String> {
        let doc = SpectralJson {
            n: self.nu.dim(),
            lambda: self.lambda,
            residual: self.residual,
            gap: self.gap,
            peak: self.peak,
            boundary: self.boundary.clone(),
            matvecs: self.matvecs,
            nu: with_vector.then(|| {
                let bytes: Vec<u8> = self.nu.iter().flat_map(|v| v.to_le_bytes()).collect();
                B64.encode(bytes)
            }),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses a document written with the vector included.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: SpectralJson = serde_json::from_str(s)?;
        let raw = doc
            .nu
            .ok_or_else(|| PamError::InvalidArgument("document has no eigenvector".into()))?;
        let bytes = B64
            .decode(raw)
            .map_err(|e| PamError::InvalidArgument(format!("bad base64 vector: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(PamError::InvalidArgument("vector byte length not a multiple of 8".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            lambda: doc.lambda,
            nu: StateVector::from_vec(doc.n, values)?,
            residual: doc.residual,
            gap: doc.gap,
            boundary: doc.boundary,
            peak: doc.peak,
            matvecs: doc.matvecs,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SpectralJson {
    n: usize,
    lambda: f64,
    residual: f64,
    gap: Option<f64>,
    peak: Vertex,
    boundary: Vec<Vertex>,
    matvecs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<String>,
}

fn check_ranks(field: &PotentialField, i: usize, l: usize) -> Result<()> {
    let size = field.values().len();
    if i == 0 || i > l || l > size {
        return Err(PamError::InvalidArgument(format!(
            "need 1 <= i <= l <= {size}, got i = {i}, l = {l}"
        )));
    }
    Ok(())
}

/// `Γ_l \ {x_i}`.
pub fn boundary_set(field: &PotentialField, i: usize, l: usize) -> Vec<Vertex> {
    let peak = field.vertex_of_rank(i);
    field.gamma(l).into_iter().filter(|&x| x != peak).collect()
}

fn lanczos_options(h: &Hamiltonian, tol: f64, seed: u64) -> LanczosOptions {
    let interior = h.len() - h.boundary().len();
    LanczosOptions {
        max_matvecs: 50 * h.dim(),
        basis: interior.clamp(1, 60),
        keep: 15,
        tol: tol * h.norm_bound(),
        seed,
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(PamError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn residual_of(h: &Hamiltonian, lambda: f64, nu: &[f64]) -> f64 {
    let mut r = vec![0.0; nu.len()];
    h.apply_into(nu, &mut r);
    for (ri, vi) in r.iter_mut().zip(nu) {
        *ri -= lambda * vi;
    }
    norm2(&r) / norm2(nu)
}

/// Fixed-point sweeps of `(λ + κ − ξ(x)) ν(x) = (κ/n) Σ_{z∼x} ν(z)` off the
/// peak. All terms are positive, so small entries come out with full
/// relative precision. Returns `None` when the iteration does not apply.
fn jacobi_refine(h: &Hamiltonian, lambda: f64, peak: usize, start: &[f64]) -> Option<Vec<f64>> {
    let n = h.dim();
    let xi = h.potential();
    let kappa = h.kappa();
    let kn = kappa / n as f64;
    let size = h.len();
    let mut denom = vec![0.0; size];
    for x in 0..size {
        if x == peak || h.is_boundary(x) {
            continue;
        }
        let d = lambda + kappa - xi[x];
        if !(d > 0.0) {
            return None;
        }
        denom[x] = d;
    }
    let mut cur: Vec<f64> = start.iter().map(|v| v.max(0.0)).collect();
    cur[peak] = 1.0;
    let mut next = cur.clone();
    for _ in 0..JACOBI_SWEEPS {
        let mut change: f64 = 0.0;
        for x in 0..size {
            if x == peak || h.is_boundary(x) {
                continue;
            }
            let mut s = 0.0;
            for b in 0..n {
                let z = x ^ (1 << b);
                if !h.is_boundary(z) {
                    s += cur[z];
                }
            }
            let v = kn * s / denom[x];
            if v > 0.0 {
                change = change.max((v - cur[x]).abs() / v);
            }
            next[x] = v;
        }
        std::mem::swap(&mut cur, &mut next);
        if change <= 1e-15 {
            return Some(cur);
        }
    }
    None
}

fn principal_restricted(
    h: &Hamiltonian,
    peak: Vertex,
    tol: f64,
    seed: u64,
) -> Result<(SpectralResult, Vec<f64>)> {
    check_tol(tol)?;
    if h.is_boundary(peak.index()) {
        return Err(PamError::InvalidArgument(format!("peak {peak} lies on the boundary")));
    }
    let opts = lanczos_options(h, tol, seed);
    let op = |x: &[f64], y: &mut [f64]| h.apply_into(x, y);
    let mask = |x: &mut [f64]| h.mask(x);
    let start = StateVector::delta(h.dim(), peak).into_vec();
    let ep = largest_eigenpair(&op, &mask, start, &[], &opts)?;
    let unit = ep.vector.clone();
    let p = ep.vector[peak.index()];
    if p == 0.0 {
        return Err(PamError::PerronViolation {
            vertex: peak.0,
            value: 0.0,
            residual: ep.residual,
        });
    }
    let mut nu: Vec<f64> = ep.vector.iter().map(|v| v / p).collect();
    let mut residual = residual_of(h, ep.value, &nu);
    if let Some(refined) = jacobi_refine(h, ep.value, peak.index(), &nu) {
        let r = residual_of(h, ep.value, &refined);
        if r <= residual.max(opts.tol) {
            nu = refined;
            residual = r;
        }
    }
    for (x, v) in nu.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -residual {
                return Err(PamError::PerronViolation {
                    vertex: x as u32,
                    value: *v,
                    residual,
                });
            }
            *v = 0.0;
        }
    }
    let result = SpectralResult {
        lambda: ep.value,
        nu: StateVector::from_vec(h.dim(), nu)?,
        residual,
        gap: None,
        boundary: h.boundary().to_vec(),
        peak,
        matvecs: ep.matvecs,
    };
    Ok((result, unit))
}

/// Principal eigenpair with zero boundary conditions on an arbitrary set.
pub fn restricted_eig(
    kappa: f64,
    field: &PotentialField,
    peak: Vertex,
    boundary: &[Vertex],
    tol: f64,
) -> Result<SpectralResult> {
    let h = Hamiltonian::from_field(field, kappa, boundary)?;
    Ok(principal_restricted(&h, peak, tol, field.seed())?.0)
}

/// `λ_{i,l}` and `ν_{i,l}`.
pub fn principal_eig(
    kappa: f64,
    field: &PotentialField,
    i: usize,
    l: usize,
    tol: f64,
) -> Result<SpectralResult> {
    check_ranks(field, i, l)?;
    let boundary = boundary_set(field, i, l);
    restricted_eig(kappa, field, field.vertex_of_rank(i), &boundary, tol)
}

/// `λ_{i,l}` together with the spectral gap `g_{i,l}`.
pub fn principal_eig_with_gap(
    kappa: f64,
    field: &PotentialField,
    i: usize,
    l: usize,
    tol: f64,
) -> Result<SpectralResult> {
    check_ranks(field, i, l)?;
    let boundary = boundary_set(field, i, l);
    let h = Hamiltonian::from_field(field, kappa, &boundary)?;
    let (mut result, unit) = principal_restricted(&h, field.vertex_of_rank(i), tol, field.seed())?;
    if h.len() - boundary.len() < 2 {
        return Err(PamError::InvalidArgument(
            "restricted operator has a single interior vertex".into(),
        ));
    }
    let opts = lanczos_options(&h, tol, field.seed().wrapping_add(1));
    let op = |x: &[f64], y: &mut [f64]| h.apply_into(x, y);
    let mask = |x: &mut [f64]| h.mask(x);
    let size = h.len();
    let mut start = vec![0.0; size];
    let mut k = l + 1;
    let mut placed = 0;
    while placed < 3 && k <= size {
        let x = field.vertex_of_rank(k).index();
        if !h.is_boundary(x) && x != result.peak.index() {
            start[x] = 1.0;
            placed += 1;
        }
        k += 1;
    }
    for (x, s) in start.iter_mut().enumerate() {
        // small deterministic spread so that no eigen-direction is missed
        *s += 1e-3 * (((x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40) as f64 / 16777216.0 - 0.5);
    }
    mask(&mut start);
    let second = largest_eigenpair(&op, &mask, start, &[unit], &opts)?;
    result.gap = Some(result.lambda - second.value);
    result.matvecs += second.matvecs;
    Ok(result)
}

/// `g_{i,l}`: `λ_{i,l}` minus the second eigenvalue of the same operator.
pub fn spectral_gap(kappa: f64, field: &PotentialField, i: usize, l: usize, tol: f64) -> Result<f64> {
    Ok(principal_eig_with_gap(kappa, field, i, l, tol)?
        .gap
        .expect("gap is always filled"))
}

/// Outcome of the resolvent eigenvalue-bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BoundStatus {
    /// `N − κ ≤ λ₁ < γ` holds.
    Holds,
    /// The admissibility inequality fails for this `γ`; nothing is asserted.
    NotAdmissible,
    /// Preconditions of the bound are not satisfied.
    HypothesesNotMet { reason: String },
    /// Admissible `γ` but the bound is violated.
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenBoundReport {
    /// `max_{x∈A} ξ(x)`.
    pub big_n: f64,
    /// `max_{x∉A} ξ(x)`.
    pub big_m: f64,
    pub gamma: f64,
    pub d_min: Option<usize>,
    /// `κ/(γ − (N − κ))`.
    pub lhs: f64,
    /// `n(γ − M)/κ`.
    pub rhs: f64,
    pub lambda: Option<f64>,
    pub status: BoundStatus,
}

/// Candidate `γ = N − κ + 2κ²/(n (N − κ − M))`.
pub fn default_gamma(kappa: f64, n: usize, big_n: f64, big_m: f64) -> f64 {
    big_n - kappa + 2.0 * kappa * kappa / (n as f64 * (big_n - kappa - big_m))
}

/// Checks `N − κ ≤ λ₁ < γ` for the unrestricted operator, where `N` and `M`
/// are the largest potentials on and off `A`. With `gamma = None` the
/// candidate from [`default_gamma`] is used.
pub fn eigen_bound_check(
    kappa: f64,
    field: &PotentialField,
    a: &[Vertex],
    gamma: Option<f64>,
    tol: f64,
) -> Result<EigenBoundReport> {
    let n = field.n();
    let size = field.values().len();
    let mut in_a = vec![false; size];
    for &x in a {
        if x.index() >= size {
            return Err(PamError::InvalidArgument(format!("vertex {x} out of range")));
        }
        in_a[x.index()] = true;
    }
    let fold = |on: bool| {
        (0..size)
            .filter(|&x| in_a[x] == on)
            .map(|x| field.values()[x])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (big_n, big_m) = (fold(true), fold(false));
    let mut d_min = None;
    for (p, &x) in a.iter().enumerate() {
        for &y in &a[p + 1..] {
            let d = hamming(x, y) as usize;
            d_min = Some(d_min.map_or(d, |m: usize| m.min(d)));
        }
    }
    let mut report = EigenBoundReport {
        big_n,
        big_m,
        gamma: f64::NAN,
        d_min,
        lhs: f64::NAN,
        rhs: f64::NAN,
        lambda: None,
        status: BoundStatus::Holds,
    };
    let broken = if a.is_empty() || a.len() == size {
        Some("A must be a proper non-empty subset".to_string())
    } else if d_min.is_some_and(|d| d <= 2) {
        Some(format!("d_min(A) = {} is not above 2", d_min.unwrap()))
    } else if big_m > big_n - kappa {
        Some(format!("M = {big_m} exceeds N - kappa = {}", big_n - kappa))
    } else if field.has_ties() {
        Some("potential is degenerate".to_string())
    } else {
        None
    };
    if let Some(reason) = broken {
        report.status = BoundStatus::HypothesesNotMet { reason };
        return Ok(report);
    }
    let gamma = gamma.unwrap_or_else(|| default_gamma(kappa, n, big_n, big_m));
    report.gamma = gamma;
    report.lhs = kappa / (gamma - (big_n - kappa));
    report.rhs = n as f64 * (gamma - big_m) / kappa;
    let peak = field.vertex_of_rank(1);
    let lambda = restricted_eig(kappa, field, peak, &[], tol)?.lambda;
    report.lambda = Some(lambda);
    let admissible = gamma > big_n - kappa && report.lhs < report.rhs;
    let holds = big_n - kappa <= lambda && lambda < gamma;
    report.status = match (admissible, holds) {
        (_, true) => BoundStatus::Holds,
        (false, false) => BoundStatus::NotAdmissible,
        (true, false) => BoundStatus::Violated,
    };
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenProfile {
    /// `Σ_{x≠peak} ν(x)`.
    pub mass_off_peak: f64,
    /// `log ν(x_k)`.
    pub log_nu_at_xk: f64,
    /// `‖ν‖₂²`.
    pub norm_sq: f64,
    /// `false` when `ν(x_k)` is below the resolution floor.
    pub resolved: bool,
}

/// Mass of `ν` away from its peak and its value at the rank-`k` vertex.
pub fn eigenfunction_profile(
    result: &SpectralResult,
    field: &PotentialField,
    k: usize,
) -> Result<EigenProfile> {
    if k == 0 || k > field.values().len() {
        return Err(PamError::InvalidArgument(format!("rank {k} out of range")));
    }
    let xk = field.vertex_of_rank(k);
    if xk == result.peak || result.boundary.contains(&xk) {
        return Err(PamError::InvalidArgument(format!(
            "x_{k} is the peak or lies on the boundary"
        )));
    }
    let total: f64 = result.nu.iter().sum();
    let value = result.nu[xk.index()];
    Ok(EigenProfile {
        mass_off_peak: total - result.nu[result.peak.index()],
        log_nu_at_xk: value.ln(),
        norm_sq: result.nu.iter().map(|v| v * v).sum(),
        resolved: value > result.resolution_floor(),
    })
}

/// Full spectrum of the restricted operator by dense diagonalization.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors over the whole cube (zero on the boundary),
    /// in the order of `values`.
    pub vectors: Vec<StateVector>,
    /// Interior vertex indices.
    pub interior: Vec<usize>,
    /// The restricted matrix on the interior.
    pub matrix: DMatrix<f64>,
}

/// Materializes the restricted operator on the interior and diagonalizes it.
pub fn dense_oracle(kappa: f64, field: &PotentialField, boundary: &[Vertex]) -> Result<DenseSpectrum> {
    let n = field.n();
    if n > DENSE_MAX_DIM {
        return Err(PamError::Dimension {
            n,
            min: 1,
            max: DENSE_MAX_DIM,
        });
    }
    let h = Hamiltonian::from_field(field, kappa, boundary)?;
    Ok(dense_from_hamiltonian(&h))
}

pub(crate) fn dense_from_hamiltonian(h: &Hamiltonian) -> DenseSpectrum {
    let n = h.dim();
    let interior = h.interior();
    let mut pos = vec![usize::MAX; h.len()];
    for (k, &x) in interior.iter().enumerate() {
        pos[x] = k;
    }
    let m = interior.len();
    let kn = h.kappa() / n as f64;
    let mut matrix = DMatrix::<f64>::zeros(m, m);
    for (r, &x) in interior.iter().enumerate() {
        matrix[(r, r)] = h.potential()[x] - h.kappa();
        for b in 0..n {
            let z = x ^ (1 << b);
            if pos[z] != usize::MAX {
                matrix[(r, pos[z])] = kn;
            }
        }
    }
    let (values, q) = sorted_eigen(matrix.clone());
    let vectors = (0..m)
        .map(|c| {
            let mut v = StateVector::zeros(n);
            for (r, &x) in interior.iter().enumerate() {
                v[x] = q[(r, c)];
            }
            v
        })
        .collect();
    DenseSpectrum {
        values,
        vectors,
        interior,
        matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{rem_theta, sample_rem};

    #[test]
    fn flat_potential_has_constant_eigenfunction() {
        let f = PotentialField::constant(6, 0.0).unwrap();
        let r = principal_eig(1.0, &f, 1, 1, DEFAULT_TOL).unwrap();
        assert!(r.lambda.abs() < 1e-12);
        for v in r.nu.iter() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let p = eigenfunction_profile(&r, &f, 2).unwrap();
        assert!((p.mass_off_peak - 63.0).abs() < 1e-8);
    }

    #[test]
    fn flat_gap_is_two_kappa_over_n() {
        let f = PotentialField::constant(7, 0.0).unwrap();
        let g = spectral_gap(1.5, &f, 1, 1, DEFAULT_TOL).unwrap();
        assert!((g - 2.0 * 1.5 / 7.0).abs() < 1e-10, "gap {g}");
    }

    #[test]
    fn matches_dense_oracle() {
        for seed in 0..5 {
            let f = sample_rem(7, seed).unwrap();
            for (i, l) in [(1, 1), (1, 2), (2, 3)] {
                let r = principal_eig_with_gap(1.0, &f, i, l, DEFAULT_TOL).unwrap();
                let d = dense_oracle(1.0, &f, &boundary_set(&f, i, l)).unwrap();
                assert!((r.lambda - d.values[0]).abs() < 1e-10);
                assert!((r.gap.unwrap() - (d.values[0] - d.values[1])).abs() < 1e-9);
                let top = &d.vectors[0];
                let scale = top[r.peak.index()];
                for x in 0..top.len() {
                    assert!((top[x] / scale - r.nu[x]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn nu_is_normalized_and_positive() {
        let f = sample_rem(10, 4).unwrap();
        let r = principal_eig(1.0, &f, 2, 3, DEFAULT_TOL).unwrap();
        assert_eq!(r.nu[r.peak.index()], 1.0);
        assert!(r.nu.iter().all(|&v| v >= 0.0));
        for b in &r.boundary {
            assert_eq!(r.nu[b.index()], 0.0);
        }
        assert!(r.residual <= DEFAULT_TOL * 40.0);
    }

    #[test]
    fn eigenvalue_sits_just_below_peak_minus_kappa() {
        let n = 14;
        let f = sample_rem(n, 9).unwrap();
        let r = principal_eig(1.0, &f, 1, 1, DEFAULT_TOL).unwrap();
        let excess = r.lambda - (f.top(1) - 1.0);
        let bound = 10.0 / (rem_theta() * (n * n) as f64);
        assert!(excess > 0.0 && excess <= bound, "excess {excess}");
    }

    #[test]
    fn dense_flat_spectrum() {
        let n = 5;
        let f = PotentialField::constant(n, 0.0).unwrap();
        let d = dense_oracle(2.0, &f, &[]).unwrap();
        let binom = [1, 5, 10, 10, 5, 1];
        let mut pos = 0;
        for (k, &mult) in binom.iter().enumerate() {
            for _ in 0..mult {
                assert!((d.values[pos] + 2.0 * 2.0 * k as f64 / n as f64).abs() < 1e-12);
                pos += 1;
            }
        }
        assert!(dense_oracle(1.0, &sample_rem(11, 1).unwrap(), &[]).is_err());
    }

    #[test]
    fn bound_check_reports_broken_hypotheses() {
        let f = PotentialField::constant(6, 0.0).unwrap();
        let rep = eigen_bound_check(1.0, &f, &[Vertex(0)], None, DEFAULT_TOL).unwrap();
        assert!(matches!(rep.status, BoundStatus::HypothesesNotMet { .. }));
    }

    #[test]
    fn spectral_result_json_round_trip() {
        let f = sample_rem(6, 2).unwrap();
        let r = principal_eig_with_gap(1.0, &f, 1, 2, DEFAULT_TOL).unwrap();
        let back = SpectralResult::from_json(&r.to_json(true).unwrap()).unwrap();
        assert_eq!(r, back);
        assert!(SpectralResult::from_json(&r.to_json(false).unwrap()).is_err());
    }
}
