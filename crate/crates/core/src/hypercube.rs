//! Vertices of the hypercube `{-1,+1}^n` encoded as bitmasks, and the
//! matrix-free Laplacian and Hamiltonian `κΔ + ξ` acting on vectors indexed
//! by those bitmasks.
//!
//! Bit `i` of a vertex index is set exactly when the spin at site `i` is `+1`.
//! Nothing here ever materialises the `2^n × 2^n` operator; the dense form
//! only exists inside the test oracles and [`crate::spectral::dense_oracle`].

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::potential::PotentialField;

/// Largest supported dimension.
pub const MAX_DIM: usize = 24;

/// A point of `{-1,+1}^n`, stored as its bitmask index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub u32);

impl Vertex {
    /// Validated constructor: `index < 2^n`.
    pub fn new(index: u32, n: usize) -> Result<Self> {
        check_dim(n)?;
        if (index as u64) >= (1u64 << n) {
            return Err(PamError::InvalidArgument(format!(
                "vertex index {index} out of range for n = {n}"
            )));
        }
        Ok(Vertex(index))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Spin at `site`, as `+1` or `-1`.
    #[inline]
    pub fn spin(self, site: usize) -> i8 {
        if self.0 >> site & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn flip(self, site: usize) -> Vertex {
        Vertex(self.0 ^ (1 << site))
    }
}

impl std::fmt::Display for Vertex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(PamError::Dimension {
            n,
            min: 1,
            max: MAX_DIM,
        });
    }
    Ok(())
}

#[inline]
pub fn num_vertices(n: usize) -> usize {
    1usize << n
}

/// The `n` vertices at Hamming distance one from `x`, ordered by flipped site.
pub fn neighbors(x: Vertex, n: usize) -> Vec<Vertex> {
    (0..n).map(|i| x.flip(i)).collect()
}

#[inline]
pub fn hamming(x: Vertex, y: Vertex) -> u32 {
    (x.0 ^ y.0).count_ones()
}

/// A real function on the hypercube. Length is always `2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
    n: usize,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; num_vertices(n)],
            n,
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            values: vec![c; num_vertices(n)],
            n,
        }
    }

    pub fn delta(n: usize, x: Vertex) -> Self {
        let mut v = Self::zeros(n);
        v.values[x.index()] = 1.0;
        v
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if values.len() != num_vertices(n) {
            return Err(PamError::InvalidArgument(format!(
                "state vector has length {} but 2^{n} = {} is required",
                values.len(),
                num_vertices(n)
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PamError::InvalidArgument(format!(
                "state vector entry {i} is not finite"
            )));
        }
        Ok(Self { values, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Δ_n f(x) = (1/n) Σ_{z~x} (f(z) − f(x))`.
pub fn laplacian_apply(f: &StateVector, n: usize) -> Result<StateVector> {
    check_dim(n)?;
    if f.len() != num_vertices(n) {
        return Err(PamError::InvalidArgument(format!(
            "vector length {} does not match n = {n}",
            f.len()
        )));
    }
    let mut out = StateVector::zeros(n);
    laplacian_apply_into(f, n, &mut out);
    Ok(out)
}

pub fn laplacian_apply_into(f: &[f64], n: usize, out: &mut [f64]) {
    let inv_n = 1.0 / n as f64;
    for (x, o) in out.iter_mut().enumerate() {
        let fx = f[x];
        let mut s = 0.0;
        for i in 0..n {
            s += f[x ^ (1 << i)];
        }
        *o = inv_n * s - fx;
    }
}

/// `κΔ_n + ξ` restricted to the complement of a boundary set (zero Dirichlet
/// conditions). Input values on the boundary are ignored and output values
/// there are zero.
#[derive(Clone, Debug)]
pub struct Hamiltonian<'a> {
    n: usize,
    kappa: f64,
    xi: &'a [f64],
    boundary: Vec<bool>,
    boundary_list: Vec<Vertex>,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(n: usize, kappa: f64, xi: &'a [f64], boundary: &[Vertex]) -> Result<Self> {
        check_dim(n)?;
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(PamError::NonPositiveKappa(kappa));
        }
        if xi.len() != num_vertices(n) {
            return Err(PamError::InvalidArgument(format!(
                "potential has length {} but n = {n}",
                xi.len()
            )));
        }
        let mut mask = Vec::new();
        let mut list = Vec::new();
        if !boundary.is_empty() {
            mask = vec![false; num_vertices(n)];
            for &b in boundary {
                if b.index() >= mask.len() {
                    return Err(PamError::InvalidArgument(format!(
                        "boundary vertex {b} out of range for n = {n}"
                    )));
                }
                if !mask[b.index()] {
                    mask[b.index()] = true;
                    list.push(b);
                }
            }
            list.sort();
        }
        Ok(Self {
            n,
            kappa,
            xi,
            boundary: mask,
            boundary_list: list,
        })
    }

    pub fn from_field(field: &'a PotentialField, kappa: f64, boundary: &[Vertex]) -> Result<Self> {
        Self::new(field.n(), kappa, field.values(), boundary)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        num_vertices(self.n)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn potential(&self) -> &[f64] {
        self.xi
    }

    #[inline]
    pub fn is_boundary(&self, x: usize) -> bool {
        !self.boundary.is_empty() && self.boundary[x]
    }

    pub fn boundary(&self) -> &[Vertex] {
        &self.boundary_list
    }

    /// Indices not on the boundary, ascending.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| !self.is_boundary(x)).collect()
    }

    /// Largest diagonal entry `max ξ − κ` over the interior.
    pub fn max_diagonal(&self) -> f64 {
        (0..self.len())
            .filter(|&x| !self.is_boundary(x))
            .map(|x| self.xi[x])
            .fold(f64::NEG_INFINITY, f64::max)
            - self.kappa
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let m = self
            .xi
            .iter()
            .map(|v| (v - self.kappa).abs())
            .fold(0.0, f64::max);
        m + self.kappa
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        let kn = self.kappa / n as f64;
        let kappa = self.kappa;
        if self.boundary.is_empty() {
            for (x, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..n {
                    s += f[x ^ (1 << i)];
                }
                *o = kn * s + (self.xi[x] - kappa) * f[x];
            }
        } else {
            let mask = &self.boundary;
            for (x, o) in out.iter_mut().enumerate() {
                if mask[x] {
                    *o = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for i in 0..n {
                    let z = x ^ (1 << i);
                    if !mask[z] {
                        s += f[z];
                    }
                }
                *o = kn * s + (self.xi[x] - kappa) * f[x];
            }
        }
    }

    pub fn apply(&self, f: &StateVector) -> StateVector {
        let mut out = StateVector::zeros(self.n);
        self.apply_into(f, &mut out);
        out
    }

    /// Zero out boundary entries in place.
    pub fn mask(&self, f: &mut [f64]) {
        for b in &self.boundary_list {
            f[b.index()] = 0.0;
        }
    }
}

/// `κΔ_n f + ξ f` with zero boundary conditions on `boundary`.
pub fn hamiltonian_apply(
    f: &StateVector,
    kappa: f64,
    field: &PotentialField,
    boundary: &[Vertex],
) -> Result<StateVector> {
    let h = Hamiltonian::from_field(field, kappa, boundary)?;
    if f.len() != h.len() {
        return Err(PamError::InvalidArgument(format!(
            "vector length {} does not match field dimension {}",
            f.len(),
            field.n()
        )));
    }
    Ok(h.apply(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: Vec<Vertex>) -> Vec<u32> {
        let mut s: Vec<u32> = v.into_iter().map(|x| x.0).collect();
        s.sort();
        s
    }

    #[test]
    fn neighbor_examples() {
        assert_eq!(set(neighbors(Vertex(0b000), 3)), vec![0b001, 0b010, 0b100]);
        assert_eq!(set(neighbors(Vertex(0b1), 1)), vec![0b0]);
        assert_eq!(
            set(neighbors(Vertex(0b1010), 4)),
            vec![0b0010, 0b1000, 0b1011, 0b1110]
        );
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(Vertex(0b101), Vertex(0b011)), 2);
        assert_eq!(hamming(Vertex(7), Vertex(7)), 0);
        assert_eq!(hamming(Vertex(0b0000), Vertex(0b1111)), 4);
    }

    #[test]
    fn vertex_validation() {
        assert!(Vertex::new(8, 3).is_err());
        assert!(Vertex::new(7, 3).is_ok());
        assert!(Vertex::new(0, 0).is_err());
        assert!(Vertex::new(0, 25).is_err());
        assert_eq!(Vertex(0b10).spin(1), 1);
        assert_eq!(Vertex(0b10).spin(0), -1);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let f = StateVector::constant(5, 3.25);
        let out = laplacian_apply(&f, 5).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn two_point_laplacian() {
        let f = StateVector::from_vec(1, vec![2.0, 7.0]).unwrap();
        let out = laplacian_apply(&f, 1).unwrap();
        assert_eq!(out.as_slice(), &[5.0, -5.0]);
    }

    #[test]
    fn parity_is_an_eigenvector() {
        let n = 6;
        let f: Vec<f64> = (0..num_vertices(n))
            .map(|x| if (x as u32).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let f = StateVector::from_vec(n, f).unwrap();
        let out = laplacian_apply(&f, n).unwrap();
        for (o, v) in out.iter().zip(f.iter()) {
            assert!((o + 2.0 * v).abs() < 1e-14);
        }
    }

    #[test]
    fn state_vector_rejects_bad_input() {
        assert!(StateVector::from_vec(3, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(StateVector::from_vec(3, v).is_err());
    }

    #[test]
    fn hamiltonian_rejects_nonpositive_kappa() {
        let xi = vec![0.0; 8];
        assert!(matches!(
            Hamiltonian::new(3, 0.0, &xi, &[]),
            Err(PamError::NonPositiveKappa(_))
        ));
        assert!(Hamiltonian::new(3, -1.0, &xi, &[]).is_err());
    }

    #[test]
    fn hamiltonian_flat_and_shift() {
        let n = 4;
        let xi = vec![0.0; 16];
        let h = Hamiltonian::new(n, 0.7, &xi, &[]).unwrap();
        let out = h.apply(&StateVector::constant(n, 1.0));
        assert!(out.iter().all(|v| v.abs() < 1e-15));

        let c = 2.5;
        let xi_c = vec![c; 16];
        let hc = Hamiltonian::new(n, 0.7, &xi_c, &[]).unwrap();
        let f = StateVector::from_vec(n, (0..16).map(|i| (i as f64).sin()).collect()).unwrap();
        let lap = laplacian_apply(&f, n).unwrap();
        let out = hc.apply(&f);
        for x in 0..16 {
            assert!((out[x] - (0.7 * lap[x] + c * f[x])).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_is_ignored_and_zeroed() {
        let n = 3;
        let xi: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let b = [Vertex(0), Vertex(5)];
        let h = Hamiltonian::new(n, 1.0, &xi, &b).unwrap();
        let mut f = StateVector::from_vec(n, (0..8).map(|i| 1.0 + i as f64).collect()).unwrap();
        let out1 = h.apply(&f);
        f[0] = 1e6;
        f[5] = -3e5;
        let out2 = h.apply(&f);
        assert_eq!(out1, out2);
        assert_eq!(out1[0], 0.0);
        assert_eq!(out1[5], 0.0);
    }
}
