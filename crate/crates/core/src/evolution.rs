//! Time evolution of `∂v/∂t = κΔv + ξv`.
//!
//! Solutions grow like `exp(max ξ · t)` and overflow quickly, so the state
//! keeps a rescaled vector `w` with `max w = 1` and a scalar log factor `L`,
//! `v = w · exp(L)`. Everything reported is a logarithm.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::hypercube::{Hamiltonian, StateVector, Vertex};
use crate::linalg::KrylovExp;
use crate::potential::PotentialField;
use crate::spectral::{dense_from_hamiltonian, DenseSpectrum, DENSE_MAX_DIM};

/// Krylov subspace dimension of the propagator.
pub const KRYLOV_DIM: usize = 30;

/// Largest `ατ` per uniformization step; keeps `exp(−ατ)` well inside
/// double range.
const UNIFORM_CHUNK: f64 = 30.0;

/// Poisson weights below this are dropped.
const UNIFORM_TAIL: f64 = 1e-40;

/// Default error tolerance per unit time.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Entries of `w` below `-NEGATIVE_SLACK` (relative to `max w`) are an error.
const NEGATIVE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub w: StateVector,
    pub logfac: f64,
    pub t: f64,
}

impl EvolutionState {
    /// State at `t = 0` with `v = v0`. `v0` must be nonnegative and nonzero.
    pub fn new(v0: StateVector) -> Result<Self> {
        let mut s = Self {
            w: v0,
            logfac: 0.0,
            t: 0.0,
        };
        if s.w.iter().any(|&v| v < 0.0) {
            return Err(PamError::InvalidArgument("initial data must be nonnegative".into()));
        }
        s.renormalize()?;
        Ok(s)
    }

    pub fn delta(n: usize, y: Vertex) -> Self {
        Self::new(StateVector::delta(n, y)).expect("delta is a valid initial condition")
    }

    pub fn flat(n: usize) -> Self {
        Self::new(StateVector::constant(n, 1.0)).expect("constant is a valid initial condition")
    }

    fn renormalize(&mut self) -> Result<()> {
        let m = self.w.iter().cloned().fold(0.0, f64::max);
        if !(m > 0.0) || !m.is_finite() {
            return Err(PamError::DegenerateMass);
        }
        if m != 1.0 {
            for v in self.w.iter_mut() {
                *v /= m;
            }
            self.logfac += m.ln();
        }
        Ok(())
    }

    /// `log v(t, x)`.
    pub fn log_v(&self, x: Vertex) -> f64 {
        self.w[x.index()].ln() + self.logfac
    }

    /// `log Σ_x v(t, x)`.
    pub fn log_total_mass(&self) -> f64 {
        self.w.sum().ln() + self.logfac
    }

    /// `v` itself; may overflow for large `logfac`.
    pub fn v(&self) -> StateVector {
        let f = self.logfac.exp();
        let mut v = self.w.clone();
        for e in v.iter_mut() {
            *e *= f;
        }
        v
    }
}

/// Integration method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dense spectral solution for `n ≤ 10`, Krylov above.
    #[default]
    Auto,
    Dense,
    Krylov,
    /// Poisson series in the nonnegative matrix `I + (H − c)/α`. Every
    /// term is nonnegative, so each entry is accurate relative to itself
    /// rather than to `max w`; the cost grows like `(max ξ − min ξ) t`.
    Uniformization,
}

/// Propagator for a fixed `(κ, ξ)`.
pub struct Evolver<'a> {
    h: Hamiltonian<'a>,
    field: &'a PotentialField,
    tol: f64,
    max_step: f64,
    rho: f64,
    dense: Option<DenseSpectrum>,
    /// Diagonal of `I + (H − ρ)/α` and `α`.
    uniform: Option<(Vec<f64>, f64)>,
}

impl<'a> Evolver<'a> {
    pub fn new(kappa: f64, field: &'a PotentialField, method: Method, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(PamError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let h = Hamiltonian::from_field(field, kappa, &[])?;
        let use_dense = match method {
            Method::Auto => field.n() <= DENSE_MAX_DIM,
            Method::Dense => {
                if field.n() > DENSE_MAX_DIM {
                    return Err(PamError::Dimension {
                        n: field.n(),
                        min: 1,
                        max: DENSE_MAX_DIM,
                    });
                }
                true
            }
            Method::Krylov | Method::Uniformization => false,
        };
        let dense = use_dense.then(|| dense_from_hamiltonian(&h));
        let rho = field.max_value();
        let uniform = (method == Method::Uniformization).then(|| {
            let lo = field.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let alpha = rho - lo + kappa;
            let diag = field.values().iter().map(|v| 1.0 + (v - kappa - rho) / alpha).collect();
            (diag, alpha)
        });
        Ok(Self {
            rho,
            h,
            field,
            tol,
            max_step: f64::INFINITY,
            dense,
            uniform,
        })
    }

    /// Caps the length of a single substep.
    pub fn with_max_step(mut self, dt: f64) -> Self {
        if dt > 0.0 {
            self.max_step = dt;
        }
        self
    }

    pub fn field(&self) -> &PotentialField {
        self.field
    }

    pub fn kappa(&self) -> f64 {
        self.h.kappa()
    }

    /// Advances `state` to `t_end`.
    pub fn propagate(&self, state: &mut EvolutionState, t_end: f64) -> Result<()> {
        if !(t_end >= state.t) {
            return Err(PamError::InvalidArgument(format!(
                "t_end = {t_end} precedes current time {}",
                state.t
            )));
        }
        if state.w.dim() != self.field.n() {
            return Err(PamError::InvalidArgument("state and field dimensions differ".into()));
        }
        match (&self.dense, &self.uniform) {
            (Some(d), _) => self.propagate_dense(d, state, t_end),
            (None, Some((diag, alpha))) => self.propagate_uniform(diag, *alpha, state, t_end),
            (None, None) => self.propagate_krylov(state, t_end),
        }
    }

    fn propagate_dense(&self, d: &DenseSpectrum, state: &mut EvolutionState, t_end: f64) -> Result<()> {
        let tau = t_end - state.t;
        if tau == 0.0 {
            return Ok(());
        }
        let top = d.values[0];
        let mut out = vec![0.0; state.w.len()];
        for (lam, q) in d.values.iter().zip(&d.vectors) {
            let c = q.dot(&state.w) * ((lam - top) * tau).exp();
            if c == 0.0 {
                continue;
            }
            for (o, qi) in out.iter_mut().zip(q.iter()) {
                *o += c * qi;
            }
        }
        state.w.as_mut_slice().copy_from_slice(&out);
        state.logfac += top * tau;
        state.t = t_end;
        self.finish_step(state)
    }

    fn propagate_uniform(&self, diag: &[f64], alpha: f64, state: &mut EvolutionState, t_end: f64) -> Result<()> {
        let n = self.field.n();
        let off = self.h.kappa() / (n as f64 * alpha);
        let mut cur = state.w.to_vec();
        let mut next = vec![0.0; cur.len()];
        let mut out = vec![0.0; cur.len()];
        while state.t < t_end {
            let remaining = t_end - state.t;
            let tau = remaining.min(self.max_step).min(UNIFORM_CHUNK / alpha);
            let mu = alpha * tau;
            cur.copy_from_slice(&state.w);
            let mut p = (-mu).exp();
            for (o, c) in out.iter_mut().zip(&cur) {
                *o = p * c;
            }
            let mut k = 0.0;
            loop {
                k += 1.0;
                p *= mu / k;
                if k > mu && p < UNIFORM_TAIL {
                    break;
                }
                for (x, nx) in next.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += cur[x ^ (1 << b)];
                    }
                    *nx = diag[x] * cur[x] + off * s;
                }
                std::mem::swap(&mut cur, &mut next);
                for (o, c) in out.iter_mut().zip(&cur) {
                    *o += p * c;
                }
            }
            state.w.as_mut_slice().copy_from_slice(&out);
            state.logfac += self.rho * tau;
            state.t = if tau == remaining { t_end } else { state.t + tau };
            self.finish_step(state)?;
        }
        Ok(())
    }

    fn propagate_krylov(&self, state: &mut EvolutionState, t_end: f64) -> Result<()> {
        let rho = self.rho;
        let h = &self.h;
        let op = move |x: &[f64], y: &mut [f64]| {
            h.apply_into(x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi -= rho * xi;
            }
        };
        let mut last = self.max_step.min(1.0);
        let mut out = vec![0.0; state.w.len()];
        while state.t < t_end {
            let remaining = t_end - state.t;
            let mut tau = remaining.min(2.0 * last).min(self.max_step);
            let k = KrylovExp::new(&op, &state.w, KRYLOV_DIM);
            let (c, shift) = loop {
                let (c, shift, err) = k.coefficients(tau);
                if err <= self.tol * tau {
                    break (c, shift);
                }
                tau *= 0.5;
                if tau < 1e-12 * state.t.max(1.0) {
                    return Err(PamError::StepUnderflow { t: state.t });
                }
            };
            k.combine(&c, &mut out);
            state.w.as_mut_slice().copy_from_slice(&out);
            state.logfac += rho * tau + shift;
            state.t = if tau == remaining { t_end } else { state.t + tau };
            last = tau;
            self.finish_step(state)?;
        }
        Ok(())
    }

    fn finish_step(&self, state: &mut EvolutionState) -> Result<()> {
        let m = state.w.iter().cloned().fold(0.0, f64::max);
        for (x, v) in state.w.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -NEGATIVE_SLACK * m {
                    return Err(PamError::NegativeSolution {
                        vertex: x as u32,
                        value: *v / m,
                    });
                }
                *v = 0.0;
            }
        }
        state.renormalize()
    }

    /// Evolves `state` through increasing `times`, returning a snapshot at each.
    pub fn snapshots(&self, mut state: EvolutionState, times: &[f64]) -> Result<Vec<EvolutionState>> {
        check_times(times)?;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            self.propagate(&mut state, t)?;
            out.push(state.clone());
        }
        Ok(out)
    }

    /// Evolves from `initial` and records the tracked vertices at `times`.
    pub fn records(
        &self,
        initial: EvolutionState,
        times: &[f64],
        tracked: &[Vertex],
    ) -> Result<Vec<GrowthRecord>> {
        check_times(times)?;
        let mut state = initial;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            self.propagate(&mut state, t)?;
            out.push(GrowthRecord::from_state(&state, self.field, tracked)?);
        }
        Ok(out)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(PamError::InvalidArgument("times must be finite, nonnegative and increasing".into()));
    }
    Ok(())
}

/// One-shot form of [`Evolver::propagate`]. `dt_target` caps the substep.
pub fn propagate(
    state: EvolutionState,
    kappa: f64,
    field: &PotentialField,
    dt_target: f64,
    t_end: f64,
    tol: f64,
) -> Result<EvolutionState> {
    let ev = Evolver::new(kappa, field, Method::Auto, tol)?.with_max_step(dt_target);
    let mut state = state;
    ev.propagate(&mut state, t_end)?;
    Ok(state)
}

/// Observables at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub t: f64,
    pub log_v_at: BTreeMap<Vertex, f64>,
    pub log_total_mass: f64,
    pub u_at: BTreeMap<Vertex, f64>,
    pub mean_fitness: f64,
}

impl GrowthRecord {
    pub fn from_state(state: &EvolutionState, field: &PotentialField, tracked: &[Vertex]) -> Result<Self> {
        let (u, mean_fitness) = mutation_selection(state, field)?;
        let log_v_at = tracked.iter().map(|&x| (x, state.log_v(x))).collect();
        let u_at = tracked.iter().map(|&x| (x, u[x.index()])).collect();
        Ok(Self {
            t: state.t,
            log_v_at,
            log_total_mass: state.log_total_mass(),
            u_at,
            mean_fitness,
        })
    }
}

/// `x_{1,2^n}, …, x_{5,2^n}` followed by `extra`, without duplicates.
pub fn default_tracked(field: &PotentialField, extra: &[Vertex]) -> Vec<Vertex> {
    let mut out = field.gamma(5);
    for &x in extra {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Records for `v(0, ·) = δ_y`.
pub fn solve_from_delta(y: Vertex, kappa: f64, field: &PotentialField, times: &[f64]) -> Result<Vec<GrowthRecord>> {
    let ev = Evolver::new(kappa, field, Method::Auto, DEFAULT_TOL)?;
    ev.records(EvolutionState::delta(field.n(), y), times, &default_tracked(field, &[y]))
}

/// Records for `v(0, ·) ≡ 1`.
pub fn solve_flat(kappa: f64, field: &PotentialField, times: &[f64]) -> Result<Vec<GrowthRecord>> {
    let ev = Evolver::new(kappa, field, Method::Auto, DEFAULT_TOL)?;
    ev.records(EvolutionState::flat(field.n()), times, &default_tracked(field, &[]))
}

/// `u = v / Σv` and the mean fitness `Σ u ξ`.
pub fn mutation_selection(state: &EvolutionState, field: &PotentialField) -> Result<(StateVector, f64)> {
    let total = state.w.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(PamError::DegenerateMass);
    }
    let mut u = state.w.clone();
    for v in u.iter_mut() {
        *v /= total;
    }
    let mean = u.iter().zip(field.values()).map(|(a, b)| a * b).sum();
    Ok((u, mean))
}

/// `log v(t, x) / t` at the last record.
pub fn growth_exponent(records: &[GrowthRecord], vertex: Vertex) -> Result<f64> {
    let last = records
        .last()
        .filter(|r| r.t > 0.0)
        .ok_or_else(|| PamError::InvalidArgument("need a record with t > 0".into()))?;
    let lv = last
        .log_v_at
        .get(&vertex)
        .ok_or_else(|| PamError::InvalidArgument(format!("vertex {vertex} is not tracked")))?;
    Ok(lv / last.t)
}

/// Writes records as CSV rows `t, alpha, rank, log_v, log_total_mass, u, mean_fitness`,
/// one row per tracked vertex.
pub fn write_growth_csv<W: Write>(
    out: W,
    records: &[GrowthRecord],
    field: &PotentialField,
    alpha: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "alpha", "rank", "log_v", "log_total_mass", "u", "mean_fitness"])?;
    for r in records {
        for (x, lv) in &r.log_v_at {
            w.write_record(&[
                r.t.to_string(),
                alpha.to_string(),
                field.rank_of(*x).to_string(),
                lv.to_string(),
                r.log_total_mass.to_string(),
                r.u_at[x].to_string(),
                r.mean_fitness.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::sample_rem;

    #[test]
    fn very_long_times_track_the_principal_eigenvalue() {
        let f = sample_rem(11, 12).unwrap();
        let lam = crate::spectral::principal_eig(1.0, &f, 1, 1, 1e-12).unwrap().lambda;
        let ev = Evolver::new(1.0, &f, Method::Krylov, DEFAULT_TOL).unwrap();
        let mut s = EvolutionState::flat(11);
        ev.propagate(&mut s, 1e4).unwrap();
        let a = s.log_total_mass();
        ev.propagate(&mut s, 2e4).unwrap();
        assert!(((s.log_total_mass() - a) / 1e4 - lam).abs() < 1e-9);
    }

    #[test]
    fn flat_potential_flat_start() {
        let f = PotentialField::constant(9, 0.7).unwrap();
        for method in [Method::Dense, Method::Krylov] {
            let ev = Evolver::new(1.0, &f, method, DEFAULT_TOL).unwrap();
            let mut s = EvolutionState::flat(9);
            ev.propagate(&mut s, 4.0).unwrap();
            for x in 0..512 {
                assert!((s.log_v(Vertex(x)) - 0.7 * 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mass_is_conserved_without_potential() {
        let f = PotentialField::constant(12, 0.0).unwrap();
        let ev = Evolver::new(1.3, &f, Method::Krylov, DEFAULT_TOL).unwrap();
        let mut s = EvolutionState::delta(12, Vertex(77));
        for t in [0.5, 1.0, 3.0, 10.0] {
            ev.propagate(&mut s, t).unwrap();
            assert!(s.log_total_mass().abs() < 1e-10 * t, "t = {t}");
        }
    }

    #[test]
    fn krylov_matches_dense() {
        let f = sample_rem(8, 3).unwrap();
        let dense = Evolver::new(1.0, &f, Method::Dense, DEFAULT_TOL).unwrap();
        let kry = Evolver::new(1.0, &f, Method::Krylov, DEFAULT_TOL).unwrap();
        let y = Vertex(17);
        let a = dense.snapshots(EvolutionState::delta(8, y), &[0.5, 2.0, 10.0]).unwrap();
        let b = kry.snapshots(EvolutionState::delta(8, y), &[0.5, 2.0, 10.0]).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            for x in 0..256u32 {
                if sa.w[x as usize] < 1e-6 {
                    continue;
                }
                let (la, lb) = (sa.log_v(Vertex(x)), sb.log_v(Vertex(x)));
                assert!((la - lb).abs() / la.abs().max(1.0) < 1e-8, "x = {x}: {la} vs {lb}");
            }
        }
    }

    #[test]
    fn initial_records() {
        let f = sample_rem(6, 1).unwrap();
        let y = Vertex(5);
        let r = solve_from_delta(y, 1.0, &f, &[0.0]).unwrap();
        assert_eq!(r[0].u_at[&y], 1.0);
        assert!((r[0].mean_fitness - f.value(y)).abs() < 1e-15);
        for (x, u) in &r[0].u_at {
            if *x != y {
                assert_eq!(*u, 0.0);
            }
        }
        let flat = solve_flat(1.0, &f, &[0.0]).unwrap();
        assert!(flat[0].log_v_at.values().all(|&v| v == 0.0));
    }

    #[test]
    fn growth_exponent_of_constant_field() {
        let f = PotentialField::constant(5, -0.4).unwrap();
        let r = solve_flat(1.0, &f, &[1.0, 3.0]).unwrap();
        assert!((growth_exponent(&r, Vertex(0)).unwrap() + 0.4).abs() < 1e-12);
        assert!(growth_exponent(&r[..0], Vertex(0)).is_err());
    }

    #[test]
    fn rejects_backwards_time() {
        let f = sample_rem(4, 1).unwrap();
        let ev = Evolver::new(1.0, &f, Method::Auto, DEFAULT_TOL).unwrap();
        let mut s = EvolutionState::delta(4, Vertex(0));
        ev.propagate(&mut s, 1.0).unwrap();
        assert!(ev.propagate(&mut s, 0.5).is_err());
    }

    #[test]
    fn csv_has_expected_header() {
        let f = sample_rem(5, 2).unwrap();
        let r = solve_from_delta(f.vertex_of_rank(1), 1.0, &f, &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_growth_csv(&mut buf, &r, &f, 0.5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,alpha,rank,log_v,log_total_mass,u,mean_fitness\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 5);
    }
}
