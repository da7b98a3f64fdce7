//! Feynman–Kac Monte Carlo for the PAM.
//!
//! `X` is the continuous-time random walk with generator `κΔ`: it waits an
//! `Exp(κ)` time, then flips one uniformly chosen coordinate. Estimates are
//! plain averages of `exp(∫ ξ(X_s) ds)` weights, accumulated in the log
//! domain. Walks are split into fixed chunks, each drawing from its own RNG
//! stream, so results do not depend on the number of threads.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::hypercube::{num_vertices, Vertex};
use crate::potential::PotentialField;
use crate::rng::{self, StreamRng, MC_STREAM_BASE};

/// Walks per RNG stream.
pub const CHUNK: usize = 4096;

/// Default walk-length cap for eigenfunction estimates, in units of `1/κ`.
pub const DEFAULT_HORIZON_KAPPA: f64 = 50.0;

/// A sampled trajectory on `[0, t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub start: Vertex,
    pub t: f64,
    pub jump_times: Vec<f64>,
    /// `visited[0] = start`, then one entry per jump.
    pub visited: Vec<Vertex>,
    /// `∫₀ᵗ ξ(X_s) ds`.
    pub integral_xi: f64,
}

impl WalkPath {
    pub fn end(&self) -> Vertex {
        *self.visited.last().expect("a path has at least its start")
    }

    /// `Σ (holding time) · ξ(vertex)`, recomputed from the jump record.
    pub fn recompute_integral(&self, field: &PotentialField) -> f64 {
        let mut s = 0.0;
        let mut prev = 0.0;
        for (k, &x) in self.visited.iter().enumerate() {
            let until = self.jump_times.get(k).copied().unwrap_or(self.t);
            s += (until - prev) * field.value(x);
            prev = until;
        }
        s
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(PamError::NonPositiveKappa(kappa));
    }
    Ok(())
}

/// One walk from `y` over `[0, t]`.
pub fn simulate_walk(
    y: Vertex,
    t: f64,
    kappa: f64,
    field: &PotentialField,
    rng: &mut StreamRng,
) -> Result<WalkPath> {
    check_kappa(kappa)?;
    if !(t >= 0.0) {
        return Err(PamError::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    let n = field.n();
    let xi = field.values();
    let mut path = WalkPath {
        start: y,
        t,
        jump_times: Vec::new(),
        visited: vec![y],
        integral_xi: xi[y.index()] * t,
    };
    let mut s = 0.0;
    let mut x = y.index();
    loop {
        let hold: f64 = rng.sample(Exp1);
        s += hold / kappa;
        if s >= t {
            break;
        }
        let z = x ^ (1 << rng.random_range(0..n));
        path.integral_xi += (xi[z] - xi[x]) * (t - s);
        path.jump_times.push(s);
        path.visited.push(Vertex(z as u32));
        x = z;
    }
    Ok(path)
}

/// `(∫₀ᵗ ξ(X_s) ds, X_t)` without storing the path. The integral is written
/// as `ξ(X_0) t + Σ_jumps (ξ(new) − ξ(old))(t − s_j)`, which is exact for
/// constant `ξ`.
fn walk_integral(x0: usize, t: f64, kappa: f64, n: usize, xi: &[f64], rng: &mut StreamRng) -> (f64, usize) {
    let mut integral = xi[x0] * t;
    let mut s = 0.0;
    let mut x = x0;
    loop {
        let hold: f64 = rng.sample(Exp1);
        s += hold / kappa;
        if s >= t {
            return (integral, x);
        }
        let z = x ^ (1 << rng.random_range(0..n));
        integral += (xi[z] - xi[x]) * (t - s);
        x = z;
    }
}

/// What a walk contributes.
enum Sample {
    Weight(f64),
    Zero,
    Censored,
}

/// Log-domain running sums `Σ e^{l}` and `Σ e^{2l}` relative to a shift.
#[derive(Clone, Copy, Debug)]
struct LogSums {
    shift: f64,
    s1: f64,
    s2: f64,
    count: usize,
    hits: usize,
    censored: usize,
}

impl LogSums {
    fn new() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
            count: 0,
            hits: 0,
            censored: 0,
        }
    }

    fn rescale(&mut self, shift: f64) {
        if shift > self.shift {
            if self.shift > f64::NEG_INFINITY {
                let d = (self.shift - shift).exp();
                self.s1 *= d;
                self.s2 *= d * d;
            }
            self.shift = shift;
        }
    }

    fn push(&mut self, s: Sample) {
        self.count += 1;
        match s {
            Sample::Weight(l) => {
                self.hits += 1;
                self.rescale(l);
                let e = (l - self.shift).exp();
                self.s1 += e;
                self.s2 += e * e;
            }
            Sample::Zero => {}
            Sample::Censored => self.censored += 1,
        }
    }

    fn merge(&mut self, o: &LogSums) {
        self.count += o.count;
        self.hits += o.hits;
        self.censored += o.censored;
        if o.hits == 0 {
            return;
        }
        self.rescale(o.shift);
        let d = (o.shift - self.shift).exp();
        self.s1 += o.s1 * d;
        self.s2 += o.s2 * d * d;
    }
}

/// Mean and standard error of a Monte Carlo functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub target: String,
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// `log mean`; finite even when `mean` overflows.
    pub log_mean: f64,
    /// Walks that produced a nonzero weight.
    pub hits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censored_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl MCEstimate {
    fn from_sums(target: String, s: &LogSums) -> Self {
        let nf = s.count as f64;
        let (mean, std_error, log_mean) = if s.hits == 0 {
            (0.0, 0.0, f64::NEG_INFINITY)
        } else {
            let m1 = s.s1 / nf;
            let m2 = s.s2 / nf;
            let var = ((m2 - m1 * m1) * nf / (nf - 1.0)).max(0.0);
            let scale = s.shift.exp();
            (m1 * scale, (var / nf).sqrt() * scale, m1.ln() + s.shift)
        };
        Self {
            target,
            mean,
            std_error,
            n_samples: s.count,
            log_mean,
            hits: s.hits,
            censored_fraction: None,
            flag: None,
        }
    }

    /// `|mean − reference| ≤ k · std_error`.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn run_chunks<F>(n_samples: usize, seed: u64, sample: F) -> LogSums
where
    F: Fn(&mut StreamRng) -> Sample + Sync,
{
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<LogSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, MC_STREAM_BASE + c as u64);
            let len = CHUNK.min(n_samples - c * CHUNK);
            let mut sums = LogSums::new();
            for _ in 0..len {
                sums.push(sample(&mut rng));
            }
            sums
        })
        .collect();
    let mut total = LogSums::new();
    for p in &parts {
        total.merge(p);
    }
    total
}

fn check_common(kappa: f64, t: f64, field: &PotentialField, xs: &[Vertex], n_samples: usize, min: usize) -> Result<()> {
    check_kappa(kappa)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(PamError::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    if n_samples < min {
        return Err(PamError::InvalidArgument(format!("need at least {min} samples, got {n_samples}")));
    }
    let size = num_vertices(field.n());
    if let Some(x) = xs.iter().find(|x| x.index() >= size) {
        return Err(PamError::InvalidArgument(format!("vertex {x} out of range")));
    }
    Ok(())
}

/// `v(t, y) = E_y[exp(∫₀ᵗ ξ(X_s) ds)]`.
pub fn estimate_total_mass(
    y: Vertex,
    t: f64,
    kappa: f64,
    field: &PotentialField,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_common(kappa, t, field, &[y], n_samples, 100)?;
    let (n, xi) = (field.n(), field.values());
    let sums = run_chunks(n_samples, seed, |rng| {
        Sample::Weight(walk_integral(y.index(), t, kappa, n, xi, rng).0)
    });
    Ok(MCEstimate::from_sums(format!("total mass v({t}, {y})"), &sums))
}

/// `v(t, x, y) = E_x[exp(∫₀ᵗ ξ(X_s) ds) 1{X_t = y}]`. The hit rate falls
/// like `2^{-n}`, so this is only useful for small `n` or `x = y`.
pub fn estimate_endpoint(
    x: Vertex,
    y: Vertex,
    t: f64,
    kappa: f64,
    field: &PotentialField,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_common(kappa, t, field, &[x, y], n_samples, 10_000)?;
    let (n, xi) = (field.n(), field.values());
    let sums = run_chunks(n_samples, seed, |rng| {
        let (l, end) = walk_integral(x.index(), t, kappa, n, xi, rng);
        if end == y.index() {
            Sample::Weight(l)
        } else {
            Sample::Zero
        }
    });
    let mut est = MCEstimate::from_sums(format!("endpoint v({t}, {x}, {y})"), &sums);
    if sums.hits == 0 {
        est.flag = Some("no endpoint hits".into());
    }
    Ok(est)
}

/// `ν(x) = E_x[exp(∫₀^τ (ξ(X_s) − λ) ds) 1{τ_peak ≤ τ_boundary}]`, where `τ`
/// is the hitting time of the peak. Walks longer than `horizon` contribute
/// zero and are reported as censored.
#[allow(clippy::too_many_arguments)]
pub fn estimate_eigenfunction(
    x: Vertex,
    peak: Vertex,
    lambda: f64,
    boundary: &[Vertex],
    kappa: f64,
    field: &PotentialField,
    n_samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<MCEstimate> {
    check_common(kappa, 0.0, field, &[x, peak], n_samples, 2)?;
    if !(horizon > 0.0) {
        return Err(PamError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let size = num_vertices(field.n());
    let mut stop = vec![0u8; size];
    for b in boundary {
        if b.index() >= size {
            return Err(PamError::InvalidArgument(format!("vertex {b} out of range")));
        }
        stop[b.index()] = 2;
    }
    stop[peak.index()] = 1;
    let target = format!("eigenfunction nu({x}) with peak {peak}");
    if stop[x.index()] != 0 {
        let v = if x == peak { 1.0 } else { 0.0 };
        return Ok(MCEstimate {
            target,
            mean: v,
            std_error: 0.0,
            n_samples,
            log_mean: v.ln(),
            hits: if x == peak { n_samples } else { 0 },
            censored_fraction: Some(0.0),
            flag: None,
        });
    }
    let (n, xi) = (field.n(), field.values());
    let sums = run_chunks(n_samples, seed, |rng| {
        let mut cur = x.index();
        let mut s = 0.0;
        let mut integral = 0.0;
        loop {
            let hold: f64 = rng.sample::<f64, _>(Exp1) / kappa;
            if s + hold > horizon {
                return Sample::Censored;
            }
            s += hold;
            integral += hold * (xi[cur] - lambda);
            cur ^= 1 << rng.random_range(0..n);
            match stop[cur] {
                1 => return Sample::Weight(integral),
                2 => return Sample::Zero,
                _ => {}
            }
        }
    });
    let mut est = MCEstimate::from_sums(target, &sums);
    let frac = sums.censored as f64 / sums.count as f64;
    est.censored_fraction = Some(frac);
    if frac > 0.5 {
        est.flag = Some("unreliable: more than half of the walks hit the horizon".into());
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::sample_rem;

    #[test]
    fn zero_time_walk() {
        let f = sample_rem(5, 1).unwrap();
        let mut rng = rng::stream(1, 9);
        let p = simulate_walk(Vertex(3), 0.0, 1.0, &f, &mut rng).unwrap();
        assert!(p.jump_times.is_empty());
        assert_eq!(p.integral_xi, 0.0);
    }

    #[test]
    fn walk_path_is_consistent() {
        let f = sample_rem(7, 2).unwrap();
        let mut rng = rng::stream(2, 9);
        for _ in 0..200 {
            let p = simulate_walk(Vertex(9), 3.0, 1.7, &f, &mut rng).unwrap();
            for w in p.visited.windows(2) {
                assert_eq!((w[0].0 ^ w[1].0).count_ones(), 1);
            }
            assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert!((p.recompute_integral(&f) - p.integral_xi).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_jump_count_is_kappa_t() {
        let f = sample_rem(6, 3).unwrap();
        let mut rng = rng::stream(3, 9);
        let m = 100_000;
        let total: usize = (0..m)
            .map(|_| simulate_walk(Vertex(0), 2.0, 1.0, &f, &mut rng).unwrap().jump_times.len())
            .sum();
        let mean = total as f64 / m as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / m as f64).sqrt());
    }

    #[test]
    fn long_walks_equidistribute() {
        let n = 4;
        let f = sample_rem(n, 4).unwrap();
        let mut rng = rng::stream(4, 9);
        let m = 32_000;
        let mut counts = [0usize; 16];
        for _ in 0..m {
            counts[simulate_walk(Vertex(0), 40.0, 1.0, &f, &mut rng).unwrap().end().index()] += 1;
        }
        let e = m as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 15 degrees of freedom, 0.999 quantile
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn constant_potential_is_deterministic() {
        let f = PotentialField::constant(6, 0.0).unwrap();
        let e = estimate_total_mass(Vertex(1), 2.0, 1.0, &f, 1000, 5).unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
        let c = PotentialField::constant(6, 0.3).unwrap();
        let e = estimate_total_mass(Vertex(1), 2.0, 1.0, &c, 1000, 5).unwrap();
        assert_eq!(e.mean, (0.3f64 * 2.0).exp());
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn endpoint_at_time_zero() {
        let f = sample_rem(6, 5).unwrap();
        let a = estimate_endpoint(Vertex(1), Vertex(2), 0.0, 1.0, &f, 10_000, 1).unwrap();
        assert_eq!(a.mean, 0.0);
        assert_eq!(a.flag.as_deref(), Some("no endpoint hits"));
        let b = estimate_endpoint(Vertex(1), Vertex(1), 0.0, 1.0, &f, 10_000, 1).unwrap();
        assert_eq!(b.mean, 1.0);
    }

    #[test]
    fn eigenfunction_trivial_cases() {
        let f = sample_rem(6, 6).unwrap();
        let peak = f.vertex_of_rank(1);
        let b = f.vertex_of_rank(2);
        let e = estimate_eigenfunction(peak, peak, 0.0, &[b], 1.0, &f, 100, 50.0, 1).unwrap();
        assert_eq!(e.mean, 1.0);
        let e = estimate_eigenfunction(b, peak, 0.0, &[b], 1.0, &f, 100, 50.0, 1).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let f = sample_rem(6, 7).unwrap();
        let a = estimate_total_mass(Vertex(0), 1.0, 1.0, &f, 10_000, 11).unwrap();
        let b = estimate_total_mass(Vertex(0), 1.0, 1.0, &f, 10_000, 11).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| estimate_total_mass(Vertex(0), 1.0, 1.0, &f, 10_000, 11).unwrap());
        assert_eq!(a, c);
    }
}
