//! Tail functions of the single-site potential law.
//!
//! For a continuous law `G_n`, `φ_n(r) = log(1/(1 − G_n(r)))` maps the
//! potential to a mean-one exponential variable and `ψ_n` is its inverse.
//! The growth function `f`, the gap function `g`, `θ = f(log 2)` and the
//! left-tail level `l_n` describe the extremes.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{PamError, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_2: f64 = std::f64::consts::LN_2;

/// `θ = √(2 log 2)` for the random energy model.
pub fn rem_theta() -> f64 {
    (2.0 * LN_2).sqrt()
}

/// Law of `ξ_n(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tail", rename_all = "kebab-case")]
pub enum TailModel {
    /// `N(0, n)`: the random energy model.
    Gaussian,
    /// `Exp(1)`, independent of `n`; `ψ_n` is the identity.
    Exponential,
    /// `P(ξ_n > r) = exp(−(r / n^{1−1/p})^p)` for `r ≥ 0`, shape `p > 0`.
    Weibull { shape: f64 },
}

impl TailModel {
    pub fn rem() -> Self {
        TailModel::Gaussian
    }

    pub fn validate(&self) -> Result<()> {
        if let TailModel::Weibull { shape } = *self {
            if !(shape > 0.0 && shape.is_finite()) {
                return Err(PamError::InvalidArgument(format!(
                    "Weibull shape must be positive, got {shape}"
                )));
            }
        }
        Ok(())
    }

    fn weibull_shape(&self) -> Option<f64> {
        match *self {
            TailModel::Gaussian => None,
            TailModel::Exponential => Some(1.0),
            TailModel::Weibull { shape } => Some(shape),
        }
    }

    fn weibull_scale(shape: f64, n: usize) -> f64 {
        (n as f64).powf(1.0 - 1.0 / shape)
    }

    /// `G_n(r)`.
    pub fn cdf(&self, r: f64, n: usize) -> f64 {
        match self.weibull_shape() {
            None => {
                let z = r / (n as f64).sqrt();
                0.5 * erfc(-z / SQRT_2)
            }
            Some(p) => {
                if r <= 0.0 {
                    0.0
                } else {
                    -(-(r / Self::weibull_scale(p, n)).powf(p)).exp_m1()
                }
            }
        }
    }

    /// `φ_n(r) = log(1/(1 − G_n(r)))`.
    pub fn phi(&self, r: f64, n: usize) -> f64 {
        match self.weibull_shape() {
            None => -gaussian_log_survival(r / (n as f64).sqrt()),
            Some(p) => {
                if r <= 0.0 {
                    0.0
                } else {
                    (r / Self::weibull_scale(p, n)).powf(p)
                }
            }
        }
    }

    /// `ψ_n(s)`, the left-continuous inverse of `φ_n`, for `s > 0`.
    pub fn psi(&self, s: f64, n: usize) -> Result<f64> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(PamError::InvalidArgument(format!(
                "psi is defined for finite s > 0, got {s}"
            )));
        }
        match self.weibull_shape() {
            None => psi_rem(s, n),
            Some(p) => Ok(Self::weibull_scale(p, n) * s.powf(1.0 / p)),
        }
    }

    /// Growth function `f` with `ψ_n(an) ∼ f(a) n`.
    pub fn growth(&self, a: f64) -> f64 {
        match self.weibull_shape() {
            None => (2.0 * a).sqrt(),
            Some(p) => a.powf(1.0 / p),
        }
    }

    pub fn theta(&self) -> f64 {
        self.growth(LN_2)
    }

    /// Gap function `g`: the limit of `ψ_n(s_n + c) − ψ_n(s_n)` along
    /// `s_n ∼ n log 2`, i.e. `c · f'(log 2)`.
    pub fn gap(&self, c: f64) -> f64 {
        match self.weibull_shape() {
            None => c / self.theta(),
            Some(p) => c * LN_2.powf(1.0 / p - 1.0) / p,
        }
    }

    /// Default left-tail level `l_n` (`n^{3/4}`).
    pub fn default_left_level(&self, n: usize) -> f64 {
        (n as f64).powf(0.75)
    }
}

/// `log P(Z ≥ z)` for standard normal `Z`, accurate in both tails.
pub fn gaussian_log_survival(z: f64) -> f64 {
    if z > MILLS_SWITCH {
        log_pdf(z) + mills_ratio(z).ln()
    } else if z > 0.0 {
        (0.5 * erfc(z / SQRT_2)).ln()
    } else {
        (-0.5 * erfc(-z / SQRT_2)).ln_1p()
    }
}

const MILLS_SWITCH: f64 = 8.0;

fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Mills ratio `P(Z ≥ z)/φ(z)` by its continued fraction, for large `z`.
fn mills_ratio(z: f64) -> f64 {
    // 1/(z+ 1/(z+ 2/(z+ 3/(z+ ...)))), evaluated bottom-up
    let mut tail = z;
    for k in (1..=60).rev() {
        tail = z + k as f64 / tail;
    }
    1.0 / tail
}

/// Hazard rate `φ(z)/P(Z ≥ z)` of the standard normal.
fn gaussian_hazard(z: f64) -> f64 {
    if z > MILLS_SWITCH {
        return 1.0 / mills_ratio(z);
    }
    (log_pdf(z) - gaussian_log_survival(z)).exp()
}

/// `ψ_n(s)` for the `N(0, n)` law: the `r` solving `−log P(ξ ≥ r) = s`.
///
/// Solved by a bracketed Newton iteration on `z = r/√n`, seeded from
/// `erfc⁻¹`; never uses the large-`n` expansion.
pub fn psi_rem(s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(PamError::InvalidArgument(format!(
            "psi_rem requires finite s > 0, got {s}"
        )));
    }
    if n == 0 {
        return Err(PamError::InvalidArgument("n must be positive".into()));
    }
    let target = -s;
    // initial guess from the quantile
    let p = (-s).exp();
    let mut z = if p < 0.5 {
        SQRT_2 * erfc_inv(2.0 * p)
    } else {
        -SQRT_2 * erfc_inv(-2.0 * (-s).exp_m1())
    };
    if !z.is_finite() {
        z = (2.0 * s).sqrt();
    }
    let h = |z: f64| gaussian_log_survival(z) - target; // decreasing in z
    let (mut lo, mut hi) = (z - 0.5, z + 0.5);
    let mut step = 0.5;
    while h(lo) < 0.0 {
        step *= 2.0;
        lo -= step;
    }
    step = 0.5;
    while h(hi) > 0.0 {
        step *= 2.0;
        hi += step;
    }
    for _ in 0..200 {
        let hz = h(z);
        if hz == 0.0 {
            break;
        }
        if hz > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        // d/dz log S(z) = −hazard(z)
        let newton = z + hz / gaussian_hazard(z);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - z).abs() <= 1e-15 * (1.0 + z.abs()) {
            z = next;
            break;
        }
        z = next;
    }
    Ok(z * (n as f64).sqrt())
}

/// Outcome of the left-tail summability check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionLReport {
    /// `n · G_n(−l_n)` for `n = 1..=n_max`.
    pub terms: Vec<f64>,
    /// Running sums of `terms`.
    pub partial_sums: Vec<f64>,
    /// Mean ratio `t_{n+1}/t_n` over the second half of the range.
    pub tail_ratio: f64,
    /// Terms do not decay in the tail (ratio test fails).
    pub divergent: bool,
}

/// Partial sums of `n G_n(−l_n)` for an arbitrary `n ↦ G_n(−l_n)`.
pub fn check_assumption_l_with<F>(n_max: usize, left_mass: F) -> AssumptionLReport
where
    F: Fn(usize) -> f64,
{
    let terms: Vec<f64> = (1..=n_max).map(|n| n as f64 * left_mass(n)).collect();
    let partial_sums = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let start = (n_max / 2).max(1);
    let ratios: Vec<f64> = (start..n_max)
        .filter(|&i| terms[i - 1] > 0.0)
        .map(|i| terms[i] / terms[i - 1])
        .collect();
    let tail_ratio = if ratios.is_empty() {
        0.0
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    AssumptionLReport {
        terms,
        partial_sums,
        tail_ratio,
        divergent: tail_ratio >= 1.0,
    }
}

/// Left-tail check for `tail` with level `l_n = level(n)`.
pub fn check_assumption_l<L>(tail: &TailModel, n_max: usize, level: L) -> AssumptionLReport
where
    L: Fn(usize) -> f64,
{
    check_assumption_l_with(n_max, |n| tail.cdf(-level(n), n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_at_the_median_is_zero() {
        assert!(psi_rem(LN_2, 1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psi_phi_round_trip() {
        let t = TailModel::Gaussian;
        for r in [-2.0, 0.0, 3.0] {
            let s = t.phi(r, 4);
            assert!((psi_rem(s, 4).unwrap() - r).abs() < 1e-9, "r = {r}");
        }
        for r in [-12.0, -0.3, 7.5, 25.0] {
            let s = t.phi(r, 16);
            assert!((psi_rem(s, 16).unwrap() - r).abs() < 1e-9 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn psi_rem_growth_matches_sqrt_2a() {
        let a = LN_2;
        let ratio = |n: usize| psi_rem(a * n as f64, n).unwrap() / ((2.0 * a).sqrt() * n as f64);
        // exact Gaussian quantile at 2^-16, scaled by sqrt(16)
        assert!((ratio(16) - 0.885_326_531_033_14).abs() < 1e-9);
        let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| 1.0 - ratio(n)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[1] < 0.08);
    }

    #[test]
    fn psi_rem_is_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..400 {
            let s = 1e-6 * 1.05f64.powi(k);
            let v = psi_rem(s, 9).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn psi_rejects_nonpositive() {
        assert!(psi_rem(0.0, 4).is_err());
        assert!(psi_rem(-1.0, 4).is_err());
        assert!(TailModel::Exponential.psi(0.0, 4).is_err());
    }

    #[test]
    fn exponential_tail_is_identity() {
        let t = TailModel::Exponential;
        for s in [1e-9, 0.3, 5.0, 40.0] {
            assert_eq!(t.psi(s, 7).unwrap(), s);
            assert!((t.phi(s, 7) - s).abs() < 1e-15);
        }
        assert_eq!(t.theta(), LN_2);
        assert_eq!(t.gap(0.7), 0.7);
    }

    #[test]
    fn weibull_round_trip_and_growth() {
        let t = TailModel::Weibull { shape: 2.0 };
        for s in [0.01, 1.0, 11.0] {
            let r = t.psi(s, 12).unwrap();
            assert!((t.phi(r, 12) - s).abs() < 1e-12 * (1.0 + s));
        }
        let n = 50;
        let a = 0.4;
        assert!((t.psi(a * n as f64, n).unwrap() / n as f64 - t.growth(a)).abs() < 1e-12);
    }

    #[test]
    fn gap_function_properties() {
        for t in [
            TailModel::Gaussian,
            TailModel::Exponential,
            TailModel::Weibull { shape: 1.7 },
        ] {
            assert_eq!(t.gap(0.0), 0.0);
            assert!(t.gap(0.5) > 0.0);
            assert!(t.gap(-0.5) < 0.0);
            assert!(t.growth(0.3) < t.growth(0.6));
        }
        // REM: g(c) = c / θ
        assert!((TailModel::Gaussian.gap(1.0) - 1.0 / rem_theta()).abs() < 1e-15);
    }

    #[test]
    fn rem_gap_is_the_derivative_of_psi_near_n_log2() {
        // finite difference of ψ_n at s = n log 2 tends to g(1)
        let g = TailModel::Gaussian.gap(1.0);
        let mut errs = Vec::new();
        for n in [50usize, 400, 3200] {
            let s = n as f64 * LN_2;
            let d = psi_rem(s + 0.5, n).unwrap() - psi_rem(s - 0.5, n).unwrap();
            errs.push((d - g).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 0.03);
    }

    #[test]
    fn assumption_l_rem_three_quarter_power() {
        let rep = check_assumption_l(&TailModel::Gaussian, 200, |n| (n as f64).powf(0.75));
        assert!(!rep.divergent);
        // bound terms n·exp(−l_n²/(2n)) = n·exp(−√n/2) peak at n = 16
        let bound = |n: f64| n * (-(n.sqrt()) / 2.0).exp();
        for n in 16..200 {
            assert!(bound(n as f64 + 1.0) < bound(n as f64));
        }
        for n in 1..=200 {
            assert!(rep.terms[n - 1] <= bound(n as f64) + 1e-15);
        }
        // exact terms decrease beyond the peak
        for n in 20..200 {
            assert!(rep.terms[n] < rep.terms[n - 1]);
        }
    }

    #[test]
    fn assumption_l_constant_mass_diverges() {
        let rep = check_assumption_l_with(100, |_| 1.0);
        assert!(rep.divergent);
        assert!((rep.partial_sums[99] - 5050.0).abs() < 1e-9);
    }

    #[test]
    fn assumption_l_linear_level_is_summable() {
        let rep = check_assumption_l(&TailModel::Gaussian, 120, |n| n as f64);
        assert!(!rep.divergent);
        for n in 1..=120 {
            let nf = n as f64;
            assert!(rep.terms[n - 1] <= nf * (-nf / 2.0).exp() + 1e-15);
        }
    }
}
