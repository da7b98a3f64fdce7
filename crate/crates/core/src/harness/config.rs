//! Declarative experiment description.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PamError, Result};
use crate::hypercube::check_dim;
use crate::potential::{gap_limit, sample_coupled, sample_rem, PotentialField, TailModel};

/// Which potential to draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    /// Direct i.i.d. `N(0, n)`.
    Rem,
    /// `N(0, n)` through the coupled construction, so that `σ` is available.
    CoupledRem,
    /// `ψ = identity`, i.e. i.i.d. `Exp(1)` values.
    CoupledExponential,
    /// Weibull tail `P(ξ > r) = exp(−(r/n^{1−1/p})^p)`.
    CustomTail { shape: f64 },
    /// `ξ ≡ value`; a degenerate control with no extremal structure.
    Flat { value: f64 },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::CoupledRem
    }
}

impl PotentialSpec {
    /// Tail law of the potential; `None` for flat fields.
    pub fn tail(&self) -> Option<TailModel> {
        match *self {
            Self::Rem | Self::CoupledRem => Some(TailModel::Gaussian),
            Self::CoupledExponential => Some(TailModel::Exponential),
            Self::CustomTail { shape } => Some(TailModel::Weibull { shape }),
            Self::Flat { .. } => None,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PotentialField> {
        match (self, self.tail()) {
            (Self::Rem, _) => sample_rem(n, seed),
            (Self::Flat { value }, _) => PotentialField::constant(n, *value),
            (_, Some(tail)) => sample_coupled(n, seed, tail),
            (_, None) => unreachable!("every non-flat kind has a tail"),
        }
    }

    /// Parses the CLI spelling: `rem`, `coupled-rem`, `coupled-exponential`,
    /// `custom-tail:<shape>`, `flat:<value>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || PamError::InvalidArgument(format!("unknown potential {s:?}"));
        let num = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(bad)
        };
        match s {
            "rem" => Ok(Self::Rem),
            "coupled-rem" => Ok(Self::CoupledRem),
            "coupled-exponential" => Ok(Self::CoupledExponential),
            _ if s.starts_with("custom-tail:") => Ok(Self::CustomTail {
                shape: num("custom-tail:")?,
            }),
            _ if s.starts_with("flat:") => Ok(Self::Flat { value: num("flat:")? }),
            _ => Err(bad()),
        }
    }
}

/// `c_n = ½ n log n`.
pub fn c_n(n: usize) -> f64 {
    0.5 * n as f64 * (n as f64).ln()
}

/// Critical scales `α* = 1/ξ_{1,k}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaStar {
    /// From the limiting gap when `σ` is available, otherwise the finite gap.
    pub value: f64,
    /// From the finite-`n` gap `ξ_{1,2^n} − ξ_{k,2^n}`.
    pub finite: f64,
}

pub fn alpha_star(field: &PotentialField, k: usize, tail: Option<TailModel>) -> Result<AlphaStar> {
    if k < 2 || k > field.values().len() {
        return Err(PamError::InvalidArgument(format!("rank k = {k} must be at least 2")));
    }
    if field.has_ties() {
        return Err(PamError::InvalidArgument("potential has no strict order statistics".into()));
    }
    let finite = 1.0 / (field.top(1) - field.top(k));
    let value = match (field.sigma(), tail) {
        (Some(_), Some(tail)) => 1.0 / gap_limit(1, k, field, &tail)?,
        _ => finite,
    };
    Ok(AlphaStar { value, finite })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub kappa: f64,
    pub potential: PotentialSpec,
    pub seeds: Vec<u64>,
    pub ranks: Vec<usize>,
    /// `t = α c_n` for each grid value.
    pub alpha_grid: Vec<f64>,
    /// When set, grid values are multiples of each cell's `α*`.
    pub alpha_relative: bool,
    pub eig_tol: f64,
    pub evolve_tol: f64,
    /// Dimensions for the eigenvalue and decay lemma checks.
    pub lemma_ns: Vec<usize>,
    /// Dimension for the dense spectral-bound check (at most 10).
    pub spectral_bound_n: usize,
    pub spectral_bound_times: Vec<f64>,
    pub growth_csv: PathBuf,
    pub localization_csv: PathBuf,
    pub lemma_report: PathBuf,
}

/// `count` points spaced geometrically from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (r * i as f64).exp()).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 14,
            kappa: 1.0,
            potential: PotentialSpec::default(),
            seeds: (0..20).collect(),
            ranks: vec![2],
            alpha_grid: geometric_grid(0.1, 10.0, 15),
            alpha_relative: true,
            eig_tol: crate::spectral::DEFAULT_TOL,
            evolve_tol: crate::evolution::DEFAULT_TOL,
            lemma_ns: vec![12, 14, 16],
            spectral_bound_n: 8,
            spectral_bound_times: vec![1.0, 5.0],
            growth_csv: PathBuf::from("pam_growth.csv"),
            localization_csv: PathBuf::from("pam_localization.csv"),
            lemma_report: PathBuf::from("pam_lemmas.json"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        for &m in &self.lemma_ns {
            check_dim(m)?;
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(PamError::NonPositiveKappa(self.kappa));
        }
        if let Some(tail) = self.potential.tail() {
            tail.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(PamError::InvalidArgument("seed list is empty".into()));
        }
        if self.ranks.iter().any(|&k| k < 2) {
            return Err(PamError::InvalidArgument("ranks must be at least 2".into()));
        }
        let grid_ok = !self.alpha_grid.is_empty()
            && self.alpha_grid.iter().all(|a| a.is_finite() && *a > 0.0)
            && self.alpha_grid.windows(2).all(|w| w[0] < w[1]);
        if !grid_ok {
            return Err(PamError::InvalidArgument(
                "alpha_grid must be non-empty, positive and strictly increasing".into(),
            ));
        }
        if !(self.eig_tol > 0.0) || !(self.evolve_tol > 0.0) {
            return Err(PamError::InvalidArgument("tolerances must be positive".into()));
        }
        if self.spectral_bound_n == 0 || self.spectral_bound_n > crate::spectral::DENSE_MAX_DIM {
            return Err(PamError::InvalidArgument(format!(
                "spectral_bound_n must be in 1..={}",
                crate::spectral::DENSE_MAX_DIM
            )));
        }
        Ok(())
    }

    /// Absolute `α` values for a cell with critical scale `star`.
    pub fn alphas(&self, star: f64) -> Vec<f64> {
        if self.alpha_relative {
            self.alpha_grid.iter().map(|a| a * star).collect()
        } else {
            self.alpha_grid.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_n_value() {
        assert_eq!(c_n(14), 7.0 * 14f64.ln());
        assert_eq!(c_n(1), 0.0);
    }

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
        assert_eq!(c.alpha_grid.len(), 15);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = ExperimentConfig::from_json(r#"{"n": 8, "potential": {"kind": "rem"}}"#).unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.potential, PotentialSpec::Rem);
        assert_eq!(c.kappa, 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"alpha_grid": [1.0, 0.5]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"ranks": [1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kappa": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn potential_spellings() {
        assert_eq!(PotentialSpec::parse("rem").unwrap(), PotentialSpec::Rem);
        assert_eq!(
            PotentialSpec::parse("custom-tail:1.5").unwrap(),
            PotentialSpec::CustomTail { shape: 1.5 }
        );
        assert_eq!(PotentialSpec::parse("flat:0").unwrap(), PotentialSpec::Flat { value: 0.0 });
        assert!(PotentialSpec::parse("pareto").is_err());
    }

    #[test]
    fn alpha_star_uses_limit_gap_for_coupled_fields() {
        let f = PotentialSpec::CoupledRem.sample(10, 3).unwrap();
        let a = alpha_star(&f, 2, Some(TailModel::Gaussian)).unwrap();
        let s1 = f.sigma().unwrap()[0];
        assert!((a.value - crate::potential::rem_theta() / s1).abs() < 1e-12);
        assert!((a.finite - 1.0 / (f.top(1) - f.top(2))).abs() < 1e-12);
        let r = PotentialSpec::Rem.sample(10, 3).unwrap();
        let b = alpha_star(&r, 2, Some(TailModel::Gaussian)).unwrap();
        assert_eq!(b.value, b.finite);
    }
}
