//! Random potentials `ξ_n` on the hypercube.
//!
//! Two samplers are provided. [`sample_rem`] draws i.i.d. `N(0, n)` values
//! directly. [`sample_coupled`] builds the field from its order statistics:
//! independent `σ_i ~ Exp(rate i)`, partial sums `η_i = σ_i + … + σ_{2^n}`,
//! and values `ψ_n(η_i)` placed on a uniformly random permutation of the
//! vertices. The second route keeps the `σ` sequence, which is what the
//! limiting gaps `ξ_{k,l}` are built from.

mod geometry;
pub mod hexfloat;
mod tail;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

pub use geometry::{level_set_geometry, omega_delta, rate_function, LevelSetGeometry};
pub use tail::{
    check_assumption_l, check_assumption_l_with, gaussian_log_survival, psi_rem, rem_theta,
    AssumptionLReport, TailModel,
};

use crate::error::{PamError, Result};
use crate::hypercube::{check_dim, num_vertices, Vertex};
use crate::rng;

/// How a field was produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    /// Direct i.i.d. `N(0, n)` sampling.
    Rem,
    /// Coupled order-statistics construction under the given tail.
    Coupled { tail: TailModel },
    /// `ξ ≡ c`. Every rank is tied; ordering falls back to vertex index.
    Constant,
    /// Values supplied by the caller.
    Explicit,
}

/// Potential values plus their order statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    n: usize,
    seed: u64,
    kind: PotentialKind,
    values: Vec<f64>,
    order: Vec<u32>,
    rank: Vec<u32>,
    sigma: Option<Vec<f64>>,
}

fn sort_desc(values: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_by(|&a, &b| {
        values[b as usize]
            .total_cmp(&values[a as usize])
            .then(a.cmp(&b))
    });
    order
}

fn check_strict(values: &[f64], order: &[u32]) -> Result<()> {
    for (k, w) in order.windows(2).enumerate() {
        if !(values[w[0] as usize] > values[w[1] as usize]) {
            return Err(PamError::TiedPotential { rank: k + 1 });
        }
    }
    Ok(())
}

fn inverse(order: &[u32]) -> Vec<u32> {
    let mut rank = vec![0u32; order.len()];
    for (k, &x) in order.iter().enumerate() {
        rank[x as usize] = k as u32;
    }
    rank
}

/// i.i.d. `N(0, n)` potential on `{-1,+1}^n`.
pub fn sample_rem(n: usize, seed: u64) -> Result<PotentialField> {
    check_dim(n)?;
    let mut rng = rng::stream(seed, rng::POTENTIAL_STREAM);
    let sd = (n as f64).sqrt();
    let values: Vec<f64> = (0..num_vertices(n))
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        })
        .collect();
    let order = sort_desc(&values);
    check_strict(&values, &order)?;
    Ok(PotentialField {
        n,
        seed,
        kind: PotentialKind::Rem,
        rank: inverse(&order),
        values,
        order,
        sigma: None,
    })
}

/// Coupled construction `ξ_{i,2^n} = ψ_n(σ_i + … + σ_{2^n})`.
pub fn sample_coupled(n: usize, seed: u64, tail: TailModel) -> Result<PotentialField> {
    check_dim(n)?;
    tail.validate()?;
    let size = num_vertices(n);
    let mut rng = rng::stream(seed, rng::POTENTIAL_STREAM);
    let sigma: Vec<f64> = (1..=size)
        .map(|i| {
            let e: f64 = rng.sample(Exp1);
            e / i as f64
        })
        .collect();
    let eta = suffix_sums(&sigma);
    let mut order: Vec<u32> = (0..size as u32).collect();
    order.shuffle(&mut rng);
    let mut values = vec![0.0; size];
    for (k, &x) in order.iter().enumerate() {
        values[x as usize] = tail.psi(eta[k], n)?;
    }
    check_strict(&values, &order)?;
    Ok(PotentialField {
        n,
        seed,
        kind: PotentialKind::Coupled { tail },
        rank: inverse(&order),
        values,
        order,
        sigma: Some(sigma),
    })
}

/// `η_i = σ_i + … + σ_N`, accumulated from the end.
fn suffix_sums(sigma: &[f64]) -> Vec<f64> {
    let mut eta = vec![0.0; sigma.len()];
    let mut acc = 0.0;
    for i in (0..sigma.len()).rev() {
        acc += sigma[i];
        eta[i] = acc;
    }
    eta
}

impl PotentialField {
    /// Field from explicit values; ties are rejected.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if values.len() != num_vertices(n) {
            return Err(PamError::InvalidArgument(format!(
                "expected {} potential values, got {}",
                num_vertices(n),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PamError::InvalidArgument("potential values must be finite".into()));
        }
        let order = sort_desc(&values);
        check_strict(&values, &order)?;
        Ok(Self {
            n,
            seed: 0,
            kind: PotentialKind::Explicit,
            rank: inverse(&order),
            values,
            order,
            sigma: None,
        })
    }

    /// `ξ ≡ c`. The order array lists vertices by index.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        check_dim(n)?;
        let order: Vec<u32> = (0..num_vertices(n) as u32).collect();
        Ok(Self {
            n,
            seed: 0,
            kind: PotentialKind::Constant,
            rank: order.clone(),
            values: vec![c; num_vertices(n)],
            order,
            sigma: None,
        })
    }

    /// Same field with every value shifted by `c`. Order and `σ` are kept.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v += c;
        }
        if !matches!(out.kind, PotentialKind::Constant) {
            out.kind = PotentialKind::Explicit;
            out.sigma = None;
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: Vertex) -> f64 {
        self.values[x.index()]
    }

    /// Vertices by decreasing potential.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    /// `true` when the order statistics are not strict (constant fields).
    pub fn has_ties(&self) -> bool {
        matches!(self.kind, PotentialKind::Constant)
    }

    /// `x_{k,2^n}` for 1-based rank `k`.
    pub fn vertex_of_rank(&self, k: usize) -> Vertex {
        assert!(k >= 1 && k <= self.order.len(), "rank {k} out of range");
        Vertex(self.order[k - 1])
    }

    /// `ξ_{k,2^n}` for 1-based rank `k`.
    pub fn top(&self, k: usize) -> f64 {
        self.values[self.vertex_of_rank(k).index()]
    }

    /// 1-based rank of `x`.
    pub fn rank_of(&self, x: Vertex) -> usize {
        self.rank[x.index()] as usize + 1
    }

    /// `Γ_l = {x_{1,2^n}, …, x_{l,2^n}}`.
    pub fn gamma(&self, l: usize) -> Vec<Vertex> {
        (1..=l.min(self.order.len()))
            .map(|k| self.vertex_of_rank(k))
            .collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.order[0] as usize]
    }

    /// Tail model behind the field, when known.
    pub fn tail(&self) -> Option<TailModel> {
        match self.kind {
            PotentialKind::Rem => Some(TailModel::Gaussian),
            PotentialKind::Coupled { tail } => Some(tail),
            _ => None,
        }
    }

    /// `η(x)` for every vertex: partial sums of `σ` for coupled fields,
    /// `φ_n(ξ(x))` for direct REM fields.
    pub fn eta(&self) -> Result<Vec<f64>> {
        match (&self.sigma, self.kind) {
            (Some(sigma), _) => {
                let sums = suffix_sums(sigma);
                let mut eta = vec![0.0; self.values.len()];
                for (k, &x) in self.order.iter().enumerate() {
                    eta[x as usize] = sums[k];
                }
                Ok(eta)
            }
            (None, PotentialKind::Rem) => Ok(self
                .values
                .iter()
                .map(|&v| TailModel::Gaussian.phi(v, self.n))
                .collect()),
            _ => Err(PamError::InvalidArgument(
                "eta is only available for REM or coupled fields".into(),
            )),
        }
    }

    /// Checks every structural invariant of the field.
    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        let size = num_vertices(self.n);
        if self.values.len() != size || self.order.len() != size {
            return Err(PamError::InvalidArgument("field arrays have the wrong length".into()));
        }
        let mut seen = vec![false; size];
        for &x in &self.order {
            if x as usize >= size || seen[x as usize] {
                return Err(PamError::InvalidArgument("order is not a permutation".into()));
            }
            seen[x as usize] = true;
        }
        if !self.has_ties() {
            check_strict(&self.values, &self.order)?;
        }
        if let (Some(sigma), PotentialKind::Coupled { tail }) = (&self.sigma, self.kind) {
            if sigma.len() != size {
                return Err(PamError::InvalidArgument("sigma has the wrong length".into()));
            }
            let eta = suffix_sums(sigma);
            for (k, &x) in self.order.iter().enumerate() {
                if tail.psi(eta[k], self.n)? != self.values[x as usize] {
                    return Err(PamError::InvalidArgument(format!(
                        "value at rank {} does not match psi(eta)",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PotentialFieldJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PotentialFieldJson = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// Limiting gap `ξ_{k,l} = g(σ_k + … + σ_{l−1})`; zero when `k ≥ l`.
pub fn gap_limit(k: usize, l: usize, field: &PotentialField, tail: &TailModel) -> Result<f64> {
    let sigma = field.sigma().ok_or(PamError::MissingSigma)?;
    if k == 0 || l == 0 {
        return Err(PamError::InvalidArgument("ranks are 1-based".into()));
    }
    if k >= l {
        return Ok(0.0);
    }
    if l - 1 > sigma.len() {
        return Err(PamError::InvalidArgument(format!("rank {l} exceeds field size")));
    }
    let c: f64 = sigma[k - 1..l - 1].iter().sum();
    Ok(tail.gap(c))
}

/// On-disk form. Floating-point arrays are hex-float strings so that the
/// round trip is bit-exact.
#[derive(Serialize, Deserialize)]
struct PotentialFieldJson {
    n: usize,
    seed: u64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailModel>,
    values: Vec<String>,
    order: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<String>>,
}

impl From<&PotentialField> for PotentialFieldJson {
    fn from(f: &PotentialField) -> Self {
        let (kind, tail) = match f.kind {
            PotentialKind::Rem => ("rem", None),
            PotentialKind::Coupled { tail } => ("coupled", Some(tail)),
            PotentialKind::Constant => ("constant", None),
            PotentialKind::Explicit => ("explicit", None),
        };
        PotentialFieldJson {
            n: f.n,
            seed: f.seed,
            kind: kind.to_string(),
            tail,
            values: f.values.iter().map(|&v| hexfloat::format(v)).collect(),
            order: f.order.clone(),
            sigma: f
                .sigma
                .as_ref()
                .map(|s| s.iter().map(|&v| hexfloat::format(v)).collect()),
        }
    }
}

fn parse_floats(v: &[String]) -> Result<Vec<f64>> {
    v.iter()
        .map(|s| {
            hexfloat::parse(s)
                .ok_or_else(|| PamError::InvalidArgument(format!("bad hex-float literal {s:?}")))
        })
        .collect()
}

impl TryFrom<PotentialFieldJson> for PotentialField {
    type Error = PamError;

    fn try_from(doc: PotentialFieldJson) -> Result<Self> {
        let kind = match (doc.kind.as_str(), doc.tail) {
            ("rem", _) => PotentialKind::Rem,
            ("coupled", Some(tail)) => PotentialKind::Coupled { tail },
            ("constant", _) => PotentialKind::Constant,
            ("explicit", _) => PotentialKind::Explicit,
            (k, _) => {
                return Err(PamError::InvalidArgument(format!(
                    "unknown or incomplete potential kind {k:?}"
                )))
            }
        };
        let values = parse_floats(&doc.values)?;
        let sigma = doc.sigma.as_deref().map(parse_floats).transpose()?;
        let field = PotentialField {
            n: doc.n,
            seed: doc.seed,
            kind,
            rank: inverse(&doc.order),
            values,
            order: doc.order,
            sigma,
        };
        field.validate()?;
        Ok(field)
    }
}
