//! Geometry of high level sets of `η`.

use std::f64::consts::LN_2;

use super::PotentialField;
use crate::error::{PamError, Result};

/// Separation statistics of `A = {x : η(x) ≥ nδ log 2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetGeometry {
    /// Size of `A`.
    pub size: usize,
    /// Minimum pairwise Hamming distance in `A`, or `n + 1` if `|A| < 2`.
    pub d_min: usize,
    /// `d(x_1, x_2) / n` for the two highest vertices.
    pub top_pair_ratio: f64,
}

impl LevelSetGeometry {
    pub fn is_degenerate(&self, n: usize) -> bool {
        self.d_min == n + 1
    }
}

pub fn level_set_geometry(field: &PotentialField, delta: f64) -> Result<LevelSetGeometry> {
    if !(delta > 0.5 && delta < 1.0) {
        return Err(PamError::InvalidArgument(format!(
            "delta must lie in (1/2, 1), got {delta}"
        )));
    }
    let n = field.n();
    let eta = field.eta()?;
    let level = n as f64 * delta * LN_2;
    let set: Vec<u32> = field
        .order()
        .iter()
        .copied()
        .filter(|&x| eta[x as usize] >= level)
        .collect();
    let mut d_min = n + 1;
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            d_min = d_min.min((a ^ b).count_ones() as usize);
        }
    }
    let (x1, x2) = (field.order()[0], field.order()[1]);
    Ok(LevelSetGeometry {
        size: set.len(),
        d_min,
        top_pair_ratio: (x1 ^ x2).count_ones() as f64 / n as f64,
    })
}

/// Cramér rate function of a fair coin, `I(x) = x log x + (1−x) log(1−x) + log 2`.
pub fn rate_function(x: f64) -> f64 {
    let xlogx = |t: f64| if t > 0.0 { t * t.ln() } else { 0.0 };
    xlogx(x) + xlogx(1.0 - x) + LN_2
}

/// Root `ω ∈ (1/2, 1]` of `I(ω) = 2(1−δ) log 2`.
pub fn omega_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.5 && delta < 1.0) {
        return Err(PamError::InvalidArgument(format!(
            "delta must lie in (1/2, 1), got {delta}"
        )));
    }
    let target = 2.0 * (1.0 - delta) * LN_2;
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if rate_function(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
