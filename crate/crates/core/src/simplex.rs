//! Points of the standard simplex and the little geometry the rest of the
//! crate needs on it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating user-supplied states.
pub const STATE_TOL: f64 = 1e-9;

/// Largest drift accepted (and repaired) after a numerical integration step.
pub const DRIFT_TOL: f64 = 1e-7;

/// Strategy frequencies: non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PopulationState {
    weights: Vec<f64>,
}

impl PopulationState {
    /// Validates `v` as a simplex point.
    ///
    /// Entries in `[-tol, 0)` are clamped to zero and the vector is then
    /// renormalized; input that is already non-negative is kept bit for bit.
    pub fn validate(v: &[f64], tol: f64) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::TooFewStrategies(v.len()));
        }
        if let Some(index) = v.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(index));
        }
        if let Some(index) = v.iter().position(|&w| w < -tol) {
            return Err(Error::NegativeEntry { index, value: v[index], tol });
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::SumMismatch { sum, tol });
        }
        if v.iter().all(|&w| w >= 0.0) {
            return Ok(Self { weights: v.to_vec() });
        }
        Ok(Self { weights: clamp_and_normalize(v) })
    }

    /// Clamps negatives and always renormalizes. Used after integration steps,
    /// where the stored state must sum to one as exactly as floating point allows.
    pub fn repaired(v: &[f64], tol: f64) -> Result<Self> {
        let state = Self::validate(v, tol)?;
        Ok(Self { weights: clamp_and_normalize(&state.weights) })
    }

    /// The barycenter of the `n`-strategy simplex.
    pub fn barycenter(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    /// The pure state where everybody plays `i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    pub fn is_interior(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }
}

impl std::ops::Index<usize> for PopulationState {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

impl AsRef<[f64]> for PopulationState {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

/// Validates `v` with tolerance `tol`; see [`PopulationState::validate`].
pub fn validate_state(v: &[f64], tol: f64) -> Result<PopulationState> {
    PopulationState::validate(v, tol)
}

fn clamp_and_normalize(v: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = v.iter().map(|&w| w.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    clamped.into_iter().map(|w| w / sum).collect()
}

/// Orthogonal projection onto the hyperplane of zero-sum vectors,
/// `v - mean(v) * 1`.
pub fn tangent_projection(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|&c| c - mean).collect()
}

/// Groups of strategies whose frequencies are summed before measuring,
/// e.g. `[[0], [1], [2, 3]]` merges a twin pair into one coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Aggregation {
    groups: Vec<Vec<usize>>,
}

impl Aggregation {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        Self { groups }
    }

    /// Identity on `n` strategies except that `merged` collapses into the
    /// position of its smallest member.
    pub fn merging(n: usize, merged: &[usize]) -> Self {
        let first = merged.iter().copied().min();
        let mut groups = Vec::new();
        for i in 0..n {
            if Some(i) == first {
                groups.push(merged.to_vec());
            } else if !merged.contains(&i) {
                groups.push(vec![i]);
            }
        }
        Self { groups }
    }

    /// The 4-strategy twin aggregation `(x1, x2, x3 + x4)`.
    pub fn twin_of_third() -> Self {
        Self::merging(4, &[2, 3])
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn source_arity(&self) -> usize {
        self.groups.iter().flatten().map(|&i| i + 1).max().unwrap_or(0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| x[i]).sum())
            .collect()
    }
}

/// Euclidean distance between `x` and `p`, after summing the groups of `mask`.
///
/// `p` may be given either in the original coordinates (same length as `x`,
/// then it is aggregated too) or directly in the aggregated coordinates.
pub fn distance_to_center(x: &[f64], p: &[f64], mask: Option<&Aggregation>) -> f64 {
    let (xa, pa) = match mask {
        None => (x.to_vec(), p.to_vec()),
        Some(agg) => {
            let xa = agg.apply(x);
            let pa = if p.len() == x.len() { agg.apply(p) } else { p.to_vec() };
            (xa, pa)
        }
    };
    assert_eq!(xa.len(), pa.len(), "center and state live in different simplices");
    xa.iter()
        .zip(&pa)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Uniform sample from the open simplex (normalized exponential spacings).
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PopulationState {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            // 1 - u lies in (0, 1], so the log is finite
            let u: f64 = rng.random();
            (-(1.0 - u).ln()).max(f64::MIN_POSITIVE)
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    PopulationState { weights: w }
}

/// All points of the simplex whose coordinates are multiples of `1/divisions`.
pub fn barycentric_grid(n: usize, divisions: usize) -> Vec<PopulationState> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; n];
    fill_grid(&mut counts, 0, divisions, divisions, &mut out);
    out
}

fn fill_grid(
    counts: &mut Vec<usize>,
    pos: usize,
    remaining: usize,
    divisions: usize,
    out: &mut Vec<PopulationState>,
) {
    let n = counts.len();
    if pos == n - 1 {
        counts[pos] = remaining;
        let weights = counts.iter().map(|&c| c as f64 / divisions as f64).collect();
        out.push(PopulationState { weights });
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        fill_grid(counts, pos + 1, remaining - c, divisions, out);
    }
}
