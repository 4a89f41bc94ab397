//! Payoff functions `F: X -> R^N`: matrix games, constant games, the
//! hypnodisk family, and the twin / feeble-twin transforms.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{barycentric_grid, sample_uniform, tangent_projection, PopulationState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Matrix,
    Constant,
    Hypnodisk,
    Derived,
}

/// Symmetric matrix game with linear payoffs `F_i(x) = (A x)_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct MatrixGame {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for MatrixGame {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        MatrixGame::new(raw.matrix)
    }
}

impl From<MatrixGame> for RawMatrix {
    fn from(g: MatrixGame) -> Self {
        RawMatrix { matrix: g.rows() }
    }
}

impl MatrixGame {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::TooFewStrategies(n));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::Arity { expected: n, got: row.len() });
            }
            if row.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidParameter("matrix entries must be finite".into()));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { n, entries })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.entries.chunks(self.n).enumerate() {
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Parameters of the hypnodisk game: equilibrium `center`, inner radius
/// `inner` and outer radius `outer` with `0 < inner < outer < 1/sqrt(6)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypnodiskParams {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl HypnodiskParams {
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        let p = Self { center, inner, outer };
        p.validate()?;
        Ok(p)
    }

    /// Hypnodisk centred at the barycenter.
    pub fn barycentric(inner: f64, outer: f64) -> Result<Self> {
        Self::new(vec![1.0 / 3.0; 3], inner, outer)
    }

    pub fn validate(&self) -> Result<()> {
        let state = PopulationState::validate(&self.center, 1e-9)?;
        if state.arity() != 3 {
            return Err(Error::Arity { expected: 3, got: state.arity() });
        }
        if !state.is_interior() {
            return Err(Error::InvalidParameter("hypnodisk center must be interior".into()));
        }
        let bound = 1.0 / 6f64.sqrt();
        if !(0.0 < self.inner && self.inner < self.outer && self.outer < bound) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < r < R < 1/sqrt(6), got r = {}, R = {}",
                self.inner, self.outer
            )));
        }
        Ok(())
    }

    /// Rotation applied to `x - p` at distance `d` from the center: 0 inside
    /// the inner disk, pi outside the outer one, linear in between.
    pub fn rotation_angle(&self, d: f64) -> f64 {
        if d < self.inner {
            0.0
        } else if d > self.outer {
            PI
        } else {
            PI * (d - self.inner) / (self.outer - self.inner)
        }
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let diff: [f64; 3] = std::array::from_fn(|i| x[i] - self.center[i]);
        let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if d < self.inner {
            out[..3].copy_from_slice(&diff);
            return;
        }
        if d > self.outer {
            for i in 0..3 {
                out[i] = -diff[i];
            }
            return;
        }
        // Orthonormal basis of the zero-sum plane.
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let s6 = 1.0 / 6f64.sqrt();
        let e1 = [s2, -s2, 0.0];
        let e2 = [s6, s6, -2.0 * s6];
        let a = dot3(&diff, &e1);
        let b = dot3(&diff, &e2);
        let (sin, cos) = self.rotation_angle(d).sin_cos();
        let ra = a * cos - b * sin;
        let rb = a * sin + b * cos;
        for i in 0..3 {
            out[i] = ra * e1[i] + rb * e2[i];
        }
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// A payoff function on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffFunction {
    Matrix(MatrixGame),
    Constant(Vec<f64>),
    Hypnodisk(HypnodiskParams),
    /// `base` with a copy of strategy `of` appended as the last strategy.
    Twin { base: Box<PayoffFunction>, of: usize },
    /// `base` with `eps` subtracted from the payoffs of `strategy`.
    Penalized { base: Box<PayoffFunction>, strategy: usize, eps: f64 },
}

impl PayoffFunction {
    pub fn matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Self::Matrix(MatrixGame::new(rows)?))
    }

    pub fn hypnodisk(params: HypnodiskParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::Hypnodisk(params))
    }

    pub fn arity(&self) -> usize {
        match self {
            Self::Matrix(m) => m.arity(),
            Self::Constant(u) => u.len(),
            Self::Hypnodisk(_) => 3,
            Self::Twin { base, .. } => base.arity() + 1,
            Self::Penalized { base, .. } => base.arity(),
        }
    }

    pub fn kind(&self) -> GameKind {
        match self {
            Self::Matrix(_) => GameKind::Matrix,
            Self::Constant(_) => GameKind::Constant,
            Self::Hypnodisk(_) => GameKind::Hypnodisk,
            Self::Twin { .. } | Self::Penalized { .. } => GameKind::Derived,
        }
    }

    /// Whether every payoff is affine in `x`, so that checks at the vertices
    /// decide inequalities on the whole simplex.
    pub fn is_linear(&self) -> bool {
        match self {
            Self::Matrix(_) | Self::Constant(_) => true,
            Self::Hypnodisk(_) => false,
            Self::Twin { base, .. } | Self::Penalized { base, .. } => base.is_linear(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arity()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.arity();
        if x.len() != n {
            return Err(Error::Arity { expected: n, got: x.len() });
        }
        if out.len() != n {
            return Err(Error::Arity { expected: n, got: out.len() });
        }
        self.eval_unchecked(x, out);
        Ok(())
    }

    fn eval_unchecked(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Matrix(m) => m.eval_into(x, out),
            Self::Constant(u) => out.copy_from_slice(u),
            Self::Hypnodisk(p) => p.eval_into(x, out),
            Self::Twin { base, of } => {
                let n = base.arity();
                let mut merged = x[..n].to_vec();
                merged[*of] += x[n];
                base.eval_unchecked(&merged, &mut out[..n]);
                out[n] = out[*of];
            }
            Self::Penalized { base, strategy, eps } => {
                base.eval_unchecked(x, out);
                out[*strategy] -= eps;
            }
        }
    }

    /// Twin pairs known from the construction (`Twin`) or from identical
    /// matrix rows / constant payoffs. Penalized strategies drop out.
    pub fn declared_twins(&self) -> Vec<(usize, usize)> {
        match self {
            Self::Matrix(m) => {
                let rows = m.rows();
                pairs_where(m.arity(), |i, j| rows[i] == rows[j])
            }
            Self::Constant(u) => pairs_where(u.len(), |i, j| u[i] == u[j]),
            Self::Hypnodisk(_) => Vec::new(),
            Self::Twin { base, of } => {
                let n = base.arity();
                let mut out = base.declared_twins();
                let partners: Vec<usize> = std::iter::once(*of)
                    .chain(out.iter().filter_map(|&(a, b)| {
                        if a == *of {
                            Some(b)
                        } else if b == *of {
                            Some(a)
                        } else {
                            None
                        }
                    }))
                    .collect();
                out.extend(partners.into_iter().map(|k| (k, n)));
                out
            }
            Self::Penalized { base, strategy, eps } => {
                let twins = base.declared_twins();
                if *eps == 0.0 {
                    twins
                } else {
                    twins
                        .into_iter()
                        .filter(|&(a, b)| a != *strategy && b != *strategy)
                        .collect()
                }
            }
        }
    }
}

fn pairs_where(n: usize, pred: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if pred(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Hypnodisk payoff at `x`. See [`HypnodiskParams::rotation_angle`].
pub fn hypnodisk_payoff(params: &HypnodiskParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != 3 {
        return Err(Error::Arity { expected: 3, got: x.len() });
    }
    let mut out = vec![0.0; 3];
    params.eval_into(x, &mut out);
    Ok(out)
}

/// Appends a twin of strategy `of` to `base`.
pub fn add_twin(base: PayoffFunction, of: usize) -> Result<PayoffFunction> {
    let arity = base.arity();
    if of >= arity {
        return Err(Error::StrategyOutOfRange { index: of, arity });
    }
    Ok(PayoffFunction::Twin { base: Box::new(base), of })
}

/// Subtracts `eps` from the payoffs of `strategy`.
pub fn penalize(base: PayoffFunction, strategy: usize, eps: f64) -> Result<PayoffFunction> {
    let arity = base.arity();
    if strategy >= arity {
        return Err(Error::StrategyOutOfRange { index: strategy, arity });
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("penalty must be >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(base);
    }
    Ok(PayoffFunction::Penalized { base: Box::new(base), strategy, eps })
}

/// Hypnodisk with a twin of strategy 3 whose payoffs are lowered by `eps`.
pub fn hypnodisk_feeble_twin(params: HypnodiskParams, eps: f64) -> Result<PayoffFunction> {
    let twin = add_twin(PayoffFunction::hypnodisk(params)?, 2)?;
    penalize(twin, 3, eps)
}

/// Rock-Paper-Scissors with a copy of Scissors whose payoffs are lowered by `d`.
pub fn rps_feeble_twin(d: f64) -> Result<MatrixGame> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("domination margin must be >= 0, got {d}")));
    }
    MatrixGame::new(vec![
        vec![0.0, -2.0, 1.0, 1.0],
        vec![1.0, 0.0, -2.0, -2.0],
        vec![-2.0, 1.0, 0.0, 0.0],
        vec![-2.0 - d, 1.0 - d, -d, -d],
    ])
}

/// The base Rock-Paper-Scissors game of [`rps_feeble_twin`].
pub fn rps() -> MatrixGame {
    MatrixGame::new(vec![
        vec![0.0, -2.0, 1.0],
        vec![1.0, 0.0, -2.0],
        vec![-2.0, 1.0, 0.0],
    ])
    .expect("static matrix")
}

/// Two strategies with state-independent payoffs `u1`, `u2`.
pub fn constant_two_strategy(u1: f64, u2: f64) -> PayoffFunction {
    PayoffFunction::Constant(vec![u1, u2])
}

/// Sampling plan for checks that cannot be decided exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Points per dimension of the barycentric grid (`divisions + 1`).
    pub grid_points: usize,
    pub random_samples: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { grid_points: 21, random_samples: 1000, seed: 0 }
    }
}

impl SamplingPlan {
    pub fn states(&self, n: usize) -> Vec<PopulationState> {
        let mut out = barycentric_grid(n, self.grid_points.saturating_sub(1).max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        out.extend((0..self.random_samples).map(|_| sample_uniform(n, &mut rng)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum DominanceVerdict {
    Dominated,
    /// `F_i(witness) >= F_j(witness)`; `gap = F_i - F_j` there.
    NotDominated { witness: PopulationState, gap: f64 },
}

impl DominanceVerdict {
    pub fn is_dominated(&self) -> bool {
        matches!(self, Self::Dominated)
    }
}

/// Is strategy `i` strictly dominated by strategy `j`?
///
/// Linear games are decided at the vertices. Everything else is checked on
/// the grid and random samples of `plan`.
pub fn is_strictly_dominated(
    game: &PayoffFunction,
    i: usize,
    j: usize,
    plan: &SamplingPlan,
) -> Result<DominanceVerdict> {
    let n = game.arity();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::StrategyOutOfRange { index: idx, arity: n });
        }
    }
    if i == j {
        return Err(Error::InvalidParameter("dominance needs two distinct strategies".into()));
    }
    let states = if game.is_linear() {
        (0..n).map(|k| PopulationState::vertex(n, k)).collect()
    } else {
        plan.states(n)
    };
    let mut payoff = vec![0.0; n];
    for x in states {
        game.eval_into(x.as_slice(), &mut payoff)?;
        let gap = payoff[i] - payoff[j];
        if gap >= 0.0 {
            return Ok(DominanceVerdict::NotDominated { witness: x, gap });
        }
    }
    Ok(DominanceVerdict::Dominated)
}

/// Largest `|F_i(x) - F_j(x)|` over the sampled states; zero for exact twins.
pub fn twin_gap(game: &PayoffFunction, i: usize, j: usize, plan: &SamplingPlan) -> Result<f64> {
    let n = game.arity();
    let mut payoff = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for x in plan.states(n) {
        game.eval_into(x.as_slice(), &mut payoff)?;
        worst = worst.max((payoff[i] - payoff[j]).abs());
    }
    Ok(worst)
}

/// `max |F_i(x)|` over the sampled states.
pub fn payoff_bound(game: &PayoffFunction, plan: &SamplingPlan) -> Result<f64> {
    let n = game.arity();
    let mut payoff = vec![0.0; n];
    let mut bound: f64 = 0.0;
    for x in plan.states(n) {
        game.eval_into(x.as_slice(), &mut payoff)?;
        bound = payoff.iter().fold(bound, |b, v| b.max(v.abs()));
    }
    Ok(bound)
}

/// Largest difference quotient `|F(x) - F(y)| / |x - y|` over random nearby
/// pairs: a sampled lower bound on the Lipschitz constant.
pub fn lipschitz_estimate(game: &PayoffFunction, pairs: usize, seed: u64) -> Result<f64> {
    let n = game.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = sample_uniform(n, &mut rng);
        let dir = tangent_projection(sample_uniform(n, &mut rng).as_slice());
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let step = 1e-4 * x.as_slice().iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
        let y: Vec<f64> = x.as_slice().iter().zip(&dir).map(|(a, d)| a + step * d / norm).collect();
        let fx = game.eval(x.as_slice())?;
        let fy = game.eval(&y)?;
        let df = fx.iter().zip(&fy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(df / step);
    }
    Ok(worst)
}
