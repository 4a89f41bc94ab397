//! Vector fields on the simplex: the mean dynamic of a revision protocol and
//! the classical closed forms it is compared against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::PayoffFunction;
use crate::protocols::{mean_payoff, RateMatrix, RevisionProtocol};

/// Which dynamic a [`VectorField`] computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `xdot_i = sum_j x_j rho_ji - x_i sum_j rho_ij`.
    Mother { protocol: RevisionProtocol },
    Replicator,
    Smith,
    Bnn,
}

impl FieldKind {
    /// Velocity at `x` given the payoff vector there.
    pub fn velocity_into(&self, payoffs: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = x.len();
        match self {
            Self::Mother { protocol } => {
                let rho = protocol.switch_rates_with_payoffs(payoffs, x)?;
                mother_equation(&rho, x, out);
            }
            Self::Replicator => {
                let avg = mean_payoff(payoffs, x);
                for i in 0..n {
                    out[i] = x[i] * (payoffs[i] - avg);
                }
            }
            Self::Smith => {
                for i in 0..n {
                    let mut inflow = 0.0;
                    let mut outflow = 0.0;
                    for j in 0..n {
                        inflow += x[j] * (payoffs[i] - payoffs[j]).max(0.0);
                        outflow += (payoffs[j] - payoffs[i]).max(0.0);
                    }
                    out[i] = inflow - x[i] * outflow;
                }
            }
            Self::Bnn => {
                let avg = mean_payoff(payoffs, x);
                let excess: f64 = payoffs.iter().map(|f| (f - avg).max(0.0)).sum();
                for i in 0..n {
                    out[i] = (payoffs[i] - avg).max(0.0) - x[i] * excess;
                }
            }
        }
        Ok(())
    }

    /// Switch rates that generate this dynamic through the mother equation.
    /// For Smith this is the unscaled `[F_j - F_i]_+`.
    pub fn rates(&self, payoffs: &[f64], x: &[f64]) -> Result<RateMatrix> {
        let n = x.len();
        let rule = |f: &dyn Fn(usize, usize) -> f64| {
            let mut rho = RateMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        rho.set(i, j, f(i, j));
                    }
                }
            }
            rho
        };
        Ok(match self {
            Self::Mother { protocol } => protocol.switch_rates_with_payoffs(payoffs, x)?,
            Self::Replicator => rule(&|i, j| x[j] * (payoffs[j] - payoffs[i]).max(0.0)),
            Self::Smith => rule(&|i, j| (payoffs[j] - payoffs[i]).max(0.0)),
            Self::Bnn => {
                let avg = mean_payoff(payoffs, x);
                rule(&|_, j| (payoffs[j] - avg).max(0.0))
            }
        })
    }

    /// Unplayed strategies stay unplayed.
    pub fn is_imitative(&self) -> bool {
        match self {
            Self::Mother { protocol } => protocol.selection.is_imitative(),
            Self::Replicator => true,
            Self::Smith | Self::Bnn => false,
        }
    }
}

/// Inflow and outflow are accumulated separately before differencing.
fn mother_equation(rho: &RateMatrix, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let mut inflow = 0.0;
        let mut outflow = 0.0;
        for j in 0..n {
            if j != i {
                inflow += x[j] * rho.get(j, i);
                outflow += rho.get(i, j);
            }
        }
        out[i] = inflow - x[i] * outflow;
    }
}

/// A dynamic bound to a game: `xdot = V^F(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    kind: FieldKind,
    game: PayoffFunction,
}

impl VectorField {
    /// Builds a field, resolving any missing adoption baseline against `game`.
    pub fn new(kind: FieldKind, game: PayoffFunction) -> Result<Self> {
        let kind = match kind {
            FieldKind::Mother { protocol } => {
                protocol.validate()?;
                FieldKind::Mother { protocol: protocol.resolved_for(&game)? }
            }
            other => other,
        };
        Ok(Self { kind, game })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn game(&self) -> &PayoffFunction {
        &self.game
    }

    pub fn protocol(&self) -> Option<&RevisionProtocol> {
        match &self.kind {
            FieldKind::Mother { protocol } => Some(protocol),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        self.game.arity()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let payoffs = self.game.eval(x)?;
        self.kind.velocity_into(&payoffs, x, out)
    }

    /// Per-capita growth rates `xdot_i / x_i`; `None` where `x_i = 0`.
    pub fn growth_rates(&self, x: &[f64]) -> Result<Vec<Option<f64>>> {
        let v = self.eval(x)?;
        Ok(v.iter().zip(x).map(|(&vi, &xi)| (xi > 0.0).then(|| vi / xi)).collect())
    }

    pub fn rates(&self, x: &[f64]) -> Result<RateMatrix> {
        let payoffs = self.game.eval(x)?;
        self.kind.rates(&payoffs, x)
    }
}

pub fn mother_field(proto: RevisionProtocol, game: PayoffFunction) -> Result<VectorField> {
    VectorField::new(FieldKind::Mother { protocol: proto }, game)
}

pub fn replicator_field(game: PayoffFunction) -> VectorField {
    VectorField { kind: FieldKind::Replicator, game }
}

/// Smith dynamic without the `1/N` factor of the uniform-selection protocol.
pub fn smith_field(game: PayoffFunction) -> VectorField {
    VectorField { kind: FieldKind::Smith, game }
}

pub fn bnn_field(game: PayoffFunction) -> VectorField {
    VectorField { kind: FieldKind::Bnn, game }
}

/// `h = lambda_21 r_21 - lambda_12 r_12`, so that `xdot_1 = x_1 x_2 h`.
pub fn two_strategy_h(proto: &RevisionProtocol, game: &PayoffFunction, x: &[f64]) -> Result<f64> {
    if x.len() != 2 || game.arity() != 2 {
        return Err(Error::Arity { expected: 2, got: x.len().max(game.arity()) });
    }
    let proto = proto.resolved_for(game)?;
    let payoffs = game.eval(x)?;
    let undefined = || Error::InvalidParameter(format!("lambda undefined at {x:?}"));
    let l21 = proto.selection.lambda_factors(1, x)?[0].ok_or_else(undefined)?;
    let l12 = proto.selection.lambda_factors(0, x)?[1].ok_or_else(undefined)?;
    let r21 = proto.adoption.adoption_rate(1, 0, &payoffs, x)?;
    let r12 = proto.adoption.adoption_rate(0, 1, &payoffs, x)?;
    Ok(l21 * r21 - l12 * r12)
}

/// Long-run share of the worse strategy in a two-strategy game with constant
/// payoffs `u1 >= u2 > 0` under retry-other selection with `m` trials and
/// success-proportional adoption; `ratio = u2 / u1`.
///
/// The rest point solves `ratio = (1 + x2 + .. + x2^(m-1)) / (1 + x1 + .. + x1^(m-1))`.
pub fn asymptotic_share(m: usize, ratio: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!("ratio {ratio} not in (0, 1]")));
    }
    if ratio == 1.0 {
        return Ok(0.5);
    }
    if ratio <= 1.0 / m as f64 {
        return Ok(0.0);
    }
    let geometric = |x: f64| (0..m).fold((0.0, 1.0), |(s, p), _| (s + p, p * x)).0;
    let g = |x2: f64| geometric(x2) / geometric(1.0 - x2);
    let (mut lo, mut hi) = (1e-15, 0.5);
    let grid: Vec<f64> = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect();
    if grid.windows(2).any(|w| g(w[1]) < g(w[0])) {
        return Err(Error::NoRoot(format!("share curve not monotone for m = {m}")));
    }
    if g(lo) > ratio || g(hi) < ratio {
        return Err(Error::NoRoot(format!("ratio {ratio} outside bracket for m = {m}")));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
