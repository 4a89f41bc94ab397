//! A three-strategy focal population facing a two-action opponent.
//!
//! Payoffs against action `L` are `(1, 0, -eps)` and against `R` are
//! `(0, 1, 1 - eps)`: strategy 3 is strategy 2 minus a margin `eps`. The
//! opponent is driven by a [`Controller`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{AdvantageMode, ConditionReport, Verdict, STRICT_TOL};
use crate::dynamics::FieldKind;
use crate::error::{Error, Result};
use crate::integrate::{integrate_controlled, Controller, IntegratorConfig};
use crate::protocols::RevisionProtocol;
use crate::simplex::PopulationState;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnilateralGame {
    pub eps: f64,
}

impl UnilateralGame {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("margin {eps} must be >= 0")));
        }
        Ok(Self { eps })
    }

    /// Payoffs when the opponent plays `L` with probability `y`.
    pub fn payoffs(&self, y: f64) -> [f64; 3] {
        [y, 1.0 - y, 1.0 - y - self.eps]
    }

    /// Rows of the 3x2 matrix, columns `(L, R)`.
    pub fn matrix(&self) -> [[f64; 2]; 3] {
        [[1.0, 0.0], [0.0, 1.0], [-self.eps, 1.0 - self.eps]]
    }
}

fn resolved(proto: &RevisionProtocol, game: &UnilateralGame) -> Result<RevisionProtocol> {
    proto.validate()?;
    Ok(proto.with_payoff_bound(1.0 + game.eps))
}

/// Integrates the focal population against the controlled opponent.
pub fn run_unilateral(
    proto: &RevisionProtocol,
    eps: f64,
    ctrl: &Controller,
    x0: &PopulationState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if x0.arity() != 3 {
        return Err(Error::Arity { expected: 3, got: x0.arity() });
    }
    let game = UnilateralGame::new(eps)?;
    let kind = FieldKind::Mother { protocol: resolved(proto, &game)? };
    let mut rhs = |action: usize, t: f64, x: &[f64], out: &mut [f64]| {
        let payoffs = game.payoffs(ctrl.mixed_action(action, t));
        kind.velocity_into(&payoffs, x, out)
    };
    integrate_controlled(&mut rhs, ctrl, x0, cfg)
}

/// Per-capita growth rates of the three strategies against a pure action
/// (`0` = `L`, `1` = `R`).
pub fn growth_rates(proto: &RevisionProtocol, eps: f64, action: usize, x: &[f64]) -> Result<[f64; 3]> {
    let game = UnilateralGame::new(eps)?;
    let kind = FieldKind::Mother { protocol: resolved(proto, &game)? };
    let payoffs = game.payoffs(if action == 0 { 1.0 } else { 0.0 });
    let mut v = [0.0; 3];
    kind.velocity_into(&payoffs, x, &mut v)?;
    Ok([v[0] / x[0], v[1] / x[1], v[2] / x[2]])
}

/// Checks, at `eps = 0`, that strategy 1 grows against `L` and shrinks
/// against `R` (clause A2), and that the twin favoured by `mode` grows at
/// least as fast against both actions, strictly against `R` (A3) or against
/// `L` (A3'). Only interior states with the favoured twin strictly rarer
/// (rarity) or more frequent (frequency) are used.
pub fn verify_a_assumptions(
    proto: &RevisionProtocol,
    states: &[PopulationState],
    mode: AdvantageMode,
) -> Result<ConditionReport> {
    let mut a2 = true;
    let mut a3 = true;
    let mut a3p = true;
    let mut witness: Option<(Vec<f64>, BTreeMap<String, f64>)> = None;
    let mut used = 0;
    for x in states {
        if x.arity() != 3 {
            return Err(Error::Arity { expected: 3, got: x.arity() });
        }
        let eligible = x.is_interior()
            && match mode {
                AdvantageMode::Rarity => x[2] < x[1],
                AdvantageMode::Frequency => x[2] > x[1],
            };
        if !eligible {
            continue;
        }
        used += 1;
        let gl = growth_rates(proto, 0.0, 0, x.as_slice())?;
        let gr = growth_rates(proto, 0.0, 1, x.as_slice())?;
        let scale = gl.iter().chain(&gr).fold(0.0f64, |m, g| m.max(g.abs())).max(f64::MIN_POSITIVE);
        let tol = STRICT_TOL * scale;
        let ok_a2 = gl[0] > tol && gr[0] < -tol;
        let dl = gl[2] - gl[1];
        let dr = gr[2] - gr[1];
        let (weak_l, strict_l, weak_r, strict_r) = (dl >= -tol, dl > tol, dr >= -tol, dr > tol);
        let ok_a3 = weak_l && strict_r;
        let ok_a3p = strict_l && weak_r;
        if (!ok_a2 || !(ok_a3 || ok_a3p)) && witness.is_none() {
            let mut values = BTreeMap::new();
            for (k, g) in gl.iter().enumerate() {
                values.insert(format!("gL{}", k + 1), *g);
            }
            for (k, g) in gr.iter().enumerate() {
                values.insert(format!("gR{}", k + 1), *g);
            }
            witness = Some((x.as_slice().to_vec(), values));
        }
        a2 &= ok_a2;
        a3 &= ok_a3;
        a3p &= ok_a3p;
    }
    let verdict = if used == 0 {
        Verdict::Inconclusive { reason: "no eligible states".into() }
    } else if a2 && (a3 || a3p) {
        Verdict::Holds
    } else {
        let (w, values) = witness.unwrap_or_default();
        Verdict::Fails { witness: w, values }
    };
    let mut clauses = BTreeMap::new();
    clauses.insert("A2".to_string(), a2);
    clauses.insert("A3".to_string(), a3);
    clauses.insert("A3'".to_string(), a3p);
    Ok(ConditionReport { name: "unilateral_assumptions".into(), verdict, samples: used, clauses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{AdoptionRule, SelectionRule};
    use crate::simplex::sample_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn states() -> Vec<PopulationState> {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        (0..300).map(|_| sample_uniform(3, &mut rng)).collect()
    }

    #[test]
    fn game_rows() {
        let g = UnilateralGame::new(0.1).unwrap();
        assert_eq!(g.payoffs(1.0), [1.0, 0.0, -0.1]);
        assert_eq!(g.payoffs(0.0), [0.0, 1.0, 0.9]);
        assert!(UnilateralGame::new(-0.1).is_err());
    }

    #[test]
    fn retry_other_satisfies_assumptions() {
        let proto = RevisionProtocol::new(SelectionRule::retry_other(4).unwrap(), AdoptionRule::Pairwise);
        let r = verify_a_assumptions(&proto, &states(), AdvantageMode::Rarity).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.clauses["A2"]);
        assert!(r.clauses["A3"] || r.clauses["A3'"]);
    }

    #[test]
    fn replicator_twins_are_neutral() {
        let proto = RevisionProtocol::new(SelectionRule::Fair, AdoptionRule::Pairwise);
        let r = verify_a_assumptions(&proto, &states(), AdvantageMode::Rarity).unwrap();
        assert!(r.fails());
        assert!(r.clauses["A2"]);
        assert!(!r.clauses["A3"] && !r.clauses["A3'"]);
    }

    #[test]
    fn boundary_states_are_excluded() {
        let proto = RevisionProtocol::new(SelectionRule::retry_other(4).unwrap(), AdoptionRule::Pairwise);
        let x = PopulationState::validate(&[0.0, 0.6, 0.4], 1e-12).unwrap();
        let r = verify_a_assumptions(&proto, &[x], AdvantageMode::Rarity).unwrap();
        assert_eq!(r.samples, 0);
    }
}
