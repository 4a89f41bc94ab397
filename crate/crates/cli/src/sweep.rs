//! Long-run share of a worse strategy against the payoff ratio, with a
//! simulation cross-check.

use std::fmt::Write as _;

use imitation_core::analysis::tail_stats;
use imitation_core::dynamics::{asymptotic_share, mother_field};
use imitation_core::games::constant_two_strategy;
use imitation_core::integrate::{integrate, IntegratorConfig};
use imitation_core::protocols::{AdoptionRule, RevisionProtocol, SelectionRule};
use imitation_core::simplex::PopulationState;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn default_m() -> Vec<usize> {
    vec![2, 3, 4, 6, 10]
}

fn default_ratios() -> Vec<f64> {
    (1..=100).map(|k| k as f64 / 100.0).collect()
}

fn default_true() -> bool {
    true
}

fn default_horizon() -> f64 {
    400.0
}

fn default_tolerance() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_m")]
    pub m_values: Vec<usize>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_true")]
    pub cross_check: bool,
    #[serde(default = "default_horizon")]
    pub cross_check_horizon: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m_values: default_m(),
            ratios: default_ratios(),
            cross_check: true,
            cross_check_horizon: default_horizon(),
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m: usize,
    pub ratio: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub m: usize,
    pub ratio: f64,
    pub share: f64,
    pub tail_mean: f64,
    pub abs_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub curve: Vec<CurvePoint>,
    pub checks: Vec<CrossCheck>,
}

impl SweepOutput {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("m,ratio,x2\n");
        for p in &self.curve {
            let _ = writeln!(s, "{},{:?},{:?}", p.m, p.ratio, p.share);
        }
        s
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("m,ratio,x2_star,tail_mean,abs_error,pass\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{}", c.m, c.ratio, c.share, c.tail_mean, c.abs_error, c.pass);
        }
        s
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Simulated long-run share of strategy 2 under retry-other selection with `m`
/// trials and adoption proportional to the candidate's payoff.
pub fn simulated_share(m: usize, ratio: f64, horizon: f64) -> anyhow::Result<f64> {
    let proto = RevisionProtocol::new(SelectionRule::retry_other(m)?, AdoptionRule::Success { k: Some(0.0) });
    let field = mother_field(proto, constant_two_strategy(1.0, ratio))?;
    let x0 = PopulationState::barycenter(2);
    let traj = integrate(&field, &x0, &IntegratorConfig::with_horizon(horizon))?;
    Ok(tail_stats(&traj, 0.25)?.mean[1])
}

/// Grid points at the quartiles of the part of the grid where the share is
/// positive.
fn check_points(m: usize, ratios: &[f64]) -> Vec<f64> {
    let alive: Vec<f64> = ratios.iter().copied().filter(|&r| r > 1.0 / m as f64 && r < 1.0).collect();
    if alive.is_empty() {
        return Vec::new();
    }
    let mut pts: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|q| alive[((alive.len() - 1) as f64 * q).round() as usize])
        .collect();
    pts.dedup();
    pts
}

pub fn run_sweep(cfg: &SweepConfig) -> anyhow::Result<SweepOutput> {
    let mut curve = Vec::new();
    for &m in &cfg.m_values {
        for &ratio in &cfg.ratios {
            curve.push(CurvePoint { m, ratio, share: asymptotic_share(m, ratio)? });
        }
    }
    let mut jobs = Vec::new();
    if cfg.cross_check {
        for &m in &cfg.m_values {
            for r in check_points(m, &cfg.ratios) {
                jobs.push((m, r));
            }
        }
    }
    let checks = jobs
        .par_iter()
        .map(|&(m, ratio)| {
            let share = asymptotic_share(m, ratio)?;
            let tail_mean = simulated_share(m, ratio, cfg.cross_check_horizon)?;
            let abs_error = (tail_mean - share).abs();
            Ok(CrossCheck { m, ratio, share, tail_mean, abs_error, pass: abs_error < cfg.tolerance })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(SweepOutput { curve, checks })
}
