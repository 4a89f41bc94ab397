//! Running a scenario: trajectories plus their analysis report.

use anyhow::Context;
use imitation_core::analysis::{
    self, classify_region, liminf_estimate, lyapunov_distance, tail_stats, twin_ratio_series,
    ConditionReport, LiminfEstimate, Region, TailStats,
};
use imitation_core::dynamics::VectorField;
use imitation_core::integrate::integrate;
use imitation_core::simplex::{sample_uniform, Aggregation, PopulationState};
use imitation_core::trajectory::Trajectory;
use imitation_core::unilateral::run_unilateral;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisSpec, Model, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinRatioSummary {
    pub i: usize,
    pub j: usize,
    pub terminal: Option<f64>,
    pub terminal_distance: Option<f64>,
    pub tail_min: Option<f64>,
    pub tail_max: Option<f64>,
    pub monotone_toward_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSummary {
    pub tail_min: f64,
    pub tail_max: f64,
    /// Fraction of tail samples in the inner disk, annulus and outer region.
    pub tail_fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLiminf {
    pub component: usize,
    #[serde(flatten)]
    pub estimate: LiminfEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub initial: Vec<f64>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub samples: usize,
    pub events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twin_ratio: Option<TwinRatioSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub liminf: Vec<ComponentLiminf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub runs: Vec<RunReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<ConditionReport>,
}

pub struct ScenarioOutput {
    pub trajectories: Vec<Trajectory>,
    pub report: ScenarioReport,
}

/// Integrates every initial condition of `cfg` (in parallel, results kept in
/// input order) and runs the requested analyses.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> anyhow::Result<ScenarioOutput> {
    let model = cfg.model()?;
    let n = cfg.arity()?;
    let starts = cfg.initial.resolve(n, seed)?;
    let results: Vec<anyhow::Result<(Trajectory, RunReport)>> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let traj = match &model {
                Model::Field(field) => integrate(field, x0, &cfg.integrator),
                Model::Unilateral(u) => run_unilateral(&u.protocol, u.eps, &u.controller, x0, &cfg.integrator),
            }
            .with_context(|| format!("run {k} from {:?}", x0.as_slice()))?;
            let report = analyse_run(cfg, k, x0, &traj);
            Ok((traj, report))
        })
        .collect();
    let mut trajectories = Vec::with_capacity(results.len());
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        let (t, rep) = r?;
        trajectories.push(t);
        runs.push(rep);
    }
    let conditions = match &model {
        Model::Field(field) => field_conditions(cfg, field, seed)?,
        Model::Unilateral(_) => Vec::new(),
    };
    Ok(ScenarioOutput {
        trajectories,
        report: ScenarioReport { name: cfg.name.clone(), seed, runs, conditions },
    })
}

fn analyse_run(cfg: &ScenarioConfig, k: usize, x0: &PopulationState, traj: &Trajectory) -> RunReport {
    let last = traj.last_state().expect("trajectory has the initial row");
    let mut report = RunReport {
        run: k,
        initial: x0.as_slice().to_vec(),
        final_time: traj.last_time().unwrap_or(0.0),
        final_state: last.as_slice().to_vec(),
        samples: traj.len(),
        events: traj.event_list().len(),
        tail: None,
        twin_ratio: None,
        liminf: Vec::new(),
        lyapunov: None,
        notes: Vec::new(),
    };
    let w = cfg.tail_window;
    let end = report.final_time;
    let first = traj.times().partition_point(|&t| t < end * (1.0 - w));
    for spec in &cfg.analyses {
        match spec {
            AnalysisSpec::TailStats => match tail_stats(traj, w) {
                Ok(s) => report.tail = Some(s),
                Err(e) => report.notes.push(format!("tail_stats: {e}")),
            },
            AnalysisSpec::TwinRatio { i, j } => {
                let v = twin_ratio_series(traj, *i, *j);
                let tail: Vec<f64> = v.ratios[first..].iter().flatten().copied().collect();
                report.twin_ratio = Some(TwinRatioSummary {
                    i: *i,
                    j: *j,
                    terminal: v.ratios.last().copied().flatten(),
                    terminal_distance: v.terminal_distance,
                    tail_min: tail.iter().copied().reduce(f64::min),
                    tail_max: tail.iter().copied().reduce(f64::max),
                    monotone_toward_one: v.monotone_toward_one,
                });
            }
            AnalysisSpec::Liminf { component } => {
                let signal = lyapunov_series(cfg, traj);
                match liminf_estimate(traj, *component, signal.as_deref(), w) {
                    Ok(estimate) => report.liminf.push(ComponentLiminf { component: *component, estimate }),
                    Err(e) => report.notes.push(format!("liminf: {e}")),
                }
            }
            AnalysisSpec::Lyapunov => {
                let series = lyapunov_series(cfg, traj).expect("validated as hypnodisk");
                let (params, _) = cfg.game.as_ref().and_then(|g| g.hypnodisk()).expect("validated");
                let tail = &series[first..];
                let mut counts = [0usize; 3];
                for &v in tail {
                    counts[match classify_region(v, &params) {
                        Region::Inner => 0,
                        Region::Annulus => 1,
                        Region::Outer => 2,
                    }] += 1;
                }
                let total = tail.len().max(1) as f64;
                report.lyapunov = Some(LyapunovSummary {
                    tail_min: tail.iter().copied().fold(f64::INFINITY, f64::min),
                    tail_max: tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    tail_fractions: counts.map(|c| c as f64 / total),
                });
            }
            _ => {}
        }
    }
    report
}

/// `W(x(t))` when the scenario's game is a hypnodisk (with or without twin).
fn lyapunov_series(cfg: &ScenarioConfig, traj: &Trajectory) -> Option<Vec<f64>> {
    let (params, twinned) = cfg.game.as_ref()?.hypnodisk()?;
    let mask = twinned.then(Aggregation::twin_of_third);
    Some(
        traj.states()
            .iter()
            .map(|s| lyapunov_distance(s.as_slice(), &params, mask.as_ref()))
            .collect(),
    )
}

/// Interior states used by the condition checkers.
pub fn check_states(n: usize, count: usize, seed: u64) -> Vec<PopulationState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_uniform(n, &mut rng)).collect()
}

fn field_conditions(cfg: &ScenarioConfig, field: &VectorField, seed: u64) -> anyhow::Result<Vec<ConditionReport>> {
    let states = check_states(field.arity(), cfg.check_states, seed);
    let mut out = Vec::new();
    for spec in &cfg.analyses {
        let report = match spec {
            AnalysisSpec::PositiveCorrelation => analysis::check_positive_correlation(field, &states)?,
            AnalysisSpec::Monotone => analysis::check_monotone(field, &states)?,
            AnalysisSpec::Imitation => analysis::check_imitation_condition(field, &states)?,
            AnalysisSpec::Advantage { i, j, mode } => analysis::check_advantage(field, (*i, *j), &states, *mode)?,
            _ => continue,
        };
        out.push(report);
    }
    Ok(out)
}
