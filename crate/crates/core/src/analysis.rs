//! Numerical checks of structural conditions on dynamics, and long-run
//! statistics of trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::games::{twin_gap, HypnodiskParams, SamplingPlan};
use crate::simplex::{distance_to_center, Aggregation, PopulationState};
use crate::trajectory::Trajectory;

/// Support threshold used when detecting population equilibria.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Payoff spread below which a state counts as a population equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
/// Relative threshold separating "strict" from "equal".
pub const STRICT_TOL: f64 = 1e-12;
/// Tie tolerance for payoffs and growth rates in the monotonicity check.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    /// Condition violated at `witness`.
    Fails { witness: Vec<f64>, values: BTreeMap<String, f64> },
    /// The compared quantities were equal at every sampled state.
    Neutral,
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub samples: usize,
    /// Sub-clauses and whether each held on the sample.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub clauses: BTreeMap<String, bool>,
}

impl ConditionReport {
    fn new(name: &str, verdict: Verdict, samples: usize) -> Self {
        Self { name: name.into(), verdict, samples, clauses: BTreeMap::new() }
    }

    pub fn holds(&self) -> bool {
        matches!(self.verdict, Verdict::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self.verdict, Verdict::Fails { .. })
    }

    pub fn witness(&self) -> Option<&[f64]> {
        match &self.verdict {
            Verdict::Fails { witness, .. } => Some(witness),
            _ => None,
        }
    }
}

fn labelled<'a>(prefix: &str, v: &'a [f64]) -> impl Iterator<Item = (String, f64)> + 'a {
    let prefix = prefix.to_string();
    v.iter().enumerate().map(move |(i, &x)| (format!("{prefix}{}", i + 1), x))
}

fn fail(witness: &[f64], values: impl IntoIterator<Item = (String, f64)>) -> Verdict {
    Verdict::Fails { witness: witness.to_vec(), values: values.into_iter().collect() }
}

/// Whether every strategy in the support earns the same payoff.
pub fn is_population_equilibrium(payoffs: &[f64], x: &[f64]) -> bool {
    let support = payoffs.iter().zip(x).filter(|(_, &w)| w > SUPPORT_TOL).map(|(f, _)| *f);
    let (lo, hi) = support.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)));
    hi - lo <= EQUILIBRIUM_TOL
}

/// `sum_i xdot_i F_i` must vanish at population equilibria and be positive
/// everywhere else.
pub fn check_positive_correlation(field: &VectorField, states: &[PopulationState]) -> Result<ConditionReport> {
    for x in states {
        let payoffs = field.game().eval(x.as_slice())?;
        let v = field.eval(x.as_slice())?;
        let corr: f64 = v.iter().zip(&payoffs).map(|(a, b)| a * b).sum();
        let eq = is_population_equilibrium(&payoffs, x.as_slice());
        let ok = if eq { corr.abs() <= EQUILIBRIUM_TOL } else { corr > STRICT_TOL };
        if !ok {
            let mut values: Vec<(String, f64)> = vec![("correlation".into(), corr)];
            values.push(("population_equilibrium".into(), if eq { 1.0 } else { 0.0 }));
            values.extend(labelled("F", &payoffs));
            values.extend(labelled("v", &v));
            return Ok(ConditionReport::new("positive_correlation", fail(x.as_slice(), values), states.len()));
        }
    }
    Ok(ConditionReport::new("positive_correlation", Verdict::Holds, states.len()))
}

/// Per-capita growth rates must be ordered as payoffs. Boundary states are
/// skipped.
pub fn check_monotone(field: &VectorField, states: &[PopulationState]) -> Result<ConditionReport> {
    let n = field.arity();
    let mut used = 0;
    for x in states {
        if !x.is_interior() {
            continue;
        }
        used += 1;
        let payoffs = field.game().eval(x.as_slice())?;
        let g: Vec<f64> = field.growth_rates(x.as_slice())?.into_iter().map(|g| g.expect("interior")).collect();
        for i in 0..n {
            for j in i + 1..n {
                let df = payoffs[j] - payoffs[i];
                let dg = g[j] - g[i];
                let ok = if df.abs() <= TIE_TOL { dg.abs() <= TIE_TOL } else { dg * df.signum() > 0.0 };
                if !ok {
                    let mut values = vec![("i".into(), i as f64), ("j".into(), j as f64)];
                    values.extend(labelled("F", &payoffs));
                    values.extend(labelled("g", &g));
                    return Ok(ConditionReport::new("monotone", fail(x.as_slice(), values), used));
                }
            }
        }
    }
    if used == 0 && n > 1 {
        let reason = "no interior states sampled".to_string();
        return Ok(ConditionReport::new("monotone", Verdict::Inconclusive { reason }, 0));
    }
    Ok(ConditionReport::new("monotone", Verdict::Holds, used))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMode {
    Rarity,
    Frequency,
}

/// Advantage to rarity (or frequency) for the twin pair `(i, j)`: the rarer
/// (more frequent) twin grows at least as fast, strictly so whenever one of
/// the twins imitates others (clause AR1) or is imitated (clause AR2). The
/// report holds when the weak inequality holds everywhere and at least one
/// strictness clause holds; it is neutral when growth rates always agree.
pub fn check_advantage(
    field: &VectorField,
    twins: (usize, usize),
    states: &[PopulationState],
    mode: AdvantageMode,
) -> Result<ConditionReport> {
    let (i, j) = twins;
    let gap = twin_gap(field.game(), i, j, &SamplingPlan::default())?;
    if gap > 1e-12 {
        return Err(Error::NotTwins { i, j, gap });
    }
    let name = match mode {
        AdvantageMode::Rarity => "advantage_rarity",
        AdvantageMode::Frequency => "advantage_frequency",
    };
    let mut used = 0;
    let mut ar1 = true;
    let mut ar2 = true;
    let mut all_equal = true;
    let mut clause_witness: Option<(Vec<f64>, Vec<(String, f64)>)> = None;
    for x in states {
        if !x.is_interior() || x[i] == x[j] {
            continue;
        }
        used += 1;
        let (rare, freq) = if x[i] < x[j] { (i, j) } else { (j, i) };
        let g = field.growth_rates(x.as_slice())?;
        let (g_rare, g_freq) = (g[rare].expect("interior"), g[freq].expect("interior"));
        let d = match mode {
            AdvantageMode::Rarity => g_rare - g_freq,
            AdvantageMode::Frequency => g_freq - g_rare,
        };
        let rho = field.rates(x.as_slice())?;
        let scale = rho.max_abs();
        let tol = STRICT_TOL * scale;
        let values = || {
            let mut v = vec![("difference".into(), d), ("max_rate".into(), scale)];
            v.extend(labelled("g", &g.iter().map(|g| g.unwrap_or(f64::NAN)).collect::<Vec<_>>()));
            v
        };
        if d < -tol {
            return Ok(ConditionReport::new(name, fail(x.as_slice(), values()), used));
        }
        let strict = d > tol;
        all_equal &= !strict;
        let threshold = tol.max(f64::MIN_POSITIVE);
        let imitates = rho.imitates(i, threshold) || rho.imitates(j, threshold);
        let imitated = rho.imitated(i, threshold) || rho.imitated(j, threshold);
        if imitates && !strict {
            ar1 = false;
        }
        if imitated && !strict {
            ar2 = false;
        }
        if (imitates || imitated) && !strict && clause_witness.is_none() {
            let mut v = values();
            v.push(("imitates".into(), f64::from(u8::from(imitates))));
            v.push(("imitated".into(), f64::from(u8::from(imitated))));
            clause_witness = Some((x.as_slice().to_vec(), v));
        }
    }
    let verdict = if used == 0 {
        Verdict::Inconclusive { reason: "no interior states with distinct twin frequencies".into() }
    } else if all_equal {
        Verdict::Neutral
    } else if ar1 || ar2 {
        Verdict::Holds
    } else {
        let (w, v) = clause_witness.expect("a strictness clause failed somewhere");
        fail(&w, v)
    };
    let mut report = ConditionReport::new(name, verdict, used);
    report.clauses.insert("AR1".into(), ar1);
    report.clauses.insert("AR2".into(), ar2);
    Ok(report)
}

/// At every interior state that is not an equilibrium, each strategy must
/// imitate others or be imitated by others.
pub fn check_imitation_condition(field: &VectorField, states: &[PopulationState]) -> Result<ConditionReport> {
    let n = field.arity();
    let mut used = 0;
    for x in states {
        if !x.is_interior() {
            continue;
        }
        let payoffs = field.game().eval(x.as_slice())?;
        if is_population_equilibrium(&payoffs, x.as_slice()) {
            continue;
        }
        used += 1;
        let rho = field.rates(x.as_slice())?;
        let threshold = (STRICT_TOL * rho.max_abs()).max(f64::MIN_POSITIVE);
        if let Some(i) = (0..n).find(|&i| !rho.imitates(i, threshold) && !rho.imitated(i, threshold)) {
            let mut values = vec![("strategy".into(), i as f64), ("max_rate".into(), rho.max_abs())];
            values.extend(labelled("F", &payoffs));
            return Ok(ConditionReport::new("imitation", fail(x.as_slice(), values), used));
        }
    }
    Ok(ConditionReport::new("imitation", Verdict::Holds, used))
}

/// `W(x)`: distance from `x` to the equilibrium of the hypnodisk game, after
/// merging twin strategies through `mask`.
pub fn lyapunov_distance(x: &[f64], params: &HypnodiskParams, mask: Option<&Aggregation>) -> f64 {
    distance_to_center(x, &params.center, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `W < r`.
    Inner,
    /// `r <= W <= R`.
    Annulus,
    /// `W > R`.
    Outer,
}

pub fn classify_region(w: f64, params: &HypnodiskParams) -> Region {
    if w < params.inner {
        Region::Inner
    } else if w <= params.outer {
        Region::Annulus
    } else {
        Region::Outer
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinRatio {
    pub times: Vec<f64>,
    /// `x_i / x_j`; `None` where `x_j < 1e-13`.
    pub ratios: Vec<Option<f64>>,
    /// `|V - 1|` never increases by more than `1e-6` between valid samples.
    pub monotone_toward_one: bool,
    pub terminal_distance: Option<f64>,
}

/// Ratio series `V = x_i / x_j`.
pub fn twin_ratio_series(traj: &Trajectory, i: usize, j: usize) -> TwinRatio {
    let ratios: Vec<Option<f64>> = traj
        .states()
        .iter()
        .map(|s| if i == j { Some(1.0) } else { (s[j] >= 1e-13).then(|| s[i] / s[j]) })
        .collect();
    let valid: Vec<f64> = ratios.iter().flatten().map(|r| (r - 1.0).abs()).collect();
    let monotone_toward_one = valid.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let terminal_distance = ratios.last().copied().flatten().map(|r| (r - 1.0).abs());
    TwinRatio { times: traj.times().to_vec(), ratios, monotone_toward_one, terminal_distance }
}

/// Minimum, time-weighted mean and maximum of each strategy over the last
/// `window_fraction` of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub window_fraction: f64,
    pub start_time: f64,
    pub samples: usize,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

pub const MIN_TAIL_SAMPLES: usize = 100;

pub fn tail_stats(traj: &Trajectory, window_fraction: f64) -> Result<TailStats> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("window fraction {window_fraction} not in (0, 1)")));
    }
    let times = traj.times();
    let end = traj.last_time().unwrap_or(0.0);
    let start_time = end - window_fraction * end;
    let first = times.partition_point(|&t| t < start_time);
    let n = traj.arity();
    let columns: Vec<Vec<f64>> = (0..n).map(|k| traj.component(k)[first..].to_vec()).collect();
    let window = &times[first..];
    if window.len() < MIN_TAIL_SAMPLES {
        return Err(Error::TooShort { got: window.len(), needed: MIN_TAIL_SAMPLES });
    }
    let mut stats = TailStats {
        window_fraction,
        start_time,
        samples: window.len(),
        min: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        max: Vec::with_capacity(n),
    };
    for col in &columns {
        stats.min.push(col.iter().copied().fold(f64::INFINITY, f64::min));
        stats.max.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        stats.mean.push(time_average(window, col));
    }
    Ok(stats)
}

/// Trapezoidal time average; plain mean when the window has zero length.
pub fn time_average(times: &[f64], values: &[f64]) -> f64 {
    let span = times[times.len() - 1] - times[0];
    if span <= 0.0 {
        return values.iter().sum::<f64>() / values.len() as f64;
    }
    let area: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * 0.5 * (v[0] + v[1]))
        .sum();
    area / span
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiminfEstimate {
    pub value: f64,
    pub window_start: f64,
    /// Mean spacing of upward mean-crossings of the recurrence signal.
    pub period: Option<f64>,
    pub periods_in_window: Option<f64>,
}

/// Estimates `liminf x_k(t)` as the minimum over a tail window. When the
/// recurrence signal (the component itself unless given) oscillates, the
/// window is widened to cover at least two detected periods.
pub fn liminf_estimate(
    traj: &Trajectory,
    component: usize,
    signal: Option<&[f64]>,
    window_fraction: f64,
) -> Result<LiminfEstimate> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("window fraction {window_fraction} not in (0, 1)")));
    }
    let times = traj.times();
    let values = traj.component(component);
    let owned;
    let signal = match signal {
        Some(s) => s,
        None => {
            owned = values.clone();
            &owned
        }
    };
    let end = traj.last_time().unwrap_or(0.0);
    let mut start = end * (1.0 - window_fraction);
    let half = times.partition_point(|&t| t < end * 0.5);
    let period = detect_period(&times[half..], &signal[half..]);
    if let Some(p) = period {
        start = start.min(end - 2.0 * p).max(0.0);
    }
    let first = times.partition_point(|&t| t < start);
    if times.len() - first < MIN_TAIL_SAMPLES {
        return Err(Error::TooShort { got: times.len() - first, needed: MIN_TAIL_SAMPLES });
    }
    let value = values[first..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LiminfEstimate {
        value,
        window_start: start,
        period,
        periods_in_window: period.map(|p| (end - start) / p),
    })
}

/// Mean spacing of upward crossings of the signal's mean, if there are at
/// least three crossings.
pub fn detect_period(times: &[f64], signal: &[f64]) -> Option<f64> {
    if signal.len() < 3 {
        return None;
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let spread = signal.iter().fold(0.0f64, |m, s| m.max((s - mean).abs()));
    if spread < 1e-9 {
        return None;
    }
    let crossings: Vec<f64> = (1..signal.len())
        .filter(|&k| signal[k - 1] < mean && signal[k] >= mean)
        .map(|k| times[k])
        .collect();
    (crossings.len() >= 3).then(|| (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{mother_field, replicator_field};
    use crate::games::{add_twin, constant_two_strategy, hypnodisk_payoff, rps, PayoffFunction};
    use crate::protocols::{AdoptionRule, RevisionProtocol, SelectionRule};
    use crate::simplex::sample_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn interior_states(n: usize, count: usize, seed: u64) -> Vec<PopulationState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| sample_uniform(n, &mut rng)).collect()
    }

    fn field(sel: SelectionRule, adopt: AdoptionRule, game: PayoffFunction) -> VectorField {
        mother_field(RevisionProtocol::new(sel, adopt), game).unwrap()
    }

    fn hypno_twin() -> PayoffFunction {
        let p = HypnodiskParams::barycentric(0.05, 0.1).unwrap();
        add_twin(PayoffFunction::hypnodisk(p).unwrap(), 2).unwrap()
    }

    #[test]
    fn replicator_rps_has_positive_correlation() {
        let f = field(SelectionRule::Fair, AdoptionRule::Pairwise, PayoffFunction::Matrix(rps()));
        let r = check_positive_correlation(&f, &interior_states(3, 200, 1)).unwrap();
        assert!(r.holds(), "{r:?}");
        let bary = [PopulationState::barycenter(3)];
        assert!(check_positive_correlation(&f, &bary).unwrap().holds());
    }

    #[test]
    fn retry_success_violates_positive_correlation() {
        // dominated twin with margin 0.1: the rare worse strategy can grow
        let game = constant_two_strategy(1.0, 0.9);
        let f = field(SelectionRule::retry_other(4).unwrap(), AdoptionRule::Success { k: Some(0.0) }, game);
        let x = PopulationState::validate(&[0.9, 0.1], 1e-12).unwrap();
        let r = check_positive_correlation(&f, &[x]).unwrap();
        let w = r.witness().unwrap().to_vec();
        let v = f.eval(&w).unwrap();
        assert!(v[0] * 1.0 + v[1] * 0.9 < 0.0);
    }

    #[test]
    fn replicator_monotone_on_random_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        use rand::Rng;
        for n in [3, 4] {
            for _ in 0..10 {
                let rows = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                let f = replicator_field(PayoffFunction::matrix(rows).unwrap());
                assert!(check_monotone(&f, &interior_states(n, 50, 3)).unwrap().holds());
            }
        }
    }

    #[test]
    fn rarity_protocol_is_not_monotone() {
        let f = field(SelectionRule::list_sample(3).unwrap(), AdoptionRule::Pairwise, hypno_twin());
        let r = check_monotone(&f, &interior_states(4, 200, 4)).unwrap();
        assert!(r.fails());
        let w = r.witness().unwrap();
        let g = f.growth_rates(w).unwrap();
        let fv = f.game().eval(w).unwrap();
        let bad = (0..4).any(|i| (0..4).any(|j| {
            let (gi, gj) = (g[i].unwrap(), g[j].unwrap());
            if (fv[j] - fv[i]).abs() <= TIE_TOL { (gj - gi).abs() > TIE_TOL } else { (gj - gi) * (fv[j] - fv[i]) <= 0.0 }
        }));
        assert!(bad);
    }

    #[test]
    fn advantage_verdicts() {
        let states = interior_states(4, 200, 5);
        let game = hypno_twin();
        let list = field(SelectionRule::list_sample(3).unwrap(), AdoptionRule::Pairwise, game.clone());
        let r = check_advantage(&list, (2, 3), &states, AdvantageMode::Rarity).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.clauses["AR2"]);
        let retry = field(SelectionRule::retry_other(4).unwrap(), AdoptionRule::Pairwise, game.clone());
        let r = check_advantage(&retry, (2, 3), &states, AdvantageMode::Rarity).unwrap();
        assert!(r.holds() && r.clauses["AR1"], "{r:?}");
        let maj = field(SelectionRule::majority(3).unwrap(), AdoptionRule::Pairwise, game.clone());
        assert!(check_advantage(&maj, (2, 3), &states, AdvantageMode::Frequency).unwrap().holds());
        assert!(check_advantage(&maj, (2, 3), &states, AdvantageMode::Rarity).unwrap().fails());
        let fair = field(SelectionRule::Fair, AdoptionRule::Pairwise, game.clone());
        let r = check_advantage(&fair, (2, 3), &states, AdvantageMode::Rarity).unwrap();
        assert_eq!(r.verdict, Verdict::Neutral);
        assert!(matches!(
            check_advantage(&fair, (0, 1), &states, AdvantageMode::Rarity),
            Err(Error::NotTwins { .. })
        ));
    }

    #[test]
    fn imitation_condition() {
        let states = interior_states(3, 100, 6);
        let f = field(SelectionRule::Fair, AdoptionRule::Pairwise, PayoffFunction::Matrix(rps()));
        assert!(check_imitation_condition(&f, &states).unwrap().holds());
        let dead = field(
            SelectionRule::Fair,
            AdoptionRule::Product {
                f: crate::protocols::ScalarMap::Constant { value: 0.0 },
                g: crate::protocols::ScalarMap::Constant { value: 1.0 },
            },
            PayoffFunction::Matrix(rps()),
        );
        assert!(check_imitation_condition(&dead, &states).unwrap().fails());
        let r = check_imitation_condition(&f, &[PopulationState::barycenter(3)]).unwrap();
        assert_eq!(r.samples, 0);
    }

    #[test]
    fn lyapunov_distance_and_regions() {
        let p = HypnodiskParams::barycentric(0.05, 0.1).unwrap();
        let mask = Aggregation::twin_of_third();
        assert!(lyapunov_distance(&[1.0 / 3.0, 1.0 / 3.0, 0.2, 2.0 / 15.0], &p, Some(&mask)) < 1e-15);
        let x = [1.0 / 3.0 + 0.12 / 2f64.sqrt(), 1.0 / 3.0 - 0.12 / 2f64.sqrt(), 1.0 / 3.0];
        let w = lyapunov_distance(&x, &p, None);
        assert!((w - 0.12).abs() < 1e-12);
        assert_eq!(classify_region(w, &p), Region::Outer);
        assert_eq!(classify_region(0.07, &p), Region::Annulus);
        assert_eq!(classify_region(0.01, &p), Region::Inner);
        let _ = hypnodisk_payoff(&p, &x).unwrap();
    }

    fn synthetic(f: impl Fn(f64) -> Vec<f64>, t_end: f64, dt: f64) -> Trajectory {
        let mut tr = Trajectory::new();
        let steps = (t_end / dt).round() as usize;
        for k in 0..=steps {
            let t = k as f64 * dt;
            tr.push(t, PopulationState::validate(&f(t), 1e-9).unwrap(), None).unwrap();
        }
        tr
    }

    #[test]
    fn tail_stats_examples() {
        let c = synthetic(|_| vec![0.2, 0.8], 100.0, 0.1);
        let s = tail_stats(&c, 0.25).unwrap();
        assert_eq!(s.min[0], 0.2);
        assert_eq!(s.max[0], 0.2);
        assert!((s.mean[0] - 0.2).abs() < 1e-15);
        let osc = synthetic(|t| {
            let a = 0.15 + 0.05 * (t * std::f64::consts::TAU / 10.0).sin();
            vec![a, 1.0 - a]
        }, 200.0, 0.05);
        let s = tail_stats(&osc, 0.25).unwrap();
        assert!((s.min[0] - 0.1).abs() < 1e-6);
        assert!(s.min[0] <= s.mean[0] && s.mean[0] <= s.max[0]);
        let short = synthetic(|_| vec![0.5, 0.5], 1.0, 0.1);
        assert!(matches!(tail_stats(&short, 0.5), Err(Error::TooShort { .. })));
        assert!(tail_stats(&c, 1.0).is_err());
    }

    #[test]
    fn liminf_widens_to_two_periods() {
        let osc = synthetic(|t| {
            let a = 0.15 + 0.05 * (t * std::f64::consts::TAU / 40.0).sin();
            vec![a, 1.0 - a]
        }, 200.0, 0.05);
        let est = liminf_estimate(&osc, 0, None, 0.1).unwrap();
        let p = est.period.unwrap();
        assert!((p - 40.0).abs() < 0.5, "{p}");
        assert!(est.periods_in_window.unwrap() >= 2.0 - 1e-9);
        assert!((est.value - 0.1).abs() < 1e-6);
    }

    #[test]
    fn twin_ratio_examples() {
        let tr = synthetic(|t| {
            let x3 = 0.2;
            let x4 = 0.2 - 0.1 * (-t).exp();
            vec![0.3, 0.6 - x3 - x4 + 0.1, x3, x4 - 0.0]
        }, 10.0, 0.1);
        let v = twin_ratio_series(&tr, 3, 2);
        assert!(v.monotone_toward_one);
        assert!(v.terminal_distance.unwrap() < 1e-4);
        let same = twin_ratio_series(&tr, 2, 2);
        assert!(same.ratios.iter().all(|r| *r == Some(1.0)));
    }
}
