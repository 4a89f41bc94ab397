//! Fixed-step RK4 and adaptive Dormand-Prince 5(4) integration on the
//! simplex, with switching controllers whose switch times are located by
//! bisection.

use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::simplex::{PopulationState, DRIFT_TOL};
use crate::trajectory::Trajectory;

/// Time resolution of located switch events.
pub const EVENT_TOL: f64 = 1e-9;
/// Controllers switching more often than this abort the run.
pub const MAX_SWITCHES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Rk4 { h: f64 },
    Rk45 { rtol: f64, atol: f64, h_min: f64, h_max: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45 { rtol: 1e-8, atol: 1e-10, h_min: 1e-12, h_max: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    pub horizon: f64,
    /// Spacing of stored samples; non-positive stores every step.
    pub sample_stride: f64,
    pub renormalize: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::default(), horizon: 100.0, sample_stride: 0.1, renormalize: true }
    }
}

impl IntegratorConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        Self { horizon, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.method {
            Method::Rk4 { h } if !(h > 0.0 && h.is_finite()) => return bad(format!("step h = {h} must be > 0")),
            Method::Rk45 { rtol, atol, h_min, h_max } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return bad("rtol and atol must be > 0".into());
                }
                if !(h_min > 0.0 && h_max >= h_min && h_max.is_finite()) {
                    return bad(format!("need 0 < h_min <= h_max, got {h_min}, {h_max}"));
                }
            }
            _ => {}
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon {} must be finite and >= 0", self.horizon));
        }
        if !self.sample_stride.is_finite() {
            return bad("sample_stride must be finite".into());
        }
        Ok(())
    }
}

/// Two-action opponent control (action 0 is `L`, action 1 is `R`) or a
/// smooth periodic forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Controller {
    Constant {
        #[serde(default)]
        action: usize,
    },
    /// Plays `L` until `x[component] >= x_max`, then `R` until
    /// `x[component] <= x_min`, and so on.
    Threshold {
        #[serde(default)]
        component: usize,
        x_min: f64,
        x_max: f64,
    },
    /// Probability of `L` is `(1 + sgn(s) |s|^exponent) / 2`, `s = sin(pi t)`.
    SmoothPeriodic {
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
}

fn default_exponent() -> f64 {
    1.0 / 9.0
}

pub const ACTION_NAMES: [&str; 2] = ["L", "R"];

impl Controller {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { action } if *action > 1 => {
                Err(Error::InvalidParameter(format!("action {action} not in {{0, 1}}")))
            }
            Self::Threshold { x_min, x_max, .. } if !(0.0 < *x_min && x_min < x_max && *x_max < 1.0) => {
                Err(Error::InvalidParameter(format!(
                    "threshold needs 0 < x_min < x_max < 1, got {x_min}, {x_max}"
                )))
            }
            Self::SmoothPeriodic { exponent } if !(*exponent > 0.0) => {
                Err(Error::InvalidParameter("exponent must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn initial_action(&self) -> usize {
        match self {
            Self::Constant { action } => *action,
            _ => 0,
        }
    }

    /// Switching function for the current action: the controller switches to
    /// the returned action when the value becomes non-negative.
    fn guard(&self, action: usize, x: &[f64]) -> Option<(f64, usize)> {
        match self {
            Self::Threshold { component, x_min, x_max } => Some(if action == 0 {
                (x[*component] - x_max, 1)
            } else {
                (x_min - x[*component], 0)
            }),
            _ => None,
        }
    }

    /// Opponent's probability of `L` at time `t` under `action`.
    pub fn mixed_action(&self, action: usize, t: f64) -> f64 {
        match self {
            Self::SmoothPeriodic { exponent } => smooth_opponent(t, *exponent),
            _ => {
                if action == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `(1 + sgn(s) |s|^exponent) / 2` with `s = sin(pi t)`.
pub fn smooth_opponent(t: f64, exponent: f64) -> f64 {
    // reduce the phase first: rounding in sin near its zeros is magnified by the root
    let s = (std::f64::consts::PI * t.rem_euclid(2.0)).sin();
    0.5 * (1.0 + s.signum() * s.abs().powf(exponent))
}

/// Right-hand side `(action, t, x, out)`.
pub type Rhs<'a> = dyn FnMut(usize, f64, &[f64], &mut [f64]) -> Result<()> + 'a;

pub fn integrate(field: &VectorField, x0: &PopulationState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if x0.arity() != field.arity() {
        return Err(Error::Arity { expected: field.arity(), got: x0.arity() });
    }
    let mut rhs = |_: usize, _: f64, x: &[f64], out: &mut [f64]| field.eval_into(x, out);
    run(&mut rhs, None, x0, cfg)
}

/// Integrates an autonomous or time-dependent right-hand side.
pub fn integrate_rhs(rhs: &mut Rhs<'_>, x0: &PopulationState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    run(rhs, None, x0, cfg)
}

/// Integrates a system whose right-hand side depends on the controller's
/// current action; switch events are located to within [`EVENT_TOL`] and
/// recorded as `"L->R"` / `"R->L"`.
pub fn integrate_controlled(
    rhs: &mut Rhs<'_>,
    controller: &Controller,
    x0: &PopulationState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    controller.validate()?;
    run(rhs, Some(controller), x0, cfg)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Stepper {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self { k: vec![vec![0.0; n]; 7], tmp: vec![0.0; n] }
    }

    fn rk4(&mut self, f: &mut Rhs<'_>, action: usize, t: f64, x: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        let n = x.len();
        let [k1, k2, k3, k4, ..] = &mut self.k[..] else { unreachable!() };
        f(action, t, x, k1)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(action, t + 0.5 * h, &self.tmp, k2)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(action, t + 0.5 * h, &self.tmp, k3)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * k3[i];
        }
        f(action, t + h, &self.tmp, k4)?;
        for i in 0..n {
            out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    /// Fifth-order solution into `out`; returns the scaled error norm.
    fn dopri(
        &mut self,
        f: &mut Rhs<'_>,
        action: usize,
        t: f64,
        x: &[f64],
        h: f64,
        tols: (f64, f64),
        out: &mut [f64],
    ) -> Result<f64> {
        let n = x.len();
        for s in 0..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for r in 0..s {
                    acc += A[s][r] * self.k[r][i];
                }
                self.tmp[i] = x[i] + h * acc;
            }
            f(action, t + C[s] * h, &self.tmp, &mut self.k[s])?;
        }
        let (rtol, atol) = tols;
        let mut err = 0.0;
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * self.k[s][i];
                lo += B4[s] * self.k[s][i];
            }
            out[i] = x[i] + h * hi;
            let scale = atol + rtol * x[i].abs().max(out[i].abs());
            err += (h * (hi - lo) / scale).powi(2);
        }
        Ok((err / n as f64).sqrt())
    }

    /// One untested step of size `h` (used when bisecting for events).
    fn plain(&mut self, f: &mut Rhs<'_>, method: &Method, action: usize, t: f64, x: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        match *method {
            Method::Rk4 { .. } => self.rk4(f, action, t, x, h, out),
            Method::Rk45 { rtol, atol, .. } => self.dopri(f, action, t, x, h, (rtol, atol), out).map(|_| ()),
        }
    }
}

/// Checks drift and either repairs `x` in place or reports it.
fn settle(x: &mut [f64], t: f64, renormalize: bool) -> Result<PopulationState> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t, state: x.to_vec() });
    }
    let sum: f64 = x.iter().sum();
    let neg = x.iter().fold(0.0f64, |m, &v| m.max(-v));
    let drift = (sum - 1.0).abs().max(neg);
    if drift > DRIFT_TOL {
        return Err(Error::SimplexDrift { t, drift, state: x.to_vec() });
    }
    let state = PopulationState::repaired(x, DRIFT_TOL)?;
    if renormalize {
        x.copy_from_slice(state.as_slice());
    }
    Ok(state)
}

fn run(
    rhs: &mut Rhs<'_>,
    controller: Option<&Controller>,
    x0: &PopulationState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = x0.arity();
    let horizon = cfg.horizon;
    let stride = cfg.sample_stride;
    let mut traj = Trajectory::new();
    let mut x = x0.as_slice().to_vec();
    let mut t = 0.0;
    let mut action = controller.map_or(0, Controller::initial_action);
    let mut switches = 0usize;
    traj.push(0.0, x0.clone(), None)?;
    if let Some(ctrl) = controller {
        // already past a threshold at t = 0: switch immediately
        while let Some((g, next)) = ctrl.guard(action, &x) {
            if g < 0.0 {
                break;
            }
            traj.tag_last(format!("{}->{}", ACTION_NAMES[action], ACTION_NAMES[next]));
            action = next;
            switches += 1;
            if switches > 2 {
                return Err(Error::Chattering(switches));
            }
        }
    }

    let mut stepper = Stepper::new(n);
    let mut next = vec![0.0; n];
    let mut h = match cfg.method {
        Method::Rk4 { h } => h,
        Method::Rk45 { h_max, h_min, .. } => h_max.min(1e-2).max(h_min),
    };
    let mut sample_index = 1u64;
    let sample_time = |k: u64| if stride > 0.0 { (k as f64 * stride).min(horizon) } else { horizon };

    while t < horizon {
        let target = sample_time(sample_index);
        let room = target - t;
        let clamped = h >= room;
        let h_try = if clamped { room } else { h };
        // take one accepted step of size `h_used`
        let h_used;
        match cfg.method {
            Method::Rk4 { .. } => {
                stepper.rk4(rhs, action, t, &x, h_try, &mut next)?;
                h_used = h_try;
            }
            Method::Rk45 { rtol, atol, h_min, h_max } => {
                let mut h_cur = h_try;
                loop {
                    let err = stepper.dopri(rhs, action, t, &x, h_cur, (rtol, atol), &mut next)?;
                    let ok = err <= 1.0 && next.iter().all(|v| v.is_finite());
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if ok {
                        h_used = h_cur;
                        let proposal = (h_cur * factor).min(h_max).max(h_min);
                        // a short step onto a sample time says little about the working step
                        h = if clamped && h_cur == h_try { h.max(proposal) } else { proposal };
                        break;
                    }
                    h_cur *= factor.min(0.9);
                    if h_cur < h_min {
                        return Err(Error::StepUnderflow { t, h: h_cur, state: x.clone() });
                    }
                    h = h_cur;
                }
            }
        }
        let landed = clamped && h_used == h_try;

        if let Some(ctrl) = controller {
            if let Some((g0, to)) = ctrl.guard(action, &x) {
                let (g1, _) = ctrl.guard(action, &next).expect("guard exists");
                if g0 < 0.0 && g1 >= 0.0 {
                    let (mut lo, mut hi) = (0.0, h_used);
                    let mut probe = vec![0.0; n];
                    while hi - lo > EVENT_TOL {
                        let mid = 0.5 * (lo + hi);
                        stepper.plain(rhs, &cfg.method, action, t, &x, mid, &mut probe)?;
                        if ctrl.guard(action, &probe).expect("guard exists").0 >= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    if hi < h_used {
                        stepper.plain(rhs, &cfg.method, action, t, &x, hi, &mut next)?;
                    }
                    let te = if hi < h_used { t + hi } else if landed { target } else { t + h_used };
                    let state = settle(&mut next, te, cfg.renormalize)?;
                    x.copy_from_slice(&next);
                    t = te;
                    let tag = format!("{}->{}", ACTION_NAMES[action], ACTION_NAMES[to]);
                    if traj.last_time() == Some(t) {
                        traj.tag_last(tag);
                    } else {
                        traj.push(t, state, Some(tag))?;
                    }
                    if landed && hi >= h_used {
                        sample_index += 1;
                    }
                    action = to;
                    switches += 1;
                    if switches > MAX_SWITCHES {
                        return Err(Error::Chattering(switches));
                    }
                    continue;
                }
            }
        }

        t = if landed { target } else { t + h_used };
        let state = settle(&mut next, t, cfg.renormalize)?;
        if cfg.renormalize {
            x.copy_from_slice(state.as_slice());
        } else {
            x.copy_from_slice(&next);
        }
        if landed {
            sample_index += 1;
            traj.push(t, state, None)?;
        } else if stride <= 0.0 {
            traj.push(t, state, None)?;
        }
    }
    Ok(traj)
}
