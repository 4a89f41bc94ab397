//! JSON scenario configuration.

use std::path::Path;

use imitation_core::analysis::AdvantageMode;
use imitation_core::dynamics::FieldKind;
use imitation_core::games::{self, HypnodiskParams, PayoffFunction};
use imitation_core::integrate::{Controller, IntegratorConfig};
use imitation_core::protocols::RevisionProtocol;
use imitation_core::simplex::{sample_uniform, PopulationState, STATE_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A configuration problem, located by a JSON pointer.
#[derive(Debug, thiserror::Error)]
#[error("{pointer}: {message}")]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(pointer: impl Into<String>, message: impl ToString) -> Self {
        Self { pointer: pointer.into(), message: message.to_string() }
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&escape(key)),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses JSON text, reporting the location of the first error.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        let message = e.into_inner().to_string();
        ConfigError { pointer: refine(text, pointer, &message), message }
    })
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn between<'a>(message: &'a str, start: &str, end: char) -> Option<&'a str> {
    let rest = &message[message.find(start)? + start.len()..];
    Some(&rest[..rest.find(end)?])
}

/// Internally tagged enums buffer their content, so errors inside them are
/// reported at the enum itself. Narrow the pointer down when the message
/// names a field, or when exactly one value below it matches the unexpected
/// value quoted in the message.
fn refine(text: &str, pointer: String, message: &str) -> String {
    let Ok(root) = serde_json::from_str::<serde_json::Value>(text) else { return pointer };
    let base = if pointer == "/" { "" } else { pointer.as_str() };
    let Some(node) = root.pointer(base) else { return pointer };
    if let Some(field) = between(message, "unknown field `", '`') {
        if node.get(field).is_some() {
            return format!("{base}/{}", escape(field));
        }
    }
    if message.starts_with("unknown variant") && node.get("kind").is_some() {
        return format!("{base}/kind");
    }
    let Some(unexpected) = message
        .strip_prefix("invalid type: ")
        .or_else(|| message.strip_prefix("invalid value: "))
        .and_then(|m| m.split(", expected").next())
    else {
        return pointer;
    };
    let mut hits = Vec::new();
    collect_matches(node, base.to_string(), unexpected, &mut hits);
    if hits.len() == 1 {
        hits.pop().unwrap()
    } else {
        pointer
    }
}

fn describe(v: &serde_json::Value) -> Vec<String> {
    use serde_json::Value;
    match v {
        Value::Null => vec!["null".into(), "unit value".into()],
        Value::Bool(b) => vec![format!("boolean `{b}`")],
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                vec![format!("integer `{i}`")]
            } else if let Some(u) = n.as_u64() {
                vec![format!("integer `{u}`")]
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                vec![format!("floating point `{f}`"), format!("floating point `{f:?}`")]
            }
        }
        Value::String(s) => vec![format!("string {s:?}")],
        Value::Array(_) => vec!["sequence".into()],
        Value::Object(_) => vec!["map".into()],
    }
}

fn collect_matches(v: &serde_json::Value, at: String, unexpected: &str, hits: &mut Vec<String>) {
    match v {
        serde_json::Value::Array(items) => {
            for (k, item) in items.iter().enumerate() {
                collect_matches(item, format!("{at}/{k}"), unexpected, hits);
            }
        }
        serde_json::Value::Object(map) => {
            for (key, item) in map {
                collect_matches(item, format!("{at}/{}", escape(key)), unexpected, hits);
            }
        }
        _ => {}
    }
    if !at.is_empty() && describe(v).iter().any(|d| d == unexpected) {
        hits.push(at);
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
    Constant {
        payoffs: Vec<f64>,
    },
    Rps,
    RpsFeebleTwin {
        d: f64,
    },
    Hypnodisk {
        inner: f64,
        outer: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// Hypnodisk with strategy 3 copied and the copy penalised by `eps`.
    HypnodiskFeebleTwin {
        inner: f64,
        outer: f64,
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// Appends an exact copy of strategy `of`.
    Twin {
        base: Box<GameSpec>,
        of: usize,
    },
    /// Subtracts `eps` from the payoff of `strategy`.
    Penalized {
        base: Box<GameSpec>,
        strategy: usize,
        eps: f64,
    },
}

impl GameSpec {
    pub fn build(&self) -> imitation_core::Result<PayoffFunction> {
        let params = |inner: f64, outer: f64, center: &Option<Vec<f64>>| match center {
            Some(c) => HypnodiskParams::new(c.clone(), inner, outer),
            None => HypnodiskParams::barycentric(inner, outer),
        };
        match self {
            Self::Matrix { matrix } => PayoffFunction::matrix(matrix.clone()),
            Self::Constant { payoffs } => {
                if payoffs.len() < 2 || payoffs.iter().any(|v| !v.is_finite()) {
                    return Err(imitation_core::Error::InvalidParameter(
                        "constant game needs at least 2 finite payoffs".into(),
                    ));
                }
                Ok(PayoffFunction::Constant(payoffs.clone()))
            }
            Self::Rps => Ok(PayoffFunction::Matrix(games::rps())),
            Self::RpsFeebleTwin { d } => Ok(PayoffFunction::Matrix(games::rps_feeble_twin(*d)?)),
            Self::Hypnodisk { inner, outer, center } => {
                PayoffFunction::hypnodisk(params(*inner, *outer, center)?)
            }
            Self::HypnodiskFeebleTwin { inner, outer, eps, center } => {
                games::hypnodisk_feeble_twin(params(*inner, *outer, center)?, *eps)
            }
            Self::Twin { base, of } => games::add_twin(base.build()?, *of),
            Self::Penalized { base, strategy, eps } => games::penalize(base.build()?, *strategy, *eps),
        }
    }

    /// Hypnodisk parameters and whether strategy 3 has been twinned.
    pub fn hypnodisk(&self) -> Option<(HypnodiskParams, bool)> {
        let params = |inner: f64, outer: f64, center: &Option<Vec<f64>>| {
            Some(HypnodiskParams {
                center: center.clone().unwrap_or_else(|| vec![1.0 / 3.0; 3]),
                inner,
                outer,
            })
        };
        match self {
            Self::Hypnodisk { inner, outer, center } => params(*inner, *outer, center).map(|p| (p, false)),
            Self::HypnodiskFeebleTwin { inner, outer, center, .. } => {
                params(*inner, *outer, center).map(|p| (p, true))
            }
            Self::Twin { base, of } => {
                let (p, twinned) = base.hypnodisk()?;
                (!twinned && *of == 2).then_some((p, true))
            }
            Self::Penalized { base, .. } => base.hypnodisk(),
            _ => None,
        }
    }
}

/// `x[larger] >= x[smaller] + margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gap {
    pub larger: usize,
    pub smaller: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomStarts {
    pub count: usize,
    /// Overrides the scenario seed for this sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Rejection constraint on sampled states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<Gap>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomStarts>,
}

impl InitialConditions {
    /// Explicit states followed by sampled ones.
    pub fn resolve(&self, n: usize, seed: u64) -> Result<Vec<PopulationState>, ConfigError> {
        let mut out = Vec::new();
        for (k, s) in self.states.iter().enumerate() {
            if s.len() != n {
                return Err(ConfigError::at(
                    format!("/initial/states/{k}"),
                    format!("expected {n} entries, got {}", s.len()),
                ));
            }
            let state = PopulationState::validate(s, STATE_TOL)
                .map_err(|e| ConfigError::at(format!("/initial/states/{k}"), e))?;
            out.push(state);
        }
        if let Some(r) = &self.random {
            if let Some(g) = r.gap {
                if g.larger >= n || g.smaller >= n || g.margin >= 1.0 {
                    return Err(ConfigError::at("/initial/random/gap", "constraint cannot be met"));
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed.unwrap_or(seed));
            let mut tries = 0usize;
            while out.len() < self.states.len() + r.count {
                tries += 1;
                if tries > 1000 * (r.count + 1) {
                    return Err(ConfigError::at("/initial/random", "rejection sampling did not converge"));
                }
                let x = sample_uniform(n, &mut rng);
                if let Some(g) = r.gap {
                    if x[g.larger] < x[g.smaller] + g.margin {
                        continue;
                    }
                }
                out.push(x);
            }
        }
        if out.is_empty() {
            return Err(ConfigError::at("/initial", "no initial conditions given"));
        }
        Ok(out)
    }
}

/// Per-trajectory and per-field analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    TailStats,
    TwinRatio { i: usize, j: usize },
    Liminf { component: usize },
    /// Distance to the hypnodisk equilibrium (game must be a hypnodisk).
    Lyapunov,
    PositiveCorrelation,
    Monotone,
    Imitation,
    Advantage { i: usize, j: usize, mode: AdvantageMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnilateralSpec {
    pub eps: f64,
    pub controller: Controller,
    pub protocol: RevisionProtocol,
}

fn default_window() -> f64 {
    0.25
}

fn default_check_states() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unilateral: Option<UnilateralSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default = "default_window")]
    pub tail_window: f64,
    /// Number of sampled states for condition checks.
    #[serde(default = "default_check_states")]
    pub check_states: usize,
    #[serde(default)]
    pub seed: u64,
}

/// What a scenario integrates.
pub enum Model {
    Field(imitation_core::dynamics::VectorField),
    Unilateral(UnilateralSpec),
}

impl ScenarioConfig {
    pub fn arity(&self) -> Result<usize, ConfigError> {
        match (&self.game, &self.unilateral) {
            (Some(g), None) => Ok(g.build().map_err(|e| ConfigError::at("/game", e))?.arity()),
            (None, Some(_)) => Ok(3),
            (Some(_), Some(_)) => Err(ConfigError::at("/unilateral", "give either `game` or `unilateral`, not both")),
            (None, None) => Err(ConfigError::at("/game", "missing `game` (or `unilateral`)")),
        }
    }

    /// Checks references and arities and builds the model.
    pub fn model(&self) -> Result<Model, ConfigError> {
        self.integrator.validate().map_err(|e| ConfigError::at("/integrator", e))?;
        if !(self.tail_window > 0.0 && self.tail_window < 1.0) {
            return Err(ConfigError::at("/tail_window", "must be in (0, 1)"));
        }
        let n = self.arity()?;
        for (k, a) in self.analyses.iter().enumerate() {
            let ptr = format!("/analyses/{k}");
            let idx: Vec<usize> = match a {
                AnalysisSpec::TwinRatio { i, j } | AnalysisSpec::Advantage { i, j, .. } => vec![*i, *j],
                AnalysisSpec::Liminf { component } => vec![*component],
                _ => vec![],
            };
            if let Some(bad) = idx.iter().find(|&&i| i >= n) {
                return Err(ConfigError::at(ptr, format!("strategy {bad} out of range for {n} strategies")));
            }
            if matches!(a, AnalysisSpec::Lyapunov) && self.game.as_ref().and_then(GameSpec::hypnodisk).is_none() {
                return Err(ConfigError::at(ptr, "lyapunov analysis needs a hypnodisk game"));
            }
            let field_check = matches!(
                a,
                AnalysisSpec::PositiveCorrelation
                    | AnalysisSpec::Monotone
                    | AnalysisSpec::Imitation
                    | AnalysisSpec::Advantage { .. }
            );
            if field_check && self.unilateral.is_some() {
                return Err(ConfigError::at(ptr, "condition checks need `game` and `field`"));
            }
        }
        if let Some(u) = &self.unilateral {
            if self.field.is_some() {
                return Err(ConfigError::at("/field", "`field` is not used with `unilateral`"));
            }
            u.controller.validate().map_err(|e| ConfigError::at("/unilateral/controller", e))?;
            u.protocol.validate().map_err(|e| ConfigError::at("/unilateral/protocol", e))?;
            if !(u.eps >= 0.0 && u.eps.is_finite()) {
                return Err(ConfigError::at("/unilateral/eps", "must be >= 0"));
            }
            return Ok(Model::Unilateral(u.clone()));
        }
        let game = self
            .game
            .as_ref()
            .expect("arity() checked")
            .build()
            .map_err(|e| ConfigError::at("/game", e))?;
        let kind = self.field.clone().ok_or_else(|| ConfigError::at("/field", "missing `field`"))?;
        let field = imitation_core::dynamics::VectorField::new(kind, game)
            .map_err(|e| ConfigError::at("/field", e))?;
        // probe once so that protocol/game mismatches surface as config errors
        let probe = PopulationState::barycenter(n);
        field.eval(probe.as_slice()).map_err(|e| ConfigError::at("/field", e))?;
        Ok(Model::Field(field))
    }
}
