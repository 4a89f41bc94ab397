//! Two-step revision protocols `rho_ij = p_ij * r_ij`.
//!
//! The first step (a [`SelectionRule`]) decides which strategy a revising
//! agent considers; the second step (an [`AdoptionRule`]) decides how often
//! the candidate is actually adopted. Selection probabilities for the
//! "meet several agents" rules are computed exactly by enumerating every
//! multinomial draw of the agents met, and can be cross-checked against a
//! Monte-Carlo simulation of the meeting process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{payoff_bound, PayoffFunction, SamplingPlan};

/// Largest number of agents met for which exact enumeration is attempted.
pub const MAX_ENUM_M: usize = 12;
/// Largest number of strategies for which exact enumeration is attempted.
pub const MAX_ENUM_N: usize = 8;

/// Law of the (bounded) number of agents met, as `P(m = k)` for `k = 1..`.
///
/// Deserializes from either an integer (deterministic `m`) or an array of
/// probabilities indexed from `m = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMDist", into = "RawMDist")]
pub struct MDistribution {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawMDist {
    Fixed(usize),
    Table(Vec<f64>),
}

impl TryFrom<RawMDist> for MDistribution {
    type Error = Error;

    fn try_from(raw: RawMDist) -> Result<Self> {
        match raw {
            RawMDist::Fixed(m) => Self::fixed(m),
            RawMDist::Table(t) => Self::table(t),
        }
    }
}

impl From<MDistribution> for RawMDist {
    fn from(d: MDistribution) -> Self {
        match d.fixed_value() {
            Some(m) => RawMDist::Fixed(m),
            None => RawMDist::Table(d.probs),
        }
    }
}

impl MDistribution {
    pub fn fixed(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        let mut probs = vec![0.0; m];
        probs[m - 1] = 1.0;
        Ok(Self { probs })
    }

    pub fn table(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(
                "m-distribution needs non-negative finite entries".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "m-distribution sums to {total}, expected 1"
            )));
        }
        let mut probs = probs;
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        Ok(Self { probs })
    }

    pub fn max_m(&self) -> usize {
        self.probs.len()
    }

    /// `P(m = k)`.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn fixed_value(&self) -> Option<usize> {
        let support: Vec<usize> = self.support().collect();
        (support.len() == 1).then(|| support[0])
    }

    /// Values of `m` with positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, _)| k + 1)
    }

    /// `P(m >= k)`.
    pub fn tail(&self, k: usize) -> f64 {
        self.probs.iter().skip(k.saturating_sub(1)).sum()
    }

    /// `E[phi(m)]`.
    pub fn expect(&self, phi: impl Fn(usize) -> f64) -> f64 {
        self.support().map(|m| self.prob(m) * phi(m)).sum()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k + 1;
            }
        }
        self.max_m()
    }
}

/// Step 1 of a revision protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionRule {
    /// Meet one agent uniformly at random: `p_ij = x_j`.
    Fair,
    /// Meet `m` agents, list their strategies, pick one entry of the list.
    ListSample { m: MDistribution },
    /// Meet `m` agents and pick the most played strategy among them.
    Majority { m: MDistribution },
    /// Draw agents until one plays another strategy, at most `m` times.
    RetryOther { m: MDistribution },
    /// Meet `m` agents; keep the own strategy if any of them plays it.
    Confirmation { m: MDistribution },
    /// Pick one of the `N` strategies uniformly (not imitative).
    UniformOverStrategies,
    /// Use `first` with probability `weight`, `second` otherwise.
    Mixture { weight: f64, first: Box<SelectionRule>, second: Box<SelectionRule> },
}

/// Shape of `lambda_ij` in `p_ij = lambda_ij x_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaForm {
    /// `lambda_ij = 1`.
    Constant,
    /// `lambda_ij = lambda_j(x)`: depends on the candidate only.
    Target,
    /// `lambda_ij = lambda_i(x)`: depends on the revising agent only.
    Source,
    General,
    NotImitative,
}

/// Which strategies the first step favours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionBias {
    Neutral,
    Rare,
    Frequent,
    Mixed,
    Innovative,
}

impl SelectionRule {
    pub fn list_sample(m: usize) -> Result<Self> {
        Ok(Self::ListSample { m: MDistribution::fixed(m)? })
    }

    pub fn majority(m: usize) -> Result<Self> {
        Ok(Self::Majority { m: MDistribution::fixed(m)? })
    }

    pub fn retry_other(m: usize) -> Result<Self> {
        Ok(Self::RetryOther { m: MDistribution::fixed(m)? })
    }

    pub fn confirmation(m: usize) -> Result<Self> {
        Ok(Self::Confirmation { m: MDistribution::fixed(m)? })
    }

    pub fn mixture(weight: f64, first: SelectionRule, second: SelectionRule) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!("mixture weight {weight} not in [0, 1]")));
        }
        Ok(Self::Mixture { weight, first: Box::new(first), second: Box::new(second) })
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Mixture { weight, first, second } = self {
            if !(0.0..=1.0).contains(weight) {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {weight} not in [0, 1]"
                )));
            }
            first.validate()?;
            second.validate()?;
        }
        Ok(())
    }

    pub fn is_imitative(&self) -> bool {
        match self {
            Self::UniformOverStrategies => false,
            Self::Mixture { first, second, .. } => first.is_imitative() && second.is_imitative(),
            _ => true,
        }
    }

    pub fn lambda_form(&self) -> LambdaForm {
        match self {
            Self::Fair => LambdaForm::Constant,
            Self::ListSample { m } | Self::Majority { m } => {
                if m.tail(3) > 0.0 {
                    LambdaForm::Target
                } else {
                    LambdaForm::Constant
                }
            }
            Self::RetryOther { m } | Self::Confirmation { m } => {
                if m.tail(2) > 0.0 {
                    LambdaForm::Source
                } else {
                    LambdaForm::Constant
                }
            }
            Self::UniformOverStrategies => LambdaForm::NotImitative,
            Self::Mixture { first, second, .. } => {
                match (first.lambda_form(), second.lambda_form()) {
                    (LambdaForm::NotImitative, _) | (_, LambdaForm::NotImitative) => {
                        LambdaForm::NotImitative
                    }
                    (LambdaForm::Constant, other) | (other, LambdaForm::Constant) => other,
                    (a, b) if a == b => a,
                    _ => LambdaForm::General,
                }
            }
        }
    }

    /// Declared direction of the first step's bias.
    pub fn bias(&self) -> SelectionBias {
        match self {
            Self::Fair => SelectionBias::Neutral,
            Self::ListSample { m } if m.tail(3) > 0.0 => SelectionBias::Rare,
            Self::Majority { m } if m.tail(3) > 0.0 => SelectionBias::Frequent,
            Self::RetryOther { m } if m.tail(2) > 0.0 => SelectionBias::Rare,
            Self::Confirmation { m } if m.tail(2) > 0.0 => SelectionBias::Frequent,
            Self::ListSample { .. }
            | Self::Majority { .. }
            | Self::RetryOther { .. }
            | Self::Confirmation { .. } => SelectionBias::Neutral,
            Self::UniformOverStrategies => SelectionBias::Innovative,
            Self::Mixture { weight, first, second } => {
                let a = if *weight > 0.0 { first.bias() } else { SelectionBias::Neutral };
                let b = if *weight < 1.0 { second.bias() } else { SelectionBias::Neutral };
                match (a, b) {
                    (SelectionBias::Neutral, other) | (other, SelectionBias::Neutral) => other,
                    (a, b) if a == b => a,
                    _ => SelectionBias::Mixed,
                }
            }
        }
    }

    fn enumeration_guard(&self, n: usize) -> Result<()> {
        match self {
            Self::ListSample { m } | Self::Majority { m } => {
                if m.max_m() > MAX_ENUM_M || n > MAX_ENUM_N {
                    return Err(Error::EnumerationTooLarge { m: m.max_m(), n });
                }
                Ok(())
            }
            Self::Mixture { first, second, .. } => {
                first.enumeration_guard(n)?;
                second.enumeration_guard(n)
            }
            _ => Ok(()),
        }
    }

    /// Exact selection probabilities `p_ij`, `j != i`, as a length-`N` vector
    /// with a zero in position `i`. The deficit `1 - sum_j p_ij` is the
    /// probability of keeping the current strategy.
    pub fn selection_prob(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if i >= n {
            return Err(Error::StrategyOutOfRange { index: i, arity: n });
        }
        self.enumeration_guard(n)?;
        let mut p = vec![0.0; n];
        self.selection_into(i, x, &mut p);
        Ok(p)
    }

    fn selection_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        match self {
            Self::Fair => out.copy_from_slice(x),
            Self::ListSample { m } => candidate_distribution(m, x, Tally::List, out),
            Self::Majority { m } => candidate_distribution(m, x, Tally::Majority, out),
            Self::RetryOther { m } => {
                let lambda = retry_lambda(m, x[i]);
                for (o, &xj) in out.iter_mut().zip(x) {
                    *o = lambda * xj;
                }
            }
            Self::Confirmation { m } => {
                let lambda = confirmation_lambda(m, x[i]);
                for (o, &xj) in out.iter_mut().zip(x) {
                    *o = lambda * xj;
                }
            }
            Self::UniformOverStrategies => out.fill(1.0 / n as f64),
            Self::Mixture { weight, first, second } => {
                let mut a = vec![0.0; n];
                let mut b = vec![0.0; n];
                first.selection_into(i, x, &mut a);
                second.selection_into(i, x, &mut b);
                for k in 0..n {
                    out[k] = weight * a[k] + (1.0 - weight) * b[k];
                }
            }
        }
        out[i] = 0.0;
    }

    /// Candidate law when it does not depend on the revising agent's strategy.
    fn shared_candidates(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = x.len();
        match self {
            Self::Fair => Some(x.to_vec()),
            Self::UniformOverStrategies => Some(vec![1.0 / n as f64; n]),
            Self::ListSample { m } | Self::Majority { m } => {
                let tally = if matches!(self, Self::ListSample { .. }) {
                    Tally::List
                } else {
                    Tally::Majority
                };
                let mut out = vec![0.0; n];
                candidate_distribution(m, x, tally, &mut out);
                Some(out)
            }
            _ => None,
        }
    }

    /// `lambda_ij = p_ij / x_j`. Entries that are undefined (`j == i`, or
    /// `x_j = 0` for rules without a closed form) are `None`.
    pub fn lambda_factors(&self, i: usize, x: &[f64]) -> Result<Vec<Option<f64>>> {
        let n = x.len();
        if i >= n {
            return Err(Error::StrategyOutOfRange { index: i, arity: n });
        }
        if !self.is_imitative() {
            return Err(Error::NotImitative);
        }
        self.enumeration_guard(n)?;
        let mut out = self.lambda_unchecked(i, x);
        out[i] = None;
        Ok(out)
    }

    fn lambda_unchecked(&self, i: usize, x: &[f64]) -> Vec<Option<f64>> {
        let n = x.len();
        match self {
            Self::Fair => vec![Some(1.0); n],
            Self::RetryOther { m } => vec![Some(retry_lambda(m, x[i])); n],
            Self::Confirmation { m } => vec![Some(confirmation_lambda(m, x[i])); n],
            Self::ListSample { .. } | Self::Majority { .. } => self
                .shared_candidates(x)
                .expect("candidate law is shared")
                .iter()
                .zip(x)
                .map(|(&pj, &xj)| (xj > 0.0).then(|| pj / xj))
                .collect(),
            Self::UniformOverStrategies => vec![None; n],
            Self::Mixture { weight, first, second } => {
                let a = first.lambda_unchecked(i, x);
                let b = second.lambda_unchecked(i, x);
                a.into_iter()
                    .zip(b)
                    .map(|(a, b)| Some(weight * a? + (1.0 - weight) * b?))
                    .collect()
            }
        }
    }

    /// Monte-Carlo estimate of [`SelectionRule::selection_prob`] obtained by
    /// literally simulating the meeting process `samples` times.
    pub fn selection_prob_mc(
        &self,
        i: usize,
        x: &[f64],
        samples: usize,
        seed: u64,
    ) -> Result<McEstimate> {
        let n = x.len();
        if i >= n {
            return Err(Error::StrategyOutOfRange { index: i, arity: n });
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        let cumulative: Vec<f64> = x
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = vec![0u64; n];
        let mut scratch = Scratch::new(n);
        for _ in 0..samples {
            if let Some(j) = self.simulate_once(i, &cumulative, &mut rng, &mut scratch) {
                if j != i {
                    hits[j] += 1;
                }
            }
        }
        let total = samples as f64;
        let mean: Vec<f64> = hits.iter().map(|&h| h as f64 / total).collect();
        let std_err = mean.iter().map(|&p| (p * (1.0 - p) / total).sqrt()).collect();
        Ok(McEstimate { mean, std_err, samples })
    }

    /// One revision opportunity of an `i`-strategist; returns the candidate
    /// (possibly `i` itself) or `None` when the agent keeps its strategy.
    fn simulate_once<R: Rng + ?Sized>(
        &self,
        i: usize,
        cumulative: &[f64],
        rng: &mut R,
        scratch: &mut Scratch,
    ) -> Option<usize> {
        let n = cumulative.len();
        match self {
            Self::Fair => Some(draw(cumulative, rng)),
            Self::UniformOverStrategies => Some(rng.random_range(0..n)),
            Self::ListSample { m } => {
                let m = m.sample(rng);
                scratch.counts.fill(0);
                for _ in 0..m {
                    scratch.counts[draw(cumulative, rng)] += 1;
                }
                scratch.listed.clear();
                scratch
                    .listed
                    .extend((0..n).filter(|&k| scratch.counts[k] > 0));
                Some(scratch.listed[rng.random_range(0..scratch.listed.len())])
            }
            Self::Majority { m } => {
                let m = m.sample(rng);
                scratch.counts.fill(0);
                for _ in 0..m {
                    scratch.counts[draw(cumulative, rng)] += 1;
                }
                let best = *scratch.counts.iter().max().expect("n >= 1");
                scratch.listed.clear();
                scratch
                    .listed
                    .extend((0..n).filter(|&k| scratch.counts[k] == best));
                Some(scratch.listed[rng.random_range(0..scratch.listed.len())])
            }
            Self::RetryOther { m } => {
                let m = m.sample(rng);
                (0..m).map(|_| draw(cumulative, rng)).find(|&j| j != i)
            }
            Self::Confirmation { m } => {
                let m = m.sample(rng);
                scratch.listed.clear();
                for _ in 0..m {
                    scratch.listed.push(draw(cumulative, rng));
                }
                if scratch.listed.contains(&i) {
                    None
                } else {
                    Some(scratch.listed[rng.random_range(0..m)])
                }
            }
            Self::Mixture { weight, first, second } => {
                if rng.random::<f64>() < *weight {
                    first.simulate_once(i, cumulative, rng, scratch)
                } else {
                    second.simulate_once(i, cumulative, rng, scratch)
                }
            }
        }
    }
}

struct Scratch {
    counts: Vec<usize>,
    listed: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { counts: vec![0; n], listed: Vec::with_capacity(n) }
    }
}

fn draw<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Monte-Carlo selection probabilities with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub samples: usize,
}

/// `E[1 + x_i + ... + x_i^(m-1)]`.
fn retry_lambda(m: &MDistribution, xi: f64) -> f64 {
    m.expect(|m| (0..m).map(|k| xi.powi(k as i32)).sum())
}

/// `E[(1 - x_i)^(m-1)]`.
fn confirmation_lambda(m: &MDistribution, xi: f64) -> f64 {
    m.expect(|m| (1.0 - xi).powi(m as i32 - 1))
}

#[derive(Clone, Copy)]
enum Tally {
    List,
    Majority,
}

/// Law of the candidate strategy when `m` agents are met, over all `N`
/// strategies (the revising agent's own included).
fn candidate_distribution(m: &MDistribution, x: &[f64], tally: Tally, out: &mut [f64]) {
    let n = x.len();
    let mut acc = vec![KahanSum::default(); n];
    let mut counts = vec![0usize; n];
    for size in m.support() {
        let pm = m.prob(size);
        for_each_composition(&mut counts, size, &mut |c| {
            let w = pm * multinomial_weight(c, x);
            if w == 0.0 {
                return;
            }
            match tally {
                Tally::List => {
                    let listed = c.iter().filter(|&&k| k > 0).count() as f64;
                    for k in 0..n {
                        if c[k] > 0 {
                            acc[k].add(w / listed);
                        }
                    }
                }
                Tally::Majority => {
                    let best = *c.iter().max().expect("n >= 1");
                    let tied = c.iter().filter(|&&k| k == best).count() as f64;
                    for k in 0..n {
                        if c[k] == best {
                            acc[k].add(w / tied);
                        }
                    }
                }
            }
        });
    }
    for (o, a) in out.iter_mut().zip(acc) {
        *o = a.value();
    }
}

/// Calls `f` on every vector of `counts.len()` non-negative integers summing
/// to `total`.
fn for_each_composition(counts: &mut [usize], total: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(counts: &mut [usize], pos: usize, remaining: usize, f: &mut dyn FnMut(&[usize])) {
        if pos == counts.len() - 1 {
            counts[pos] = remaining;
            f(counts);
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c;
            rec(counts, pos + 1, remaining - c, f);
        }
    }
    rec(counts, 0, total, f);
}

fn multinomial_weight(counts: &[usize], x: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    let mut coef = factorial(total);
    let mut prod = 1.0;
    for (&c, &xk) in counts.iter().zip(x) {
        coef /= factorial(c);
        prod *= xk.powi(c as i32);
    }
    coef * prod
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

/// Probability that `i` is picked from the list of strategies met, given that
/// `m_tilde` of the agents met play `i` or `j` and the others play `q`
/// distinct strategies; `y_i = x_i / (x_i + x_j)`.
pub fn conditional_selection_given_event(q: usize, m_tilde: usize, y_i: f64) -> f64 {
    let yi_m = y_i.powi(m_tilde as i32);
    let yj_m = (1.0 - y_i).powi(m_tilde as i32);
    yi_m / (q as f64 + 1.0) + (1.0 - yi_m - yj_m) / (q as f64 + 2.0)
}

/// Positive scalar map used in product-form adoption rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarMap {
    Constant { value: f64 },
    /// `u -> exp(rate * u)`; decreasing for negative rates.
    Exp { rate: f64 },
}

impl ScalarMap {
    pub fn apply(&self, u: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Exp { rate } => (rate * u).exp(),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Exp { rate } => *rate <= 0.0,
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Exp { rate } => *rate >= 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } if !(value.is_finite() && *value >= 0.0) => Err(
                Error::InvalidParameter(format!("scalar map constant {value} must be >= 0")),
            ),
            Self::Exp { rate } if !rate.is_finite() => {
                Err(Error::InvalidParameter("scalar map rate must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Step 2 of a revision protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdoptionRule {
    /// `r_ij = K + F_j`.
    Success {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
    },
    /// `r_ij = K - F_i`.
    Dissatisfaction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
    },
    /// `r_ij = [F_j - F_i]_+`.
    Pairwise,
    /// `r_ij = f(F_i) [F_j - mean F]_+`, with `f = 1` by default.
    AboveAverage {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<ScalarMap>,
    },
    /// `r_ij = g(F_j) [mean F - F_i]_+`, with `g = 1` by default.
    BelowAverage {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<ScalarMap>,
    },
    /// `r_ij = f(F_i) g(F_j)`.
    Product { f: ScalarMap, g: ScalarMap },
}

impl AdoptionRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Success { k: Some(k) } | Self::Dissatisfaction { k: Some(k) }
                if !k.is_finite() =>
            {
                Err(Error::InvalidParameter("baseline K must be finite".into()))
            }
            Self::AboveAverage { f: Some(m) } | Self::BelowAverage { g: Some(m) } => m.validate(),
            Self::Product { f, g } => {
                f.validate()?;
                g.validate()
            }
            _ => Ok(()),
        }
    }

    /// Fills in a missing baseline `K` as `1 + bound`, where `bound` bounds
    /// `|F_i(x)|` over the simplex.
    pub fn with_baseline(&self, bound: f64) -> Self {
        match self {
            Self::Success { k: None } => Self::Success { k: Some(1.0 + bound) },
            Self::Dissatisfaction { k: None } => Self::Dissatisfaction { k: Some(1.0 + bound) },
            other => other.clone(),
        }
    }

    pub fn needs_baseline(&self) -> bool {
        matches!(self, Self::Success { k: None } | Self::Dissatisfaction { k: None })
    }

    /// Rates that are strictly positive everywhere.
    pub fn is_always_positive(&self) -> bool {
        match self {
            Self::Success { .. } | Self::Dissatisfaction { .. } => true,
            Self::Product { f, g } => {
                !matches!(f, ScalarMap::Constant { value } if *value == 0.0)
                    && !matches!(g, ScalarMap::Constant { value } if *value == 0.0)
            }
            _ => false,
        }
    }

    /// Whether the rule satisfies the strict monotonicity condition
    /// `F_i < F_j <=> r_kj - r_jk > r_ki - r_ik`.
    pub fn is_monotone(&self) -> bool {
        match self {
            Self::Success { .. } | Self::Dissatisfaction { .. } | Self::Pairwise => true,
            Self::Product { f, g } => {
                let strict_f = matches!(f, ScalarMap::Exp { rate } if *rate < 0.0);
                let strict_g = matches!(g, ScalarMap::Exp { rate } if *rate > 0.0);
                (f.is_nonincreasing() && g.is_nondecreasing()) && (strict_f || strict_g)
            }
            Self::AboveAverage { .. } | Self::BelowAverage { .. } => false,
        }
    }

    /// Adoption rate `r_ij` at payoffs `payoffs` and state `x`.
    pub fn adoption_rate(&self, i: usize, j: usize, payoffs: &[f64], x: &[f64]) -> Result<f64> {
        let fi = payoffs[i];
        let fj = payoffs[j];
        let rate = match self {
            Self::Success { k } => {
                let k = k.ok_or(Error::UnresolvedBaseline)?;
                if k + fj <= 0.0 {
                    return Err(Error::BaselineViolated { k, payoff: fj, strategy: j });
                }
                k + fj
            }
            Self::Dissatisfaction { k } => {
                let k = k.ok_or(Error::UnresolvedBaseline)?;
                if k - fi <= 0.0 {
                    return Err(Error::BaselineViolated { k, payoff: fi, strategy: i });
                }
                k - fi
            }
            Self::Pairwise => (fj - fi).max(0.0),
            Self::AboveAverage { f } => {
                let avg = mean_payoff(payoffs, x);
                f.as_ref().map_or(1.0, |f| f.apply(fi)) * (fj - avg).max(0.0)
            }
            Self::BelowAverage { g } => {
                let avg = mean_payoff(payoffs, x);
                g.as_ref().map_or(1.0, |g| g.apply(fj)) * (avg - fi).max(0.0)
            }
            Self::Product { f, g } => f.apply(fi) * g.apply(fj),
        };
        Ok(rate)
    }
}

/// Average payoff `sum_k x_k F_k`.
pub fn mean_payoff(payoffs: &[f64], x: &[f64]) -> f64 {
    payoffs.iter().zip(x).map(|(f, w)| f * w).sum()
}

/// Selection rule paired with an adoption rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionProtocol {
    pub selection: SelectionRule,
    pub adoption: AdoptionRule,
}

/// Square matrix of switch rates, row = current strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RateMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Does strategy `i` imitate others (`rho_ij > threshold` for some `j`)?
    pub fn imitates(&self, i: usize, threshold: f64) -> bool {
        (0..self.n).any(|j| j != i && self.get(i, j) > threshold)
    }

    /// Is strategy `i` imitated by others (`rho_ji > threshold` for some `j`)?
    pub fn imitated(&self, i: usize, threshold: f64) -> bool {
        (0..self.n).any(|j| j != i && self.get(j, i) > threshold)
    }
}

impl RevisionProtocol {
    pub fn new(selection: SelectionRule, adoption: AdoptionRule) -> Self {
        Self { selection, adoption }
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        self.adoption.validate()
    }

    /// Resolves a missing baseline `K` against `game` as one plus the largest
    /// payoff magnitude over 10^3 sampled states.
    pub fn resolved_for(&self, game: &PayoffFunction) -> Result<Self> {
        if !self.adoption.needs_baseline() {
            return Ok(self.clone());
        }
        let plan = SamplingPlan { grid_points: 2, random_samples: 1000, seed: 0 };
        let bound = payoff_bound(game, &plan)?;
        Ok(self.with_payoff_bound(bound))
    }

    /// Resolves a missing baseline `K` as `1 + bound`.
    pub fn with_payoff_bound(&self, bound: f64) -> Self {
        Self { selection: self.selection.clone(), adoption: self.adoption.with_baseline(bound) }
    }

    /// Switch rates from precomputed payoffs.
    pub fn switch_rates_with_payoffs(&self, payoffs: &[f64], x: &[f64]) -> Result<RateMatrix> {
        let n = x.len();
        if payoffs.len() != n {
            return Err(Error::Arity { expected: n, got: payoffs.len() });
        }
        self.selection.enumeration_guard(n)?;
        let mut rho = RateMatrix::zeros(n);
        let shared = self.selection.shared_candidates(x);
        let mut p = vec![0.0; n];
        for i in 0..n {
            match &shared {
                Some(c) => {
                    p.copy_from_slice(c);
                    p[i] = 0.0;
                }
                None => self.selection.selection_into(i, x, &mut p),
            }
            for j in 0..n {
                if j == i || p[j] == 0.0 {
                    continue;
                }
                let r = self.adoption.adoption_rate(i, j, payoffs, x)?;
                rho.set(i, j, p[j] * r);
            }
        }
        Ok(rho)
    }
}

/// Switch-rate matrix `rho_ij = p_ij r_ij` with a zero diagonal.
pub fn switch_rates(
    proto: &RevisionProtocol,
    game: &PayoffFunction,
    x: &[f64],
) -> Result<RateMatrix> {
    let payoffs = game.eval(x)?;
    proto.switch_rates_with_payoffs(&payoffs, x)
}
