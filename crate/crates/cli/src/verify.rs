//! Condition checks over a set of protocol combinations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use imitation_core::analysis::{self, AdvantageMode, ConditionReport, Verdict};
use imitation_core::dynamics::mother_field;
use imitation_core::protocols::{AdoptionRule, RevisionProtocol, ScalarMap, SelectionRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GameSpec;
use crate::simulate::check_states;

pub const CONDITIONS: [&str; 5] =
    ["monotone", "positive_correlation", "imitation", "advantage_rarity", "advantage_frequency"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Holds,
    Fails,
    Neutral,
}

impl Expected {
    fn matches(self, v: &Verdict) -> bool {
        matches!(
            (self, v),
            (Self::Holds, Verdict::Holds) | (Self::Fails, Verdict::Fails { .. }) | (Self::Neutral, Verdict::Neutral)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Combo {
    pub name: String,
    pub protocol: RevisionProtocol,
    /// Requested conditions and the verdict each must have.
    #[serde(default)]
    pub expect: BTreeMap<String, Expected>,
}

fn default_game() -> GameSpec {
    GameSpec::Twin {
        base: Box::new(GameSpec::Hypnodisk { inner: 0.05, outer: 0.1, center: None }),
        of: 2,
    }
}

fn default_states() -> usize {
    200
}

fn default_twins() -> Option<(usize, usize)> {
    Some((2, 3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_game")]
    pub game: GameSpec,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default)]
    pub seed: u64,
    /// Twin pair for the advantage checks; `null` skips them.
    #[serde(default = "default_twins")]
    pub twins: Option<(usize, usize)>,
    #[serde(default = "default_combos")]
    pub combos: Vec<Combo>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            game: default_game(),
            states: default_states(),
            seed: 0,
            twins: default_twins(),
            combos: default_combos(),
        }
    }
}

fn combo(name: &str, selection: SelectionRule, adoption: AdoptionRule, expect: &[(&str, Expected)]) -> Combo {
    Combo {
        name: name.into(),
        protocol: RevisionProtocol::new(selection, adoption),
        expect: expect.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// The shipped combinations with their known classification.
pub fn default_combos() -> Vec<Combo> {
    use Expected::*;
    let list = |m: usize| SelectionRule::list_sample(m).expect("m >= 1");
    let majority = |m: usize| SelectionRule::majority(m).expect("m >= 1");
    let retry = |m: usize| SelectionRule::retry_other(m).expect("m >= 1");
    let confirm = |m: usize| SelectionRule::confirmation(m).expect("m >= 1");
    let base = [("positive_correlation", Holds), ("imitation", Holds)];
    let with = |extra: &[(&'static str, Expected)]| -> Vec<(&'static str, Expected)> {
        base.iter().chain(extra).copied().collect()
    };
    vec![
        combo(
            "fair+pairwise",
            SelectionRule::Fair,
            AdoptionRule::Pairwise,
            &with(&[("monotone", Holds), ("advantage_rarity", Neutral), ("advantage_frequency", Neutral)]),
        ),
        combo(
            "list_sample(3)+pairwise",
            list(3),
            AdoptionRule::Pairwise,
            &with(&[("monotone", Fails), ("advantage_rarity", Holds)]),
        ),
        combo("majority(3)+pairwise", majority(3), AdoptionRule::Pairwise, &with(&[("advantage_frequency", Holds)])),
        combo("retry_other(4)+pairwise", retry(4), AdoptionRule::Pairwise, &with(&[("advantage_rarity", Holds)])),
        combo("confirmation(3)+pairwise", confirm(3), AdoptionRule::Pairwise, &with(&[("advantage_frequency", Holds)])),
        combo(
            "fair+success",
            SelectionRule::Fair,
            AdoptionRule::Success { k: None },
            &with(&[("monotone", Holds), ("advantage_rarity", Neutral)]),
        ),
        combo(
            "list_sample(3)+above_average",
            list(3),
            AdoptionRule::AboveAverage { f: Some(ScalarMap::Exp { rate: -1.0 }) },
            &with(&[("advantage_rarity", Holds)]),
        ),
        combo(
            "retry_other(4)+below_average",
            retry(4),
            AdoptionRule::BelowAverage { g: Some(ScalarMap::Exp { rate: 1.0 }) },
            &with(&[("advantage_rarity", Holds)]),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub name: String,
    pub protocol: RevisionProtocol,
    pub reports: Vec<ConditionReport>,
    /// Requested conditions whose verdict differs from the expected one.
    pub mismatches: Vec<String>,
}

impl ComboResult {
    pub fn report(&self, condition: &str) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.name == condition)
    }

    pub fn pass(&self) -> bool {
        self.mismatches.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub game: GameSpec,
    pub states: usize,
    pub seed: u64,
    pub results: Vec<ComboResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.results.iter().all(ComboResult::pass)
    }

    /// One row per combination, one column per condition.
    pub fn table(&self) -> String {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(0).max(11);
        let short = ["mono", "PC", "Im", "AR", "AF"];
        let mut s = format!("{:width$}", "combination");
        for c in short {
            let _ = write!(s, "  {c:>8}");
        }
        s.push_str("  result\n");
        for r in &self.results {
            let _ = write!(s, "{:width$}", r.name);
            for c in CONDITIONS {
                let cell = match r.report(c).map(|rep| &rep.verdict) {
                    Some(Verdict::Holds) => "holds",
                    Some(Verdict::Fails { .. }) => "fails",
                    Some(Verdict::Neutral) => "neutral",
                    Some(Verdict::Inconclusive { .. }) => "n/a",
                    None => "-",
                };
                let mark = if r.mismatches.iter().any(|m| m == c) { "!" } else { "" };
                let _ = write!(s, "  {:>8}", format!("{cell}{mark}"));
            }
            let _ = writeln!(s, "  {}", if r.pass() { "ok" } else { "MISMATCH" });
        }
        s
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> anyhow::Result<VerifyReport> {
    let game = cfg.game.build()?;
    let states = check_states(game.arity(), cfg.states, cfg.seed);
    for c in &cfg.combos {
        if let Some(bad) = c.expect.keys().find(|k| !CONDITIONS.contains(&k.as_str())) {
            anyhow::bail!("combo {}: unknown condition {bad:?}", c.name);
        }
        if cfg.twins.is_none() && c.expect.keys().any(|k| k.starts_with("advantage")) {
            anyhow::bail!("combo {}: advantage conditions need a twin pair", c.name);
        }
    }
    let results = cfg
        .combos
        .par_iter()
        .map(|c| {
            let field = mother_field(c.protocol.clone(), game.clone())?;
            let mut reports = vec![
                analysis::check_monotone(&field, &states)?,
                analysis::check_positive_correlation(&field, &states)?,
                analysis::check_imitation_condition(&field, &states)?,
            ];
            if let Some(tw) = cfg.twins {
                reports.push(analysis::check_advantage(&field, tw, &states, AdvantageMode::Rarity)?);
                reports.push(analysis::check_advantage(&field, tw, &states, AdvantageMode::Frequency)?);
            }
            let mismatches = c
                .expect
                .iter()
                .filter(|(name, want)| {
                    !reports.iter().find(|r| &r.name == *name).is_some_and(|r| want.matches(&r.verdict))
                })
                .map(|(name, _)| name.clone())
                .collect();
            Ok(ComboResult { name: c.name.clone(), protocol: c.protocol.clone(), reports, mismatches })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(VerifyReport { game: cfg.game.clone(), states: cfg.states, seed: cfg.seed, results })
}
