//! Output bundles: jobs, manifests and figure recipes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use imitation_core::dynamics::FieldKind;
use imitation_core::integrate::{Controller, IntegratorConfig};
use imitation_core::protocols::{AdoptionRule, RevisionProtocol, SelectionRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{AnalysisSpec, Gap, GameSpec, InitialConditions, RandomStarts, ScenarioConfig, UnilateralSpec};
use crate::simulate::run_scenario;
use crate::sweep::{run_sweep, SweepConfig};
use crate::verify::{run_verify, VerifyConfig};

pub const TOOL_NAME: &str = "imitate";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One unit of work; `prefix` names its output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Job {
    /// Writes `{prefix}_{run:03}.csv` per initial condition and `{prefix}_report.json`.
    Simulate { prefix: String, config: ScenarioConfig },
    /// Writes `{prefix}.csv`, `{prefix}_cross_check.csv` and `{prefix}_report.json`.
    Sweep { prefix: String, config: SweepConfig },
    /// Writes `{prefix}.json`.
    Verify { prefix: String, config: VerifyConfig },
}

impl Job {
    pub fn prefix(&self) -> &str {
        match self {
            Self::Simulate { prefix, .. } | Self::Sweep { prefix, .. } | Self::Verify { prefix, .. } => prefix,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Simulate { config, .. } => config.seed,
            Self::Sweep { .. } => 0,
            Self::Verify { config, .. } => config.seed,
        }
    }

    /// Replaces the job's seed.
    pub fn reseed(&mut self, seed: u64) {
        match self {
            Self::Simulate { config, .. } => config.seed = seed,
            Self::Sweep { .. } => {}
            Self::Verify { config, .. } => config.seed = seed,
        }
    }
}

/// Files produced by a job, in the order they are written.
pub struct JobOutput {
    pub files: Vec<(String, Vec<u8>)>,
    /// False when a job's own pass criterion failed (sweep cross-check,
    /// verify expectations).
    pub pass: bool,
}

fn json_bytes<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn run_job(job: &Job) -> anyhow::Result<JobOutput> {
    match job {
        Job::Simulate { prefix, config } => {
            let out = run_scenario(config, config.seed)?;
            let mut files: Vec<(String, Vec<u8>)> = out
                .trajectories
                .iter()
                .enumerate()
                .map(|(k, t)| (format!("{prefix}_{k:03}.csv"), t.to_csv().into_bytes()))
                .collect();
            files.push((format!("{prefix}_report.json"), json_bytes(&out.report)?));
            Ok(JobOutput { files, pass: true })
        }
        Job::Sweep { prefix, config } => {
            let out = run_sweep(config)?;
            let mut files = vec![(format!("{prefix}.csv"), out.curve_csv().into_bytes())];
            if config.cross_check {
                files.push((format!("{prefix}_cross_check.csv"), out.checks_csv().into_bytes()));
            }
            files.push((format!("{prefix}_report.json"), json_bytes(&out)?));
            Ok(JobOutput { pass: out.all_pass(), files })
        }
        Job::Verify { prefix, config } => {
            let report = run_verify(config)?;
            Ok(JobOutput { pass: report.pass(), files: vec![(format!("{prefix}.json"), json_bytes(&report)?)] })
        }
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self { name: TOOL_NAME.into(), version: TOOL_VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    pub jobs: Vec<Job>,
    /// Groups of strategies summed for 3-simplex projections of runs with
    /// more than three strategies, e.g. `[[0], [1], [2, 3]]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: ToolInfo,
    pub config: BundleConfig,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// sha256 of every file in the bundle, keyed by file name.
    pub checksums: BTreeMap<String, String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub struct BundleResult {
    pub manifest: Manifest,
    pub pass: bool,
}

/// Runs all jobs of `config` into `out` and writes `manifest.json` last.
pub fn write_bundle(config: BundleConfig, notes: Vec<String>, out: &Path) -> anyhow::Result<BundleResult> {
    let mut checksums = BTreeMap::new();
    let mut pass = true;
    for job in &config.jobs {
        let res = run_job(job).with_context(|| format!("job {}", job.prefix()))?;
        pass &= res.pass;
        for (name, bytes) in res.files {
            write_atomic(&out.join(&name), &bytes)?;
            if checksums.insert(name.clone(), sha256_hex(&bytes)).is_some() {
                anyhow::bail!("two jobs wrote {name}");
            }
        }
    }
    let manifest = Manifest {
        tool: ToolInfo::default(),
        seeds: config.jobs.iter().map(Job::seed).collect(),
        config,
        notes,
        checksums,
    };
    write_atomic(&out.join(MANIFEST_NAME), &json_bytes(&manifest)?)?;
    Ok(BundleResult { manifest, pass })
}

/// Outcome of re-running a manifest.
#[derive(Debug, Default)]
pub struct Rerun {
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    pub version_note: Option<String>,
}

impl Rerun {
    pub fn reproduced(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.extra.is_empty()
    }
}

/// Re-runs the jobs recorded in `manifest` into `out` and compares checksums.
pub fn rerun_manifest(manifest: &Manifest, out: &Path) -> anyhow::Result<Rerun> {
    let fresh = write_bundle(manifest.config.clone(), manifest.notes.clone(), out)?.manifest;
    let mut r = Rerun::default();
    if manifest.tool.version != TOOL_VERSION {
        r.version_note = Some(format!(
            "manifest written by {} {}, rerun with {TOOL_VERSION}",
            manifest.tool.name, manifest.tool.version
        ));
    }
    for (name, sum) in &manifest.checksums {
        match fresh.checksums.get(name) {
            Some(s) if s == sum => r.matched.push(name.clone()),
            Some(_) => r.mismatched.push(name.clone()),
            None => r.missing.push(name.clone()),
        }
    }
    r.extra = fresh.checksums.keys().filter(|k| !manifest.checksums.contains_key(*k)).cloned().collect();
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    A,
    B,
    C,
    Hypnodisk,
}

impl std::str::FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            "hypnodisk" => Ok(Self::Hypnodisk),
            _ => Err(format!("unknown figure {s:?} (expected A, B, C or hypnodisk)")),
        }
    }
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::Hypnodisk => "hypnodisk",
        }
    }
}

fn pairwise(selection: SelectionRule) -> RevisionProtocol {
    RevisionProtocol::new(selection, AdoptionRule::Pairwise)
}

fn explicit(states: &[&[f64]]) -> InitialConditions {
    InitialConditions { states: states.iter().map(|s| s.to_vec()).collect(), random: None }
}

fn integrator(horizon: f64, stride: f64) -> IntegratorConfig {
    IntegratorConfig { horizon, sample_stride: stride, ..IntegratorConfig::default() }
}

fn scenario(name: &str, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: Some(name.into()),
        game: None,
        field: None,
        unilateral: None,
        integrator: IntegratorConfig::default(),
        initial: InitialConditions::default(),
        analyses: vec![AnalysisSpec::TailStats],
        tail_window: 0.25,
        check_states: 200,
        seed,
    }
}

/// Jobs and notes reproducing `figure`.
pub fn figure_recipe(figure: Figure, seed: u64) -> (BundleConfig, Vec<String>) {
    let retry4 = || SelectionRule::retry_other(4).expect("m >= 1");
    let (jobs, aggregation, notes) = match figure {
        Figure::A => (
            vec![Job::Sweep { prefix: "fig_a".into(), config: SweepConfig::default() }],
            None,
            vec!["m values 2, 3, 4, 6, 10 are a chosen default set; the original legend is not given".into()],
        ),
        Figure::B => {
            let starts: [&[f64]; 2] = [&[1.0 / 3.0, 1.0 / 6.0, 0.5], &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]];
            let mut jobs = Vec::new();
            for (tag, eps) in [("005", 0.05), ("010", 0.1)] {
                let mut c = scenario(&format!("smooth opponent, eps {eps}"), seed);
                c.unilateral = Some(UnilateralSpec {
                    eps,
                    controller: Controller::SmoothPeriodic { exponent: 1.0 / 9.0 },
                    protocol: pairwise(retry4()),
                });
                c.integrator = integrator(200.0, 0.05);
                c.initial = explicit(&starts);
                c.tail_window = 0.5;
                jobs.push(Job::Simulate { prefix: format!("fig_b_eps{tag}"), config: c });
            }
            let mut c = scenario("threshold opponent, eps 0.01", seed);
            c.unilateral = Some(UnilateralSpec {
                eps: 0.01,
                controller: Controller::Threshold { component: 0, x_min: 0.3, x_max: 0.7 },
                protocol: pairwise(retry4()),
            });
            c.integrator = integrator(400.0, 0.05);
            c.initial = explicit(&starts[..1]);
            c.analyses.push(AnalysisSpec::Liminf { component: 2 });
            jobs.push(Job::Simulate { prefix: "fig_b_threshold".into(), config: c });
            (jobs, None, vec!["columns x1, x2, x3 are the focal population; the event column marks opponent switches".into()])
        }
        Figure::C => {
            let starts: [&[f64]; 2] = [&[1.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0, 3.0 / 7.0], &[1.0 / 7.0, 1.0 / 7.0, 4.0 / 7.0, 1.0 / 7.0]];
            let mut jobs = Vec::new();
            for (tag, d) in [("004", 0.04), ("008", 0.08)] {
                let mut c = scenario(&format!("rps feeble twin, d {d}"), seed);
                c.game = Some(GameSpec::RpsFeebleTwin { d });
                c.field = Some(FieldKind::Mother { protocol: pairwise(retry4()) });
                c.integrator = integrator(2000.0, 0.5);
                c.initial = explicit(&starts);
                c.analyses.push(AnalysisSpec::TwinRatio { i: 2, j: 3 });
                jobs.push(Job::Simulate { prefix: format!("fig_c_d{tag}"), config: c });
            }
            (jobs, Some(vec![vec![0], vec![1], vec![2, 3]]), vec!["project onto (x1, x2, x3 + x4)".into()])
        }
        Figure::Hypnodisk => {
            let mut base = scenario("hypnodisk, replicator", seed);
            base.game = Some(GameSpec::Hypnodisk { inner: 0.05, outer: 0.1, center: None });
            base.field = Some(FieldKind::Replicator);
            base.integrator = integrator(300.0, 0.5);
            base.initial = InitialConditions {
                states: vec![],
                random: Some(RandomStarts { count: 20, seed: None, gap: None }),
            };
            base.analyses.push(AnalysisSpec::Lyapunov);
            let mut twin = scenario("hypnodisk with feeble twin", seed);
            twin.game = Some(GameSpec::HypnodiskFeebleTwin { inner: 0.05, outer: 0.1, eps: 0.005, center: None });
            twin.field =
                Some(FieldKind::Mother { protocol: pairwise(SelectionRule::list_sample(3).expect("m >= 1")) });
            twin.integrator = integrator(1000.0, 0.5);
            twin.initial = base.initial.clone();
            twin.analyses.extend([
                AnalysisSpec::TwinRatio { i: 2, j: 3 },
                AnalysisSpec::Lyapunov,
                AnalysisSpec::Liminf { component: 3 },
            ]);
            let mut freq = twin.clone();
            freq.name = Some("hypnodisk with feeble twin, frequency".into());
            freq.field = Some(FieldKind::Mother { protocol: pairwise(SelectionRule::majority(3).expect("m >= 1")) });
            freq.initial.random = Some(RandomStarts { count: 20, seed: None, gap: Some(Gap { larger: 3, smaller: 2, margin: 0.1 }) });
            let jobs = vec![
                Job::Simulate { prefix: "hypnodisk_base".into(), config: base },
                Job::Simulate { prefix: "hypnodisk_twin".into(), config: twin },
                Job::Simulate { prefix: "hypnodisk_twin_freq".into(), config: freq },
            ];
            (jobs, Some(vec![vec![0], vec![1], vec![2, 3]]), vec![
                "twin runs project onto (x1, x2, x3 + x4); the base run has three strategies".into(),
            ])
        }
    };
    (BundleConfig { figure: Some(figure.name().into()), jobs, aggregation }, notes)
}
