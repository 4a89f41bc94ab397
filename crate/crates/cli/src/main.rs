use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use imitation_cli::config::{self, ScenarioConfig};
use imitation_cli::reproduce::{
    figure_recipe, rerun_manifest, write_bundle, BundleConfig, Figure, Job, Manifest, MANIFEST_NAME,
};
use imitation_cli::sweep::SweepConfig;
use imitation_cli::verify::{VerifyConfig, VerifyReport};

#[derive(Parser)]
#[command(name = "imitate", version, about = "Imitative revision dynamics on the simplex")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario: trajectory CSVs, analysis report, manifest.
    Simulate(Common),
    /// Tabulate the long-run share of the worse strategy against the payoff ratio.
    Sweep(Common),
    /// Check monotonicity, positive correlation, imitation and advantage
    /// conditions for protocol combinations; exits non-zero on a mismatch.
    Verify(Common),
    /// Write the bundle for a figure, or re-run a manifest and compare checksums.
    Reproduce {
        /// A, B, C or hypnodisk.
        #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
        figure: Option<Figure>,
        /// Manifest of a previous bundle to re-run.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        Some(p) => config::load(p),
        None => Ok(T::default()),
    }
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("setting up the thread pool")?;
    }
    Ok(())
}

fn bundle(jobs: Vec<Job>, figure: Option<String>, notes: Vec<String>, out: &Path) -> anyhow::Result<bool> {
    let res = write_bundle(BundleConfig { figure, jobs, aggregation: None }, notes, out)?;
    eprintln!("wrote {} files and {} to {}", res.manifest.checksums.len(), MANIFEST_NAME, out.display());
    Ok(res.pass)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate(c) => {
            init_threads(c.threads)?;
            let path = c.config.as_deref().context("simulate needs --config")?;
            let mut cfg: ScenarioConfig = config::load(path)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            cfg.model().map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            bundle(vec![Job::Simulate { prefix: "trajectory".into(), config: cfg }], None, vec![], &c.out)
        }
        Command::Sweep(c) => {
            init_threads(c.threads)?;
            let cfg: SweepConfig = load_or_default(c.config.as_deref())?;
            let pass = bundle(vec![Job::Sweep { prefix: "sweep".into(), config: cfg }], None, vec![], &c.out)?;
            if !pass {
                eprintln!("cross-check failed; see sweep_cross_check.csv");
            }
            Ok(pass)
        }
        Command::Verify(c) => {
            init_threads(c.threads)?;
            let mut cfg: VerifyConfig = load_or_default(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let pass = bundle(vec![Job::Verify { prefix: "verify".into(), config: cfg }], None, vec![], &c.out)?;
            let report: VerifyReport = config::load(&c.out.join("verify.json"))?;
            print!("{}", report.table());
            Ok(pass)
        }
        Command::Reproduce { figure, manifest, common: c } => {
            init_threads(c.threads)?;
            if let Some(path) = manifest {
                if c.config.is_some() || c.seed.is_some() {
                    anyhow::bail!("--config and --seed cannot be combined with --manifest");
                }
                let m: Manifest = config::load(&path)?;
                let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
                if c.out.exists() && dir.canonicalize()? == c.out.canonicalize()? {
                    anyhow::bail!("--out must differ from the manifest's directory");
                }
                let r = rerun_manifest(&m, &c.out)?;
                if let Some(note) = &r.version_note {
                    eprintln!("note: {note}");
                }
                for (label, names) in [("differs", &r.mismatched), ("missing", &r.missing), ("extra", &r.extra)] {
                    for n in names {
                        println!("{label}: {n}");
                    }
                }
                println!("{} of {} files reproduced", r.matched.len(), m.checksums.len());
                return Ok(r.reproduced());
            }
            let figure = figure.expect("clap requires a figure without --manifest");
            let (mut cfg, notes) = figure_recipe(figure, 0);
            if let Some(path) = &c.config {
                cfg = config::load(path)?;
            }
            if let Some(s) = c.seed {
                cfg.jobs.iter_mut().for_each(|j| j.reseed(s));
            }
            let res = write_bundle(cfg, notes, &c.out)?;
            eprintln!("figure {}: {} files in {}", figure.name(), res.manifest.checksums.len(), c.out.display());
            Ok(res.pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
