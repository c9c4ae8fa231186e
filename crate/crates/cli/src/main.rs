//! `pseudocal`: sampling, density evaluation, verification suites, CBD decompositions
//! and configured experiments. Exit codes: 0 pass, 1 check failure, 2 usage or
//! configuration error.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pseudocal::config::ConfigMap;
use pseudocal::exec::Exec;

use crate::commands::Verdict;
use crate::manifest::{now, OutputDir, RunManifest, Versions};

const THREADS_ENV: &str = "PSEUDOCAL_THREADS";
const DEFAULT_OUT: &str = "pseudocal-out";

#[derive(Parser, Debug)]
#[command(name = "pseudocal", version, about = "Exact pseudocalibration experiments for random CSPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand accepts. Flags override keys from `--config`.
#[derive(Args, Debug)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `KEY=VALUE` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (falls back to the `output` key, then `pseudocal-out`).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw null or planted instances over the full scope space.
    Sample {
        #[arg(long, conflicts_with = "null")]
        planted: bool,
        #[arg(long)]
        null: bool,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        count: Option<String>,
        #[arg(long)]
        pred: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Instance-fixed pseudo-density and the refutation event of one instance.
    Density {
        #[arg(long)]
        instance: Option<String>,
        #[command(flatten)]
        caps: CapArgs,
        #[arg(long)]
        eta: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite: fourier-exact, derivation-counts,
    /// restriction-identity, cbd-partition or decay-grid.
    Verify {
        suite: String,
        /// Number of fuzzed tables for cbd-partition.
        #[arg(long)]
        tables: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Decompose a planted, null or fuzzed table over random scopes and verify it.
    Decompose {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        p: Option<String>,
        /// Number of scopes.
        #[arg(long)]
        scopes: Option<String>,
        /// planted, null or fuzz.
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        delta_cbd: Option<String>,
        #[arg(long)]
        t_param: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Local pseudo-moments of one instance.
    Moments {
        #[arg(long)]
        instance: Option<String>,
        #[command(flatten)]
        caps: CapArgs,
        #[arg(long)]
        subset_cap: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a configured experiment (`experiment` key: concentration, nonnegativity,
    /// moments or decay-grid).
    Experiment {
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        trials: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct CapArgs {
    #[arg(long)]
    d_x: Option<String>,
    #[arg(long)]
    d_i: Option<String>,
    #[arg(long)]
    pred: Option<String>,
}

impl CapArgs {
    fn pairs(&self) -> [(&'static str, Option<String>); 3] {
        [("d_x", self.d_x.clone()), ("d_i", self.d_i.clone()), ("pred", self.pred.clone())]
    }
}

/// Failures that map to exit code 2.
#[derive(Debug, thiserror::Error)]
enum UsageError {
    #[error(transparent)]
    Core(#[from] pseudocal::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

struct Invocation<'a> {
    name: &'static str,
    common: &'a Common,
    flags: Vec<(&'static str, Option<String>)>,
}

impl Invocation<'_> {
    fn config(&self) -> Result<ConfigMap, UsageError> {
        let base = match &self.common.config {
            Some(path) => ConfigMap::load(path)?,
            None => ConfigMap::default(),
        };
        let mut overrides = ConfigMap::default();
        for raw in &self.common.set {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| UsageError::Usage(format!("--set expects KEY=VALUE, got `{raw}`")))?;
            overrides.set(k.trim(), v.trim());
        }
        if let Some(seed) = &self.common.seed {
            overrides.set("seed", seed.clone());
        }
        for (key, value) in &self.flags {
            if let Some(v) = value {
                overrides.set(key, v.clone());
            }
        }
        Ok(base.merged(&overrides))
    }

    fn out_dir(&self, config: Option<&ConfigMap>) -> PathBuf {
        self.common
            .out
            .clone()
            .or_else(|| config.and_then(|c| c.get_opt::<PathBuf>("output").ok().flatten()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// `PSEUDOCAL_THREADS=1` selects the sequential path; larger values cap the pool.
fn exec_from_env() -> Result<Exec, UsageError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(Exec::default());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| UsageError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    if threads == 1 {
        return Ok(Exec::Sequential);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| UsageError::Usage(format!("cannot size the worker pool: {e}")))?;
    Ok(Exec::Parallel)
}

fn execute(command: &Command, config: &ConfigMap, out: &mut OutputDir, exec: Exec) -> Result<Verdict, UsageError> {
    Ok(match command {
        Command::Sample { .. } => commands::sample(config, out, exec)?,
        Command::Density { .. } => commands::density(config, out)?,
        Command::Verify { suite, .. } => commands::verify(suite, config, out, exec)?,
        Command::Decompose { .. } => commands::decompose_cmd(config, out)?,
        Command::Moments { .. } => commands::moments(config, out)?,
        Command::Experiment { .. } => commands::experiment(config, out, exec)?,
    })
}

fn invocation(command: &Command) -> Invocation<'_> {
    let s = |v: &Option<String>| v.clone();
    match command {
        Command::Sample { planted, null, n, k, p, delta, count, pred, common } => Invocation {
            name: "sample",
            common,
            flags: vec![
                ("planted", (*planted || *null).then(|| planted.to_string())),
                ("n", s(n)),
                ("k", s(k)),
                ("p", s(p)),
                ("delta", s(delta)),
                ("count", s(count)),
                ("pred", s(pred)),
            ],
        },
        Command::Density { instance, caps, eta, common } => {
            let mut flags = vec![("instance", s(instance)), ("eta", s(eta))];
            flags.extend(caps.pairs());
            Invocation { name: "density", common, flags }
        }
        Command::Verify { tables, common, .. } => {
            Invocation { name: "verify", common, flags: vec![("tables", s(tables))] }
        }
        Command::Decompose { n, k, p, scopes, source, delta_cbd, t_param, common } => Invocation {
            name: "decompose",
            common,
            flags: vec![
                ("n", s(n)),
                ("k", s(k)),
                ("p", s(p)),
                ("scopes", s(scopes)),
                ("source", s(source)),
                ("delta_cbd", s(delta_cbd)),
                ("t_param", s(t_param)),
            ],
        },
        Command::Moments { instance, caps, subset_cap, common } => {
            let mut flags = vec![("instance", s(instance)), ("subset_cap", s(subset_cap))];
            flags.extend(caps.pairs());
            Invocation { name: "moments", common, flags }
        }
        Command::Experiment { experiment, trials, common } => {
            Invocation { name: "experiment", common, flags: vec![("experiment", s(experiment)), ("trials", s(trials))] }
        }
    }
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)? + "\n";
    std::fs::write(out.join("manifest.json"), text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = now();
    let inv = invocation(&cli.command);
    let config = inv.config();
    let out_root = inv.out_dir(config.as_ref().ok());
    let config_text = config.as_ref().map(ConfigMap::to_text).unwrap_or_default();
    let seed = config.as_ref().ok().and_then(|c| c.get_opt("seed").ok().flatten());
    let mut digests = Vec::new();
    let result = config.and_then(|config| {
        let exec = exec_from_env()?;
        let mut out = OutputDir::create(&out_root)?;
        let verdict = execute(&cli.command, &config, &mut out, exec);
        digests = out.into_digests();
        verdict
    });
    let code = match &result {
        Ok(Verdict::Pass) => 0,
        Ok(Verdict::Fail) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    let manifest = RunManifest {
        command: inv.name.to_string(),
        args: std::env::args().collect(),
        config: config_text,
        seed,
        versions: Versions::current(),
        started,
        finished: now(),
        outputs: digests,
        exit_code: code,
    };
    if let Err(e) = write_manifest(&out_root, &manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code as u8)
}
