//! `gmbridge`: runs the experiments of the library from a TOML config and
//! writes hashed artifacts plus a run manifest.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for an
//! invalid config, 3 for an I/O failure and 4 for an error raised by the
//! library.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;
use gmbridge::verify::traceability_markdown;

use crate::manifest::{sha256_hex, Outputs, RunManifest, Versions};

#[derive(Debug, Parser)]
#[command(
    name = "gmbridge",
    version,
    about = "Poisson-bridge insider equilibria and their Kyle-Back limit"
)]
struct Cli {
    /// TOML config with [run], [bridge], [equilibrium], [limit] and [verify] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.out_dir`; defaults to `out/<command>`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Sample size: `run.paths`, or `limit.paths_per_side` for `limit converge`.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    /// Overrides `limit.delta_list`, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "D1,D2,...")]
    delta_list: Option<Vec<f64>>,
    /// Caps `run.paths` at 2000 for quick runs.
    #[arg(long, global = true, conflicts_with = "slow")]
    fast: bool,
    /// Adds the power pilots (corrupted inputs that must be rejected) to `verify law`.
    #[arg(long, global = true)]
    slow: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate bridge paths.
    Bridge {
        #[command(subcommand)]
        action: BridgeAction,
    },
    /// Statistical checks on simulated paths.
    Verify {
        #[command(subcommand)]
        action: VerifyAction,
    },
    /// Value functions and optimality of the insider strategy.
    Equilibrium {
        #[command(subcommand)]
        action: EquilibriumAction,
    },
    /// Small-order-size sweep towards the Kyle-Back limit.
    Limit {
        #[command(subcommand)]
        action: LimitAction,
    },
    /// Generated documentation, written to `--out-dir` (default `docs`).
    Docs {
        #[command(subcommand)]
        action: DocsAction,
    },
}

#[derive(Debug, Subcommand)]
enum BridgeAction {
    /// Write `run.paths` ledgers as JSON lines.
    Simulate,
}

#[derive(Debug, Subcommand)]
enum VerifyAction {
    /// Law, independence, filter, martingale and pricing checks.
    Law,
    /// Intensity traces and compensated counts.
    Trace,
}

#[derive(Debug, Subcommand)]
enum EquilibriumAction {
    /// Value surfaces of both types and their residuals.
    Value,
    /// Monte Carlo profits of strategy variants against the value at the origin.
    Optimality,
}

#[derive(Debug, Subcommand)]
enum LimitAction {
    /// Price and depth errors along the sweep.
    Depth,
    /// Grid errors plus KS distances of the marginals.
    Converge,
}

#[derive(Debug, Subcommand)]
enum DocsAction {
    /// The traceability matrix as markdown.
    Traceability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
enum Tier {
    Fast,
    Standard,
    Slow,
}

const FAST_PATHS: usize = 2000;

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bridge {
                action: BridgeAction::Simulate,
            } => "bridge simulate",
            Command::Verify {
                action: VerifyAction::Law,
            } => "verify law",
            Command::Verify {
                action: VerifyAction::Trace,
            } => "verify trace",
            Command::Equilibrium {
                action: EquilibriumAction::Value,
            } => "equilibrium value",
            Command::Equilibrium {
                action: EquilibriumAction::Optimality,
            } => "equilibrium optimality",
            Command::Limit {
                action: LimitAction::Depth,
            } => "limit depth",
            Command::Limit {
                action: LimitAction::Converge,
            } => "limit converge",
            Command::Docs {
                action: DocsAction::Traceability,
            } => "docs traceability",
        }
    }
}

fn load_settings(cli: &Cli, tier: Tier) -> Result<Settings, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config(config::ConfigError::Missing { key: "--config".into() }))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut s = config::parse(&text)?;
    let e = &mut s.experiment;
    if let Some(seed) = cli.seed {
        e.seed = seed;
    }
    if let Some(n) = cli.paths {
        if matches!(
            cli.command,
            Command::Limit {
                action: LimitAction::Converge
            }
        ) {
            e.limit.paths_per_side = n;
        } else {
            e.paths = n;
        }
    }
    if let Some(list) = &cli.delta_list {
        e.limit.delta_list = list.clone();
    }
    if tier == Tier::Fast {
        e.paths = e.paths.min(FAST_PATHS);
    }
    s.validate()?;
    Ok(s)
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    tier: Tier,
    settings: &'a Settings,
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let start = Instant::now();
    let tier = if cli.fast {
        Tier::Fast
    } else if cli.slow {
        Tier::Slow
    } else {
        Tier::Standard
    };
    let name = cli.command.name();
    if let Command::Docs {
        action: DocsAction::Traceability,
    } = cli.command
    {
        // generated documentation is not a run: no manifest, no config
        let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("docs"));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let path = dir.join("traceability.md");
        std::fs::write(&path, traceability_markdown()).map_err(|e| CliError::io(&path, e))?;
        println!("{name}: wrote {}", path.display());
        return Ok(true);
    }
    let settings = load_settings(cli, tier)?;

    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| settings.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(name.replace(' ', "_")));
    let mut out = Outputs::create(&out_dir)?;

    let resolved = serde_json::to_vec(&Resolved {
        command: name,
        tier,
        settings: &settings,
    })
    .map_err(|e| CliError::Serialize(e.to_string()))?;

    let s = &settings;
    let checks = match &cli.command {
        Command::Bridge { .. } => commands::bridge_simulate(s, &mut out)?,
        Command::Verify {
            action: VerifyAction::Law,
        } => commands::verify_law(s, tier == Tier::Slow, &mut out)?,
        Command::Verify {
            action: VerifyAction::Trace,
        } => commands::verify_trace(s, &mut out)?,
        Command::Equilibrium {
            action: EquilibriumAction::Value,
        } => commands::equilibrium_value(s, &mut out)?,
        Command::Equilibrium {
            action: EquilibriumAction::Optimality,
        } => commands::equilibrium_optimality(s, &mut out)?,
        Command::Limit {
            action: LimitAction::Depth,
        } => commands::limit_depth(s, &mut out)?,
        Command::Limit {
            action: LimitAction::Converge,
        } => commands::limit_converge(s, &mut out)?,
        Command::Docs { .. } => unreachable!("handled above"),
    };
    let pass = checks.iter().all(|c| c.pass);
    out.write_json("checks.json", &checks)?;
    for c in &checks {
        let detail = if c.detail.is_empty() {
            String::new()
        } else {
            format!(": {}", c.detail)
        };
        println!("{} {}{detail}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }

    let manifest = out.finish(RunManifest {
        command: name.to_string(),
        config_sha256: sha256_hex(&resolved),
        seed: settings.experiment.seed,
        tier: format!("{tier:?}").to_lowercase(),
        versions: Versions {
            gmbridge: gmbridge::VERSION,
            gmbridge_cli: env!("CARGO_PKG_VERSION"),
        },
        outputs: Vec::new(),
        pass,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })?;
    println!(
        "{name}: {} files in {} ({:.1} s)",
        manifest.outputs.len() + 1,
        out_dir.display(),
        manifest.wall_clock_seconds
    );
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_status())
        }
    }
}
