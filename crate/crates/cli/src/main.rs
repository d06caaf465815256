//! `soen`: runs the experiment presets and validates configurations.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use soen_core::network::Mode;
use soen_core::SimError;
use thiserror::Error;

use crate::config::RunConfig;
use crate::output::{hex_digest, Outputs, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Simulation(String),
    #[error("{0}")]
    Io(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidParameter { .. } | SimError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Simulation(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Device,
    Behavioral,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Device => Mode::Device,
            ModeArg::Behavioral => Mode::Behavioral,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "soen", version, about = "Superconducting optoelectronic loop-neuron simulator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Experiment preset to run (see `soen list`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "soen-out")]
    out_dir: PathBuf,
    /// Simulated time, s.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Set a configuration value, e.g. `power.die.neurons=100`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration file against every parameter invariant.
    Validate {
        path: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the experiment presets.
    List,
    /// Print the default configuration as TOML.
    Defaults,
}

fn validate(path: &Path, overrides: &[String]) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!("{}: no such file", path.display())));
    }
    let cfg = config::load(Some(path), overrides)?;
    let v = cfg.violations();
    if v.is_empty() {
        println!("{}: 0 violations", path.display());
        Ok(())
    } else {
        for line in &v {
            println!("{line}");
        }
        Err(CliError::Config(format!("{}: {} violation(s)", path.display(), v.len())))
    }
}

fn run(cli: &Cli, name: &str) -> Result<(), CliError> {
    let preset = presets::find(name).ok_or_else(|| {
        let names: Vec<_> = presets::PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })?;
    let mut cfg: RunConfig = config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.t_end {
        cfg.t_end = Some(t);
    }
    if let Some(m) = cli.mode {
        cfg.mode = Some(m.into());
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        for line in &violations {
            eprintln!("{line}");
        }
        return Err(CliError::Config(format!("{} configuration violation(s)", violations.len())));
    }
    let mode = cfg.mode.unwrap_or(preset.default_mode);
    let t_end = cfg.t_end.unwrap_or(preset.default_t_end);

    let start = Instant::now();
    let mut out = Outputs::new(&cli.out_dir)?;
    let resolved = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    out.text("config.toml", &resolved)?;
    (preset.run)(&cfg, mode, t_end, &mut out)?;
    let manifest = RunManifest {
        tool: "soen",
        version: env!("CARGO_PKG_VERSION"),
        preset: preset.name.to_string(),
        seed: cfg.seed,
        mode,
        t_end,
        config_sha256: hex_digest(resolved.as_bytes()),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: out.files().to_vec(),
    };
    out.json("manifest.json", &manifest)?;
    eprintln!(
        "{}: wrote {} files to {} in {:.2} s",
        preset.name,
        manifest.outputs.len() + 1,
        cli.out_dir.display(),
        manifest.wall_time_s
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (&cli.command, &cli.preset) {
        (Some(Command::Validate { path, overrides }), _) => validate(path, overrides),
        (Some(Command::List), _) => {
            for p in presets::PRESETS {
                println!("{:<18} {}", p.name, p.description);
            }
            Ok(())
        }
        (Some(Command::Defaults), _) => toml::to_string(&RunConfig::default())
            .map(|s| print!("{s}"))
            .map_err(|e| CliError::Config(e.to_string())),
        (None, Some(name)) => run(&cli, name),
        (None, None) => Err(CliError::Config("nothing to do: pass --preset NAME or a subcommand (see --help)".into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
