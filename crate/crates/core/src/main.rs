//! Command-line front end for the mean-field training simulator.
//!
//! Exit codes: 0 success, 1 divergence, 2 invalid configuration or usage,
//! 3 invariant-audit failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use meanfield::runner::{
    self, preset, presets, resolve_output_root, OracleConfig, Preset, RunConfig, RunStatus,
};
use meanfield::Error;

#[derive(Parser)]
#[command(
    name = "meanfield",
    about = "Mean-field gradient-descent training of two-layer ReLU networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Execute a training run from a preset and/or config file, with flag
    /// overrides, and write its artifacts.
    Run(RunArgs),
    /// Aggregate the summaries of completed runs into one comparison CSV.
    Compare(CompareArgs),
    /// List the shipped presets.
    Presets,
    /// Integrate the scalar-flow oracle and emit the comparison table.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Name of a shipped preset to start from.
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` config file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; defaults to $MEANFIELD_OUT, then ./runs. Artifacts go
    /// into <root>/<name>/.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Individual `key=value` overrides (highest precedence), e.g.
    /// `--set seed=7 --set d=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    overrides: FlagOverrides,
}

/// The most common config keys, exposed as plain flags.
#[derive(Args)]
struct FlagOverrides {
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_pop: Option<usize>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    train_on: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl FlagOverrides {
    fn apply(&self, config: &mut RunConfig) -> meanfield::Result<()> {
        if let Some(v) = &self.name {
            config.apply("name", v)?;
        }
        for (key, value) in [
            ("d", self.d.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("n_pop", self.n_pop.map(|v| v.to_string())),
            ("target", self.target.clone()),
            ("mode", self.mode.clone()),
            ("half_width", self.half_width.map(|v| v.to_string())),
            ("h", self.h.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("record_every", self.record_every.map(|v| v.to_string())),
            ("train_on", self.train_on.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
        ] {
            if let Some(value) = value {
                config.apply(key, &value)?;
            }
        }
        Ok(())
    }
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories (each containing summary.json).
    #[arg(required = true)]
    run_dirs: Vec<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Run name (also the artifact subdirectory).
    #[arg(long, default_value = "oracle")]
    name: String,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NonFiniteUpdate { .. } => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> meanfield::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Compare(args) => {
            let table = runner::compare(&args.run_dirs)?;
            match args.out {
                Some(path) => {
                    std::fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{table}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => {
            for p in presets() {
                match p {
                    Preset::Train(c) => println!(
                        "{:<18} train  d={:<3} m={:<4} n={:<5} target={:<15} mode={:?} h={} steps={} seed={}",
                        c.name, c.d, c.m, c.n, c.target.to_string(), c.mode, c.step_size, c.total_steps, c.seed
                    ),
                    Preset::Oracle(c) => println!(
                        "{:<18} oracle alpha={} h={} steps={}",
                        c.name, c.alpha, c.step_size, c.total_steps
                    ),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            let config = OracleConfig {
                name: args.name.clone(),
                alpha: args.alpha,
                step_size: args.h,
                total_steps: args.steps,
                record_every: args.record_every,
            };
            let root = resolve_output_root(args.output_dir);
            let dir = root.join(&args.name);
            let summary = runner::run_oracle(&config, &dir)?;
            println!(
                "oracle alpha={} terminal |x_euler - x_closed| = {:.3e} ({})",
                summary.alpha,
                summary.terminal_error,
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_command(args: RunArgs) -> meanfield::Result<ExitCode> {
    // Precedence: preset < config file < flags < --set.
    let base = match &args.preset {
        Some(name) => match preset(name) {
            Some(p) => p,
            None => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset `{name}` (see `meanfield presets`)"
                )))
            }
        },
        None => Preset::Train(RunConfig::named("run")),
    };

    let mut config = match base {
        Preset::Oracle(oracle_config) => {
            // Oracle presets take no training overrides.
            if args.config.is_some() || !args.set.is_empty() {
                return Err(Error::InvalidConfig(
                    "oracle presets accept no config file or overrides".into(),
                ));
            }
            let root = resolve_output_root(args.output_dir.clone());
            let dir = root.join(&oracle_config.name);
            let summary = runner::run_oracle(&oracle_config, &dir)?;
            println!(
                "oracle alpha={} terminal error {:.3e} ({})",
                summary.alpha,
                summary.terminal_error,
                dir.display()
            );
            return Ok(ExitCode::SUCCESS);
        }
        Preset::Train(c) => c,
    };

    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    args.overrides.apply(&mut config)?;
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.apply(key.trim(), value.trim())?;
    }

    let root = resolve_output_root(args.output_dir.clone().or_else(|| config.output_dir.clone()));
    let dir = root.join(&config.name);
    let report = runner::run(&config, &dir)?;
    let s = &report.summary;
    println!(
        "{}: status={:?} final risk_emp={:.6e} risk_pop={:.6e} audit {}/{} ({})",
        s.name,
        report.status,
        s.final_risk_emp,
        s.final_risk_pop,
        s.audit_passed,
        s.audit_intervals,
        report.dir.display()
    );
    Ok(match report.status {
        RunStatus::Completed => ExitCode::SUCCESS,
        RunStatus::Diverged => ExitCode::from(1),
        RunStatus::AuditFailed => ExitCode::from(3),
    })
}
