use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqsd_cli::{cmd_attack_stats, cmd_codec_table, cmd_run, CliError, ExitStatus, RunConfig};

#[derive(Parser)]
#[command(
    name = "cqsd",
    version,
    about = "Continuous quantum secure dialogue simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scripted dialogue and write its transcript.
    Run(Common),
    /// Run independent attacked sessions and report abort statistics as JSON.
    AttackStats(Common),
    /// Print the message, operator and Bell class mapping.
    CodecTable,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Transcript output path; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of trial sessions for attack-stats.
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        if let Some(trials) = self.trials {
            config.trials = Some(trials);
        }
        config.validate()?;
        Ok(config)
    }
}

fn dispatch(command: Command) -> Result<ExitStatus, CliError> {
    let stdout = &mut io::stdout().lock();
    match command {
        Command::Run(common) => {
            let config = common.load()?;
            let out = config.out.clone().ok_or_else(|| CliError::Config {
                field: "out".into(),
                message: "no transcript path".into(),
            })?;
            cmd_run(&config, &out, stdout)
        }
        Command::AttackStats(common) => {
            let report = cmd_attack_stats(&common.load()?)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(ExitStatus::Closed)
        }
        Command::CodecTable => {
            cmd_codec_table(stdout).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })?;
            Ok(ExitStatus::Closed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(ExitStatus::ConfigError.code() as u8);
        }
    };
    let status = dispatch(cli.command).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitStatus::ConfigError
    });
    ExitCode::from(status.code() as u8)
}
