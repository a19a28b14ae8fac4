//! Command-line front end for the CQSD protocol simulator: scripted
//! dialogues, Monte-Carlo attack statistics and the codec table.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cqsd::codec::{classify_encoded, decode, encode, parse_bit_string, render_pairs, BitPair};
use cqsd::experiment::{
    run_attack_stats, AttackExperiment, Execution, ExperimentError, StatsReport,
};
use cqsd::protocol::{
    EstablishOutcome, Party, ProtocolError, ProtocolParams, Session, SessionState,
};
use cqsd::quantum::Half;
use cqsd::{ChannelSpec, TransmissionOutcome};
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_TRIALS: usize = 10_000;

/// Process exit codes. No other codes are ever returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Closed = 0,
    ConfigError = 1,
    Aborted = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration problem; `field` names the offending key.
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl CliError {
    fn config(field: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub sender: Party,
    pub payload: String,
}

/// One experiment, fully described by a single TOML file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub error_threshold: f64,
    #[serde(default = "default_initiator")]
    pub initiator: Party,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub trials: Option<usize>,
}

fn default_initiator() -> Party {
    Party::Alice
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams::new(self.m, self.n, self.seed)
            .with_threshold(self.error_threshold)
            .with_initiator(self.initiator)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.m == 0 {
            return Err(CliError::config("m", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(CliError::config("n", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.error_threshold) {
            return Err(CliError::config(
                "error_threshold",
                format!("{} outside [0, 1)", self.error_threshold),
            ));
        }
        self.channel
            .validate()
            .map_err(|e| CliError::config("channel.p", e))?;
        if self.trials == Some(0) {
            return Err(CliError::config("trials", "must be at least 1"));
        }
        for i in 0..self.script.len() {
            self.payload(i)?;
        }
        Ok(())
    }

    /// The `i`-th scripted payload as bit pairs; must hold exactly 2m bits.
    pub fn payload(&self, i: usize) -> Result<Vec<BitPair>, CliError> {
        let field = format!("script[{i}].payload");
        let bits =
            parse_bit_string(&self.script[i].payload).map_err(|e| CliError::config(&field, e))?;
        if bits.len() != 2 * self.m {
            return Err(CliError::config(
                field,
                format!("expected {} bits, got {}", 2 * self.m, bits.len()),
            ));
        }
        Ok(bits.chunks(2).map(|p| BitPair::new(p[0], p[1])).collect())
    }
}

/// What one scripted run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub state: SessionState,
    pub delivered: Vec<(Party, Vec<BitPair>)>,
    pub transcript: String,
}

impl RunReport {
    pub fn exit_status(&self) -> ExitStatus {
        match self.state {
            SessionState::Aborted(_) => ExitStatus::Aborted,
            _ => ExitStatus::Closed,
        }
    }
}

/// Runs init, handshake, the script and close. Stops at the first abort.
pub fn execute(config: &RunConfig) -> Result<RunReport, CliError> {
    let channel = config
        .channel
        .build()
        .map_err(|e| CliError::config("channel", e))?;
    let mut session = Session::init(config.params(), channel)?;
    let mut delivered = Vec::new();
    if session.state() == SessionState::HalvesDistributed
        && session.establish_channel()? == EstablishOutcome::Established
    {
        for (i, entry) in config.script.iter().enumerate() {
            match session.send_message(entry.sender, &config.payload(i)?)? {
                TransmissionOutcome::Delivered { payload } => {
                    delivered.push((entry.sender, payload))
                }
                TransmissionOutcome::Aborted(_) => break,
            }
        }
        if session.state() == SessionState::ChannelEstablished {
            session.close(config.initiator)?;
        }
    }
    Ok(RunReport {
        state: session.state(),
        delivered,
        transcript: session.transcript().to_jsonl(),
    })
}

/// `run`: writes the transcript to `out_path` and prints decoded payloads.
pub fn cmd_run(
    config: &RunConfig,
    out_path: &Path,
    out: &mut impl Write,
) -> Result<ExitStatus, CliError> {
    let report = execute(config)?;
    fs::write(out_path, &report.transcript).map_err(|source| CliError::Io {
        path: out_path.to_path_buf(),
        source,
    })?;
    let io_err = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    for (sender, payload) in &report.delivered {
        writeln!(
            out,
            "{} -> {}: {}",
            sender,
            sender.peer(),
            render_pairs(payload)
        )
        .map_err(io_err)?;
    }
    match report.state {
        SessionState::Aborted(reason) => writeln!(out, "aborted: {}", reason.as_str()),
        _ => writeln!(out, "closed"),
    }
    .map_err(io_err)?;
    Ok(report.exit_status())
}

pub fn attack_experiment(config: &RunConfig) -> AttackExperiment {
    AttackExperiment {
        m: config.m,
        n: config.n,
        error_threshold: config.error_threshold,
        channel: config.channel,
        trials: config.trials.unwrap_or(DEFAULT_TRIALS),
        master_seed: config.seed,
    }
}

pub fn cmd_attack_stats(config: &RunConfig) -> Result<StatsReport, CliError> {
    Ok(run_attack_stats(
        &attack_experiment(config),
        Execution::Parallel,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecRow {
    pub message: BitPair,
    pub operator: &'static str,
    pub gate: &'static str,
    pub bell_class: &'static str,
}

/// The message ↔ operator ↔ Bell class mapping, recomputed from the state
/// engine on every call.
pub fn codec_table() -> Vec<CodecRow> {
    BitPair::ALL
        .into_iter()
        .map(|message| {
            let op = encode(message);
            let class = classify_encoded(op, Half::Retained);
            assert_eq!(decode(class), message, "codec table is not invertible");
            CodecRow {
                message,
                operator: op.operator_label(),
                gate: op.gate_label(),
                bell_class: class.label(),
            }
        })
        .collect()
}

pub fn cmd_codec_table(out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "message  operator  gate  bell_class")?;
    for row in codec_table() {
        writeln!(
            out,
            "{:<8} {:<9} {:<5} {}",
            row.message.to_string(),
            row.operator,
            row.gate,
            row.bell_class
        )?;
    }
    Ok(())
}
