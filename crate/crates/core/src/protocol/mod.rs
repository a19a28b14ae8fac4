//! Two-party dialogue over shared singlet pairs.
//!
//! A [`Session`] drives both parties on one timeline: the initiator
//! distributes `2(m+n)` pairs, half of them are sacrificed to check the
//! channel, and every later transmission spends `m + n` pairs while
//! delivering `m + n` fresh ones, so neither side ever runs dry.

mod ledger;
mod session;
mod transcript;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::MeasBasis;

pub use ledger::{LedgerEntry, LedgerError, PairId, PairLedger, PairStatus};
pub use session::{
    BatchRecord, CheckRecord, CheckStage, EstablishOutcome, Session, TransmissionOutcome,
};
pub use transcript::{Actor, EventKind, Transcript, TranscriptEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    #[serde(alias = "alice")]
    Alice,
    #[serde(alias = "bob")]
    Bob,
}

impl Party {
    pub fn peer(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("Alice"),
            Party::Bob => f.write_str("Bob"),
        }
    }
}

/// Session-wide constants, fixed for the whole dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Message pairs per transmission.
    pub m: usize,
    /// Check pairs per transmission.
    pub n: usize,
    /// Largest tolerated fraction of correlated check outcomes.
    pub error_threshold: f64,
    pub seed: u64,
    pub initiator: Party,
}

impl ProtocolParams {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        ProtocolParams {
            m,
            n,
            error_threshold: 0.0,
            seed,
            initiator: Party::Alice,
        }
    }

    pub fn with_threshold(mut self, error_threshold: f64) -> Self {
        self.error_threshold = error_threshold;
        self
    }

    pub fn with_initiator(mut self, initiator: Party) -> Self {
        self.initiator = initiator;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.m == 0 {
            return Err(ProtocolError::InvalidParams("m must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(ProtocolError::InvalidParams("n must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.error_threshold) {
            return Err(ProtocolError::InvalidParams(format!(
                "error_threshold {} outside [0, 1)",
                self.error_threshold
            )));
        }
        Ok(())
    }

    /// Pairs each party holds between transmissions.
    pub fn live_pairs(&self) -> usize {
        self.m + self.n
    }

    /// Qubits per batch, for the initial distribution and every transmission.
    pub fn batch_size(&self) -> usize {
        2 * (self.m + self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AbortReason {
    #[serde(rename = "eavesdropper detected")]
    EavesdropperDetected,
    #[serde(rename = "count mismatch")]
    CountMismatch,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::EavesdropperDetected => "eavesdropper detected",
            AbortReason::CountMismatch => "count mismatch",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SessionState {
    Created,
    HalvesDistributed,
    ChannelEstablished,
    InTransmission,
    Aborted(AbortReason),
    Closed,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Aborted(_) | SessionState::Closed)
    }
}

/// Per-pair result published after a check: a basis measurement of both
/// halves. `(retained, transmitted)` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub pair: PairId,
    pub basis: MeasBasis,
    pub bits: (bool, bool),
}

impl CheckOutcome {
    pub fn is_error(&self) -> bool {
        self.bits.0 == self.bits.1
    }
}

/// Public classical-channel messages. Readable by anyone, alterable by no one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Announcement {
    CheckPositions {
        pairs: Vec<PairId>,
        bases: Vec<MeasBasis>,
    },
    CheckResults {
        results: Vec<CheckOutcome>,
    },
    PositionsOfNewPairs {
        pairs: Vec<PairId>,
    },
    Abort {
        reason: AbortReason,
    },
    Terminate,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("already closed")]
    AlreadyClosed,
    #[error("{operation} not allowed in state {state:?}")]
    InvalidState {
        operation: &'static str,
        state: SessionState,
    },
    #[error("payload has {got} symbols, expected {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("no checks")]
    NoChecks,
    #[error("ledger invariant violated: {0}")]
    Ledger(#[from] LedgerError),
    #[error("{party} holds {live} live pairs, expected {expected}")]
    Continuity {
        party: Party,
        live: usize,
        expected: usize,
    },
    #[error("pair {0} missing from the pair store")]
    MissingPair(PairId),
}

/// Fraction of check outcomes where both halves agree. Singlets disagree in
/// every basis, so any agreement counts as an error.
pub fn error_rate(check_outcomes: &[(bool, bool)]) -> Result<f64, ProtocolError> {
    if check_outcomes.is_empty() {
        return Err(ProtocolError::NoChecks);
    }
    let errors = check_outcomes.iter().filter(|(a, b)| a == b).count();
    Ok(errors as f64 / check_outcomes.len() as f64)
}
