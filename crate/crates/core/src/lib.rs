//! Continuous quantum secure dialogue (CQSD).
//!
//! Two parties hold halves of singlet pairs and talk over them with
//! superdense coding. Every transmission carries its own eavesdropping check
//! and ships fresh pairs to replace the ones it used, so the dialogue can go
//! on indefinitely after a single initial handshake.
//!
//! - [`quantum`]: four-amplitude pair states, Pauli encoding, measurements.
//! - [`codec`]: two-bit symbols ↔ operators ↔ Bell classes.
//! - [`protocol`]: the session state machine, ledgers and transcript.
//! - [`channel`]: ideal and adversarial quantum channels.
//! - [`experiment`]: seeded Monte-Carlo attack statistics.

pub mod channel;
pub mod codec;
pub mod experiment;
pub mod protocol;
pub mod quantum;

pub use channel::{ChannelModel, ChannelSpec};
pub use codec::BitPair;
pub use protocol::{
    AbortReason, Party, ProtocolError, ProtocolParams, Session, SessionState, TransmissionOutcome,
};
pub use quantum::{BellKind, MeasBasis, PauliOp, RandomSource, TwoQubitState};
