use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

use super::Party;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Actor {
    Alice,
    Bob,
    Channel,
    Adversary,
}

impl From<Party> for Actor {
    fn from(p: Party) -> Self {
        match p {
            Party::Alice => Actor::Alice,
            Party::Bob => Actor::Bob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated,
    PairsPrepared,
    QubitsSent,
    Intercepted,
    QubitsArrived,
    ArrivalConfirmed,
    Announce,
    CheckEvaluated,
    MessageEncoded,
    MessageDecoded,
    ChannelEstablished,
    Delivered,
    Aborted,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptEvent {
    pub seq: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub payload: Value,
}

#[derive(Debug, Clone)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
    enabled: bool,
}

impl Default for Transcript {
    fn default() -> Self {
        Transcript {
            events: Vec::new(),
            enabled: true,
        }
    }
}

impl Transcript {
    /// A transcript that drops every event without building its payload.
    pub fn disabled() -> Self {
        Transcript {
            events: Vec::new(),
            enabled: false,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub(crate) fn push(&mut self, actor: Actor, kind: EventKind, payload: impl FnOnce() -> Value) {
        if !self.enabled {
            return;
        }
        let seq = self.events.len() as u64;
        self.events.push(TranscriptEvent {
            seq,
            actor,
            kind,
            payload: payload(),
        });
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TranscriptEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for event in &self.events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}
