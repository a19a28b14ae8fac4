use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use super::Party;
use crate::quantum::Half;

/// Identifies a pair within a session: who prepared it, in which
/// preparation round, and its index in that round. Fresh pairs always get a
/// new generation, so ids are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairId {
    pub creator: Party,
    pub generation: u32,
    pub index: u32,
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.creator {
            Party::Alice => 'A',
            Party::Bob => 'B',
        };
        write!(f, "{c}{}.{}", self.generation, self.index)
    }
}

impl Serialize for PairId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Live,
    ConsumedCheck,
    ConsumedMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    /// Which qubit of the pair this party holds. The joint state itself is
    /// kept in the session's pair store under the same [`PairId`].
    pub my_half: Half,
    pub status: PairStatus,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("{owner} already holds pair {pair}")]
    Duplicate { owner: Party, pair: PairId },
    #[error("{owner} has no pair {pair}")]
    Unknown { owner: Party, pair: PairId },
    #[error("{owner} already consumed pair {pair}")]
    AlreadyConsumed { owner: Party, pair: PairId },
}

/// One party's view of which pair halves it holds.
#[derive(Debug, Clone)]
pub struct PairLedger {
    owner: Party,
    entries: BTreeMap<PairId, LedgerEntry>,
}

impl PairLedger {
    pub fn new(owner: Party) -> Self {
        PairLedger {
            owner,
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> Party {
        self.owner
    }

    pub fn register(&mut self, pair: PairId, my_half: Half) -> Result<(), LedgerError> {
        if self.entries.contains_key(&pair) {
            return Err(LedgerError::Duplicate {
                owner: self.owner,
                pair,
            });
        }
        self.entries.insert(
            pair,
            LedgerEntry {
                my_half,
                status: PairStatus::Live,
            },
        );
        Ok(())
    }

    pub fn consume(&mut self, pair: PairId, as_status: PairStatus) -> Result<Half, LedgerError> {
        let owner = self.owner;
        let entry = self
            .entries
            .get_mut(&pair)
            .ok_or(LedgerError::Unknown { owner, pair })?;
        if entry.status != PairStatus::Live {
            return Err(LedgerError::AlreadyConsumed { owner, pair });
        }
        entry.status = as_status;
        Ok(entry.my_half)
    }

    pub fn get(&self, pair: PairId) -> Option<&LedgerEntry> {
        self.entries.get(&pair)
    }

    pub fn live_ids(&self) -> Vec<PairId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.status == PairStatus::Live)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn live_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.status == PairStatus::Live)
            .count()
    }

    /// Drops every live entry and returns their ids.
    pub fn discard_live(&mut self) -> Vec<PairId> {
        let live = self.live_ids();
        for id in &live {
            self.entries.remove(id);
        }
        live
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PairId, &LedgerEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
