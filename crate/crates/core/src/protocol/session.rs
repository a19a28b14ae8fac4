use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use serde::Serialize;
use serde_json::json;

use super::transcript::{Actor, EventKind, Transcript};
use super::{
    AbortReason, Announcement, CheckOutcome, PairId, PairLedger, PairStatus, Party, ProtocolError,
    ProtocolParams, SessionState,
};
use crate::channel::{Carrier, ChannelModel};
use crate::codec::{decode, encode, render_pairs, BitPair};
use crate::quantum::{
    apply_pauli, bell_measure, bell_state, measure_pair_in_basis, BellKind, Half, MeasBasis,
    RandomSource, TwoQubitState,
};

// Independent random streams derived from the session seed.
const NATURE_STREAM: u64 = 0;
const ALICE_STREAM: u64 = 1;
const BOB_STREAM: u64 = 2;
const CHANNEL_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStage {
    Handshake,
    Transmission,
}

/// Qubits that crossed the quantum channel in one batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BatchRecord {
    pub sender: Party,
    /// Emitted by the sender.
    pub sent: usize,
    /// Counted by the receiver.
    pub arrived: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub stage: CheckStage,
    pub outcomes: Vec<CheckOutcome>,
    pub error_rate: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstablishOutcome {
    Established,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransmissionOutcome {
    Delivered { payload: Vec<BitPair> },
    Aborted(AbortReason),
}

/// Both parties, the pairs they share and the channel between them.
pub struct Session {
    params: ProtocolParams,
    state: SessionState,
    store: BTreeMap<PairId, TwoQubitState>,
    alice: PairLedger,
    bob: PairLedger,
    generations: [u32; 2],
    channel: Box<dyn ChannelModel>,
    nature: RandomSource,
    alice_rng: RandomSource,
    bob_rng: RandomSource,
    channel_rng: RandomSource,
    transcript: Transcript,
    announcements: Vec<(Party, Announcement)>,
    batches: Vec<BatchRecord>,
    checks: Vec<CheckRecord>,
    handshakes: usize,
    deliveries: usize,
    bell_measurements: usize,
}

fn party_index(p: Party) -> usize {
    match p {
        Party::Alice => 0,
        Party::Bob => 1,
    }
}

impl Session {
    /// Creates the session and distributes `2(m+n)` singlet halves from the
    /// initiator to its peer. The returned session is either
    /// `HalvesDistributed` or `Aborted(CountMismatch)`.
    pub fn init<C: ChannelModel + 'static>(
        params: ProtocolParams,
        channel: C,
    ) -> Result<Session, ProtocolError> {
        Self::init_with_transcript(params, channel, Transcript::default())
    }

    /// Like [`Session::init`] but records nothing. For bulk experiments
    /// that only need outcomes and counters.
    pub fn init_untraced<C: ChannelModel + 'static>(
        params: ProtocolParams,
        channel: C,
    ) -> Result<Session, ProtocolError> {
        Self::init_with_transcript(params, channel, Transcript::disabled())
    }

    fn init_with_transcript<C: ChannelModel + 'static>(
        params: ProtocolParams,
        channel: C,
        transcript: Transcript,
    ) -> Result<Session, ProtocolError> {
        params.validate()?;
        let seed = params.seed;
        let mut session = Session {
            params,
            state: SessionState::Created,
            store: BTreeMap::new(),
            alice: PairLedger::new(Party::Alice),
            bob: PairLedger::new(Party::Bob),
            generations: [0, 0],
            channel: Box::new(channel),
            nature: RandomSource::with_stream(seed, NATURE_STREAM),
            alice_rng: RandomSource::with_stream(seed, ALICE_STREAM),
            bob_rng: RandomSource::with_stream(seed, BOB_STREAM),
            channel_rng: RandomSource::with_stream(seed, CHANNEL_STREAM),
            transcript,
            announcements: Vec::new(),
            batches: Vec::new(),
            checks: Vec::new(),
            handshakes: 0,
            deliveries: 0,
            bell_measurements: 0,
        };
        let initiator = params.initiator;
        session
            .transcript
            .push(initiator.into(), EventKind::SessionCreated, || {
                json!({
                    "m": params.m,
                    "n": params.n,
                    "error_threshold": params.error_threshold,
                    "seed": params.seed,
                    "initiator": initiator,
                })
            });

        let pairs = session.prepare_pairs(initiator, 2 * params.live_pairs())?;
        let batch = pairs
            .iter()
            .map(|&pair| Carrier::PairHalf {
                pair,
                half: Half::Transmitted,
            })
            .collect();
        match session.transmit(initiator, batch) {
            Ok(_) => {
                let peer = initiator.peer();
                for &pair in &pairs {
                    session.ledger_mut(peer).register(pair, Half::Transmitted)?;
                }
                session.state = SessionState::HalvesDistributed;
            }
            Err(reason) => session.abort(initiator.peer(), reason, "distribution"),
        }
        Ok(session)
    }

    /// Spends `m + n` of the distributed pairs on a public anti-correlation
    /// check. On success each party keeps exactly `m + n` live pairs.
    pub fn establish_channel(&mut self) -> Result<EstablishOutcome, ProtocolError> {
        self.require(SessionState::HalvesDistributed, "establish_channel")?;
        let initiator = self.params.initiator;
        let live = self.ledger(initiator).live_ids();
        let count = self.params.live_pairs();
        let rng = self.party_rng(initiator);
        let mut picked: Vec<usize> = sample(rng, live.len(), count).into_vec();
        picked.sort_unstable();
        let check_pairs: Vec<PairId> = picked.into_iter().map(|i| live[i]).collect();
        let bases = check_pairs.iter().map(|_| rng.basis()).collect::<Vec<_>>();
        self.announce(
            initiator,
            Announcement::CheckPositions {
                pairs: check_pairs.clone(),
                bases: bases.clone(),
            },
        );

        let outcomes = self.measure_checks(&check_pairs, &bases)?;
        self.announce(
            initiator.peer(),
            Announcement::CheckResults {
                results: outcomes.clone(),
            },
        );
        if self.evaluate_checks(initiator, CheckStage::Handshake, outcomes)? {
            self.handshakes += 1;
            self.state = SessionState::ChannelEstablished;
            self.transcript.push(
                Actor::Channel,
                EventKind::ChannelEstablished,
                || json!({ "live_alice": self.alice.live_count(), "live_bob": self.bob.live_count() }),
            );
            self.check_continuity()?;
            Ok(EstablishOutcome::Established)
        } else {
            self.abort(initiator, AbortReason::EavesdropperDetected, "handshake");
            Ok(EstablishOutcome::Aborted(AbortReason::EavesdropperDetected))
        }
    }

    /// One transmission from `sender` to its peer: `m` symbols over `m`
    /// encoded pairs, `n` check pairs, and `m + n` fresh pairs to replace
    /// everything spent.
    pub fn send_message(
        &mut self,
        sender: Party,
        payload: &[BitPair],
    ) -> Result<TransmissionOutcome, ProtocolError> {
        self.require(SessionState::ChannelEstablished, "send_message")?;
        let (m, n) = (self.params.m, self.params.n);
        if payload.len() != m {
            return Err(ProtocolError::PayloadLength {
                expected: m,
                got: payload.len(),
            });
        }
        self.state = SessionState::InTransmission;
        let receiver = sender.peer();

        // Split the live pairs into checks and message carriers.
        let live = self.ledger(sender).live_ids();
        let mut is_check = vec![false; live.len()];
        for i in sample(self.party_rng(sender), live.len(), n) {
            is_check[i] = true;
        }
        let check_pairs: Vec<PairId> = live
            .iter()
            .zip(&is_check)
            .filter(|(_, c)| **c)
            .map(|(p, _)| *p)
            .collect();
        let message_pairs: Vec<PairId> = live
            .iter()
            .zip(&is_check)
            .filter(|(_, c)| !**c)
            .map(|(p, _)| *p)
            .collect();

        for (&pair, &symbol) in message_pairs.iter().zip(payload) {
            let half = self
                .ledger_mut(sender)
                .consume(pair, PairStatus::ConsumedMessage)?;
            let state = self
                .store
                .get_mut(&pair)
                .ok_or(ProtocolError::MissingPair(pair))?;
            *state = apply_pauli(state, half, encode(symbol));
        }
        self.transcript.push(
            sender.into(),
            EventKind::MessageEncoded,
            || json!({ "pairs": message_pairs, "payload": render_pairs(payload) }),
        );

        let mut batch = Vec::with_capacity(self.params.batch_size());
        for &pair in &live {
            if check_pairs.contains(&pair) {
                self.ledger_mut(sender)
                    .consume(pair, PairStatus::ConsumedCheck)?;
            }
            let half = self
                .ledger(sender)
                .get(pair)
                .map(|e| e.my_half)
                .ok_or(ProtocolError::MissingPair(pair))?;
            batch.push(Carrier::PairHalf { pair, half });
        }
        let fresh = self.prepare_pairs(sender, m + n)?;
        batch.extend(fresh.iter().map(|&pair| Carrier::PairHalf {
            pair,
            half: Half::Transmitted,
        }));

        if let Err(reason) = self.transmit(sender, batch) {
            self.abort(receiver, reason, "transmission");
            return Ok(TransmissionOutcome::Aborted(reason));
        }
        self.transcript.push(
            receiver.into(),
            EventKind::ArrivalConfirmed,
            || json!({ "from": sender }),
        );

        // Positions go public only once the receiver holds the qubits.
        let bases = {
            let rng = self.party_rng(sender);
            check_pairs.iter().map(|_| rng.basis()).collect::<Vec<_>>()
        };
        self.announce(
            sender,
            Announcement::CheckPositions {
                pairs: check_pairs.clone(),
                bases: bases.clone(),
            },
        );
        self.announce(
            sender,
            Announcement::PositionsOfNewPairs {
                pairs: fresh.clone(),
            },
        );

        let outcomes = self.measure_checks(&check_pairs, &bases)?;
        self.announce(
            receiver,
            Announcement::CheckResults {
                results: outcomes.clone(),
            },
        );
        if !self.evaluate_checks(receiver, CheckStage::Transmission, outcomes)? {
            self.abort(receiver, AbortReason::EavesdropperDetected, "transmission");
            return Ok(TransmissionOutcome::Aborted(
                AbortReason::EavesdropperDetected,
            ));
        }

        let mut classes = Vec::with_capacity(m);
        for &pair in &message_pairs {
            self.ledger_mut(receiver)
                .consume(pair, PairStatus::ConsumedMessage)?;
            let state = self
                .store
                .remove(&pair)
                .ok_or(ProtocolError::MissingPair(pair))?;
            self.bell_measurements += 1;
            classes.push(bell_measure(state, &mut self.nature));
        }
        let decoded: Vec<BitPair> = classes.iter().map(|k| decode(*k)).collect();
        self.transcript
            .push(receiver.into(), EventKind::MessageDecoded, || {
                json!({
                    "pairs": message_pairs,
                    "classes": classes,
                    "payload": render_pairs(&decoded),
                })
            });

        for &pair in &fresh {
            self.ledger_mut(receiver)
                .register(pair, Half::Transmitted)?;
        }
        self.state = SessionState::ChannelEstablished;
        self.deliveries += 1;
        self.transcript
            .push(receiver.into(), EventKind::Delivered, || {
                json!({
                    "from": sender,
                    "payload": render_pairs(&decoded),
                    "live_alice": self.alice.live_count(),
                    "live_bob": self.bob.live_count(),
                })
            });
        self.check_continuity()?;
        Ok(TransmissionOutcome::Delivered { payload: decoded })
    }

    /// Ends the dialogue. Remaining live pairs are discarded.
    pub fn close(&mut self, by: Party) -> Result<(), ProtocolError> {
        match self.state {
            SessionState::Closed => return Err(ProtocolError::AlreadyClosed),
            SessionState::ChannelEstablished => {}
            state => {
                return Err(ProtocolError::InvalidState {
                    operation: "close",
                    state,
                })
            }
        }
        self.announce(by, Announcement::Terminate);
        let mut discarded: BTreeSet<PairId> = self.alice.discard_live().into_iter().collect();
        discarded.extend(self.bob.discard_live());
        for pair in &discarded {
            self.store.remove(pair);
        }
        self.state = SessionState::Closed;
        self.transcript.push(
            by.into(),
            EventKind::Closed,
            || json!({ "deliveries": self.deliveries, "discarded_pairs": discarded.len() }),
        );
        Ok(())
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn ledger(&self, party: Party) -> &PairLedger {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn announcements(&self) -> &[(Party, Announcement)] {
        &self.announcements
    }

    pub fn batches(&self) -> &[BatchRecord] {
        &self.batches
    }

    pub fn checks(&self) -> &[CheckRecord] {
        &self.checks
    }

    /// How many times the full `m + n` pair handshake ran.
    pub fn handshakes(&self) -> usize {
        self.handshakes
    }

    pub fn deliveries(&self) -> usize {
        self.deliveries
    }

    pub fn bell_measurements(&self) -> usize {
        self.bell_measurements
    }

    /// Joint state of a pair that has not been measured yet.
    pub fn pair_state(&self, pair: PairId) -> Option<&TwoQubitState> {
        self.store.get(&pair)
    }

    fn ledger_mut(&mut self, party: Party) -> &mut PairLedger {
        match party {
            Party::Alice => &mut self.alice,
            Party::Bob => &mut self.bob,
        }
    }

    fn party_rng(&mut self, party: Party) -> &mut RandomSource {
        match party {
            Party::Alice => &mut self.alice_rng,
            Party::Bob => &mut self.bob_rng,
        }
    }

    fn require(
        &self,
        expected: SessionState,
        operation: &'static str,
    ) -> Result<(), ProtocolError> {
        match self.state {
            s if s == expected => Ok(()),
            SessionState::Closed => Err(ProtocolError::AlreadyClosed),
            state => Err(ProtocolError::InvalidState { operation, state }),
        }
    }

    /// Creates `count` singlets owned by `creator`, registered on its ledger
    /// as the retained half.
    fn prepare_pairs(
        &mut self,
        creator: Party,
        count: usize,
    ) -> Result<Vec<PairId>, ProtocolError> {
        let slot = party_index(creator);
        let generation = self.generations[slot];
        self.generations[slot] += 1;
        let ids: Vec<PairId> = (0..count as u32)
            .map(|index| PairId {
                creator,
                generation,
                index,
            })
            .collect();
        for &pair in &ids {
            self.store.insert(pair, bell_state(BellKind::PsiMinus));
            self.ledger_mut(creator).register(pair, Half::Retained)?;
        }
        self.transcript.push(
            creator.into(),
            EventKind::PairsPrepared,
            || json!({ "generation": generation, "count": count, "state": BellKind::PsiMinus }),
        );
        Ok(ids)
    }

    /// Pushes a batch through the channel and runs the receiver's count check.
    fn transmit(&mut self, sender: Party, mut batch: Vec<Carrier>) -> Result<(), AbortReason> {
        let expected = self.params.batch_size();
        let sent = batch.len();
        self.transcript.push(
            sender.into(),
            EventKind::QubitsSent,
            || json!({ "to": sender.peer(), "count": sent }),
        );
        for (position, carrier) in batch.iter().enumerate() {
            let Carrier::PairHalf { pair, half } = carrier else {
                continue;
            };
            let Some(state) = self.store.get_mut(pair) else {
                continue;
            };
            if let Some(seen) = self
                .channel
                .on_qubit(position, *half, state, &mut self.channel_rng)
            {
                self.transcript.push(
                    Actor::Adversary,
                    EventKind::Intercepted,
                    || json!({ "position": position, "pair": pair, "basis": seen.basis, "outcome": seen.outcome as u8 }),
                );
            }
        }
        let report = self.channel.on_batch_complete(expected, &mut batch);
        let arrived = batch.len();
        self.batches.push(BatchRecord {
            sender,
            sent,
            arrived,
        });
        self.transcript.push(
            Actor::Channel,
            EventKind::QubitsArrived,
            || json!({ "expected": expected, "actual": arrived }),
        );
        if report.matches() && arrived == expected {
            Ok(())
        } else {
            Err(AbortReason::CountMismatch)
        }
    }

    /// Measures each check pair (both halves, same basis) and marks it
    /// consumed on both ledgers.
    fn measure_checks(
        &mut self,
        pairs: &[PairId],
        bases: &[MeasBasis],
    ) -> Result<Vec<CheckOutcome>, ProtocolError> {
        let mut outcomes = Vec::with_capacity(pairs.len());
        for (&pair, &basis) in pairs.iter().zip(bases) {
            for party in [Party::Alice, Party::Bob] {
                let ledger = self.ledger_mut(party);
                if ledger
                    .get(pair)
                    .is_some_and(|e| e.status == PairStatus::Live)
                {
                    ledger.consume(pair, PairStatus::ConsumedCheck)?;
                }
            }
            let state = self
                .store
                .remove(&pair)
                .ok_or(ProtocolError::MissingPair(pair))?;
            let bits = measure_pair_in_basis(state, basis, &mut self.nature);
            outcomes.push(CheckOutcome { pair, basis, bits });
        }
        Ok(outcomes)
    }

    fn evaluate_checks(
        &mut self,
        evaluator: Party,
        stage: CheckStage,
        outcomes: Vec<CheckOutcome>,
    ) -> Result<bool, ProtocolError> {
        let bits: Vec<(bool, bool)> = outcomes.iter().map(|o| o.bits).collect();
        let rate = super::error_rate(&bits)?;
        let passed = rate <= self.params.error_threshold;
        self.transcript
            .push(evaluator.into(), EventKind::CheckEvaluated, || {
                json!({
                    "stage": stage,
                    "checks": outcomes.len(),
                    "errors": outcomes.iter().filter(|o| o.is_error()).count(),
                    "error_rate": rate,
                    "threshold": self.params.error_threshold,
                    "passed": passed,
                })
            });
        self.checks.push(CheckRecord {
            stage,
            outcomes,
            error_rate: rate,
            passed,
        });
        Ok(passed)
    }

    fn announce(&mut self, by: Party, announcement: Announcement) {
        self.transcript.push(by.into(), EventKind::Announce, || {
            serde_json::to_value(&announcement).expect("announcements serialize")
        });
        self.announcements.push((by, announcement));
    }

    fn abort(&mut self, by: Party, reason: AbortReason, stage: &str) {
        self.announce(by, Announcement::Abort { reason });
        self.state = SessionState::Aborted(reason);
        self.transcript.push(
            by.into(),
            EventKind::Aborted,
            || json!({ "reason": reason, "stage": stage }),
        );
    }

    fn check_continuity(&self) -> Result<(), ProtocolError> {
        let want = self.params.live_pairs();
        for ledger in [&self.alice, &self.bob] {
            let got = ledger.live_count();
            if got != want {
                return Err(ProtocolError::Continuity {
                    party: ledger.owner(),
                    live: got,
                    expected: want,
                });
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("params", &self.params)
            .field("state", &self.state)
            .field("live_alice", &self.alice.live_count())
            .field("live_bob", &self.bob.live_count())
            .field("events", &self.transcript.len())
            .finish()
    }
}
