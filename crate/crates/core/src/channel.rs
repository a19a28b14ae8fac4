//! Quantum channel models.
//!
//! Every qubit sent between the parties passes through a [`ChannelModel`],
//! one call to [`ChannelModel::on_qubit`] per qubit in transmission order,
//! followed by one [`ChannelModel::on_batch_complete`] per batch. Models see
//! the joint state of the pair the qubit belongs to and may collapse it, and
//! may add carriers to the batch. They never touch the classical channel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::PairId;
use crate::quantum::{measure_single, Half, MeasBasis, QubitState, RandomSource, TwoQubitState};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("intercept probability {0} outside [0, 1]")]
    InterceptProbability(f64),
    #[error("closed form needs at least one check pair")]
    NoChecks,
}

/// Something that arrives at the receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum Carrier {
    /// One half of a shared pair; its state lives in the session's pair store.
    PairHalf { pair: PairId, half: Half },
    /// A particle that belongs to no pair.
    Counterfeit(QubitState),
}

/// What the adversary learned from one intercepted qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interception {
    pub basis: MeasBasis,
    pub outcome: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountReport {
    pub expected: usize,
    pub actual: usize,
}

impl CountReport {
    pub fn matches(&self) -> bool {
        self.expected == self.actual
    }
}

pub trait ChannelModel: Send {
    /// Called once per in-flight qubit. `state` is the joint state of the
    /// pair that `half` belongs to.
    fn on_qubit(
        &mut self,
        position: usize,
        half: Half,
        state: &mut TwoQubitState,
        rng: &mut RandomSource,
    ) -> Option<Interception>;

    /// Called after the last qubit of a batch. May append carriers.
    fn on_batch_complete(&mut self, expected: usize, batch: &mut Vec<Carrier>) -> CountReport {
        CountReport {
            expected,
            actual: batch.len(),
        }
    }
}

impl<C: ChannelModel + ?Sized> ChannelModel for Box<C> {
    fn on_qubit(
        &mut self,
        position: usize,
        half: Half,
        state: &mut TwoQubitState,
        rng: &mut RandomSource,
    ) -> Option<Interception> {
        (**self).on_qubit(position, half, state, rng)
    }

    fn on_batch_complete(&mut self, expected: usize, batch: &mut Vec<Carrier>) -> CountReport {
        (**self).on_batch_complete(expected, batch)
    }
}

/// Lossless, untampered transport.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealChannel;

impl ChannelModel for IdealChannel {
    fn on_qubit(
        &mut self,
        _: usize,
        _: Half,
        _: &mut TwoQubitState,
        _: &mut RandomSource,
    ) -> Option<Interception> {
        None
    }
}

pub fn ideal_channel() -> IdealChannel {
    IdealChannel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisStrategy {
    #[default]
    UniformRandom,
    FixedZ,
    FixedX,
}

impl BasisStrategy {
    fn pick(self, rng: &mut RandomSource) -> MeasBasis {
        match self {
            BasisStrategy::UniformRandom => rng.basis(),
            BasisStrategy::FixedZ => MeasBasis::Z,
            BasisStrategy::FixedX => MeasBasis::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterceptResendConfig {
    pub intercept_prob: f64,
    #[serde(default)]
    pub basis_strategy: BasisStrategy,
}

/// Eve measures a fraction of in-flight qubits and forwards a fresh qubit
/// prepared in the eigenstate she observed.
#[derive(Debug, Clone)]
pub struct InterceptResend {
    config: InterceptResendConfig,
}

pub fn intercept_resend(config: InterceptResendConfig) -> Result<InterceptResend, ChannelError> {
    let p = config.intercept_prob;
    if !(0.0..=1.0).contains(&p) {
        return Err(ChannelError::InterceptProbability(p));
    }
    Ok(InterceptResend { config })
}

/// Measures `half` in `basis` and replaces it with a freshly prepared
/// eigenstate of the outcome. The projective collapse already leaves the
/// pair as (partner's conditional state) ⊗ (eigenstate), which is exactly
/// the unentangled resent carrier.
fn intercept_and_resend(
    half: Half,
    basis: MeasBasis,
    state: &mut TwoQubitState,
    rng: &mut RandomSource,
) -> Interception {
    let (outcome, collapsed) = measure_single(state, half, basis, rng);
    *state = collapsed;
    Interception { basis, outcome }
}

impl ChannelModel for InterceptResend {
    fn on_qubit(
        &mut self,
        _: usize,
        half: Half,
        state: &mut TwoQubitState,
        rng: &mut RandomSource,
    ) -> Option<Interception> {
        if self.config.intercept_prob <= 0.0 || !rng.coin(self.config.intercept_prob) {
            return None;
        }
        let basis = self.config.basis_strategy.pick(rng);
        Some(intercept_and_resend(half, basis, state, rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleInjectionConfig {
    pub extra_per_batch: usize,
}

/// Appends counterfeit `|0⟩` carriers to every batch.
#[derive(Debug, Clone)]
pub struct ParticleInjection {
    config: ParticleInjectionConfig,
}

pub fn particle_injection(config: ParticleInjectionConfig) -> ParticleInjection {
    ParticleInjection { config }
}

impl ChannelModel for ParticleInjection {
    fn on_qubit(
        &mut self,
        _: usize,
        _: Half,
        _: &mut TwoQubitState,
        _: &mut RandomSource,
    ) -> Option<Interception> {
        None
    }

    fn on_batch_complete(&mut self, expected: usize, batch: &mut Vec<Carrier>) -> CountReport {
        batch.extend(
            (0..self.config.extra_per_batch).map(|_| Carrier::Counterfeit(QubitState::zero())),
        );
        CountReport {
            expected,
            actual: batch.len(),
        }
    }
}

/// Intercepts exactly one qubit: the one at `position` in batch number
/// `batch` (batch 0 is the initial distribution), measured in `basis`.
#[derive(Debug, Clone)]
pub struct SingleDisturbance {
    batch: usize,
    position: usize,
    basis: MeasBasis,
    batches_seen: usize,
}

impl SingleDisturbance {
    pub fn new(batch: usize, position: usize, basis: MeasBasis) -> Self {
        SingleDisturbance {
            batch,
            position,
            basis,
            batches_seen: 0,
        }
    }
}

impl ChannelModel for SingleDisturbance {
    fn on_qubit(
        &mut self,
        position: usize,
        half: Half,
        state: &mut TwoQubitState,
        rng: &mut RandomSource,
    ) -> Option<Interception> {
        (self.batches_seen == self.batch && position == self.position)
            .then(|| intercept_and_resend(half, self.basis, state, rng))
    }

    fn on_batch_complete(&mut self, expected: usize, batch: &mut Vec<Carrier>) -> CountReport {
        self.batches_seen += 1;
        CountReport {
            expected,
            actual: batch.len(),
        }
    }
}

/// Passes batches through untouched until `first_active_batch`, then
/// delegates to `inner`.
#[derive(Debug, Clone)]
pub struct ActiveFrom<C> {
    inner: C,
    first_active_batch: usize,
    batches_seen: usize,
}

impl<C> ActiveFrom<C> {
    pub fn new(inner: C, first_active_batch: usize) -> Self {
        ActiveFrom {
            inner,
            first_active_batch,
            batches_seen: 0,
        }
    }

    fn active(&self) -> bool {
        self.batches_seen >= self.first_active_batch
    }
}

impl<C: ChannelModel> ChannelModel for ActiveFrom<C> {
    fn on_qubit(
        &mut self,
        position: usize,
        half: Half,
        state: &mut TwoQubitState,
        rng: &mut RandomSource,
    ) -> Option<Interception> {
        if self.active() {
            self.inner.on_qubit(position, half, state, rng)
        } else {
            None
        }
    }

    fn on_batch_complete(&mut self, expected: usize, batch: &mut Vec<Carrier>) -> CountReport {
        let report = if self.active() {
            self.inner.on_batch_complete(expected, batch)
        } else {
            CountReport {
                expected,
                actual: batch.len(),
            }
        };
        self.batches_seen += 1;
        report
    }
}

/// Serializable description of a channel, as found in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    #[default]
    Ideal,
    InterceptResend {
        p: f64,
        #[serde(default)]
        strategy: BasisStrategy,
    },
    ParticleInjection {
        extra: usize,
    },
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            ChannelSpec::InterceptResend { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(ChannelError::InterceptProbability(p))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn ChannelModel>, ChannelError> {
        Ok(match *self {
            ChannelSpec::Ideal => Box::new(ideal_channel()),
            ChannelSpec::InterceptResend { p, strategy } => {
                Box::new(intercept_resend(InterceptResendConfig {
                    intercept_prob: p,
                    basis_strategy: strategy,
                })?)
            }
            ChannelSpec::ParticleInjection { extra } => {
                Box::new(particle_injection(ParticleInjectionConfig {
                    extra_per_batch: extra,
                }))
            }
        })
    }

    /// Probability that one transmission with `n_checks` check pairs aborts
    /// under this channel, with check bases drawn uniformly from {Z, X}.
    pub fn predicted_abort_probability(&self, n_checks: usize) -> Result<f64, ChannelError> {
        match *self {
            ChannelSpec::Ideal => Ok(0.0),
            ChannelSpec::ParticleInjection { extra } => Ok(if extra > 0 { 1.0 } else { 0.0 }),
            // A fixed Eve basis still mismatches a uniform check basis half the time,
            // so every strategy gives the same per-pair error p/4.
            ChannelSpec::InterceptResend { p, .. } => {
                detection_probability_closed_form(n_checks, p)
            }
        }
    }
}

/// `1 − (1 − p/4)^n`: chance that at least one of `n_checks` check pairs
/// comes out correlated when each transmitted half is intercepted with
/// probability `intercept_prob`.
///
/// Per pair: Eve's basis matches the check basis half the time (no error),
/// otherwise the outcomes are independent fair coins (error 1/2).
pub fn detection_probability_closed_form(
    n_checks: usize,
    intercept_prob: f64,
) -> Result<f64, ChannelError> {
    if n_checks == 0 {
        return Err(ChannelError::NoChecks);
    }
    if !(0.0..=1.0).contains(&intercept_prob) {
        return Err(ChannelError::InterceptProbability(intercept_prob));
    }
    let exponent = i32::try_from(n_checks).unwrap_or(i32::MAX);
    Ok(1.0 - (1.0 - intercept_prob / 4.0).powi(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{bell_state, measure_pair_in_basis, BellKind, TOLERANCE};

    fn singlet() -> TwoQubitState {
        bell_state(BellKind::PsiMinus)
    }

    #[test]
    fn ideal_channel_leaves_state_bit_identical() {
        let mut ch = ideal_channel();
        let mut rng = RandomSource::new(1);
        let mut s = singlet();
        assert!(ch
            .on_qubit(0, Half::Transmitted, &mut s, &mut rng)
            .is_none());
        assert_eq!(s, singlet());
        let mut batch = vec![Carrier::Counterfeit(QubitState::zero()); 4];
        assert!(ch.on_batch_complete(4, &mut batch).matches());
    }

    #[test]
    fn intercept_destroys_entanglement() {
        let mut ch = intercept_resend(InterceptResendConfig {
            intercept_prob: 1.0,
            basis_strategy: BasisStrategy::UniformRandom,
        })
        .unwrap();
        let mut rng = RandomSource::new(2);
        for _ in 0..100 {
            let mut s = singlet();
            let seen = ch.on_qubit(0, Half::Transmitted, &mut s, &mut rng).unwrap();
            assert!(s.is_product());
            // The forwarded half is the eigenstate Eve saw.
            let (again, _) = measure_single(&s, Half::Transmitted, seen.basis, &mut rng);
            assert_eq!(again, seen.outcome);
        }
    }

    #[test]
    fn zero_probability_is_passthrough() {
        let mut ch = intercept_resend(InterceptResendConfig {
            intercept_prob: 0.0,
            basis_strategy: BasisStrategy::FixedX,
        })
        .unwrap();
        let mut rng = RandomSource::new(3);
        let mut s = singlet();
        assert!(ch
            .on_qubit(0, Half::Transmitted, &mut s, &mut rng)
            .is_none());
        assert_eq!(s, singlet());
    }

    #[test]
    fn fixed_z_eve_is_invisible_to_z_checks() {
        let mut ch = intercept_resend(InterceptResendConfig {
            intercept_prob: 1.0,
            basis_strategy: BasisStrategy::FixedZ,
        })
        .unwrap();
        let mut rng = RandomSource::new(4);
        for _ in 0..1_000 {
            let mut s = singlet();
            ch.on_qubit(0, Half::Transmitted, &mut s, &mut rng);
            let (a, b) = measure_pair_in_basis(s, MeasBasis::Z, &mut rng);
            assert_ne!(a, b);
        }
    }

    #[test]
    fn bad_probability_rejected() {
        let bad = InterceptResendConfig {
            intercept_prob: 1.5,
            basis_strategy: BasisStrategy::UniformRandom,
        };
        assert_eq!(
            intercept_resend(bad).unwrap_err(),
            ChannelError::InterceptProbability(1.5)
        );
        assert!(ChannelSpec::InterceptResend {
            p: -0.1,
            strategy: BasisStrategy::FixedZ
        }
        .build()
        .is_err());
    }

    #[test]
    fn injection_appends_carriers() {
        let mut ch = particle_injection(ParticleInjectionConfig { extra_per_batch: 1 });
        let mut batch = vec![Carrier::Counterfeit(QubitState::zero()); 4];
        let report = ch.on_batch_complete(4, &mut batch);
        assert_eq!(
            report,
            CountReport {
                expected: 4,
                actual: 5
            }
        );
        assert!(!report.matches());
        let mut none = particle_injection(ParticleInjectionConfig { extra_per_batch: 0 });
        let mut batch = vec![Carrier::Counterfeit(QubitState::zero()); 4];
        assert!(none.on_batch_complete(4, &mut batch).matches());
    }

    #[test]
    fn single_disturbance_hits_one_qubit_only() {
        let mut ch = SingleDisturbance::new(1, 2, MeasBasis::Z);
        let mut rng = RandomSource::new(5);
        let mut hits = Vec::new();
        for batch in 0..3 {
            for pos in 0..4 {
                let mut s = singlet();
                if ch
                    .on_qubit(pos, Half::Transmitted, &mut s, &mut rng)
                    .is_some()
                {
                    hits.push((batch, pos));
                }
            }
            ch.on_batch_complete(4, &mut Vec::new());
        }
        assert_eq!(hits, vec![(1, 2)]);
    }

    #[test]
    fn active_from_skips_early_batches() {
        let inner = intercept_resend(InterceptResendConfig {
            intercept_prob: 1.0,
            basis_strategy: BasisStrategy::FixedX,
        })
        .unwrap();
        let mut ch = ActiveFrom::new(inner, 1);
        let mut rng = RandomSource::new(6);
        let mut s = singlet();
        assert!(ch
            .on_qubit(0, Half::Transmitted, &mut s, &mut rng)
            .is_none());
        ch.on_batch_complete(1, &mut Vec::new());
        assert!(ch
            .on_qubit(0, Half::Transmitted, &mut s, &mut rng)
            .is_some());
    }

    #[test]
    fn closed_form_values() {
        assert!((detection_probability_closed_form(1, 1.0).unwrap() - 0.25).abs() < TOLERANCE);
        let eight = detection_probability_closed_form(8, 1.0).unwrap();
        assert!((eight - (1.0 - 0.75f64.powi(8))).abs() < TOLERANCE);
        assert!((eight - 0.8999).abs() < 1e-4);
        assert_eq!(detection_probability_closed_form(5, 0.0).unwrap(), 0.0);
        assert!((detection_probability_closed_form(2, 0.5).unwrap() - 0.234375).abs() < TOLERANCE);
        assert_eq!(
            detection_probability_closed_form(0, 1.0),
            Err(ChannelError::NoChecks)
        );
        assert!(detection_probability_closed_form(1, 2.0).is_err());
    }

    #[test]
    fn channel_spec_toml_shape() {
        let spec: ChannelSpec =
            serde_json::from_str(r#"{"kind":"intercept_resend","p":0.5}"#).unwrap();
        assert_eq!(
            spec,
            ChannelSpec::InterceptResend {
                p: 0.5,
                strategy: BasisStrategy::UniformRandom
            }
        );
        let spec: ChannelSpec =
            serde_json::from_str(r#"{"kind":"particle_injection","extra":2}"#).unwrap();
        assert_eq!(spec.predicted_abort_probability(3).unwrap(), 1.0);
    }
}
