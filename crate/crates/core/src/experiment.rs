//! Monte-Carlo attack-detection experiments.
//!
//! Each trial is an independent session: a clean distribution and
//! handshake, then one Alice→Bob transmission with the adversary switched
//! on. Only that transmission is attacked, so the measured abort rate is
//! directly comparable with the per-transmission closed form.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{ActiveFrom, ChannelError, ChannelSpec};
use crate::codec::BitPair;
use crate::protocol::{
    AbortReason, CheckStage, EstablishOutcome, Party, ProtocolError, ProtocolParams, Session,
    SessionState, TransmissionOutcome,
};
use crate::quantum::RandomSource;

const PAYLOAD_STREAM: u64 = 7;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackExperiment {
    pub m: usize,
    pub n: usize,
    pub error_threshold: f64,
    pub channel: ChannelSpec,
    pub trials: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortStage {
    Distribution,
    Handshake,
    Transmission,
}

/// Outcome of one trial session.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub abort: Option<(AbortStage, AbortReason)>,
    /// Check pairs evaluated during the attacked transmission.
    pub check_pairs: usize,
    /// Of those, how many came out correlated.
    pub check_errors: usize,
    pub sent: Vec<BitPair>,
    pub delivered: Option<Vec<BitPair>>,
}

impl TrialResult {
    pub fn bit_errors(&self) -> Option<usize> {
        self.delivered.as_ref().map(|got| {
            got.iter()
                .zip(&self.sent)
                .map(|(a, b)| (a.hi != b.hi) as usize + (a.lo != b.lo) as usize)
                .sum()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub trials: usize,
    pub aborts: usize,
    pub abort_rate: f64,
    pub closed_form_prediction: f64,
    /// Binomial standard error of the abort rate around the prediction.
    pub standard_error: f64,
    pub abort_histogram: BTreeMap<AbortStage, usize>,
    pub abort_reasons: BTreeMap<AbortReason, usize>,
    pub check_pairs: usize,
    pub check_pair_errors: usize,
    pub check_pair_error_rate: f64,
    pub delivered: usize,
    /// Fraction of payload bits flipped, over delivered transmissions only.
    pub mean_decoded_bit_error_rate: Option<f64>,
}

impl StatsReport {
    /// `|abort_rate − prediction|` in units of the standard error. Infinite
    /// when the prediction is exact (0 or 1) and the rate differs from it.
    pub fn deviation_sigmas(&self) -> f64 {
        let diff = (self.abort_rate - self.closed_form_prediction).abs();
        if self.standard_error > 0.0 {
            diff / self.standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// SplitMix64 finalizer over `(master, index)`; gives every trial its own seed
/// regardless of execution order.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn random_payload(m: usize, rng: &mut RandomSource) -> Vec<BitPair> {
    (0..m)
        .map(|_| BitPair::new(rng.coin(0.5), rng.coin(0.5)))
        .collect()
}

pub fn run_trial(exp: &AttackExperiment, index: u64) -> Result<TrialResult, ExperimentError> {
    let seed = trial_seed(exp.master_seed, index);
    let params = ProtocolParams::new(exp.m, exp.n, seed).with_threshold(exp.error_threshold);
    let channel = ActiveFrom::new(exp.channel.build()?, 1);
    let sent = random_payload(exp.m, &mut RandomSource::with_stream(seed, PAYLOAD_STREAM));
    let mut result = TrialResult {
        seed,
        abort: None,
        check_pairs: 0,
        check_errors: 0,
        sent: sent.clone(),
        delivered: None,
    };

    let mut session = Session::init_untraced(params, channel)?;
    if let SessionState::Aborted(reason) = session.state() {
        result.abort = Some((AbortStage::Distribution, reason));
        return Ok(result);
    }
    if let EstablishOutcome::Aborted(reason) = session.establish_channel()? {
        result.abort = Some((AbortStage::Handshake, reason));
        return Ok(result);
    }
    match session.send_message(Party::Alice, &sent)? {
        TransmissionOutcome::Delivered { payload } => result.delivered = Some(payload),
        TransmissionOutcome::Aborted(reason) => {
            result.abort = Some((AbortStage::Transmission, reason))
        }
    }
    for record in session
        .checks()
        .iter()
        .filter(|c| c.stage == CheckStage::Transmission)
    {
        result.check_pairs += record.outcomes.len();
        result.check_errors += record.outcomes.iter().filter(|o| o.is_error()).count();
    }
    Ok(result)
}

pub fn run_trials(
    exp: &AttackExperiment,
    execution: Execution,
) -> Result<Vec<TrialResult>, ExperimentError> {
    if exp.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    exp.channel.validate()?;
    let indices = 0..exp.trials as u64;
    match execution {
        Execution::Serial => indices.map(|i| run_trial(exp, i)).collect(),
        Execution::Parallel => indices.into_par_iter().map(|i| run_trial(exp, i)).collect(),
    }
}

pub fn summarize(
    exp: &AttackExperiment,
    results: &[TrialResult],
) -> Result<StatsReport, ExperimentError> {
    let prediction = exp.channel.predicted_abort_probability(exp.n)?;
    let trials = results.len();
    let mut abort_histogram = BTreeMap::new();
    let mut abort_reasons = BTreeMap::new();
    let (mut check_pairs, mut check_pair_errors) = (0, 0);
    let (mut delivered, mut bit_errors, mut bits) = (0, 0, 0);
    for r in results {
        if let Some((stage, reason)) = r.abort {
            *abort_histogram.entry(stage).or_insert(0) += 1;
            *abort_reasons.entry(reason).or_insert(0) += 1;
        }
        check_pairs += r.check_pairs;
        check_pair_errors += r.check_errors;
        if let Some(errors) = r.bit_errors() {
            delivered += 1;
            bit_errors += errors;
            bits += 2 * r.sent.len();
        }
    }
    let aborts: usize = abort_histogram.values().sum();
    Ok(StatsReport {
        trials,
        aborts,
        abort_rate: aborts as f64 / trials as f64,
        closed_form_prediction: prediction,
        standard_error: (prediction * (1.0 - prediction) / trials as f64).sqrt(),
        abort_histogram,
        abort_reasons,
        check_pairs,
        check_pair_errors,
        check_pair_error_rate: if check_pairs > 0 {
            check_pair_errors as f64 / check_pairs as f64
        } else {
            0.0
        },
        delivered,
        mean_decoded_bit_error_rate: (bits > 0).then(|| bit_errors as f64 / bits as f64),
    })
}

pub fn run_attack_stats(
    exp: &AttackExperiment,
    execution: Execution,
) -> Result<StatsReport, ExperimentError> {
    let results = run_trials(exp, execution)?;
    summarize(exp, &results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BasisStrategy;

    fn exp(n: usize, channel: ChannelSpec, trials: usize) -> AttackExperiment {
        AttackExperiment {
            m: 1,
            n,
            error_threshold: 0.0,
            channel,
            trials,
            master_seed: 99,
        }
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::BTreeSet<_> = (0..1000).map(|i| trial_seed(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn no_interception_never_aborts() {
        let e = exp(
            4,
            ChannelSpec::InterceptResend {
                p: 0.0,
                strategy: BasisStrategy::UniformRandom,
            },
            100,
        );
        let report = run_attack_stats(&e, Execution::Serial).unwrap();
        assert_eq!(report.aborts, 0);
        assert_eq!(report.abort_rate, 0.0);
        assert_eq!(report.delivered, 100);
        assert_eq!(report.mean_decoded_bit_error_rate, Some(0.0));
        assert_eq!(report.deviation_sigmas(), 0.0);
    }

    #[test]
    fn injection_always_aborts_in_transmission() {
        let report = run_attack_stats(
            &exp(1, ChannelSpec::ParticleInjection { extra: 2 }, 50),
            Execution::Serial,
        )
        .unwrap();
        assert_eq!(report.aborts, 50);
        assert_eq!(
            report.abort_histogram.get(&AbortStage::Transmission),
            Some(&50)
        );
        assert_eq!(
            report.abort_reasons.get(&AbortReason::CountMismatch),
            Some(&50)
        );
        assert_eq!(report.mean_decoded_bit_error_rate, None);
    }

    #[test]
    fn serial_equals_parallel() {
        let e = exp(
            2,
            ChannelSpec::InterceptResend {
                p: 0.5,
                strategy: BasisStrategy::UniformRandom,
            },
            300,
        );
        assert_eq!(
            run_attack_stats(&e, Execution::Serial).unwrap(),
            run_attack_stats(&e, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn zero_trials_rejected() {
        assert_eq!(
            run_attack_stats(&exp(1, ChannelSpec::Ideal, 0), Execution::Serial),
            Err(ExperimentError::NoTrials)
        );
    }
}
