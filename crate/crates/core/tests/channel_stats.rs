//! Monte-Carlo checks of the adversary models against their closed forms.

use cqsd::channel::{
    detection_probability_closed_form, intercept_resend, BasisStrategy, ChannelModel, ChannelSpec,
    IdealChannel, InterceptResendConfig,
};
use cqsd::codec::BitPair;
use cqsd::experiment::{run_attack_stats, AttackExperiment, Execution};
use cqsd::protocol::{Party, ProtocolParams, Session};
use cqsd::quantum::{bell_state, BellKind, Half, RandomSource};

fn full_attack(n: usize, strategy: BasisStrategy, trials: usize, seed: u64) -> AttackExperiment {
    AttackExperiment {
        m: 1,
        n,
        error_threshold: 0.0,
        channel: ChannelSpec::InterceptResend { p: 1.0, strategy },
        trials,
        master_seed: seed,
    }
}

#[test]
fn abort_rate_tracks_closed_form_for_several_check_counts() {
    for n in [1, 2, 4, 8] {
        let report = run_attack_stats(
            &full_attack(n, BasisStrategy::UniformRandom, 20_000, n as u64),
            Execution::Parallel,
        )
        .unwrap();
        let predicted = 1.0 - 0.75f64.powi(n as i32);
        assert!((report.closed_form_prediction - predicted).abs() < 1e-12);
        assert!(
            report.deviation_sigmas() <= 3.0,
            "n={n}: {} vs {predicted}",
            report.abort_rate
        );
    }
}

#[test]
fn fixed_basis_strategies_give_the_same_per_pair_error() {
    for strategy in [BasisStrategy::FixedZ, BasisStrategy::FixedX] {
        let report =
            run_attack_stats(&full_attack(4, strategy, 20_000, 3), Execution::Parallel).unwrap();
        let rate = report.check_pair_error_rate;
        let tol = 3.0 * (0.25f64 * 0.75 / report.check_pairs as f64).sqrt();
        assert!((rate - 0.25).abs() <= tol, "{strategy:?}: {rate}");
        assert!(
            report.deviation_sigmas() <= 3.0,
            "{strategy:?}: {}",
            report.abort_rate
        );
    }
}

#[test]
fn partial_interception_matches_closed_form() {
    let exp = AttackExperiment {
        channel: ChannelSpec::InterceptResend {
            p: 0.5,
            strategy: BasisStrategy::UniformRandom,
        },
        ..full_attack(2, BasisStrategy::UniformRandom, 50_000, 9)
    };
    let report = run_attack_stats(&exp, Execution::Parallel).unwrap();
    assert_eq!(
        report.closed_form_prediction,
        detection_probability_closed_form(2, 0.5).unwrap()
    );
    assert!((report.closed_form_prediction - 0.234375).abs() < 1e-12);
    assert!(report.deviation_sigmas() <= 3.0, "{}", report.abort_rate);
}

#[test]
fn interception_destroys_entanglement() {
    let config = InterceptResendConfig {
        intercept_prob: 1.0,
        basis_strategy: BasisStrategy::UniformRandom,
    };
    let mut eve = intercept_resend(config).unwrap();
    let mut rng = RandomSource::new(4);
    for position in 0..10_000 {
        let mut pair = bell_state(BellKind::PsiMinus);
        assert!((pair.concurrence() - 1.0).abs() < 1e-9);
        let seen = eve.on_qubit(position, Half::Transmitted, &mut pair, &mut rng);
        assert!(seen.is_some());
        assert!(pair.is_product(), "position {position}");
        assert!(pair.concurrence() < 1e-9);
    }
}

#[test]
fn surviving_attacks_corrupt_messages() {
    let report = run_attack_stats(
        &full_attack(1, BasisStrategy::UniformRandom, 10_000, 5),
        Execution::Parallel,
    )
    .unwrap();
    assert!(report.delivered > 0);
    let ber = report.mean_decoded_bit_error_rate.unwrap();
    assert!(ber > 0.1, "bit error rate {ber}");
}

#[test]
fn zero_probability_interception_is_the_ideal_channel() {
    for seed in 0..20 {
        let run = |channel: Box<dyn ChannelModel>| {
            let mut session = Session::init(ProtocolParams::new(2, 3, seed), channel).unwrap();
            session.establish_channel().unwrap();
            for t in 0..4 {
                let sender = if t % 2 == 0 { Party::Alice } else { Party::Bob };
                session
                    .send_message(
                        sender,
                        &[
                            BitPair::new(t & 1 == 0, true),
                            BitPair::new(false, t & 2 == 0),
                        ],
                    )
                    .unwrap();
            }
            session.close(Party::Alice).unwrap();
            session.transcript().to_jsonl()
        };
        let eve = intercept_resend(InterceptResendConfig {
            intercept_prob: 0.0,
            basis_strategy: BasisStrategy::UniformRandom,
        })
        .unwrap();
        assert_eq!(
            run(Box::new(eve)),
            run(Box::new(IdealChannel)),
            "seed {seed}"
        );
    }
}
