use qpc_core::analysis::{cheating_experiment, expected_leakage, monte_carlo_leakage, LeakageExperiment};
use qpc_core::protocol::{default_supply_size, CheatReason, Event, TranscriptLevel};
use qpc_core::*;

const KEY: HashKey = HashKey(0x5EED);

fn run_di(
    a: &BitString,
    b: &BitString,
    supplier: &SupplierStrategy,
    config: &DiConfig,
    seed: u64,
) -> Result<(ComparisonVerdict, Transcript)> {
    let rng = Rng::from_seed(seed);
    let size = default_supply_size(&config.policy, a.len());
    let (mut supply, ledger) = make_supply(supplier, size, &mut rng.split(1))?;
    run_di_protocol(a, b, &mut supply, &ledger, config, &mut rng.split(2))
}

fn schedules() -> [SchedulePolicy; 2] {
    [SchedulePolicy::Sequential, SchedulePolicy::default()]
}

#[test]
fn honest_equal_strings_never_abort() {
    for schedule in schedules() {
        let config = DiConfig::new(KEY).with_schedule(schedule);
        let mut chsh_alarms = 0;
        for seed in 0..40 {
            let a = BitString::random(24, &mut Rng::from_seed(seed)).unwrap();
            let (verdict, transcript) = run_di(&a, &a, &SupplierStrategy::honest(), &config, seed).unwrap();
            assert!(transcript.compare_rounds().all(|(r, _)| !r.aborted));
            match verdict {
                ComparisonVerdict::Equal => {}
                // Sampling noise can push an honest estimate below c_min.
                ComparisonVerdict::CheatDetected {
                    reason: CheatReason::ChshFailure,
                } => chsh_alarms += 1,
                other => panic!("{schedule}: seed {seed} gave {other}"),
            }
        }
        assert!(
            chsh_alarms <= 1,
            "{schedule}: {chsh_alarms} CHSH alarms in 40 honest runs"
        );
    }
}

#[test]
fn rounds_before_an_abort_all_agree() {
    let mut rng = Rng::from_seed(7);
    for seed in 0..30 {
        let a = BitString::random(16, &mut rng).unwrap();
        let b = BitString::random(16, &mut rng).unwrap();
        let config = DiConfig::new(KEY);
        let (verdict, transcript) = run_di(&a, &b, &SupplierStrategy::honest(), &config, seed).unwrap();
        let records: Vec<_> = transcript.compare_rounds().map(|(r, _)| *r).collect();
        if let ComparisonVerdict::NotEqual { abort_round } = verdict {
            assert_eq!(records.len(), abort_round);
            assert!(records.last().unwrap().aborted);
        }
        // Matching hash bits mean matching box inputs, which never abort.
        let (ha, hb) = (hash(KEY, &a).unwrap(), hash(KEY, &b).unwrap());
        if let Some(last) = records.last().filter(|r| r.aborted) {
            assert_ne!(ha.bit(last.i), hb.bit(last.i), "seed {seed}");
        }
        for r in records.iter().take(records.len().saturating_sub(1)) {
            assert_eq!(r.announced_gamma_owner, r.announced_gamma_other);
        }
    }
}

#[test]
fn compare_announcements_follow_pick_in_order() {
    let a = BitString::random(12, &mut Rng::from_seed(3)).unwrap();
    for schedule in schedules() {
        let config = DiConfig::new(KEY).with_schedule(schedule);
        let (_, transcript) = run_di(&a, &a, &SupplierStrategy::honest(), &config, 11).unwrap();
        let events = transcript.events();
        for i in 1..=12 {
            let pos = |pred: &dyn Fn(&Event) -> bool| events.iter().position(pred).unwrap();
            let owner = protocol::round_owner(i);
            let pick = pos(&|e| matches!(e, Event::Pick { i: j, picker, .. } if *j == i && *picker == owner));
            let other = pos(&|e| matches!(e, Event::Gamma { i: j, party, .. } if *j == i && *party != owner));
            let mine = pos(&|e| matches!(e, Event::Gamma { i: j, party, .. } if *j == i && *party == owner));
            assert!(pick < other && other < mine, "{schedule}, round {i}");
        }
    }
}

#[test]
fn summary_transcripts_keep_the_verdict() {
    let mut rng = Rng::from_seed(21);
    let a = BitString::random(16, &mut rng).unwrap();
    let b = a.flipped(9);
    for (x, y) in [(&a, &a), (&a, &b)] {
        let full = DiConfig::new(KEY);
        let summary = DiConfig {
            transcript: TranscriptLevel::Summary,
            ..full
        };
        let (v1, t1) = run_di(x, y, &SupplierStrategy::honest(), &full, 5).unwrap();
        let (v2, t2) = run_di(x, y, &SupplierStrategy::honest(), &summary, 5).unwrap();
        assert_eq!(v1, v2);
        assert!(t1.events().iter().any(|e| matches!(e, Event::Check { .. })));
        assert!(!t2
            .events()
            .iter()
            .any(|e| matches!(e, Event::Check { .. } | Event::CheckRecord { .. })));
        assert_eq!(t1.chsh(), t2.chsh());
    }
}

#[test]
fn transcript_json_round_trips() {
    let a = BitString::random(8, &mut Rng::from_seed(1)).unwrap();
    let config = DiConfig::new(KEY).with_schedule(SchedulePolicy::Interleaved {
        mean_checks_between_compares: 4,
    });
    let (_, transcript) = run_di(&a, &a, &SupplierStrategy::honest(), &config, 2).unwrap();
    let json = serde_json::to_string(&transcript).unwrap();
    let back: Transcript = serde_json::from_str(&json).unwrap();
    assert_eq!(back, transcript);
    assert!(json.contains("\"schedule\":\"interleaved:4\""));
}

#[test]
fn undersized_supply_is_an_error() {
    let a = BitString::random(8, &mut Rng::from_seed(1)).unwrap();
    let config = DiConfig::new(KEY);
    let (mut supply, ledger) = make_supply(&SupplierStrategy::honest(), 100, &mut Rng::from_seed(2)).unwrap();
    let err = run_di_protocol(&a, &a, &mut supply, &ledger, &config, &mut Rng::from_seed(3)).unwrap_err();
    assert!(matches!(err, QpcError::SupplyExhausted { .. }), "{err}");
}

#[test]
fn mismatched_lengths_are_rejected_by_both_engines() {
    let a = BitString::random(8, &mut Rng::from_seed(1)).unwrap();
    let b = BitString::random(9, &mut Rng::from_seed(1)).unwrap();
    assert!(run_dd_protocol(&a, &b, KEY, &Parties::honest(), &mut Rng::from_seed(0)).is_err());
    let config = DiConfig::new(KEY);
    assert!(run_di(&a, &b, &SupplierStrategy::honest(), &config, 0).is_err());
}

#[test]
fn monte_carlo_is_reproducible() {
    let experiment = cheating_experiment(10, SupplierStrategy::honest(), GuessMethod::BernoulliOracle(0.8));
    let first = monte_carlo_leakage(&experiment, 64, &Rng::from_seed(9)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let second = pool.install(|| monte_carlo_leakage(&experiment, 64, &Rng::from_seed(9)).unwrap());
    assert_eq!(first, second);
}

#[test]
fn oracle_leakage_matches_the_series() {
    let experiment = cheating_experiment(12, SupplierStrategy::honest(), GuessMethod::BernoulliOracle(0.7));
    let report = monte_carlo_leakage(&experiment, 4000, &Rng::from_seed(0xAB)).unwrap();
    let analytic = expected_leakage(12, 0.7).unwrap();
    assert_eq!(report.model_p_guess, Some(0.7));
    let revealed = report.revealed_bits.unwrap();
    assert!(
        (revealed.mean - analytic).abs() < 4.0 * revealed.std_err,
        "{} vs {analytic}",
        revealed.mean
    );
}

#[test]
fn local_readout_against_constant_tables_is_caught_by_chsh() {
    let mut experiment: LeakageExperiment =
        cheating_experiment(8, SupplierStrategy::mixture(1.0), GuessMethod::LocalBoxReadout);
    experiment.config.schedule = SchedulePolicy::Sequential;
    let report = monte_carlo_leakage(&experiment, 40, &Rng::from_seed(4)).unwrap();
    assert_eq!(report.detected, 40);
    assert_eq!(report.detection_reasons.get("chsh_failure"), Some(&40));
}
