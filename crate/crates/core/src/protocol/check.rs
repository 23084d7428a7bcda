use crate::boxes::{BoxInput, Side, Supply};
use crate::error::{QpcError, Result};
use crate::rng::Rng;

use super::{CheckRecord, Event, Transcript};

/// One check-mode round on `pair`. The announcer draws a uniform input, uses
/// its box and announces input and outcome; only then does the other party
/// draw its own input and record its outcome.
pub fn run_check_round(
    supply: &mut Supply,
    pair: usize,
    announcer: Side,
    rng: &mut Rng,
    transcript: Option<&mut Transcript>,
) -> Result<CheckRecord> {
    if !supply.pair(pair).ok_or(QpcError::UnknownPair(pair))?.is_unused() {
        return Err(QpcError::PairAlreadyUsed(pair));
    }
    let recorder = announcer.other();

    let announced_input = BoxInput::random(rng);
    let announced = supply.query(pair, announcer, announced_input)?;
    let mut transcript = transcript;
    if let Some(t) = transcript.as_deref_mut() {
        t.push(Event::Check {
            pair,
            announcer,
            input: announced_input,
            outcome: announced,
        });
    }

    let recorded_input = BoxInput::random(rng);
    let recorded = supply.query(pair, recorder, recorded_input)?;
    if let Some(t) = transcript {
        t.push(Event::CheckRecord {
            pair,
            recorder,
            input: recorded_input,
            outcome: recorded,
        });
    }

    let ((input_a, outcome_a), (input_b, outcome_b)) = match announcer {
        Side::A => ((announced_input, announced), (recorded_input, recorded)),
        Side::B => ((recorded_input, recorded), (announced_input, announced)),
    };
    Ok(CheckRecord {
        pair,
        announcer,
        input_a,
        outcome_a,
        input_b,
        outcome_b,
    })
}

/// Check `rounds_per_party` pairs with Bob announcing, then as many with
/// Alice announcing, on pairs taken in supply order from the first unused
/// one. Used for calibration runs outside a full protocol execution.
pub fn run_check_session(supply: &mut Supply, rounds_per_party: usize, rng: &mut Rng) -> Result<Vec<CheckRecord>> {
    let unused: Vec<usize> = (0..supply.len())
        .filter(|&id| supply.pair(id).is_some_and(|p| p.is_unused()))
        .collect();
    let mut ids = unused.into_iter();
    let mut records = Vec::with_capacity(2 * rounds_per_party);
    for announcer in [Side::B, Side::A] {
        for _ in 0..rounds_per_party {
            let id = ids.next().ok_or(QpcError::SupplyExhausted { used: records.len() })?;
            records.push(run_check_round(supply, id, announcer, rng, None)?);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{make_supply, BoxOutcome, SupplierStrategy};
    use crate::stats::frequency_within;

    #[test]
    fn announcement_precedes_the_second_query() {
        let mut rng = Rng::from_seed(1);
        let (mut supply, _) = make_supply(&SupplierStrategy::honest(), 10, &mut rng).unwrap();
        let mut transcript = Transcript::new(1, None);
        let record = run_check_round(&mut supply, 4, Side::A, &mut rng, Some(&mut transcript)).unwrap();
        match transcript.events() {
            [Event::Check {
                pair: 4,
                announcer: Side::A,
                input,
                outcome,
            }, Event::CheckRecord {
                pair: 4,
                recorder: Side::B,
                ..
            }] => {
                assert_eq!(*input, record.input_a);
                assert_eq!(*outcome, record.outcome_a);
            }
            other => panic!("unexpected events {other:?}"),
        }
        assert_eq!(transcript.check_records().collect::<Vec<_>>(), vec![record]);
    }

    #[test]
    fn used_pair_is_rejected() {
        let mut rng = Rng::from_seed(2);
        let (mut supply, _) = make_supply(&SupplierStrategy::honest(), 2, &mut rng).unwrap();
        run_check_round(&mut supply, 0, Side::B, &mut rng, None).unwrap();
        assert_eq!(
            run_check_round(&mut supply, 0, Side::B, &mut rng, None),
            Err(QpcError::PairAlreadyUsed(0))
        );
    }

    #[test]
    fn honest_same_inputs_agree_and_k2_k0_follows_correlator() {
        let mut rng = Rng::from_seed(3);
        let (mut supply, _) = make_supply(&SupplierStrategy::honest(), 400_000, &mut rng).unwrap();
        let records = run_check_session(&mut supply, 200_000, &mut rng).unwrap();
        let mut k20 = (0u64, 0u64);
        for r in &records {
            if r.input_a == r.input_b && r.input_a.k() < 2 {
                assert_eq!(r.outcome_a, r.outcome_b);
            }
            // Announcer picked 2, the other side 0.
            let announced_two = match r.announcer {
                Side::A => r.input_a.k() == 2 && r.input_b.k() == 0,
                Side::B => r.input_b.k() == 2 && r.input_a.k() == 0,
            };
            if announced_two {
                k20.0 += 1;
                k20.1 += (r.outcome_a == r.outcome_b) as u64;
            }
        }
        let expected = (std::f64::consts::PI / 8.0).cos().powi(2);
        assert!(frequency_within(k20.1, k20.0, expected, 3.0));
    }

    #[test]
    fn session_exhausts_small_supply() {
        let mut rng = Rng::from_seed(4);
        let (mut supply, _) = make_supply(&SupplierStrategy::mixture(1.0), 3, &mut rng).unwrap();
        assert!(matches!(
            run_check_session(&mut supply, 2, &mut rng),
            Err(QpcError::SupplyExhausted { .. })
        ));
        let _ = BoxOutcome::Plus;
    }
}
