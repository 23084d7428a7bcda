use crate::adversary::{echo_announcement, guess_prepared_bit, Parties, PartyStrategy};
use crate::error::Result;
use crate::hashcore::{BitString, HashKey};
use crate::quantum::{measure_qubit, Basis, QubitState};
use crate::rng::Rng;

use super::{round_owner, ComparisonVerdict, Event, HashedInputs, RoundRecord, Transcript};

/// Qubit-based comparison. In round `i` the owner prepares `|γ⟩` in basis
/// `h_i` of its own hash, the other party measures in the basis given by its
/// hash bit and announces first, then the owner announces `γ`.
pub fn run_dd_protocol(
    a: &BitString,
    b: &BitString,
    key: HashKey,
    parties: &Parties,
    rng: &mut Rng,
) -> Result<(ComparisonVerdict, Transcript)> {
    let hashed = HashedInputs::new(a, b, key)?;
    let n = hashed.n();
    let mut transcript = Transcript::new(n, None);

    for i in 1..=n {
        let owner = round_owner(i);
        let other = owner.other();

        let gamma = rng.bit();
        let state = QubitState::new(gamma, Basis::from_bit(hashed.bit(owner, i)));

        let gamma_other = match parties.get(other).strategy {
            PartyStrategy::Honest => measure_qubit(state, Basis::from_bit(hashed.bit(other, i)), rng),
            PartyStrategy::Cheating { method } => guess_prepared_bit(method, state, rng)?,
        };
        transcript.push(Event::Gamma {
            i,
            party: other,
            gamma: gamma_other,
        });

        let gamma_owner = match parties.get(owner).strategy {
            PartyStrategy::Honest => gamma,
            PartyStrategy::Cheating { .. } => echo_announcement(gamma_other),
        };
        transcript.push(Event::Gamma {
            i,
            party: owner,
            gamma: gamma_owner,
        });

        let record = RoundRecord::new(i, gamma_owner, gamma_other);
        transcript.push(Event::Compare { record, pair: None });
        if record.aborted {
            let verdict = transcript.finish(ComparisonVerdict::NotEqual { abort_round: i });
            return Ok((verdict, transcript));
        }
    }
    let verdict = transcript.finish(ComparisonVerdict::Equal);
    Ok((verdict, transcript))
}
