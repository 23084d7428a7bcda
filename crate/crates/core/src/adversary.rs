//! Cheating strategies for one dishonest party.
//!
//! The protocol makes the party who prepared (or picked the box for) a round
//! announce last, so a cheater in that role can always echo the other
//! announcement. In the mirrored rounds the cheater announces first and has
//! to guess. Strategies are written in terms of "guesser" and "owner" and so
//! serve Alice and Bob alike.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boxes::{BoxInput, Side, Supply, SupplyLedger};
use crate::error::{QpcError, Result};
use crate::quantum::{measure_qubit_at, QubitState, INTERMEDIATE_ANGLE};
use crate::rng::Rng;

/// `cos²(π/8)`, the best probability of guessing the honest party's outcome
/// from a genuine `|Φ+>` pair or BB84 qubit.
pub fn p_max() -> f64 {
    (PI / 8.0).cos().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "p", rename_all = "snake_case")]
pub enum GuessMethod {
    /// Read the supplier ledger for pairs answering from tables; otherwise
    /// fall back to [`GuessMethod::QuantumOptimalGuess`].
    LocalBoxReadout,
    /// Measure the own box with input 2 and guess the same outcome.
    QuantumOptimalGuess,
    /// Correct with probability exactly `p`. Peeks at the honest party's
    /// recorded outcome, so it is a validation device, not a physical attack.
    BernoulliOracle(f64),
    /// Engage the remote control of the picked pair before the owner has
    /// used it; otherwise fall back to the quantum guess.
    RemoteSwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartyStrategy {
    /// Announces true outcomes and keeps inputs secret.
    #[default]
    Honest,
    Cheating {
        method: GuessMethod,
    },
}

impl PartyStrategy {
    pub fn is_honest(&self) -> bool {
        matches!(self, PartyStrategy::Honest)
    }
}

/// When the party picking a compare-mode pair uses its own box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickOrder {
    /// Input and record the output, then tell the other party the pair.
    #[default]
    RecordFirst,
    /// Tell the pair first and use the box later. Lets a supplier with
    /// remote-controlled boxes rig the answer.
    AnnounceFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PartyConfig {
    pub strategy: PartyStrategy,
    pub pick_order: PickOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Parties {
    pub alice: PartyConfig,
    pub bob: PartyConfig,
}

impl Parties {
    pub fn honest() -> Self {
        Self::default()
    }

    /// `cheater` runs `method`; the other party is honest.
    pub fn cheating(cheater: Side, method: GuessMethod) -> Self {
        let mut parties = Self::default();
        parties.get_mut(cheater).strategy = PartyStrategy::Cheating { method };
        parties
    }

    pub fn cheating_alice(method: GuessMethod) -> Self {
        Self::cheating(Side::A, method)
    }

    pub fn cheating_bob(method: GuessMethod) -> Self {
        Self::cheating(Side::B, method)
    }

    pub fn with_pick_order(mut self, side: Side, order: PickOrder) -> Self {
        self.get_mut(side).pick_order = order;
        self
    }

    pub fn get(&self, side: Side) -> &PartyConfig {
        match side {
            Side::A => &self.alice,
            Side::B => &self.bob,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut PartyConfig {
        match side {
            Side::A => &mut self.alice,
            Side::B => &mut self.bob,
        }
    }

    /// The single dishonest party, if there is exactly one.
    pub fn cheater(&self) -> Option<Side> {
        match (self.alice.strategy.is_honest(), self.bob.strategy.is_honest()) {
            (false, true) => Some(Side::A),
            (true, false) => Some(Side::B),
            _ => None,
        }
    }
}

/// Announcing second, repeat whatever the other party announced.
pub fn echo_announcement(observed: u8) -> u8 {
    observed
}

/// `p_guess` when `fraction_local` of the pairs are fully predictable and the
/// rest allow guessing with probability `p_quantum`.
pub fn effective_p_guess(fraction_local: f64, p_quantum: f64) -> f64 {
    (1.0 - fraction_local) * p_quantum + fraction_local
}

fn quantum_guess(supply: &mut Supply, pair: usize, guesser: Side) -> Result<u8> {
    let record = supply.pair(pair).ok_or(QpcError::UnknownPair(pair))?.answer(guesser);
    let outcome = match record {
        Some(r) => r.outcome,
        None => supply.query(pair, guesser, BoxInput::new(2)?)?,
    };
    Ok(outcome.bit())
}

/// The cheater's guess, as a bit, of the outcome the owner of `pair` will
/// announce. May query the guesser's own box.
pub fn guess_box_outcome(
    method: GuessMethod,
    supply: &mut Supply,
    ledger: &SupplyLedger,
    pair: usize,
    guesser: Side,
    rng: &mut Rng,
) -> Result<u8> {
    let owner = guesser.other();
    match method {
        GuessMethod::QuantumOptimalGuess => quantum_guess(supply, pair, guesser),
        GuessMethod::LocalBoxReadout => match ledger.predict(supply, pair, owner) {
            Some(outcome) => Ok(outcome.bit()),
            None => quantum_guess(supply, pair, guesser),
        },
        GuessMethod::RemoteSwitch => {
            let owner_waiting = !supply.pair(pair).ok_or(QpcError::UnknownPair(pair))?.is_queried(owner);
            if owner_waiting {
                supply.switch_remote(pair, ledger)?;
            }
            match ledger.predict(supply, pair, owner) {
                Some(outcome) => Ok(outcome.bit()),
                None => quantum_guess(supply, pair, guesser),
            }
        }
        GuessMethod::BernoulliOracle(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(QpcError::ProbabilityOutOfRange(p));
            }
            match supply.pair(pair).ok_or(QpcError::UnknownPair(pair))?.answer(owner) {
                Some(record) => Ok(flip_unless(record.outcome.bit(), p, rng)),
                None => quantum_guess(supply, pair, guesser),
            }
        }
    }
}

/// The cheater's guess of the bit encoded in a received BB84 qubit.
pub fn guess_prepared_bit(method: GuessMethod, state: QubitState, rng: &mut Rng) -> Result<u8> {
    match method {
        GuessMethod::BernoulliOracle(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(QpcError::ProbabilityOutOfRange(p));
            }
            Ok(flip_unless(state.gamma, p, rng))
        }
        // No boxes in the qubit protocol.
        GuessMethod::QuantumOptimalGuess | GuessMethod::LocalBoxReadout | GuessMethod::RemoteSwitch => {
            Ok(measure_qubit_at(state, INTERMEDIATE_ANGLE, rng))
        }
    }
}

fn flip_unless(bit: u8, p_keep: f64, rng: &mut Rng) -> u8 {
    if rng.bernoulli(p_keep) {
        bit
    } else {
        bit ^ 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{make_supply, SupplierStrategy};
    use crate::quantum::Basis;
    use crate::stats::frequency_within;

    const TRIALS: u64 = 100_000;

    /// Honest Bob uses his box with input `h`, then the cheater guesses.
    fn even_round_hits(strategy: &SupplierStrategy, method: GuessMethod, seed: u64) -> u64 {
        let mut rng = Rng::from_seed(seed);
        let (mut supply, ledger) = make_supply(strategy, TRIALS as usize, &mut rng).unwrap();
        let mut hits = 0;
        for id in 0..TRIALS as usize {
            let h = rng.bit();
            let bob = supply.query(id, Side::B, BoxInput::for_hash_bit(h)).unwrap();
            let guess = guess_box_outcome(method, &mut supply, &ledger, id, Side::A, &mut rng).unwrap();
            hits += (guess == bob.bit()) as u64;
        }
        hits
    }

    #[test]
    fn echo_repeats() {
        assert_eq!(echo_announcement(0), 0);
        assert_eq!(echo_announcement(1), 1);
    }

    #[test]
    fn effective_p_guess_examples() {
        assert!((effective_p_guess(0.39, 0.8536) - 0.910_696).abs() < 1e-12);
        assert_eq!(effective_p_guess(0.0, 0.7), 0.7);
        assert_eq!(effective_p_guess(1.0, 0.2), 1.0);
    }

    #[test]
    fn p_max_value() {
        assert!((p_max() - 0.853_553_390_593_273_7).abs() < 1e-15);
    }

    #[test]
    fn local_readout_is_always_right_on_local_pairs() {
        let hits = even_round_hits(&SupplierStrategy::mixture(1.0), GuessMethod::LocalBoxReadout, 1);
        assert_eq!(hits, TRIALS);
    }

    #[test]
    fn quantum_guess_hits_cos_squared_pi_8() {
        let hits = even_round_hits(&SupplierStrategy::honest(), GuessMethod::QuantumOptimalGuess, 2);
        assert!(frequency_within(hits, TRIALS, p_max(), 3.0), "hits = {hits}");
    }

    #[test]
    fn local_readout_falls_back_on_honest_pairs() {
        let hits = even_round_hits(&SupplierStrategy::honest(), GuessMethod::LocalBoxReadout, 3);
        assert!(frequency_within(hits, TRIALS, p_max(), 3.0), "hits = {hits}");
    }

    #[test]
    fn bernoulli_oracle_rates() {
        let honest = SupplierStrategy::honest();
        let hits = even_round_hits(&honest, GuessMethod::BernoulliOracle(0.5), 4);
        assert!(frequency_within(hits, TRIALS, 0.5, 3.0));
        assert_eq!(even_round_hits(&honest, GuessMethod::BernoulliOracle(1.0), 5), TRIALS);
        assert_eq!(even_round_hits(&honest, GuessMethod::BernoulliOracle(0.0), 6), 0);
    }

    #[test]
    fn mixture_stack_matches_effective_p_guess() {
        let hits = even_round_hits(&SupplierStrategy::mixture(0.39), GuessMethod::LocalBoxReadout, 7);
        let expected = effective_p_guess(0.39, p_max());
        assert!(frequency_within(hits, TRIALS, expected, 3.0), "hits = {hits}");
    }

    #[test]
    fn remote_switch_needs_the_owner_to_wait() {
        let mut rng = Rng::from_seed(8);
        let (mut supply, ledger) = make_supply(&SupplierStrategy::remote(), 2000, &mut rng).unwrap();
        // Owner Alice has not used pair 0 yet: the switch makes her answer known.
        for id in 0..1000 {
            let guess =
                guess_box_outcome(GuessMethod::RemoteSwitch, &mut supply, &ledger, id, Side::B, &mut rng).unwrap();
            let alice = supply.query(id, Side::A, BoxInput::for_hash_bit(rng.bit())).unwrap();
            assert_eq!(guess, alice.bit());
        }
        // Owner already recorded: the switch comes too late.
        let mut hits = 0;
        for id in 1000..2000 {
            let alice = supply.query(id, Side::A, BoxInput::for_hash_bit(rng.bit())).unwrap();
            let guess =
                guess_box_outcome(GuessMethod::RemoteSwitch, &mut supply, &ledger, id, Side::B, &mut rng).unwrap();
            hits += (guess == alice.bit()) as u64;
        }
        assert!(frequency_within(hits, 1000, p_max(), 3.0));
    }

    #[test]
    fn qubit_guess_rates() {
        let mut rng = Rng::from_seed(9);
        let mut hits = 0;
        for _ in 0..TRIALS {
            let state = QubitState::new(rng.bit(), Basis::from_bit(rng.bit()));
            hits +=
                (guess_prepared_bit(GuessMethod::QuantumOptimalGuess, state, &mut rng).unwrap() == state.gamma) as u64;
        }
        assert!(frequency_within(hits, TRIALS, p_max(), 3.0));
        let state = QubitState::new(1, Basis::X);
        assert_eq!(
            guess_prepared_bit(GuessMethod::BernoulliOracle(1.0), state, &mut rng).unwrap(),
            1
        );
        assert!(guess_prepared_bit(GuessMethod::BernoulliOracle(2.0), state, &mut rng).is_err());
    }

    #[test]
    fn parties_are_reflections() {
        let alice = Parties::cheating_alice(GuessMethod::QuantumOptimalGuess);
        let bob = Parties::cheating_bob(GuessMethod::QuantumOptimalGuess);
        assert_eq!(alice.alice, bob.bob);
        assert_eq!(alice.bob, bob.alice);
        assert_eq!(alice.cheater(), Some(Side::A));
        assert_eq!(Parties::honest().cheater(), None);
    }
}
