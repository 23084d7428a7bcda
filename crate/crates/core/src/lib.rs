//! Simulation and analysis of two-party quantum private comparison.
//!
//! Two parties holding `n`-bit strings compare their hashes bit by bit,
//! either with BB84 qubits or with black-box pairs certified by CHSH tests.
//! The crate provides both protocol engines, adversarial box suppliers and
//! cheating parties, and the leakage analysis of the cheating model.

pub mod adversary;
pub mod analysis;
pub mod boxes;
pub mod error;
pub mod hashcore;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use adversary::{effective_p_guess, p_max, GuessMethod, Parties, PartyStrategy, PickOrder};
pub use boxes::{
    make_supply, BoxInput, BoxOutcome, BoxPairBehavior, LocalTableRule, LocalTables, Side, SupplierStrategy, Supply,
    SupplyLedger,
};
pub use error::{QpcError, Result};
pub use hashcore::{hamming_distance, hash, unhash, BitString, HashKey};
pub use protocol::{
    estimate_chsh, run_check_round, run_dd_protocol, run_di_protocol, CheckPolicy, ChshEstimate, ComparisonVerdict,
    DiConfig, RoundRecord, SchedulePolicy, Transcript,
};
pub use rng::Rng;
