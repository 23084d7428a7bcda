//! Fixtures shared by the benchmarks.

use qpc_core::protocol::default_supply_size;
use qpc_core::{make_supply, BitString, CheckPolicy, DiConfig, HashKey, Rng, SupplierStrategy, Supply, SupplyLedger};

pub const KEY: HashKey = HashKey(0xBE7C);

/// A random string of length `n` and a copy of it.
pub fn equal_pair(n: usize, seed: u64) -> (BitString, BitString) {
    let a = BitString::random(n, &mut Rng::from_seed(seed)).expect("n in 1..=64");
    (a.clone(), a)
}

/// An honest supply sized for one default run over strings of length `n`.
pub fn honest_supply(n: usize, seed: u64) -> (Supply, SupplyLedger) {
    let size = default_supply_size(&CheckPolicy::default(), n);
    make_supply(&SupplierStrategy::honest(), size, &mut Rng::from_seed(seed)).expect("valid supplier")
}

pub fn di_config() -> DiConfig {
    DiConfig::new(KEY)
}
