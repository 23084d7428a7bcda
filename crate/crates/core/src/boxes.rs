//! Device-independent box pairs.
//!
//! A pair is two black boxes, one held by each party. Each box accepts one
//! input `k ∈ {0,1,2,3}` and answers `±1`, after which it is spent. Honest
//! pairs reproduce the `|Φ+>` statistics; adversarial pairs answer from
//! tables fixed by whoever manufactured them. In every behavior a box's
//! answer is a function of its own input, data local to the pair and the
//! pair's private generator, never of the other box's input.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{QpcError, Result};
use crate::quantum::input_angle;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// Alice's box.
    A,
    /// Bob's box.
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

/// Box input `S^(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BoxInput(u8);

impl BoxInput {
    pub const ALL: [BoxInput; 4] = [BoxInput(0), BoxInput(1), BoxInput(2), BoxInput(3)];

    pub fn new(k: u8) -> Result<Self> {
        if k > 3 {
            return Err(QpcError::InvalidBoxInput(k));
        }
        Ok(BoxInput(k))
    }

    /// Input used in compare mode to encode hash bit `h`.
    pub fn for_hash_bit(h: u8) -> Self {
        BoxInput(h & 1)
    }

    pub fn random(rng: &mut Rng) -> Self {
        BoxInput((rng.next_u64() >> 62) as u8)
    }

    pub fn k(self) -> u8 {
        self.0
    }

    pub fn angle(self) -> f64 {
        input_angle(self.0)
    }

    /// `cos(θ_self − θ_other)` read from a table; the angles are multiples
    /// of `π/4`.
    pub fn correlator_with(self, other: BoxInput) -> f64 {
        const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
        const TABLE: [[f64; 4]; 4] = [[1.0, 0.0, H, H], [0.0, 1.0, H, -H], [H, H, 1.0, 0.0], [H, -H, 0.0, 1.0]];
        TABLE[self.0 as usize][other.0 as usize]
    }
}

impl TryFrom<u8> for BoxInput {
    type Error = QpcError;

    fn try_from(k: u8) -> Result<Self> {
        BoxInput::new(k)
    }
}

impl From<BoxInput> for u8 {
    fn from(input: BoxInput) -> u8 {
        input.0
    }
}

/// A box answer. `+1` encodes bit 0 and `−1` encodes bit 1 whenever an
/// outcome is announced as a bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum BoxOutcome {
    Plus,
    Minus,
}

impl BoxOutcome {
    pub fn value(self) -> i8 {
        match self {
            BoxOutcome::Plus => 1,
            BoxOutcome::Minus => -1,
        }
    }

    pub fn from_value(v: i8) -> Self {
        if v >= 0 {
            BoxOutcome::Plus
        } else {
            BoxOutcome::Minus
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            BoxOutcome::Plus => 0,
            BoxOutcome::Minus => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            BoxOutcome::Plus
        } else {
            BoxOutcome::Minus
        }
    }

    pub fn random(rng: &mut Rng) -> Self {
        Self::from_bit(rng.bit())
    }

    pub fn flipped(self) -> Self {
        match self {
            BoxOutcome::Plus => BoxOutcome::Minus,
            BoxOutcome::Minus => BoxOutcome::Plus,
        }
    }
}

impl TryFrom<i8> for BoxOutcome {
    type Error = QpcError;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(BoxOutcome::Plus),
            -1 => Ok(BoxOutcome::Minus),
            other => Err(QpcError::InvalidParameter(format!("box outcome {other} is not ±1"))),
        }
    }
}

impl From<BoxOutcome> for i8 {
    fn from(o: BoxOutcome) -> i8 {
        o.value()
    }
}

/// Fixed answers per input for both boxes of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalTables {
    pub a: [BoxOutcome; 4],
    pub b: [BoxOutcome; 4],
}

impl LocalTables {
    pub fn constant(outcome: BoxOutcome) -> Self {
        Self {
            a: [outcome; 4],
            b: [outcome; 4],
        }
    }

    pub fn side(&self, side: Side) -> &[BoxOutcome; 4] {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    pub fn answer(&self, side: Side, input: BoxInput) -> BoxOutcome {
        self.side(side)[input.k() as usize]
    }

    /// The answer on `side` when it is the same for inputs 0 and 1, i.e.
    /// known without knowing which compare-mode input will be used.
    pub fn input_independent_answer(&self, side: Side) -> Option<BoxOutcome> {
        let t = self.side(side);
        (t[0] == t[1]).then_some(t[0])
    }

    /// All 256 table combinations, in a fixed order.
    pub fn enumerate() -> impl Iterator<Item = LocalTables> {
        (0u16..256).map(|code| {
            let pick = |bit: u16| BoxOutcome::from_bit(((code >> bit) & 1) as u8);
            LocalTables {
                a: [pick(0), pick(1), pick(2), pick(3)],
                b: [pick(4), pick(5), pick(6), pick(7)],
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BoxPairBehavior {
    /// Behaves like a shared `|Φ+>`.
    HonestQuantum,
    /// Answers from tables fixed at manufacture.
    LocalDeterministic { tables: LocalTables },
    /// Honest until `activation_index` queries have been made on the whole
    /// supply, then answers from `tables`.
    TimerCheat { activation_index: u64, tables: LocalTables },
    /// Honest until the manufacturer flips the switch.
    RemoteControlled { switched: bool, tables: LocalTables },
}

impl BoxPairBehavior {
    pub fn tables(&self) -> Option<&LocalTables> {
        match self {
            BoxPairBehavior::HonestQuantum => None,
            BoxPairBehavior::LocalDeterministic { tables }
            | BoxPairBehavior::TimerCheat { tables, .. }
            | BoxPairBehavior::RemoteControlled { tables, .. } => Some(tables),
        }
    }

    /// Tables in force for a query made after `queries_before` supply-wide
    /// queries, or `None` when the pair currently behaves honestly.
    fn active_tables(&self, queries_before: u64) -> Option<&LocalTables> {
        match self {
            BoxPairBehavior::HonestQuantum => None,
            BoxPairBehavior::LocalDeterministic { tables } => Some(tables),
            BoxPairBehavior::TimerCheat {
                activation_index,
                tables,
            } => (queries_before >= *activation_index).then_some(tables),
            BoxPairBehavior::RemoteControlled { switched, tables } => switched.then_some(tables),
        }
    }

    pub fn kind(&self) -> PairKind {
        match self {
            BoxPairBehavior::HonestQuantum => PairKind::HonestQuantum,
            BoxPairBehavior::LocalDeterministic { .. } => PairKind::LocalDeterministic,
            BoxPairBehavior::TimerCheat { .. } => PairKind::TimerCheat,
            BoxPairBehavior::RemoteControlled { .. } => PairKind::RemoteControlled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    HonestQuantum,
    LocalDeterministic,
    TimerCheat,
    RemoteControlled,
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairKind::HonestQuantum => "honest_quantum",
            PairKind::LocalDeterministic => "local_deterministic",
            PairKind::TimerCheat => "timer_cheat",
            PairKind::RemoteControlled => "remote_controlled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryRecord {
    pub input: BoxInput,
    pub outcome: BoxOutcome,
    /// Answered from fixed tables rather than quantum statistics.
    pub from_table: bool,
}

#[derive(Debug, Clone)]
pub struct BoxPairState {
    id: usize,
    behavior: BoxPairBehavior,
    /// Private generator of the pair's hidden randomness; drawn from only
    /// when a box answers quantum-mechanically.
    hidden: SplitMix64,
    answers: [Option<QueryRecord>; 2],
}

impl BoxPairState {
    pub fn new(id: usize, behavior: BoxPairBehavior, seed: u64) -> Self {
        Self {
            id,
            behavior,
            hidden: SplitMix64::seed_from_u64(seed),
            answers: [None, None],
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn behavior(&self) -> &BoxPairBehavior {
        &self.behavior
    }

    pub fn answer(&self, side: Side) -> Option<QueryRecord> {
        self.answers[side.index()]
    }

    pub fn is_queried(&self, side: Side) -> bool {
        self.answers[side.index()].is_some()
    }

    pub fn is_unused(&self) -> bool {
        self.answers.iter().all(Option::is_none)
    }

    /// Query one box of the pair. `queries_before` is the number of queries
    /// already made on the whole supply; only timer boxes look at it.
    pub fn query(&mut self, side: Side, input: BoxInput, queries_before: u64) -> Result<BoxOutcome> {
        if self.is_queried(side) {
            return Err(QpcError::DoubleQuery { pair: self.id, side });
        }
        let record = match self.behavior.active_tables(queries_before) {
            Some(tables) => QueryRecord {
                input,
                outcome: tables.answer(side, input),
                from_table: true,
            },
            None => {
                let rng = &mut self.hidden;
                let outcome = match self.answers[side.other().index()] {
                    None => BoxOutcome::from_bit((rng.next_u64() >> 63) as u8),
                    Some(first) => {
                        // Agreement probability (1 + cos Δθ)/2.
                        let p_equal = 0.5 * (1.0 + input.correlator_with(first.input));
                        let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                        if unit < p_equal {
                            first.outcome
                        } else {
                            first.outcome.flipped()
                        }
                    }
                };
                QueryRecord {
                    input,
                    outcome,
                    from_table: false,
                }
            }
        };
        self.answers[side.index()] = Some(record);
        Ok(record.outcome)
    }
}

/// How the supplier fixes the answers of a local pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalTableRule {
    /// One uniform sign repeated for every input of both boxes. These pairs
    /// pass the same-input check, reach `C₁ = C₂ = 2`, and Bob's answer does
    /// not depend on his input.
    #[default]
    UniformConstant,
    /// Eight independent uniform signs.
    UniformIndependent,
}

impl LocalTableRule {
    pub fn draw(self, rng: &mut Rng) -> LocalTables {
        match self {
            LocalTableRule::UniformConstant => LocalTables::constant(BoxOutcome::random(rng)),
            LocalTableRule::UniformIndependent => {
                let mut draw = || BoxOutcome::random(rng);
                LocalTables {
                    a: [draw(), draw(), draw(), draw()],
                    b: [draw(), draw(), draw(), draw()],
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSet {
    All,
    Ids(Vec<usize>),
}

impl PairSet {
    fn contains(&self, id: usize) -> bool {
        match self {
            PairSet::All => true,
            PairSet::Ids(ids) => ids.contains(&id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecialPlacement {
    Timer { pairs: PairSet, activation_index: u64 },
    Remote { pairs: PairSet },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierStrategy {
    pub fraction_local: f64,
    pub local_table_rule: LocalTableRule,
    /// Overrides applied after the honest/local draw, later entries winning.
    pub special: Vec<SpecialPlacement>,
}

impl SupplierStrategy {
    pub fn honest() -> Self {
        Self::mixture(0.0)
    }

    /// `fraction_local` of the pairs answer from constant tables.
    pub fn mixture(fraction_local: f64) -> Self {
        Self {
            fraction_local,
            local_table_rule: LocalTableRule::UniformConstant,
            special: Vec::new(),
        }
    }

    pub fn timer(activation_index: u64) -> Self {
        Self {
            special: vec![SpecialPlacement::Timer {
                pairs: PairSet::All,
                activation_index,
            }],
            ..Self::honest()
        }
    }

    pub fn remote() -> Self {
        Self {
            special: vec![SpecialPlacement::Remote { pairs: PairSet::All }],
            ..Self::honest()
        }
    }

    pub fn with_rule(mut self, rule: LocalTableRule) -> Self {
        self.local_table_rule = rule;
        self
    }
}

/// Supplier-side record of every pair. Honest parties never see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub id: usize,
    pub variant: PairKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tables: Option<LocalTables>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub activation_index: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupplyLedger {
    pub entries: Vec<LedgerEntry>,
}

impl SupplyLedger {
    pub fn entry(&self, id: usize) -> Option<&LedgerEntry> {
        self.entries.get(id).filter(|e| e.id == id)
    }

    /// What the supplier can predict about `side` of pair `id` without
    /// knowing the input used: a table answer that is the same for inputs 0
    /// and 1, provided the box answered (or will answer) from its table.
    pub fn predict(&self, supply: &Supply, id: usize, side: Side) -> Option<BoxOutcome> {
        let entry = self.entry(id)?;
        let tables = entry.tables.as_ref()?;
        let pair = supply.pair(id)?;
        let in_table_mode = match pair.answer(side) {
            Some(record) => record.from_table,
            None => pair.behavior.active_tables(supply.queries()).is_some(),
        };
        if in_table_mode {
            tables.input_independent_answer(side)
        } else {
            None
        }
    }
}

/// The ordered list of pairs handed to the parties, plus the supply-wide
/// query counter timer boxes key on.
#[derive(Debug, Clone)]
pub struct Supply {
    pairs: Vec<BoxPairState>,
    queries: u64,
}

impl Supply {
    pub fn from_pairs(pairs: Vec<BoxPairState>) -> Self {
        Self { pairs, queries: 0 }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn pair(&self, id: usize) -> Option<&BoxPairState> {
        self.pairs.get(id)
    }

    pub fn pairs(&self) -> &[BoxPairState] {
        &self.pairs
    }

    pub fn query(&mut self, id: usize, side: Side, input: BoxInput) -> Result<BoxOutcome> {
        let queries_before = self.queries;
        let pair = self.pairs.get_mut(id).ok_or(QpcError::UnknownPair(id))?;
        let outcome = pair.query(side, input, queries_before)?;
        self.queries += 1;
        Ok(outcome)
    }

    /// Engage the remote control of pair `id`. Only the holder of the
    /// supplier ledger can do this. Returns whether the pair had a remote.
    pub fn switch_remote(&mut self, id: usize, ledger: &SupplyLedger) -> Result<bool> {
        if ledger.entry(id).is_none() {
            return Err(QpcError::UnknownPair(id));
        }
        let pair = self.pairs.get_mut(id).ok_or(QpcError::UnknownPair(id))?;
        match &mut pair.behavior {
            BoxPairBehavior::RemoteControlled { switched, .. } => {
                *switched = true;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Manufacture `count` pairs according to `strategy`.
pub fn make_supply(strategy: &SupplierStrategy, count: usize, rng: &mut Rng) -> Result<(Supply, SupplyLedger)> {
    if count == 0 {
        return Err(QpcError::InvalidParameter("supply count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&strategy.fraction_local) {
        return Err(QpcError::ProbabilityOutOfRange(strategy.fraction_local));
    }
    let mut pairs = Vec::with_capacity(count);
    let mut entries = Vec::with_capacity(count);
    for id in 0..count {
        let mut behavior = if strategy.fraction_local > 0.0 && rng.bernoulli(strategy.fraction_local) {
            BoxPairBehavior::LocalDeterministic {
                tables: strategy.local_table_rule.draw(rng),
            }
        } else {
            BoxPairBehavior::HonestQuantum
        };
        for placement in &strategy.special {
            match placement {
                SpecialPlacement::Timer {
                    pairs,
                    activation_index,
                } if pairs.contains(id) => {
                    behavior = BoxPairBehavior::TimerCheat {
                        activation_index: *activation_index,
                        tables: strategy.local_table_rule.draw(rng),
                    };
                }
                SpecialPlacement::Remote { pairs } if pairs.contains(id) => {
                    behavior = BoxPairBehavior::RemoteControlled {
                        switched: false,
                        tables: strategy.local_table_rule.draw(rng),
                    };
                }
                _ => {}
            }
        }
        entries.push(LedgerEntry {
            id,
            variant: behavior.kind(),
            tables: behavior.tables().copied(),
            activation_index: match behavior {
                BoxPairBehavior::TimerCheat { activation_index, .. } => Some(activation_index),
                _ => None,
            },
        });
        pairs.push(BoxPairState::new(id, behavior, rng.child_seed(id as u64)));
    }
    Ok((Supply::from_pairs(pairs), SupplyLedger { entries }))
}
