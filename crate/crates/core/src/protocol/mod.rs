//! Executable versions of the qubit (device-dependent) and box
//! (device-independent) comparison protocols.
//!
//! Both engines compare `H(a)` and `H(b)` one bit per round. In round `i`
//! the owner (Alice when `i` is odd, Bob when even) prepares the qubit or
//! picks the box pair, the other party announces its outcome first, and the
//! owner announces last. The first disagreement ends the run.

mod check;
mod chsh;
mod dd;
mod di;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use check::{run_check_round, run_check_session};
pub use chsh::{estimate_chsh, CellStats, CheckRecord, ChshEstimate, CorrelationTable};
pub use dd::run_dd_protocol;
pub use di::{default_supply_size, expected_compare_start, run_di_protocol, DiConfig, TranscriptLevel};

use crate::boxes::{BoxInput, BoxOutcome, Side};
use crate::error::{QpcError, Result};

/// Owner of compare round `i` (1-based).
pub fn round_owner(i: usize) -> Side {
    if i % 2 == 1 {
        Side::A
    } else {
        Side::B
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub i: usize,
    pub owner: Side,
    #[serde(rename = "gammaOwner")]
    pub announced_gamma_owner: u8,
    #[serde(rename = "gammaOther")]
    pub announced_gamma_other: u8,
    pub aborted: bool,
}

impl RoundRecord {
    pub fn new(i: usize, gamma_owner: u8, gamma_other: u8) -> Self {
        Self {
            i,
            owner: round_owner(i),
            announced_gamma_owner: gamma_owner,
            announced_gamma_other: gamma_other,
            aborted: gamma_owner != gamma_other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheatReason {
    ChshFailure,
    CorrelationMismatch,
    OrderingViolation,
    DoubleQuery,
}

impl fmt::Display for CheatReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheatReason::ChshFailure => "chsh_failure",
            CheatReason::CorrelationMismatch => "correlation_mismatch",
            CheatReason::OrderingViolation => "ordering_violation",
            CheatReason::DoubleQuery => "double_query",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum ComparisonVerdict {
    Equal,
    /// Announcements first differed in round `abort_round`.
    NotEqual {
        abort_round: usize,
    },
    CheatDetected {
        reason: CheatReason,
    },
}

impl fmt::Display for ComparisonVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComparisonVerdict::Equal => f.write_str("equal"),
            ComparisonVerdict::NotEqual { abort_round } => write!(f, "not equal (aborted at round {abort_round})"),
            ComparisonVerdict::CheatDetected { reason } => write!(f, "cheat detected ({reason})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckPolicy {
    /// Minimum accepted value of both `C₁` and `C₂`.
    pub c_min: f64,
    /// Largest accepted disagreement rate on same-input check records.
    pub match_tolerance: f64,
    pub check_rounds_per_party: usize,
}

impl Default for CheckPolicy {
    fn default() -> Self {
        Self {
            c_min: 2.5,
            match_tolerance: 0.0,
            check_rounds_per_party: 2000,
        }
    }
}

impl CheckPolicy {
    pub fn validate(&self) -> Result<()> {
        let tsirelson = 2.0 * std::f64::consts::SQRT_2;
        if !(self.c_min > 2.0 && self.c_min <= tsirelson) {
            return Err(QpcError::InvalidParameter(format!(
                "c_min {} must lie in (2, 2√2]",
                self.c_min
            )));
        }
        if !(0.0..=1.0).contains(&self.match_tolerance) {
            return Err(QpcError::ProbabilityOutOfRange(self.match_tolerance));
        }
        if self.check_rounds_per_party == 0 {
            return Err(QpcError::InvalidParameter(
                "check_rounds_per_party must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How check and compare rounds are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SchedulePolicy {
    /// All check rounds, then all compare rounds.
    Sequential,
    /// Before each compare round the parties, taking turns, draw a number of
    /// check rounds uniformly from `1..=2·mean−1`. An early `NotEqual` ends
    /// comparing but not checking: the remaining check budget still runs, and
    /// a failed final checkpoint turns the abort into a detection.
    Interleaved { mean_checks_between_compares: u64 },
}

impl Default for SchedulePolicy {
    fn default() -> Self {
        SchedulePolicy::Interleaved {
            mean_checks_between_compares: 32,
        }
    }
}

impl fmt::Display for SchedulePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulePolicy::Sequential => f.write_str("sequential"),
            SchedulePolicy::Interleaved {
                mean_checks_between_compares,
            } => write!(f, "interleaved:{mean_checks_between_compares}"),
        }
    }
}

impl FromStr for SchedulePolicy {
    type Err = QpcError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sequential" {
            return Ok(SchedulePolicy::Sequential);
        }
        let mean = s
            .strip_prefix("interleaved:")
            .and_then(|m| m.parse::<u64>().ok())
            .filter(|&m| m > 0)
            .ok_or_else(|| {
                QpcError::InvalidParameter(format!("schedule {s:?}: expected sequential or interleaved:<mean>"))
            })?;
        Ok(SchedulePolicy::Interleaved {
            mean_checks_between_compares: mean,
        })
    }
}

impl From<SchedulePolicy> for String {
    fn from(s: SchedulePolicy) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SchedulePolicy {
    type Error = QpcError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Check,
    Compare,
}

/// One message or action, in the order it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum Event {
    ModeShift {
        mode: Mode,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        drawn_by: Option<Side>,
    },
    /// A check-mode announcement of input and outcome, made before the
    /// other box of the pair is used.
    Check {
        pair: usize,
        announcer: Side,
        input: BoxInput,
        outcome: BoxOutcome,
    },
    /// The other party's private use of its box in a check round.
    CheckRecord {
        pair: usize,
        recorder: Side,
        input: BoxInput,
        outcome: BoxOutcome,
    },
    Checkpoint {
        records: u64,
        same_input_records: u64,
        same_input_mismatches: u64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        c1: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        c2: Option<f64>,
        passed: bool,
    },
    /// The owner of a compare round names the pair it picked.
    Pick { i: usize, picker: Side, pair: usize },
    /// An outcome announcement in compare mode.
    Gamma { i: usize, party: Side, gamma: u8 },
    Compare {
        #[serde(flatten)]
        record: RoundRecord,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        pair: Option<usize>,
    },
}

/// Ordered log of one execution. Events can only be appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    schedule: Option<SchedulePolicy>,
    events: Vec<Event>,
    verdict: Option<ComparisonVerdict>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    chsh: Option<ChshEstimate>,
}

impl Transcript {
    pub fn new(n: usize, schedule: Option<SchedulePolicy>) -> Self {
        Self {
            n,
            schedule,
            events: Vec::new(),
            verdict: None,
            chsh: None,
        }
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn schedule(&self) -> Option<SchedulePolicy> {
        self.schedule
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn verdict(&self) -> Option<ComparisonVerdict> {
        self.verdict
    }

    pub fn chsh(&self) -> Option<&ChshEstimate> {
        self.chsh.as_ref()
    }

    pub(crate) fn set_chsh(&mut self, estimate: ChshEstimate) {
        self.chsh = Some(estimate);
    }

    pub(crate) fn finish(&mut self, verdict: ComparisonVerdict) -> ComparisonVerdict {
        self.verdict = Some(verdict);
        verdict
    }

    pub fn compare_rounds(&self) -> impl Iterator<Item = (&RoundRecord, Option<usize>)> {
        self.events.iter().filter_map(|e| match e {
            Event::Compare { record, pair } => Some((record, *pair)),
            _ => None,
        })
    }

    pub fn check_records(&self) -> impl Iterator<Item = CheckRecord> + '_ {
        self.events
            .iter()
            .zip(self.events.iter().skip(1))
            .filter_map(|pair| match pair {
                (
                    Event::Check {
                        pair,
                        announcer,
                        input,
                        outcome,
                    },
                    Event::CheckRecord {
                        pair: rec_pair,
                        input: rec_input,
                        outcome: rec_outcome,
                        ..
                    },
                ) if pair == rec_pair => {
                    let (a, b) = match announcer {
                        Side::A => ((*input, *outcome), (*rec_input, *rec_outcome)),
                        Side::B => ((*rec_input, *rec_outcome), (*input, *outcome)),
                    };
                    Some(CheckRecord {
                        pair: *pair,
                        announcer: *announcer,
                        input_a: a.0,
                        outcome_a: a.1,
                        input_b: b.0,
                        outcome_b: b.1,
                    })
                }
                _ => None,
            })
    }
}

/// Hash bits of both parties for the compare rounds.
pub(crate) struct HashedInputs {
    pub a: crate::hashcore::BitString,
    pub b: crate::hashcore::BitString,
}

impl HashedInputs {
    pub fn new(
        a: &crate::hashcore::BitString,
        b: &crate::hashcore::BitString,
        key: crate::hashcore::HashKey,
    ) -> Result<Self> {
        if a.len() != b.len() {
            return Err(QpcError::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(Self {
            a: crate::hashcore::hash(key, a)?,
            b: crate::hashcore::hash(key, b)?,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn bit(&self, side: Side, i: usize) -> u8 {
        match side {
            Side::A => self.a.bit(i),
            Side::B => self.b.bit(i),
        }
    }
}
