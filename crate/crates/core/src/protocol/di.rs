use serde::{Deserialize, Serialize};

use crate::adversary::{echo_announcement, guess_box_outcome, Parties, PartyStrategy, PickOrder};
use crate::boxes::{BoxInput, Side, Supply, SupplyLedger};
use crate::error::{QpcError, Result};
use crate::hashcore::{BitString, HashKey};
use crate::rng::Rng;

use super::check::run_check_round;
use super::{
    round_owner, CheatReason, CheckPolicy, ComparisonVerdict, CorrelationTable, Event, HashedInputs, Mode, RoundRecord,
    SchedulePolicy, Transcript,
};

/// How much of an execution is written to the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptLevel {
    #[default]
    Full,
    /// Everything except individual check rounds. Checkpoints still carry
    /// the aggregated statistics.
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiConfig {
    pub key: HashKey,
    pub schedule: SchedulePolicy,
    pub policy: CheckPolicy,
    pub parties: Parties,
    /// Reject a compare round whose picker names the pair before using its
    /// own box.
    pub enforce_ordering: bool,
    pub transcript: TranscriptLevel,
}

impl DiConfig {
    pub fn new(key: HashKey) -> Self {
        Self {
            key,
            schedule: SchedulePolicy::default(),
            policy: CheckPolicy::default(),
            parties: Parties::honest(),
            enforce_ordering: true,
            transcript: TranscriptLevel::Full,
        }
    }

    pub fn with_schedule(mut self, schedule: SchedulePolicy) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_policy(mut self, policy: CheckPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_parties(mut self, parties: Parties) -> Self {
        self.parties = parties;
        self
    }
}

/// Pairs needed by default for `n` compare rounds: `2·(2·R) + 4n` with `R`
/// the check rounds per party.
pub fn default_supply_size(policy: &CheckPolicy, n: usize) -> usize {
    2 * (2 * policy.check_rounds_per_party) + 4 * n
}

/// Number of supply-wide box queries after which compare mode is expected to
/// start under `schedule`. A timer box set to this index switches exactly
/// when a sequential run leaves check mode.
pub fn expected_compare_start(schedule: SchedulePolicy, policy: &CheckPolicy) -> u64 {
    match schedule {
        SchedulePolicy::Sequential => 2 * (2 * policy.check_rounds_per_party as u64),
        SchedulePolicy::Interleaved {
            mean_checks_between_compares,
        } => 2 * mean_checks_between_compares,
    }
}

struct Run<'a> {
    supply: &'a mut Supply,
    ledger: &'a SupplyLedger,
    config: &'a DiConfig,
    unused: Vec<usize>,
    table: CorrelationTable,
    checks_done: usize,
    transcript: Transcript,
}

/// Why a run stopped before its natural end.
enum Stop {
    Verdict(ComparisonVerdict),
    Error(QpcError),
}

impl From<QpcError> for Stop {
    fn from(e: QpcError) -> Self {
        match e {
            QpcError::DoubleQuery { .. } => Stop::Verdict(ComparisonVerdict::CheatDetected {
                reason: CheatReason::DoubleQuery,
            }),
            other => Stop::Error(other),
        }
    }
}

fn cheat(reason: CheatReason) -> Stop {
    Stop::Verdict(ComparisonVerdict::CheatDetected { reason })
}

impl Run<'_> {
    fn take_pair(&mut self, rng: &mut Rng) -> Result<usize> {
        if self.unused.is_empty() {
            return Err(QpcError::SupplyExhausted {
                used: self.supply.len(),
            });
        }
        let slot = rng.below(self.unused.len());
        Ok(self.unused.swap_remove(slot))
    }

    fn check(&mut self, announcer: Side, rng: &mut Rng) -> Result<(), Stop> {
        let pair = self.take_pair(rng)?;
        let transcript = match self.config.transcript {
            TranscriptLevel::Full => Some(&mut self.transcript),
            TranscriptLevel::Summary => None,
        };
        let record = run_check_round(self.supply, pair, announcer, rng, transcript)?;
        self.table.add(&record);
        self.checks_done += 1;
        Ok(())
    }

    /// Same-input test always; CHSH test only when `with_chsh`.
    fn checkpoint(&mut self, with_chsh: bool) -> Result<(), Stop> {
        let (same, mismatches) = self.table.same_input();
        let rate = if same == 0 {
            0.0
        } else {
            mismatches as f64 / same as f64
        };
        let correlated = rate <= self.config.policy.match_tolerance;
        let estimate = if with_chsh { Some(self.table.estimate()) } else { None };
        let (c1, c2, chsh_ok) = match &estimate {
            None => (None, None, true),
            Some(Ok(e)) => (Some(e.c1), Some(e.c2), e.passes(self.config.policy.c_min)),
            // Too few records to fill every cell: nothing certifies the boxes.
            Some(Err(_)) => (None, None, false),
        };
        self.transcript.push(Event::Checkpoint {
            records: self.table.total(),
            same_input_records: same,
            same_input_mismatches: mismatches,
            c1,
            c2,
            passed: correlated && chsh_ok,
        });
        if let Some(Ok(e)) = estimate {
            self.transcript.set_chsh(e);
        }
        if !correlated {
            return Err(cheat(CheatReason::CorrelationMismatch));
        }
        if !chsh_ok {
            return Err(cheat(CheatReason::ChshFailure));
        }
        Ok(())
    }

    fn compare(&mut self, i: usize, hashed: &HashedInputs, rng: &mut Rng) -> Result<(), Stop> {
        let owner = round_owner(i);
        let other = owner.other();
        let owner_cfg = *self.config.parties.get(owner);
        let other_cfg = *self.config.parties.get(other);
        let owner_input = BoxInput::for_hash_bit(hashed.bit(owner, i));

        let pair = self.take_pair(rng)?;
        if owner_cfg.pick_order == PickOrder::RecordFirst {
            self.supply.query(pair, owner, owner_input)?;
        }
        self.transcript.push(Event::Pick { i, picker: owner, pair });
        if self.config.enforce_ordering && !self.is_queried(pair, owner) {
            return Err(cheat(CheatReason::OrderingViolation));
        }

        let gamma_other = match other_cfg.strategy {
            PartyStrategy::Honest => {
                let input = BoxInput::for_hash_bit(hashed.bit(other, i));
                self.supply.query(pair, other, input)?.bit()
            }
            PartyStrategy::Cheating { method } => {
                guess_box_outcome(method, self.supply, self.ledger, pair, other, rng)?
            }
        };
        self.transcript.push(Event::Gamma {
            i,
            party: other,
            gamma: gamma_other,
        });

        if !self.is_queried(pair, owner) {
            self.supply.query(pair, owner, owner_input)?;
        }
        let gamma_owner = match owner_cfg.strategy {
            PartyStrategy::Honest => self.recorded_bit(pair, owner),
            PartyStrategy::Cheating { .. } => echo_announcement(gamma_other),
        };
        self.transcript.push(Event::Gamma {
            i,
            party: owner,
            gamma: gamma_owner,
        });

        let record = RoundRecord::new(i, gamma_owner, gamma_other);
        self.transcript.push(Event::Compare {
            record,
            pair: Some(pair),
        });
        if record.aborted {
            return Err(Stop::Verdict(ComparisonVerdict::NotEqual { abort_round: i }));
        }
        Ok(())
    }

    fn is_queried(&self, pair: usize, side: Side) -> bool {
        self.supply.pair(pair).is_some_and(|p| p.is_queried(side))
    }

    fn recorded_bit(&self, pair: usize, side: Side) -> u8 {
        self.supply
            .pair(pair)
            .and_then(|p| p.answer(side))
            .map(|r| r.outcome.bit())
            .expect("owner box used before announcing")
    }

    fn shift(&mut self, mode: Mode, drawn_by: Option<Side>) {
        self.transcript.push(Event::ModeShift { mode, drawn_by });
    }

    fn execute(&mut self, hashed: &HashedInputs, rng: &mut Rng) -> Result<(), Stop> {
        let per_party = self.config.policy.check_rounds_per_party;
        let budget = 2 * per_party;
        match self.config.schedule {
            SchedulePolicy::Sequential => {
                self.shift(Mode::Check, None);
                // Check mode (i): Alice picks, Bob announces; then (ii) mirrored.
                for announcer in [Side::B, Side::A] {
                    for _ in 0..per_party {
                        self.check(announcer, rng)?;
                    }
                }
                self.checkpoint(true)?;
                self.shift(Mode::Compare, None);
                for i in 1..=hashed.n() {
                    self.compare(i, hashed, rng)?;
                }
            }
            SchedulePolicy::Interleaved {
                mean_checks_between_compares: mean,
            } => {
                let mut announcer = Side::B;
                let mut aborted = None;
                for i in 1..=hashed.n() {
                    let drawer = round_owner(i);
                    let gap = rng.between(1, 2 * mean - 1);
                    self.shift(Mode::Check, Some(drawer));
                    for _ in 0..gap {
                        self.check(announcer, rng)?;
                        announcer = announcer.other();
                    }
                    self.checkpoint(false)?;
                    self.shift(Mode::Compare, None);
                    match self.compare(i, hashed, rng) {
                        Err(Stop::Verdict(v @ ComparisonVerdict::NotEqual { .. })) => {
                            aborted = Some(v);
                            break;
                        }
                        other => other?,
                    }
                }
                // An abort ends the comparison, not the certification: the
                // remaining check budget is still spent, as it would have
                // been in a sequential run.
                if self.checks_done < budget {
                    self.shift(Mode::Check, None);
                    while self.checks_done < budget {
                        self.check(announcer, rng)?;
                        announcer = announcer.other();
                    }
                }
                self.checkpoint(true)?;
                if let Some(verdict) = aborted {
                    return Err(Stop::Verdict(verdict));
                }
            }
        }
        Ok(())
    }
}

/// Box-based comparison of `a` and `b` on `supply`. The ledger is only
/// consulted by a cheating party.
pub fn run_di_protocol(
    a: &BitString,
    b: &BitString,
    supply: &mut Supply,
    ledger: &SupplyLedger,
    config: &DiConfig,
    rng: &mut Rng,
) -> Result<(ComparisonVerdict, Transcript)> {
    config.policy.validate()?;
    let hashed = HashedInputs::new(a, b, config.key)?;
    let unused = (0..supply.len())
        .filter(|&id| supply.pair(id).is_some_and(|p| p.is_unused()))
        .collect();
    let mut run = Run {
        supply,
        ledger,
        config,
        unused,
        table: CorrelationTable::default(),
        checks_done: 0,
        transcript: Transcript::new(hashed.n(), Some(config.schedule)),
    };
    let verdict = match run.execute(&hashed, rng) {
        Ok(()) => ComparisonVerdict::Equal,
        Err(Stop::Verdict(v)) => v,
        Err(Stop::Error(e)) => return Err(e),
    };
    let mut transcript = run.transcript;
    transcript.finish(verdict);
    Ok((verdict, transcript))
}
