//! Abort probabilities, expected leakage, the fixed-table CHSH bound, and
//! Monte Carlo estimates of the same quantities from full protocol runs.
//!
//! A cheater who echoes in its own rounds and guesses correctly with
//! probability `p` in the other party's rounds survives each even round
//! with probability `p`. The run aborts at round `m = 2k` with probability
//! `p^(k−1)(1−p)`, and the revealed hash rounds average
//! `I_A = Σ_{k=1}^{⌊n/2⌋} 2k·p^(k−1)(1−p) + n·p^⌊n/2⌋`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{effective_p_guess, p_max, GuessMethod, PartyStrategy};
use crate::boxes::{make_supply, BoxPairBehavior, LocalTableRule, LocalTables, Side, SupplierStrategy};
use crate::error::{QpcError, Result};
use crate::hashcore::{BitString, HashKey};
use crate::protocol::{default_supply_size, run_di_protocol, ComparisonVerdict, DiConfig, TranscriptLevel};
use crate::rng::Rng;
use crate::stats::{binomial_sigma, MeanEstimate};

/// Terms with `p^k` below this are dropped from the literal leakage sum.
const UNDERFLOW_CUTOFF: f64 = 1e-300;

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(QpcError::ProbabilityOutOfRange(p))
    }
}

/// Probability that a cheating run aborts at round `m`.
pub fn p_abort_at(m: u64, p_guess: f64) -> Result<f64> {
    check_probability(p_guess)?;
    if m < 2 || m % 2 == 1 {
        return Err(QpcError::InvalidAbortRound(m));
    }
    let k = m / 2;
    Ok(pow(p_guess, k - 1) * (1.0 - p_guess))
}

fn pow(p: f64, k: u64) -> f64 {
    match i32::try_from(k) {
        Ok(k) => p.powi(k),
        Err(_) => p.powf(k as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortDistribution {
    pub p_guess: f64,
    pub n: u64,
    /// `(m, p_abort^m)` for even `m`, stopping early once no probability
    /// mass is left.
    pub points: Vec<(u64, f64)>,
    /// Probability of passing all `⌊n/2⌋` even rounds.
    pub completion_probability: f64,
}

impl AbortDistribution {
    pub fn total(&self) -> f64 {
        self.points.iter().map(|&(_, p)| p).sum::<f64>() + self.completion_probability
    }
}

pub fn abort_distribution(n: u64, p_guess: f64) -> Result<AbortDistribution> {
    check_probability(p_guess)?;
    if n == 0 {
        return Err(QpcError::InvalidParameter("n must be positive".into()));
    }
    let mut points = Vec::new();
    let mut survive = 1.0;
    for k in 1..=n / 2 {
        points.push((2 * k, survive * (1.0 - p_guess)));
        survive *= p_guess;
        if survive == 0.0 {
            break;
        }
    }
    Ok(AbortDistribution {
        p_guess,
        n,
        points,
        completion_probability: survive,
    })
}

/// `I_A` by direct summation.
pub fn expected_leakage(n: u64, p_guess: f64) -> Result<f64> {
    check_probability(p_guess)?;
    let half = n / 2;
    let mut total = 0.0;
    let mut survive = 1.0;
    for k in 1..=half {
        if survive < UNDERFLOW_CUTOFF {
            survive = 0.0;
            break;
        }
        total += 2.0 * k as f64 * survive * (1.0 - p_guess);
        survive *= p_guess;
    }
    Ok(total + n as f64 * survive)
}

/// `I_A` from the geometric-series closed form.
pub fn expected_leakage_closed_form(n: u64, p_guess: f64) -> Result<f64> {
    check_probability(p_guess)?;
    if p_guess == 1.0 {
        return Ok(n as f64);
    }
    let tail = pow(p_guess, n / 2);
    let odd_extra = if n % 2 == 1 { tail } else { 0.0 };
    Ok(2.0 * (1.0 - tail) / (1.0 - p_guess) + odd_extra)
}

/// `lim_{n→∞} I_A = 2/(1−p)`, infinite at `p = 1`.
pub fn leakage_limit(p_guess: f64) -> Result<f64> {
    check_probability(p_guess)?;
    Ok(if p_guess == 1.0 {
        f64::INFINITY
    } else {
        2.0 / (1.0 - p_guess)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageCurve {
    pub p_guess: f64,
    pub points: Vec<(u64, f64)>,
}

impl LeakageCurve {
    pub fn max(&self) -> f64 {
        self.points.iter().map(|&(_, v)| v).fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// `I_A` for every `n` in `ns`.
pub fn leakage_curve(p_guess: f64, ns: impl IntoIterator<Item = u64>) -> Result<LeakageCurve> {
    check_probability(p_guess)?;
    let points = ns
        .into_iter()
        .map(|n| expected_leakage_closed_form(n, p_guess).map(|v| (n, v)))
        .collect::<Result<_>>()?;
    Ok(LeakageCurve { p_guess, points })
}

/// Supremum over `n` of the leakage with the qubit protocol's best guess,
/// `2/(1 − cos²(π/8)) ≈ 13.657`.
pub fn dd_leakage_bound() -> f64 {
    let bound = 2.0 / (1.0 - p_max());
    assert!(bound <= 14.0, "qubit-protocol leakage bound {bound} exceeds 14 bits");
    bound
}

const C1_TERMS: [(usize, usize, f64); 4] = [(2, 0, 1.0), (2, 1, 1.0), (3, 0, 1.0), (3, 1, -1.0)];
const C2_TERMS: [(usize, usize, f64); 4] = [(0, 2, 1.0), (1, 2, 1.0), (0, 3, 1.0), (1, 3, -1.0)];

fn table_polynomial(tables: &LocalTables, terms: &[(usize, usize, f64); 4]) -> f64 {
    terms
        .iter()
        .map(|&(ka, kb, sign)| sign * f64::from(tables.a[ka].value() * tables.b[kb].value()))
        .sum()
}

/// Exact `C₁` of a pair answering from fixed tables in which Bob's answers
/// to inputs 0 and 1 coincide. The value equals `2·<A2 B0>`, hence `|C₁| ≤ 2`.
pub fn theorem1_expected_c1(behavior: &BoxPairBehavior) -> Result<f64> {
    let tables = match behavior {
        BoxPairBehavior::LocalDeterministic { tables } => tables,
        other => {
            return Err(QpcError::Precondition(format!(
                "expected fixed-output tables, got {}",
                other.kind()
            )))
        }
    };
    if tables.b[0] != tables.b[1] {
        return Err(QpcError::Precondition("Bob's answers to inputs 0 and 1 differ".into()));
    }
    let c1 = table_polynomial(tables, &C1_TERMS);
    let collapsed = 2.0 * f64::from(tables.a[2].value() * tables.b[0].value());
    if c1 != collapsed {
        return Err(QpcError::Precondition(format!(
            "C1 = {c1} does not reduce to 2<A2 B0> = {collapsed}"
        )));
    }
    Ok(c1)
}

/// Exact `(C₁, C₂)` of fixed tables, without the precondition.
pub fn table_chsh(tables: &LocalTables) -> (f64, f64) {
    (table_polynomial(tables, &C1_TERMS), table_polynomial(tables, &C2_TERMS))
}

/// Expected `(C₁, C₂)` of a local pair drawn by `rule`.
pub fn local_rule_expected_chsh(rule: LocalTableRule) -> (f64, f64) {
    match rule {
        // ±1 everywhere: every correlator is 1.
        LocalTableRule::UniformConstant => (2.0, 2.0),
        // Independent signs: every correlator averages to 0.
        LocalTableRule::UniformIndependent => (0.0, 0.0),
    }
}

/// Expected `(C₁, C₂)` of a supply where `fraction_local` of the pairs are
/// drawn by `rule` and the rest are honest.
pub fn mixture_expected_chsh(fraction_local: f64, rule: LocalTableRule) -> Result<(f64, f64)> {
    check_probability(fraction_local)?;
    let quantum = 2.0 * std::f64::consts::SQRT_2;
    let (l1, l2) = local_rule_expected_chsh(rule);
    Ok((
        (1.0 - fraction_local) * quantum + fraction_local * l1,
        (1.0 - fraction_local) * quantum + fraction_local * l2,
    ))
}

/// Input strings of each trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputChoice {
    /// Independent uniform strings per trial.
    #[default]
    Random,
    /// One uniform string per trial, held by both parties.
    Equal,
    Fixed {
        a: BitString,
        b: BitString,
    },
}

/// A batch of independent protocol executions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageExperiment {
    pub n: usize,
    pub inputs: InputChoice,
    pub supplier: SupplierStrategy,
    /// Key, schedule, policy and parties. The transcript level is forced to
    /// summary.
    pub config: DiConfig,
    /// Defaults to [`default_supply_size`].
    pub supply_size: Option<usize>,
}

impl LeakageExperiment {
    pub fn new(n: usize, supplier: SupplierStrategy, config: DiConfig) -> Self {
        Self {
            n,
            inputs: InputChoice::Random,
            supplier,
            config,
            supply_size: None,
        }
    }

    /// The per-even-round guessing probability the analytic formulas should
    /// be compared with, when the strategy has a closed form.
    pub fn model_p_guess(&self) -> Option<f64> {
        let cheater = self.config.parties.cheater()?;
        let method = match self.config.parties.get(cheater).strategy {
            PartyStrategy::Cheating { method } => method,
            PartyStrategy::Honest => return None,
        };
        let table_guess_exact =
            self.supplier.special.is_empty() && self.supplier.local_table_rule == LocalTableRule::UniformConstant;
        match method {
            GuessMethod::BernoulliOracle(p) => Some(p),
            GuessMethod::QuantumOptimalGuess
                if self.supplier.fraction_local == 0.0 && self.supplier.special.is_empty() =>
            {
                Some(p_max())
            }
            GuessMethod::LocalBoxReadout if table_guess_exact => {
                Some(effective_p_guess(self.supplier.fraction_local, p_max()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortBin {
    pub m: usize,
    pub count: u64,
    pub frequency: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub analytic: Option<f64>,
    /// Binomial standard error at the analytic probability (or at the
    /// observed frequency without a model).
    pub std_err: f64,
}

impl AbortBin {
    /// Observed frequency within `k` standard errors of the model.
    pub fn within(&self, k: f64) -> Option<bool> {
        self.analytic.map(|p| (self.frequency - p).abs() <= k * self.std_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessStats {
    /// Compare rounds in which the cheater had to announce first.
    pub rounds: u64,
    /// Of those, rounds that did not abort.
    pub correct: u64,
}

impl GuessStats {
    pub fn rate(&self) -> Option<f64> {
        (self.rounds > 0).then(|| self.correct as f64 / self.rounds as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub n: usize,
    pub equal: u64,
    pub not_equal: u64,
    pub detected: u64,
    pub detection_reasons: BTreeMap<String, u64>,
    /// Runs aborting at each compare round.
    pub abort_histogram: BTreeMap<usize, u64>,
    pub abort_bins: Vec<AbortBin>,
    /// Revealed compare rounds over the runs that were not caught: `m` for
    /// an abort at `m`, `n` for a completed run. 99% confidence interval.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub revealed_bits: Option<MeanEstimate>,
    /// Same, over all runs; a caught run counts the rounds it completed.
    pub revealed_bits_all: MeanEstimate,
    pub guesses: GuessStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_p_guess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub analytic_leakage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub leakage_delta: Option<f64>,
    /// Mean CHSH values over runs that reached a final checkpoint.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_c2: Option<f64>,
    pub chsh_runs: u64,
}

impl MonteCarloReport {
    pub fn detection_rate(&self) -> f64 {
        self.detected as f64 / self.trials as f64
    }
}

struct TrialOutcome {
    verdict: ComparisonVerdict,
    compare_rounds: usize,
    guess_rounds: u64,
    guess_correct: u64,
    chsh: Option<(f64, f64)>,
}

fn run_trial(experiment: &LeakageExperiment, config: &DiConfig, rng: &Rng) -> Result<TrialOutcome> {
    let n = experiment.n;
    let mut input_rng = rng.split(0);
    let (a, b) = match &experiment.inputs {
        InputChoice::Random => (
            BitString::random(n, &mut input_rng)?,
            BitString::random(n, &mut input_rng)?,
        ),
        InputChoice::Equal => {
            let a = BitString::random(n, &mut input_rng)?;
            (a.clone(), a)
        }
        InputChoice::Fixed { a, b } => (a.clone(), b.clone()),
    };
    let size = experiment
        .supply_size
        .unwrap_or_else(|| default_supply_size(&config.policy, n));
    let (mut supply, ledger) = make_supply(&experiment.supplier, size, &mut rng.split(1))?;
    let (verdict, transcript) = run_di_protocol(&a, &b, &mut supply, &ledger, config, &mut rng.split(2))?;

    let cheater = config.parties.cheater();
    let mut outcome = TrialOutcome {
        verdict,
        compare_rounds: 0,
        guess_rounds: 0,
        guess_correct: 0,
        chsh: transcript.chsh().map(|e| (e.c1, e.c2)),
    };
    for (record, _) in transcript.compare_rounds() {
        outcome.compare_rounds += 1;
        if cheater.is_some_and(|c: Side| record.owner == c.other()) {
            outcome.guess_rounds += 1;
            outcome.guess_correct += !record.aborted as u64;
        }
    }
    Ok(outcome)
}

/// Run `trials` independent executions. Trial `t` draws everything from
/// child `t` of `rng`, so the report does not depend on thread count.
pub fn monte_carlo_leakage(experiment: &LeakageExperiment, trials: u64, rng: &Rng) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(QpcError::InvalidParameter("trials must be positive".into()));
    }
    let mut config = experiment.config;
    config.transcript = TranscriptLevel::Summary;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(experiment, &config, &rng.split(t)))
        .collect::<Result<_>>()?;

    let n = experiment.n;
    let mut report = MonteCarloReport {
        trials,
        n,
        equal: 0,
        not_equal: 0,
        detected: 0,
        detection_reasons: BTreeMap::new(),
        abort_histogram: BTreeMap::new(),
        abort_bins: Vec::new(),
        revealed_bits: None,
        revealed_bits_all: MeanEstimate::from_moments(1, 0.0, 0.0, 0.99),
        guesses: GuessStats { rounds: 0, correct: 0 },
        model_p_guess: experiment.model_p_guess(),
        analytic_leakage: None,
        leakage_delta: None,
        mean_c1: None,
        mean_c2: None,
        chsh_runs: 0,
    };
    let (mut pass_sum, mut pass_sq, mut pass_count) = (0.0, 0.0, 0u64);
    let (mut all_sum, mut all_sq) = (0.0, 0.0);
    let (mut c1_sum, mut c2_sum) = (0.0, 0.0);
    for o in &outcomes {
        let revealed = match o.verdict {
            ComparisonVerdict::Equal => {
                report.equal += 1;
                n as f64
            }
            ComparisonVerdict::NotEqual { abort_round } => {
                report.not_equal += 1;
                *report.abort_histogram.entry(abort_round).or_default() += 1;
                abort_round as f64
            }
            ComparisonVerdict::CheatDetected { reason } => {
                report.detected += 1;
                *report.detection_reasons.entry(reason.to_string()).or_default() += 1;
                o.compare_rounds as f64
            }
        };
        if !matches!(o.verdict, ComparisonVerdict::CheatDetected { .. }) {
            pass_sum += revealed;
            pass_sq += revealed * revealed;
            pass_count += 1;
        }
        all_sum += revealed;
        all_sq += revealed * revealed;
        report.guesses.rounds += o.guess_rounds;
        report.guesses.correct += o.guess_correct;
        if let Some((c1, c2)) = o.chsh {
            c1_sum += c1;
            c2_sum += c2;
            report.chsh_runs += 1;
        }
    }
    report.revealed_bits_all = MeanEstimate::from_moments(trials, all_sum, all_sq, 0.99);
    if pass_count > 0 {
        report.revealed_bits = Some(MeanEstimate::from_moments(pass_count, pass_sum, pass_sq, 0.99));
    }
    if report.chsh_runs > 0 {
        report.mean_c1 = Some(c1_sum / report.chsh_runs as f64);
        report.mean_c2 = Some(c2_sum / report.chsh_runs as f64);
    }

    let analytic = match report.model_p_guess {
        Some(p) => Some(abort_distribution(n as u64, p)?),
        None => None,
    };
    let bins: Vec<usize> = match &analytic {
        Some(dist) => dist.points.iter().map(|&(m, _)| m as usize).collect(),
        None => report.abort_histogram.keys().copied().collect(),
    };
    for m in bins {
        let count = report.abort_histogram.get(&m).copied().unwrap_or(0);
        let frequency = count as f64 / trials as f64;
        let model = analytic
            .as_ref()
            .and_then(|d| d.points.iter().find(|&&(pm, _)| pm as usize == m).map(|&(_, p)| p));
        report.abort_bins.push(AbortBin {
            m,
            count,
            frequency,
            analytic: model,
            std_err: binomial_sigma(model.unwrap_or(frequency), trials),
        });
    }
    if let Some(p) = report.model_p_guess {
        let leak = expected_leakage(n as u64, p)?;
        report.analytic_leakage = Some(leak);
        report.leakage_delta = report.revealed_bits.map(|r| r.mean - leak);
    }
    Ok(report)
}

/// Convenience: a cheating Alice with `method` against an honest Bob using
/// `HashKey(0)` and the default policy and schedule.
pub fn cheating_experiment(n: usize, supplier: SupplierStrategy, method: GuessMethod) -> LeakageExperiment {
    let config = DiConfig::new(HashKey(0)).with_parties(crate::adversary::Parties::cheating_alice(method));
    LeakageExperiment::new(n, supplier, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abort_probability_examples() {
        assert!((p_abort_at(2, 0.91).unwrap() - 0.09).abs() < 1e-12);
        assert!((p_abort_at(4, 0.91).unwrap() - 0.0819).abs() < 1e-12);
        assert_eq!(p_abort_at(2, 0.0).unwrap(), 1.0);
        assert_eq!(p_abort_at(3, 0.5), Err(QpcError::InvalidAbortRound(3)));
        assert_eq!(p_abort_at(0, 0.5), Err(QpcError::InvalidAbortRound(0)));
        assert!(p_abort_at(2, 1.5).is_err());
    }

    #[test]
    fn distribution_normalizes_and_decreases() {
        for &n in &[1u64, 2, 3, 10, 51, 1000] {
            for &p in &[0.0, 0.1, 0.5, 0.8536, 0.91, 0.99, 1.0] {
                let d = abort_distribution(n, p).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-12, "n={n} p={p}");
                if p > 0.0 && p < 1.0 {
                    assert!(d.points.windows(2).all(|w| w[1].1 < w[0].1));
                }
            }
        }
        let d = abort_distribution(50, 0.0).unwrap();
        assert_eq!(d.points, vec![(2, 1.0)]);
    }

    #[test]
    fn two_bit_leakage_is_two() {
        // Two outcomes: abort at round 2 (reveals 2) or complete (reveals 2).
        for &p in &[0.0, 0.3, 0.91, 1.0] {
            assert_eq!(expected_leakage(2, p).unwrap(), 2.0);
        }
    }

    #[test]
    fn closed_form_matches_summation() {
        for n in 1..300u64 {
            for &p in &[0.0, 0.2, 0.8536, 0.91, 0.99, 1.0] {
                let a = expected_leakage(n, p).unwrap();
                let b = expected_leakage_closed_form(n, p).unwrap();
                assert!((a - b).abs() < 1e-9, "n={n} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn leakage_plateaus() {
        assert!((expected_leakage(1000, 0.91).unwrap() - 200.0 / 9.0).abs() < 1e-6);
        assert!((expected_leakage(100_000, 0.99).unwrap() - 200.0).abs() < 1e-3);
        let limit = dd_leakage_bound();
        assert!((limit - 13.6569).abs() < 1e-4);
        assert!((expected_leakage(10_000, p_max()).unwrap() - limit).abs() < 1e-9);
        assert!(leakage_curve(p_max(), 1..2000).unwrap().is_nondecreasing());
        assert_eq!(leakage_limit(1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn theorem1_on_examples() {
        let saturating = BoxPairBehavior::LocalDeterministic {
            tables: LocalTables::constant(crate::boxes::BoxOutcome::Minus),
        };
        assert_eq!(theorem1_expected_c1(&saturating).unwrap(), 2.0);
        assert!(theorem1_expected_c1(&BoxPairBehavior::HonestQuantum).is_err());

        // Average over tables where A2 is independent of B0.
        let mut sum = 0.0;
        let mut count = 0.0;
        for tables in LocalTables::enumerate().filter(|t| t.b[0] == t.b[1]) {
            sum += theorem1_expected_c1(&BoxPairBehavior::LocalDeterministic { tables }).unwrap();
            count += 1.0;
        }
        assert_eq!(sum / count, 0.0);
    }

    #[test]
    fn mixture_prediction() {
        let (c1, c2) = mixture_expected_chsh(0.39, LocalTableRule::UniformConstant).unwrap();
        assert!((c1 - 2.505).abs() < 1e-3);
        assert_eq!(c1, c2);
    }

    #[test]
    fn report_is_reproducible() {
        let experiment = cheating_experiment(10, SupplierStrategy::honest(), GuessMethod::BernoulliOracle(0.7));
        let mut experiment = experiment;
        experiment.config.policy.check_rounds_per_party = 200;
        let r1 = monte_carlo_leakage(&experiment, 100, &Rng::from_seed(3)).unwrap();
        let r2 = monte_carlo_leakage(&experiment, 100, &Rng::from_seed(3)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.trials, 100);
        assert!(r1.abort_histogram.keys().all(|m| m % 2 == 0));
        let all = r1.revealed_bits_all;
        assert!(all.lower <= all.mean && all.mean <= all.upper);
    }

    #[test]
    fn perfect_guesser_never_aborts() {
        let mut experiment = cheating_experiment(12, SupplierStrategy::honest(), GuessMethod::BernoulliOracle(1.0));
        experiment.config.policy.check_rounds_per_party = 300;
        let r = monte_carlo_leakage(&experiment, 100, &Rng::from_seed(4)).unwrap();
        assert_eq!(r.not_equal, 0);
        if let Some(bits) = r.revealed_bits {
            assert_eq!(bits.mean, 12.0);
        }
    }
}
