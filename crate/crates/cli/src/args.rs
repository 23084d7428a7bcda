use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpc_core::{BitString, GuessMethod, LocalTableRule, SchedulePolicy, Side};

const OUTPUT_HELP: &str = "Output file, or '-' for stdout. Relative paths resolve against \
$QPC_OUTPUT_DIR when it is set. Defaults to <command>.<format> in $QPC_OUTPUT_DIR or the \
current directory.";

/// Quantum private comparison simulator.
///
/// Exit status: 0 when the command completed (a comparison ending Equal or
/// NotEqual included), 2 when a comparison ended in CheatDetected, 64 on
/// usage errors, 1 on runtime errors and violated bounds.
#[derive(Debug, Parser)]
#[command(name = "qpc", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one comparison and write its transcript as JSON.
    Compare(CompareArgs),
    /// Abort probability at compare round m under a guessing adversary.
    ///
    /// CSV columns: m (abort round), p_abort (analytic probability);
    /// with --trials also mc_estimate (observed frequency) and mc_stderr
    /// (binomial standard error at the analytic probability).
    AbortDist(AbortDistArgs),
    /// Expected revealed bits as a function of the string length.
    ///
    /// CSV columns: n (string length), i_a_bits (expected revealed bits),
    /// series (the --p-guess value the row belongs to). Fails with status 1
    /// if a series exceeds its bound.
    LeakageCurve(LeakageCurveArgs),
    /// Detection statistics of a dishonest supplier, as JSON.
    Attack(AttackArgs),
    /// Estimate the CHSH values of a supply.
    ///
    /// CSV columns: fraction_local, c1, c1_stderr, c2, c2_stderr,
    /// c1_expected, c2_expected (exact values for the mixture), passes
    /// (both estimates at least --c-min).
    Chsh(ChshArgs),
    /// Fixed-output tables against the CHSH test.
    ///
    /// CSV columns: source (analytic_all_tables: maximum over every table
    /// with equal Bob answers to inputs 0 and 1; analytic_supply: mean over
    /// the drawn pairs; empirical: check-mode estimate), c1, c1_stderr, c2,
    /// c2_stderr. Fails with status 1 if an analytic C1 exceeds 2.
    Theorem1(Theorem1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableRule {
    /// One sign for every input of both boxes.
    Constant,
    /// Eight independent signs.
    Independent,
}

impl From<TableRule> for LocalTableRule {
    fn from(rule: TableRule) -> Self {
        match rule {
            TableRule::Constant => LocalTableRule::UniformConstant,
            TableRule::Independent => LocalTableRule::UniformIndependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Party {
    Alice,
    Bob,
}

impl From<Party> for Side {
    fn from(p: Party) -> Self {
        match p {
            Party::Alice => Side::A,
            Party::Bob => Side::B,
        }
    }
}

/// Check-mode parameters shared by every box-based command.
#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    /// CHSH acceptance threshold, in (2, 2√2].
    #[arg(long, default_value_t = 2.5)]
    pub c_min: f64,
    /// Check rounds announced by each party.
    #[arg(long, default_value_t = 2000)]
    pub check_rounds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Qubit-based engine.
    #[arg(long, conflicts_with = "di", required_unless_present = "di")]
    pub dd: bool,
    /// Box-based engine.
    #[arg(long)]
    pub di: bool,
    /// Alice's string, e.g. 1011. Random when omitted.
    #[arg(long, requires = "b")]
    pub a: Option<BitString>,
    /// Bob's string. Random when omitted.
    #[arg(long, requires = "a")]
    pub b: Option<BitString>,
    /// Length of random strings.
    #[arg(long, default_value_t = 16, conflicts_with = "a")]
    pub n: usize,
    /// Give both parties the same random string.
    #[arg(long, conflicts_with = "a")]
    pub equal: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Key of the shared hash function.
    #[arg(long, default_value_t = 0)]
    pub key: u64,
    /// sequential, or interleaved:<mean checks between compare rounds>.
    #[arg(long, default_value = "interleaved:32")]
    pub schedule: SchedulePolicy,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Fraction of pairs answering from fixed tables.
    #[arg(long, default_value_t = 0.0)]
    pub fraction_local: f64,
    /// Make one party dishonest.
    #[arg(long)]
    pub cheat: Option<Party>,
    /// Guessing method of the dishonest party: local-readout, quantum,
    /// oracle:<p>.
    #[arg(long, default_value = "quantum", value_parser = parse_method)]
    pub method: GuessMethod,
    /// Leave individual check rounds out of the transcript.
    #[arg(long)]
    pub summary: bool,
    #[arg(long, help = OUTPUT_HELP)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AbortDistArgs {
    /// Per-round guessing probability.
    #[arg(long, default_value_t = 0.91)]
    pub p_guess: f64,
    /// String length.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Monte Carlo executions to overlay on the analytic curve.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "interleaved:32")]
    pub schedule: SchedulePolicy,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, help = OUTPUT_HELP)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LeakageCurveArgs {
    /// Comma-separated guessing probabilities; `pmax` stands for cos²(π/8).
    #[arg(long, value_delimiter = ',', default_value = "0.91,0.99,pmax", value_parser = parse_p_guess)]
    pub p_guess: Vec<(String, f64)>,
    #[arg(long, default_value_t = 2)]
    pub n_min: u64,
    #[arg(long, default_value_t = 1000)]
    pub n_max: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, help = OUTPUT_HELP)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    /// Boxes that turn into fixed tables after a set number of queries.
    Timer,
    /// Boxes the supplier can switch to fixed tables at will.
    Remote,
    /// A fraction of the pairs answer from fixed tables throughout.
    Mixture,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[arg(value_enum)]
    pub attack: AttackKind,
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run one schedule only. By default both sequential and
    /// interleaved:32 are reported.
    #[arg(long)]
    pub schedule: Option<SchedulePolicy>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Local fraction of the mixture attack.
    #[arg(long, default_value_t = 0.39)]
    pub fraction_local: f64,
    /// Do not reject a pick announced before the picker used its box.
    #[arg(long)]
    pub no_ordering_rule: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, help = OUTPUT_HELP)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ChshArgs {
    /// Comma-separated local fractions.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub fraction_local: Vec<f64>,
    #[arg(long, value_enum, default_value_t = TableRule::Constant)]
    pub table_rule: TableRule,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, help = OUTPUT_HELP)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Theorem1Args {
    #[arg(long, value_enum, default_value_t = TableRule::Constant)]
    pub table_rule: TableRule,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check rounds announced by each party.
    #[arg(long, default_value_t = 2000)]
    pub check_rounds: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, help = OUTPUT_HELP)]
    pub output: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<GuessMethod, String> {
    match s {
        "local-readout" => Ok(GuessMethod::LocalBoxReadout),
        "quantum" => Ok(GuessMethod::QuantumOptimalGuess),
        _ => s
            .strip_prefix("oracle:")
            .and_then(|p| p.parse::<f64>().ok())
            .filter(|p| (0.0..=1.0).contains(p))
            .map(GuessMethod::BernoulliOracle)
            .ok_or_else(|| format!("unknown method {s:?}: expected local-readout, quantum or oracle:<p in [0,1]>")),
    }
}

fn parse_p_guess(s: &str) -> Result<(String, f64), String> {
    if s == "pmax" {
        return Ok((s.to_string(), qpc_core::p_max()));
    }
    match s.parse::<f64>() {
        Ok(p) if (0.0..1.0).contains(&p) => Ok((s.to_string(), p)),
        _ => Err(format!("{s:?} is not a probability in [0, 1) or pmax")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn methods_parse() {
        assert_eq!(parse_method("oracle:0.91"), Ok(GuessMethod::BernoulliOracle(0.91)));
        assert!(parse_method("oracle:1.5").is_err());
        assert!(parse_method("psychic").is_err());
    }

    #[test]
    fn pmax_is_a_probability() {
        let (label, p) = parse_p_guess("pmax").unwrap();
        assert_eq!(label, "pmax");
        assert!((p - 0.853553).abs() < 1e-6);
        assert!(parse_p_guess("1").is_err());
    }
}
