//! `twosel`: 2-Selmer descents, twist scans, invariant suites and witness
//! searches for elliptic curves with full rational 2-torsion.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 verification failure,
//! 3 budget exhaustion.

mod scan_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::Serialize;

use twosel::curve::{twist, CurveInput, FullTwoTorsionModel};
use twosel::local_descent::Convention;
use twosel::padic::{local_class_int, LocalSquareClass, Place};
use twosel::selmer::{selmer_group, SelmerSpec};
use twosel::suites::{self, Suite, SuiteConfig};
use twosel::twist_lab::{self, ScanSummary, DEFAULT_PRIME_BUDGET};
use twosel::Error;

#[derive(Parser)]
#[command(name = "twosel", version, about = "2-Selmer ranks of quadratic twists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a (masked) 2-Selmer group and print it as JSON.
    Descent(DescentArgs),
    /// Compute ranks and parity checks for all squarefree |d| ≤ B.
    Scan(ScanArgs),
    /// Run a seeded invariant suite.
    Verify(VerifyArgs),
    /// Search for a constructive twist witness.
    Search(SearchArgs),
    /// Print the rank bounds recorded in a scan summary.
    Bound(BoundArgs),
}

#[derive(Args)]
struct CurveArg {
    /// Roots `e1,e2,e3` or a long Weierstrass model `[a1,a2,a3,a4,a6]`.
    #[arg(long, allow_hyphen_values = true)]
    curve: String,
}

#[derive(Args)]
struct DescentArgs {
    #[command(flatten)]
    curve: CurveArg,
    /// Descend on the quadratic twist by this squarefree integer.
    #[arg(long, allow_hyphen_values = true)]
    twist: Option<BigInt>,
    /// Local condition `place=class`, e.g. `inf=sign`, `2=-1`, `5=10`.
    #[arg(long = "mask", allow_hyphen_values = true)]
    masks: Vec<String>,
    /// Places where the restriction must vanish.
    #[arg(long = "strict")]
    strict: Vec<Place>,
    /// Places where the condition is dropped.
    #[arg(long = "relaxed")]
    relaxed: Vec<Place>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    curve: CurveArg,
    /// Largest |d| to scan
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bound: u64,
    /// Output directory for `records.jsonl`, `summary.json` and `checkpoint.json`.
    #[arg(long)]
    out: PathBuf,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Include per-twist wall time in records (output no longer reproducible).
    #[arg(long)]
    timing: bool,
    /// Checkpoint interval in |d|.
    #[arg(long, default_value_t = 250, value_parser = clap::value_parser!(u64).range(1..))]
    block: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Parity,
    Duality,
    Isotropy,
    Ramhv,
    Babo,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Shared,
    Scaled,
}

#[derive(Args)]
struct VerifyArgs {
    suite: SuiteArg,
    /// Curves to draw from (default: the built-in corpus).
    #[arg(long = "curve", allow_hyphen_values = true)]
    curves: Vec<String>,
    /// Random instances per suite
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Seed for instance generation
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Identification of twisted cocycles; `scaled` exists to be refuted.
    #[arg(long, value_enum, default_value_t = ConventionArg::Shared)]
    convention: ConventionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchKind {
    Inc2,
    PlusOne,
}

#[derive(Args)]
struct SearchArgs {
    kind: SearchKind,
    #[command(flatten)]
    curve: CurveArg,
    /// Candidate primes to examine.
    #[arg(long, default_value_t = DEFAULT_PRIME_BUDGET)]
    budget: u64,
    /// For `inc2`: apply the search this many times in succession.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    chain: u64,
}

#[derive(Args)]
struct BoundArgs {
    /// A `summary.json` written by `scan`.
    #[arg(long)]
    summary: PathBuf,
}

enum Failure {
    Usage(String),
    Verification(String),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SearchBudget { .. } | Error::SamplingBudget { .. } | Error::FactorBudget(_) => {
                Failure::Budget(e.to_string())
            }
            Error::Soundness(_) => Failure::Verification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("I/O error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(format!("malformed JSON: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn parse_curve(s: &str) -> Result<FullTwoTorsionModel, Failure> {
    let input: CurveInput = s.parse()?;
    Ok(input.full_two_torsion()?)
}

fn parse_mask(s: &str) -> Result<LocalSquareClass, Failure> {
    let (place, class) = s
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("mask {s:?} is not of the form place=class")))?;
    let place: Place = place.parse()?;
    if class == "sign" {
        return match place {
            Place::Infinite => Ok(LocalSquareClass::sign()),
            _ => Err(Failure::Usage("`sign` is only a class at inf".into())),
        };
    }
    let rep: BigInt = class
        .parse()
        .map_err(|_| Failure::Usage(format!("mask class {class:?} is not an integer")))?;
    if rep == BigInt::from(0) {
        return Err(Failure::Usage("mask class must be nonzero".into()));
    }
    Ok(local_class_int(&rep, place))
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

#[derive(Serialize)]
struct DescentRecord {
    #[serde(flatten)]
    record: twosel::selmer::SelmerRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    twist: Option<String>,
}

fn cmd_descent(args: DescentArgs) -> CmdResult {
    let mut model = parse_curve(&args.curve.curve)?;
    if let Some(d) = &args.twist {
        model = twist(&model, d)?;
    }
    let mut spec = SelmerSpec::new(model)
        .with_strict(args.strict)
        .with_relaxed(args.relaxed);
    for m in &args.masks {
        spec = spec.with_mask(parse_mask(m)?);
    }
    let result = selmer_group(&spec)?;
    let mut record = result.record();
    record.curve = args.curve.curve.clone();
    print_json(&DescentRecord {
        record,
        twist: args.twist.map(|d| d.to_string()),
    })
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let curves = if args.curves.is_empty() {
        suites::corpus()
    } else {
        args.curves.iter().map(|c| parse_curve(c)).collect::<Result<_, _>>()?
    };
    let convention = match args.convention {
        ConventionArg::Shared => Convention::Shared,
        ConventionArg::Scaled => Convention::ScaledByTwist,
    };
    let selected: Vec<Suite> = match args.suite {
        SuiteArg::Parity => vec![Suite::Parity],
        SuiteArg::Duality => vec![Suite::Duality],
        SuiteArg::Isotropy => vec![Suite::Isotropy],
        SuiteArg::Ramhv => vec![Suite::Ramhv],
        SuiteArg::Babo => vec![Suite::Babo],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let cfg = SuiteConfig::new(curves, args.trials, args.seed).with_convention(convention);
    let mut failed = Vec::new();
    for suite in selected {
        let report = suites::run(suite, &cfg)?;
        println!("{suite}: {}/{} passed", report.passed, report.trials);
        if let Some(c) = &report.certificate {
            println!("  counterexample: {c}");
        }
        if !report.ok() {
            failed.push(suite.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failing suites: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct Inc2Output {
    kind: &'static str,
    curve: String,
    q: u64,
    r_before: usize,
    r_after: usize,
    #[serde(with = "twosel::zarith::serde_int")]
    d: BigInt,
    steps: Vec<twist_lab::Inc2Witness>,
}

#[derive(Serialize)]
struct PlusOneOutput {
    kind: &'static str,
    curve: String,
    #[serde(flatten)]
    witness: twist_lab::PlusOneWitness,
}

fn cmd_search(args: SearchArgs) -> CmdResult {
    let model = parse_curve(&args.curve.curve)?;
    match args.kind {
        SearchKind::Inc2 => {
            let (steps, d) = twist_lab::chain_inc2(&model, args.chain as usize, args.budget)?;
            let (first, last) = (&steps[0], &steps[steps.len() - 1]);
            print_json(&Inc2Output {
                kind: "inc2",
                curve: args.curve.curve,
                q: first.q,
                r_before: first.r_before,
                r_after: last.r_after,
                d,
                steps,
            })
        }
        SearchKind::PlusOne => {
            let witness = twist_lab::find_plus_one(&model, args.budget)?;
            print_json(&PlusOneOutput {
                kind: "plus-one",
                curve: args.curve.curve,
                witness,
            })
        }
    }
}

#[derive(Serialize)]
struct BoundReport {
    curve: String,
    bound: u64,
    n: usize,
    two_n: usize,
    t_hat: Option<usize>,
    t_hat_ge_2: bool,
    t_hat_le_n_plus_1: bool,
    t_hat_le_n: bool,
}

fn cmd_bound(args: BoundArgs) -> CmdResult {
    let summary: ScanSummary = serde_json::from_str(&std::fs::read_to_string(&args.summary)?)?;
    let c = &summary.bound_checks;
    print_json(&BoundReport {
        curve: summary.curve.clone(),
        bound: summary.bound,
        n: summary.n,
        two_n: 2 * summary.n,
        t_hat: summary.t_hat,
        t_hat_ge_2: c.t_hat_ge_2,
        t_hat_le_n_plus_1: c.t_hat_le_n_plus_1,
        t_hat_le_n: c.t_hat_le_n,
    })?;
    if c.all() {
        Ok(())
    } else {
        Err(Failure::Verification("bound checks failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Descent(a) => cmd_descent(a),
        Command::Scan(a) => scan_io::cmd_scan(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Search(a) => cmd_search(a),
        Command::Bound(a) => cmd_bound(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("budget exhausted: {m}");
            ExitCode::from(3)
        }
    }
}
