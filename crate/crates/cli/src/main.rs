//! `entmeter`: entanglement measures of states and channels from the command line.
//!
//! Exit codes: 0 success or membership, 1 input error, 2 solver failure,
//! 3 non-membership (for `check`) or failed properties (for `verify`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use entmeter::channel_measures::{
    kappa_entanglement_channel, log_negativity_channel, max_rains_channel, min_rains_channel_lower,
};
use entmeter::channels::{BipartiteChannel, PointToPointChannel, B, R};
use entmeter::divergences::{max_relative_entropy, sandwiched_renyi, DivergenceValue};
use entmeter::format::{read_channel, read_operator, read_state};
use entmeter::harness::{run_suite, Measure, Suite, SuiteConfig, SuiteReport};
use entmeter::operators::{HermitianOperator, SystemLayout};
use entmeter::sdp::SolverOptions;
use entmeter::state_measures::{
    is_ppt, is_ppt_prime, kappa_entanglement_state, log_negativity_state, max_rains_state, min_rains_state,
    one_shot_exact_distillable, MeasureOptions, MeasureReport,
};
use entmeter::Error;

const INPUT_ERROR: u8 = 1;
const SOLVER_FAILURE: u8 = 2;
const NOT_MEMBER: u8 = 3;

#[derive(Parser)]
#[command(name = "entmeter", version, about = "Entanglement measures of bipartite states and channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Output {
    Table,
    Json,
}

#[derive(clap::Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    feas_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Eigenvalue cutoff for support projectors.
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,
}

impl SolverArgs {
    fn options(&self) -> Result<MeasureOptions, Error> {
        let solver = SolverOptions { gap_tol: self.gap_tol, feas_tol: self.feas_tol, max_iter: self.max_iter };
        solver.validate()?;
        if !(self.rank_tol > 0.0) {
            return Err(Error::InvalidArgument("rank tolerance must be positive".into()));
        }
        Ok(MeasureOptions { solver, rank_tol: self.rank_tol })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MeasureName {
    EnState,
    EnChannel,
    RmaxState,
    RmaxChannel,
    KappaState,
    KappaChannel,
    EminState,
    W0State,
    EminChannelLb,
    Dmax,
    Renyi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Ppt,
    PptPrime,
    Cpptp,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a measure of the state or channel in INPUT.
    Measure {
        measure: MeasureName,
        input: PathBuf,
        /// Second argument of `dmax` and `renyi`.
        #[arg(long)]
        sigma: Option<PathBuf>,
        /// Order of `renyi`.
        #[arg(long)]
        alpha: Option<f64>,
        /// Random inputs tried by `emin-channel-lb`.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Local-search rounds of `emin-channel-lb`.
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Output::Table)]
        output: Output,
    },
    /// Test membership of INPUT in PPT, PPT′ or C-PPT-P.
    Check {
        kind: CheckKind,
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run a randomized property suite.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1e-5)]
        slack: f64,
        /// Cap on sampled system dimensions.
        #[arg(long, default_value_t = 2)]
        dims: usize,
        /// Comma-separated subset of en, rmax, kappa, emin, w0.
        #[arg(long, value_delimiter = ',')]
        measures: Option<Vec<String>>,
        /// Where to write the JSON-lines report; defaults to `<suite>-report.jsonl`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Output::Table)]
        output: Output,
    },
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Solver { .. }) { SOLVER_FAILURE } else { INPUT_ERROR };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: INPUT_ERROR, message: message.into() }
}

fn with_path<T>(path: &Path, r: Result<T, Error>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(INPUT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("entmeter: {}", f.message);
        return ExitCode::from(f.code);
    }
    let result = match cli.command {
        Command::Measure { measure, input, sigma, alpha, samples, restarts, seed, solver, output } => {
            let args = MeasureArgs { sigma, alpha, samples, restarts, seed };
            cmd_measure(measure, &input, &args, &solver, output)
        }
        Command::Check { kind, input, tol } => cmd_check(kind, &input, tol),
        Command::Verify { suite, seed, trials, slack, dims, measures, report, solver, output } => {
            cmd_verify(&suite, seed, trials, slack, dims, measures, report, &solver, output)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("entmeter: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Caps the rayon pool at `ENTMETER_THREADS` when set.
fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("ENTMETER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| input_error(format!("ENTMETER_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| input_error(e.to_string()))
}

struct MeasureArgs {
    sigma: Option<PathBuf>,
    alpha: Option<f64>,
    samples: usize,
    restarts: usize,
    seed: u64,
}

/// A point-to-point channel stored as a bipartite file with inputs `(d, 1)`
/// and outputs `(1, d′)`.
fn point_to_point(ch: &BipartiteChannel) -> Result<PointToPointChannel, Error> {
    let (ia, ib) = ch.in_dims();
    let (oa, ob) = ch.out_dims();
    if ib != 1 || oa != 1 {
        return Err(Error::DimensionMismatch(format!(
            "a point-to-point channel needs in = (d, 1) and out = (1, d′), got {:?} → {:?}",
            (ia, ib),
            (oa, ob)
        )));
    }
    let layout = SystemLayout::bipartite(R, ia, B, ob)?;
    PointToPointChannel::from_choi(HermitianOperator::new(layout, ch.choi().matrix().clone())?, ia, ob)
}

fn cmd_measure(
    measure: MeasureName,
    input: &Path,
    args: &MeasureArgs,
    solver: &SolverArgs,
    output: Output,
) -> Result<u8, Failure> {
    let opts = solver.options()?;
    let state = || with_path(input, read_state(input));
    let channel = || with_path(input, read_channel(input));
    let report = match measure {
        MeasureName::EnState => log_negativity_state(&state()?, &opts)?,
        MeasureName::RmaxState => max_rains_state(&state()?, &opts)?,
        MeasureName::KappaState => kappa_entanglement_state(&state()?, &opts)?,
        MeasureName::EminState => min_rains_state(&state()?, &opts)?,
        MeasureName::W0State => one_shot_exact_distillable(&state()?, &opts)?,
        MeasureName::EnChannel => log_negativity_channel(&channel()?, &opts)?,
        MeasureName::RmaxChannel => max_rains_channel(&channel()?, &opts)?,
        MeasureName::KappaChannel => kappa_entanglement_channel(&channel()?, &opts)?,
        MeasureName::EminChannelLb => {
            let m = with_path(input, point_to_point(&channel()?))?;
            min_rains_channel_lower(&m, args.samples, args.restarts, args.seed, &opts)?
        }
        MeasureName::Dmax | MeasureName::Renyi => {
            let rho = state()?;
            let path = args.sigma.as_deref().ok_or_else(|| input_error("`--sigma <file>` is required"))?;
            let sigma = with_path(path, read_operator(path))?;
            let (name, v) = if measure == MeasureName::Dmax {
                ("dmax", max_relative_entropy(&rho, &sigma)?)
            } else {
                let alpha = args.alpha.ok_or_else(|| input_error("`--alpha <order>` is required"))?;
                ("renyi", sandwiched_renyi(&rho, &sigma, alpha)?)
            };
            print_divergence(name, args.alpha, v, output);
            return Ok(0);
        }
    };
    print_report(&report, output);
    Ok(0)
}

fn print_report(r: &MeasureReport, output: Output) {
    match output {
        Output::Json => println!("{}", serde_json::to_string_pretty(r).expect("report serializes")),
        Output::Table => {
            println!("{:<12}{}", "measure", r.measure);
            println!("{:<12}{:.6}{}", "value", r.value, if r.lower_bound { " (lower bound)" } else { "" });
            println!("{:<12}{:.6}", "primal", r.primal_value);
            println!("{:<12}{:.6}", "dual", r.dual_value);
            println!("{:<12}{:.3e}", "gap", r.gap);
            println!("{:<12}{}", "status", serde_json::to_value(r.status).expect("status").as_str().unwrap_or("?"));
            println!("{:<12}{}", "iterations", r.iterations);
            if let Some(rank) = r.rank {
                println!("{:<12}{}", "rank", rank);
            }
        }
    }
}

fn print_divergence(name: &str, alpha: Option<f64>, v: DivergenceValue, output: Output) {
    match output {
        Output::Json => {
            let value = if v.value.is_finite() { json!(v.value) } else { json!("inf") };
            let out = json!({ "measure": name, "alpha": alpha, "value": value, "support_violation": v.support_violation });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        }
        Output::Table => {
            println!("{:<12}{}", "measure", name);
            if let Some(a) = alpha {
                println!("{:<12}{}", "alpha", a);
            }
            if v.value.is_finite() {
                println!("{:<12}{:.6}", "value", v.value);
            } else {
                println!("{:<12}inf", "value");
            }
            println!("{:<12}{}", "support", if v.support_violation { "violated" } else { "ok" });
        }
    }
}

fn cmd_check(kind: CheckKind, input: &Path, tol: f64) -> Result<u8, Failure> {
    if !(tol >= 0.0) {
        return Err(input_error("tolerance must be nonnegative"));
    }
    let (member, detail) = match kind {
        CheckKind::Ppt => {
            let op = with_path(input, read_operator(input))?;
            (is_ppt(&op, tol), format!("min eigenvalue of T_B: {:.6e}", op.pt_b().min_eigenvalue()))
        }
        CheckKind::PptPrime => {
            let op = with_path(input, read_operator(input))?;
            let detail = format!(
                "min eigenvalue: {:.6e}, ‖T_B‖₁: {:.6}",
                op.min_eigenvalue(),
                op.pt_b().trace_norm()
            );
            (is_ppt_prime(&op, tol), detail)
        }
        CheckKind::Cpptp => {
            let ch = with_path(input, read_channel(input))?;
            (ch.is_cpptp(tol), format!("min eigenvalue of T_B(J): {:.6e}", ch.cpptp_min_eigenvalue()))
        }
    };
    println!("{}", if member { "member" } else { "not a member" });
    println!("{detail}");
    Ok(if member { 0 } else { NOT_MEMBER })
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    suite: &str,
    seed: u64,
    trials: usize,
    slack: f64,
    dims: usize,
    measures: Option<Vec<String>>,
    report_path: Option<PathBuf>,
    solver: &SolverArgs,
    output: Output,
) -> Result<u8, Failure> {
    let suite: Suite = suite.parse()?;
    let measures = match measures {
        Some(names) => names.iter().map(|m| m.trim().parse::<Measure>()).collect::<Result<Vec<_>, _>>()?,
        None => Measure::ALL.to_vec(),
    };
    let cfg = SuiteConfig {
        suite,
        seed,
        trials,
        dims,
        slack,
        measures,
        options: solver.options()?,
        inject_violation: false,
    };
    let report = run_suite(&cfg)?;
    let path = report_path.unwrap_or_else(|| PathBuf::from(format!("{}-report.jsonl", suite.name())));
    with_path(&path, report.write_json_lines(&path))?;
    match output {
        Output::Json => print!("{}", report.to_json_lines()),
        Output::Table => print_suite(&report),
    }
    eprintln!("report written to {}", path.display());
    Ok(if report.passed() { 0 } else { NOT_MEMBER })
}

fn print_suite(r: &SuiteReport) {
    println!("{:<18}{:<36}{:>7}{:>9}{:>8}{:>14}", "suite", "property", "trials", "failures", "solver", "worst slack");
    for p in &r.properties {
        let worst = p.worst_slack.map_or_else(|| "-".to_string(), |w| format!("{w:.3e}"));
        println!(
            "{:<18}{:<36}{:>7}{:>9}{:>8}{:>14}",
            p.suite.name(),
            p.property,
            p.trials,
            p.failures,
            p.solver_failures,
            worst
        );
    }
    println!(
        "{} properties, {} failures, {} solver failures (seed {}, {} trials, slack {:e})",
        r.properties.len(),
        r.failures(),
        r.solver_failures(),
        r.seed,
        r.trials,
        r.slack
    );
}
