//! `dtcbf`: verify a candidate discrete-time control barrier function.
//!
//! Exit codes: 0 valid, 1 counterexample, 2 inconclusive, 64 usage or
//! malformed input, 65 invalid problem, 66 unreadable input, 74 output error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dtcbf::branching::BranchRule;
use dtcbf::io::{ProblemFile, VerdictFile};
use dtcbf::verifier::{
    baseline, verify_with, Case, Event, Mode, Selection, Verdict, Verification, VerifierConfig,
};
use dtcbf::{Expr, ProblemError};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NO_INPUT: u8 = 66;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(
    name = "dtcbf",
    version,
    about = "Certifying verifier for discrete-time control barrier functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the branch-and-bound verifier.
    Verify(VerifyArgs),
    /// Print the dynamics generated by the `discretize` block.
    Discretize { problem: PathBuf },
    /// Minimize the closed-loop constraint over {h >= 0} without certification.
    Baseline {
        problem: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps_c: f64,
        #[arg(long, default_value_t = 1e-12)]
        eps_feas: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Known,
    Unknown,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    DepthFirst,
    BestFirst,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    ScaledLongestSide,
    LongestSide,
}

#[derive(clap::Args)]
struct VerifyArgs {
    problem: PathBuf,
    /// Start from the config echoed in a verdict file (or a bare config).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps_f: Option<f64>,
    #[arg(long)]
    eps_h: Option<f64>,
    #[arg(long)]
    eps_d: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    select: Option<SelectArg>,
    #[arg(long, value_enum)]
    branch: Option<BranchArg>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Verdict file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leaf subdomains as CSV.
    #[arg(long)]
    dump_subdomains: Option<PathBuf>,
    /// Policy entries as CSV (unknown mode).
    #[arg(long)]
    dump_policy: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LogLevel {
    Quiet,
    Info,
    Trace,
}

fn log_level() -> LogLevel {
    match std::env::var("DTCBF_LOG").as_deref() {
        Ok("quiet") => LogLevel::Quiet,
        Ok("trace") => LogLevel::Trace,
        _ => LogLevel::Info,
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Verify(args) => cmd_verify(&args),
        Command::Discretize { problem } => cmd_discretize(&problem),
        Command::Baseline {
            problem,
            eps_c,
            eps_feas,
        } => cmd_baseline(&problem, eps_c, eps_feas),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_problem(path: &Path) -> Result<ProblemFile, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_NO_INPUT, format!("{}: {e}", path.display())))?;
    ProblemFile::from_json(&text)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn problem_failure(path: &Path, e: ProblemError) -> Failure {
    let code = match e {
        ProblemError::Parse { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    };
    Failure::new(code, format!("{}: {e}", path.display()))
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn build_config(args: &VerifyArgs) -> Result<VerifierConfig, Failure> {
    let mut config = match &args.config {
        None => VerifierConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(EXIT_NO_INPUT, format!("{}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner)
                .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?
        }
    };
    if let Some(v) = args.eps_f {
        config.eps_f = v;
    }
    if let Some(v) = args.eps_h {
        config.eps_h = v;
    }
    if let Some(v) = args.eps_d {
        config.eps_d = v;
    }
    if let Some(m) = args.mode {
        config.mode = match m {
            ModeArg::Known => Mode::Known,
            ModeArg::Unknown => Mode::Unknown,
            ModeArg::Auto => Mode::Auto,
        };
    }
    if let Some(s) = args.select {
        config.selection = match s {
            SelectArg::DepthFirst => Selection::DepthFirst,
            SelectArg::BestFirst => Selection::BestFirst,
        };
    }
    if let Some(b) = args.branch {
        config.branch = match b {
            BranchArg::ScaledLongestSide => BranchRule::ScaledLongestSide,
            BranchArg::LongestSide => BranchRule::LongestSide,
        };
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(Failure::new(EXIT_USAGE, "--workers must be at least 1"));
        }
        config.workers = w;
    }
    if args.deterministic {
        config.deterministic = true;
    }
    if let Some(n) = args.max_iters {
        config.max_iters = n;
    }
    Ok(config)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let config = build_config(args)?;
    let file = read_problem(&args.problem)?;
    let mut problem = file
        .to_problem()
        .map_err(|e| problem_failure(&args.problem, e))?;
    if config.mode == Mode::Unknown {
        problem.pi = None;
    }
    let level = log_level();
    let mut on_event = |e: Event| {
        if level >= LogLevel::Trace {
            eprintln!(
                "subdomain {} case {} bound {}",
                e.id,
                e.case.label(),
                e.bound
            );
        }
    };
    let run = verify_with(&problem, &config, &mut on_event)
        .map_err(|e| problem_failure(&args.problem, e))?;

    if let Some(path) = &args.dump_subdomains {
        write_subdomains(path, &run, problem.n)?;
    }
    let policy_path = match (&args.dump_policy, &run.verdict) {
        (
            Some(path),
            Verdict::Valid {
                policy: Some(policy),
            },
        ) => {
            write_policy(path, policy, problem.n, problem.m)?;
            Some(path.display().to_string())
        }
        _ => None,
    };
    let verdict = VerdictFile::new(&run, &config, policy_path.as_deref());
    let json = serde_json::to_string_pretty(&verdict).expect("verdict serializes");
    match &args.out {
        Some(path) => write_output(path, &(json + "\n"))?,
        None => println!("{json}"),
    }
    if level >= LogLevel::Info {
        let leaves = run.stats.leaves;
        eprintln!(
            "{}: {} iterations, leaves A={} B={} C1={} terminal={} pending={}, {:.3} s on {} worker(s)",
            run.verdict.label(),
            run.stats.iterations,
            leaves.a,
            leaves.b,
            leaves.c1,
            leaves.terminal,
            leaves.pending,
            run.stats.wall_time.as_secs_f64(),
            run.stats.workers
        );
        if let Verdict::Counterexample { point, report, .. } = &run.verdict {
            eprintln!("counterexample {point:?}: {}", report.reason);
        }
    }
    Ok(match run.verdict {
        Verdict::Valid { .. } => 0,
        Verdict::Counterexample { .. } => 1,
        Verdict::Inconclusive { .. } => 2,
    })
}

fn box_header(n: usize) -> Vec<String> {
    (1..=n)
        .flat_map(|i| [format!("x{i}_lb"), format!("x{i}_ub")])
        .collect()
}

fn box_fields(domain: &dtcbf::BoxDomain) -> Vec<String> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .flat_map(|(l, u)| [l.to_string(), u.to_string()])
        .collect()
}

fn csv_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Leaf subdomains only, so the rows tile the state box.
fn write_subdomains(path: &Path, run: &Verification, n: usize) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_failure(path, e))?;
    let mut header = vec!["id".to_string(), "parent".into(), "case".into()];
    header.extend(box_header(n));
    header.push("bound".into());
    w.write_record(&header).map_err(|e| csv_failure(path, e))?;
    for r in run.leaves() {
        let case = match r.case {
            // never processed; still undecided, like a split box
            Case::Pending => Case::C2,
            c => c,
        };
        let mut row = vec![
            r.id.to_string(),
            r.parent.map_or(String::new(), |p| p.to_string()),
            case.label().to_string(),
        ];
        row.extend(box_fields(&r.domain));
        row.push(r.bound.to_string());
        w.write_record(&row).map_err(|e| csv_failure(path, e))?;
    }
    w.flush().map_err(|e| csv_failure(path, e))
}

fn write_policy(
    path: &Path,
    policy: &dtcbf::PiecewisePolicy,
    n: usize,
    m: usize,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_failure(path, e))?;
    let mut header = vec!["id".to_string()];
    header.extend(box_header(n));
    header.extend((1..=m).map(|j| format!("u{j}")));
    w.write_record(&header).map_err(|e| csv_failure(path, e))?;
    for entry in policy.entries() {
        let mut row = vec![entry.id.to_string()];
        row.extend(box_fields(&entry.domain));
        row.extend(entry.input.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| csv_failure(path, e))?;
    }
    w.flush().map_err(|e| csv_failure(path, e))
}

fn cmd_discretize(path: &Path) -> Result<u8, Failure> {
    let file = read_problem(path)?;
    let d = file
        .discretized()
        .map_err(|e| problem_failure(path, e))?
        .ok_or_else(|| {
            Failure::new(
                EXIT_DATA,
                format!("{}: no `discretize` block", path.display()),
            )
        })?;
    let names = dtcbf::expr::state_input_names(file.n, file.m);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let f: Vec<Expr> = d.expressions();
    for (i, fi) in f.iter().enumerate() {
        writeln!(out, "f{} = {}", i + 1, fi.display(&names))
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    }
    writeln!(out, "Ad = {}", d.a_d).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    writeln!(out, "Bd = {}", d.b_d).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    Ok(0)
}

fn cmd_baseline(path: &Path, eps_c: f64, eps_feas: f64) -> Result<u8, Failure> {
    let file = read_problem(path)?;
    let problem = file.to_problem().map_err(|e| problem_failure(path, e))?;
    if problem.pi.is_none() {
        return Err(Failure::new(
            EXIT_DATA,
            format!("{}: the baseline needs `pi`", path.display()),
        ));
    }
    let report = baseline(&problem, eps_c, eps_feas).map_err(|e| match e {
        dtcbf::verifier::BaselineError::Problem(p) => problem_failure(path, p),
        other => Failure::new(2, other.to_string()),
    })?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    if report.outside_safe_set() {
        json["note"] = serde_json::Value::String(format!(
            "h(x*) = {:e} < 0: the minimizer is only eps-feasible and lies outside the safe set, so its value neither proves nor refutes the barrier",
            report.barrier
        ));
    }
    println!("{}", serde_json::to_string_pretty(&json).expect("json"));
    Ok(0)
}
