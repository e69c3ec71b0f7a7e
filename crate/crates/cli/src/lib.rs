//! Command-line front end.
//!
//! [`run_cli`] parses arguments, runs one subcommand and writes machine output
//! (JSON, or CSV for `sweep`) to `stdout` and diagnostics to `stderr`. It
//! returns the process exit code: 0 on success, 1 when a problem or a
//! validation fails, 2 on usage errors, unreadable files and malformed input.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use filtrate::linalg::CMatrix;
use filtrate::verify::{random_sweep, run_checks};
use filtrate::{
    build_dilation, build_povm, parse_problem, run_simulation_chunked, solve, validate_povm,
    verify_dilation, Error, FilteringProblem,
};
use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::ser::Formatter;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "filtrate",
    version,
    about = "Optimal unambiguous filtering of a pure state"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a problem: S, thresholds, regime, failure probabilities.
    Analyze { problem: PathBuf },
    /// Construct and validate the optimal POVM.
    Povm { problem: PathBuf },
    /// Construct and verify the Neumark unitary.
    Neumark { problem: PathBuf },
    /// Monte Carlo simulation of the optimal measurement.
    Simulate(SimulateArgs),
    /// Run every consistency check on a problem, or on a random sweep.
    Verify(VerifyArgs),
    /// Branch values over a parameter grid, as CSV.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    problem: PathBuf,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chunks: u64,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["problem", "random"]))]
struct VerifyArgs {
    problem: Option<PathBuf>,
    /// Number of random problems to check instead of a file.
    #[arg(long, value_name = "K")]
    random: Option<u64>,
    #[arg(long, default_value_t = 0, requires = "random")]
    seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum SweepParameter {
    Eta1,
    OverlapScale,
}

impl SweepParameter {
    fn name(self) -> &'static str {
        match self {
            Self::Eta1 => "eta1",
            Self::OverlapScale => "overlap_scale",
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    problem: PathBuf,
    #[arg(long, value_enum)]
    parameter: SweepParameter,
    #[arg(long, allow_negative_numbers = true)]
    start: f64,
    #[arg(long, allow_negative_numbers = true)]
    stop: f64,
    #[arg(long)]
    steps: usize,
}

/// A grid over one problem parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn new(
        parameter: SweepParameter,
        start: f64,
        stop: f64,
        steps: usize,
    ) -> Result<Self, String> {
        if steps < 2 {
            return Err(format!("steps must be at least 2, got {steps}"));
        }
        if start.is_nan() || stop.is_nan() || start >= stop {
            return Err(format!("start ({start}) must be below stop ({stop})"));
        }
        let in_range = match parameter {
            SweepParameter::Eta1 => start > 0.0 && stop < 1.0,
            SweepParameter::OverlapScale => start >= 0.0 && stop <= 1.0,
        };
        if !in_range {
            let allowed = match parameter {
                SweepParameter::Eta1 => "(0, 1)",
                SweepParameter::OverlapScale => "[0, 1]",
            };
            return Err(format!("{} range must lie in {allowed}", parameter.name()));
        }
        Ok(Self {
            parameter,
            start,
            stop,
            steps,
        })
    }

    /// Grid points, endpoints included.
    pub fn points(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * k as f64 / last
                }
            })
            .collect()
    }
}

/// Floats as 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct RoundTrip;

impl Formatter for RoundTrip {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as one line of JSON with round-trip floats.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTrip);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn matrix_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

enum Failure {
    Usage(String),
    Problem(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Malformed(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Problem(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<FilteringProblem, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Failure::Usage(format!("file not found: {}", path.display())),
        _ => Failure::Usage(format!("cannot read {}: {e}", path.display())),
    })?;
    let problem = parse_problem(&text)?;
    debug!(
        "loaded {}: {} states in dimension {}",
        path.display(),
        problem.len(),
        problem.dim()
    );
    Ok(problem)
}

/// Machine output plus whether every validation it carries passed.
struct Output {
    text: String,
    passed: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }
}

#[derive(Serialize)]
struct PovmOutput<'a> {
    construction: filtrate::povm::Construction,
    c1: f64,
    c2: f64,
    pi_alpha: Vec<Vec<[f64; 2]>>,
    pi_beta: Vec<Vec<[f64; 2]>>,
    pi_failure: Vec<Vec<[f64; 2]>>,
    report: &'a filtrate::PovmReport,
}

#[derive(Serialize)]
struct NeumarkOutput<'a> {
    system_dim: usize,
    padded_dim: usize,
    ancilla_dim: usize,
    chi: &'a [f64],
    u: Vec<Vec<[f64; 2]>>,
    report: &'a filtrate::DilationReport,
}

fn analyze(path: &Path) -> Result<Output, Failure> {
    let problem = load(path)?;
    let solution = solve(&problem)?;
    info!("regime {}, q_opt {}", solution.regime, solution.q_opt);
    Ok(Output::ok(to_json(&solution)))
}

fn povm(path: &Path) -> Result<Output, Failure> {
    let problem = load(path)?;
    let solution = solve(&problem)?;
    let povm = build_povm(&problem, &solution)?;
    let report = validate_povm(&povm, &problem, &solution);
    info!("POVM {}", if report.passed { "valid" } else { "INVALID" });
    let out = PovmOutput {
        construction: povm.construction,
        c1: povm.c1,
        c2: povm.c2,
        pi_alpha: matrix_json(&povm.pi1),
        pi_beta: matrix_json(&povm.pi2),
        pi_failure: matrix_json(&povm.pi0),
        report: &report,
    };
    Ok(Output {
        text: to_json(&out),
        passed: report.passed,
    })
}

fn neumark(path: &Path) -> Result<Output, Failure> {
    let problem = load(path)?;
    let solution = solve(&problem)?;
    let povm = build_povm(&problem, &solution)?;
    let dilation = build_dilation(&problem, &solution)?;
    let report = verify_dilation(&dilation, &problem, &povm);
    info!(
        "dilation on {}x{} (padded: {})",
        dilation.padded_dim,
        dilation.ancilla_dim,
        dilation.padded()
    );
    let out = NeumarkOutput {
        system_dim: dilation.system_dim,
        padded_dim: dilation.padded_dim,
        ancilla_dim: dilation.ancilla_dim,
        chi: &dilation.chi,
        u: matrix_json(&dilation.u),
        report: &report,
    };
    Ok(Output {
        text: to_json(&out),
        passed: report.passed,
    })
}

fn simulate(args: &SimulateArgs) -> Result<Output, Failure> {
    let problem = load(&args.problem)?;
    let solution = solve(&problem)?;
    let povm = build_povm(&problem, &solution)?;
    let report = run_simulation_chunked(&problem, &povm, args.trials, args.seed, args.chunks)?;
    info!(
        "empirical q {} vs expected {} ({} trials)",
        report.empirical_q, report.expected_q, report.trials
    );
    Ok(Output::ok(to_json(&report)))
}

fn verify(args: &VerifyArgs) -> Result<Output, Failure> {
    if let Some(count) = args.random {
        let report = random_sweep(count, args.seed)?;
        info!(
            "{} of {} problems passed",
            count - report.failures.len() as u64,
            count
        );
        return Ok(Output {
            text: to_json(&report),
            passed: report.passed,
        });
    }
    let path = args.problem.as_deref().expect("clap enforces an input");
    let report = run_checks(&load(path)?)?;
    for check in report.checks.iter().filter(|c| !c.passed) {
        info!(
            "check {} failed: {} > {}",
            check.name, check.value, check.tolerance
        );
    }
    Ok(Output {
        text: to_json(&report),
        passed: report.passed,
    })
}

fn sweep(args: &SweepArgs) -> Result<Output, Failure> {
    let spec = SweepSpec::new(args.parameter, args.start, args.stop, args.steps)
        .map_err(Failure::Usage)?;
    let problem = load(&args.problem)?;
    let rows = spec
        .points()
        .into_par_iter()
        .map(|x| {
            let point = match spec.parameter {
                SweepParameter::Eta1 => problem.with_eta_alpha(x),
                SweepParameter::OverlapScale => problem.scale_overlaps(x),
            }?;
            let s = solve(&point)?;
            Ok(format!(
                "{},{},{},{},{},{}",
                format_float(x),
                s.regime,
                format_float(s.q_povm),
                format_float(s.q_alpha_strategy),
                format_float(s.q_beta_strategy),
                format_float(s.q_opt)
            ))
        })
        .collect::<Result<Vec<String>, Error>>()?;
    let mut text = format!(
        "{},regime,q_povm,q_alpha_strategy,q_beta_strategy,q_opt",
        spec.parameter.name()
    );
    for row in rows {
        text.push('\n');
        text.push_str(&row);
    }
    Ok(Output::ok(text))
}

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze { problem } => analyze(problem),
        Command::Povm { problem } => povm(problem),
        Command::Neumark { problem } => neumark(problem),
        Command::Simulate(args) => simulate(args),
        Command::Verify(args) => verify(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(out) => {
            let _ = writeln!(stdout, "{}", out.text);
            if out.passed {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "error: validation failed");
                EXIT_FAILED
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Problem(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_FAILED
        }
    }
}

/// Configures stderr logging from `FILTRATE_LOG` (`quiet`, `info` or `debug`; unset means quiet).
pub fn init_logging() {
    let level = match std::env::var("FILTRATE_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}
