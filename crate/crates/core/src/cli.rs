//! Command-line front end.
//!
//! [`run`] takes the argument list and output streams explicitly so the
//! binary and the integration tests share one code path. Exit codes: 0
//! success, 1 runtime or verification failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    classify, ClassifyOptions, HistorySource, SimOptions, CSV_HEADER, DEFAULT_GRID_SIZE,
};
use crate::model::{GrowthModel, ModelError};
use crate::numfmt::fmt_sig;
use crate::simulate::{detect_convergence, detect_oscillation, iterate, tail_stats};
use crate::sweep::{run_sweep, SweepConfig};
use crate::{plot, verify};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

const HISTORY_HELP: &str = "Initial history A[-m],...,A[0], comma-separated, oldest first \
(exactly m+1 positive values)";

const CSV_HELP: &str = "\
CSV columns (analyze --out and sweep):
  family,alpha,beta,r,lambda,m,x_bar,graef_ok,liz_ok,thm3_paper,thm3_numeric,
  L_paper,L_hat,q,converged,liminf_est,limsup_est,in_envelope,skipped
Absent values are empty, booleans are true/false, reals carry 9 significant
digits. q is the contraction factor of L_hat when the 3/2-condition holds for
it, otherwise that of the closed-form L.

Trace CSV (simulate): n,A_n,log_A_n starting at n = -m, 17 significant digits.";

#[derive(Debug, Parser)]
#[command(
    name = "delaypop",
    version,
    about = "Simulate A[n+1] = A[n] F(A[n-m]) and check its persistence and stability criteria",
    after_help = CSV_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the recurrence and write the trace.
    Simulate(SimulateArgs),
    /// Evaluate every criterion for one model and delay.
    Analyze(AnalyzeArgs),
    /// Run a parameter-grid study from a JSON configuration.
    Sweep(SweepArgs),
    /// Run the built-in property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Bobwhite,
    Pielou,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Growth-function family.
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Bobwhite offset alpha in (0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bobwhite amplitude or Pielou growth rate.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bobwhite exponent r > 0.
    #[arg(long)]
    pub r: Option<f64>,
    /// Pielou crowding coefficient lambda > 0.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Delay m >= 0.
    #[arg(long)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, help = HISTORY_HELP, value_delimiter = ',', required = true)]
    pub history: Vec<f64>,
    /// Number of steps N.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    /// Steps discarded before tail statistics (default N/2).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Log-distance tolerance for the convergence verdict.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Trace CSV path; stdout when absent (the summary then goes to stderr).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG chart path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Plot ln A instead of A.
    #[arg(long, requires = "plot")]
    pub log_y: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Intervals of the log-Lipschitz estimator grid (>= 1000).
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, help = HISTORY_HELP, value_delimiter = ',', conflicts_with = "no_sim")]
    pub history: Option<Vec<f64>>,
    /// Simulation steps.
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    /// Steps discarded before tail statistics (default N/2).
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seed for the default random histories.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the simulation evidence.
    #[arg(long)]
    pub no_sim: bool,
    /// Write the CSV row (with header) to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of suites.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(sub: &str, kind: ErrorKind, message: impl std::fmt::Display) -> Failure {
    let mut cmd = Cli::command();
    cmd.build();
    let err = match cmd.find_subcommand_mut(sub) {
        Some(sc) => sc.error(kind, message),
        None => cmd.error(kind, message),
    };
    Failure {
        code: EXIT_USAGE,
        message: err.render().to_string(),
    }
}

fn runtime(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: format!("error: {message}\n"),
    }
}

fn io_failure(path: &std::path::Path, err: std::io::Error) -> Failure {
    runtime(format!("{}: {err}", path.display()))
}

type Flags<'a> = &'a [(&'a str, Option<f64>)];

impl ModelArgs {
    fn build(&self, sub: &str) -> Result<GrowthModel, Failure> {
        let (name, allowed, forbidden): (&str, Flags, Flags) = match self.model {
            ModelKind::Bobwhite => (
                "bobwhite",
                &[("alpha", self.alpha), ("beta", self.beta), ("r", self.r)],
                &[("lambda", self.lambda)],
            ),
            ModelKind::Pielou => (
                "pielou",
                &[("beta", self.beta), ("lambda", self.lambda)],
                &[("alpha", self.alpha), ("r", self.r)],
            ),
        };
        if let Some((flag, _)) = forbidden.iter().find(|(_, v)| v.is_some()) {
            return Err(usage(
                sub,
                ErrorKind::ArgumentConflict,
                format!("--{flag} conflicts with --model {name}"),
            ));
        }
        if let Some((flag, _)) = allowed.iter().find(|(_, v)| v.is_none()) {
            return Err(usage(
                sub,
                ErrorKind::MissingRequiredArgument,
                format!("--model {name} requires --{flag}"),
            ));
        }
        let built = match self.model {
            ModelKind::Bobwhite => GrowthModel::bobwhite(
                self.alpha.unwrap_or_default(),
                self.beta.unwrap_or_default(),
                self.r.unwrap_or_default(),
            ),
            ModelKind::Pielou => GrowthModel::pielou(
                self.beta.unwrap_or_default(),
                self.lambda.unwrap_or_default(),
            ),
        };
        built.map_err(|e: ModelError| usage(sub, ErrorKind::ValueValidation, e))
    }
}

fn check_history(sub: &str, history: &[f64], m: usize) -> Result<(), Failure> {
    if history.len() != m + 1 {
        return Err(usage(
            sub,
            ErrorKind::ValueValidation,
            format!(
                "--history needs m + 1 = {} values, got {}",
                m + 1,
                history.len()
            ),
        ));
    }
    if let Some(v) = history.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(usage(
            sub,
            ErrorKind::ValueValidation,
            format!("--history value {v} is not positive"),
        ));
    }
    Ok(())
}

fn write_file(path: &std::path::Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let text = err.render().to_string();
            return if err.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, stdout, stderr),
        Command::Analyze(a) => cmd_analyze(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout, stderr),
        Command::Verify(a) => cmd_verify(&a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = stderr.write_all(f.message.as_bytes());
            f.code
        }
    }
}

fn cmd_simulate(
    a: &SimulateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, Failure> {
    let model = a.model.build("simulate")?;
    let m = a.model.m;
    check_history("simulate", &a.history, m)?;
    if a.steps == 0 {
        return Err(usage(
            "simulate",
            ErrorKind::ValueValidation,
            "--steps must be at least 1",
        ));
    }
    let trace = iterate(&model, m, &a.history, a.steps).map_err(runtime)?;

    let mut csv = Vec::new();
    trace.write_csv(&mut csv).map_err(runtime)?;
    let summary: &mut dyn Write = match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            stdout
        }
        None => {
            stdout.write_all(&csv).map_err(runtime)?;
            stderr
        }
    };
    if let Some(path) = &a.plot {
        write_file(
            path,
            plot::render_svg(&trace, model.x_bar(), a.log_y).as_bytes(),
        )?;
    }

    let d = 9;
    let mut lines = vec![
        format!("model={model}"),
        format!("m={m}"),
        format!("x_bar={}", fmt_sig(model.x_bar(), d)),
        format!("steps={}", trace.steps()),
        format!("last_value={}", fmt_sig(trace.last_value(), d)),
    ];
    if let Some(div) = trace.divergence() {
        lines.push(format!("divergent_at={}", div.step));
        let _ = writeln!(summary, "{}", lines.join("\n"));
        return Err(runtime(format!(
            "orbit diverged at step {} (|ln A| exceeded 700)",
            div.step
        )));
    }
    let burn_in = a.burn_in.unwrap_or(a.steps / 2);
    match tail_stats(&trace, burn_in) {
        Ok(t) => lines.extend([
            format!("burn_in={}", t.burn_in),
            format!("tail_min={}", fmt_sig(t.tail_min, d)),
            format!("tail_max={}", fmt_sig(t.tail_max, d)),
            format!("liminf_est={}", fmt_sig(t.liminf_est, d)),
            format!("limsup_est={}", fmt_sig(t.limsup_est, d)),
        ]),
        Err(e) => lines.push(format!("tail_stats=unavailable ({e})")),
    }
    let window = trace.steps().min(100);
    if let Ok(v) = detect_convergence(&trace, model.x_bar(), a.tol, window) {
        lines.push(format!("converged={}", v.converged));
        lines.push(format!("achieved_tol={}", fmt_sig(v.achieved_tolerance, d)));
    }
    lines.push(format!(
        "upward_crossings={}",
        detect_oscillation(&trace, model.x_bar()).crossings.len()
    ));
    writeln!(summary, "{}", lines.join("\n")).map_err(runtime)?;
    Ok(EXIT_OK)
}

fn cmd_analyze(a: &AnalyzeArgs, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let model = a.model.build("analyze")?;
    let m = a.model.m;
    let simulation = if a.no_sim {
        None
    } else {
        let histories = match &a.history {
            Some(h) => {
                check_history("analyze", h, m)?;
                HistorySource::Explicit(vec![h.clone()])
            }
            None => HistorySource::Random {
                count: 3,
                seed: a.seed,
            },
        };
        let burn_in = a.burn_in.unwrap_or(a.steps / 2);
        if a.steps == 0 || burn_in >= a.steps {
            return Err(usage(
                "analyze",
                ErrorKind::ValueValidation,
                "--burn-in must be below --steps",
            ));
        }
        Some(SimOptions {
            n_steps: a.steps,
            burn_in,
            tol: a.tol,
            window: a.steps.min(100),
            histories,
        })
    };
    let options = ClassifyOptions {
        grid_size: a.grid_size,
        simulation,
    };
    let report = classify(&model, m, &options).map_err(|e| match e {
        crate::analysis::AnalysisError::GridTooSmall(_) => {
            usage("analyze", ErrorKind::ValueValidation, e)
        }
        other => runtime(other),
    })?;
    stdout
        .write_all(report.to_key_value().as_bytes())
        .map_err(runtime)?;
    if let Some(path) = &a.out {
        write_file(
            path,
            format!("{CSV_HEADER}\n{}\n", report.csv_row()).as_bytes(),
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<u8, Failure> {
    let text = fs::read_to_string(&a.config).map_err(|e| io_failure(&a.config, e))?;
    let config =
        SweepConfig::from_json(&text).map_err(|e| usage("sweep", ErrorKind::ValueValidation, e))?;
    let jobs = match a.jobs {
        Some(0) => {
            return Err(usage(
                "sweep",
                ErrorKind::ValueValidation,
                "--jobs must be at least 1",
            ))
        }
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let result = run_sweep(&config, jobs).map_err(|e| match e {
        crate::sweep::SweepError::Config(_) | crate::sweep::SweepError::AllCellsInvalid(_) => {
            usage("sweep", ErrorKind::ValueValidation, e)
        }
        other => runtime(other),
    })?;
    let csv = result.to_csv();
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => stdout.write_all(csv.as_bytes()).map_err(runtime)?,
    }
    let violations = result.monotonicity_violations();
    if !violations.is_empty() {
        for v in &violations {
            let _ = writeln!(stderr, "monotonicity violation: {v}");
        }
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let reports = verify::run_suites(a.seed, a.only.as_deref())
        .map_err(|e| usage("verify", ErrorKind::InvalidValue, e))?;
    let mut failing = Vec::new();
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        writeln!(
            stdout,
            "{status} {} ({} cases, {} failures)",
            r.name, r.cases, r.failures
        )
        .map_err(runtime)?;
        for msg in &r.messages {
            writeln!(stdout, "  {msg}").map_err(runtime)?;
        }
        if !r.passed() {
            failing.push(r.name);
        }
    }
    if failing.is_empty() {
        Ok(EXIT_OK)
    } else {
        writeln!(stdout, "failing suites: {}", failing.join(", ")).map_err(runtime)?;
        Ok(EXIT_FAILURE)
    }
}
