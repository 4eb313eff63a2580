//! Command-line front end: argument parsing, dispatch and result envelopes.

pub mod commands;
pub mod envelope;
pub mod input;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdrd_core::Error;
use serde_json::{json, Value};

use crate::envelope::{digest, round_value, ErrorReport, RunEnvelope};

/// What one invocation printed and its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Exit status for malformed input or usage.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for infeasible problems.
pub const EXIT_INFEASIBLE: i32 = 1;
/// Exit status when a verification suite reports failures.
pub const EXIT_SUITE_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rational,
    Float,
}

#[derive(Debug, Parser)]
#[command(name = "mdrd", version, about = "Multiple-description rate-distortion toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every randomized search and suite.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of search restarts.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Iterations per restart for the region search.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Exact rational arithmetic or floating point with snapping.
    #[arg(long, global = true, value_enum, default_value = "rational")]
    pub mode: Mode,
    /// CSV trace output for searches that record one.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Functional representation of a conditional law.
    #[command(subcommand)]
    Frl(FrlCmd),
    /// Rate-bound set functions of auxiliary schemes.
    #[command(subcommand)]
    Psi(PsiCmd),
    /// Inner-bound regions.
    #[command(subcommand)]
    Region(RegionCmd),
    /// Scalable (successive refinement) coding.
    #[command(subcommand)]
    Scalable(ScalableCmd),
    /// Channels with state known at both ends.
    #[command(subcommand)]
    Strategy(StrategyCmd),
    /// Bundled property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum FrlCmd {
    /// Decompose p(w|v) as w = f(v, z) with z independent of v.
    Decompose {
        file: PathBuf,
        /// Roles `U,V,W`; join several axes with `+`, leave a role empty for none.
        #[arg(long)]
        axes: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PsiCmd {
    /// ψ on one subset or on all of them, with the contra-polymatroid check.
    Eval {
        file: PathBuf,
        #[arg(long)]
        subset: Option<String>,
        #[arg(long)]
        family: Option<String>,
    },
    /// All greedy vertices, also as CSV.
    Vertices {
        file: PathBuf,
        #[arg(long)]
        family: Option<String>,
        /// Write the CSV here as well.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RegionCmd {
    /// Rate bounds, distortions and vertices of a scheme.
    Eval {
        file: PathBuf,
        #[arg(long)]
        family: Option<String>,
        /// Also report the minimal weighted sum rate.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Random multi-start search for the least weighted sum rate.
    Optimize {
        #[arg(long)]
        family: String,
        #[arg(long)]
        weights: String,
        /// JSON object from subset label to distortion target.
        #[arg(long)]
        distortions: String,
        /// JSON object from auxiliary label to alphabet size.
        #[arg(long)]
        cardinalities: Option<String>,
        /// `bss` or a source JSON file.
        #[arg(long, default_value = "bss")]
        source: String,
    },
    /// Map an EGC corner to an EGC* scheme.
    Transform {
        file: PathBuf,
        #[arg(long, value_parser = ["v1", "v2"])]
        vertex: Option<String>,
    },
    /// Remove refinement layers from a VKG scheme.
    Eliminate {
        file: PathBuf,
        /// Order for a one-step top-layer elimination.
        #[arg(long, conflicts_with = "chain")]
        pi: Option<String>,
        /// Absorb every layer of size at least two.
        #[arg(long)]
        chain: bool,
    },
    /// Closed-form weighted sum rates of a joint law.
    Weighted {
        file: PathBuf,
        #[arg(long)]
        weights: String,
        #[arg(long, value_parser = ["ih", "hierarchical", "ic", "ic-central"], default_value = "ih")]
        kind: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScalableCmd {
    /// One point of the rate-distortion function.
    Rd {
        #[arg(long, default_value = "bss")]
        source: String,
        #[arg(long, default_value = "hamming")]
        distortion: String,
        #[arg(long = "D")]
        d: f64,
    },
    /// Least total rate given the coarse layer.
    TotalRate {
        #[arg(long, default_value = "bss")]
        source: String,
        /// Coarse rate; defaults to R(D1).
        #[arg(long = "R1")]
        r1: Option<f64>,
        #[arg(long = "D1")]
        d1: f64,
        #[arg(long = "D12")]
        d12: f64,
    },
    /// Least refinement-only distortion.
    D2star {
        #[arg(long, default_value = "bss")]
        source: String,
        #[arg(long = "D1")]
        d1: f64,
        #[arg(long = "D12")]
        d12: f64,
        #[arg(long, group = "method")]
        closed_form: bool,
        #[arg(long, group = "method")]
        structured: bool,
        #[arg(long, group = "method")]
        general: bool,
        #[arg(long, default_value_t = 1e-4)]
        grid: f64,
        #[arg(long, default_value_t = 14)]
        cap: usize,
    },
    /// Weak independence of a channel's rows.
    Weak { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum StrategyCmd {
    /// Capacity with state at both ends.
    Capacity {
        file: PathBuf,
        #[arg(long, value_parser = ["direct", "shannon", "both"], default_value = "both")]
        method: String,
    },
    /// Strategies induced by an input law.
    Frl { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = [
        "frl", "polymatroid", "egc", "elimination", "identity", "equivalence", "bss", "strategy", "all",
    ])]
    pub suite: String,
    /// Grid step of the scalable suite.
    #[arg(long, default_value_t = 0.05)]
    pub grid: f64,
    /// Cases per suite instead of the defaults.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Also run the general optimizer on the scalable spot cases.
    #[arg(long)]
    pub general: bool,
}

/// Failure of one command.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io { path: String, message: String },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::UnknownAxis(_) => "unknown-axis",
        Error::DuplicateAxis(_) => "duplicate-axis",
        Error::OverlappingAxes(_) => "overlapping-axes",
        Error::InvalidAlphabet(_) => "invalid-alphabet",
        Error::InvalidPmf(_) => "invalid-pmf",
        Error::InvalidChannel(_) => "invalid-channel",
        Error::InvalidDistortion(_) => "invalid-distortion",
        Error::ShapeMismatch(_) => "shape-mismatch",
        Error::Decoder(_) => "decoder",
        Error::InvalidPermutation(_) => "invalid-permutation",
        Error::InvalidWeights(_) => "invalid-weights",
        Error::WrongFamily { .. } => "wrong-family",
        Error::Scheme(_) => "scheme",
        Error::TooManyDescriptions { .. } => "too-many-descriptions",
        Error::Domain(_) => "domain",
        Error::Infeasible(_) => "infeasible",
        Error::Parse { .. } => "parse",
    }
}

impl CliError {
    fn report(&self) -> (i32, ErrorReport) {
        match self {
            CliError::Core(e) => {
                let code = if matches!(e, Error::Infeasible(_)) { EXIT_INFEASIBLE } else { EXIT_INPUT };
                let path = match e {
                    Error::Parse { path, .. } => Some(path.clone()),
                    _ => None,
                };
                (code, ErrorReport { kind: error_kind(e).into(), message: e.to_string(), path })
            }
            CliError::Io { path, message } => (
                EXIT_INPUT,
                ErrorReport { kind: "io".into(), message: format!("{path}: {message}"), path: None },
            ),
        }
    }
}

/// Payload of a successful command.
pub struct CmdOutput {
    pub results: Value,
    pub residuals: Value,
    /// Nonzero when the command succeeded but its checks did not.
    pub code: i32,
}

impl CmdOutput {
    pub fn new(results: Value, residuals: Value) -> Self {
        Self { results, residuals, code: 0 }
    }
}

fn command_name(cmd: &Cmd) -> String {
    let sub = match cmd {
        Cmd::Frl(FrlCmd::Decompose { .. }) => "frl decompose",
        Cmd::Psi(PsiCmd::Eval { .. }) => "psi eval",
        Cmd::Psi(PsiCmd::Vertices { .. }) => "psi vertices",
        Cmd::Region(RegionCmd::Eval { .. }) => "region eval",
        Cmd::Region(RegionCmd::Optimize { .. }) => "region optimize",
        Cmd::Region(RegionCmd::Transform { .. }) => "region transform",
        Cmd::Region(RegionCmd::Eliminate { .. }) => "region eliminate",
        Cmd::Region(RegionCmd::Weighted { .. }) => "region weighted",
        Cmd::Scalable(ScalableCmd::Rd { .. }) => "scalable rd",
        Cmd::Scalable(ScalableCmd::TotalRate { .. }) => "scalable total-rate",
        Cmd::Scalable(ScalableCmd::D2star { .. }) => "scalable d2star",
        Cmd::Scalable(ScalableCmd::Weak { .. }) => "scalable weak",
        Cmd::Strategy(StrategyCmd::Capacity { .. }) => "strategy capacity",
        Cmd::Strategy(StrategyCmd::Frl { .. }) => "strategy frl",
        Cmd::Verify(_) => "verify",
    };
    sub.into()
}

fn render(env: &RunEnvelope) -> String {
    let mut s = serde_json::to_string_pretty(env).unwrap_or_else(|_| "{}".into());
    s.push('\n');
    s
}

/// Runs one invocation; `args` excludes the program name.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let start = Instant::now();
    let cli = match Cli::try_parse_from(std::iter::once("mdrd".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome { code: 0, stdout: e.to_string(), stderr: String::new() };
            }
            let env = RunEnvelope {
                command: args.first().cloned().unwrap_or_default(),
                inputs_digest: digest(&args, &[]),
                seed: 0,
                results: Value::Null,
                residuals: Value::Null,
                wall_time_ms: start.elapsed().as_millis() as u64,
                error: Some(ErrorReport { kind: "usage".into(), message: e.kind().to_string(), path: None }),
            };
            return Outcome { code: EXIT_INPUT, stdout: render(&env), stderr: e.render().to_string() };
        }
    };
    let mut ctx = commands::Context::new(cli.global.clone());
    let result = commands::dispatch(&mut ctx, &cli.cmd);
    let mut env = RunEnvelope {
        command: command_name(&cli.cmd),
        inputs_digest: digest(&args, &ctx.files),
        seed: cli.global.seed,
        results: Value::Null,
        residuals: Value::Null,
        wall_time_ms: 0,
        error: None,
    };
    let (code, stderr) = match result {
        Ok(out) => {
            env.results = round_value(out.results);
            env.residuals = round_value(out.residuals);
            (out.code, String::new())
        }
        Err(e) => {
            let (code, report) = e.report();
            let msg = format!("error: {}\n", report.message);
            env.residuals = json!({});
            env.error = Some(report);
            (code, msg)
        }
    };
    env.wall_time_ms = start.elapsed().as_millis() as u64;
    Outcome { code, stdout: render(&env), stderr }
}
