//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 numeric.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::SimError;
use crate::experiments::{compare_theory, run};
use crate::record::{read_csv, write_csv, write_json, MetricRecord};
use crate::spec::{Estimator, ExperimentKind, ExperimentSpec, Receiver, SigmaMode, TrainingKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Comma-separated list flag value.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn list<T: FromStr>(s: &str) -> Result<List<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<T>, String>>()
        .map(List)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "qdr", version, about = "Quantized distributed MIMO reception experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalized channel-estimation MSE versus training length.
    MseSweep(MseArgs),
    /// ZF-receiver symbol error rate with perfect or estimated CSI.
    SerSweep(SerArgs),
    /// Calibrate the quantization-noise variance.
    SigmaQ(SigmaArgs),
    /// Relaxed ML estimate convergence versus the number of nodes.
    Lemma1(NodeArgs),
    /// Data-phase ZF soft-estimate MSE versus the number of nodes.
    Lemma2(NodeArgs),
    /// Theory overlay for a previously written CSV table.
    CompareTheory(CompareArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file (written atomically); standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Flat key=value file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub nt: Option<usize>,
    /// Constellation order (PSK).
    #[arg(long)]
    pub m: Option<usize>,
    /// SNR list in dB, e.g. `10,20`.
    #[arg(long = "snr-db", value_parser = list::<f64>, allow_hyphen_values = true)]
    pub snr_db: Option<List<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "t-list", alias = "t", value_parser = list::<usize>)]
    pub t_list: Option<List<usize>>,
    #[arg(long, value_parser = list::<Estimator>)]
    pub estimators: Option<List<Estimator>>,
    #[arg(long, value_parser = parse_named::<TrainingKind>)]
    pub training: Option<TrainingKind>,
}

#[derive(Debug, Args)]
pub struct SerArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub k: Option<usize>,
    /// Coherence block length in channel uses.
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long = "t-list", alias = "t", value_parser = list::<usize>)]
    pub t_list: Option<List<usize>>,
    #[arg(long, value_parser = list::<Estimator>)]
    pub estimators: Option<List<Estimator>>,
    #[arg(long, value_parser = parse_named::<Receiver>)]
    pub receiver: Option<Receiver>,
    #[arg(long, value_parser = parse_named::<TrainingKind>)]
    pub training: Option<TrainingKind>,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_parser = parse_named::<SigmaMode>)]
    pub mode: Option<SigmaMode>,
}

#[derive(Debug, Args)]
pub struct NodeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "k-list", value_parser = list::<usize>)]
    pub k_list: Option<List<usize>>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// CSV table produced by `mse-sweep` or `lemma2`.
    #[arg(long)]
    pub input: PathBuf,
    /// Calibrated quantization-noise variance.
    #[arg(long = "sigma-q-sq")]
    pub sigma_q_sq: f64,
    #[command(flatten)]
    pub output: Output,
}

fn parse_named<T: FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// A parsed, validated invocation.
#[derive(Debug)]
pub enum CliConfig {
    Experiment {
        spec: ExperimentSpec,
        out: Option<PathBuf>,
        format: Format,
    },
    CompareTheory {
        input: PathBuf,
        sigma_q_sq: f64,
        out: Option<PathBuf>,
        format: Format,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Help or version was requested; print and exit 0.
    Display(String),
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Display(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

/// Reads a `key=value` file into `--key value` arguments. Blank lines and
/// lines starting with `#` are ignored.
fn config_args(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                n + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        out.push(format!("--{key}={}", value.trim()).into());
    }
    Ok(out)
}

/// Splices config-file arguments in front of the explicit flags so that
/// explicit flags override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut out = argv[..2].to_vec();
    out.extend(config_args(&path)?);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

fn apply_common(spec: &mut ExperimentSpec, c: &Common) {
    if let Some(v) = c.nt {
        spec.nt = v;
    }
    if let Some(v) = c.m {
        spec.m = v;
    }
    if let Some(v) = &c.snr_db {
        spec.snr_db_list = v.0.clone();
    }
    if let Some(v) = c.trials {
        spec.trials = v;
    }
    if let Some(v) = c.seed {
        spec.seed = v;
    }
    if let Some(v) = c.workers {
        spec.workers = v;
    }
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, S>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv = expand_config(argv.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Display(e.to_string())
        }
        _ => CliError::Usage(e.to_string()),
    })?;
    let (spec, output) = match cli.command {
        Command::CompareTheory(a) => {
            if !a.sigma_q_sq.is_finite() || a.sigma_q_sq < 0.0 {
                return Err(CliError::Usage("--sigma-q-sq: must be finite and non-negative".into()));
            }
            return Ok(CliConfig::CompareTheory {
                input: a.input,
                sigma_q_sq: a.sigma_q_sq,
                out: a.output.out,
                format: a.output.format,
            });
        }
        Command::MseSweep(a) => {
            let mut s = ExperimentSpec::new(ExperimentKind::MseSweep);
            apply_common(&mut s, &a.common);
            if let Some(v) = a.t_list {
                s.t_list = v.0;
            }
            if let Some(v) = a.estimators {
                s.estimators = v.0;
            }
            if let Some(v) = a.training {
                s.training = v;
            }
            (s, a.common.output)
        }
        Command::SerSweep(a) => {
            let mut s = ExperimentSpec::new(ExperimentKind::SerSweep);
            apply_common(&mut s, &a.common);
            if let Some(v) = a.k {
                s.k = v;
            }
            s.l = a.l;
            if let Some(v) = a.t_list {
                s.t_list = v.0;
            }
            if let Some(v) = a.estimators {
                s.estimators = v.0;
            }
            if let Some(v) = a.receiver {
                s.receiver = v;
            }
            if let Some(v) = a.training {
                s.training = v;
            }
            (s, a.common.output)
        }
        Command::SigmaQ(a) => {
            let mut s = ExperimentSpec::new(ExperimentKind::SigmaQ);
            apply_common(&mut s, &a.common);
            if let Some(v) = a.samples {
                s.samples = v;
            }
            if let Some(v) = a.mode {
                s.sigma_mode = v;
            }
            (s, a.common.output)
        }
        Command::Lemma1(a) => node_spec(ExperimentKind::Lemma1, a),
        Command::Lemma2(a) => node_spec(ExperimentKind::Lemma2, a),
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(CliConfig::Experiment {
        spec,
        out: output.out,
        format: output.format,
    })
}

fn node_spec(kind: ExperimentKind, a: NodeArgs) -> (ExperimentSpec, Output) {
    let mut s = ExperimentSpec::new(kind);
    apply_common(&mut s, &a.common);
    if let Some(v) = a.k_list {
        s.k_list = v.0;
    }
    (s, a.common.output)
}

fn encode(records: &[MetricRecord], format: Format) -> Result<Vec<u8>, SimError> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(records, &mut buf)?,
        Format::Json => write_json(records, &mut buf)?,
    }
    Ok(buf)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial table.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn exit_code(e: &SimError) -> i32 {
    match e {
        SimError::Validation(_) => EXIT_USAGE,
        SimError::Io(_) | SimError::Parse(_) => EXIT_IO,
        SimError::Numeric(_) => EXIT_NUMERIC,
    }
}

/// Executes a parsed configuration and returns the process exit code.
pub fn execute(config: CliConfig) -> i32 {
    let (result, out, format) = match config {
        CliConfig::Experiment { spec, out, format } => (run(&spec), out, format),
        CliConfig::CompareTheory {
            input,
            sigma_q_sq,
            out,
            format,
        } => {
            let r = fs::File::open(&input)
                .map_err(SimError::from)
                .and_then(read_csv)
                .and_then(|recs| compare_theory(&recs, sigma_q_sq));
            (r, out, format)
        }
    };
    let records = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let bytes = match encode(&records, format) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match out {
        Some(path) => {
            if let Err(e) = write_atomic(&path, &bytes) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_IO;
            }
            let mut stdout = std::io::stdout().lock();
            for r in &records {
                if writeln!(stdout, "{}", r.summary()).is_err() {
                    return EXIT_IO;
                }
            }
        }
        None => {
            for r in &records {
                eprintln!("{}", r.summary());
            }
            if std::io::stdout().lock().write_all(&bytes).is_err() {
                return EXIT_IO;
            }
        }
    }
    EXIT_OK
}

/// Full command-line entry point: parse, run, report.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    match parse_args(argv) {
        Ok(config) => execute(config),
        Err(CliError::Display(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e @ (CliError::Usage(_) | CliError::Io(_))) => {
            let (CliError::Usage(msg) | CliError::Io(msg) | CliError::Display(msg)) = &e;
            eprintln!("{}", msg.trim_end());
            e.exit_code()
        }
    }
}
