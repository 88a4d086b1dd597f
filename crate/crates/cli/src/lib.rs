//! Command-line driver for the p2dyn experiments, the verification suite and
//! report export.
//!
//! Exit codes: `0` success, `1` a module error or a failed verdict, `2` a
//! usage or configuration error.

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use p2dyn::record::Record;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config or inputs.
    Usage(String),
    /// A library operation failed.
    Operation { op: String, message: String },
    /// Verdicts that did not pass.
    Failed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Operation { .. } | Self::Failed(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Operation { op, message } => write!(f, "{op} failed: {message}"),
            Self::Failed(names) => write!(f, "failed checks: {}", names.join(", ")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Wraps a library error with the name of the failing operation.
pub(crate) fn op_err<E: fmt::Display>(op: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Operation {
        op: op.to_owned(),
        message: e.to_string(),
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Operation {
        op: format!("write {}", path.display()),
        message: e.to_string(),
    }
}

#[derive(Parser, Debug)]
#[command(name = "p2dyn", version, about = "Numerical experiments for holomorphic maps of the complex projective plane")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each can also be set through the
/// environment variable shown, or through `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Bundled map name (power2, power4, lattes4, lattes4susp), map file
    /// path, or inline JSON map.
    #[arg(long, global = true, env = "P2DYN_MAP")]
    pub map: Option<String>,
    /// Seed; mandatory for stochastic commands.
    #[arg(long, global = true, env = "P2DYN_SEED")]
    pub seed: Option<u64>,
    /// Directory for result records and artifacts.
    #[arg(long, global = true, env = "P2DYN_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "P2DYN_WORKERS")]
    pub workers: Option<usize>,
    /// Truncation tolerance of Green function evaluations.
    #[arg(long, global = true, env = "P2DYN_TOL")]
    pub tol: Option<f64>,
    /// JSON experiment config; flags take precedence over its fields.
    #[arg(long, global = true, env = "P2DYN_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Green function values at homogeneous points.
    Green(GreenArgs),
    /// Sample the equilibrium measure by random backward iteration.
    SampleMu(SampleArgs),
    /// Estimate both Lyapunov exponents.
    Lyapunov(LyapunovArgs),
    /// Contraction profiles of backward orbits and their decay diagnostics.
    Orbit(OrbitArgs),
    /// Slice or trace pairing of a tabulated potential with a bump.
    Slice(SliceArgs),
    /// Quadrature checks of the local model.
    Localmodel(LocalArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
    /// Merge result records into a report and plot-data CSVs.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GreenArgs {
    /// `re0,im0,re1,im1,re2,im2`; may be repeated.
    #[arg(long = "point", required = true)]
    pub points: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Start point `re0,im0,re1,im1,re2,im2`.
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Args, Debug)]
pub struct LyapunovArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Orbit length after burn-in.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug)]
pub struct OrbitArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of backward orbits.
    #[arg(long)]
    pub orbits: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SliceDirection {
    Z,
    W,
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PotentialKind {
    /// Local potential of the map's Green function.
    Green,
    /// `max(Re z + |w|², 0)`.
    Local,
}

#[derive(Args, Debug)]
pub struct SliceArgs {
    /// Grid nodes per axis.
    #[arg(long)]
    pub res: Option<usize>,
    /// Bump center `re z, im z, re w, im w`.
    #[arg(long, default_value = "0,0,0,0")]
    pub center: String,
    /// Bump radius, one value or four.
    #[arg(long, default_value = "0.5")]
    pub radius: String,
    #[arg(long, value_enum, default_value = "w")]
    pub direction: SliceDirection,
    #[arg(long, value_enum, default_value = "green")]
    pub potential: PotentialKind,
    /// Grid box `lo,hi` on every axis.
    #[arg(long = "box", default_value = "-1,1")]
    pub bbox: String,
    /// Affine chart of the grid.
    #[arg(long, default_value_t = 2)]
    pub chart: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LocalCheck {
    All,
    T11,
    T22,
    Mu0,
    Psi,
    Coupe,
}

#[derive(Args, Debug)]
pub struct LocalArgs {
    /// Quadrature nodes per axis for the 4D pairings.
    #[arg(long)]
    pub res: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub which: LocalCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate faults for exercising the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Flip the sign of the direct side of `pair_T11`.
    T11Sign,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "quick")]
    pub level: Level,
    /// Comma-separated bundled map names; all bundled maps by default.
    #[arg(long)]
    pub maps: Option<String>,
    #[arg(long, value_enum, hide = true)]
    pub inject: Option<Fault>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding result records.
    pub dir: PathBuf,
}

/// Output sink: records go to stdout and, with `--out`, to a JSON-lines
/// file per command.
pub struct Output {
    pub dir: Option<PathBuf>,
}

impl Output {
    pub fn prepare(&self) -> CliResult<()> {
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        Ok(())
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    /// Prints `records` and writes them to `name` in the output directory.
    pub fn records(&self, name: &str, records: &[Record]) -> CliResult<()> {
        let mut text = String::new();
        for r in records {
            text.push_str(&r.to_line());
            text.push('\n');
        }
        print!("{text}");
        std::io::stdout().flush().ok();
        if let Some(path) = self.path(name) {
            std::fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Writes an artifact through `write` when an output directory is set.
    pub fn artifact<F>(&self, name: &str, write: F) -> CliResult<Option<String>>
    where
        F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
    {
        let Some(path) = self.path(name) else {
            return Ok(None);
        };
        let file = std::fs::File::create(&path).map_err(io_err(&path))?;
        let mut buf = std::io::BufWriter::new(file);
        write(&mut buf).and_then(|_| buf.flush()).map_err(io_err(&path))?;
        Ok(Some(name.to_owned()))
    }
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            e.print().ok();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("p2dyn: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let settings = config::Settings::resolve(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let out = Output {
        dir: settings.out.clone(),
    };
    out.prepare()?;
    pool.install(|| match &cli.command {
        Command::Green(a) => commands::green(&settings, a, &out),
        Command::SampleMu(a) => commands::sample_mu(&settings, a, &out),
        Command::Lyapunov(a) => commands::lyapunov(&settings, a, &out),
        Command::Orbit(a) => commands::orbit(&settings, a, &out),
        Command::Slice(a) => commands::slice(&settings, a, &out),
        Command::Localmodel(a) => commands::localmodel(&settings, a, &out),
        Command::Verify(a) => verify::run(&settings, a, &out),
        Command::Report(a) => report::run(a, &out),
    })
}
