//! `xrlayout`: validate scenario files, replay sessions and compare runs.
//!
//! Exit codes: 0 success, 1 domain violation, 2 I/O or environment failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tempfile::NamedTempFile;
use xrlayout_core::metrics::{self, compare, export, import, Format, SessionSummary};
use xrlayout_core::scenario::{self, locate, parse_scenario, ScenarioError, BUNDLED};
use xrlayout_core::session::{run_batch, sorted_rows, sorted_summaries, RunOptions};
use xrlayout_core::{Scenario, Strategy};

/// Version line; the trailing field is the scenario schema version.
const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " schema=1");

#[derive(Parser)]
#[command(name = "xrlayout", version = VERSION, about = "Replay XR panel-placement sessions with a synthetic user")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check scenario files and report every violation as file:line:col.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Replay sessions and write per-trial metrics and session summaries.
    Run(RunArgs),
    /// Report per-context, per-metric directions between two runs.
    Compare {
        /// Output directory or summary file of run A.
        a: PathBuf,
        /// Output directory or summary file of run B.
        b: PathBuf,
        /// Absolute difference treated as a tie.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long = "scenario", required_unless_present = "all")]
    scenarios: Vec<String>,
    /// Run all eight bundled sessions.
    #[arg(long, conflicts_with = "scenarios")]
    all: bool,
    /// Override each scenario's placement strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Agent seed; defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "XRLAYOUT_OUT", default_value = "xrlayout-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Simulation tick rate in Hz.
    #[arg(long)]
    tick_hz: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    EnvRef,
    BodyFixed,
    WorldFixed,
    ObjectFixed,
    HeadFixed,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::EnvRef => Strategy::EnvironmentReferenced,
            StrategyArg::BodyFixed => Strategy::BodyFixed,
            StrategyArg::WorldFixed => Strategy::WorldFixed,
            StrategyArg::ObjectFixed => Strategy::ObjectFixed,
            StrategyArg::HeadFixed => Strategy::HeadFixed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

/// A failed command: message and exit code.
struct Failure(u8, String);

impl Failure {
    fn domain(msg: impl Into<String>) -> Self {
        Failure(1, msg.into())
    }

    fn io(msg: impl Into<String>) -> Self {
        Failure(2, msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { paths } => validate(&paths),
        Command::Run(args) => run(&args),
        Command::Compare { a, b, tolerance } => compare_runs(&a, &b, tolerance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}

/// `file:line:col: message` lines for a rejected scenario.
fn diagnostics(file: &str, text: &str, err: &ScenarioError) -> Vec<String> {
    if let ScenarioError::Syntax { line, col, .. } = err {
        let (_, msg) = &err.diagnostics()[0];
        return vec![format!("{file}:{line}:{col}: {msg}")];
    }
    err.diagnostics()
        .into_iter()
        .map(|(path, msg)| {
            let (line, col) = path.as_deref().map_or((1, 1), |p| locate(text, p));
            match path.filter(|p| !p.is_empty()) {
                Some(p) => format!("{file}:{line}:{col}: {p}: {msg}"),
                None => format!("{file}:{line}:{col}: {msg}"),
            }
        })
        .collect()
}

fn validate(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut code = 0;
    for path in paths {
        let shown = path.display().to_string();
        match fs::read_to_string(path) {
            Err(e) => {
                eprintln!("{shown}: {e}");
                code = 2;
            }
            Ok(text) => match parse_scenario(&text) {
                Ok(_) => println!("{shown}: ok"),
                Err(err) => {
                    for line in diagnostics(&shown, &text, &err) {
                        println!("{line}");
                    }
                    code = code.max(1);
                }
            },
        }
    }
    match code {
        0 => Ok(()),
        c => Err(Failure(c, String::new())),
    }
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| Failure::io(format!("{arg}: {e}")))?
    } else {
        scenario::bundled(arg)
            .ok_or_else(|| Failure::io(format!("{arg}: no such file or bundled scenario")))?
            .to_string()
    };
    parse_scenario(&text).map_err(|err| Failure::domain(diagnostics(arg, &text, &err).join("\n")))
}

/// Writes via a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::io(format!("{}: {e}", path.display()));
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let scenarios: Vec<Scenario> = if args.all {
        BUNDLED
            .iter()
            .map(|(name, _)| load_scenario(name))
            .collect::<Result<_, _>>()?
    } else {
        args.scenarios
            .iter()
            .map(|s| load_scenario(s))
            .collect::<Result<_, _>>()?
    };
    if let Some(hz) = args.tick_hz {
        if !(hz > 0.0 && hz.is_finite()) {
            return Err(Failure::domain(format!("--tick-hz must be positive, got {hz}")));
        }
    }
    let opts = RunOptions {
        strategy: args.strategy.map(Into::into),
        seed: args.seed,
        tick_hz: args.tick_hz,
    };
    let results = run_batch(&scenarios, &opts)
        .into_iter()
        .zip(&scenarios)
        .map(|(r, s)| r.map_err(|e| Failure::domain(format!("{}: {e}", s.name))))
        .collect::<Result<Vec<_>, _>>()?;

    let format: Format = args.format.into();
    let ext = format.extension();
    let sessions_dir = args.out.join("sessions");
    fs::create_dir_all(&sessions_dir).map_err(|e| Failure::io(format!("{}: {e}", sessions_dir.display())))?;
    let out = |e: metrics::MetricsError| Failure::io(e.to_string());

    for r in &results {
        let file = sessions_dir.join(format!("{}_{}.{ext}", r.session, r.strategy.short_name()));
        write_atomic(&file, &export(&r.trials, format).map_err(out)?)?;
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.session);
        }
    }
    let rows = sorted_rows(&results);
    let summaries = sorted_summaries(&results);
    let mut infos: Vec<_> = results.iter().map(|r| r.info()).collect();
    infos.sort_by(|a, b| (a.context, a.strategy, &a.session).cmp(&(b.context, b.strategy, &b.session)));
    write_atomic(
        &args.out.join(format!("trials.{ext}")),
        &export(&rows, format).map_err(out)?,
    )?;
    write_atomic(
        &args.out.join(format!("summary.{ext}")),
        &export(&summaries, format).map_err(out)?,
    )?;
    write_atomic(
        &args.out.join(format!("params.{ext}")),
        &export(&infos, format).map_err(out)?,
    )?;
    println!(
        "{} session(s), {} trial row(s) written to {}",
        summaries.len(),
        rows.len(),
        args.out.display()
    );
    Ok(())
}

fn read_summaries(path: &Path) -> Result<Vec<SessionSummary>, Failure> {
    let file = if path.is_dir() {
        [Format::Csv, Format::Json]
            .iter()
            .map(|f| path.join(format!("summary.{}", f.extension())))
            .find(|p| p.exists())
            .ok_or_else(|| Failure::io(format!("{}: no summary file", path.display())))?
    } else {
        path.to_path_buf()
    };
    let format = match file.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    };
    let text = fs::read_to_string(&file).map_err(|e| Failure::io(format!("{}: {e}", file.display())))?;
    import(&text, format).map_err(|e| Failure::domain(format!("{}: {e}", file.display())))
}

fn compare_runs(a: &Path, b: &Path, tolerance: f64) -> Result<(), Failure> {
    let (sa, sb) = (read_summaries(a)?, read_summaries(b)?);
    let rows = compare(&sa, &sb, tolerance).map_err(|e| Failure::domain(e.to_string()))?;
    println!("context,metric,a,b,direction");
    for r in rows {
        println!("{},{},{},{},{}", r.context, r.metric, r.a, r.b, r.direction.as_str());
    }
    Ok(())
}
