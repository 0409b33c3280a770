use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vtsirs::pipeline::{self, write_sweep_csv, write_trajectory_csv};
use vtsirs::scenario::InitialState;
use vtsirs::simulate::integrate_absolute;
use vtsirs::{Error, Scenario};

/// Environment variable naming the directory for relative output paths.
const OUT_DIR_ENV: &str = "VTSIRS_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "vtsirs",
    version,
    about = "Analysis of an SIRS model with vertical transmission"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis: thresholds, equilibria, classification, certificates
    /// and the simulation cross-check. Writes a JSON report.
    Analyze {
        scenario: PathBuf,
        /// Report path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluates thresholds and the endemic point along the scenario sweep.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dulac and winding-number checks only.
    Certify { scenario: PathBuf },
    /// Integrates the absolute system from one initial state.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        traj_out: PathBuf,
        /// Index into the scenario's initial states.
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(Scenario::from_toml_str(&text)?)
}

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let path = resolve(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn report_failures<'a>(checks: impl Iterator<Item = &'a pipeline::Check>) {
    for c in checks.filter(|c| !c.passed) {
        eprintln!("check failed: {}: {}", c.name, c.detail);
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Analyze {
            scenario,
            out,
            seed,
        } => {
            let mut sc = load(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let report = pipeline::analyze(&sc);
            emit(out.as_deref(), &report.to_json())?;
            report_failures(report.checks.iter());
            Ok(if report.passed { 0 } else { 2 })
        }
        Command::Sweep { scenario, out } => {
            let sc = load(&scenario)?;
            let rows = pipeline::sweep(&sc)?;
            let mut csv = Vec::new();
            write_sweep_csv(&rows, &mut csv).map_err(|e| io_error(&out, e))?;
            write_file(&out, &csv)?;
            Ok(0)
        }
        Command::Certify { scenario } => {
            let sc = load(&scenario)?;
            let report = pipeline::certify(&sc);
            emit(None, &report.to_json())?;
            report_failures(report.checks.iter());
            Ok(if report.passed { 0 } else { 2 })
        }
        Command::Simulate {
            scenario,
            traj_out,
            start,
        } => {
            let sc = load(&scenario)?;
            let x0 = match sc.initial_states.get(start) {
                Some(state) => state.absolute(),
                None if sc.initial_states.is_empty() && start == 0 => {
                    InitialState::Proportions(pipeline::verification_starts(&sc)[0]).absolute()
                }
                None => {
                    eprintln!(
                        "error: scenario has {} initial states, no index {start}",
                        sc.initial_states.len()
                    );
                    return Ok(1);
                }
            };
            let traj = integrate_absolute(&sc.params, &x0, &sc.integrator)?;
            let mut csv = Vec::new();
            write_trajectory_csv(&traj, &mut csv).map_err(|e| io_error(&traj_out, e))?;
            write_file(&traj_out, &csv)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
