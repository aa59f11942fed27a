//! `pantrack`: run scenarios headless or serve them to an operator console.
//!
//! Exit status: 0 on success, 1 on usage errors and unreadable or unwritable
//! files, 2 when the scenario itself is rejected or the port is taken.

use std::fs::File;
use std::io::{BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use pantrack_core::runtime::{run_scenario, summary_lines, write_csv};
use pantrack_core::{controller, gimbal, scenario, simworld, tracker};
use pantrack_core::{ControlMode, RunMode, ScenarioError, ScenarioSpec};

const DEFAULT_PORT: u16 = 8765;

#[derive(Debug, Parser)]
#[command(name = "pantrack", version, about = "Simulated pan-tilt tracking rig")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario headless, write per-step CSV and print the summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// CSV output path [default: <scenario name>.csv in the current directory]
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Serve a scenario over WebSocket on 127.0.0.1 until a client sends stop.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Port to listen on; 0 picks a free one
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML)
    scenario: PathBuf,
    /// Loop steps including step 0 [default: from the scenario, else 300]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    steps: Option<u64>,
    /// Noise seed [default: from the scenario, else 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Controller variant [default: from the scenario, else corrected]
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Faithful,
    Corrected,
}

impl From<ModeArg> for ControlMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Faithful => ControlMode::Faithful,
            ModeArg::Corrected => ControlMode::Corrected,
        }
    }
}

/// Scenario-file defaults, listed under `--help`. Only the flags above
/// override a scenario; everything here changes through the file.
fn scenario_defaults() -> String {
    format!(
        "Scenario defaults (set in the file, not by flags):\n  \
         dead band x / y            {} / {} px\n  \
         far threshold x / y        {} / {} px\n  \
         step small / far           {} / {} deg\n  \
         pan limits                 {}..{} deg\n  \
         tilt limits                {}..{} deg\n  \
         initial pose (pan, tilt)   {}, {} deg\n  \
         frame                      {}x{} px, hfov {} deg\n  \
         loop rate                  {} Hz\n  \
         steps                      {}\n  \
         lock dwell                 {} steps\n  \
         tracker search radius      {} px, accept threshold {}, learning rate {}\n\n\
         Exit status: 0 ok, 1 usage or file error, 2 scenario rejected or port in use.",
        controller::DEFAULT_DEAD_X,
        controller::DEFAULT_DEAD_Y,
        controller::DEFAULT_FAR_X,
        controller::DEFAULT_FAR_Y,
        controller::DEFAULT_STEP_SMALL,
        controller::DEFAULT_STEP_FAR,
        gimbal::DEFAULT_PAN_MIN,
        gimbal::DEFAULT_PAN_MAX,
        gimbal::DEFAULT_TILT_MIN,
        gimbal::DEFAULT_TILT_MAX,
        gimbal::DEFAULT_PAN_DEG,
        gimbal::DEFAULT_TILT_DEG,
        simworld::DEFAULT_FRAME_WIDTH,
        simworld::DEFAULT_FRAME_HEIGHT,
        simworld::DEFAULT_HFOV_DEG,
        scenario::DEFAULT_LOOP_HZ,
        scenario::DEFAULT_STEPS,
        scenario::DEFAULT_LOCK_DWELL,
        tracker::DEFAULT_SEARCH_RADIUS,
        tracker::DEFAULT_ACCEPT_THRESHOLD,
        tracker::DEFAULT_LEARNING_RATE,
    )
}

/// A failure with its exit status. The message goes to stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn scenario(path: &Path, e: ScenarioError) -> Self {
        Self { code: 2, message: format!("{}: {e}", path.display()) }
    }
}

fn main() -> ExitCode {
    let help = scenario_defaults();
    let mut command = Cli::command().after_help(help.clone());
    for sub in ["run", "serve"] {
        command = command.mut_subcommand(sub, |c| c.after_help(help.clone()));
    }
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { common, out } => cmd_run(&common, out),
        Command::Serve { common, port } => cmd_serve(&common, port),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pantrack: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Reads the scenario and applies the command-line overrides.
fn load(common: &Common) -> Result<ScenarioSpec, Failure> {
    let path = &common.scenario;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut spec = ScenarioSpec::from_toml(&text).map_err(|e| Failure::scenario(path, e))?;
    if let Some(steps) = common.steps {
        spec.steps = usize::try_from(steps).map_err(|_| Failure::usage("--steps is too large"))?;
    }
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(mode) = common.mode {
        spec = spec.with_mode(mode.into());
    }
    Ok(spec)
}

fn cmd_run(common: &Common, out: Option<PathBuf>) -> Result<(), Failure> {
    let spec = load(common)?;
    let out = out.unwrap_or_else(|| {
        let stem = common.scenario.file_stem().unwrap_or_default();
        PathBuf::from(stem).with_extension("csv")
    });
    // Run first so a rejected scenario leaves no file behind.
    let run = run_scenario(&spec, RunMode::Headless).map_err(|e| Failure::scenario(&common.scenario, e))?;
    let write = || -> Result<(), ScenarioError> {
        let mut w = BufWriter::new(File::create(&out)?);
        write_csv(&run.records, &mut w)?;
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| Failure::usage(format!("cannot write {}: {e}", out.display())))?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for line in summary_lines(&run.summary) {
        let _ = writeln!(lock, "{line}");
    }
    Ok(())
}

fn cmd_serve(common: &Common, port: u16) -> Result<(), Failure> {
    let spec = load(common)?;
    // Reject a scenario that cannot start before taking the port.
    pantrack_service::Session::new(spec.clone()).map_err(|e| Failure::scenario(&common.scenario, e))?;
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .init();

    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| Failure { code: 2, message: format!("cannot listen on 127.0.0.1:{port}: {e}") })?;
        if let Ok(addr) = listener.local_addr() {
            tracing::info!("listening on ws://{addr}");
        }
        pantrack_service::serve(listener, spec)
            .await
            .map_err(|e| Failure { code: 2, message: e.to_string() })
    })
}
