use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::{Format, Sink};

#[derive(Parser, Debug)]
#[command(name = "cqed-parity", version, about = "Nonlinear dispersive readout and parity planning for multilevel qubits in a driven cavity")]
struct Cli {
    /// Write JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DeviceArgs {
    /// Device TOML file. Without it a built-in reference device is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the cavity decay rate, MHz.
    #[arg(long)]
    pub kappa_mhz: Option<f64>,
    /// Override the number of qubit levels.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepDirection {
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Two-qubit drive sweeps at zero detuning.
    Fig2,
    /// Two-qubit ε₂ against δ_c, with borders and the parity point.
    Fig3,
    /// Four-qubit (10-level) drive sweeps at zero detuning.
    Fig4,
    /// Four-qubit ε₂ against δ_c, with borders and the planned drives.
    Fig5,
    /// ε₂ per two-qubit state at zero detuning, in dB.
    Table1,
    /// Leakage dephasing rate over κ.
    GammaPhi,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transition frequencies, detunings, λ and bare shifts per qubit.
    Spectrum {
        #[command(flatten)]
        device: DeviceArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Adiabatic drive sweep of one logical state.
    Sweep {
        #[command(flatten)]
        device: DeviceArgs,
        /// Logical state, leftmost character is qubit 0.
        #[arg(long)]
        state: String,
        /// δ_c = ω_c − ω_d, MHz.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta_c: f64,
        #[arg(long, default_value_t = 25.0, allow_hyphen_values = true)]
        from_db: f64,
        #[arg(long, default_value_t = 45.0, allow_hyphen_values = true)]
        to_db: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long, value_enum, default_value_t = SweepDirection::Both)]
        direction: SweepDirection,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Critical points of every logical state at one detuning.
    Bifurcation {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta_c: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Detuning at which each state's bistability disappears.
    Borders {
        #[command(flatten)]
        device: DeviceArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Drive frequencies and strength for a parity measurement.
    ParityPlan {
        #[command(flatten)]
        device: DeviceArgs,
        /// Check the plan with full-model sweeps.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = 400)]
        grid_points: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Dispersive-frame decoherence channels and leakage dephasing.
    Decoherence {
        #[command(subcommand)]
        what: DecoherenceCommand,
    },
    /// Validate the semiclassical model against a truncated Lindblad solve.
    OracleCheck {
        #[command(flatten)]
        device: DeviceArgs,
        /// Fock cutoff; the truncation check doubles it.
        #[arg(long, default_value_t = 10)]
        cutoff: usize,
        /// Drive strengths for the photon-number comparison, MHz.
        #[arg(long, value_delimiter = ',', default_value = "2,5,8,11,13.5")]
        epsilons: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Regenerate the data behind a reference figure or table.
    Repro {
        #[arg(value_enum)]
        figure: Figure,
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, default_value = "repro")]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum DecoherenceCommand {
    /// Channel coefficients against photon number.
    Channels {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, default_value_t = 0)]
        qubit: usize,
        #[arg(long, default_value_t = 1e-3)]
        n_min: f64,
        #[arg(long, default_value_t = 1e8)]
        n_max: f64,
        #[arg(long, default_value_t = 221)]
        points: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Leakage dephasing rate over a κ range.
    Rate {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, default_value_t = 0)]
        qubit: usize,
        #[arg(long, default_value_t = 10.0)]
        epsilon: f64,
        #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
        delta_c: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa_min: f64,
        #[arg(long, default_value_t = 5.0)]
        kappa_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Field amplitudes and even-parity coherence in time.
    Trajectory {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, default_value_t = 0)]
        qubit: usize,
        #[arg(long, default_value_t = 10.0)]
        epsilon: f64,
        #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
        delta_c: f64,
        /// End time in units of 1/κ.
        #[arg(long, default_value_t = 30.0)]
        kappa_t_max: f64,
        #[arg(long, default_value_t = 301)]
        points: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

fn sink(out: &OutArgs) -> Sink {
    out.out.clone().map_or(Sink::Stdout, Sink::File)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let format = if cli.json { Format::Json } else { Format::Csv };
    let run = match cli.command {
        Command::Spectrum { device, out } => commands::spectrum(&device)?.with_sink(sink(&out)),
        Command::Sweep {
            device,
            state,
            delta_c,
            from_db,
            to_db,
            points,
            direction,
            out,
        } => commands::sweep(&device, &state, delta_c, (from_db, to_db, points), direction)?.with_sink(sink(&out)),
        Command::Bifurcation { device, delta_c, out } => commands::bifurcation(&device, delta_c)?.with_sink(sink(&out)),
        Command::Borders { device, out } => commands::borders(&device)?.with_sink(sink(&out)),
        Command::ParityPlan {
            device,
            simulate,
            grid_points,
            out,
        } => commands::parity_plan(&device, simulate, grid_points)?.with_sink(sink(&out)),
        Command::Decoherence { what } => commands::decoherence(&what)?,
        Command::OracleCheck {
            device,
            cutoff,
            epsilons,
            out,
        } => commands::oracle_check(&device, cutoff, &epsilons)?.with_sink(sink(&out)),
        Command::Repro { figure, device, out_dir } => commands::repro(figure, &device)?.with_sink(Sink::Dir(out_dir)),
    };
    run.finish(format)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
