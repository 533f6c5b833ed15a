use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phlink::commands;
use phlink::config::DetectorName;
use phlink::io::TraceKind;

#[derive(Parser)]
#[command(
    name = "phlink",
    version,
    about = "Simulation, estimation, and detection toolkit for an LED-driven proton-pump link"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a measurement trace from a configuration
    Simulate {
        /// Experiment configuration (or a metadata record of an earlier run)
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to run.output_dir
        #[arg(long)]
        out: Option<PathBuf>,
        /// Value column of the written trace
        #[arg(long, value_enum, default_value_t = TraceKind::Conc)]
        kind: TraceKind,
        /// Overrides run.seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit channel parameters to a trace over a known symbol window
    Fit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TraceKind::Conc)]
        kind: TraceKind,
        /// First symbol of the fit window (default 0)
        #[arg(long)]
        window_start: Option<usize>,
        /// Symbols in the fit window (default: through the end)
        #[arg(long)]
        window_len: Option<usize>,
    },
    /// Decode a trace and report the error table
    Detect {
        /// Trace to decode; omit with --all
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TraceKind::Conc)]
        kind: TraceKind,
        /// Overrides link.detector
        #[arg(long, value_enum)]
        detector: Option<DetectorName>,
        /// Simulate internally and run every scheme-detector pair
        #[arg(long)]
        all: bool,
    },
    /// Convert between pH and concentration, file or single value
    Convert {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        from: TraceKind,
        #[arg(long, value_enum)]
        to: TraceKind,
        /// Convert one number instead of a file
        #[arg(long)]
        value: Option<f64>,
    },
    /// Monte-Carlo error rates over seeds and noise levels
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs the seeds 0..N
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Comma-separated noise standard deviations; default: the configured one
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        /// Worker threads (default: available parallelism)
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate {
            config,
            out,
            kind,
            seed,
        } => commands::cmd_simulate(&config, out.as_deref(), kind, seed, &argv).map(|_| ()),
        Cmd::Fit {
            trace,
            config,
            out,
            kind,
            window_start,
            window_len,
        } => commands::cmd_fit(
            &trace,
            &config,
            out.as_deref(),
            kind,
            window_start,
            window_len,
            &argv,
        ),
        Cmd::Detect {
            trace,
            config,
            out,
            kind,
            detector,
            all,
        } => commands::cmd_detect(
            trace.as_deref(),
            &config,
            out.as_deref(),
            kind,
            detector,
            all,
            &argv,
        )
        .map(|_| ()),
        Cmd::Convert {
            input,
            output,
            from,
            to,
            value,
        } => commands::cmd_convert(input.as_deref(), output.as_deref(), from, to, value),
        Cmd::Sweep {
            config,
            out,
            seeds,
            sigmas,
            jobs,
        } => commands::cmd_sweep(&config, out.as_deref(), seeds, sigmas.as_deref(), jobs, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code())
        }
    }
}
