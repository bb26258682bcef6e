use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Simulator for reconfigurable intelligent computational surfaces.
#[derive(Debug, Parser)]
#[command(name = "rics", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file; `default` (or no flag) uses the built-in defaults.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the labeled train and test capture sets.
    Synth,
    /// Train a diffractive classifier; writes a checkpoint and its confusion matrix.
    Train {
        #[arg(long)]
        layers: Option<usize>,
        /// Train on a dataset directory written by `synth` instead of regenerating it.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of a checkpoint on a test set.
    Eval {
        #[arg(long)]
        layers: Option<usize>,
        /// Checkpoint (default: the one `train` writes for `--layers`).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Design-A throughput sweep over the element grid.
    Throughput {
        #[arg(long, value_parser = commands::parse_usize_grid)]
        elements: Option<commands::Grid<usize>>,
        /// Frames per point.
        #[arg(long)]
        trials: Option<usize>,
        /// Sample inferred classes from confusion matrices instead of running the models.
        #[arg(long)]
        emulate_accuracy: bool,
        #[arg(long)]
        model_2layer: Option<PathBuf>,
        #[arg(long)]
        model_4layer: Option<PathBuf>,
    },
    /// Design-B secrecy sweep over the alpha and element grids.
    Secrecy {
        #[arg(long, value_parser = commands::parse_f64_grid)]
        alpha: Option<commands::Grid<f64>>,
        #[arg(long, value_parser = commands::parse_usize_grid)]
        elements: Option<commands::Grid<usize>>,
    },
    /// Secrecy-maximizing power split for each element count.
    OptimizeAlpha {
        #[arg(long, value_parser = commands::parse_usize_grid)]
        elements: Option<commands::Grid<usize>>,
        /// Grid step for alpha.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Apply an analog operator to a signal file.
    Operators {
        /// Signal file (`.iq`), e.g. one written by `synth`.
        #[arg(long)]
        input: PathBuf,
        /// differentiate, integrate, convolve or frequency_shift.
        #[arg(long)]
        op: String,
        #[arg(long)]
        shift_hz: Option<f64>,
        /// Real convolution taps, comma separated.
        #[arg(long, value_parser = commands::parse_f64_grid)]
        kernel: Option<commands::Grid<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
