//! Command-line pipeline for the spin-orbit lattice simulation:
//! `simulate` -> `reconstruct` -> `analyze`, plus `render` for display.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand};
use log::LevelFilter;
use spinlattice::Colormap;

pub use config::SimulationConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "spinlattice",
    version,
    about = "Spin-orbit lattice simulation and pixel-wise tomography"
)]
pub struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write 16 noisy count frames and 16 noiseless intensity maps.
    Simulate {
        /// Config file (`key = value` lines).
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a density matrix at every pixel from a frame directory.
    Reconstruct {
        frames: PathBuf,
        /// TOMO file to write [default: <frames>/tomography.tomo].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bell-fidelity maps, highest-fidelity histogram and witness summary.
    Analyze {
        tomo: PathBuf,
        /// Intensity CSV for the lattice-spacing estimate.
        #[arg(long)]
        intensity: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Output directory [default: next to the TOMO file].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-process an intensity CSV or FRAME file into PGM/PPM.
    Render {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Fixed Gaussian filter width in pixels.
        #[arg(long, conflicts_with = "adaptive")]
        sigma: Option<f64>,
        /// Pick the filter width from the count statistics.
        #[arg(long)]
        adaptive: bool,
        /// gray or hot.
        #[arg(long, default_value = "gray")]
        colormap: Colormap,
        /// Skip corner-median background subtraction.
        #[arg(long)]
        no_background: bool,
        /// Write plain (P2/P3) instead of raw (P5/P6) samples.
        #[arg(long)]
        ascii: bool,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let dir = commands::simulate(&config, out.as_deref())?;
            println!("wrote 16 frames and 16 intensity maps to {}", dir.display());
        }
        Command::Reconstruct { frames, output } => {
            let path = commands::reconstruct(&frames, output.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Analyze {
            tomo,
            intensity,
            bins,
            threshold,
            out,
        } => {
            let opts = commands::AnalyzeOptions {
                intensity,
                bins,
                threshold,
                out,
            };
            print!("{}", commands::analyze(&tomo, &opts)?);
        }
        Command::Render {
            input,
            output,
            sigma,
            adaptive,
            colormap,
            no_background,
            ascii,
        } => {
            let opts = commands::RenderOptions {
                output,
                sigma,
                adaptive,
                colormap,
                no_background,
                ascii,
            };
            let path = commands::render_image(&input, &opts)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
/// Failures are reported on stderr as a single `error: <kind>: ...` line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    eprintln!("error: usage: {}", first.trim_start_matches("error: "));
                    2
                }
            };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .format_timestamp(None)
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
