//! The `thermofuse` command-line driver.
//!
//! Every command that writes files takes `--out DIR`, holds a lock file in
//! `DIR` while it runs and finishes by writing [`output::MANIFEST_FILE`]
//! with the tool version, the seed, a hash of the effective configuration
//! and digests of every input and output. Identical inputs give
//! byte-identical directories.
//!
//! Exit status: 0 on success, 2 for bad input or configuration, 1 for
//! internal and I/O failures.

mod commands;
pub mod output;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibration::FrameFormat;
use crate::error::{Error, Result};
use crate::pipeline::KernelChoice;
use crate::scene::SceneKind;

pub use commands::PipelineConfig;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "THERMOFUSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "thermofuse", version, about = "Thermal camera calibration, burst simulation and multi-frame temperature estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render blackbody measurements of a known camera.
    Synth(SynthArgs),
    /// Fit per-pixel coefficients from a measurement manifest.
    Calibrate(CalibrateArgs),
    /// Draw a random temperature scene.
    Scene(SceneArgs),
    /// Simulate a registered burst of a scene.
    Burst(BurstArgs),
    /// Fit the offset model on a simulated corpus.
    FitOffset(FitOffsetArgs),
    /// Estimate the temperature map of a burst.
    Fuse(FuseArgs),
    /// Compare an estimate with the truth.
    Eval(EvalArgs),
    /// MAE as a function of the number of frames.
    SweepN(SweepArgs),
    /// Ground sampling distance and frames per object of a flight.
    Geometry(GeometryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameFormatArg {
    Pgm,
    F32,
    F64,
}

impl From<FrameFormatArg> for FrameFormat {
    fn from(f: FrameFormatArg) -> Self {
        match f {
            FrameFormatArg::Pgm => FrameFormat::Pgm,
            FrameFormatArg::F32 => FrameFormat::F32,
            FrameFormatArg::F64 => FrameFormat::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SceneKindArg {
    Constant,
    Smooth,
}

impl From<SceneKindArg> for SceneKind {
    fn from(k: SceneKindArg) -> Self {
        match k {
            SceneKindArg::Constant => SceneKind::Constant,
            SceneKindArg::Smooth => SceneKind::Smooth,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON synthesis config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Camera coefficients; the built-in reference camera if absent.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<FrameFormatArg>,
    #[arg(long)]
    pub noise_sigma2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Measurement manifest (JSON list of `t_obj`, `t_amb`, `frame_path`).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also fit a radial model of this degree.
    #[arg(long)]
    pub radial_degree: Option<usize>,
    /// Pixels with a larger RMS residual (gray levels) are reported as
    /// excluded.
    #[arg(long, default_value_t = 25.0)]
    pub residual_threshold: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    #[arg(long, value_enum, default_value_t = SceneKindArg::Smooth)]
    pub kind: SceneKindArg,
    /// Lowest scene temperature, °C.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub min: f64,
    /// Highest scene temperature, °C.
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    pub max: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BurstArgs {
    /// Temperature map, raw `f32` with sidecar.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub coeffs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Burst spec JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ambient temperature, °C.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub t_amb: f64,
    #[arg(long)]
    pub n_frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitOffsetArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus spec JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_NU)]
    pub nu: usize,
    #[arg(long)]
    pub n_frames: Option<usize>,
    #[arg(long)]
    pub kernels: Option<KernelChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Burst directory.
    #[arg(long)]
    pub burst: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// identity, average, shifted or file:PATH.
    #[arg(long, default_value = "average")]
    pub kernels: KernelChoice,
    #[arg(long, default_value_t = 1)]
    pub kernel_size: usize,
    /// Offset model JSON; a zero offset if absent.
    #[arg(long)]
    pub offset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// PGM mask, nonzero = valid; finite pixels of both maps if absent.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline config JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    /// Offset model JSON; fitted on the fit corpus if absent.
    #[arg(long)]
    pub offset: Option<PathBuf>,
    /// Comma-separated frame counts.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    /// Frames per burst in the offset fit corpus.
    #[arg(long)]
    pub n_frames: Option<usize>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub kernels: Option<KernelChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// Flight height, m.
    #[arg(long)]
    pub height: f64,
    #[arg(long)]
    pub focal_mm: f64,
    /// Sensor extent along the flight direction, mm.
    #[arg(long)]
    pub sensor_mm: f64,
    #[arg(long)]
    pub sensor_px: f64,
    /// Ground speed, m/s.
    #[arg(long)]
    pub speed: f64,
    #[arg(long)]
    pub fps: f64,
}

impl clap::builder::ValueParserFactory for KernelChoice {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<KernelChoice>().map_err(|e| e.to_string()))
    }
}

fn configure_threads() -> Result<()> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run one command and map the outcome to an exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| configure_threads().and_then(|_| commands::dispatch(cli.command))));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            1
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
