use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ringtag_cli::commands::{
    execute, replay, CalibrateConfig, CommandConfig, EstimateConfig, LayoutConfig, MonitorConfig, Output,
    PipelineConfig, SensitivityConfig, SimulateConfig, DEFAULT_REFERENCE_FRAMES,
};
use ringtag_cli::error::CliError;
use ringtag_core::pose::SolverConfig;
use ringtag_core::sensitivity::DetectionParams;

#[derive(Parser)]
#[command(name = "ringtag", version, about = "Fiducial-ring deformation sensing pipelines")]
struct Cli {
    /// Base seed; every stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Output directory (or file, for single-output commands).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tag layout files.
    Layout {
        #[command(subcommand)]
        action: LayoutAction,
    },
    /// Generate a single-axis wrench sweep with simulated corner observations.
    Simulate(SimulateArgs),
    /// Estimate plate poses from corner observations.
    Estimate(EstimateArgs),
    /// Fit per-axis deformation-to-wrench models.
    Calibrate(CalibrateArgs),
    /// Minimum detectable pose change and wrench.
    Sensitivity(SensitivityArgs),
    /// Run the contact monitor over a pose stream.
    Monitor(MonitorArgs),
    /// simulate → estimate → calibrate → sensitivity in one run.
    Pipeline(PipelineArgs),
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Subcommand)]
enum LayoutAction {
    /// Write the default layout, optionally with a different outer ring radius.
    Emit {
        /// Outer ring radius (mm).
        #[arg(long)]
        ring_radius: Option<f64>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// `all` or a single axis 0-5 (fx, fy, fz, tx, ty, tz).
    #[arg(long, default_value = "all")]
    axis: String,
    #[arg(long, default_value_t = 170)]
    samples_per_axis: usize,
    /// Corner noise standard deviation (px).
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    /// Sweep span as a fraction of the largest admissible magnitude.
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_FRAMES)]
    reference_frames: usize,
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    compliance: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Correspondence JSONL.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Zero-wrench correspondence JSONL; adds pose changes to the output.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Sweep CSV to pair with the frames; writes estimated_sweep.csv.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Refine each frame from the previous pose instead of running EPnP.
    #[arg(long)]
    warm_start: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Sweep CSV (ideally with estimated pose changes).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    degree: u8,
    /// Training fraction.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long)]
    scatter_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Detection parameters JSON; defaults to the nominal values.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Calibration report JSON.
    #[arg(long)]
    calib: PathBuf,
}

#[derive(Args)]
struct MonitorArgs {
    /// Built-in object preset (threshold and frame count).
    #[arg(long)]
    object: Option<String>,
    /// Contact threshold on |Δz| (mm); overrides the preset.
    #[arg(long)]
    threshold: Option<f64>,
    /// Approach frame count; overrides the preset.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 1)]
    debounce: usize,
    /// Pose JSONL; the first `--reference-frames` records are the pre-roll.
    #[arg(long)]
    poses: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_FRAMES)]
    reference_frames: usize,
    /// Comma-separated start joint angles (rad).
    #[arg(long, value_delimiter = ',', default_value = "0,0,0,0,0,0")]
    start_joints: Vec<f64>,
    /// Comma-separated target joint angles (rad).
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.1,0.1,0.1,0.1,0.1")]
    target_joints: Vec<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    #[arg(long, default_value_t = 170)]
    samples_per_axis: usize,
    #[arg(long, default_value_t = 1)]
    degree: u8,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long)]
    warm_start: bool,
}

fn parse_axes(s: &str) -> Result<Vec<usize>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok((0..6).collect());
    }
    match s.parse::<usize>() {
        Ok(a) if a < 6 => Ok(vec![a]),
        _ => Err(CliError::validation("simulate", format!("--axis must be 'all' or 0-5, got '{s}'"))),
    }
}

fn build(command: Command) -> Result<CommandConfig, CliError> {
    Ok(match command {
        Command::Layout {
            action: LayoutAction::Emit { ring_radius },
        } => CommandConfig::Layout(LayoutConfig::with_ring_radius(ring_radius)),
        Command::Simulate(a) => CommandConfig::Simulate(SimulateConfig {
            axes: parse_axes(&a.axis)?,
            samples_per_axis: a.samples_per_axis,
            corner_sigma_px: a.sigma,
            magnitude_fraction: a.fraction,
            reference_frames: a.reference_frames,
            layout: a.layout,
            camera: a.camera,
            compliance: a.compliance,
        }),
        Command::Estimate(a) => CommandConfig::Estimate(EstimateConfig {
            frames: a.frames,
            camera: a.camera,
            reference: a.reference,
            sweep: a.sweep,
            warm_start: a.warm_start,
            solver: SolverConfig::default(),
        }),
        Command::Calibrate(a) => CommandConfig::Calibrate(CalibrateConfig {
            data: a.data,
            degree: a.degree,
            split_fraction: a.split,
            scatter_csv: a.scatter_csv,
        }),
        Command::Sensitivity(a) => CommandConfig::Sensitivity(SensitivityConfig {
            params: DetectionParams::default(),
            params_file: a.params,
            calib: a.calib,
        }),
        Command::Monitor(a) => CommandConfig::Monitor(MonitorConfig::resolve(
            a.object,
            a.threshold,
            a.frames,
            a.debounce,
            a.poses,
            a.reference_frames,
            a.start_joints,
            a.target_joints,
        )?),
        Command::Pipeline(a) => {
            let mut c = PipelineConfig::default();
            c.simulate.corner_sigma_px = a.sigma;
            c.simulate.samples_per_axis = a.samples_per_axis;
            c.degree = a.degree;
            c.split_fraction = a.split;
            c.warm_start = a.warm_start;
            CommandConfig::Pipeline(c)
        }
        Command::Replay { .. } => unreachable!("handled before build"),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = Output {
        path: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Replay { manifest } => replay(&manifest, &out),
        other => execute(&build(other)?, cli.seed, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
