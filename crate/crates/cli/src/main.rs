//! The `trackeval` command line: score track files, run trackers over
//! detection files, simulate scenarios and sweep experiments.
//!
//! Exit codes: 0 on success, 2 on input or file-format errors, 3 on
//! configuration errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use trackeval_cli::experiment::{self, ExperimentError, SweepConfig};
use trackeval_cli::io;
use trackeval_cli::scenario::{self, ScenarioError};
use trackeval_core::{Algorithm, MetricParams, PipelineError, TrackSet};

const EXIT_INPUT: i32 = 2;
const EXIT_CONFIG: i32 = 3;

#[derive(Debug)]
struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_INPUT,
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_CONFIG,
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::File { .. } => Self::input(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Scenario(inner) => inner.into(),
            ExperimentError::Evaluation(PipelineError::FrameCountMismatch { .. }) => {
                Self::input(e.to_string())
            }
            ExperimentError::Write { .. } | ExperimentError::Tracking(_) => {
                Self::input(e.to_string())
            }
            _ => Self::config(e.to_string()),
        }
    }
}

impl From<trackeval_core::MetricError> for CliError {
    fn from(e: trackeval_core::MetricError) -> Self {
        Self::config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "trackeval",
    version,
    about = "Distance between labeled track sets, plus the trackers and simulators to exercise it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score an estimated track file against a truth track file
    Ospat(OspatArgs),
    /// Run a tracker over a detection file and write the tracks it finds
    Track(TrackCmdArgs),
    /// Generate truth tracks and simulated detections from a scenario file
    Simulate(SimulateArgs),
    /// Sweep trackers, label penalties and detection frequencies
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// Metric order
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Base-distance order
    #[arg(long = "p-prime", default_value_t = 1.0)]
    p_prime: f64,
    /// Cut-off distance, px
    #[arg(long, default_value_t = 100.0)]
    c: f64,
    /// Label-mismatch penalty, px (0 ignores labels)
    #[arg(long, default_value_t = 75.0)]
    alpha: f64,
}

impl MetricArgs {
    fn params(&self) -> Result<MetricParams, CliError> {
        Ok(MetricParams::new(self.p, self.p_prime, self.c, self.alpha)?)
    }
}

#[derive(Args)]
struct OspatArgs {
    /// Truth track file
    truth: PathBuf,
    /// Estimated track file
    estimated: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Evaluate in independent segments of this many frames
    #[arg(long = "segment-length")]
    segment_length: Option<u32>,
    /// Write per-frame scores to this CSV file
    #[arg(long = "per-frame")]
    per_frame: Option<PathBuf>,
}

#[derive(Args)]
struct TrackCmdArgs {
    /// Detection file
    detections: PathBuf,
    /// Tracker: 1 imprecise-rectangle, 2 Gaussian-point, 3 clustered CPHD
    #[arg(long)]
    alg: u8,
    /// Frame count (defaults to the last frame in the file)
    #[arg(long)]
    frames: Option<u32>,
    /// Sensors run only on frames 1, 1+n, 1+2n, ...
    #[arg(long = "every-nth", default_value_t = 1)]
    every_nth: u32,
    /// Seed for the stochastic trackers (default: OSPAT_SEED or 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Output track file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Scenario file supplying sensor and motion statistics
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Where to write the truth tracks
    #[arg(long = "truth-out")]
    truth_out: PathBuf,
    /// Where to write the simulated detections
    #[arg(long = "detections-out")]
    detections_out: PathBuf,
    /// Sensors run only on frames 1, 1+n, 1+2n, ...
    #[arg(long = "every-nth", default_value_t = 1)]
    every_nth: u32,
    /// Simulation seed (default: OSPAT_SEED or 42)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Output directory for per-frame CSVs and summary.csv
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[command(flatten)]
    metric: SweepMetricArgs,
    /// Trackers to run
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
    alg: Vec<u8>,
    /// Detection frequencies to sweep
    #[arg(long = "every-nth", value_delimiter = ',', default_values_t = vec![1, 2, 4, 8])]
    every_nth: Vec<u32>,
    /// Segment length for the per-segment evaluation
    #[arg(long = "segment-length", default_value_t = 50)]
    segment_length: u32,
    /// Seed shared by simulation and trackers (default: OSPAT_SEED or 42)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepMetricArgs {
    /// Metric order
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Base-distance order
    #[arg(long = "p-prime", default_value_t = 1.0)]
    p_prime: f64,
    /// Cut-off distance, px
    #[arg(long, default_value_t = 100.0)]
    c: f64,
    /// Label-mismatch penalties to sweep
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 75.0])]
    alpha: Vec<f64>,
}

/// Seed precedence: --seed flag, then OSPAT_SEED, then 42.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("OSPAT_SEED") {
        Ok(text) => text
            .parse()
            .map_err(|_| CliError::config(format!("OSPAT_SEED `{text}` is not a valid seed"))),
        Err(_) => Ok(42),
    }
}

fn check_every_nth(value: u32) -> Result<(), CliError> {
    if value == 0 {
        Err(CliError::config("--every-nth must be at least 1"))
    } else {
        Ok(())
    }
}

fn parse_algorithm(code: u8) -> Result<Algorithm, CliError> {
    Algorithm::from_code(code)
        .ok_or_else(|| CliError::config(format!("--alg must be 1, 2 or 3, found {code}")))
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ospat(args) => cmd_ospat(args),
        Command::Track(args) => cmd_track(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn cmd_ospat(args: OspatArgs) -> Result<(), CliError> {
    let params = args.metric.params()?;
    // The two files must agree on the frame range; take the larger.
    let truth = io::load_tracks(&args.truth)?;
    let estimated = io::load_tracks(&args.estimated)?;
    let frame_count = truth.frame_count().max(estimated.frame_count());
    let truth = io::load_tracks_with_frame_count(&args.truth, frame_count)?;
    let estimated = io::load_tracks_with_frame_count(&args.estimated, frame_count)?;
    let series = experiment::evaluate(&truth, &estimated, &params, args.segment_length)?;
    if let Some(path) = &args.per_frame {
        std::fs::write(path, experiment::per_frame_csv(&series))
            .map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
    }
    println!("{:.6}", series.time_average());
    Ok(())
}

fn cmd_track(args: TrackCmdArgs) -> Result<(), CliError> {
    check_every_nth(args.every_nth)?;
    let algorithm = parse_algorithm(args.alg)?;
    let seed = resolve_seed(args.seed)?;
    let loaded = match args.frames {
        Some(count) => io::load_detections_with_frame_count(&args.detections, count)?,
        None => io::load_detections(&args.detections)?,
    };
    let detections = apply_schedule(&loaded, args.every_nth);
    let (head, body, motion) = match &args.scenario {
        Some(path) => {
            let desc = scenario::load_scenario(path)?;
            let (head, body) = desc.sensor_models()?;
            (head, body, desc.motion_model())
        }
        None => default_models()?,
    };
    let tracks = experiment::run_tracker(algorithm, &detections, head, body, motion, seed)?;
    emit_tracks(&tracks, args.output.as_deref())
}

/// Marks frames outside the sensor schedule as not observed.
fn apply_schedule(
    detections: &trackeval_core::DetectionSequence,
    every_nth: u32,
) -> trackeval_core::DetectionSequence {
    let frames = detections
        .frames()
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            if (i as u32).is_multiple_of(every_nth) {
                frame.clone()
            } else {
                trackeval_core::FrameDetections::default()
            }
        })
        .collect();
    trackeval_core::DetectionSequence::new(frames)
}

/// Sensor statistics used when no scenario file is given.
fn default_models() -> Result<
    (
        trackeval_core::SensorModel,
        trackeval_core::SensorModel,
        trackeval_core::MotionModel,
    ),
    CliError,
> {
    let region = trackeval_core::Region::new(0.0, 1920.0, 0.0, 1080.0)
        .expect("static region bounds are valid");
    let head = trackeval_core::SensorModel::head(2.0, region);
    let body = trackeval_core::SensorModel::body(2.0, region);
    Ok((head, body, trackeval_core::MotionModel::default()))
}

fn emit_tracks(tracks: &TrackSet, output: Option<&std::path::Path>) -> Result<(), CliError> {
    match output {
        Some(path) => Ok(io::save_tracks(path, tracks)?),
        None => {
            print!("{}", io::tracks_to_csv(tracks));
            Ok(())
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    check_every_nth(args.every_nth)?;
    let seed = resolve_seed(args.seed)?;
    let descriptor = scenario::load_scenario(&args.scenario)?;
    let (truth, detections) = experiment::simulate(&descriptor, seed, args.every_nth)?;
    io::save_tracks(&args.truth_out, &truth)?;
    io::save_detections(&args.detections_out, &detections)?;
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    if args.segment_length == 0 {
        return Err(CliError::config("--segment-length must be at least 1"));
    }
    for &nth in &args.every_nth {
        check_every_nth(nth)?;
    }
    let algorithms = args
        .alg
        .iter()
        .map(|&code| parse_algorithm(code))
        .collect::<Result<Vec<_>, _>>()?;
    let seed = resolve_seed(args.seed)?;
    let descriptor = scenario::load_scenario(&args.scenario)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::input(format!("creating {}: {e}", args.out_dir.display())))?;
    let config = SweepConfig {
        p: args.metric.p,
        p_prime: args.metric.p_prime,
        c: args.metric.c,
        segment_length: args.segment_length,
        algorithms,
        alphas: args.metric.alpha.clone(),
        every_nth: args.every_nth.clone(),
    };
    // Validate the metric setup before the long part starts.
    for &alpha in &config.alphas {
        MetricParams::new(config.p, config.p_prime, config.c, alpha)?;
    }
    let rows = experiment::run_sweep(&descriptor, seed, &config, Some(&args.out_dir))?;
    print!("{}", experiment::summary_csv(&rows));
    Ok(())
}
