//! End-to-end evaluation runs and parameter sweeps.
//!
//! A run simulates (or receives) detections, feeds them to one tracker,
//! assembles the reports into tracks and scores them against truth. A
//! sweep repeats that over trackers, label penalties and detection
//! frequencies, writing one per-frame CSV per combination plus a summary
//! CSV.

use crate::scenario::{ScenarioDescriptor, ScenarioError};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;
use trackeval_core::{
    evaluate_segments, evaluate_sequence, extract_tracks, Algorithm, BernoulliConfig, CphdConfig,
    CphdTracker, DetectionSequence, ExtractError, LikelihoodMode, MetricError, MetricParams,
    MotionModel, MultiBernoulliTracker, PipelineError, Report, ScoreSeries, SensorModel, SimError,
    TrackSet,
};

/// Header of the sweep summary CSV.
pub const SUMMARY_HEADER: &str = "tracker,alpha,segment_length,every_nth,time_average";
/// Header of a per-frame score CSV.
pub const PER_FRAME_HEADER: &str = "frame,ospat";

/// Errors from any stage of a run, tagged with the stage.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("scenario stage: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("simulation stage: {0}")]
    Simulation(#[from] SimError),
    #[error("tracking stage: {0}")]
    Tracking(#[from] ExtractError),
    #[error("metric setup: {0}")]
    Metric(#[from] MetricError),
    #[error("evaluation stage: {0}")]
    Evaluation(#[from] PipelineError),
    #[error("writing {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// Simulates a scenario: deterministic truth plus seeded detections, with
/// both sensors scheduled every `every_nth`-th frame.
pub fn simulate(
    descriptor: &ScenarioDescriptor,
    seed: u64,
    every_nth: u32,
) -> Result<(TrackSet, DetectionSequence), ExperimentError> {
    let truth = descriptor.truth()?;
    let simulator = descriptor.simulator()?;
    let detections = simulator.simulate(&truth, seed, every_nth)?;
    Ok((truth, detections))
}

/// Runs one tracker over a detection sequence and assembles its reports
/// into a track set over the same frame range.
pub fn run_tracker(
    algorithm: Algorithm,
    detections: &DetectionSequence,
    head: SensorModel,
    body: SensorModel,
    motion: MotionModel,
    seed: u64,
) -> Result<TrackSet, ExperimentError> {
    let frame_count = detections.frame_count();
    let reports: Vec<Report> = match algorithm {
        Algorithm::ImpreciseBernoulli | Algorithm::GaussianBernoulli => {
            let mode = match algorithm {
                Algorithm::ImpreciseBernoulli => LikelihoodMode::Imprecise,
                _ => LikelihoodMode::Gaussian,
            };
            let mut tracker = MultiBernoulliTracker::new(
                mode,
                BernoulliConfig::default(),
                motion,
                head,
                body,
                seed,
            );
            for frame in 1..=frame_count {
                let dets = detections.frame(frame).expect("frame within range");
                tracker.step(dets.head.as_deref(), dets.body.as_deref());
            }
            tracker.reports().to_vec()
        }
        Algorithm::AssociationCphd => {
            let mut tracker = CphdTracker::new(CphdConfig::default(), motion, head, body);
            for frame in 1..=frame_count {
                let dets = detections.frame(frame).expect("frame within range");
                tracker.step(dets.head.as_deref(), dets.body.as_deref());
            }
            tracker.reports().to_vec()
        }
    };
    Ok(extract_tracks(&reports, frame_count)?)
}

/// Scores estimated tracks against truth, per segment when a segment
/// length is given, otherwise with one whole-sequence matching.
pub fn evaluate(
    truth: &TrackSet,
    estimated: &TrackSet,
    params: &MetricParams,
    segment_length: Option<u32>,
) -> Result<ScoreSeries, ExperimentError> {
    let series = match segment_length {
        Some(length) => evaluate_segments(truth, estimated, params, length)?,
        None => evaluate_sequence(truth, estimated, params)?,
    };
    Ok(series)
}

pub fn per_frame_csv(series: &ScoreSeries) -> String {
    let mut out = String::from(PER_FRAME_HEADER);
    out.push('\n');
    for (i, value) in series.per_frame().iter().enumerate() {
        writeln!(out, "{},{:.6}", i + 1, value).expect("string writes cannot fail");
    }
    out
}

/// One line of the sweep summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub tracker: u8,
    pub alpha: f64,
    pub segment_length: u32,
    pub every_nth: u32,
    pub time_average: f64,
}

impl SummaryRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6}",
            self.tracker, self.alpha, self.segment_length, self.every_nth, self.time_average
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// What a sweep iterates over, besides the scenario itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub p: f64,
    pub p_prime: f64,
    pub c: f64,
    pub segment_length: u32,
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    pub every_nth: Vec<u32>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            p_prime: 1.0,
            c: 100.0,
            segment_length: 50,
            algorithms: vec![
                Algorithm::ImpreciseBernoulli,
                Algorithm::GaussianBernoulli,
                Algorithm::AssociationCphd,
            ],
            alphas: vec![0.0, 75.0],
            every_nth: vec![1, 2, 4, 8],
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, content).map_err(|source| ExperimentError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Runs the full sweep. Detections are re-simulated per detection
/// frequency from the same seed; each tracker runs once per frequency and
/// is scored under every label penalty. With an output directory, one
/// per-frame CSV per combination and a `summary.csv` are written.
pub fn run_sweep(
    descriptor: &ScenarioDescriptor,
    seed: u64,
    config: &SweepConfig,
    out_dir: Option<&Path>,
) -> Result<Vec<SummaryRow>, ExperimentError> {
    let (head, body) = descriptor.sensor_models()?;
    let motion = descriptor.motion_model();
    let mut rows = Vec::new();
    for &every_nth in &config.every_nth {
        let (truth, detections) = simulate(descriptor, seed, every_nth)?;
        for &algorithm in &config.algorithms {
            let estimated = run_tracker(algorithm, &detections, head, body, motion, seed)?;
            for &alpha in &config.alphas {
                let params = MetricParams::new(config.p, config.p_prime, config.c, alpha)?;
                let series = evaluate(&truth, &estimated, &params, Some(config.segment_length))?;
                if let Some(dir) = out_dir {
                    let name = format!(
                        "perframe_alg{}_alpha{}_nth{}.csv",
                        algorithm.code(),
                        alpha,
                        every_nth
                    );
                    write_file(&dir.join(name), &per_frame_csv(&series))?;
                }
                rows.push(SummaryRow {
                    tracker: algorithm.code(),
                    alpha,
                    segment_length: config.segment_length,
                    every_nth,
                    time_average: series.time_average(),
                });
            }
        }
    }
    if let Some(dir) = out_dir {
        write_file(&dir.join("summary.csv"), &summary_csv(&rows))?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use approx::assert_abs_diff_eq;

    fn small_scenario() -> ScenarioDescriptor {
        parse_scenario(
            r#"
frame_count = 40

[arena]
x_min = 0.0
x_max = 300.0
y_min = 0.0
y_max = 200.0

[sensors]
head_pd = 0.95
body_pd = 0.9
clutter_rate = 0.5

[[targets]]
label = 1
start = [60.0, 100.0]
velocity = [30.0, 0.0]
"#,
        )
        .unwrap()
    }

    #[test]
    fn tracker_run_covers_most_of_a_clean_target() {
        let desc = small_scenario();
        let (truth, dets) = simulate(&desc, 11, 1).unwrap();
        let (head, body) = desc.sensor_models().unwrap();
        let est = run_tracker(
            Algorithm::GaussianBernoulli,
            &dets,
            head,
            body,
            desc.motion_model(),
            11,
        )
        .unwrap();
        assert!(!est.tracks().is_empty());
        let reported: usize = est.tracks().iter().map(|t| t.state_count()).sum();
        assert!(reported >= 25, "only {reported} states reported");
        let params = MetricParams::default();
        let series = evaluate(&truth, &est, &params, None).unwrap();
        assert!(
            series.time_average() < 40.0,
            "score {}",
            series.time_average()
        );
    }

    #[test]
    fn sweep_emits_one_row_per_combination() {
        let desc = small_scenario();
        let config = SweepConfig {
            algorithms: vec![Algorithm::GaussianBernoulli],
            alphas: vec![0.0, 75.0],
            every_nth: vec![1, 4],
            segment_length: 20,
            ..SweepConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let rows = run_sweep(&desc, 3, &config, Some(dir.path())).unwrap();
        assert_eq!(rows.len(), 4);
        // Same tracks scored under both penalties: zero penalty never hurts.
        for pair in rows.chunks(2) {
            assert!(pair[0].time_average <= pair[1].time_average + 1e-9);
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with(SUMMARY_HEADER));
        assert_eq!(summary.lines().count(), 5);
        assert!(dir.path().join("perframe_alg2_alpha75_nth4.csv").exists());
    }

    #[test]
    fn sweep_is_reproducible() {
        let desc = small_scenario();
        let config = SweepConfig {
            algorithms: vec![Algorithm::ImpreciseBernoulli],
            alphas: vec![75.0],
            every_nth: vec![1],
            segment_length: 20,
            ..SweepConfig::default()
        };
        let a = run_sweep(&desc, 21, &config, None).unwrap();
        let b = run_sweep(&desc, 21, &config, None).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a[0].time_average, b[0].time_average);
    }

    #[test]
    fn per_frame_csv_has_one_line_per_frame() {
        let desc = small_scenario();
        let (truth, dets) = simulate(&desc, 5, 1).unwrap();
        let (head, body) = desc.sensor_models().unwrap();
        let est = run_tracker(
            Algorithm::AssociationCphd,
            &dets,
            head,
            body,
            desc.motion_model(),
            5,
        )
        .unwrap();
        let series = evaluate(&truth, &est, &MetricParams::default(), Some(10)).unwrap();
        let csv = per_frame_csv(&series);
        assert_eq!(csv.lines().count(), 41);
        assert!(csv.starts_with(PER_FRAME_HEADER));
    }
}
