//! Evaluation toolkit for multi-object trackers that report labeled tracks.
//!
//! The crate covers the full loop of a tracking experiment:
//!
//! * [`track`]: tracks, labeled per-frame sets and relabeling.
//! * [`assignment`]: rectangular minimum-cost assignment with forbidden
//!   pairs and deterministic tie-breaking.
//! * [`ospa`]: per-frame OSPA distance between labeled sets, with a label
//!   mismatch penalty folded into the base distance.
//! * [`ospat`]: sequence-level evaluation that first matches estimated
//!   tracks to truth tracks, relabels them, then scores every frame.
//! * [`detection`]: rectangular detections, the body-to-head conversion and
//!   the two single-object detection likelihoods.
//! * [`sim`]: synthetic detection generation with seeded randomness.
//! * [`trackers`]: desk-scale recursive trackers consuming those
//!   detections.

pub mod assignment;
pub mod detection;
pub mod ospa;
pub mod ospat;
pub mod sim;
pub mod track;
pub mod trackers;

pub use assignment::{
    brute_force_assignment, solve_assignment, Assignment, AssignmentError, CostMatrix,
};
pub use detection::{
    body_to_head, likelihood_gaussian, likelihood_imprecise, rect_to_point, DetectionError,
    PointMeasurement, Rect, Region, Sensor, SensorModel,
};
pub use ospa::{
    base_distance, cutoff_base_distance, localisation_distance, ospa_labeled_sets, MetricError,
    MetricParams,
};
pub use ospat::{
    evaluate_segments, evaluate_segments_scoped, evaluate_sequence, label_estimated_tracks,
    track_assignment_cost, LabelingScope, PipelineError, ScoreSeries, SegmentScore,
};
pub use sim::{DetectionSequence, DetectionSimulator, FrameDetections, RectShape, SimError};
pub use track::{KinematicState, LabeledState, Track, TrackError, TrackSet};
pub use trackers::bernoulli::{
    predict_track, update_track, BernoulliConfig, BernoulliTrack, LikelihoodMode,
    MultiBernoulliTracker, TrackDensity,
};
pub use trackers::cphd::{
    cardinality_update, CphdCluster, CphdConfig, CphdTracker, LabeledComponent,
};
pub use trackers::{extract_tracks, Algorithm, ExtractError, GaussianState, MotionModel, Report};
