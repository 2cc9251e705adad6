//! Recursive trackers that turn rectangle detections into labeled tracks.
//!
//! Three desk-scale trackers share this module's plumbing:
//!
//! * [`bernoulli::MultiBernoulliTracker`] with the imprecise rectangle
//!   likelihood and a particle representation per track.
//! * The same tracker with the Gaussian point-measurement likelihood and a
//!   single Gaussian per track.
//! * [`cphd::CphdTracker`], Gaussian mixture clusters with explicit
//!   measurement association and a per-cluster cardinality distribution.
//!
//! All trackers consume per-frame head and body rectangle lists through a
//! common `step` shape (`None` when a sensor is not scheduled at a frame,
//! `Some` of a possibly empty list when it ran) and emit [`Report`]s that
//! [`extract_tracks`] assembles into a [`TrackSet`].

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::{KinematicState, Track, TrackError, TrackSet};

pub mod bernoulli;
pub mod cphd;

pub use bernoulli::{
    predict_track, update_track, BernoulliConfig, BernoulliTrack, LikelihoodMode,
    MultiBernoulliTracker, TrackDensity,
};
pub use cphd::{cardinality_update, CphdCluster, CphdConfig, CphdTracker, LabeledComponent};

/// Tracker selector, numbered as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Multi-Bernoulli with the imprecise rectangle likelihood (1).
    ImpreciseBernoulli,
    /// Multi-Bernoulli with the Gaussian point likelihood (2).
    GaussianBernoulli,
    /// Association CPHD (3).
    AssociationCphd,
}

impl Algorithm {
    pub fn code(self) -> u8 {
        match self {
            Algorithm::ImpreciseBernoulli => 1,
            Algorithm::GaussianBernoulli => 2,
            Algorithm::AssociationCphd => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Algorithm::ImpreciseBernoulli),
            2 => Some(Algorithm::GaussianBernoulli),
            3 => Some(Algorithm::AssociationCphd),
            _ => None,
        }
    }
}

/// Near-constant-velocity motion model on the state `[x, vx, y, vy]`:
/// positions integrate velocities over `dt` seconds per frame, and white
/// acceleration noise of intensity `noise_intensity` feeds the process
/// noise covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub dt: f64,
    pub noise_intensity: f64,
}

impl MotionModel {
    pub fn new(dt: f64, noise_intensity: f64) -> Self {
        Self {
            dt,
            noise_intensity,
        }
    }

    pub fn transition_matrix(&self) -> Matrix4<f64> {
        let dt = self.dt;
        Matrix4::new(
            1.0, dt, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, dt, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    pub fn process_noise(&self) -> Matrix4<f64> {
        let dt = self.dt;
        let q = self.noise_intensity;
        let a = q * dt * dt * dt / 3.0;
        let b = q * dt * dt / 2.0;
        let c = q * dt;
        Matrix4::new(
            a, b, 0.0, 0.0, //
            b, c, 0.0, 0.0, //
            0.0, 0.0, a, b, //
            0.0, 0.0, b, c,
        )
    }
}

/// 25 frames per second, acceleration noise sized for walking-speed
/// targets.
impl Default for MotionModel {
    fn default() -> Self {
        Self::new(1.0 / 25.0, 300.0)
    }
}

/// Gaussian state estimate over `[x, vx, y, vy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    /// Diagonal-covariance state at rest at a position.
    pub fn at(x: f64, y: f64, pos_var: [f64; 2], vel_var: f64) -> Self {
        Self {
            mean: Vector4::new(x, 0.0, y, 0.0),
            cov: Matrix4::from_diagonal(&Vector4::new(pos_var[0], vel_var, pos_var[1], vel_var)),
        }
    }

    pub fn kinematic(&self) -> KinematicState {
        KinematicState::new(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }
}

/// Innovation of a position measurement against a Gaussian state.
#[derive(Debug, Clone)]
pub(crate) struct Innovation {
    pub residual: Vector2<f64>,
    pub s: Matrix2<f64>,
    pub s_inv: Matrix2<f64>,
}

pub(crate) fn innovation(state: &GaussianState, z: [f64; 2], var: [f64; 2]) -> Innovation {
    let residual = Vector2::new(z[0] - state.mean[0], z[1] - state.mean[2]);
    let p = &state.cov;
    let s = Matrix2::new(p[(0, 0)] + var[0], p[(0, 2)], p[(2, 0)], p[(2, 2)] + var[1]);
    let s_inv = s
        .try_inverse()
        .expect("innovation covariance is invertible");
    Innovation { residual, s, s_inv }
}

pub(crate) fn mahalanobis2(inn: &Innovation) -> f64 {
    (inn.residual.transpose() * inn.s_inv * inn.residual)[(0, 0)]
}

/// Density of the innovation under its predicted Gaussian.
pub(crate) fn innovation_density(inn: &Innovation) -> f64 {
    let det = inn.s.determinant();
    (-0.5 * mahalanobis2(inn)).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Measurement update in Joseph form, numerically safe for small gains.
pub(crate) fn joseph_update(
    state: &GaussianState,
    inn: &Innovation,
    var: [f64; 2],
) -> GaussianState {
    // H picks positions out of [x, vx, y, vy].
    let mut ph_t = nalgebra::Matrix4x2::zeros();
    for r in 0..4 {
        ph_t[(r, 0)] = state.cov[(r, 0)];
        ph_t[(r, 1)] = state.cov[(r, 2)];
    }
    let k = ph_t * inn.s_inv;
    let mean = state.mean + k * inn.residual;
    let mut kh = Matrix4::zeros();
    for r in 0..4 {
        kh[(r, 0)] = k[(r, 0)];
        kh[(r, 2)] = k[(r, 1)];
    }
    let a = Matrix4::identity() - kh;
    let r_mat = Matrix2::new(var[0], 0.0, 0.0, var[1]);
    let cov = a * state.cov * a.transpose() + k * r_mat * k.transpose();
    GaussianState::new(mean, cov)
}

/// One tracker output: at `frame`, the track `label` is estimated to be in
/// `state`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub frame: u32,
    pub label: u32,
    pub state: KinematicState,
}

/// Errors from assembling reports into a track set.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("label {label} reported twice at frame {frame}")]
    DuplicateReport { label: u32, frame: u32 },
    #[error(transparent)]
    Track(#[from] TrackError),
}

/// Groups reports by label into a [`TrackSet`] spanning
/// `1..=frame_count`. Each label may report at most once per frame.
pub fn extract_tracks(reports: &[Report], frame_count: u32) -> Result<TrackSet, ExtractError> {
    let mut by_label: std::collections::BTreeMap<
        u32,
        std::collections::BTreeMap<u32, KinematicState>,
    > = std::collections::BTreeMap::new();
    for report in reports {
        let states = by_label.entry(report.label).or_default();
        if states.insert(report.frame, report.state).is_some() {
            return Err(ExtractError::DuplicateReport {
                label: report.label,
                frame: report.frame,
            });
        }
    }
    let tracks: Result<Vec<Track>, TrackError> = by_label
        .into_iter()
        .map(|(label, states)| Track::new(label, states))
        .collect();
    Ok(TrackSet::new(tracks?, frame_count)?)
}
