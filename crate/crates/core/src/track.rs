//! Tracks and labeled sets.
//!
//! A [`Track`] is a labeled temporal sequence of kinematic states. At any
//! given frame it contributes either nothing or exactly one labeled state.
//! A [`TrackSet`] bundles tracks with distinct labels over a common frame
//! range and is the shared currency of the crate: ground truth, tracker
//! output and metric input are all track sets.
//!
//! Frames are 1-based throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from constructing or transforming tracks and track sets.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackError {
    /// Labels start at 1; 0 is reserved as "no label".
    #[error("track label must be at least 1")]
    ZeroLabel,
    /// A track with no states has no meaning.
    #[error("track {label} has no states")]
    EmptyTrack { label: u32 },
    /// A state was placed at frame 0 or past the set's frame count.
    #[error("frame {frame} outside valid range 1..={frame_count}")]
    FrameOutOfRange { frame: u32, frame_count: u32 },
    /// Two tracks in one set share a label.
    #[error("duplicate track label {label}")]
    DuplicateLabel { label: u32 },
    /// A relabeling mapped two distinct labels to the same target.
    #[error("relabeling maps two tracks to the same label {target}")]
    LabelCollision { target: u32 },
    /// A relabeling left one of the set's labels without a target.
    #[error("relabeling has no entry for label {label}")]
    UnmappedLabel { label: u32 },
    /// Positions and velocities must be finite numbers.
    #[error("state at frame {frame} has a non-finite component")]
    NonFiniteState { frame: u32 },
}

/// Kinematic state of one object: planar position in pixels and velocity
/// in pixels per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
}

impl KinematicState {
    pub fn new(x: f64, vx: f64, y: f64, vy: f64) -> Self {
        Self { x, vx, y, vy }
    }

    /// State at rest at the given position.
    pub fn at(x: f64, y: f64) -> Self {
        Self::new(x, 0.0, y, 0.0)
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.vx.is_finite() && self.y.is_finite() && self.vy.is_finite()
    }
}

/// One track's contribution to the labeled set at a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledState {
    pub label: u32,
    pub state: KinematicState,
}

impl LabeledState {
    pub fn new(label: u32, state: KinematicState) -> Self {
        Self { label, state }
    }
}

/// A labeled temporal sequence of states, possibly with gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    label: u32,
    states: BTreeMap<u32, KinematicState>,
}

impl Track {
    /// Builds a track from per-frame states. The label must be at least 1,
    /// the map non-empty, every frame at least 1 and every state finite.
    pub fn new(label: u32, states: BTreeMap<u32, KinematicState>) -> Result<Self, TrackError> {
        if label == 0 {
            return Err(TrackError::ZeroLabel);
        }
        if states.is_empty() {
            return Err(TrackError::EmptyTrack { label });
        }
        for (&frame, state) in &states {
            if frame == 0 {
                return Err(TrackError::FrameOutOfRange {
                    frame,
                    frame_count: u32::MAX,
                });
            }
            if !state.is_finite() {
                return Err(TrackError::NonFiniteState { frame });
            }
        }
        Ok(Self { label, states })
    }

    /// Convenience constructor from `(frame, state)` pairs. Later pairs
    /// overwrite earlier ones at the same frame.
    pub fn from_states(
        label: u32,
        states: impl IntoIterator<Item = (u32, KinematicState)>,
    ) -> Result<Self, TrackError> {
        Self::new(label, states.into_iter().collect())
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn states(&self) -> &BTreeMap<u32, KinematicState> {
        &self.states
    }

    pub fn state_at(&self, frame: u32) -> Option<&KinematicState> {
        self.states.get(&frame)
    }

    pub fn exists_at(&self, frame: u32) -> bool {
        self.states.contains_key(&frame)
    }

    /// First frame with a state.
    pub fn first_frame(&self) -> u32 {
        *self.states.keys().next().expect("track is never empty")
    }

    /// Last frame with a state.
    pub fn last_frame(&self) -> u32 {
        *self
            .states
            .keys()
            .next_back()
            .expect("track is never empty")
    }

    /// Number of frames with a state (gaps excluded).
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    fn with_label(&self, label: u32) -> Self {
        Self {
            label,
            states: self.states.clone(),
        }
    }
}

/// A set of tracks with pairwise distinct labels over frames
/// `1..=frame_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    tracks: Vec<Track>,
    frame_count: u32,
}

impl TrackSet {
    /// Builds a set from tracks, which are kept sorted by label. Fails on
    /// duplicate labels or states outside `1..=frame_count`.
    pub fn new(mut tracks: Vec<Track>, frame_count: u32) -> Result<Self, TrackError> {
        tracks.sort_by_key(|t| t.label());
        for pair in tracks.windows(2) {
            if pair[0].label() == pair[1].label() {
                return Err(TrackError::DuplicateLabel {
                    label: pair[0].label(),
                });
            }
        }
        for track in &tracks {
            if track.last_frame() > frame_count {
                return Err(TrackError::FrameOutOfRange {
                    frame: track.last_frame(),
                    frame_count,
                });
            }
        }
        Ok(Self {
            tracks,
            frame_count,
        })
    }

    /// A set with no tracks.
    pub fn empty(frame_count: u32) -> Self {
        Self {
            tracks: Vec::new(),
            frame_count,
        }
    }

    /// Tracks in ascending label order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn track_by_label(&self, label: u32) -> Option<&Track> {
        self.tracks
            .binary_search_by_key(&label, |t| t.label())
            .ok()
            .map(|i| &self.tracks[i])
    }

    /// Largest label in the set, or 0 when empty.
    pub fn max_label(&self) -> u32 {
        self.tracks.last().map_or(0, |t| t.label())
    }

    /// The labeled set at a frame: one labeled state per track that exists
    /// there, in ascending label order.
    pub fn labeled_set_at(&self, frame: u32) -> Result<Vec<LabeledState>, TrackError> {
        if frame == 0 || frame > self.frame_count {
            return Err(TrackError::FrameOutOfRange {
                frame,
                frame_count: self.frame_count,
            });
        }
        Ok(self
            .tracks
            .iter()
            .filter_map(|t| {
                t.state_at(frame)
                    .map(|state| LabeledState::new(t.label(), *state))
            })
            .collect())
    }

    /// Rewrites every track's label through `mapping`, preserving geometry.
    /// Every label in the set must be mapped, and no two tracks may land on
    /// the same target label.
    pub fn relabel(&self, mapping: &BTreeMap<u32, u32>) -> Result<TrackSet, TrackError> {
        let mut seen = BTreeMap::new();
        let mut tracks = Vec::with_capacity(self.tracks.len());
        for track in &self.tracks {
            let &target = mapping
                .get(&track.label())
                .ok_or(TrackError::UnmappedLabel {
                    label: track.label(),
                })?;
            if target == 0 {
                return Err(TrackError::ZeroLabel);
            }
            if seen.insert(target, ()).is_some() {
                return Err(TrackError::LabelCollision { target });
            }
            tracks.push(track.with_label(target));
        }
        TrackSet::new(tracks, self.frame_count)
    }
}
