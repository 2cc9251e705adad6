//! TOML scenario descriptors and deterministic ground-truth generation.
//!
//! A scenario names an arena, sensor statistics and a list of targets with
//! birth and death frames, start positions and velocities. Truth tracks
//! integrate constant-velocity motion at the frame period and reflect off
//! the arena walls, so paths are piecewise constant velocity and every
//! state stays inside the arena.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;
use trackeval_core::{
    DetectionError, DetectionSimulator, KinematicState, MotionModel, Region, SensorModel, Track,
    TrackError, TrackSet,
};

/// Errors from parsing or validating a scenario.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("frame_count must be at least 1")]
    EmptyFrameRange,
    #[error("target {label}: lifetime {birth}..={death} does not fit 1..={frame_count}")]
    BadLifetime {
        label: u32,
        birth: u32,
        death: u32,
        frame_count: u32,
    },
    #[error("target {label} starts outside the arena")]
    OutsideArena { label: u32 },
    #[error("target {label}: start and velocity must be finite")]
    NonFinite { label: u32 },
    #[error("duplicate target label {label}")]
    DuplicateLabel { label: u32 },
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Track(#[from] TrackError),
}

/// Axis-aligned arena bounds; doubles as the clutter region.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Detection statistics of the two sensors.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub head_pd: f64,
    pub body_pd: f64,
    pub head_sigma: f64,
    pub body_sigma: f64,
    pub clutter_rate: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            head_pd: 0.58,
            body_pd: 0.52,
            head_sigma: 1.0,
            body_sigma: 25.0,
            clutter_rate: 2.0,
        }
    }
}

/// Frame period and process-noise intensity of the motion model.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionSpec {
    pub dt: f64,
    pub noise_intensity: f64,
}

impl Default for MotionSpec {
    fn default() -> Self {
        let m = MotionModel::default();
        Self {
            dt: m.dt,
            noise_intensity: m.noise_intensity,
        }
    }
}

/// One target: where it appears, when, and how it moves.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub label: u32,
    #[serde(default = "default_birth")]
    pub birth_frame: u32,
    /// Defaults to the scenario's last frame.
    pub death_frame: Option<u32>,
    /// Head position at the birth frame, px.
    pub start: [f64; 2],
    /// Velocity, px/s.
    pub velocity: [f64; 2],
}

fn default_birth() -> u32 {
    1
}

/// A full scenario description.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDescriptor {
    pub frame_count: u32,
    pub arena: ArenaSpec,
    #[serde(default)]
    pub sensors: SensorSpec,
    #[serde(default)]
    pub motion: MotionSpec,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
}

/// Parses and validates a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<ScenarioDescriptor, ScenarioError> {
    let descriptor: ScenarioDescriptor = toml::from_str(text)?;
    descriptor.validate()?;
    Ok(descriptor)
}

/// Reads a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioDescriptor, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

impl ScenarioDescriptor {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.frame_count == 0 {
            return Err(ScenarioError::EmptyFrameRange);
        }
        let region = self.region()?;
        let mut seen = std::collections::BTreeSet::new();
        for target in &self.targets {
            if !seen.insert(target.label) {
                return Err(ScenarioError::DuplicateLabel {
                    label: target.label,
                });
            }
            let finite = target
                .start
                .iter()
                .chain(&target.velocity)
                .all(|v| v.is_finite());
            if !finite {
                return Err(ScenarioError::NonFinite {
                    label: target.label,
                });
            }
            let death = target.death_frame.unwrap_or(self.frame_count);
            if target.birth_frame == 0 || target.birth_frame > death || death > self.frame_count {
                return Err(ScenarioError::BadLifetime {
                    label: target.label,
                    birth: target.birth_frame,
                    death,
                    frame_count: self.frame_count,
                });
            }
            if !region.contains(target.start[0], target.start[1]) {
                return Err(ScenarioError::OutsideArena {
                    label: target.label,
                });
            }
        }
        Ok(())
    }

    pub fn region(&self) -> Result<Region, ScenarioError> {
        Ok(Region::new(
            self.arena.x_min,
            self.arena.x_max,
            self.arena.y_min,
            self.arena.y_max,
        )?)
    }

    pub fn motion_model(&self) -> MotionModel {
        MotionModel::new(self.motion.dt, self.motion.noise_intensity)
    }

    pub fn sensor_models(&self) -> Result<(SensorModel, SensorModel), ScenarioError> {
        let region = self.region()?;
        let head = SensorModel::new(
            self.sensors.head_pd,
            self.sensors.head_sigma,
            self.sensors.head_sigma,
            self.sensors.clutter_rate,
            region,
        )?;
        let body = SensorModel::new(
            self.sensors.body_pd,
            self.sensors.body_sigma,
            self.sensors.body_sigma,
            self.sensors.clutter_rate,
            region,
        )?;
        Ok((head, body))
    }

    pub fn simulator(&self) -> Result<DetectionSimulator, ScenarioError> {
        let (head, body) = self.sensor_models()?;
        Ok(DetectionSimulator::new(head, body))
    }

    /// Deterministic ground truth: constant-velocity integration at the
    /// frame period, reflecting off arena walls.
    pub fn truth(&self) -> Result<TrackSet, ScenarioError> {
        self.validate()?;
        let dt = self.motion.dt;
        let arena = &self.arena;
        let mut tracks = Vec::with_capacity(self.targets.len());
        for target in &self.targets {
            let death = target.death_frame.unwrap_or(self.frame_count);
            let (mut x, mut y) = (target.start[0], target.start[1]);
            let (mut vx, mut vy) = (target.velocity[0], target.velocity[1]);
            let mut states: BTreeMap<u32, KinematicState> = BTreeMap::new();
            for frame in target.birth_frame..=death {
                states.insert(frame, KinematicState::new(x, vx, y, vy));
                (x, vx) = advance(x, vx, dt, arena.x_min, arena.x_max);
                (y, vy) = advance(y, vy, dt, arena.y_min, arena.y_max);
            }
            tracks.push(Track::new(target.label, states)?);
        }
        Ok(TrackSet::new(tracks, self.frame_count)?)
    }
}

/// One axis step with reflection at the walls.
fn advance(pos: f64, vel: f64, dt: f64, lo: f64, hi: f64) -> (f64, f64) {
    let mut next = pos + vel * dt;
    let mut vel = vel;
    if next < lo {
        next = 2.0 * lo - next;
        vel = -vel;
    } else if next > hi {
        next = 2.0 * hi - next;
        vel = -vel;
    }
    (next.clamp(lo, hi), vel)
}
