//! Synthetic detection generation.
//!
//! Given truth tracks, [`DetectionSimulator`] produces per-frame rectangle
//! lists for the head and body sensors: each alive object is detected with
//! the sensor's detection probability, detected objects yield one jittered
//! rectangle, and uniform Poisson clutter is added over the sensor region.
//! Body rectangles are placed so that [`crate::detection::body_to_head`]
//! maps them back onto the object's position.
//!
//! All randomness comes from a counter-based generator seeded explicitly,
//! so a seed fully determines the output. Draws happen in a fixed order:
//! frame by frame, head sensor before body sensor, objects in ascending
//! label order, clutter after objects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{Rect, Sensor, SensorModel};
use crate::track::TrackSet;

/// Errors from invalid simulator configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("nominal rectangle size {w}x{h} must be positive and finite")]
    InvalidShape { w: f64, h: f64 },
    #[error("size jitter {0} must lie in [0, 1)")]
    InvalidSizeJitter(f64),
    #[error("center jitter {0} must be non-negative and finite")]
    InvalidCenterJitter(f64),
    #[error("detection schedule period must be at least 1")]
    ZeroPeriod,
}

/// Nominal rectangle geometry of one sensor and how much it varies:
/// `size_jitter` scales width and height by a uniform factor in
/// `[1 - j, 1 + j]`, `center_jitter` is the standard deviation of the
/// Gaussian center offset in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectShape {
    pub width: f64,
    pub height: f64,
    pub size_jitter: f64,
    pub center_jitter: f64,
}

impl RectShape {
    pub fn new(
        width: f64,
        height: f64,
        size_jitter: f64,
        center_jitter: f64,
    ) -> Result<Self, SimError> {
        if !width.is_finite() || !height.is_finite() || width <= 0.0 || height <= 0.0 {
            return Err(SimError::InvalidShape {
                w: width,
                h: height,
            });
        }
        if !size_jitter.is_finite() || !(0.0..1.0).contains(&size_jitter) {
            return Err(SimError::InvalidSizeJitter(size_jitter));
        }
        if !center_jitter.is_finite() || center_jitter < 0.0 {
            return Err(SimError::InvalidCenterJitter(center_jitter));
        }
        Ok(Self {
            width,
            height,
            size_jitter,
            center_jitter,
        })
    }

    /// Head boxes: 30x36 px nominal, tight placement.
    pub fn head_default() -> Self {
        Self::new(30.0, 36.0, 0.1, 2.0).expect("head shape defaults are valid")
    }

    /// Body boxes sized so the implied head region is 30x36 px nominal;
    /// placement is looser than for head boxes.
    pub fn body_default() -> Self {
        Self::new(30.0 / 0.35, 36.0 / 0.19, 0.1, 6.0).expect("body shape defaults are valid")
    }
}

/// Rectangles reported by both sensors at one frame. A sensor that is not
/// scheduled at the frame reports `None`; a scheduled sensor that saw
/// nothing reports `Some` of an empty list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameDetections {
    pub head: Option<Vec<Rect>>,
    pub body: Option<Vec<Rect>>,
}

/// Per-frame detections over `1..=frame_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSequence {
    frames: Vec<FrameDetections>,
}

impl DetectionSequence {
    pub fn new(frames: Vec<FrameDetections>) -> Self {
        Self { frames }
    }

    pub fn frame_count(&self) -> u32 {
        self.frames.len() as u32
    }

    /// Detections at a 1-based frame.
    pub fn frame(&self, frame: u32) -> Option<&FrameDetections> {
        if frame == 0 {
            return None;
        }
        self.frames.get(frame as usize - 1)
    }

    pub fn frames(&self) -> &[FrameDetections] {
        &self.frames
    }
}

/// Seeded rectangle generator for a head and a body sensor observing the
/// same truth tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSimulator {
    pub head_model: SensorModel,
    pub body_model: SensorModel,
    pub head_shape: RectShape,
    pub body_shape: RectShape,
}

impl DetectionSimulator {
    /// Simulator with default rectangle shapes for both sensors.
    pub fn new(head_model: SensorModel, body_model: SensorModel) -> Self {
        Self {
            head_model,
            body_model,
            head_shape: RectShape::head_default(),
            body_shape: RectShape::body_default(),
        }
    }

    /// Generates detections for every frame of `truth`. Both sensors run
    /// only at frames `1, 1 + every_nth, 1 + 2 * every_nth, ...`; other
    /// frames carry `None` for both sensors.
    pub fn simulate(
        &self,
        truth: &TrackSet,
        seed: u64,
        every_nth: u32,
    ) -> Result<DetectionSequence, SimError> {
        if every_nth == 0 {
            return Err(SimError::ZeroPeriod);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frames = Vec::with_capacity(truth.frame_count() as usize);
        for frame in 1..=truth.frame_count() {
            if (frame - 1) % every_nth != 0 {
                frames.push(FrameDetections::default());
                continue;
            }
            let head = self.sensor_frame(truth, frame, Sensor::Head, &mut rng);
            let body = self.sensor_frame(truth, frame, Sensor::Body, &mut rng);
            frames.push(FrameDetections {
                head: Some(head),
                body: Some(body),
            });
        }
        Ok(DetectionSequence::new(frames))
    }

    fn sensor_frame(
        &self,
        truth: &TrackSet,
        frame: u32,
        sensor: Sensor,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Rect> {
        let (model, shape) = match sensor {
            Sensor::Head => (&self.head_model, &self.head_shape),
            Sensor::Body => (&self.body_model, &self.body_shape),
        };
        let mut rects = Vec::new();
        for track in truth.tracks() {
            let Some(state) = track.state_at(frame) else {
                continue;
            };
            if rng.random::<f64>() >= model.pd {
                continue;
            }
            rects.push(jittered_rect(state.x, state.y, shape, sensor, true, rng));
        }
        let clutter_count = poisson_draw(model.clutter_rate, rng);
        for _ in 0..clutter_count {
            let x = rng.random_range(model.region.x_min..model.region.x_max);
            let y = rng.random_range(model.region.y_min..model.region.y_max);
            rects.push(jittered_rect(x, y, shape, sensor, false, rng));
        }
        rects
    }
}

/// One rectangle around the target point: nominal size scaled by the size
/// jitter, center displaced by the center jitter when `center_noise` is
/// set (object detections yes, clutter no). Head rectangles are centered
/// on the point; body rectangles are placed so their implied head region
/// is centered on it.
fn jittered_rect(
    x: f64,
    y: f64,
    shape: &RectShape,
    sensor: Sensor,
    center_noise: bool,
    rng: &mut ChaCha8Rng,
) -> Rect {
    let scale_w = 1.0 + shape.size_jitter * rng.random_range(-1.0..1.0);
    let scale_h = 1.0 + shape.size_jitter * rng.random_range(-1.0..1.0);
    let w = shape.width * scale_w;
    let h = shape.height * scale_h;
    let (cx, cy) = if center_noise && shape.center_jitter > 0.0 {
        let noise = Normal::new(0.0, shape.center_jitter).expect("jitter is validated");
        (x + noise.sample(rng), y + noise.sample(rng))
    } else {
        (x, y)
    };
    let (chi, eta) = match sensor {
        Sensor::Head => (cx - w / 2.0, cy - h / 2.0),
        // body_to_head puts the head center at (chi + 0.5 w, eta + 0.185 h).
        Sensor::Body => (cx - 0.5 * w, cy - 0.185 * h),
    };
    Rect {
        chi,
        eta,
        w,
        h,
        sensor,
    }
}

fn poisson_draw(rate: f64, rng: &mut ChaCha8Rng) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(rate).expect("rate is validated");
    dist.sample(rng) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{body_to_head, Region};
    use crate::track::{KinematicState, Track};
    use approx::assert_abs_diff_eq;

    fn region() -> Region {
        Region::new(0.0, 400.0, 0.0, 300.0).unwrap()
    }

    fn still_target(label: u32, frames: u32, x: f64, y: f64) -> Track {
        Track::from_states(label, (1..=frames).map(|f| (f, KinematicState::at(x, y)))).unwrap()
    }

    fn exact_simulator(pd: f64, clutter: f64) -> DetectionSimulator {
        let head = SensorModel::new(pd, 1.0, 1.0, clutter, region()).unwrap();
        let body = SensorModel::new(pd, 25.0, 25.0, clutter, region()).unwrap();
        let mut sim = DetectionSimulator::new(head, body);
        sim.head_shape = RectShape::new(30.0, 36.0, 0.0, 0.0).unwrap();
        sim.body_shape = RectShape::new(30.0 / 0.35, 36.0 / 0.19, 0.0, 0.0).unwrap();
        sim
    }

    #[test]
    fn shape_validation() {
        assert!(RectShape::new(0.0, 10.0, 0.1, 1.0).is_err());
        assert!(RectShape::new(10.0, 10.0, 1.0, 1.0).is_err());
        assert!(RectShape::new(10.0, 10.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn certain_detection_without_jitter_is_centered_on_truth() {
        let truth = TrackSet::new(vec![still_target(1, 3, 120.0, 90.0)], 3).unwrap();
        let sim = exact_simulator(1.0, 0.0);
        let seq = sim.simulate(&truth, 5, 1).unwrap();
        assert_eq!(seq.frame_count(), 3);
        for frame in 1..=3 {
            let dets = seq.frame(frame).unwrap();
            let head = dets.head.as_ref().unwrap();
            let body = dets.body.as_ref().unwrap();
            assert_eq!(head.len(), 1);
            assert_eq!(body.len(), 1);
            assert_abs_diff_eq!(head[0].center()[0], 120.0, epsilon = 1e-9);
            assert_abs_diff_eq!(head[0].center()[1], 90.0, epsilon = 1e-9);
            assert_eq!(head[0].sensor, Sensor::Head);
            assert_eq!(body[0].sensor, Sensor::Body);
        }
    }

    #[test]
    fn body_rect_converts_back_onto_truth() {
        let truth = TrackSet::new(vec![still_target(1, 1, 200.0, 150.0)], 1).unwrap();
        let sim = exact_simulator(1.0, 0.0);
        let seq = sim.simulate(&truth, 9, 1).unwrap();
        let body = &seq.frame(1).unwrap().body.as_ref().unwrap()[0];
        let implied = body_to_head(body);
        assert_abs_diff_eq!(implied.center()[0], 200.0, epsilon = 1e-9);
        assert_abs_diff_eq!(implied.center()[1], 150.0, epsilon = 1e-9);
        assert_abs_diff_eq!(implied.w, 30.0, epsilon = 1e-9);
        assert_abs_diff_eq!(implied.h, 36.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_detection_probability_yields_only_clutter() {
        let truth = TrackSet::new(vec![still_target(1, 5, 100.0, 100.0)], 5).unwrap();
        let sim = exact_simulator(0.0, 0.0);
        let seq = sim.simulate(&truth, 1, 1).unwrap();
        for frame in 1..=5 {
            assert!(seq.frame(frame).unwrap().head.as_ref().unwrap().is_empty());
            assert!(seq.frame(frame).unwrap().body.as_ref().unwrap().is_empty());
        }
    }

    #[test]
    fn same_seed_reproduces_bitwise_identical_output() {
        let truth = TrackSet::new(
            vec![
                still_target(1, 50, 80.0, 60.0),
                still_target(2, 50, 300.0, 200.0),
            ],
            50,
        )
        .unwrap();
        let head = SensorModel::head(2.0, region());
        let body = SensorModel::body(2.0, region());
        let sim = DetectionSimulator::new(head, body);
        let a = sim.simulate(&truth, 1234, 1).unwrap();
        let b = sim.simulate(&truth, 1234, 1).unwrap();
        assert_eq!(a, b);
        let c = sim.simulate(&truth, 1235, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn schedule_skips_frames_between_updates() {
        let truth = TrackSet::new(vec![still_target(1, 9, 100.0, 100.0)], 9).unwrap();
        let sim = exact_simulator(1.0, 0.0);
        let seq = sim.simulate(&truth, 7, 4).unwrap();
        for frame in 1..=9u32 {
            let dets = seq.frame(frame).unwrap();
            if (frame - 1) % 4 == 0 {
                assert!(dets.head.is_some(), "frame {frame} should be scheduled");
            } else {
                assert!(dets.head.is_none(), "frame {frame} should be skipped");
                assert!(dets.body.is_none());
            }
        }
        assert!(sim.simulate(&truth, 7, 0).is_err());
    }

    #[test]
    fn clutter_count_tracks_rate() {
        let truth = TrackSet::empty(400);
        let head = SensorModel::new(0.0, 1.0, 1.0, 3.0, region()).unwrap();
        let body = SensorModel::new(0.0, 25.0, 25.0, 0.0, region()).unwrap();
        let sim = DetectionSimulator::new(head, body);
        let seq = sim.simulate(&truth, 99, 1).unwrap();
        let total: usize = (1..=400)
            .map(|f| seq.frame(f).unwrap().head.as_ref().unwrap().len())
            .sum();
        let mean = total as f64 / 400.0;
        assert!((2.5..3.5).contains(&mean), "mean clutter {mean}");
        for frame in 1..=400 {
            for rect in seq.frame(frame).unwrap().head.as_ref().unwrap() {
                let [cx, cy] = rect.center();
                assert!(region().contains(cx, cy));
            }
        }
    }

    #[test]
    fn detection_rate_tracks_probability() {
        let truth = TrackSet::new(vec![still_target(1, 1000, 200.0, 150.0)], 1000).unwrap();
        let sim = exact_simulator(0.58, 0.0);
        let seq = sim.simulate(&truth, 3, 1).unwrap();
        let hits: usize = (1..=1000)
            .map(|f| seq.frame(f).unwrap().head.as_ref().unwrap().len())
            .sum();
        let rate = hits as f64 / 1000.0;
        assert!((0.53..0.63).contains(&rate), "hit rate {rate}");
    }
}
