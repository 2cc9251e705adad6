//! Rectangular detections and single-object detection likelihoods.
//!
//! Detectors report axis-aligned rectangles: a head detector whose boxes
//! frame the head directly, and a full-body detector whose boxes are first
//! mapped to an equivalent head region by [`body_to_head`]. Two likelihood
//! models connect a rectangle to a point state: [`likelihood_imprecise`]
//! treats the rectangle as an imprecise measurement (uniform over the box,
//! blurred by detector noise), [`likelihood_gaussian`] collapses it to a
//! Gaussian point measurement via [`rect_to_point`].

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::track::KinematicState;

/// Errors from constructing detection-model types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("rectangle size {w}x{h} must be positive and finite")]
    InvalidSize { w: f64, h: f64 },
    #[error("rectangle corner ({chi}, {eta}) must be finite")]
    InvalidCorner { chi: f64, eta: f64 },
    #[error("region bounds must be finite with x_min < x_max and y_min < y_max")]
    InvalidRegion,
    #[error("detection probability {0} must lie in [0, 1]")]
    InvalidDetectionProbability(f64),
    #[error("noise deviation {0} must be non-negative and finite")]
    InvalidNoise(f64),
    #[error("clutter rate {0} must be non-negative and finite")]
    InvalidClutterRate(f64),
}

/// Which detector produced a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sensor {
    Head,
    Body,
}

impl Sensor {
    /// Numeric code used in detection files: head 1, body 2.
    pub fn code(self) -> u8 {
        match self {
            Sensor::Head => 1,
            Sensor::Body => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Sensor::Head),
            2 => Some(Sensor::Body),
            _ => None,
        }
    }
}

/// Axis-aligned detection rectangle: top-left corner `(chi, eta)`, width
/// `w` and height `h`, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub chi: f64,
    pub eta: f64,
    pub w: f64,
    pub h: f64,
    pub sensor: Sensor,
}

impl Rect {
    pub fn new(chi: f64, eta: f64, w: f64, h: f64, sensor: Sensor) -> Result<Self, DetectionError> {
        if !chi.is_finite() || !eta.is_finite() {
            return Err(DetectionError::InvalidCorner { chi, eta });
        }
        if !w.is_finite() || !h.is_finite() || w <= 0.0 || h <= 0.0 {
            return Err(DetectionError::InvalidSize { w, h });
        }
        Ok(Self {
            chi,
            eta,
            w,
            h,
            sensor,
        })
    }

    pub fn center(&self) -> [f64; 2] {
        [self.chi + self.w / 2.0, self.eta + self.h / 2.0]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.chi && x <= self.chi + self.w && y >= self.eta && y <= self.eta + self.h
    }
}

/// Maps a full-body rectangle to the head region it implies. The head sits
/// in the upper middle of the body box: offset `(0.325 w, 0.09 h)` from the
/// corner with size `(0.35 w, 0.19 h)`. The result is tagged as a head
/// rectangle.
pub fn body_to_head(body: &Rect) -> Rect {
    Rect {
        chi: body.chi + 0.325 * body.w,
        eta: body.eta + 0.09 * body.h,
        w: 0.35 * body.w,
        h: 0.19 * body.h,
        sensor: Sensor::Head,
    }
}

/// A rectangle collapsed to a Gaussian point measurement: the center, with
/// independent per-axis variances `(w/6)^2` and `(h/6)^2` so the box spans
/// three standard deviations each way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMeasurement {
    pub z: [f64; 2],
    pub var: [f64; 2],
}

pub fn rect_to_point(rect: &Rect) -> PointMeasurement {
    PointMeasurement {
        z: rect.center(),
        var: [
            (rect.w / 6.0) * (rect.w / 6.0),
            (rect.h / 6.0) * (rect.h / 6.0),
        ],
    }
}

/// Axis-aligned rectangular region of the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, DetectionError> {
        let all_finite =
            x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite();
        if !all_finite || x_min >= x_max || y_min >= y_max {
            return Err(DetectionError::InvalidRegion);
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Detection characteristics of one sensor: detection probability, corner
/// noise deviations and a uniform Poisson clutter model over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub pd: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub clutter_rate: f64,
    pub region: Region,
}

impl SensorModel {
    pub fn new(
        pd: f64,
        sigma_x: f64,
        sigma_y: f64,
        clutter_rate: f64,
        region: Region,
    ) -> Result<Self, DetectionError> {
        if !pd.is_finite() || !(0.0..=1.0).contains(&pd) {
            return Err(DetectionError::InvalidDetectionProbability(pd));
        }
        for sigma in [sigma_x, sigma_y] {
            if !sigma.is_finite() || sigma < 0.0 {
                return Err(DetectionError::InvalidNoise(sigma));
            }
        }
        if !clutter_rate.is_finite() || clutter_rate < 0.0 {
            return Err(DetectionError::InvalidClutterRate(clutter_rate));
        }
        Ok(Self {
            pd,
            sigma_x,
            sigma_y,
            clutter_rate,
            region,
        })
    }

    /// Typical head detector: reliable corners (1 px), moderate detection
    /// probability.
    pub fn head(clutter_rate: f64, region: Region) -> Self {
        Self::new(0.58, 1.0, 1.0, clutter_rate, region).expect("head defaults are valid")
    }

    /// Typical body detector: noisy corners (25 px), slightly lower
    /// detection probability.
    pub fn body(clutter_rate: f64, region: Region) -> Self {
        Self::new(0.52, 25.0, 25.0, clutter_rate, region).expect("body defaults are valid")
    }

    /// Clutter intensity at a point: uniform `rate / area` inside the
    /// region, zero outside.
    pub fn clutter_intensity(&self, pos: [f64; 2]) -> f64 {
        if self.region.contains(pos[0], pos[1]) {
            self.clutter_rate / self.region.area()
        } else {
            0.0
        }
    }
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that a noisy interval `[lower, upper]` (endpoints blurred
/// by `sigma`) covers the point `v`. With `sigma = 0` this is the exact
/// indicator of `lower <= v <= upper`.
fn interval_cover_probability(v: f64, lower: f64, upper: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        if (lower..=upper).contains(&v) {
            1.0
        } else {
            0.0
        }
    } else {
        phi((v - lower) / sigma) - phi((v - upper) / sigma)
    }
}

/// Likelihood of the rectangle as an imprecise measurement of the state's
/// position: the box must cover the position, with corner noise `sigma_x`,
/// `sigma_y` from the sensor model softening the box edges. Separable per
/// axis; in the noise-free limit it is the indicator of the position lying
/// inside the box.
pub fn likelihood_imprecise(rect: &Rect, state: &KinematicState, model: &SensorModel) -> f64 {
    let fx = interval_cover_probability(state.x, rect.chi, rect.chi + rect.w, model.sigma_x);
    let fy = interval_cover_probability(state.y, rect.eta, rect.eta + rect.h, model.sigma_y);
    fx * fy
}

/// Likelihood of a Gaussian point measurement given the state's position:
/// a bivariate normal density with independent axes.
pub fn likelihood_gaussian(m: &PointMeasurement, state: &KinematicState) -> f64 {
    let dx = state.x - m.z[0];
    let dy = state.y - m.z[1];
    let quad = dx * dx / m.var[0] + dy * dy / m.var[1];
    (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * (m.var[0] * m.var[1]).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn region() -> Region {
        Region::new(0.0, 400.0, 0.0, 300.0).unwrap()
    }

    fn head_rect(chi: f64, eta: f64, w: f64, h: f64) -> Rect {
        Rect::new(chi, eta, w, h, Sensor::Head).unwrap()
    }

    #[test]
    fn rect_validation() {
        assert!(Rect::new(0.0, 0.0, -1.0, 5.0, Sensor::Head).is_err());
        assert!(Rect::new(0.0, 0.0, 5.0, 0.0, Sensor::Body).is_err());
        assert!(Rect::new(f64::NAN, 0.0, 5.0, 5.0, Sensor::Head).is_err());
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(10.0, 10.0, 0.0, 5.0).is_err());
        assert!(Region::new(0.0, 5.0, 9.0, 2.0).is_err());
        assert_eq!(region().area(), 120000.0);
    }

    #[test]
    fn sensor_codes_round_trip() {
        for sensor in [Sensor::Head, Sensor::Body] {
            assert_eq!(Sensor::from_code(sensor.code()), Some(sensor));
        }
        assert_eq!(Sensor::from_code(3), None);
    }

    #[test]
    fn body_to_head_places_head_in_upper_middle() {
        let body = Rect::new(100.0, 200.0, 80.0, 200.0, Sensor::Body).unwrap();
        let head = body_to_head(&body);
        assert_eq!(head.chi, 126.0);
        assert_eq!(head.eta, 218.0);
        assert_eq!(head.w, 28.0);
        assert_eq!(head.h, 38.0);
        assert_eq!(head.sensor, Sensor::Head);
    }

    #[test]
    fn body_to_head_ratios_at_unit_scale() {
        let body = Rect::new(0.0, 0.0, 100.0, 100.0, Sensor::Body).unwrap();
        let head = body_to_head(&body);
        assert_eq!(head.chi, 32.5);
        assert_eq!(head.eta, 9.0);
        assert_eq!(head.w, 35.0);
        assert_eq!(head.h, 19.0);
    }

    #[test]
    fn body_to_head_centers_align_horizontally() {
        let body = Rect::new(37.0, 12.0, 91.0, 180.0, Sensor::Body).unwrap();
        let head = body_to_head(&body);
        assert_abs_diff_eq!(head.center()[0], body.center()[0], epsilon = 1e-12);
    }

    #[test]
    fn rect_to_point_takes_center_and_sixth_sigmas() {
        let m = rect_to_point(&head_rect(10.0, 20.0, 30.0, 36.0));
        assert_eq!(m.z, [25.0, 38.0]);
        assert_eq!(m.var, [25.0, 36.0]);
    }

    #[test]
    fn noise_free_imprecise_likelihood_is_indicator() {
        let mut model = SensorModel::head(0.0, region());
        model.sigma_x = 0.0;
        model.sigma_y = 0.0;
        let rect = head_rect(10.0, 10.0, 20.0, 20.0);
        assert_eq!(
            likelihood_imprecise(&rect, &KinematicState::at(15.0, 25.0), &model),
            1.0
        );
        assert_eq!(
            likelihood_imprecise(&rect, &KinematicState::at(31.0, 15.0), &model),
            0.0
        );
        // Boundary counts as inside.
        assert_eq!(
            likelihood_imprecise(&rect, &KinematicState::at(10.0, 30.0), &model),
            1.0
        );
    }

    #[test]
    fn imprecise_likelihood_decreases_away_from_box() {
        let model = SensorModel::head(0.0, region());
        let rect = head_rect(100.0, 100.0, 30.0, 36.0);
        let inside = likelihood_imprecise(&rect, &KinematicState::at(115.0, 118.0), &model);
        let near = likelihood_imprecise(&rect, &KinematicState::at(131.0, 118.0), &model);
        let far = likelihood_imprecise(&rect, &KinematicState::at(140.0, 118.0), &model);
        assert!(inside > near);
        assert!(near > far);
        assert!(inside > 0.99);
    }

    #[test]
    fn imprecise_likelihood_approaches_indicator_as_noise_vanishes() {
        let region = region();
        let rect = head_rect(50.0, 50.0, 30.0, 36.0);
        let state = KinematicState::at(60.0, 60.0);
        let mut prev = 0.0;
        for sigma in [4.0, 1.0, 0.25, 0.01] {
            let model = SensorModel::new(0.58, sigma, sigma, 0.0, region).unwrap();
            let val = likelihood_imprecise(&rect, &state, &model);
            assert!(val >= prev);
            prev = val;
        }
        assert_abs_diff_eq!(prev, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gaussian_likelihood_peaks_at_center() {
        let rect = head_rect(0.0, 0.0, 30.0, 36.0);
        let m = rect_to_point(&rect);
        let peak = likelihood_gaussian(&m, &KinematicState::at(15.0, 18.0));
        assert_abs_diff_eq!(
            peak,
            1.0 / (2.0 * std::f64::consts::PI * 5.0 * 6.0),
            epsilon = 1e-12
        );
        let off = likelihood_gaussian(&m, &KinematicState::at(20.0, 18.0));
        assert!(off < peak);
    }

    #[test]
    fn gaussian_likelihood_integrates_to_one() {
        let rect = head_rect(40.0, 60.0, 30.0, 36.0);
        let m = rect_to_point(&rect);
        // Simpson quadrature over +-6 sigma on each axis.
        let steps = 120usize;
        let (sx, sy) = (m.var[0].sqrt(), m.var[1].sqrt());
        let (x0, y0) = (m.z[0] - 6.0 * sx, m.z[1] - 6.0 * sy);
        let (hx, hy) = (12.0 * sx / steps as f64, 12.0 * sy / steps as f64);
        let weight = |i: usize| {
            if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut integral = 0.0;
        for i in 0..=steps {
            for j in 0..=steps {
                let state = KinematicState::at(x0 + i as f64 * hx, y0 + j as f64 * hy);
                integral += weight(i) * weight(j) * likelihood_gaussian(&m, &state);
            }
        }
        integral *= hx * hy / 9.0;
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sensor_model_validation() {
        assert!(SensorModel::new(1.2, 1.0, 1.0, 0.0, region()).is_err());
        assert!(SensorModel::new(0.5, -1.0, 1.0, 0.0, region()).is_err());
        assert!(SensorModel::new(0.5, 1.0, 1.0, -2.0, region()).is_err());
    }

    #[test]
    fn clutter_intensity_is_uniform_inside_region() {
        let model = SensorModel::head(6.0, region());
        assert_abs_diff_eq!(
            model.clutter_intensity([10.0, 10.0]),
            6.0 / 120000.0,
            epsilon = 1e-15
        );
        assert_eq!(model.clutter_intensity([-5.0, 10.0]), 0.0);
    }
}
