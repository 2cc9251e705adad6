//! Multi-Bernoulli tracking over rectangle detections.
//!
//! Each potential object is a Bernoulli component: an existence
//! probability plus a state density. Two likelihood modes share the same
//! recursion. In [`LikelihoodMode::Imprecise`] the density is a particle
//! cloud and rectangles act as soft position constraints; in
//! [`LikelihoodMode::Gaussian`] the density is a single Gaussian and
//! rectangles are collapsed to Gaussian point measurements.
//!
//! When several components compete for the same measurements, each
//! component treats its rivals' expected detections as additional clutter,
//! which suppresses double-counting without a joint update. New components
//! are spawned from detections no existing component gates.

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::detection::{
    body_to_head, likelihood_imprecise, rect_to_point, Rect, Sensor, SensorModel,
};
use crate::track::KinematicState;
use crate::trackers::{
    innovation, innovation_density, joseph_update, mahalanobis2, GaussianState, MotionModel, Report,
};

/// Which single-object likelihood the tracker runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodMode {
    /// Rectangles as imprecise measurements over a particle density.
    Imprecise,
    /// Rectangles as Gaussian point measurements over a Gaussian density.
    Gaussian,
}

/// Tuning knobs of the multi-Bernoulli recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliConfig {
    /// Per-frame survival probability of an existing object.
    pub survival_prob: f64,
    /// Existence probability given to a newborn component.
    pub birth_existence: f64,
    /// Components below this existence are dropped.
    pub prune_existence: f64,
    /// Components above this existence are reported as tracks.
    pub report_existence: f64,
    /// Existence is capped here so misses can always lower it.
    pub max_existence: f64,
    /// Squared-Mahalanobis gate for Gaussian-mode association.
    pub gate_chi2: f64,
    /// Predicted-likelihood gate for imprecise-mode association.
    pub likelihood_gate: f64,
    /// Particles per component in imprecise mode.
    pub particles_per_track: usize,
    /// Standard deviation of newborn velocity, px/s.
    pub birth_velocity_std: f64,
    /// Lower bound on the clutter intensity used in updates.
    pub clutter_floor: f64,
    /// Birth candidates closer than this merge into one birth.
    pub birth_merge_radius: f64,
    /// No birth is spawned within this distance of a live component.
    pub birth_suppression_radius: f64,
    /// Hard cap on simultaneous components.
    pub max_tracks: usize,
}

impl Default for BernoulliConfig {
    fn default() -> Self {
        Self {
            survival_prob: 0.99,
            birth_existence: 0.35,
            prune_existence: 0.01,
            report_existence: 0.5,
            max_existence: 0.999,
            gate_chi2: 13.8,
            likelihood_gate: 1e-8,
            particles_per_track: 500,
            birth_velocity_std: 30.0,
            clutter_floor: 1e-9,
            birth_merge_radius: 25.0,
            birth_suppression_radius: 15.0,
            max_tracks: 50,
        }
    }
}

/// Weighted state sample of a particle density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub weight: f64,
    pub state: Vector4<f64>,
}

/// State density of one Bernoulli component.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackDensity {
    Gaussian(GaussianState),
    Particles(Vec<Particle>),
}

/// One Bernoulli component: a labeled potential object.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliTrack {
    pub label: u32,
    pub existence: f64,
    pub density: TrackDensity,
}

impl BernoulliTrack {
    /// Expected state under the component's density.
    pub fn point_estimate(&self) -> KinematicState {
        match &self.density {
            TrackDensity::Gaussian(g) => g.kinematic(),
            TrackDensity::Particles(particles) => {
                let mut mean = Vector4::zeros();
                for p in particles {
                    mean += p.weight * p.state;
                }
                KinematicState::new(mean[0], mean[1], mean[2], mean[3])
            }
        }
    }
}

/// Survival-and-motion prediction of one component: existence shrinks by
/// the survival probability and the density moves through the motion
/// model. Particle densities draw their process noise from `rng`.
pub fn predict_track(
    track: &mut BernoulliTrack,
    motion: &MotionModel,
    survival_prob: f64,
    rng: &mut ChaCha8Rng,
) {
    track.existence *= survival_prob;
    let f = motion.transition_matrix();
    match &mut track.density {
        TrackDensity::Gaussian(g) => {
            g.mean = f * g.mean;
            g.cov = f * g.cov * f.transpose() + motion.process_noise();
        }
        TrackDensity::Particles(particles) => {
            let chol = nalgebra::Cholesky::new(motion.process_noise())
                .expect("process noise is positive definite")
                .l();
            let unit = Normal::new(0.0, 1.0).expect("unit normal is valid");
            for p in particles.iter_mut() {
                let n = Vector4::new(
                    unit.sample(rng),
                    unit.sample(rng),
                    unit.sample(rng),
                    unit.sample(rng),
                );
                p.state = f * p.state + chol * n;
            }
        }
    }
}

/// Predicted likelihood of each rectangle under the component's density,
/// with a gate decision per rectangle.
fn rect_likelihoods(
    track: &BernoulliTrack,
    dets: &[Rect],
    model: &SensorModel,
    config: &BernoulliConfig,
) -> (Vec<f64>, Vec<bool>) {
    let mut lik = Vec::with_capacity(dets.len());
    let mut gated = Vec::with_capacity(dets.len());
    for rect in dets {
        match &track.density {
            TrackDensity::Gaussian(g) => {
                let m = rect_to_point(rect);
                let inn = innovation(g, m.z, m.var);
                let inside = mahalanobis2(&inn) <= config.gate_chi2;
                lik.push(if inside {
                    innovation_density(&inn)
                } else {
                    0.0
                });
                gated.push(inside);
            }
            TrackDensity::Particles(particles) => {
                let mut value = 0.0;
                for p in particles {
                    let state = KinematicState::new(p.state[0], p.state[1], p.state[2], p.state[3]);
                    value += p.weight * likelihood_imprecise(rect, &state, model);
                }
                let inside = value > config.likelihood_gate;
                lik.push(if inside { value } else { 0.0 });
                gated.push(inside);
            }
        }
    }
    (lik, gated)
}

/// Measurement update of one component against one sensor's rectangles.
/// `extra_clutter[j]` is added to the clutter intensity at rectangle `j`
/// (rival components' expected detections). Returns which rectangles the
/// component gated.
fn update_track_inner(
    track: &mut BernoulliTrack,
    dets: &[Rect],
    model: &SensorModel,
    config: &BernoulliConfig,
    extra_clutter: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let (lik, gated) = rect_likelihoods(track, dets, model, config);
    let clutter_at = |j: usize| {
        (model.clutter_intensity(dets[j].center()) + extra_clutter[j]).max(config.clutter_floor)
    };

    let mut ratio_sum = 0.0;
    for j in 0..dets.len() {
        if gated[j] {
            ratio_sum += lik[j] / clutter_at(j);
        }
    }
    let delta = model.pd * (1.0 - ratio_sum);
    let prior = track.existence;
    track.existence =
        ((prior * (1.0 - delta)) / (1.0 - prior * delta)).clamp(0.0, config.max_existence);

    match &mut track.density {
        TrackDensity::Gaussian(g) => {
            // Collapse the miss/assignment mixture to its strongest
            // hypothesis.
            let mut best_weight = 1.0 - model.pd;
            let mut best = None;
            for j in 0..dets.len() {
                if !gated[j] {
                    continue;
                }
                let weight = model.pd * lik[j] / clutter_at(j);
                if weight > best_weight {
                    best_weight = weight;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                let m = rect_to_point(&dets[j]);
                let inn = innovation(g, m.z, m.var);
                *g = joseph_update(g, &inn, m.var);
            }
        }
        TrackDensity::Particles(particles) => {
            let mut total = 0.0;
            let mut weights = Vec::with_capacity(particles.len());
            for p in particles.iter() {
                let state = KinematicState::new(p.state[0], p.state[1], p.state[2], p.state[3]);
                let mut factor = 1.0 - model.pd;
                for j in 0..dets.len() {
                    if gated[j] {
                        factor += model.pd * likelihood_imprecise(&dets[j], &state, model)
                            / clutter_at(j);
                    }
                }
                let w = p.weight * factor;
                weights.push(w);
                total += w;
            }
            if total > 0.0 {
                for (p, w) in particles.iter_mut().zip(&weights) {
                    p.weight = w / total;
                }
                let ess = 1.0 / particles.iter().map(|p| p.weight * p.weight).sum::<f64>();
                if ess < particles.len() as f64 / 2.0 {
                    systematic_resample(particles, rng);
                }
            }
        }
    }
    gated
}

/// Single-component measurement update with no rival components.
pub fn update_track(
    track: &mut BernoulliTrack,
    dets: &[Rect],
    model: &SensorModel,
    config: &BernoulliConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    update_track_inner(track, dets, model, config, &vec![0.0; dets.len()], rng)
}

fn systematic_resample(particles: &mut Vec<Particle>, rng: &mut ChaCha8Rng) {
    let n = particles.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cumulative = particles[0].weight;
    let mut source = 0usize;
    let mut resampled = Vec::with_capacity(n);
    for _ in 0..n {
        while u > cumulative && source + 1 < n {
            source += 1;
            cumulative += particles[source].weight;
        }
        resampled.push(Particle {
            weight: step,
            state: particles[source].state,
        });
        u += step;
    }
    *particles = resampled;
}

/// Multi-object tracker maintaining a bank of Bernoulli components.
#[derive(Debug, Clone)]
pub struct MultiBernoulliTracker {
    mode: LikelihoodMode,
    config: BernoulliConfig,
    motion: MotionModel,
    head_model: SensorModel,
    body_model: SensorModel,
    tracks: Vec<BernoulliTrack>,
    rng: ChaCha8Rng,
    next_label: u32,
    frame: u32,
    reports: Vec<Report>,
}

impl MultiBernoulliTracker {
    pub fn new(
        mode: LikelihoodMode,
        config: BernoulliConfig,
        motion: MotionModel,
        head_model: SensorModel,
        body_model: SensorModel,
        seed: u64,
    ) -> Self {
        Self {
            mode,
            config,
            motion,
            head_model,
            body_model,
            tracks: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_label: 1,
            frame: 0,
            reports: Vec::new(),
        }
    }

    pub fn mode(&self) -> LikelihoodMode {
        self.mode
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn tracks(&self) -> &[BernoulliTrack] {
        &self.tracks
    }

    /// All reports emitted so far, one per confirmed component per frame.
    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    /// Advances one frame. `None` means the sensor was not scheduled;
    /// `Some` of an empty list means it ran and reported nothing. Body
    /// rectangles are taken raw and converted to head regions internally.
    pub fn step(&mut self, head: Option<&[Rect]>, body: Option<&[Rect]>) {
        self.frame += 1;
        for track in &mut self.tracks {
            predict_track(
                track,
                &self.motion,
                self.config.survival_prob,
                &mut self.rng,
            );
        }

        let mut birth_candidates: Vec<Rect> = Vec::new();
        if let Some(dets) = head {
            let unused = self.sensor_pass(dets, Sensor::Head);
            birth_candidates.extend(unused);
        }
        if let Some(dets) = body {
            let converted: Vec<Rect> = dets.iter().map(body_to_head).collect();
            let unused = self.sensor_pass(&converted, Sensor::Body);
            birth_candidates.extend(unused);
        }
        self.spawn_births(&birth_candidates);

        self.tracks
            .retain(|t| t.existence >= self.config.prune_existence);
        if self.tracks.len() > self.config.max_tracks {
            self.tracks.sort_by(|a, b| {
                b.existence
                    .partial_cmp(&a.existence)
                    .unwrap()
                    .then(a.label.cmp(&b.label))
            });
            self.tracks.truncate(self.config.max_tracks);
            self.tracks.sort_by_key(|t| t.label);
        }

        for track in &self.tracks {
            if track.existence > self.config.report_existence {
                self.reports.push(Report {
                    frame: self.frame,
                    label: track.label,
                    state: track.point_estimate(),
                });
            }
        }
    }

    /// Updates every component against one sensor's rectangles (already in
    /// head-region form) and returns the rectangles no component gated.
    fn sensor_pass(&mut self, dets: &[Rect], sensor: Sensor) -> Vec<Rect> {
        let model = match sensor {
            Sensor::Head => self.head_model,
            Sensor::Body => self.body_model,
        };
        let count = self.tracks.len();
        let mut lik = Vec::with_capacity(count);
        for track in &self.tracks {
            lik.push(rect_likelihoods(track, dets, &model, &self.config));
        }

        let mut used = vec![false; dets.len()];
        for i in 0..count {
            // Rivals' expected detections act as extra clutter.
            let mut extra = vec![0.0; dets.len()];
            for (k, track) in self.tracks.iter().enumerate() {
                if k == i {
                    continue;
                }
                for (slot, l) in extra.iter_mut().zip(&lik[k].0) {
                    *slot += track.existence * model.pd * l;
                }
            }
            let gated = update_track_inner(
                &mut self.tracks[i],
                dets,
                &model,
                &self.config,
                &extra,
                &mut self.rng,
            );
            for (j, flag) in gated.iter().enumerate() {
                if *flag {
                    used[j] = true;
                }
            }
        }
        dets.iter()
            .zip(&used)
            .filter(|(_, used)| !**used)
            .map(|(rect, _)| *rect)
            .collect()
    }

    fn spawn_births(&mut self, candidates: &[Rect]) {
        let mut centers: Vec<[f64; 2]> = Vec::new();
        for rect in candidates {
            let [cx, cy] = rect.center();
            let near_track = self.tracks.iter().any(|t| {
                let e = t.point_estimate();
                t.existence > 0.2
                    && (e.x - cx).hypot(e.y - cy) < self.config.birth_suppression_radius
            });
            if near_track {
                continue;
            }
            let near_birth = centers
                .iter()
                .any(|c| (c[0] - cx).hypot(c[1] - cy) < self.config.birth_merge_radius);
            if near_birth {
                continue;
            }
            centers.push([cx, cy]);
            let density = match self.mode {
                LikelihoodMode::Gaussian => {
                    let m = rect_to_point(rect);
                    TrackDensity::Gaussian(GaussianState::at(
                        cx,
                        cy,
                        m.var,
                        self.config.birth_velocity_std * self.config.birth_velocity_std,
                    ))
                }
                LikelihoodMode::Imprecise => {
                    let n = self.config.particles_per_track;
                    let vel = Normal::new(0.0, self.config.birth_velocity_std)
                        .expect("velocity deviation is valid");
                    let particles = (0..n)
                        .map(|_| {
                            let x = self.rng.random_range(rect.chi..rect.chi + rect.w);
                            let y = self.rng.random_range(rect.eta..rect.eta + rect.h);
                            Particle {
                                weight: 1.0 / n as f64,
                                state: Vector4::new(
                                    x,
                                    vel.sample(&mut self.rng),
                                    y,
                                    vel.sample(&mut self.rng),
                                ),
                            }
                        })
                        .collect();
                    TrackDensity::Particles(particles)
                }
            };
            self.tracks.push(BernoulliTrack {
                label: self.next_label,
                existence: self.config.birth_existence,
                density,
            });
            self.next_label += 1;
        }
    }
}
