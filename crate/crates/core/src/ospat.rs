//! Sequence-level track evaluation.
//!
//! Estimated tracks carry arbitrary labels, so before per-frame scoring
//! they are matched globally to the truth tracks by a minimum-cost
//! assignment over time-summed positional error. Matched tracks inherit
//! the truth label, surplus tracks get fresh labels, and every frame is
//! then scored with the labeled-set OSPA distance of [`crate::ospa`].
//!
//! Evaluation can run over the whole sequence at once or over
//! non-overlapping segments, re-matching tracks per segment. Per-segment
//! matching forgives identity switches at segment boundaries, so shorter
//! segments can only lower the score of a sequence with label swaps.

use thiserror::Error;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::ospa::{localisation_distance, ospa_labeled_sets, pow_p, MetricError, MetricParams};
use crate::track::{Track, TrackError, TrackSet};

/// Errors from the sequence evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("truth covers {truth} frames but estimate covers {est}")]
    FrameCountMismatch { truth: u32, est: u32 },
    #[error("segment length must be at least 1")]
    ZeroSegmentLength,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Track(#[from] TrackError),
}

/// How often the track-to-truth matching is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelingScope {
    /// One matching over the whole sequence, reused for every segment.
    Global,
    /// An independent matching per segment.
    PerSegment,
}

/// Mean score over one segment of frames (both bounds inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentScore {
    pub start_frame: u32,
    pub end_frame: u32,
    pub mean: f64,
}

/// Per-frame distances plus aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    per_frame: Vec<f64>,
    segments: Vec<SegmentScore>,
    time_average: f64,
}

impl ScoreSeries {
    fn new(per_frame: Vec<f64>, segments: Vec<SegmentScore>) -> Self {
        let time_average = if per_frame.is_empty() {
            0.0
        } else {
            per_frame.iter().sum::<f64>() / per_frame.len() as f64
        };
        Self {
            per_frame,
            segments,
            time_average,
        }
    }

    /// Distance at each frame, index 0 holding frame 1.
    pub fn per_frame(&self) -> &[f64] {
        &self.per_frame
    }

    /// Distance at a 1-based frame.
    pub fn value_at(&self, frame: u32) -> Option<f64> {
        if frame == 0 {
            return None;
        }
        self.per_frame.get(frame as usize - 1).copied()
    }

    pub fn segments(&self) -> &[SegmentScore] {
        &self.segments
    }

    /// Mean of the per-frame distances over the whole sequence.
    pub fn time_average(&self) -> f64 {
        self.time_average
    }
}

/// Cost of explaining truth track `truth` by estimated track `est`: over
/// the union of their frames, the cutoff positional distance (to the power
/// `p`) where both exist and the full cutoff (to the power `p`) where
/// exactly one does. Labels play no role here.
pub fn track_assignment_cost(truth: &Track, est: &Track, params: &MetricParams) -> f64 {
    let missing = pow_p(params.c, params.p);
    let mut cost = 0.0;
    for (frame, ts) in truth.states() {
        match est.state_at(*frame) {
            Some(es) => {
                let d = localisation_distance(ts, es, params.p_prime).min(params.c);
                cost += pow_p(d, params.p);
            }
            None => cost += missing,
        }
    }
    for frame in est.states().keys() {
        if !truth.exists_at(*frame) {
            cost += missing;
        }
    }
    cost
}

/// Matches estimated tracks to truth tracks by minimum total
/// [`track_assignment_cost`] and rewrites their labels: matched tracks take
/// the truth label, unmatched ones get fresh labels past the largest truth
/// label, assigned in ascending order of their original labels.
pub fn label_estimated_tracks(
    truth: &TrackSet,
    est: &TrackSet,
    params: &MetricParams,
) -> Result<TrackSet, PipelineError> {
    if truth.frame_count() != est.frame_count() {
        return Err(PipelineError::FrameCountMismatch {
            truth: truth.frame_count(),
            est: est.frame_count(),
        });
    }
    if est.is_empty() {
        return Ok(est.clone());
    }
    let costs = CostMatrix::from_fn(truth.tracks().len(), est.tracks().len(), |r, c| {
        track_assignment_cost(&truth.tracks()[r], &est.tracks()[c], params)
    })
    .expect("track costs are finite");
    let matching = solve_assignment(&costs);

    let mut mapping = std::collections::BTreeMap::new();
    for &(truth_idx, est_idx) in &matching.pairs {
        mapping.insert(
            est.tracks()[est_idx].label(),
            truth.tracks()[truth_idx].label(),
        );
    }
    let mut fresh = truth.max_label();
    for track in est.tracks() {
        mapping.entry(track.label()).or_insert_with(|| {
            fresh += 1;
            fresh
        });
    }
    Ok(est.relabel(&mapping)?)
}

fn score_frames(
    truth: &TrackSet,
    relabeled: &TrackSet,
    params: &MetricParams,
) -> Result<Vec<f64>, PipelineError> {
    let mut per_frame = Vec::with_capacity(truth.frame_count() as usize);
    for frame in 1..=truth.frame_count() {
        let x = truth.labeled_set_at(frame)?;
        let y = relabeled.labeled_set_at(frame)?;
        per_frame.push(ospa_labeled_sets(&x, &y, params)?);
    }
    Ok(per_frame)
}

/// Keeps only frames `start..=end` of every track, shifted to `1..=len`.
fn restrict(set: &TrackSet, start: u32, end: u32) -> TrackSet {
    let tracks: Vec<Track> = set
        .tracks()
        .iter()
        .filter_map(|t| {
            let states: std::collections::BTreeMap<_, _> = t
                .states()
                .range(start..=end)
                .map(|(f, s)| (f - start + 1, *s))
                .collect();
            if states.is_empty() {
                None
            } else {
                Some(Track::new(t.label(), states).expect("restriction keeps tracks valid"))
            }
        })
        .collect();
    TrackSet::new(tracks, end - start + 1).expect("restriction keeps the set valid")
}

fn segment_bounds(frame_count: u32, segment_length: u32) -> Vec<(u32, u32)> {
    let mut bounds = Vec::new();
    let mut start = 1u32;
    while start <= frame_count {
        let end = (start + segment_length - 1).min(frame_count);
        bounds.push((start, end));
        start = end + 1;
    }
    bounds
}

/// Scores the whole sequence with one global matching.
pub fn evaluate_sequence(
    truth: &TrackSet,
    est: &TrackSet,
    params: &MetricParams,
) -> Result<ScoreSeries, PipelineError> {
    let frames = truth.frame_count().max(1);
    evaluate_segments_scoped(truth, est, params, frames, LabelingScope::Global)
}

/// Scores the sequence over non-overlapping segments of `segment_length`
/// frames, re-matching tracks independently in each segment. The last
/// segment may be shorter.
pub fn evaluate_segments(
    truth: &TrackSet,
    est: &TrackSet,
    params: &MetricParams,
    segment_length: u32,
) -> Result<ScoreSeries, PipelineError> {
    evaluate_segments_scoped(
        truth,
        est,
        params,
        segment_length,
        LabelingScope::PerSegment,
    )
}

/// Segment evaluation with an explicit [`LabelingScope`].
pub fn evaluate_segments_scoped(
    truth: &TrackSet,
    est: &TrackSet,
    params: &MetricParams,
    segment_length: u32,
    scope: LabelingScope,
) -> Result<ScoreSeries, PipelineError> {
    if segment_length == 0 {
        return Err(PipelineError::ZeroSegmentLength);
    }
    if truth.frame_count() != est.frame_count() {
        return Err(PipelineError::FrameCountMismatch {
            truth: truth.frame_count(),
            est: est.frame_count(),
        });
    }
    let frame_count = truth.frame_count();
    let bounds = segment_bounds(frame_count, segment_length);
    let mut per_frame = vec![0.0; frame_count as usize];
    let mut segments = Vec::with_capacity(bounds.len());
    match scope {
        LabelingScope::Global => {
            let relabeled = label_estimated_tracks(truth, est, params)?;
            let scored = score_frames(truth, &relabeled, params)?;
            per_frame.copy_from_slice(&scored);
        }
        LabelingScope::PerSegment => {
            for &(start, end) in &bounds {
                let truth_part = restrict(truth, start, end);
                let est_part = restrict(est, start, end);
                let relabeled = label_estimated_tracks(&truth_part, &est_part, params)?;
                let scored = score_frames(&truth_part, &relabeled, params)?;
                per_frame[(start - 1) as usize..end as usize].copy_from_slice(&scored);
            }
        }
    }
    for &(start, end) in &bounds {
        let slice = &per_frame[(start - 1) as usize..end as usize];
        segments.push(SegmentScore {
            start_frame: start,
            end_frame: end,
            mean: slice.iter().sum::<f64>() / slice.len() as f64,
        });
    }
    Ok(ScoreSeries::new(per_frame, segments))
}
