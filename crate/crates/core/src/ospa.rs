//! Per-frame OSPA distance between labeled sets.
//!
//! The distance combines, for each optimally matched pair, a positional
//! error and a label mismatch penalty `alpha`, both clipped at the cutoff
//! `c`, and charges every cardinality-difference element the full cutoff.
//! With `alpha = 0` labels are ignored and the classic position-only OSPA
//! distance is recovered.
//!
//! The combined per-pair base distance is a metric for any order
//! `p_prime >= 1`; raising it to a power `p > 1` before summing is not
//! (the triangle inequality can fail), which is why the cutoff and the
//! final `1/p` root are applied the way they are here.

use thiserror::Error;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::track::{KinematicState, LabeledState};

/// Errors from invalid metric parameters or malformed labeled sets.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric order p must be at least 1, got {0}")]
    InvalidOrder(f64),
    #[error("base distance order p_prime must be at least 1, got {0}")]
    InvalidBaseOrder(f64),
    #[error("cutoff c must be positive and finite, got {0}")]
    InvalidCutoff(f64),
    #[error("label penalty alpha must lie in [0, c]; got alpha {alpha} with c {c}")]
    AlphaOutOfRange { alpha: f64, c: f64 },
    #[error("labeled set contains label {label} twice")]
    DuplicateLabel { label: u32 },
}

/// Parameters of the distance: outer order `p`, base-distance order
/// `p_prime`, cutoff `c` and label penalty `alpha` with
/// `0 <= alpha <= c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub p: f64,
    pub p_prime: f64,
    pub c: f64,
    pub alpha: f64,
}

impl MetricParams {
    pub fn new(p: f64, p_prime: f64, c: f64, alpha: f64) -> Result<Self, MetricError> {
        if !p.is_finite() || p < 1.0 {
            return Err(MetricError::InvalidOrder(p));
        }
        if !p_prime.is_finite() || p_prime < 1.0 {
            return Err(MetricError::InvalidBaseOrder(p_prime));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(MetricError::InvalidCutoff(c));
        }
        if !alpha.is_finite() || alpha < 0.0 || alpha > c {
            return Err(MetricError::AlphaOutOfRange { alpha, c });
        }
        Ok(Self {
            p,
            p_prime,
            c,
            alpha,
        })
    }

    /// Same parameters with the label penalty switched off.
    pub fn without_labels(&self) -> Self {
        Self {
            alpha: 0.0,
            ..*self
        }
    }
}

/// `p = p_prime = 1`, `c = 100` px, `alpha = 75` px.
impl Default for MetricParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            p_prime: 1.0,
            c: 100.0,
            alpha: 75.0,
        }
    }
}

/// `x^p`, exact for the common orders 1 and 2.
pub(crate) fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// `x^(1/p)`, exact for the common orders 1 and 2.
pub(crate) fn root_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// Positional distance between two states: the `p_prime`-norm of the
/// coordinate differences. Velocities do not contribute.
pub fn localisation_distance(a: &KinematicState, b: &KinematicState, p_prime: f64) -> f64 {
    let dx = (a.x - b.x).abs();
    let dy = (a.y - b.y).abs();
    if p_prime == 1.0 {
        dx + dy
    } else if p_prime == 2.0 {
        dx.hypot(dy)
    } else {
        (dx.powf(p_prime) + dy.powf(p_prime)).powf(1.0 / p_prime)
    }
}

/// Distance between two labeled states: positional distance and label
/// penalty combined in the `p_prime`-norm. Uncut; see
/// [`cutoff_base_distance`].
pub fn base_distance(a: &LabeledState, b: &LabeledState, params: &MetricParams) -> f64 {
    let loc = localisation_distance(&a.state, &b.state, params.p_prime);
    if a.label == b.label || params.alpha == 0.0 {
        return loc;
    }
    if params.p_prime == 1.0 {
        loc + params.alpha
    } else if params.p_prime == 2.0 {
        loc.hypot(params.alpha)
    } else {
        (loc.powf(params.p_prime) + params.alpha.powf(params.p_prime)).powf(1.0 / params.p_prime)
    }
}

/// Base distance clipped at the cutoff `c`.
pub fn cutoff_base_distance(a: &LabeledState, b: &LabeledState, params: &MetricParams) -> f64 {
    base_distance(a, b, params).min(params.c)
}

fn check_distinct_labels(set: &[LabeledState]) -> Result<(), MetricError> {
    let mut labels: Vec<u32> = set.iter().map(|s| s.label).collect();
    labels.sort_unstable();
    for pair in labels.windows(2) {
        if pair[0] == pair[1] {
            return Err(MetricError::DuplicateLabel { label: pair[0] });
        }
    }
    Ok(())
}

/// OSPA distance between two labeled sets.
///
/// The smaller set is optimally matched into the larger one; matched pairs
/// contribute their cutoff base distance to the power `p`, unmatched
/// elements contribute `c^p`, and the mean over the larger cardinality is
/// taken to the power `1/p`. Two empty sets are at distance 0. The result
/// always lies in `[0, c]`.
pub fn ospa_labeled_sets(
    x: &[LabeledState],
    y: &[LabeledState],
    params: &MetricParams,
) -> Result<f64, MetricError> {
    check_distinct_labels(x)?;
    check_distinct_labels(y)?;
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let m = small.len();
    let n = large.len();
    if n == 0 {
        return Ok(0.0);
    }
    let costs = CostMatrix::from_fn(m, n, |r, c| {
        pow_p(cutoff_base_distance(&small[r], &large[c], params), params.p)
    })
    .expect("cutoff distances are finite");
    let matched = solve_assignment(&costs).total_cost;
    let missed = (n - m) as f64 * pow_p(params.c, params.p);
    Ok(root_p((matched + missed) / n as f64, params.p))
}
