//! Rectangular minimum-cost assignment.
//!
//! [`solve_assignment`] matches rows of a cost matrix to columns so that no
//! row or column is used twice and the summed cost is minimal. Matrices may
//! be rectangular; the unmatched surplus on the longer side is implicit.
//! Entries set to [`CostMatrix::FORBIDDEN`] can never be matched: the solver
//! first maximises the number of allowed pairs and only then minimises cost,
//! so a forbidden entry is taken only by dropping the pair entirely.
//!
//! Ties are resolved deterministically: among all optimal matchings the
//! solver returns the one whose pair list, sorted by row, is
//! lexicographically smallest.

use thiserror::Error;

/// Errors from building cost matrices or running the brute-force reference.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignmentError {
    #[error("cost data length {got} does not match {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("cost at ({row}, {col}) is NaN or negative infinity; use CostMatrix::FORBIDDEN for disallowed pairs")]
    InvalidCost { row: usize, col: usize },
    #[error("matrix min dimension {dim} exceeds brute-force limit {limit}")]
    TooLarge { dim: usize, limit: usize },
}

/// Dense row-major cost matrix with an explicit "disallowed pair" value.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Marks a pair that must never appear in the solution.
    pub const FORBIDDEN: f64 = f64::INFINITY;

    /// Builds a matrix from row-major data. Every entry must be finite or
    /// [`Self::FORBIDDEN`].
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if data.len() != rows * cols {
            return Err(AssignmentError::ShapeMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() && v != Self::FORBIDDEN {
                return Err(AssignmentError::InvalidCost {
                    row: i / cols.max(1),
                    col: i % cols.max(1),
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix by evaluating `f` at every `(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignmentError> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn is_forbidden(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == Self::FORBIDDEN
    }

    fn finite_abs_sum(&self) -> f64 {
        self.data
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v.abs())
            .sum()
    }
}

/// A matching: pairs sorted by row index, plus the summed cost of exactly
/// those pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            total_cost: 0.0,
        }
    }
}

/// Shortest-augmenting-path solver for the rectangular assignment problem,
/// O(n^2 m) with row potentials. Requires `rows <= cols` and returns for
/// each row its assigned column.
fn augmenting_path_min(
    rows: usize,
    cols: usize,
    cost: &impl Fn(usize, usize) -> f64,
) -> Vec<usize> {
    debug_assert!(rows <= cols);
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut matched_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; rows];
    for j in 1..=cols {
        if matched_row[j] != 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Optimal `(pair count, summed cost)` over a sub-matrix given by row and
/// column index subsets. Forbidden entries are replaced internally by a
/// penalty large enough that minimising penalised cost first minimises the
/// number of forbidden picks; those picks are then dropped from the result.
fn sub_optimal(m: &CostMatrix, rows: &[usize], cols: &[usize], big: f64) -> (usize, f64) {
    if rows.is_empty() || cols.is_empty() {
        return (0, 0.0);
    }
    let lookup = |r: usize, c: usize| {
        let v = m.get(rows[r], cols[c]);
        if v.is_finite() {
            v
        } else {
            big
        }
    };
    let assigned: Vec<(usize, usize)> = if rows.len() <= cols.len() {
        augmenting_path_min(rows.len(), cols.len(), &lookup)
            .into_iter()
            .enumerate()
            .collect()
    } else {
        let swapped = |c: usize, r: usize| lookup(r, c);
        augmenting_path_min(cols.len(), rows.len(), &swapped)
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect()
    };
    let mut count = 0usize;
    let mut total = 0.0f64;
    for (r, c) in assigned {
        let v = m.get(rows[r], cols[c]);
        if v.is_finite() {
            count += 1;
            total += v;
        }
    }
    (count, total)
}

fn cost_tolerance(reference: f64) -> f64 {
    1e-9 + 1e-12 * reference.abs()
}

/// Minimum-cost matching of rows to columns.
///
/// Among matchings with the maximum number of allowed pairs and minimal
/// summed cost, returns the one whose row-sorted pair list is
/// lexicographically smallest. An empty matrix yields an empty matching.
pub fn solve_assignment(m: &CostMatrix) -> Assignment {
    if m.rows() == 0 || m.cols() == 0 {
        return Assignment::empty();
    }
    let big = 2.0 * m.finite_abs_sum() + 1.0;
    let all_rows: Vec<usize> = (0..m.rows()).collect();
    let mut free_cols: Vec<usize> = (0..m.cols()).collect();
    let (best_count, best_total) = sub_optimal(m, &all_rows, &free_cols, big);
    let tol = cost_tolerance(best_total);

    // Fix pairs row by row, column candidates in ascending order, keeping a
    // candidate only when the remaining sub-problem still reaches the
    // optimal pair count and total cost.
    let mut pairs = Vec::with_capacity(best_count);
    let mut fixed_cost = 0.0f64;
    for r in 0..m.rows() {
        let rest_rows: Vec<usize> = (r + 1..m.rows()).collect();
        let mut chosen = None;
        for (slot, &c) in free_cols.iter().enumerate() {
            let direct = m.get(r, c);
            if !direct.is_finite() {
                continue;
            }
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(slot);
            let (count, total) = sub_optimal(m, &rest_rows, &rest_cols, big);
            if pairs.len() + 1 + count == best_count
                && (fixed_cost + direct + total - best_total).abs() <= tol
            {
                chosen = Some(slot);
                break;
            }
        }
        if let Some(slot) = chosen {
            let c = free_cols.remove(slot);
            fixed_cost += m.get(r, c);
            pairs.push((r, c));
        }
    }
    debug_assert_eq!(pairs.len(), best_count);
    Assignment {
        pairs,
        total_cost: fixed_cost,
    }
}

/// Exhaustive reference solver with the same contract as
/// [`solve_assignment`]. Enumerates every injection of the shorter side
/// into the longer one, so the smaller dimension is capped at
/// [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_assignment(m: &CostMatrix) -> Result<Assignment, AssignmentError> {
    const LIMIT: usize = BRUTE_FORCE_LIMIT;
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(Assignment::empty());
    }
    let dim = m.rows().min(m.cols());
    if dim > LIMIT {
        return Err(AssignmentError::TooLarge { dim, limit: LIMIT });
    }
    let transposed = m.rows() > m.cols();
    let (short, long) = if transposed {
        (m.cols(), m.rows())
    } else {
        (m.rows(), m.cols())
    };
    let at = |s: usize, l: usize| {
        if transposed {
            m.get(l, s)
        } else {
            m.get(s, l)
        }
    };

    // Candidate solution: (pair count, total, row-sorted pairs).
    type Candidate = (usize, f64, Vec<(usize, usize)>);
    struct Search<'a> {
        at: &'a dyn Fn(usize, usize) -> f64,
        short: usize,
        long: usize,
        transposed: bool,
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<Candidate>,
    }
    impl Search<'_> {
        fn row_sorted(&self) -> Vec<(usize, usize)> {
            let mut pairs: Vec<(usize, usize)> = self
                .current
                .iter()
                .map(|&(s, l)| if self.transposed { (l, s) } else { (s, l) })
                .collect();
            pairs.sort_unstable();
            pairs
        }

        fn recurse(&mut self, s: usize, count: usize, total: f64) {
            if s == self.short {
                let better = match &self.best {
                    None => true,
                    Some((bc, bt, bp)) => {
                        if count != *bc {
                            count > *bc
                        } else if (total - *bt).abs() > cost_tolerance(*bt) {
                            total < *bt
                        } else {
                            self.row_sorted() < *bp
                        }
                    }
                };
                if better {
                    self.best = Some((count, total, self.row_sorted()));
                }
                return;
            }
            for l in 0..self.long {
                if self.used[l] {
                    continue;
                }
                self.used[l] = true;
                let v = (self.at)(s, l);
                if v.is_finite() {
                    self.current.push((s, l));
                    self.recurse(s + 1, count + 1, total + v);
                    self.current.pop();
                } else {
                    self.recurse(s + 1, count, total);
                }
                self.used[l] = false;
            }
        }
    }

    let mut search = Search {
        at: &at,
        short,
        long,
        transposed,
        used: vec![false; long],
        current: Vec::new(),
        best: None,
    };
    search.recurse(0, 0, 0.0);
    let (_, _, pairs) = search.best.expect("at least one injection exists");
    let total_cost = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
    Ok(Assignment { pairs, total_cost })
}

/// Largest min-dimension [`brute_force_assignment`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(rows: usize, cols: usize, data: &[f64]) -> Assignment {
        solve_assignment(&CostMatrix::new(rows, cols, data.to_vec()).unwrap())
    }

    #[test]
    fn rejects_wrong_shape_and_nan() {
        assert!(matches!(
            CostMatrix::new(2, 2, vec![1.0; 3]),
            Err(AssignmentError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            CostMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(AssignmentError::InvalidCost { row: 0, col: 1 })
        ));
        assert!(matches!(
            CostMatrix::new(1, 1, vec![f64::NEG_INFINITY]),
            Err(AssignmentError::InvalidCost { .. })
        ));
    }

    #[test]
    fn empty_matrix_gives_empty_assignment() {
        let a = solve(0, 4, &[]);
        assert!(a.pairs.is_empty());
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn identity_on_diagonal() {
        let a = solve(3, 3, &[0.0, 9.0, 9.0, 9.0, 0.0, 9.0, 9.0, 9.0, 0.0]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn rectangular_leaves_surplus_unmatched() {
        let a = solve(2, 3, &[10.0, 1.0, 4.0, 7.0, 6.0, 2.0]);
        assert_eq!(a.pairs, vec![(0, 1), (1, 2)]);
        assert_eq!(a.total_cost, 3.0);
        let t = solve(3, 2, &[10.0, 7.0, 1.0, 6.0, 4.0, 2.0]);
        assert_eq!(t.pairs, vec![(1, 0), (2, 1)]);
        assert_eq!(t.total_cost, 3.0);
    }

    #[test]
    fn forbidden_pairs_are_dropped_not_priced() {
        const F: f64 = CostMatrix::FORBIDDEN;
        // Column 0 is forbidden for both rows: only one pair is possible.
        let a = solve(2, 2, &[F, 3.0, F, 5.0]);
        assert_eq!(a.pairs, vec![(0, 1)]);
        assert_eq!(a.total_cost, 3.0);
        // A fully forbidden matrix yields no pairs at all.
        let b = solve(2, 2, &[F, F, F, F]);
        assert!(b.pairs.is_empty());
        assert_eq!(b.total_cost, 0.0);
    }

    #[test]
    fn maximises_pair_count_before_cost() {
        const F: f64 = CostMatrix::FORBIDDEN;
        // Putting row 0 on column 0 (cost 1) would leave row 1 unmatchable;
        // two pairs cost 102 and must win over one pair costing 1.
        let a = solve(2, 2, &[1.0, 100.0, 2.0, F]);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total_cost, 102.0);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // Every perfect matching costs 2; (0,0),(1,1) is lexicographically
        // smallest.
        let a = solve(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        // Swapping is forced when the diagonal is more expensive.
        let b = solve(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(b.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn tie_break_prefers_smaller_column_for_first_row() {
        // Rows tie pairwise; expect (0,0),(1,1),(2,2) not any permutation.
        let a = solve(3, 3, &[5.0; 9]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn brute_force_rejects_large_min_dimension() {
        let m = CostMatrix::from_fn(9, 9, |r, c| (r * c) as f64).unwrap();
        assert!(matches!(
            brute_force_assignment(&m),
            Err(AssignmentError::TooLarge { dim: 9, limit: 8 })
        ));
        // Rectangular matrices are fine as long as the short side is small.
        let thin = CostMatrix::from_fn(2, 40, |r, c| (r + c) as f64).unwrap();
        assert!(brute_force_assignment(&thin).is_ok());
    }

    fn random_matrix(rng: &mut ChaCha8Rng, forbidden_prob: f64) -> CostMatrix {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        CostMatrix::from_fn(rows, cols, |_, _| {
            if rng.random::<f64>() < forbidden_prob {
                CostMatrix::FORBIDDEN
            } else {
                rng.random_range(0.0..100.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..300 {
            let forbidden_prob = if trial % 3 == 0 { 0.3 } else { 0.0 };
            let m = random_matrix(&mut rng, forbidden_prob);
            let fast = solve_assignment(&m);
            let slow = brute_force_assignment(&m).unwrap();
            assert_eq!(fast.pairs, slow.pairs, "matrix {m:?}");
            assert!((fast.total_cost - slow.total_cost).abs() <= 1e-9);
        }
    }

    #[test]
    fn matches_brute_force_on_integer_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(1..=5);
            let m = CostMatrix::from_fn(rows, cols, |_, _| rng.random_range(0..4) as f64).unwrap();
            let fast = solve_assignment(&m);
            let slow = brute_force_assignment(&m).unwrap();
            assert_eq!(fast.pairs, slow.pairs, "matrix {m:?}");
            assert!((fast.total_cost - slow.total_cost).abs() <= 1e-9);
        }
    }

    #[test]
    fn transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let m = random_matrix(&mut rng, 0.2);
            let t = CostMatrix::from_fn(m.cols(), m.rows(), |r, c| m.get(c, r)).unwrap();
            let a = solve_assignment(&m);
            let b = solve_assignment(&t);
            assert_eq!(a.pairs.len(), b.pairs.len());
            assert!((a.total_cost - b.total_cost).abs() <= 1e-9);
        }
    }
}
