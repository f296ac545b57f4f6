//! Maximum-score bipartite assignment between two windows and crossing
//! ("inversion") counting on the resulting matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced costs within this distance of zero count as tight when choosing
/// among tied optima.
const TIGHT_EPS: f64 = 1e-9;

/// Row-major `rows x cols` grid of similarity scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidAssignment(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if scores.len() != rows * cols {
            return Err(Error::InvalidAssignment(format!(
                "expected {} scores, got {}",
                rows * cols,
                scores.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidAssignment(format!(
                "score {s} outside [0, 1]"
            )));
        }
        Ok(Self { rows, cols, scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidAssignment("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut scores = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                scores.push(f(i, j));
            }
        }
        Self::new(rows, cols, scores)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }
}

/// An optimal one-to-one matching, sorted by left index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub total_score: f64,
    pub inversions: usize,
}

impl Assignment {
    pub fn right_of(&self, left: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.0 == left).map(|m| m.1)
    }

    pub fn left_of(&self, right: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.1 == right).map(|m| m.0)
    }
}

/// Solves the maximum-score assignment with the Hungarian method.
///
/// Rectangular inputs are padded with zero-score dummies that never appear in
/// the result, so exactly `min(rows, cols)` pairs are returned. Among equally
/// good matchings the one whose right-index sequence (ordered by left index)
/// is lexicographically smallest wins.
pub fn solve_assignment(matrix: &SimilarityMatrix) -> Assignment {
    let n = matrix.rows.max(matrix.cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < matrix.rows && j < matrix.cols {
            1.0 - matrix.get(i, j)
        } else {
            1.0
        }
    };

    let (mut col_of, u, v) = hungarian_min(n, &cost);
    lexicographic_refine(n, &cost, &u, &v, &mut col_of);

    let matches: Vec<(usize, usize)> = col_of
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < matrix.rows && j < matrix.cols)
        .map(|(i, &j)| (i, j))
        .collect();
    let total_score = matches.iter().map(|&(i, j)| matrix.get(i, j)).sum();
    let inversions = count_inversions(&matches).expect("solver yields a valid matching");
    Assignment {
        matches,
        total_score,
        inversions,
    }
}

/// Shortest augmenting path Hungarian algorithm on an `n x n` cost function.
/// Returns the row-to-column assignment and the dual potentials.
fn hungarian_min(
    n: usize,
    cost: &impl Fn(usize, usize) -> f64,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based with index 0 as the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    (col_of, u[1..].to_vec(), v[1..].to_vec())
}

/// Walks rows in order and moves each onto the smallest tight column that
/// still admits a perfect tight matching for the unfixed rows. Every perfect
/// matching on tight edges is optimal, so the result stays optimal.
fn lexicographic_refine(
    n: usize,
    cost: &impl Fn(usize, usize) -> f64,
    u: &[f64],
    v: &[f64],
    col_of: &mut [usize],
) {
    let tight = |i: usize, j: usize| (cost(i, j) - u[i] - v[j]).abs() <= TIGHT_EPS;
    let mut row_of = vec![0usize; n];
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }

    for i in 0..n {
        let target = col_of[i];
        for j in 0..target {
            let holder = row_of[j];
            if holder < i || !tight(i, j) {
                continue;
            }
            // Alternating path: holder gives up j and must reach `target`
            // through rows > i only.
            if let Some(path) = alternating_path(n, i, holder, target, j, &tight, col_of, &row_of) {
                // path: sequence of (row, new column)
                for &(r, c) in &path {
                    col_of[r] = c;
                    row_of[c] = r;
                }
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn alternating_path(
    n: usize,
    fixed_upto: usize,
    start_row: usize,
    target_col: usize,
    banned_col: usize,
    tight: &impl Fn(usize, usize) -> bool,
    col_of: &[usize],
    row_of: &[usize],
) -> Option<Vec<(usize, usize)>> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n]; // column -> (row that reached it, previous column)
    let mut seen_row = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen_row[start_row] = true;
    queue.push_back(start_row);
    while let Some(r) = queue.pop_front() {
        for c in 0..n {
            if c == banned_col || c == col_of[r] || parent[c].is_some() || !tight(r, c) {
                continue;
            }
            let holder = row_of[c];
            if c != target_col && (holder <= fixed_upto || seen_row[holder]) {
                continue;
            }
            parent[c] = Some((r, col_of[r]));
            if c == target_col {
                let mut path = Vec::new();
                let mut col = c;
                while let Some((row, prev)) = parent[col] {
                    path.push((row, col));
                    if row == start_row {
                        break;
                    }
                    col = prev;
                }
                return Some(path);
            }
            seen_row[holder] = true;
            queue.push_back(holder);
        }
    }
    None
}

/// Counts crossing pairs `(i1, j1), (i2, j2)` with `i1 < i2` and `j1 > j2`.
pub fn count_inversions(matches: &[(usize, usize)]) -> Result<usize> {
    let mut sorted = matches.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidAssignment(format!(
                "left index {} used twice",
                w[0].0
            )));
        }
    }
    let mut rights: Vec<usize> = sorted.iter().map(|m| m.1).collect();
    let mut check = rights.clone();
    check.sort_unstable();
    if let Some(w) = check.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidAssignment(format!(
            "right index {} used twice",
            w[0]
        )));
    }
    Ok(merge_count(&mut rights))
}

fn merge_count(xs: &mut [usize]) -> usize {
    if xs.len() < 2 {
        return 0;
    }
    let mid = xs.len() / 2;
    let mut count = merge_count(&mut xs[..mid]) + merge_count(&mut xs[mid..]);
    let mut merged = Vec::with_capacity(xs.len());
    let (mut a, mut b) = (0, mid);
    while a < mid && b < xs.len() {
        if xs[a] <= xs[b] {
            merged.push(xs[a]);
            a += 1;
        } else {
            count += mid - a;
            merged.push(xs[b]);
            b += 1;
        }
    }
    merged.extend_from_slice(&xs[a..mid]);
    merged.extend_from_slice(&xs[b..]);
    xs.copy_from_slice(&merged);
    count
}

/// Parses a comma-separated score grid, one row per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<SimilarityMatrix> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidAssignment(format!("`{v}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SimilarityMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matrix() {
        let m = SimilarityMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        let a = solve_assignment(&m);
        assert_eq!(a.matches, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(a.total_score, 3.0);
        assert_eq!(a.inversions, 0);
    }

    #[test]
    fn two_by_two() {
        let m = SimilarityMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let a = solve_assignment(&m);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert!((a.total_score - 1.7).abs() < 1e-12);
    }

    #[test]
    fn swapped_pair_has_one_inversion() {
        let m = SimilarityMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let a = solve_assignment(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(a.inversions, 1);
    }

    #[test]
    fn rectangular_strips_dummies() {
        let m = SimilarityMatrix::from_rows(&[vec![0.1, 0.9, 0.2], vec![0.8, 0.3, 0.1]]).unwrap();
        let a = solve_assignment(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        let t =
            SimilarityMatrix::from_rows(&[vec![0.1, 0.8], vec![0.9, 0.3], vec![0.2, 0.1]]).unwrap();
        assert_eq!(solve_assignment(&t).matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        let all_ones = SimilarityMatrix::new(4, 4, vec![1.0; 16]).unwrap();
        assert_eq!(
            solve_assignment(&all_ones).matches,
            vec![(0, 0), (1, 1), (2, 2), (3, 3)]
        );
        let zeros = SimilarityMatrix::new(2, 5, vec![0.0; 10]).unwrap();
        assert_eq!(solve_assignment(&zeros).matches, vec![(0, 0), (1, 1)]);
        // Two optima: {(0,1),(1,0)} and {(0,0),(1,1)}; the latter is smaller.
        let m = SimilarityMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(solve_assignment(&m).matches, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(count_inversions(&[(0, 0), (1, 1), (2, 2)]).unwrap(), 0);
        assert_eq!(count_inversions(&[(0, 1), (1, 0)]).unwrap(), 1);
        let m: Vec<_> = [2, 0, 3, 1, 4].into_iter().enumerate().collect();
        assert_eq!(count_inversions(&m).unwrap(), 3);
        assert!(count_inversions(&[(0, 1), (0, 2)]).is_err());
        assert!(count_inversions(&[(0, 1), (1, 1)]).is_err());
    }

    #[test]
    fn matrix_validation_and_csv() {
        assert!(SimilarityMatrix::new(0, 1, vec![]).is_err());
        assert!(SimilarityMatrix::new(1, 1, vec![1.5]).is_err());
        let m = parse_matrix_csv("# demo\n0.9, 0.1\n0.2,0.8\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert!(parse_matrix_csv("0.1,x").is_err());
        assert!(parse_matrix_csv("0.1,0.2\n0.3").is_err());
    }
}
