//! Sliding-window alignment of two text lines.
//!
//! Each step compares a window of the left line with a window of the right
//! line, solves the assignment between them and either commits the window,
//! grows one side to absorb inserted text, or falls back to advancing a
//! single token at a time.

mod output;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::assignment::{count_inversions, solve_assignment, Assignment, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::siamese::SimilarityScorer;
use crate::subword::{Document, TextLine};

pub use output::{html_report, ops_json, ops_tsv, write_html, JsonOp, JsonTokenRef};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub min_window: usize,
    pub threshold: f64,
    pub max_growth: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            min_window: 5,
            threshold: 0.5,
            max_growth: 8,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_window < 2 {
            return Err(Error::InvalidConfig(format!(
                "min_window must be at least 2, got {}",
                self.min_window
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn max_window(&self) -> usize {
        self.min_window + self.max_growth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Match,
    Swap,
    InsertLeft,
    InsertRight,
}

impl OpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::Match => "match",
            OpKind::Swap => "swap",
            OpKind::InsertLeft => "insert_left",
            OpKind::InsertRight => "insert_right",
        }
    }
}

/// One alignment decision. `InsertLeft` means the left token has no
/// counterpart on the right (equivalently, the right omits it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOp {
    pub kind: OpKind,
    pub left_pos: Option<usize>,
    pub right_pos: Option<usize>,
    pub confidence: f64,
    /// Set when the decision was forced by the single-step fallback and the
    /// averaged score stayed below the threshold.
    #[serde(default)]
    pub low_confidence: bool,
}

impl AlignmentOp {
    pub fn pair(kind: OpKind, left: usize, right: usize, confidence: f64) -> Self {
        debug_assert!(matches!(kind, OpKind::Match | OpKind::Swap));
        Self {
            kind,
            left_pos: Some(left),
            right_pos: Some(right),
            confidence,
            low_confidence: false,
        }
    }

    pub fn insert_left(left: usize, confidence: f64) -> Self {
        Self {
            kind: OpKind::InsertLeft,
            left_pos: Some(left),
            right_pos: None,
            confidence,
            low_confidence: false,
        }
    }

    pub fn insert_right(right: usize, confidence: f64) -> Self {
        Self {
            kind: OpKind::InsertRight,
            left_pos: None,
            right_pos: Some(right),
            confidence,
            low_confidence: false,
        }
    }

    fn order_key(&self) -> usize {
        match (self.left_pos, self.right_pos) {
            (Some(l), Some(r)) => l.min(r),
            (Some(p), None) | (None, Some(p)) => p,
            (None, None) => usize::MAX,
        }
    }

    /// Same kind and positions, ignoring confidence.
    pub fn same_decision(&self, other: &AlignmentOp) -> bool {
        self.kind == other.kind
            && self.left_pos == other.left_pos
            && self.right_pos == other.right_pos
    }

    /// The op seen from the other side: left and right swap roles.
    pub fn mirrored(&self) -> Self {
        let kind = match self.kind {
            OpKind::InsertLeft => OpKind::InsertRight,
            OpKind::InsertRight => OpKind::InsertLeft,
            k => k,
        };
        Self {
            kind,
            left_pos: self.right_pos,
            right_pos: self.left_pos,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub ops: Vec<AlignmentOp>,
    pub left_len: usize,
    pub right_len: usize,
    /// Fraction of left and right tokens that appear in some op.
    pub coverage: (f64, f64),
}

impl AlignmentResult {
    fn new(mut ops: Vec<AlignmentOp>, left_len: usize, right_len: usize) -> Self {
        ops.sort_by_key(AlignmentOp::order_key);
        let mut seen_l = vec![false; left_len];
        let mut seen_r = vec![false; right_len];
        for op in &ops {
            if let Some(l) = op.left_pos {
                seen_l[l] = true;
            }
            if let Some(r) = op.right_pos {
                seen_r[r] = true;
            }
        }
        let frac = |v: &[bool]| {
            if v.is_empty() {
                1.0
            } else {
                v.iter().filter(|&&b| b).count() as f64 / v.len() as f64
            }
        };
        let coverage = (frac(&seen_l), frac(&seen_r));
        Self {
            ops,
            left_len,
            right_len,
            coverage,
        }
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|o| o.kind == kind).count()
    }

    /// True when every token of both lines appears in exactly one op.
    pub fn is_partition(&self) -> bool {
        let mut l = vec![0usize; self.left_len];
        let mut r = vec![0usize; self.right_len];
        for op in &self.ops {
            match op.left_pos {
                Some(p) if p < self.left_len => l[p] += 1,
                Some(_) => return false,
                None => {}
            }
            match op.right_pos {
                Some(p) if p < self.right_len => r[p] += 1,
                Some(_) => return false,
                None => {}
            }
        }
        l.iter().chain(&r).all(|&c| c == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowClass {
    Identical,
    Swapped,
    NeedsGrowth,
    Mixed,
}

/// Classifies a solved window by whether all matched scores clear `threshold`
/// and whether the above-threshold matches cross.
pub fn classify_window(
    matrix: &SimilarityMatrix,
    assignment: &Assignment,
    threshold: f64,
) -> WindowClass {
    let strong: Vec<(usize, usize)> = assignment
        .matches
        .iter()
        .copied()
        .filter(|&(i, j)| matrix.get(i, j) >= threshold)
        .collect();
    let crossing = count_inversions(&strong).unwrap_or(0) > 0;
    let all_strong = strong.len() == assignment.matches.len();
    match (all_strong, crossing) {
        (true, false) => WindowClass::Identical,
        (true, true) => WindowClass::Swapped,
        (false, false) => WindowClass::NeedsGrowth,
        (false, true) => WindowClass::Mixed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowState {
    pub left_start: usize,
    pub right_start: usize,
    pub left_len: usize,
    pub right_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Outcome of probing the unresolved tokens of a window beyond the opposite
/// window. `distance` is the lookahead of the nearest hit that motivated
/// the choice, or `None` when the fallback decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthChoice {
    pub side: Side,
    pub distance: Option<usize>,
}

/// Nearest probe hits: `grow_left` is the smallest distance at which an
/// unresolved right token found a partner past the left window, and the
/// reverse for `grow_right`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Probe {
    grow_left: Option<usize>,
    grow_right: Option<usize>,
}

/// Pair scores for one line pair, memoized by absolute positions.
struct LineScores<'a, S: ?Sized> {
    left: &'a TextLine,
    right: &'a TextLine,
    scorer: &'a S,
    threshold: f64,
    cache: HashMap<(usize, usize), f64>,
}

impl<'a, S: SimilarityScorer + ?Sized> LineScores<'a, S> {
    fn new(left: &'a TextLine, right: &'a TextLine, scorer: &'a S, threshold: f64) -> Self {
        Self {
            left,
            right,
            scorer,
            threshold,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, l: usize, r: usize) -> Result<f64> {
        if let Some(&s) = self.cache.get(&(l, r)) {
            return Ok(s);
        }
        let s = self
            .scorer
            .score(&self.left.tokens()[l], &self.right.tokens()[r])?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Internal(format!(
                "scorer returned {s} outside [0, 1]"
            )));
        }
        self.cache.insert((l, r), s);
        Ok(s)
    }

    fn matrix(&mut self, st: &WindowState) -> Result<SimilarityMatrix> {
        let mut scores = Vec::with_capacity(st.left_len * st.right_len);
        for i in 0..st.left_len {
            for j in 0..st.right_len {
                scores.push(self.get(st.left_start + i, st.right_start + j)?);
            }
        }
        SimilarityMatrix::new(st.left_len, st.right_len, scores)
    }

    /// Probes unresolved tokens past the opposite window. A hit counts when
    /// it shifts the alignment by at most [`MAX_LOCAL_SHIFT`] relative to the
    /// nearest strong match before the token, or when the next or previous
    /// diagonal pair is strong as well.
    fn probe(
        &mut self,
        st: &WindowState,
        strong: &[(usize, usize)],
        unresolved_left: &[usize],
        unresolved_right: &[usize],
        lookahead: usize,
    ) -> Result<Probe> {
        let (nl, nr) = (self.left.len(), self.right.len());
        let mut p = Probe::default();
        let r_end = st.right_start + st.right_len;
        for &i in unresolved_left {
            for d in 1..=lookahead.min(nr - r_end) {
                let q = st.right_len + d - 1;
                let (pl, pr) = (st.left_start + i, st.right_start + q);
                let shift = local_shift(strong.iter().copied(), i, q);
                if self.get(pl, pr)? >= self.threshold && self.plausible(pl, pr, shift)? {
                    p.grow_right = Some(p.grow_right.map_or(d, |x| x.min(d)));
                    break;
                }
            }
        }
        let l_end = st.left_start + st.left_len;
        for &j in unresolved_right {
            for d in 1..=lookahead.min(nl - l_end) {
                let q = st.left_len + d - 1;
                let (pl, pr) = (st.left_start + q, st.right_start + j);
                let shift = local_shift(strong.iter().map(|&(x, y)| (y, x)), j, q);
                if self.get(pl, pr)? >= self.threshold && self.plausible(pl, pr, shift)? {
                    p.grow_left = Some(p.grow_left.map_or(d, |x| x.min(d)));
                    break;
                }
            }
        }
        Ok(p)
    }

    fn plausible(&mut self, l: usize, r: usize, shift: usize) -> Result<bool> {
        if shift <= MAX_LOCAL_SHIFT {
            return Ok(true);
        }
        for (dl, dr) in [(1, 1), (-1, -1), (1, -1), (-1, 1)] {
            let (Some(nl), Some(nr)) = (l.checked_add_signed(dl), r.checked_add_signed(dr)) else {
                continue;
            };
            if nl < self.left.len() && nr < self.right.len() && self.get(nl, nr)? >= self.threshold
            {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Largest change of diagonal a probe hit may imply without a strong
/// neighbouring pair to back it.
const MAX_LOCAL_SHIFT: usize = 2;

/// Smallest diagonal change between a hit `(own, other)` and any strong
/// match `(own, other)` that precedes `own` on its side. With no such
/// match the pair just before the window is used.
fn local_shift(strong: impl Iterator<Item = (usize, usize)>, own: usize, other: usize) -> usize {
    let hit = other as isize - own as isize;
    strong
        .filter(|&(x, _)| x < own)
        .map(|(x, y)| (hit - (y as isize - x as isize)).unsigned_abs())
        .min()
        .unwrap_or(hit.unsigned_abs())
}

/// Above-threshold matches whose diagonal offset agrees with at least one
/// neighbouring match (in left order) to within [`MAX_OFFSET_JUMP`]. Edits
/// move the diagonal a little at a time, so an isolated far jump is treated
/// as a spurious score rather than a match.
fn strong_matches(
    matrix: &SimilarityMatrix,
    assignment: &Assignment,
    threshold: f64,
) -> Vec<(usize, usize)> {
    let above: Vec<(usize, usize)> = assignment
        .matches
        .iter()
        .copied()
        .filter(|&(i, j)| matrix.get(i, j) >= threshold)
        .collect();
    let offset = |(i, j): (usize, usize)| j as isize - i as isize;
    (0..above.len())
        .filter(|&k| {
            let o = offset(above[k]);
            let near =
                |n: Option<&(usize, usize)>| n.map(|&m| (offset(m) - o).abs() <= MAX_OFFSET_JUMP);
            match (
                k.checked_sub(1).and_then(|p| above.get(p)),
                above.get(k + 1),
            ) {
                (None, None) => true,
                (prev, next) => near(prev).unwrap_or(false) || near(next).unwrap_or(false),
            }
        })
        .map(|k| above[k])
        .collect()
}

const MAX_OFFSET_JUMP: isize = 2;

fn unresolved(rows: usize, cols: usize, strong: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut left = vec![true; rows];
    let mut right = vec![true; cols];
    for &(i, j) in strong {
        left[i] = false;
        right[j] = false;
    }
    let idx = |v: Vec<bool>| {
        v.iter()
            .enumerate()
            .filter(|(_, &u)| u)
            .map(|(k, _)| k)
            .collect()
    };
    (idx(left), idx(right))
}

/// Near-ties go to the pairing closest to the window diagonal. The bias is
/// far below any meaningful score gap.
const DIAGONAL_BIAS: f64 = 1e-6;

fn solve_window(matrix: &SimilarityMatrix) -> Assignment {
    let biased = SimilarityMatrix::from_fn(matrix.rows(), matrix.cols(), |i, j| {
        (matrix.get(i, j) - DIAGONAL_BIAS * i.abs_diff(j) as f64).max(0.0)
    })
    .expect("biased scores stay in [0, 1]");
    let mut a = solve_assignment(&biased);
    a.total_score = a.matches.iter().map(|&(i, j)| matrix.get(i, j)).sum();
    a
}

fn pick_side(probe: Probe, left_remaining: usize, right_remaining: usize) -> GrowthChoice {
    let fallback = if right_remaining > left_remaining {
        Side::Right
    } else {
        Side::Left
    };
    match (probe.grow_left, probe.grow_right) {
        (Some(l), Some(r)) if l < r => GrowthChoice {
            side: Side::Left,
            distance: Some(l),
        },
        (Some(l), Some(r)) if r < l => GrowthChoice {
            side: Side::Right,
            distance: Some(r),
        },
        (Some(d), Some(_)) => GrowthChoice {
            side: fallback,
            distance: Some(d),
        },
        (Some(l), None) => GrowthChoice {
            side: Side::Left,
            distance: Some(l),
        },
        (None, Some(r)) => GrowthChoice {
            side: Side::Right,
            distance: Some(r),
        },
        (None, None) => GrowthChoice {
            side: fallback,
            distance: None,
        },
    }
}

/// Decides which window to grow after a window left some tokens below the
/// threshold.
///
/// Every unresolved left token is probed against up to `max_growth` right
/// tokens past the right window, and vice versa. A right token whose partner
/// sits past the left window means the left line carries extra text at this
/// point, so the left window grows; the nearest hit wins. Equal distances,
/// and the case of no hit at all, go to the side with more unconsumed tokens
/// and then to the left.
#[allow(clippy::too_many_arguments)]
pub fn choose_growth_side<S: SimilarityScorer + ?Sized>(
    left: &TextLine,
    right: &TextLine,
    state: &WindowState,
    matrix: &SimilarityMatrix,
    assignment: &Assignment,
    threshold: f64,
    max_growth: usize,
    scorer: &S,
) -> Result<GrowthChoice> {
    check_state(left, right, state, matrix)?;
    let mut scores = LineScores::new(left, right, scorer, threshold);
    let strong = strong_matches(matrix, assignment, threshold);
    let (ul, ur) = unresolved(matrix.rows(), matrix.cols(), &strong);
    let probe = scores.probe(state, &strong, &ul, &ur, max_growth)?;
    Ok(pick_side(
        probe,
        left.len() - state.left_start,
        right.len() - state.right_start,
    ))
}

fn check_state(
    left: &TextLine,
    right: &TextLine,
    st: &WindowState,
    matrix: &SimilarityMatrix,
) -> Result<()> {
    if st.left_start + st.left_len > left.len() || st.right_start + st.right_len > right.len() {
        return Err(Error::InvalidConfig(format!(
            "window {st:?} exceeds the lines"
        )));
    }
    if matrix.rows() != st.left_len || matrix.cols() != st.right_len {
        return Err(Error::InvalidConfig(
            "matrix does not match the window sizes".into(),
        ));
    }
    Ok(())
}

/// What the engine did with one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum StepAction {
    /// Every token was resolved or left without any probe hit; all of them
    /// were emitted.
    Commit {
        ops: usize,
    },
    Grow {
        side: Side,
        distance: usize,
    },
    /// Growth was needed but capped; only the leading tokens were decided.
    Step {
        ops: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStep {
    pub state: WindowState,
    pub class: WindowClass,
    pub action: StepAction,
}

pub fn align_lines<S: SimilarityScorer + ?Sized>(
    left: &TextLine,
    right: &TextLine,
    config: &AlignConfig,
    scorer: &S,
) -> Result<AlignmentResult> {
    Ok(align_lines_traced(left, right, config, scorer)?.0)
}

/// [`align_lines`] plus the sequence of window decisions that produced it.
pub fn align_lines_traced<S: SimilarityScorer + ?Sized>(
    left: &TextLine,
    right: &TextLine,
    config: &AlignConfig,
    scorer: &S,
) -> Result<(AlignmentResult, Vec<WindowStep>)> {
    config.validate()?;
    if left.is_empty() {
        return Err(Error::EmptyLine("left"));
    }
    if right.is_empty() {
        return Err(Error::EmptyLine("right"));
    }
    let (nl, nr) = (left.len(), right.len());
    let tau = config.threshold;
    let cap = config.max_window();
    let mut scores = LineScores::new(left, right, scorer, tau);
    let mut ops = Vec::with_capacity(nl.max(nr));
    let mut trace = Vec::new();
    let (mut li, mut ri) = (0usize, 0usize);
    let (mut a, mut b) = (config.min_window, config.min_window);
    // Scores of the pairs assigned in the previous window, by absolute position.
    let mut previous: HashMap<(usize, usize), f64> = HashMap::new();

    while li < nl && ri < nr {
        let st = WindowState {
            left_start: li,
            right_start: ri,
            left_len: a.min(nl - li),
            right_len: b.min(nr - ri),
        };
        let matrix = scores.matrix(&st)?;
        let asg = solve_window(&matrix);
        let class = classify_window(&matrix, &asg, tau);
        let strong = strong_matches(&matrix, &asg, tau);
        let (ul, ur) = unresolved(matrix.rows(), matrix.cols(), &strong);

        let current: HashMap<(usize, usize), f64> = asg
            .matches
            .iter()
            .map(|&(i, j)| ((li + i, ri + j), matrix.get(i, j)))
            .collect();

        if !ul.is_empty() || !ur.is_empty() {
            let probe = scores.probe(&st, &strong, &ul, &ur, config.max_growth)?;
            let choice = pick_side(probe, nl - li, nr - ri);
            if choice.distance.is_some() {
                let can_grow = |side: Side| match side {
                    Side::Left => a < cap && probe.grow_left.is_some(),
                    Side::Right => b < cap && probe.grow_right.is_some(),
                };
                let other = match choice.side {
                    Side::Left => Side::Right,
                    Side::Right => Side::Left,
                };
                let side = if can_grow(choice.side) {
                    Some(choice.side)
                } else if can_grow(other) {
                    Some(other)
                } else {
                    None
                };
                if let Some(side) = side {
                    let distance = match side {
                        Side::Left => probe.grow_left,
                        Side::Right => probe.grow_right,
                    }
                    .expect("growable side has a hit");
                    match side {
                        Side::Left => a += 1,
                        Side::Right => b += 1,
                    }
                    trace.push(WindowStep {
                        state: st,
                        class,
                        action: StepAction::Grow { side, distance },
                    });
                    previous = current;
                    continue;
                }
                let before = ops.len();
                let (dl, dr) = single_step(&matrix, &strong, &st, tau, &previous, &mut ops);
                trace.push(WindowStep {
                    state: st,
                    class,
                    action: StepAction::Step {
                        ops: ops.len() - before,
                    },
                });
                li += dl;
                ri += dr;
                previous = current;
                continue;
            }
        }

        let before = ops.len();
        commit_window(&matrix, &strong, &st, &ul, &ur, &mut ops);
        trace.push(WindowStep {
            state: st,
            class,
            action: StepAction::Commit {
                ops: ops.len() - before,
            },
        });
        li += st.left_len;
        ri += st.right_len;
        a = config.min_window;
        b = config.min_window;
        previous.clear();
    }

    for l in li..nl {
        ops.push(AlignmentOp::insert_left(l, 1.0));
    }
    for r in ri..nr {
        ops.push(AlignmentOp::insert_right(r, 1.0));
    }
    Ok((AlignmentResult::new(ops, nl, nr), trace))
}

/// Emits every token of the window: strong matches as `Match`, or `Swap`
/// when they cross another strong match, and the rest as insertions.
fn commit_window(
    matrix: &SimilarityMatrix,
    strong: &[(usize, usize)],
    st: &WindowState,
    ul: &[usize],
    ur: &[usize],
    ops: &mut Vec<AlignmentOp>,
) {
    for &(i, j) in strong {
        let crosses = strong
            .iter()
            .any(|&(k, m)| (k < i && m > j) || (k > i && m < j));
        let kind = if crosses { OpKind::Swap } else { OpKind::Match };
        ops.push(AlignmentOp::pair(
            kind,
            st.left_start + i,
            st.right_start + j,
            matrix.get(i, j),
        ));
    }
    for &i in ul {
        let best = (0..matrix.cols())
            .map(|j| matrix.get(i, j))
            .fold(0.0, f64::max);
        ops.push(AlignmentOp::insert_left(st.left_start + i, 1.0 - best));
    }
    for &j in ur {
        let best = (0..matrix.rows())
            .map(|i| matrix.get(i, j))
            .fold(0.0, f64::max);
        ops.push(AlignmentOp::insert_right(st.right_start + j, 1.0 - best));
    }
}

/// Decides only the leading token of each window when growth is capped.
/// Returns how far each side advances.
fn single_step(
    matrix: &SimilarityMatrix,
    strong: &[(usize, usize)],
    st: &WindowState,
    tau: f64,
    previous: &HashMap<(usize, usize), f64>,
    ops: &mut Vec<AlignmentOp>,
) -> (usize, usize) {
    let (li, ri) = (st.left_start, st.right_start);
    let strong_right_of = |i: usize| strong.iter().find(|m| m.0 == i).map(|m| m.1);
    let strong_left_of = |j: usize| strong.iter().find(|m| m.1 == j).map(|m| m.0);
    let averaged = |i: usize, j: usize| {
        let now = matrix.get(i, j);
        previous
            .get(&(li + i, ri + j))
            .map_or(now, |p| (p + now) / 2.0)
    };
    match (strong_right_of(0), strong_left_of(0)) {
        (Some(0), _) => {
            ops.push(AlignmentOp::pair(OpKind::Match, li, ri, averaged(0, 0)));
            (1, 1)
        }
        (None, Some(_)) => {
            let best = (0..matrix.cols())
                .map(|j| matrix.get(0, j))
                .fold(0.0, f64::max);
            ops.push(AlignmentOp::insert_left(li, 1.0 - best));
            (1, 0)
        }
        (Some(_), None) => {
            let best = (0..matrix.rows())
                .map(|i| matrix.get(i, 0))
                .fold(0.0, f64::max);
            ops.push(AlignmentOp::insert_right(ri, 1.0 - best));
            (0, 1)
        }
        (Some(1), Some(1)) => {
            ops.push(AlignmentOp::pair(OpKind::Swap, li, ri + 1, averaged(0, 1)));
            ops.push(AlignmentOp::pair(OpKind::Swap, li + 1, ri, averaged(1, 0)));
            (2, 2)
        }
        _ => {
            let confidence = averaged(0, 0);
            let mut op = AlignmentOp::pair(OpKind::Match, li, ri, confidence);
            op.low_confidence = confidence < tau;
            ops.push(op);
            (1, 1)
        }
    }
}

/// Aligns line `k` of `left` with line `k` of `right` for every `k`.
pub fn align_documents<S: SimilarityScorer + ?Sized>(
    left: &Document,
    right: &Document,
    config: &AlignConfig,
    scorer: &S,
) -> Result<Vec<AlignmentResult>> {
    if left.lines.len() != right.lines.len() || left.lines.is_empty() {
        return Err(Error::LinePairing {
            left: left.lines.len(),
            right: right.lines.len(),
        });
    }
    left.lines
        .iter()
        .zip(&right.lines)
        .map(|(l, r)| align_lines(l, r, config, scorer))
        .collect()
}

/// Fraction of ground-truth ops reproduced (same kind and positions) by
/// `result`.
pub fn alignment_accuracy(result: &[AlignmentOp], truth: &[AlignmentOp]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptySet("alignment accuracy"));
    }
    let key = |o: &AlignmentOp| (o.kind, o.left_pos, o.right_pos);
    let mut predicted: HashMap<_, usize> = HashMap::new();
    for op in result {
        *predicted.entry(key(op)).or_default() += 1;
    }
    let mut hits = 0usize;
    for op in truth {
        if let Some(n) = predicted.get_mut(&key(op)).filter(|n| **n > 0) {
            *n -= 1;
            hits += 1;
        }
    }
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests;
