use super::*;
use crate::siamese::OracleScorer;

fn line(forms: &str) -> TextLine {
    let f: Vec<&str> = forms.split_whitespace().collect();
    TextLine::from_forms("m", 0, 0, &f)
}

fn run(l: &str, r: &str, window: usize) -> AlignmentResult {
    let cfg = AlignConfig {
        min_window: window,
        ..Default::default()
    };
    align_lines(&line(l), &line(r), &cfg, &OracleScorer::exact()).unwrap()
}

fn kinds(res: &AlignmentResult) -> Vec<(OpKind, Option<usize>, Option<usize>)> {
    res.ops
        .iter()
        .map(|o| (o.kind, o.left_pos, o.right_pos))
        .collect()
}

#[test]
fn classify_examples() {
    let ident = SimilarityMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let straight = Assignment {
        matches: vec![(0, 0), (1, 1)],
        total_score: 2.0,
        inversions: 0,
    };
    let crossed = Assignment {
        matches: vec![(0, 1), (1, 0)],
        total_score: 2.0,
        inversions: 1,
    };
    assert_eq!(
        classify_window(&ident, &straight, 0.5),
        WindowClass::Identical
    );
    assert_eq!(classify_window(&ident, &crossed, 0.5), WindowClass::Swapped);
    let weak = SimilarityMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ])
    .unwrap();
    let diag = Assignment {
        matches: vec![(0, 0), (1, 1), (2, 2)],
        total_score: 2.0,
        inversions: 0,
    };
    assert_eq!(classify_window(&weak, &diag, 0.5), WindowClass::NeedsGrowth);
    let mixed = SimilarityMatrix::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ])
    .unwrap();
    let m = Assignment {
        matches: vec![(0, 1), (1, 0), (2, 2)],
        total_score: 2.0,
        inversions: 1,
    };
    assert_eq!(classify_window(&mixed, &m, 0.5), WindowClass::Mixed);
}

fn growth(l: &str, r: &str, window: usize) -> GrowthChoice {
    let (l, r) = (line(l), line(r));
    let st = WindowState {
        left_start: 0,
        right_start: 0,
        left_len: window.min(l.len()),
        right_len: window.min(r.len()),
    };
    let oracle = OracleScorer::exact();
    let m = SimilarityMatrix::from_fn(st.left_len, st.right_len, |i, j| {
        oracle.score(&l.tokens()[i], &r.tokens()[j]).unwrap()
    })
    .unwrap();
    let a = solve_assignment(&m);
    choose_growth_side(&l, &r, &st, &m, &a, 0.5, 8, &oracle).unwrap()
}

#[test]
fn growth_side_examples() {
    assert_eq!(
        growth("A B X C D", "A B C D", 3),
        GrowthChoice {
            side: Side::Left,
            distance: Some(1)
        }
    );
    assert_eq!(
        growth("A B C D", "A B X C D", 3),
        GrowthChoice {
            side: Side::Right,
            distance: Some(1)
        }
    );
    assert_eq!(
        growth("A B X", "A B Y", 3),
        GrowthChoice {
            side: Side::Left,
            distance: None
        }
    );
    assert_eq!(
        growth("A B X", "A B Y Z", 3),
        GrowthChoice {
            side: Side::Right,
            distance: None
        }
    );
}

#[test]
fn identical_lines() {
    let text: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
    let res = run(&text.join(" "), &text.join(" "), 5);
    assert_eq!(res.ops.len(), 20);
    assert!(res
        .ops
        .iter()
        .all(|o| o.kind == OpKind::Match && o.confidence == 1.0 && o.left_pos == o.right_pos));
    assert_eq!(res.coverage, (1.0, 1.0));
}

#[test]
fn adjacent_swap() {
    let res = run("A B C D E", "A B D C E", 5);
    assert_eq!(
        kinds(&res),
        vec![
            (OpKind::Match, Some(0), Some(0)),
            (OpKind::Match, Some(1), Some(1)),
            (OpKind::Swap, Some(2), Some(3)),
            (OpKind::Swap, Some(3), Some(2)),
            (OpKind::Match, Some(4), Some(4)),
        ]
    );
}

#[test]
fn single_insertion() {
    let res = run("A B C D E", "A B X C D E", 5);
    assert_eq!(res.count(OpKind::Match), 5);
    assert_eq!(res.count(OpKind::InsertRight), 1);
    assert!(res
        .ops
        .iter()
        .any(|o| o.kind == OpKind::InsertRight && o.right_pos == Some(2)));
    assert!(res.is_partition());
}

#[test]
fn swap_across_window_boundary() {
    let res = run("A B C D E F G H", "A B C D F E G H", 5);
    assert!(res
        .ops
        .iter()
        .any(|o| o.kind == OpKind::Swap && o.left_pos == Some(4) && o.right_pos == Some(5)));
    assert!(res
        .ops
        .iter()
        .any(|o| o.kind == OpKind::Swap && o.left_pos == Some(5) && o.right_pos == Some(4)));
    assert_eq!(res.count(OpKind::Match), 6);
}

#[test]
fn replacement_becomes_two_insertions() {
    let res = run("A B C D E F", "A B Y D E F", 5);
    assert_eq!(res.count(OpKind::Match), 5);
    assert!(res
        .ops
        .iter()
        .any(|o| o.kind == OpKind::InsertLeft && o.left_pos == Some(2)));
    assert!(res
        .ops
        .iter()
        .any(|o| o.kind == OpKind::InsertRight && o.right_pos == Some(2)));
}

#[test]
fn long_insertion_uses_single_steps() {
    let left = "A B C D E F G H I J";
    let right = "A n1 n2 n3 n4 n5 B C D E F G H I J";
    let cfg = AlignConfig {
        min_window: 3,
        max_growth: 4,
        ..Default::default()
    };
    let (res, trace) =
        align_lines_traced(&line(left), &line(right), &cfg, &OracleScorer::exact()).unwrap();
    assert!(res.is_partition());
    assert!(trace
        .iter()
        .all(|s| s.state.left_len <= 7 && s.state.right_len <= 7));
    assert_eq!(res.count(OpKind::Match), 10, "{:?}", kinds(&res));
    assert_eq!(res.count(OpKind::InsertRight), 5);
    assert!(trace
        .iter()
        .any(|s| matches!(s.action, StepAction::Step { .. })));
}

#[test]
fn short_lines_and_tail_windows() {
    let res = run("A", "A", 5);
    assert_eq!(kinds(&res), vec![(OpKind::Match, Some(0), Some(0))]);
    let res = run("A B C D E F G", "A B C D E F G", 5);
    assert_eq!(res.count(OpKind::Match), 7);
    let res = run("A B", "C D E", 5);
    assert!(res.is_partition());
    assert_eq!(res.count(OpKind::InsertLeft), 2);
    assert_eq!(res.count(OpKind::InsertRight), 3);
}

#[test]
fn empty_lines_rejected() {
    let empty = TextLine::new(0, 0, vec![]).unwrap();
    let cfg = AlignConfig::default();
    assert!(matches!(
        align_lines(&empty, &line("A"), &cfg, &OracleScorer::exact()),
        Err(Error::EmptyLine(_))
    ));
    assert!(matches!(
        align_lines(&line("A"), &empty, &cfg, &OracleScorer::exact()),
        Err(Error::EmptyLine(_))
    ));
}

#[test]
fn config_validation() {
    assert!(AlignConfig {
        min_window: 1,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(AlignConfig {
        threshold: 1.0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(AlignConfig::default().validate().is_ok());
}

#[test]
fn mirrored_inputs_mirror_ops() {
    let (l, r) = ("A B X C D E F G", "A B C D Y E G F");
    let fwd = run(l, r, 5);
    let back = run(r, l, 5);
    let mut want: Vec<_> = fwd
        .ops
        .iter()
        .map(|o| o.mirrored())
        .map(|o| (o.kind, o.left_pos, o.right_pos))
        .collect();
    let mut got = kinds(&back);
    want.sort();
    got.sort();
    assert_eq!(want, got);
}

#[test]
fn documents() {
    let doc = |ms: &str| Document {
        manuscript_id: ms.into(),
        lines: (0..3)
            .map(|k| TextLine::from_forms(ms, 0, k, &["a", "b", "c"]))
            .collect(),
    };
    let res = align_documents(
        &doc("x"),
        &doc("y"),
        &AlignConfig::default(),
        &OracleScorer::exact(),
    )
    .unwrap();
    assert_eq!(res.len(), 3);
    assert!(res.iter().all(|r| r.count(OpKind::Match) == 3));
    let empty = Document {
        manuscript_id: "e".into(),
        lines: vec![],
    };
    assert!(matches!(
        align_documents(
            &empty,
            &empty,
            &AlignConfig::default(),
            &OracleScorer::exact()
        ),
        Err(Error::LinePairing { .. })
    ));
    let mut short = doc("z");
    short.lines.pop();
    assert!(matches!(
        align_documents(
            &doc("x"),
            &short,
            &AlignConfig::default(),
            &OracleScorer::exact()
        ),
        Err(Error::LinePairing { left: 3, right: 2 })
    ));
}

#[test]
fn accuracy_counting() {
    let truth: Vec<AlignmentOp> = (0..10)
        .map(|i| AlignmentOp::pair(OpKind::Match, i, i, 1.0))
        .collect();
    assert_eq!(alignment_accuracy(&truth, &truth).unwrap(), 1.0);
    assert_eq!(alignment_accuracy(&[], &truth).unwrap(), 0.0);
    let mut one_off = truth.clone();
    one_off[3] = AlignmentOp::insert_left(3, 1.0);
    assert!((alignment_accuracy(&one_off, &truth).unwrap() - 0.9).abs() < 1e-12);
    assert!(matches!(
        alignment_accuracy(&truth, &[]),
        Err(Error::EmptySet(_))
    ));
}

#[test]
fn outputs_render() {
    let doc = |ms: &str, forms: &[&str]| Document {
        manuscript_id: ms.into(),
        lines: vec![TextLine::from_forms(ms, 1, 2, forms)],
    };
    let (l, r) = (doc("x", &["a", "b", "c"]), doc("y", &["a", "c"]));
    let res = align_documents(&l, &r, &AlignConfig::default(), &OracleScorer::exact()).unwrap();
    let json = ops_json(&l, &r, &res);
    assert_eq!(json.len(), 3);
    let text = serde_json::to_string(&json).unwrap();
    assert!(text.contains("\"kind\":\"insert_left\""));
    assert!(text.contains("\"right\":null"));
    let tsv = ops_tsv(&l, &r, &res);
    assert_eq!(tsv.lines().count(), 4);
    let html = html_report(&l, &r, &res).unwrap();
    assert!(html.contains("<table>") && html.contains("insert_left"));
}
