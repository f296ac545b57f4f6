use proptest::prelude::*;

use scriptalign::align::{align_lines, AlignConfig, OpKind};
use scriptalign::assignment::{count_inversions, solve_assignment, SimilarityMatrix};
use scriptalign::preprocess::resize_bilinear;
use scriptalign::siamese::OracleScorer;
use scriptalign::synth::{generate_pair, replay_truth, SynthConfig};
use scriptalign::SubwordImage;

fn brute_force(m: &SimilarityMatrix) -> f64 {
    fn go(m: &SimilarityMatrix, row: usize, used: &mut [bool], acc: f64) -> f64 {
        if row == m.rows() {
            return acc;
        }
        let free_cols = used.iter().filter(|u| !**u).count();
        let mut best = if m.rows() - row > free_cols {
            go(m, row + 1, used, acc)
        } else {
            f64::NEG_INFINITY
        };
        for c in 0..m.cols() {
            if !used[c] {
                used[c] = true;
                best = best.max(go(m, row + 1, used, acc + m.get(row, c)));
                used[c] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; m.cols()], 0.0)
}

fn naive_inversions(pairs: &[(usize, usize)]) -> usize {
    let mut n = 0;
    for (i, a) in pairs.iter().enumerate() {
        for b in &pairs[i + 1..] {
            if (a.0 < b.0 && a.1 > b.1) || (a.0 > b.0 && a.1 < b.1) {
                n += 1;
            }
        }
    }
    n
}

fn matrix() -> impl Strategy<Value = SimilarityMatrix> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.0f64..1.0, r * c)
            .prop_map(move |v| SimilarityMatrix::new(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn assignment_is_optimal(m in matrix()) {
        let a = solve_assignment(&m);
        prop_assert_eq!(a.matches.len(), m.rows().min(m.cols()));
        prop_assert_eq!(a.total_score, brute_force(&m));
        prop_assert_eq!(a.inversions, naive_inversions(&a.matches));
    }

    #[test]
    fn inversion_count_matches_quadratic_count(perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle()) {
        let pairs: Vec<(usize, usize)> = perm.into_iter().enumerate().collect();
        prop_assert_eq!(count_inversions(&pairs).unwrap(), naive_inversions(&pairs));
    }

    #[test]
    fn synthetic_truth_replays_to_right_line(
        seed in any::<u64>(),
        p_swap in 0.0f64..0.2,
        p_insert in 0.0f64..0.2,
        p_delete in 0.0f64..0.2,
        p_replace in 0.0f64..0.2,
    ) {
        let cfg = SynthConfig { lines: 2, tokens_per_line: (1, 30), p_swap, p_insert, p_delete, p_replace, seed, ..Default::default() };
        let pair = generate_pair(&cfg).unwrap();
        for k in 0..2 {
            let left: Vec<String> = pair.left.lines[k].forms().map(str::to_string).collect();
            let right: Vec<String> = pair.right.lines[k].forms().map(str::to_string).collect();
            let replayed = replay_truth(&left, &pair.truth[k], &pair.inserted[k]);
            prop_assert_eq!(replayed, Some(right));
        }
    }

    #[test]
    fn alignment_is_always_a_partition(
        seed in any::<u64>(),
        flip in 0.0f64..0.5,
        min_window in 2usize..8,
        max_growth in 0usize..6,
        threshold in 0.1f64..0.9,
        lengths in (1usize..25, 1usize..25),
    ) {
        let cfg = SynthConfig { lines: 1, tokens_per_line: (lengths.0, lengths.0.max(lengths.1)), p_replace: 0.05, seed, ..Default::default() };
        let pair = generate_pair(&cfg).unwrap();
        let config = AlignConfig { min_window, threshold, max_growth };
        prop_assume!(!pair.right.lines[0].is_empty());
        let scorer = OracleScorer::new(flip, seed).unwrap();
        let res = align_lines(&pair.left.lines[0], &pair.right.lines[0], &config, &scorer).unwrap();
        prop_assert!(res.is_partition());
        for op in &res.ops {
            prop_assert!((0.0..=1.0).contains(&op.confidence));
            match op.kind {
                OpKind::Match | OpKind::Swap => prop_assert!(op.left_pos.is_some() && op.right_pos.is_some()),
                OpKind::InsertLeft => prop_assert!(op.left_pos.is_some() && op.right_pos.is_none()),
                OpKind::InsertRight => prop_assert!(op.left_pos.is_none() && op.right_pos.is_some()),
            }
        }
    }

    #[test]
    fn resizing_stays_in_unit_range(
        (h, w, px) in (2usize..20, 2usize..20).prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(0.0f64..=1.0, h * w))),
        out in (1usize..40, 1usize..40),
    ) {
        let img = SubwordImage::new(h, w, px).unwrap();
        let r = resize_bilinear(&img, out.0, out.1);
        prop_assert_eq!((r.height(), r.width()), out);
        prop_assert!(r.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
