//! Solves a small window assignment and counts crossing matches.
//!
//! cargo run --release --example assignment

use scriptalign::assignment::{count_inversions, solve_assignment, SimilarityMatrix};

fn main() -> scriptalign::Result<()> {
    // Left window "A B C D", right window "A C B D E": B and C swapped, E added.
    let rows = vec![
        vec![0.97, 0.05, 0.10, 0.02, 0.08],
        vec![0.04, 0.12, 0.91, 0.07, 0.03],
        vec![0.06, 0.89, 0.08, 0.11, 0.09],
        vec![0.01, 0.10, 0.04, 0.95, 0.20],
    ];
    let matrix = SimilarityMatrix::from_rows(&rows)?;
    let a = solve_assignment(&matrix);
    for &(l, r) in &a.matches {
        println!("left {l} -> right {r}  score {:.2}", matrix.get(l, r));
    }
    println!(
        "total score {:.2}, {} crossing pair(s)",
        a.total_score, a.inversions
    );
    println!(
        "unmatched right column(s): {:?}",
        (0..matrix.cols())
            .filter(|&c| a.left_of(c).is_none())
            .collect::<Vec<_>>()
    );
    assert_eq!(count_inversions(&a.matches)?, a.inversions);
    Ok(())
}
