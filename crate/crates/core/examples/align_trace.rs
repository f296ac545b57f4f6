//! Walks through the sliding-window decisions on one short edited line.
//!
//! cargo run --release --example align_trace

use scriptalign::align::{align_lines_traced, AlignConfig, StepAction};
use scriptalign::siamese::OracleScorer;
use scriptalign::TextLine;

fn main() -> scriptalign::Result<()> {
    // "c" and "d" swap places, "X Y" is added, "h" is dropped.
    let left = TextLine::from_forms(
        "a",
        0,
        0,
        &["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"],
    );
    let right = TextLine::from_forms(
        "b",
        0,
        0,
        &["a", "b", "d", "c", "e", "X", "Y", "f", "g", "i", "j", "k"],
    );
    let config = AlignConfig {
        min_window: 4,
        ..Default::default()
    };
    let (result, trace) = align_lines_traced(&left, &right, &config, &OracleScorer::exact())?;
    for step in &trace {
        let s = step.state;
        let what = match &step.action {
            StepAction::Commit { ops } => format!("commit {ops} op(s)"),
            StepAction::Grow { side, distance } => {
                format!("grow {side:?} (hit at distance {distance})")
            }
            StepAction::Step { ops } => format!("single step, {ops} op(s)"),
        };
        println!(
            "left {}..{} right {}..{}  {:?}: {what}",
            s.left_start,
            s.left_start + s.left_len,
            s.right_start,
            s.right_start + s.right_len,
            step.class
        );
    }
    println!("\nops:");
    let form = |line: &TextLine, p: Option<usize>| {
        p.map_or("-".to_string(), |p| line.tokens()[p].form_id.clone())
    };
    for op in &result.ops {
        println!(
            "{:<12} {:>2} {:>2}  conf {:.2}",
            op.kind.as_str(),
            form(&left, op.left_pos),
            form(&right, op.right_pos),
            op.confidence
        );
    }
    println!(
        "coverage left {:.2}, right {:.2}",
        result.coverage.0, result.coverage.1
    );
    Ok(())
}
