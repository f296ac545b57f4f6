//! Aligns seeded synthetic line pairs with the oracle scorer and reports
//! alignment accuracy with and without scorer noise.
//!
//! cargo run --release --example align_synthetic -- [pairs] [flip_probability]

use scriptalign::align::{align_lines, alignment_accuracy, AlignConfig};
use scriptalign::siamese::OracleScorer;
use scriptalign::synth::{generate_pair, SynthConfig};

fn main() -> scriptalign::Result<()> {
    let mut args = std::env::args().skip(1);
    let pairs: u64 = args.next().map_or(500, |a| a.parse().expect("pair count"));
    let flip: f64 = args
        .next()
        .map_or(0.05, |a| a.parse().expect("flip probability"));
    let config = AlignConfig::default();

    for (label, p) in [("noise-free", 0.0), ("noisy", flip)] {
        let mut accs = Vec::new();
        let mut perfect = 0;
        for s in 0..pairs {
            let pair = generate_pair(&SynthConfig {
                lines: 1,
                seed: s,
                ..Default::default()
            })?;
            let scorer = OracleScorer::new(p, s)?;
            let res = align_lines(&pair.left.lines[0], &pair.right.lines[0], &config, &scorer)?;
            assert!(res.is_partition());
            let acc = alignment_accuracy(&res.ops, &pair.truth[0])?;
            perfect += usize::from(acc == 1.0);
            accs.push(acc);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let min = accs.iter().cloned().fold(1.0, f64::min);
        println!("{label:>10} (flip {p}): mean accuracy {mean:.4}, min {min:.4}, perfect {perfect}/{pairs}");
    }
    Ok(())
}
