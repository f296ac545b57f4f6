//! Rescales a grayscale crop onto the model canvas and writes both as PNG.
//!
//! cargo run --release --example preprocess_image -- [input.png] [out_dir]
//!
//! Without an input a wide synthetic crop is generated.

use std::path::PathBuf;

use scriptalign::preprocess::{
    aspect_width, normalize_image, read_grayscale, rescale_to_canvas, write_png,
};
use scriptalign::CanvasSpec;

fn main() -> scriptalign::Result<()> {
    let mut args = std::env::args().skip(1);
    let input = args.next().map(PathBuf::from);
    let out_dir = args.next().map_or_else(std::env::temp_dir, PathBuf::from);

    let raw = match &input {
        Some(path) => read_grayscale(path)?,
        None => {
            // 40 x 150 crop with a dark diagonal stroke on white.
            let rows: Vec<Vec<u8>> = (0..40i32)
                .map(|r| {
                    (0..150i32)
                        .map(|c| if (c / 4 - r).abs() < 3 { 20 } else { 255 })
                        .collect()
                })
                .collect();
            normalize_image(&rows)?
        }
    };
    let canvas = CanvasSpec::default();
    let fitted = rescale_to_canvas(&raw, canvas);
    println!(
        "input {}x{} -> aspect-preserving width {} at height {} -> canvas {canvas}",
        raw.height(),
        raw.width(),
        aspect_width(raw.height(), raw.width(), canvas.height),
        canvas.height
    );
    let mean = fitted.pixels().iter().sum::<f64>() / fitted.pixels().len() as f64;
    println!("canvas mean intensity {mean:.3}");

    let before = out_dir.join("crop_input.png");
    let after = out_dir.join("crop_canvas.png");
    write_png(&raw, &before)?;
    write_png(&fitted, &after)?;
    println!("wrote {} and {}", before.display(), after.display());
    Ok(())
}
