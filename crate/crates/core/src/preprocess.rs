//! Conversion of raw crops to the fixed model canvas.

use std::path::Path;

use crate::error::{Error, Result};
use crate::subword::{CanvasSpec, SubwordImage};

/// Maps 8-bit rows to `[0, 1]` intensities. Rows must all have the same length.
pub fn normalize_image(raw: &[Vec<u8>]) -> Result<SubwordImage> {
    let height = raw.len();
    let width = raw.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err(Error::InvalidImage("empty grid".into()));
    }
    if raw.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidImage("ragged rows".into()));
    }
    normalize_bytes(height, width, &raw.concat())
}

/// Same as [`normalize_image`] for a packed row-major buffer.
pub fn normalize_bytes(height: usize, width: usize, data: &[u8]) -> Result<SubwordImage> {
    if height == 0 || width == 0 || data.is_empty() {
        return Err(Error::InvalidImage("empty grid".into()));
    }
    let pixels = data.iter().map(|&v| v as f64 / 255.0).collect();
    SubwordImage::new(height, width, pixels)
}

/// Width after scaling `height x width` to `target_height` with the aspect
/// ratio kept, rounded half-up and never below one pixel.
pub fn aspect_width(height: usize, width: usize, target_height: usize) -> usize {
    let num = 2 * width * target_height + height;
    (num / (2 * height)).max(1)
}

/// Scales to the canvas height keeping the aspect ratio, then stretches or
/// squeezes the width to the canvas width. Both steps are bilinear.
pub fn rescale_to_canvas(img: &SubwordImage, spec: CanvasSpec) -> SubwordImage {
    let mid_width = aspect_width(img.height(), img.width(), spec.height);
    let step1 = resize_bilinear(img, spec.height, mid_width);
    resize_bilinear(&step1, spec.height, spec.width)
}

/// Bilinear resampling with pixel-centre alignment; same-size input is
/// returned unchanged.
pub fn resize_bilinear(img: &SubwordImage, out_h: usize, out_w: usize) -> SubwordImage {
    let (in_h, in_w) = (img.height(), img.width());
    if in_h == out_h && in_w == out_w {
        return img.clone();
    }
    let rows = sample_positions(in_h, out_h);
    let cols = sample_positions(in_w, out_w);
    let src = img.pixels();

    // vertical pass
    let mut tmp = vec![0.0; out_h * in_w];
    for (y, &(y0, y1, fy)) in rows.iter().enumerate() {
        let (r0, r1) = (
            &src[y0 * in_w..(y0 + 1) * in_w],
            &src[y1 * in_w..(y1 + 1) * in_w],
        );
        for x in 0..in_w {
            tmp[y * in_w + x] = r0[x] * (1.0 - fy) + r1[x] * fy;
        }
    }
    // horizontal pass
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let row = &tmp[y * in_w..(y + 1) * in_w];
        for &(x0, x1, fx) in &cols {
            out.push((row[x0] * (1.0 - fx) + row[x1] * fx).clamp(0.0, 1.0));
        }
    }
    SubwordImage::new(out_h, out_w, out).expect("bilinear output stays in range")
}

fn sample_positions(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Reads an 8-bit grayscale PNG or PGM (colour inputs are converted to luma).
pub fn read_grayscale(path: &Path) -> Result<SubwordImage> {
    let img = image::open(path)
        .map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))?
        .to_luma8();
    normalize_bytes(img.height() as usize, img.width() as usize, img.as_raw())
}

pub fn load_for_canvas(path: &Path, spec: CanvasSpec) -> Result<SubwordImage> {
    Ok(rescale_to_canvas(&read_grayscale(path)?, spec))
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png(img: &SubwordImage, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .ok_or_else(|| Error::Internal("raster size mismatch".into()))?;
    buf.save(path)
        .map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))
}

/// Encodes an 8-bit grayscale PNG in memory.
pub fn encode_png(img: &SubwordImage) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .ok_or_else(|| Error::Internal("raster size mismatch".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::InvalidImage(e.to_string()))?;
    Ok(out.into_inner())
}
