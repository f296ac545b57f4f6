//! Domain types shared across the crate: subword rasters, annotated
//! occurrences, text lines and the model canvas.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale raster with intensities in `[0, 1]`, stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SubwordImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl SubwordImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for {height}x{width}, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidImage(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Quantizes to 8 bits, the inverse of [`crate::preprocess::normalize_image`].
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

impl fmt::Debug for SubwordImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubwordImage")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

/// Fixed model input size. Height first: `83x69` is 83 rows by 69 columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanvasSpec {
    pub height: usize,
    pub width: usize,
}

impl CanvasSpec {
    pub const MIN_SIDE: usize = 8;

    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < Self::MIN_SIDE || width < Self::MIN_SIDE {
            return Err(Error::InvalidConfig(format!(
                "canvas sides must be at least {}, got {height}x{width}",
                Self::MIN_SIDE
            )));
        }
        Ok(Self { height, width })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl Default for CanvasSpec {
    fn default() -> Self {
        Self {
            height: 83,
            width: 69,
        }
    }
}

impl fmt::Display for CanvasSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl std::str::FromStr for CanvasSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::InvalidConfig(format!("canvas `{s}` is not HEIGHTxWIDTH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidConfig(format!("canvas `{s}`: {e}")))
        };
        Self::new(parse(h)?, parse(w)?)
    }
}

/// Location of one subword occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenKey {
    pub manuscript_id: String,
    pub page: u32,
    pub line: u32,
    pub position: u32,
}

impl fmt::Display for TokenKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.manuscript_id, self.page, self.line, self.position
        )
    }
}

/// One annotated subword occurrence.
///
/// The raster is optional so that purely symbolic corpora (oracle-scored
/// alignment runs) do not pay for images they never look at.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordAnnotation {
    pub key: TokenKey,
    pub form_id: String,
    pub image: Option<Arc<SubwordImage>>,
    pub image_path: Option<PathBuf>,
}

impl SubwordAnnotation {
    pub fn new(
        manuscript_id: impl Into<String>,
        page: u32,
        line: u32,
        position: u32,
        form_id: impl Into<String>,
    ) -> Self {
        Self {
            key: TokenKey {
                manuscript_id: manuscript_id.into(),
                page,
                line,
                position,
            },
            form_id: form_id.into(),
            image: None,
            image_path: None,
        }
    }

    pub fn with_image(mut self, image: Arc<SubwordImage>) -> Self {
        self.image = Some(image);
        self
    }

    pub fn manuscript_id(&self) -> &str {
        &self.key.manuscript_id
    }

    pub fn image(&self) -> Result<&SubwordImage> {
        self.image
            .as_deref()
            .ok_or_else(|| Error::InvalidImage(format!("token {} carries no image", self.key)))
    }

    /// Path if the image came from disk, otherwise the token key.
    pub fn source_label(&self) -> String {
        match &self.image_path {
            Some(p) => p.display().to_string(),
            None => self.key.to_string(),
        }
    }
}

/// Tokens of one physical line in reading order.
#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    pub page: u32,
    pub line: u32,
    tokens: Vec<SubwordAnnotation>,
}

impl TextLine {
    /// Checks that positions run `0, 1, 2, ...` and that every token belongs
    /// to the same page and line.
    pub fn new(page: u32, line: u32, tokens: Vec<SubwordAnnotation>) -> Result<Self> {
        for (i, t) in tokens.iter().enumerate() {
            if t.key.position as usize != i {
                return Err(Error::InvalidConfig(format!(
                    "line {page}/{line}: expected position {i}, found {} ({})",
                    t.key.position, t.key
                )));
            }
            if t.key.page != page || t.key.line != line {
                return Err(Error::InvalidConfig(format!(
                    "token {} does not belong to line {page}/{line}",
                    t.key
                )));
            }
            if t.form_id.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "token {} has an empty form",
                    t.key
                )));
            }
        }
        Ok(Self { page, line, tokens })
    }

    /// Builds a line from form ids alone; handy for symbolic alignment.
    pub fn from_forms<S: AsRef<str>>(
        manuscript_id: &str,
        page: u32,
        line: u32,
        forms: &[S],
    ) -> Self {
        let tokens = forms
            .iter()
            .enumerate()
            .map(|(i, f)| SubwordAnnotation::new(manuscript_id, page, line, i as u32, f.as_ref()))
            .collect();
        Self { page, line, tokens }
    }

    pub fn tokens(&self) -> &[SubwordAnnotation] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form_id.as_str())
    }
}

/// A manuscript as an ordered list of lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub manuscript_id: String,
    pub lines: Vec<TextLine>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.lines.iter().map(TextLine::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &SubwordAnnotation> {
        self.lines.iter().flat_map(|l| l.tokens.iter())
    }
}
