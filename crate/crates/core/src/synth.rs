//! Synthetic manuscripts with known ground truth.
//!
//! Two generators live here. [`generate_pair`] produces a left document and
//! an edited right document together with the exact alignment ops that
//! relate them. [`generate_corpus`] produces several "manuscripts" of the
//! same text, each drawn in its own procedural writing style, for training
//! and cross-validation.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{AlignmentOp, OpKind};
use crate::dataset;
use crate::error::{Error, Result};
use crate::preprocess;
use crate::seed;
use crate::subword::{CanvasSpec, Document, SubwordAnnotation, SubwordImage, TextLine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub vocab_size: u64,
    pub lines: usize,
    /// Inclusive bounds on the left line length.
    pub tokens_per_line: (usize, usize),
    pub p_swap: f64,
    pub p_insert: f64,
    pub p_delete: f64,
    pub p_replace: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            vocab_size: 1_000_000_000,
            lines: 10,
            tokens_per_line: (30, 60),
            p_swap: 0.05,
            p_insert: 0.05,
            p_delete: 0.05,
            p_replace: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_swap, self.p_insert, self.p_delete, self.p_replace];
        if ps.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::InvalidConfig(
                "edit probabilities must lie in [0, 1)".into(),
            ));
        }
        if ps.iter().sum::<f64>() >= 1.0 {
            return Err(Error::InvalidConfig(
                "edit probabilities must sum to less than 1".into(),
            ));
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidConfig(
                "vocabulary needs at least 2 forms".into(),
            ));
        }
        let (lo, hi) = self.tokens_per_line;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "bad line length range {lo}..={hi}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthPair {
    pub left: Document,
    pub right: Document,
    /// Ground-truth ops per line, indexed by token position in each line.
    pub truth: Vec<Vec<AlignmentOp>>,
    /// Forms of the inserted right tokens, per line, by right position.
    pub inserted: Vec<BTreeMap<usize, String>>,
}

fn form_name(k: u64) -> String {
    format!("w{k}")
}

fn fresh_form(rng: &mut ChaCha8Rng, vocab: u64, avoid: &str) -> String {
    loop {
        let f = form_name(rng.random_range(0..vocab));
        if f != avoid {
            return f;
        }
    }
}

/// Draws left lines uniformly from the vocabulary and derives right lines
/// by walking each left line once. At every token a single draw picks an
/// adjacent swap with the next token, an insertion before it, a deletion, a
/// replacement, or no edit.
pub fn generate_pair(config: &SynthConfig) -> Result<SynthPair> {
    config.validate()?;
    let (mut left_lines, mut right_lines) = (Vec::new(), Vec::new());
    let (mut truth, mut inserted) = (Vec::new(), Vec::new());
    for k in 0..config.lines {
        let mut rng = seed::rng(seed::derive_n(config.seed, &[k as u64]));
        let n = rng.random_range(config.tokens_per_line.0..=config.tokens_per_line.1);
        let left: Vec<String> = (0..n)
            .map(|_| form_name(rng.random_range(0..config.vocab_size)))
            .collect();
        let (right, ops, ins) = edit_line(&left, config, &mut rng);
        left_lines.push(TextLine::from_forms("left", 0, k as u32, &left));
        right_lines.push(TextLine::from_forms("right", 0, k as u32, &right));
        truth.push(ops);
        inserted.push(ins);
    }
    Ok(SynthPair {
        left: Document {
            manuscript_id: "left".into(),
            lines: left_lines,
        },
        right: Document {
            manuscript_id: "right".into(),
            lines: right_lines,
        },
        truth,
        inserted,
    })
}

type EditedLine = (Vec<String>, Vec<AlignmentOp>, BTreeMap<usize, String>);

fn edit_line(left: &[String], c: &SynthConfig, rng: &mut ChaCha8Rng) -> EditedLine {
    let mut right = Vec::with_capacity(left.len() + 4);
    let mut ops = Vec::with_capacity(left.len() + 4);
    let mut ins = BTreeMap::new();
    let mut i = 0;
    while i < left.len() {
        let u: f64 = rng.random();
        let r = right.len();
        if u < c.p_swap && i + 1 < left.len() {
            right.push(left[i + 1].clone());
            right.push(left[i].clone());
            ops.push(AlignmentOp::pair(OpKind::Swap, i, r + 1, 1.0));
            ops.push(AlignmentOp::pair(OpKind::Swap, i + 1, r, 1.0));
            i += 2;
            continue;
        }
        if u >= c.p_swap && u < c.p_swap + c.p_insert {
            let f = fresh_form(rng, c.vocab_size, &left[i]);
            ins.insert(r, f.clone());
            right.push(f);
            ops.push(AlignmentOp::insert_right(r, 1.0));
            right.push(left[i].clone());
            ops.push(AlignmentOp::pair(OpKind::Match, i, r + 1, 1.0));
        } else if u >= c.p_swap + c.p_insert && u < c.p_swap + c.p_insert + c.p_delete {
            ops.push(AlignmentOp::insert_left(i, 1.0));
        } else if u >= c.p_swap + c.p_insert + c.p_delete
            && u < c.p_swap + c.p_insert + c.p_delete + c.p_replace
        {
            let f = fresh_form(rng, c.vocab_size, &left[i]);
            ins.insert(r, f.clone());
            right.push(f);
            ops.push(AlignmentOp::insert_left(i, 1.0));
            ops.push(AlignmentOp::insert_right(r, 1.0));
        } else {
            right.push(left[i].clone());
            ops.push(AlignmentOp::pair(OpKind::Match, i, r, 1.0));
        }
        i += 1;
    }
    (right, ops, ins)
}

/// Rebuilds a right line from a left line, truth ops and the inserted
/// forms. Returns `None` when the ops do not describe a valid edit (a
/// position used twice, a gap, or an insertion without a form).
pub fn replay_truth(
    left: &[String],
    truth: &[AlignmentOp],
    inserted: &BTreeMap<usize, String>,
) -> Option<Vec<String>> {
    let mut slots: BTreeMap<usize, String> = BTreeMap::new();
    let mut used_left = vec![false; left.len()];
    for op in truth {
        if let Some(l) = op.left_pos {
            if l >= left.len() || std::mem::replace(&mut used_left[l], true) {
                return None;
            }
        }
        let form = match (op.kind, op.left_pos, op.right_pos) {
            (OpKind::Match | OpKind::Swap, Some(l), Some(r)) => Some((r, left[l].clone())),
            (OpKind::InsertRight, None, Some(r)) => Some((r, inserted.get(&r)?.clone())),
            (OpKind::InsertLeft, Some(_), None) => None,
            _ => return None,
        };
        if let Some((r, f)) = form {
            if slots.insert(r, f).is_some() {
                return None;
            }
        }
    }
    if !used_left.iter().all(|&u| u) {
        return None;
    }
    let n = slots.len();
    if slots.keys().enumerate().any(|(k, &r)| k != r) {
        return None;
    }
    let out: Vec<String> = slots.into_values().collect();
    debug_assert_eq!(out.len(), n);
    Some(out)
}

/// Stroke geometry of a style: pen width in pixels at the reference height
/// of 83, horizontal shear and a uniform scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleParams {
    pub stroke_width: f64,
    pub slant: f64,
    pub scale: f64,
}

pub fn style_params(style_id: u32) -> StyleParams {
    let mut rng = seed::rng(seed::derive_n(0x57_171e, &[style_id as u64]));
    StyleParams {
        stroke_width: rng.random_range(1.6..4.2),
        slant: rng.random_range(-0.35..0.35),
        scale: rng.random_range(0.8..1.0),
    }
}

/// Polyline segments in unit coordinates (x right, y down).
fn skeleton(form_id: &str) -> Vec<[(f64, f64); 2]> {
    let mut rng = seed::rng(seed::fnv1a(form_id.as_bytes()));
    let strokes = rng.random_range(3..=5);
    let mut segs = Vec::new();
    for _ in 0..strokes {
        let p: Vec<(f64, f64)> = (0..3)
            .map(|_| (rng.random_range(0.08..0.92), rng.random_range(0.08..0.92)))
            .collect();
        let steps = 10;
        let point = |t: f64| {
            let u = 1.0 - t;
            (
                u * u * p[0].0 + 2.0 * u * t * p[1].0 + t * t * p[2].0,
                u * u * p[0].1 + 2.0 * u * t * p[1].1 + t * t * p[2].1,
            )
        };
        for s in 0..steps {
            segs.push([
                point(s as f64 / steps as f64),
                point((s + 1) as f64 / steps as f64),
            ]);
        }
    }
    segs
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Renders the glyph of `form_id` in `style_id` onto `canvas`.
pub fn render_token(form_id: &str, style_id: u32, canvas: CanvasSpec) -> SubwordImage {
    render_token_variant(form_id, style_id, 0, canvas)
}

/// Like [`render_token`] with a small per-occurrence offset and pen-width
/// wobble; variant 0 is the undisturbed glyph.
pub fn render_token_variant(
    form_id: &str,
    style_id: u32,
    variant: u32,
    canvas: CanvasSpec,
) -> SubwordImage {
    let style = style_params(style_id);
    let (h, w) = (canvas.height as f64, canvas.width as f64);
    let unit = h / 83.0;
    let (mut ox, mut oy, mut wobble) = (0.0, 0.0, 0.0);
    if variant > 0 {
        let mut rng = seed::rng(seed::derive_n(
            seed::fnv1a(form_id.as_bytes()),
            &[style_id as u64, variant as u64],
        ));
        ox = rng.random_range(-1.5..1.5) * unit;
        oy = rng.random_range(-1.5..1.5) * unit;
        wobble = rng.random_range(-0.3..0.3);
    }
    let half = ((style.stroke_width + wobble) * unit / 2.0).max(0.5);
    let segs: Vec<[(f64, f64); 2]> = skeleton(form_id)
        .into_iter()
        .map(|s| {
            s.map(|(x, y)| {
                let (x, y) = (0.5 + (x - 0.5) * style.scale, 0.5 + (y - 0.5) * style.scale);
                let x = x + style.slant * (0.5 - y);
                (x * (w - 1.0) + ox, y * (h - 1.0) + oy)
            })
        })
        .collect();
    let mut pixels = vec![0.0; canvas.pixels()];
    for (r, row) in pixels.chunks_mut(canvas.width).enumerate() {
        for (c, px) in row.iter_mut().enumerate() {
            let (x, y) = (c as f64, r as f64);
            let d = segs
                .iter()
                .filter(|s| {
                    let (minx, maxx) = (s[0].0.min(s[1].0), s[0].0.max(s[1].0));
                    let (miny, maxy) = (s[0].1.min(s[1].1), s[0].1.max(s[1].1));
                    x >= minx - half - 1.0
                        && x <= maxx + half + 1.0
                        && y >= miny - half - 1.0
                        && y <= maxy + half + 1.0
                })
                .map(|s| segment_distance(x, y, s[0], s[1]))
                .fold(f64::INFINITY, f64::min);
            let ink = (half + 0.5 - d).clamp(0.0, 1.0);
            *px = (ink * 255.0).round() / 255.0;
        }
    }
    SubwordImage::new(canvas.height, canvas.width, pixels).expect("rendered values lie in [0, 1]")
}

/// Fraction of pixels whose values differ by more than one half.
pub fn pixel_difference(a: &SubwordImage, b: &SubwordImage) -> f64 {
    let n = a.pixels().len().max(1);
    a.pixels()
        .iter()
        .zip(b.pixels())
        .filter(|(x, y)| (*x - *y).abs() > 0.5)
        .count() as f64
        / n as f64
}

/// Renders every token of `doc` in `style_id`. Repeated occurrences of a
/// form within a document get successive variants when `jitter` is set.
pub fn attach_images(doc: &mut Document, style_id: u32, canvas: CanvasSpec, jitter: bool) {
    let mut cache: HashMap<(String, u32), Arc<SubwordImage>> = HashMap::new();
    let mut seen: HashMap<String, u32> = HashMap::new();
    for line in &mut doc.lines {
        let tokens: Vec<SubwordAnnotation> = line
            .tokens()
            .iter()
            .map(|t| {
                let variant = if jitter {
                    let v = seen.entry(t.form_id.clone()).or_insert(0);
                    *v += 1;
                    *v - 1
                } else {
                    0
                };
                let img = cache
                    .entry((t.form_id.clone(), variant))
                    .or_insert_with(|| {
                        Arc::new(render_token_variant(&t.form_id, style_id, variant, canvas))
                    })
                    .clone();
                t.clone().with_image(img)
            })
            .collect();
        *line = TextLine::new(line.page, line.line, tokens)
            .expect("re-imaged line keeps its positions");
    }
}

/// Several manuscripts of one shared text, one style each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub manuscripts: usize,
    pub forms: usize,
    /// Occurrences of every form in every manuscript.
    pub occurrences: usize,
    pub tokens_per_line: usize,
    pub canvas: CanvasSpec,
    /// Give repeated occurrences small per-occurrence perturbations.
    pub jitter: bool,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            manuscripts: 7,
            forms: 40,
            occurrences: 3,
            tokens_per_line: 12,
            canvas: CanvasSpec::default(),
            jitter: true,
            seed: 0,
        }
    }
}

/// Generates `manuscripts` documents named `ms0`, `ms1`, ... Manuscript
/// `k` is rendered in style `k`. Each contains every form `occurrences`
/// times, in its own shuffled order.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<Document>> {
    if config.manuscripts == 0
        || config.forms < 2
        || config.occurrences == 0
        || config.tokens_per_line == 0
    {
        return Err(Error::InvalidConfig(
            "corpus needs manuscripts, at least 2 forms, occurrences and line length".into(),
        ));
    }
    let mut docs = Vec::with_capacity(config.manuscripts);
    for m in 0..config.manuscripts {
        let id = format!("ms{m}");
        let mut forms: Vec<String> = (0..config.forms)
            .flat_map(|f| std::iter::repeat_n(format!("f{f}"), config.occurrences))
            .collect();
        forms.shuffle(&mut seed::rng(seed::derive_n(config.seed, &[m as u64])));
        let lines = forms
            .chunks(config.tokens_per_line)
            .enumerate()
            .map(|(k, chunk)| TextLine::from_forms(&id, 0, k as u32, chunk))
            .collect();
        let mut doc = Document {
            manuscript_id: id,
            lines,
        };
        attach_images(&mut doc, m as u32, config.canvas, config.jitter);
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes every token image under `dir/images/<manuscript>/` and a
/// manifest at `dir/manifest.csv`. Returns the manifest path.
pub fn write_corpus(docs: &mut [Document], dir: &Path) -> Result<std::path::PathBuf> {
    for doc in docs.iter_mut() {
        let img_dir = dir.join("images").join(&doc.manuscript_id);
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        for line in &mut doc.lines {
            let mut tokens = Vec::with_capacity(line.len());
            for t in line.tokens() {
                let mut t = t.clone();
                if let Some(img) = t.image.as_deref() {
                    let path = img_dir.join(format!(
                        "{}_{}_{}.png",
                        t.key.page, t.key.line, t.key.position
                    ));
                    preprocess::write_png(img, &path)?;
                    t.image_path = Some(path);
                }
                tokens.push(t);
            }
            *line = TextLine::new(line.page, line.line, tokens)?;
        }
    }
    let manifest = dir.join("manifest.csv");
    dataset::write_manifest(docs, &manifest)?;
    Ok(manifest)
}
