//! Corpus ingestion, leave-two-out split plans, and balanced pair
//! generation for training, validation and testing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess;
use crate::seed;
use crate::subword::{CanvasSpec, Document, SubwordAnnotation, TextLine};

pub const DEFAULT_CAP_PER_FORM: usize = 400;
pub const DEFAULT_MIN_SHARE: f64 = 0.20;
/// Extra draws allowed when a capped sample misses the per-manuscript share.
pub const SHARE_RETRIES: usize = 8;

/// Index of one occurrence inside a corpus: (document, line, position).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenRef {
    pub doc: usize,
    pub line: usize,
    pub pos: usize,
}

/// Annotated manuscripts plus an index from form to its occurrences.
#[derive(Debug, Clone, Default)]
pub struct ManuscriptCorpus {
    documents: Vec<Document>,
    form_index: BTreeMap<String, BTreeMap<usize, Vec<TokenRef>>>,
}

impl ManuscriptCorpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for d in &documents {
            if !seen.insert(d.manuscript_id.clone()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate manuscript id `{}`",
                    d.manuscript_id
                )));
            }
        }
        let mut form_index: BTreeMap<String, BTreeMap<usize, Vec<TokenRef>>> = BTreeMap::new();
        for (doc, d) in documents.iter().enumerate() {
            for (line, l) in d.lines.iter().enumerate() {
                for (pos, t) in l.tokens().iter().enumerate() {
                    form_index
                        .entry(t.form_id.clone())
                        .or_default()
                        .entry(doc)
                        .or_default()
                        .push(TokenRef { doc, line, pos });
                }
            }
        }
        Ok(Self {
            documents,
            form_index,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn manuscript_ids(&self) -> Vec<&str> {
        self.documents
            .iter()
            .map(|d| d.manuscript_id.as_str())
            .collect()
    }

    pub fn document_index(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.manuscript_id == id)
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.document_index(id).map(|i| &self.documents[i])
    }

    pub fn token(&self, r: TokenRef) -> &SubwordAnnotation {
        &self.documents[r.doc].lines[r.line].tokens()[r.pos]
    }

    pub fn form_count(&self) -> usize {
        self.form_index.len()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Document::token_count).sum()
    }

    /// Occurrences of a form grouped by document index.
    pub fn occurrences(&self, form: &str) -> Option<&BTreeMap<usize, Vec<TokenRef>>> {
        self.form_index.get(form)
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.form_index.keys().map(String::as_str)
    }

    fn refs_of(&self, doc: usize) -> Vec<TokenRef> {
        let d = &self.documents[doc];
        d.lines
            .iter()
            .enumerate()
            .flat_map(|(line, l)| (0..l.len()).map(move |pos| TokenRef { doc, line, pos }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageLoading {
    /// Decode and rescale every referenced image.
    Load(CanvasSpec),
    /// Only check that referenced files exist.
    CheckOnly,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    manuscript_id: String,
    page: u32,
    line: u32,
    position: u32,
    form_id: String,
    #[serde(default)]
    image_path: String,
}

pub const MANIFEST_HEADER: [&str; 6] = [
    "manuscript_id",
    "page",
    "line",
    "position",
    "form_id",
    "image_path",
];

/// Reads a manifest CSV (`manuscript_id,page,line,position,form_id,image_path`,
/// header required). Image paths are resolved against the manifest's
/// directory; an empty path means the token has no raster.
pub fn load_corpus(manifest_path: &Path, images: ImageLoading) -> Result<ManuscriptCorpus> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let manifest_err = |row: usize, message: String| Error::Manifest {
        path: manifest_path.to_path_buf(),
        row,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| manifest_err(1, e.to_string()))?
        .clone();
    if headers.iter().ne(MANIFEST_HEADER.iter().copied()) && !headers.is_empty() {
        return Err(manifest_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                MANIFEST_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    // manuscript -> (page, line) -> position -> token
    let mut order: Vec<String> = Vec::new();
    type Lines = BTreeMap<(u32, u32), BTreeMap<u32, SubwordAnnotation>>;
    let mut grouped: HashMap<String, Lines> = HashMap::new();
    let mut cache: HashMap<PathBuf, Arc<crate::subword::SubwordImage>> = HashMap::new();

    for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| manifest_err(row, e.to_string()))?;
        if rec.manuscript_id.is_empty() {
            return Err(manifest_err(row, "empty manuscript_id".into()));
        }
        if rec.form_id.is_empty() {
            return Err(manifest_err(row, "empty form_id".into()));
        }
        let mut token = SubwordAnnotation::new(
            &rec.manuscript_id,
            rec.page,
            rec.line,
            rec.position,
            &rec.form_id,
        );
        if !rec.image_path.is_empty() {
            let path = base.join(&rec.image_path);
            let dangling = |message: String| Error::DanglingImage {
                path: manifest_path.to_path_buf(),
                row,
                image: path.clone(),
                message,
            };
            match images {
                ImageLoading::CheckOnly => {
                    if !path.is_file() {
                        return Err(dangling("file not found".into()));
                    }
                }
                ImageLoading::Load(canvas) => {
                    let img = match cache.get(&path) {
                        Some(img) => img.clone(),
                        None => {
                            let img = Arc::new(
                                preprocess::load_for_canvas(&path, canvas)
                                    .map_err(|e| dangling(e.to_string()))?,
                            );
                            cache.insert(path.clone(), img.clone());
                            img
                        }
                    };
                    token.image = Some(img);
                }
            }
            token.image_path = Some(path);
        }
        if !grouped.contains_key(&rec.manuscript_id) {
            order.push(rec.manuscript_id.clone());
        }
        let slot = grouped
            .entry(rec.manuscript_id.clone())
            .or_default()
            .entry((rec.page, rec.line))
            .or_default();
        if slot.insert(rec.position, token).is_some() {
            return Err(manifest_err(
                row,
                format!(
                    "duplicate position {} in {} page {} line {}",
                    rec.position, rec.manuscript_id, rec.page, rec.line
                ),
            ));
        }
    }

    let mut documents = Vec::with_capacity(order.len());
    for id in order {
        let lines = grouped
            .remove(&id)
            .unwrap_or_default()
            .into_iter()
            .map(|((page, line), toks)| {
                TextLine::new(page, line, toks.into_values().collect())
                    .map_err(|e| manifest_err(0, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        documents.push(Document {
            manuscript_id: id,
            lines,
        });
    }
    ManuscriptCorpus::new(documents)
}

/// `path` as seen from `base`: relative when it lies under `base`,
/// absolute otherwise, so readers that resolve against `base` find it.
fn path_from(base: &Path, path: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (base, path) = (abs(base), abs(path));
    path.strip_prefix(&base)
        .unwrap_or(&path)
        .display()
        .to_string()
}

/// Writes a manifest for `documents`. Image paths are written relative to
/// the manifest's directory when possible.
pub fn write_manifest(documents: &[Document], manifest_path: &Path) -> Result<()> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_path(manifest_path)?;
    w.write_record(MANIFEST_HEADER)?;
    for d in documents {
        for t in d.tokens() {
            let img = t
                .image_path
                .as_ref()
                .map(|p| path_from(base, p))
                .unwrap_or_default();
            w.write_record([
                t.key.manuscript_id.as_str(),
                &t.key.page.to_string(),
                &t.key.line.to_string(),
                &t.key.position.to_string(),
                &t.form_id,
                &img,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(manifest_path, e))
}

/// One leave-two-out configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub heldout: [String; 2],
    pub training: Vec<String>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn label(&self) -> String {
        format!("{},{}", self.heldout[0], self.heldout[1])
    }
}

/// One plan per unordered held-out pair, in corpus order.
pub fn enumerate_split_plans(corpus: &ManuscriptCorpus, seed: u64) -> Result<Vec<SplitPlan>> {
    let ids = corpus.manuscript_ids();
    if ids.len() < 3 {
        return Err(Error::InsufficientManuscripts(ids.len()));
    }
    let mut plans = Vec::new();
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            plans.push(SplitPlan {
                heldout: [ids[a].to_string(), ids[b].to_string()],
                training: ids
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != a && i != b)
                    .map(|(_, s)| s.to_string())
                    .collect(),
                seed: seed::derive_n(seed, &[a as u64, b as u64]),
            });
        }
    }
    Ok(plans)
}

/// Two subword occurrences labelled same-text (`true`) or different-text.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub left: SubwordAnnotation,
    pub right: SubwordAnnotation,
    pub label: bool,
}

impl PairSample {
    pub fn left_form(&self) -> &str {
        &self.left.form_id
    }

    pub fn right_form(&self) -> &str {
        &self.right.form_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOptions {
    pub cap_per_form: usize,
    pub min_share: f64,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            cap_per_form: DEFAULT_CAP_PER_FORM,
            min_share: DEFAULT_MIN_SHARE,
        }
    }
}

/// Training pairs plus bookkeeping about the per-manuscript share rule.
#[derive(Debug, Clone, Default)]
pub struct TrainingPairs {
    pub pairs: Vec<PairSample>,
    pub true_pairs: usize,
    pub forms_used: usize,
    pub forms_capped: usize,
    /// Capped forms where no draw met the share rule.
    pub share_shortfalls: usize,
    /// Fraction of true-pair image slots contributed by each manuscript.
    pub manuscript_share: BTreeMap<String, f64>,
}

fn resolve(corpus: &ManuscriptCorpus, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            corpus.document_index(id).ok_or_else(|| {
                Error::InvalidConfig(format!("plan names unknown manuscript `{id}`"))
            })
        })
        .collect()
}

/// Builds the training set for one plan: capped cross-manuscript true-pairs
/// per form, then one false-pair per distinct image among them. A plan
/// with a single training manuscript pairs occurrences within it instead.
pub fn build_training_pairs(
    corpus: &ManuscriptCorpus,
    plan: &SplitPlan,
    options: PairOptions,
) -> Result<TrainingPairs> {
    let train_docs = resolve(corpus, &plan.training)?;
    let heldout_docs = resolve(corpus, &plan.heldout)?;
    if train_docs.iter().any(|d| heldout_docs.contains(d)) {
        return Err(Error::InvalidConfig(format!(
            "plan {} overlaps training and held-out",
            plan.label()
        )));
    }
    let pools: Vec<(usize, Vec<TokenRef>)> =
        train_docs.iter().map(|&d| (d, corpus.refs_of(d))).collect();

    let single = train_docs.len() == 1;
    let mut out = TrainingPairs::default();
    let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
    for (form, by_doc) in &corpus.form_index {
        let docs: Vec<usize> = train_docs
            .iter()
            .copied()
            .filter(|d| by_doc.contains_key(d))
            .collect();
        let mut candidates = Vec::new();
        if single {
            // With one training manuscript, pairs come from distinct occurrences within it.
            let occ = by_doc.get(&train_docs[0]).map_or(&[][..], Vec::as_slice);
            for (k, &x) in occ.iter().enumerate() {
                for &y in &occ[k + 1..] {
                    candidates.push((x, y));
                }
            }
        } else {
            for (ai, &a) in docs.iter().enumerate() {
                for &b in &docs[ai + 1..] {
                    for &x in &by_doc[&a] {
                        for &y in &by_doc[&b] {
                            candidates.push((x, y));
                        }
                    }
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let mut rng = seed::rng_for(plan.seed, &format!("train/{form}"));
        let kept = if candidates.len() > options.cap_per_form {
            out.forms_capped += 1;
            let (kept, ok) = capped_sample(&candidates, &docs, options, &mut rng);
            if !ok {
                out.share_shortfalls += 1;
                log::warn!(
                    "form {form} (plan {}): no draw gave every manuscript {:.0}% of images",
                    plan.label(),
                    options.min_share * 100.0
                );
            }
            kept
        } else {
            candidates
        };
        out.forms_used += 1;

        let mut distinct = BTreeSet::new();
        for &(x, y) in &kept {
            *slots.entry(x.doc).or_default() += 1;
            *slots.entry(y.doc).or_default() += 1;
            distinct.insert(x);
            distinct.insert(y);
            out.pairs.push(PairSample {
                left: corpus.token(x).clone(),
                right: corpus.token(y).clone(),
                label: true,
            });
        }
        out.true_pairs += kept.len();
        for r in distinct {
            let partner = draw_partner(
                corpus,
                r,
                pools
                    .iter()
                    .filter(|(d, _)| single || *d != r.doc)
                    .map(|(_, p)| p.as_slice()),
                &mut rng,
            );
            match partner {
                Some(p) => out.pairs.push(PairSample {
                    left: corpus.token(r).clone(),
                    right: corpus.token(p).clone(),
                    label: false,
                }),
                None => log::warn!("no false-pair partner for {}", corpus.token(r).key),
            }
        }
    }
    if out.pairs.is_empty() {
        return Err(Error::EmptyTrainingSet(plan.heldout.clone()));
    }
    let total: usize = slots.values().sum();
    out.manuscript_share = slots
        .into_iter()
        .map(|(d, n)| {
            (
                corpus.documents[d].manuscript_id.clone(),
                n as f64 / total as f64,
            )
        })
        .collect();
    out.pairs
        .shuffle(&mut seed::rng_for(plan.seed, "train/shuffle"));
    Ok(out)
}

/// Draws `cap` candidates, retrying while some contributing manuscript
/// supplies less than `min_share` of the image slots. Returns the best draw
/// and whether it met the rule.
fn capped_sample(
    candidates: &[(TokenRef, TokenRef)],
    docs: &[usize],
    options: PairOptions,
    rng: &mut ChaCha8Rng,
) -> (Vec<(TokenRef, TokenRef)>, bool) {
    let cap = options.cap_per_form;
    let achievable = docs.len() as f64 * options.min_share <= 1.0 + 1e-12;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..=SHARE_RETRIES {
        let mut picked = index::sample(rng, candidates.len(), cap).into_vec();
        picked.sort_unstable();
        let mut counts: BTreeMap<usize, usize> = docs.iter().map(|&d| (d, 0)).collect();
        for &i in &picked {
            *counts.get_mut(&candidates[i].0.doc).unwrap() += 1;
            *counts.get_mut(&candidates[i].1.doc).unwrap() += 1;
        }
        let min_share = counts
            .values()
            .map(|&c| c as f64 / (2 * cap) as f64)
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(s, _)| min_share > *s) {
            best = Some((min_share, picked));
        }
        if !achievable || best.as_ref().unwrap().0 + 1e-12 >= options.min_share {
            break;
        }
    }
    let (share, picked) = best.expect("at least one draw");
    let ok = !achievable || share + 1e-12 >= options.min_share;
    (picked.into_iter().map(|i| candidates[i]).collect(), ok)
}

/// Uniform draw over the union of `pools`, rejecting tokens with the same
/// form as `r`.
fn draw_partner<'a>(
    corpus: &ManuscriptCorpus,
    r: TokenRef,
    pools: impl Iterator<Item = &'a [TokenRef]> + Clone,
    rng: &mut ChaCha8Rng,
) -> Option<TokenRef> {
    let form = &corpus.token(r).form_id;
    let total: usize = pools.clone().map(<[TokenRef]>::len).sum();
    if total == 0 {
        return None;
    }
    let pick = |mut i: usize| {
        for p in pools.clone() {
            if i < p.len() {
                return p[i];
            }
            i -= p.len();
        }
        unreachable!("index within pool total")
    };
    for _ in 0..64 {
        let cand = pick(rng.random_range(0..total));
        if &corpus.token(cand).form_id != form {
            return Some(cand);
        }
    }
    let eligible: Vec<TokenRef> = pools
        .flat_map(|p| p.iter().copied())
        .filter(|c| &corpus.token(*c).form_id != form)
        .collect();
    if eligible.is_empty() {
        None
    } else {
        Some(eligible[rng.random_range(0..eligible.len())])
    }
}

/// Validation and test sets from the two held-out manuscripts: every
/// cross pair per shared form, one false-pair per distinct image, shuffled
/// and split in half (validation gets the extra sample on odd counts).
pub fn build_heldout_sets(
    corpus: &ManuscriptCorpus,
    plan: &SplitPlan,
) -> Result<(Vec<PairSample>, Vec<PairSample>)> {
    let docs = resolve(corpus, &plan.heldout)?;
    let (a, b) = (docs[0], docs[1]);
    let pool_a = corpus.refs_of(a);
    let pool_b = corpus.refs_of(b);
    let mut pairs = Vec::new();
    for (form, by_doc) in &corpus.form_index {
        let (Some(xs), Some(ys)) = (by_doc.get(&a), by_doc.get(&b)) else {
            continue;
        };
        let mut rng = seed::rng_for(plan.seed, &format!("heldout/{form}"));
        let mut distinct = BTreeSet::new();
        for &x in xs {
            for &y in ys {
                pairs.push(PairSample {
                    left: corpus.token(x).clone(),
                    right: corpus.token(y).clone(),
                    label: true,
                });
                distinct.insert(x);
                distinct.insert(y);
            }
        }
        for r in distinct {
            let other = if r.doc == a { &pool_b } else { &pool_a };
            match draw_partner(corpus, r, std::iter::once(other.as_slice()), &mut rng) {
                Some(p) => pairs.push(PairSample {
                    left: corpus.token(r).clone(),
                    right: corpus.token(p).clone(),
                    label: false,
                }),
                None => log::warn!("no false-pair partner for {}", corpus.token(r).key),
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyHeldoutSet(plan.heldout.clone()));
    }
    pairs.shuffle(&mut seed::rng_for(plan.seed, "heldout/shuffle"));
    let test = pairs.split_off(pairs.len().div_ceil(2));
    Ok((pairs, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub plan: SplitPlan,
    pub options: PairOptions,
    pub train_size: usize,
    pub train_true: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub forms_used: usize,
    pub forms_capped: usize,
    pub share_shortfalls: usize,
    pub manuscript_share: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub train: Vec<PairSample>,
    pub validation: Vec<PairSample>,
    pub test: Vec<PairSample>,
    pub plan: SplitPlan,
    pub metadata: BundleMetadata,
}

pub fn build_bundle(
    corpus: &ManuscriptCorpus,
    plan: &SplitPlan,
    options: PairOptions,
) -> Result<DatasetBundle> {
    let train = build_training_pairs(corpus, plan, options)?;
    let (validation, test) = build_heldout_sets(corpus, plan)?;
    let metadata = BundleMetadata {
        plan: plan.clone(),
        options,
        train_size: train.pairs.len(),
        train_true: train.true_pairs,
        validation_size: validation.len(),
        test_size: test.len(),
        forms_used: train.forms_used,
        forms_capped: train.forms_capped,
        share_shortfalls: train.share_shortfalls,
        manuscript_share: train.manuscript_share,
    };
    Ok(DatasetBundle {
        train: train.pairs,
        validation,
        test,
        plan: plan.clone(),
        metadata,
    })
}

pub const PAIRS_FILE: &str = "pairs.csv";
pub const METADATA_FILE: &str = "metadata.json";
const PAIRS_HEADER: [&str; 6] = [
    "split",
    "left_path",
    "right_path",
    "label",
    "left_form",
    "right_form",
];

/// Writes `pairs.csv` and `metadata.json` into `dir`. Tokens whose raster
/// did not come from disk are saved under `dir/images/` first.
pub fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: HashMap<String, String> = HashMap::new();
    let mut path_of = |t: &SubwordAnnotation| -> Result<String> {
        if let Some(p) = &t.image_path {
            return Ok(path_from(dir, p));
        }
        let key = t.key.to_string();
        if let Some(p) = written.get(&key) {
            return Ok(p.clone());
        }
        let img = t.image()?;
        let images = dir.join("images");
        fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        let file = format!(
            "{}_{}_{}_{}.png",
            t.key.manuscript_id, t.key.page, t.key.line, t.key.position
        );
        preprocess::write_png(img, &images.join(&file))?;
        let rel = format!("images/{file}");
        written.insert(key, rel.clone());
        Ok(rel)
    };
    let mut w = csv::Writer::from_path(dir.join(PAIRS_FILE))?;
    w.write_record(PAIRS_HEADER)?;
    for (split, pairs) in [
        ("train", &bundle.train),
        ("validation", &bundle.validation),
        ("test", &bundle.test),
    ] {
        for p in pairs {
            let (lp, rp) = (path_of(&p.left)?, path_of(&p.right)?);
            w.write_record([
                split,
                &lp,
                &rp,
                if p.label { "1" } else { "0" },
                p.left_form(),
                p.right_form(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir, e))?;
    let meta = serde_json::to_string_pretty(&bundle.metadata)?;
    fs::write(dir.join(METADATA_FILE), meta + "\n").map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Deserialize)]
struct PairRow {
    split: String,
    left_path: String,
    right_path: String,
    label: u8,
    left_form: String,
    right_form: String,
}

/// Reads a bundle directory written by [`write_bundle`], loading every
/// image onto `canvas`.
pub fn read_bundle(dir: &Path, canvas: CanvasSpec) -> Result<DatasetBundle> {
    let meta_path = dir.join(METADATA_FILE);
    let metadata: BundleMetadata = serde_json::from_str(
        &fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?,
    )?;
    let pairs_path = dir.join(PAIRS_FILE);
    let mut reader = csv::Reader::from_path(&pairs_path)?;
    let mut cache: HashMap<PathBuf, Arc<crate::subword::SubwordImage>> = HashMap::new();
    let mut load = |raw: &str, form: &str, row: usize| -> Result<SubwordAnnotation> {
        let p = Path::new(raw);
        let path = if p.is_absolute() {
            p.to_path_buf()
        } else {
            dir.join(p)
        };
        let img = match cache.get(&path) {
            Some(i) => i.clone(),
            None => {
                let i = Arc::new(preprocess::load_for_canvas(&path, canvas).map_err(|e| {
                    Error::DanglingImage {
                        path: pairs_path.clone(),
                        row,
                        image: path.clone(),
                        message: e.to_string(),
                    }
                })?);
                cache.insert(path.clone(), i.clone());
                i
            }
        };
        let mut t = SubwordAnnotation::new(raw, 0, 0, 0, form).with_image(img);
        t.image_path = Some(path);
        Ok(t)
    };
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.deserialize::<PairRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Manifest {
            path: pairs_path.clone(),
            row,
            message: e.to_string(),
        })?;
        let sample = PairSample {
            left: load(&rec.left_path, &rec.left_form, row)?,
            right: load(&rec.right_path, &rec.right_form, row)?,
            label: rec.label == 1,
        };
        match rec.split.as_str() {
            "train" => train.push(sample),
            "validation" => validation.push(sample),
            "test" => test.push(sample),
            other => {
                return Err(Error::Manifest {
                    path: pairs_path.clone(),
                    row,
                    message: format!("unknown split `{other}`"),
                })
            }
        }
    }
    Ok(DatasetBundle {
        train,
        validation,
        test,
        plan: metadata.plan.clone(),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, lines: &[&[&str]]) -> Document {
        Document {
            manuscript_id: id.into(),
            lines: lines
                .iter()
                .enumerate()
                .map(|(i, l)| TextLine::from_forms(id, 0, i as u32, l))
                .collect(),
        }
    }

    fn corpus(n: usize, line: &[&str]) -> ManuscriptCorpus {
        ManuscriptCorpus::new((0..n).map(|i| doc(&format!("m{i}"), &[line])).collect()).unwrap()
    }

    #[test]
    fn split_plan_counts() {
        for (n, want) in [(3, 3), (5, 10), (7, 21)] {
            let plans = enumerate_split_plans(&corpus(n, &["a", "b"]), 1).unwrap();
            assert_eq!(plans.len(), want);
            for p in &plans {
                assert_eq!(p.training.len(), n - 2);
                assert!(!p.training.contains(&p.heldout[0]) && !p.training.contains(&p.heldout[1]));
            }
        }
        assert!(matches!(
            enumerate_split_plans(&corpus(2, &["a"]), 1),
            Err(Error::InsufficientManuscripts(2))
        ));
    }

    #[test]
    fn duplicate_manuscripts_rejected() {
        assert!(ManuscriptCorpus::new(vec![doc("m", &[&["a"]]), doc("m", &[&["b"]])]).is_err());
    }

    #[test]
    fn heldout_example_six_true_five_false() {
        // Held-out m0 has form `x` twice, m1 three times; other forms give
        // false-pair partners.
        let c = ManuscriptCorpus::new(vec![
            doc("m0", &[&["x", "x", "p"]]),
            doc("m1", &[&["x", "x", "x", "q"]]),
            doc("m2", &[&["x", "p", "q"]]),
        ])
        .unwrap();
        let plan = SplitPlan {
            heldout: ["m0".into(), "m1".into()],
            training: vec!["m2".into()],
            seed: 4,
        };
        let (val, test) = build_heldout_sets(&c, &plan).unwrap();
        let all: Vec<_> = val.iter().chain(&test).collect();
        assert_eq!(all.iter().filter(|p| p.label).count(), 6);
        assert_eq!(all.iter().filter(|p| !p.label).count(), 5);
        assert_eq!((val.len(), test.len()), (6, 5));
        for p in all {
            assert_eq!(p.label, p.left_form() == p.right_form());
            assert!(["m0", "m1"].contains(&p.left.manuscript_id()));
            assert!(["m0", "m1"].contains(&p.right.manuscript_id()));
        }
    }

    #[test]
    fn heldout_without_shared_forms_is_an_error() {
        let c = ManuscriptCorpus::new(vec![
            doc("m0", &[&["a"]]),
            doc("m1", &[&["b"]]),
            doc("m2", &[&["a", "b"]]),
        ])
        .unwrap();
        let plan = SplitPlan {
            heldout: ["m0".into(), "m1".into()],
            training: vec!["m2".into()],
            seed: 0,
        };
        assert!(matches!(
            build_heldout_sets(&c, &plan),
            Err(Error::EmptyHeldoutSet(_))
        ));
    }

    #[test]
    fn cap_binds_only_above_threshold() {
        // 5 training manuscripts, each with `k` copies of `x`: C(5,2) k^2 candidates.
        let many: Vec<&str> = std::iter::repeat_n("x", 10).chain(["y", "z"]).collect();
        let c = corpus(7, &many);
        let plan = &enumerate_split_plans(&c, 3).unwrap()[0];
        let t = build_training_pairs(&c, plan, PairOptions::default()).unwrap();
        let true_x = t
            .pairs
            .iter()
            .filter(|p| p.label && p.left_form() == "x")
            .count();
        assert_eq!(true_x, 400); // 1000 candidates
        let true_y = t
            .pairs
            .iter()
            .filter(|p| p.label && p.left_form() == "y")
            .count();
        assert_eq!(true_y, 10); // cap inactive
        assert_eq!(t.forms_capped, 1);
    }

    #[test]
    fn forms_in_one_manuscript_are_skipped() {
        let c = ManuscriptCorpus::new(vec![
            doc("m0", &[&["a", "b"]]),
            doc("m1", &[&["a", "c"]]),
            doc("m2", &[&["a", "b"]]),
            doc("m3", &[&["d"]]),
        ])
        .unwrap();
        let plan = SplitPlan {
            heldout: ["m2".into(), "m3".into()],
            training: vec!["m0".into(), "m1".into()],
            seed: 0,
        };
        let t = build_training_pairs(&c, &plan, PairOptions::default()).unwrap();
        assert_eq!(t.forms_used, 1);
        assert_eq!(t.true_pairs, 1);
        assert!(t
            .pairs
            .iter()
            .all(|p| ["m0", "m1"].contains(&p.left.manuscript_id())));
    }

    #[test]
    fn builders_are_reproducible() {
        let c = corpus(5, &["a", "b", "a", "c", "d", "b"]);
        let plan = &enumerate_split_plans(&c, 9).unwrap()[4];
        let a = build_bundle(&c, plan, PairOptions::default()).unwrap();
        let b = build_bundle(&c, plan, PairOptions::default()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
    }
}
