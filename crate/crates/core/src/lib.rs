//! Subword-level alignment of two versions of a handwritten manuscript.
//!
//! The crate covers the whole pipeline:
//!
//! - [`preprocess`]: rescaling crops to the fixed model canvas.
//! - [`dataset`]: manifest ingestion, leave-two-out split plans and balanced
//!   true/false pair generation.
//! - [`nn`]: a small CPU network engine (valid convolutions, max pooling,
//!   dense layers, dropout) with hand-written backpropagation.
//! - [`siamese`]: the weight-tied twin with an L1 + sigmoid head, training
//!   with validation-based model selection, and the [`SimilarityScorer`]
//!   boundary used by alignment.
//! - [`assignment`]: Hungarian assignment and crossing counts.
//! - [`align`]: the dynamic sliding-window aligner.
//! - [`synth`]: synthetic manuscripts with known ground-truth edits.
//! - [`eval`]: the cross-validation harness.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod align;
pub mod assignment;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod preprocess;
pub mod seed;
pub mod siamese;
pub mod subword;
pub mod synth;

pub use error::{Error, Result};
pub use siamese::SimilarityScorer;
pub use subword::{CanvasSpec, Document, SubwordAnnotation, SubwordImage, TextLine, TokenKey};
