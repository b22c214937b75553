//! Character-level detection of sensitive entities (NPI) in text and tables.

pub mod bench;
pub mod checkpoint;
pub mod columnar;
pub mod cnn;
pub mod crf;
pub mod datagen;
pub mod document;
pub mod encode;
pub mod eval;
pub mod error;
pub mod label;
pub mod manifest;
pub mod ngram;
pub mod optim;
pub mod regex_baseline;
pub mod rng;
pub mod tagger;

pub use document::{LabeledDocument, SpanAnnotation};
pub use error::{Error, Result};
pub use label::EntityLabel;
