use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::document::LabeledDocument;
use crate::error::{Error, Result};
use crate::label::EntityLabel;
use crate::regex_baseline::PatternRegistry;

/// Anything that assigns one label per byte.
pub trait Tagger: Sync {
    fn engine(&self) -> Engine;

    /// One label array per document, each as long as its text.
    fn tag(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>>;

    fn tag_text(&self, text: &str) -> Result<Vec<EntityLabel>> {
        let doc = LabeledDocument::unlabeled("", text);
        Ok(self.tag(std::slice::from_ref(&doc))?.pop().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Regex,
    NgramCrf,
    Cnn,
    CnnCrf,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Regex, Engine::NgramCrf, Engine::Cnn, Engine::CnnCrf];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Regex => "regex",
            Engine::NgramCrf => "ngram-crf",
            Engine::Cnn => "cnn",
            Engine::CnnCrf => "cnn-crf",
        }
    }

    pub fn needs_model(self) -> bool {
        self != Engine::Regex
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown engine {s:?} (expected regex, ngram-crf, cnn or cnn-crf)")))
    }
}

impl Tagger for PatternRegistry {
    fn engine(&self) -> Engine {
        Engine::Regex
    }

    fn tag(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>> {
        docs.iter().map(|d| self.scan_chars(d.text())).collect()
    }
}

/// Training summary shared by the trained engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub engine: Engine,
    /// One entry per epoch (CNN) or optimizer iteration (n-gram CRF).
    pub losses: Vec<f64>,
    /// Held-out micro-F1 per epoch, when a held-out set was given.
    pub heldout_micro_f1: Vec<f64>,
    pub wall_seconds: f64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
            assert_eq!(serde_json::to_string(&e).unwrap(), format!("\"{}\"", e.name()));
        }
        assert!("lstm".parse::<Engine>().is_err());
        assert!(!Engine::Regex.needs_model());
    }

    #[test]
    fn regex_tagger_labels_every_byte() {
        let reg = PatternRegistry::bundled().unwrap();
        let out = reg.tag_text("call 555-123-4567 now").unwrap();
        assert_eq!(out.len(), 21);
        assert!(out.iter().all(|l| *l != EntityLabel::Pad));
    }
}
