use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::document::LabeledDocument;
use crate::error::Result;
use crate::label::EntityLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Unstructured,
    MultiColumn,
    SingleColumn,
    ColumnarAggregate,
}

/// Summary written next to every generated dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub sample_count: usize,
    /// Entity values per label, background excluded.
    pub entity_counts: BTreeMap<EntityLabel, usize>,
    pub generator_seed: u64,
    /// Hex sha256 of the canonical JSON of the generator config.
    pub config_digest: String,
}

pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex_digest(&bytes))
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn count_spans<'a>(docs: impl IntoIterator<Item = &'a LabeledDocument>) -> BTreeMap<EntityLabel, usize> {
    let mut counts = BTreeMap::new();
    for d in docs {
        for s in d.spans() {
            *counts.entry(s.label).or_insert(0) += 1;
        }
    }
    counts
}

impl DatasetManifest {
    pub fn for_documents<T: Serialize>(
        kind: DatasetKind,
        docs: &[LabeledDocument],
        seed: u64,
        config: &T,
    ) -> Result<Self> {
        Ok(Self {
            kind,
            sample_count: docs.len(),
            entity_counts: count_spans(docs),
            generator_seed: seed,
            config_digest: config_digest(config)?,
        })
    }

    pub fn total_entities(&self) -> usize {
        self.entity_counts.values().sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
