//! Labeled documents, span annotations and the JSON-lines dataset format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::label::EntityLabel;

/// A labeled byte range `[start, end)` of a document's UTF-8 text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
}

impl SpanAnnotation {
    pub fn new(start: usize, end: usize, label: EntityLabel) -> Self {
        Self { start, end, label }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Expand spans into one label per byte of `text`; uncovered bytes are
/// `BACKGROUND`.
pub fn spans_to_char_labels(text: &str, spans: &[SpanAnnotation]) -> Result<Vec<EntityLabel>> {
    let n = text.len();
    let mut labels = vec![EntityLabel::Background; n];
    let mut prev_end = 0usize;
    for (i, s) in spans.iter().enumerate() {
        if s.start >= s.end || s.end > n {
            return Err(validation(format!(
                "span {i} ({}, {}, {}) out of range for text of length {n}",
                s.start, s.end, s.label
            )));
        }
        if s.start < prev_end {
            return Err(validation(format!(
                "span {i} ({}, {}, {}) overlaps or precedes the previous span",
                s.start, s.end, s.label
            )));
        }
        if s.label == EntityLabel::Pad {
            return Err(validation(format!("span {i} carries the PAD label")));
        }
        labels[s.start..s.end].fill(s.label);
        prev_end = s.end;
    }
    Ok(labels)
}

/// Collapse per-byte labels into maximal runs of identical non-background
/// labels.
pub fn char_labels_to_spans(labels: &[EntityLabel]) -> Result<Vec<SpanAnnotation>> {
    if let Some(pos) = labels.iter().position(|l| *l == EntityLabel::Pad) {
        return Err(validation(format!("PAD label at position {pos}")));
    }
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let l = labels[i];
        let mut j = i + 1;
        while j < labels.len() && labels[j] == l {
            j += 1;
        }
        if l != EntityLabel::Background {
            spans.push(SpanAnnotation::new(i, j, l));
        }
        i = j;
    }
    Ok(spans)
}

/// Text with one label per byte.
///
/// The span list is kept next to the labels so that two adjacent values of
/// the same entity survive a save/load cycle as two spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocument {
    source_id: String,
    text: String,
    labels: Vec<EntityLabel>,
    spans: Vec<SpanAnnotation>,
}

impl LabeledDocument {
    pub fn from_spans(
        source_id: impl Into<String>,
        text: impl Into<String>,
        spans: Vec<SpanAnnotation>,
    ) -> Result<Self> {
        let text = text.into();
        let labels = spans_to_char_labels(&text, &spans)?;
        Ok(Self {
            source_id: source_id.into(),
            text,
            labels,
            spans,
        })
    }

    pub fn from_labels(
        source_id: impl Into<String>,
        text: impl Into<String>,
        labels: Vec<EntityLabel>,
    ) -> Result<Self> {
        let text = text.into();
        let source_id = source_id.into();
        if labels.len() != text.len() {
            return Err(validation(format!(
                "document {source_id}: {} labels for {} bytes",
                labels.len(),
                text.len()
            )));
        }
        let spans = char_labels_to_spans(&labels)?;
        Ok(Self {
            source_id,
            text,
            labels,
            spans,
        })
    }

    /// A document with every byte labeled `BACKGROUND`.
    pub fn unlabeled(source_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            source_id: source_id.into(),
            labels: vec![EntityLabel::Background; text.len()],
            text,
            spans: Vec::new(),
        }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }

    pub fn labels(&self) -> &[EntityLabel] {
        &self.labels
    }

    pub fn spans(&self) -> &[SpanAnnotation] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            id: self.source_id.clone(),
            text: self.text.clone(),
            spans: self
                .spans
                .iter()
                .map(|s| (s.start, s.end, s.label))
                .collect(),
        }
    }
}

/// One line of a labeled JSON-lines dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub spans: Vec<(usize, usize, EntityLabel)>,
}

impl TryFrom<DocumentRecord> for LabeledDocument {
    type Error = Error;

    fn try_from(r: DocumentRecord) -> Result<Self> {
        let spans = r
            .spans
            .into_iter()
            .map(|(s, e, l)| SpanAnnotation::new(s, e, l))
            .collect();
        LabeledDocument::from_spans(r.id, r.text, spans)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, docs: &[LabeledDocument]) -> Result<()> {
    for d in docs {
        serde_json::to_writer(&mut w, &d.to_record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl(path: &Path, docs: &[LabeledDocument]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(&mut w, docs)?;
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<LabeledDocument>> {
    let mut docs = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line)?;
        let doc = LabeledDocument::try_from(rec)
            .map_err(|e| validation(format!("line {}: {e}", lineno + 1)))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_jsonl(path: &Path) -> Result<Vec<LabeledDocument>> {
    read_jsonl(BufReader::new(File::open(path)?))
}
