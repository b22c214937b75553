//! Character codes, flattening into fixed-length chunks, and the inverse.
//!
//! Codes: 0 is padding, ASCII bytes 1..=127 map to themselves, every other
//! byte (NUL and all bytes >= 128) maps to [`UNK`], which shares its code
//! with DEL.

use crate::document::LabeledDocument;
use crate::error::{Error, Result};
use crate::label::EntityLabel;

pub const PAD_CODE: u8 = 0;
pub const UNK: u8 = 127;
/// Number of distinct codes, the embedding table height.
pub const VOCAB_SIZE: usize = 129;

#[inline]
pub fn encode_byte(b: u8) -> u8 {
    if b == 0 || b >= 128 {
        UNK
    } else {
        b
    }
}

pub fn encode_chars(text: &[u8]) -> Vec<u8> {
    text.iter().map(|&b| encode_byte(b)).collect()
}

/// A contiguous run of one document inside one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSegment {
    pub doc: usize,
    pub doc_start: usize,
    pub chunk: usize,
    pub chunk_start: usize,
    pub len: usize,
}

/// Row-major `[n_chunks × max_length]` codes and optional label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBatch {
    pub max_length: usize,
    pub indices: Vec<u8>,
    pub labels: Option<Vec<u8>>,
    pub chunk_map: Vec<ChunkSegment>,
    pub doc_lengths: Vec<usize>,
}

impl EncodedBatch {
    pub fn n_chunks(&self) -> usize {
        self.indices.len().checked_div(self.max_length).unwrap_or(0)
    }

    pub fn chunk(&self, i: usize) -> &[u8] {
        &self.indices[i * self.max_length..(i + 1) * self.max_length]
    }

    pub fn chunk_labels(&self, i: usize) -> Option<&[u8]> {
        self.labels
            .as_ref()
            .map(|l| &l[i * self.max_length..(i + 1) * self.max_length])
    }

    /// Codes processed including padding.
    pub fn total_codes(&self) -> usize {
        self.indices.len()
    }

    pub fn non_pad_codes(&self) -> usize {
        self.chunk_map.iter().map(|s| s.len).sum()
    }

    /// Subset of chunks as a new batch (chunk map restricted and renumbered).
    pub fn select_chunks(&self, chunks: &[usize]) -> EncodedBatch {
        let l = self.max_length;
        let mut indices = Vec::with_capacity(chunks.len() * l);
        let mut labels = self.labels.as_ref().map(|_| Vec::with_capacity(chunks.len() * l));
        for &c in chunks {
            indices.extend_from_slice(self.chunk(c));
            if let (Some(out), Some(src)) = (labels.as_mut(), self.chunk_labels(c)) {
                out.extend_from_slice(src);
            }
        }
        let chunk_map = chunks
            .iter()
            .enumerate()
            .flat_map(|(new, &old)| {
                self.chunk_map
                    .iter()
                    .filter(move |s| s.chunk == old)
                    .map(move |s| ChunkSegment { chunk: new, ..*s })
            })
            .collect();
        EncodedBatch {
            max_length: l,
            indices,
            labels,
            chunk_map,
            doc_lengths: self.doc_lengths.clone(),
        }
    }
}

fn label_ids(doc: &LabeledDocument) -> impl Iterator<Item = u8> + '_ {
    doc.labels().iter().map(|l| l.id())
}

/// Concatenate all documents and cut the stream into `max_length` chunks;
/// only the final chunk is padded.
pub fn flatten(docs: &[LabeledDocument], max_length: usize, with_labels: bool) -> Result<EncodedBatch> {
    if max_length == 0 {
        return Err(Error::Config("max_length must be at least 1".into()));
    }
    let total: usize = docs.iter().map(|d| d.len()).sum();
    let n_chunks = total.div_ceil(max_length);
    let mut indices = Vec::with_capacity(n_chunks * max_length);
    let mut labels = with_labels.then(|| Vec::with_capacity(n_chunks * max_length));
    let mut chunk_map = Vec::new();
    let mut pos = 0usize;
    for (di, d) in docs.iter().enumerate() {
        indices.extend(d.bytes().iter().map(|&b| encode_byte(b)));
        if let Some(l) = labels.as_mut() {
            l.extend(label_ids(d));
        }
        let mut off = 0;
        while off < d.len() {
            let chunk = pos / max_length;
            let chunk_start = pos % max_length;
            let len = (max_length - chunk_start).min(d.len() - off);
            chunk_map.push(ChunkSegment {
                doc: di,
                doc_start: off,
                chunk,
                chunk_start,
                len,
            });
            off += len;
            pos += len;
        }
    }
    indices.resize(n_chunks * max_length, PAD_CODE);
    if let Some(l) = labels.as_mut() {
        l.resize(n_chunks * max_length, EntityLabel::Pad.id());
    }
    Ok(EncodedBatch {
        max_length,
        indices,
        labels,
        chunk_map,
        doc_lengths: docs.iter().map(|d| d.len()).collect(),
    })
}

/// One row per document (documents longer than `max_length` take several
/// rows); each row is padded on its own.
pub fn pad_per_sample(docs: &[LabeledDocument], max_length: usize, with_labels: bool) -> Result<EncodedBatch> {
    if max_length == 0 {
        return Err(Error::Config("max_length must be at least 1".into()));
    }
    let mut indices = Vec::new();
    let mut labels = with_labels.then(Vec::new);
    let mut chunk_map = Vec::new();
    let mut chunk = 0;
    for (di, d) in docs.iter().enumerate() {
        let rows = d.len().div_ceil(max_length).max(1);
        for r in 0..rows {
            let start = r * max_length;
            let end = (start + max_length).min(d.len());
            indices.extend(d.bytes()[start..end].iter().map(|&b| encode_byte(b)));
            indices.resize((chunk + 1) * max_length, PAD_CODE);
            if let Some(l) = labels.as_mut() {
                l.extend(d.labels()[start..end].iter().map(|x| x.id()));
                l.resize((chunk + 1) * max_length, EntityLabel::Pad.id());
            }
            if end > start {
                chunk_map.push(ChunkSegment {
                    doc: di,
                    doc_start: start,
                    chunk,
                    chunk_start: 0,
                    len: end - start,
                });
            }
            chunk += 1;
        }
    }
    Ok(EncodedBatch {
        max_length,
        indices,
        labels,
        chunk_map,
        doc_lengths: docs.iter().map(|d| d.len()).collect(),
    })
}

/// Per-document label arrays from per-position predictions laid out like
/// `batch.indices`.
pub fn unflatten(predictions: &[u8], batch: &EncodedBatch) -> Result<Vec<Vec<EntityLabel>>> {
    if predictions.len() != batch.indices.len() {
        return Err(Error::Shape(format!(
            "predictions have {} positions, batch has {}",
            predictions.len(),
            batch.indices.len()
        )));
    }
    let mut out: Vec<Vec<EntityLabel>> = batch
        .doc_lengths
        .iter()
        .map(|&n| vec![EntityLabel::Background; n])
        .collect();
    for s in &batch.chunk_map {
        let base = s.chunk * batch.max_length + s.chunk_start;
        for i in 0..s.len {
            let id = predictions[base + i];
            // PAD predicted on a real character decodes as background
            let l = match EntityLabel::from_id(id) {
                Some(EntityLabel::Pad) | None => EntityLabel::Background,
                Some(l) => l,
            };
            out[s.doc][s.doc_start + i] = l;
        }
    }
    Ok(out)
}
