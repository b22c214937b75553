//! Throughput in GB of raw input per hour (GB = 2^30 bytes).
//!
//! Timing covers encoding, tagging and decoding back to per-document labels;
//! model loading and warmup batches are excluded.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cnn::Cnn;
use crate::document::LabeledDocument;
use crate::encode::{flatten, pad_per_sample, unflatten, EncodedBatch};
use crate::error::{Error, Result};
use crate::ngram::NgramCrf;
use crate::regex_baseline::PatternRegistry;
use crate::tagger::{Engine, Tagger};

pub const BYTES_PER_GB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocessing {
    /// Documents concatenated and cut into full-length chunks.
    Flatten,
    /// One padded row per document.
    PerSample,
}

impl Preprocessing {
    pub fn encode(self, docs: &[LabeledDocument], max_length: usize) -> Result<EncodedBatch> {
        match self {
            Preprocessing::Flatten => flatten(docs, max_length, false),
            Preprocessing::PerSample => pad_per_sample(docs, max_length, false),
        }
    }
}

/// An engine that can be timed: tags a batch of documents and reports the
/// number of codes it processed, padding included.
pub trait Scanner: Tagger {
    fn scan(&self, docs: &[LabeledDocument], mode: Preprocessing) -> Result<(Vec<Vec<crate::EntityLabel>>, usize)>;
}

impl Scanner for PatternRegistry {
    fn scan(&self, docs: &[LabeledDocument], _: Preprocessing) -> Result<(Vec<Vec<crate::EntityLabel>>, usize)> {
        let bytes = docs.iter().map(|d| d.len()).sum();
        Ok((self.tag(docs)?, bytes))
    }
}

impl Scanner for NgramCrf {
    fn scan(&self, docs: &[LabeledDocument], mode: Preprocessing) -> Result<(Vec<Vec<crate::EntityLabel>>, usize)> {
        let batch = mode.encode(docs, self.config.max_length)?;
        let pred = self.predict_batch(&batch)?;
        Ok((unflatten(&pred, &batch)?, batch.total_codes()))
    }
}

impl Scanner for Cnn<f32> {
    fn scan(&self, docs: &[LabeledDocument], mode: Preprocessing) -> Result<(Vec<Vec<crate::EntityLabel>>, usize)> {
        let batch = mode.encode(docs, self.config.max_length)?;
        let pred = self.predict_batch(&batch)?;
        Ok((unflatten(&pred, &batch)?, batch.total_codes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub preprocessing: Preprocessing,
    /// Documents per timed batch.
    pub batch_docs: usize,
    /// Batches run untimed before measuring.
    pub warmup_batches: usize,
    /// Timed passes over the whole corpus.
    pub passes: usize,
    /// Recorded in the result; engines must already be configured with it.
    pub workers: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            preprocessing: Preprocessing::Flatten,
            batch_docs: 256,
            warmup_batches: 1,
            passes: 1,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub engine: Engine,
    pub preprocessing: Preprocessing,
    /// Raw input bytes tagged during the timed passes.
    pub bytes: u64,
    pub wall_seconds: f64,
    pub gb_per_hour: f64,
    /// Codes processed (padding included) per input byte.
    pub padded_char_overhead: f64,
    pub workers: usize,
    pub bytes_per_gb: u64,
    /// Set when the engine failed; the other fields cover the work done
    /// before the failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn gb_per_hour(bytes: u64, seconds: f64) -> f64 {
    (bytes as f64 / BYTES_PER_GB) / (seconds / 3600.0)
}

pub fn run_bench(scanner: &dyn Scanner, docs: &[LabeledDocument], options: &BenchOptions) -> Result<BenchResult> {
    let corpus_bytes: usize = docs.iter().map(|d| d.len()).sum();
    if corpus_bytes == 0 {
        return Err(Error::Validation("benchmark corpus is empty".into()));
    }
    if options.batch_docs == 0 || options.passes == 0 {
        return Err(Error::Config("batch_docs and passes must be positive".into()));
    }
    let mode = options.preprocessing;
    for batch in docs.chunks(options.batch_docs).take(options.warmup_batches) {
        scanner.scan(batch, mode)?;
    }
    let mut bytes = 0u64;
    let mut codes = 0u64;
    let mut error = None;
    let started = Instant::now();
    'outer: for _ in 0..options.passes {
        for batch in docs.chunks(options.batch_docs) {
            match scanner.scan(batch, mode) {
                Ok((labels, n)) => {
                    bytes += labels.iter().map(|l| l.len() as u64).sum::<u64>();
                    codes += n as u64;
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break 'outer;
                }
            }
        }
    }
    let wall_seconds = started.elapsed().as_secs_f64();
    Ok(BenchResult {
        engine: scanner.engine(),
        preprocessing: mode,
        bytes,
        wall_seconds,
        gb_per_hour: gb_per_hour(bytes, wall_seconds),
        padded_char_overhead: if bytes == 0 { 0.0 } else { codes as f64 / bytes as f64 },
        workers: options.workers,
        bytes_per_gb: 1 << 30,
        error,
    })
}

pub fn write_jsonl<W: Write>(mut w: W, results: &[BenchResult]) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
