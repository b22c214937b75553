//! Checkpoint container: one line of JSON header, then a payload of
//! little-endian f32 tensors. The header records the format version, the
//! engine and its config, the label order, an optional vocabulary, a tensor
//! directory and the sha256 of the payload.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::label_order;
use crate::manifest::hex_digest;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the payload, in f32 elements.
    pub offset: usize,
}

impl TensorEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub engine: String,
    pub config: serde_json::Value,
    pub label_order: Vec<String>,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    pub tensors: Vec<TensorEntry>,
    pub payload_sha256: String,
}

/// Named f32 tensors plus metadata, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub engine: String,
    pub config: serde_json::Value,
    pub vocabulary: Vec<String>,
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl Checkpoint {
    pub fn new(engine: &str, config: serde_json::Value) -> Self {
        Self {
            engine: engine.to_string(),
            config,
            vocabulary: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: &[usize], data: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push((name.to_string(), shape.to_vec(), data));
    }

    pub fn push_f64(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        self.push(name, shape, data.iter().map(|&x| x as f32).collect());
    }

    pub fn get(&self, name: &str) -> Result<&[f32]> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, d)| d.as_slice())
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }

    /// Tensor with an expected element count.
    pub fn get_sized(&self, name: &str, len: usize) -> Result<&[f32]> {
        let d = self.get(name)?;
        if d.len() != len {
            return Err(Error::Checkpoint(format!(
                "tensor {name:?} has {} elements, expected {len}",
                d.len()
            )));
        }
        Ok(d)
    }

    pub fn get_f64(&self, name: &str, len: usize) -> Result<Vec<f64>> {
        Ok(self.get_sized(name, len)?.iter().map(|&x| x as f64).collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut payload = Vec::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        for (name, shape, data) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset,
            });
            offset += data.len();
            for x in data {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            engine: self.engine.clone(),
            config: self.config.clone(),
            label_order: label_order().into_iter().map(String::from).collect(),
            vocabulary: self.vocabulary.clone(),
            tensors: entries,
            payload_sha256: hex_digest(&payload),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&line)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let expected: Vec<String> = label_order().into_iter().map(String::from).collect();
        if header.label_order != expected {
            return Err(Error::Checkpoint("label order differs from this build".into()));
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if hex_digest(&payload) != header.payload_sha256 {
            return Err(Error::Checkpoint("payload digest mismatch (truncated or corrupted file)".into()));
        }
        let total: usize = header.tensors.iter().map(|t| t.numel()).sum();
        if payload.len() != total * 4 {
            return Err(Error::Checkpoint(format!(
                "payload has {} bytes, directory describes {}",
                payload.len(),
                total * 4
            )));
        }
        let tensors = header
            .tensors
            .iter()
            .map(|t| {
                let bytes = &payload[t.offset * 4..(t.offset + t.numel()) * 4];
                let data = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                (t.name.clone(), t.shape.clone(), data)
            })
            .collect();
        Ok(Self {
            engine: header.engine,
            config: header.config,
            vocabulary: header.vocabulary,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn expect_engine(&self, engine: &str) -> Result<()> {
        if self.engine != engine {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} model, expected {engine}",
                self.engine
            )));
        }
        Ok(())
    }
}

/// Engine name stored in a checkpoint file, without loading the payload.
pub fn peek_engine(path: &Path) -> Result<String> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: Header =
        serde_json::from_slice(&line).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    Ok(header.engine)
}
