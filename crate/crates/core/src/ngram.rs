//! Handcrafted per-character features and the n-gram CRF tagger.
//!
//! Each position emits, for every offset in `[-w, +w]` that lands inside the
//! sequence, four indicators of the neighbour character: its lowercase form,
//! is-upper, is-digit and is-alphanumeric, tagged with the offset. An offset
//! landing one step before the start emits `BOS@o`, one step past the end
//! `EOS@o`.
//!
//! All features are functions of (offset, byte), so emissions are computed
//! from a per-(offset, byte) score table rebuilt after every weight update.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::crf::{self, CrfParams};
use crate::document::LabeledDocument;
use crate::encode::{flatten, unflatten, EncodedBatch, PAD_CODE};
use crate::error::{Error, Result};
use crate::label::{EntityLabel, NUM_LABELS};
use crate::optim::{owlqn, Evaluation, OwlqnConfig};
use crate::rng::stream_rng;
use crate::tagger::{Engine, Tagger, TrainReport};

pub const DEFAULT_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Lower,
    IsUpper,
    IsDigit,
    IsAlnum,
    Bos,
    Eos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Feature {
    pub kind: FeatureKind,
    pub offset: i8,
    pub value: u8,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.offset;
        match self.kind {
            FeatureKind::Lower => {
                let v = self.value;
                if v.is_ascii_graphic() && v != b'\\' {
                    write!(f, "lower={}@{o}", v as char)
                } else {
                    write!(f, "lower=\\x{v:02x}@{o}")
                }
            }
            FeatureKind::IsUpper => write!(f, "isupper={}@{o}", self.value),
            FeatureKind::IsDigit => write!(f, "isdigit={}@{o}", self.value),
            FeatureKind::IsAlnum => write!(f, "isalnum={}@{o}", self.value),
            FeatureKind::Bos => write!(f, "BOS@{o}"),
            FeatureKind::Eos => write!(f, "EOS@{o}"),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Checkpoint(format!("bad feature name {s:?}"));
        let (head, off) = s.rsplit_once('@').ok_or_else(bad)?;
        let offset: i8 = off.parse().map_err(|_| bad())?;
        let (kind, value) = match head.split_once('=') {
            None => match head {
                "BOS" => (FeatureKind::Bos, 0),
                "EOS" => (FeatureKind::Eos, 0),
                _ => return Err(bad()),
            },
            Some((k, v)) => {
                let flag = || match v {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    _ => Err(bad()),
                };
                match k {
                    "lower" => {
                        let value = if let Some(hex) = v.strip_prefix("\\x") {
                            u8::from_str_radix(hex, 16).map_err(|_| bad())?
                        } else if v.len() == 1 {
                            v.as_bytes()[0]
                        } else {
                            return Err(bad());
                        };
                        (FeatureKind::Lower, value)
                    }
                    "isupper" => (FeatureKind::IsUpper, flag()?),
                    "isdigit" => (FeatureKind::IsDigit, flag()?),
                    "isalnum" => (FeatureKind::IsAlnum, flag()?),
                    _ => return Err(bad()),
                }
            }
        };
        Ok(Feature { kind, offset, value })
    }
}

/// The four indicators of byte `b` at `offset`.
pub fn byte_features(b: u8, offset: i8) -> [Feature; 4] {
    let f = |kind, value| Feature { kind, offset, value };
    [
        f(FeatureKind::Lower, b.to_ascii_lowercase()),
        f(FeatureKind::IsUpper, b.is_ascii_uppercase() as u8),
        f(FeatureKind::IsDigit, b.is_ascii_digit() as u8),
        f(FeatureKind::IsAlnum, b.is_ascii_alphanumeric() as u8),
    ]
}

pub fn position_features(text: &[u8], t: usize, window_len: usize) -> Vec<Feature> {
    let w = window_len as isize;
    let n = text.len() as isize;
    let mut out = Vec::new();
    for o in -w..=w {
        let p = t as isize + o;
        let offset = o as i8;
        if (0..n).contains(&p) {
            out.extend(byte_features(text[p as usize], offset));
        } else if p == -1 {
            out.push(Feature { kind: FeatureKind::Bos, offset, value: 0 });
        } else if p == n {
            out.push(Feature { kind: FeatureKind::Eos, offset, value: 0 });
        }
    }
    out
}

pub fn extract_features(text: &[u8], window_len: usize) -> Vec<Vec<Feature>> {
    (0..text.len()).map(|t| position_features(text, t, window_len)).collect()
}

/// Feature → dense id. Once frozen, unseen features map to nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVocabulary {
    ids: HashMap<Feature, u32>,
    features: Vec<Feature>,
    frozen: bool,
}

impl FeatureVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Id of `f`, assigning the next id to unseen features unless frozen.
    pub fn intern(&mut self, f: Feature) -> Option<u32> {
        if let Some(&id) = self.ids.get(&f) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.features.len() as u32;
        self.ids.insert(f, id);
        self.features.push(f);
        Some(id)
    }

    pub fn get(&self, f: &Feature) -> Option<u32> {
        self.ids.get(f).copied()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Vocabulary of every feature seen in `texts`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a [u8]>, window_len: usize) -> Self {
        let mut v = Self::new();
        for text in texts {
            for t in 0..text.len() {
                for f in position_features(text, t, window_len) {
                    v.intern(f);
                }
            }
        }
        v
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.to_string()).collect()
    }

    pub fn from_names(names: &[String]) -> Result<Self> {
        let mut v = Self::new();
        for n in names {
            v.intern(n.parse()?);
        }
        v.freeze();
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrfOptimizer {
    /// Full-batch quasi-Newton with orthant-wise L1; one iteration is one
    /// objective/gradient evaluation round.
    Lbfgs,
    /// Minibatch gradient descent, step decayed per epoch, L1 by soft
    /// thresholding; one iteration is one epoch.
    Sgd { step: f64, decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramCrfConfig {
    pub window_len: usize,
    pub batch_size: usize,
    pub max_length: usize,
    pub l1: f64,
    pub l2: f64,
    pub max_iterations: usize,
    pub optimizer: CrfOptimizer,
    /// Worker threads for objective evaluation; results are summed in a
    /// fixed order, so a given worker count is reproducible.
    pub workers: usize,
}

impl Default for NgramCrfConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW,
            batch_size: 1000,
            max_length: 2500,
            l1: 0.1,
            l2: 0.1,
            max_iterations: 100,
            optimizer: CrfOptimizer::Lbfgs,
            workers: 1,
        }
    }
}

impl NgramCrfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_length == 0 || self.batch_size == 0 || self.workers == 0 {
            return Err(Error::Config("max_length, batch_size and workers must be positive".into()));
        }
        if self.window_len > 100 {
            return Err(Error::Config("window_len must be at most 100".into()));
        }
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(Error::Config("regularization coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

const L: usize = NUM_LABELS;
const NONE: u32 = u32::MAX;

/// Feature ids per (offset, byte) slot and per boundary offset.
#[derive(Debug, Clone, PartialEq)]
struct SlotIndex {
    window: usize,
    slots: Vec<[u32; 4]>,
    bos: Vec<u32>,
    eos: Vec<u32>,
}

impl SlotIndex {
    fn new(vocab: &FeatureVocabulary, window: usize) -> Self {
        let width = 2 * window + 1;
        let mut slots = vec![[NONE; 4]; width * 256];
        let mut bos = vec![NONE; width];
        let mut eos = vec![NONE; width];
        for oi in 0..width {
            let o = oi as i8 - window as i8;
            for b in 0..256usize {
                for (k, f) in byte_features(b as u8, o).iter().enumerate() {
                    slots[oi * 256 + b][k] = vocab.get(f).unwrap_or(NONE);
                }
            }
            bos[oi] = vocab.get(&Feature { kind: FeatureKind::Bos, offset: o, value: 0 }).unwrap_or(NONE);
            eos[oi] = vocab.get(&Feature { kind: FeatureKind::Eos, offset: o, value: 0 }).unwrap_or(NONE);
        }
        Self { window, slots, bos, eos }
    }

    /// Summed label scores per slot.
    fn table(&self, w: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; self.slots.len() * L];
        for (s, ids) in self.slots.iter().enumerate() {
            for &id in ids {
                if id != NONE {
                    let row = &w[id as usize * L..(id as usize + 1) * L];
                    t[s * L..(s + 1) * L].iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
            }
        }
        t
    }

    fn emissions(&self, seq: &[u8], table: &[f64], w: &[f64]) -> Vec<f64> {
        let n = seq.len() as isize;
        let win = self.window as isize;
        let mut e = vec![0.0; seq.len() * L];
        for t in 0..n {
            let row = &mut e[t as usize * L..(t as usize + 1) * L];
            for o in -win..=win {
                let p = t + o;
                let oi = (o + win) as usize;
                let src = if (0..n).contains(&p) {
                    let s = oi * 256 + seq[p as usize] as usize;
                    &table[s * L..(s + 1) * L]
                } else {
                    let id = if p == -1 {
                        self.bos[oi]
                    } else if p == n {
                        self.eos[oi]
                    } else {
                        NONE
                    };
                    if id == NONE {
                        continue;
                    }
                    &w[id as usize * L..(id as usize + 1) * L]
                };
                row.iter_mut().zip(src).for_each(|(a, b)| *a += b);
            }
        }
        e
    }

    /// Chains emission gradients back to slot and boundary gradients.
    fn accumulate(&self, seq: &[u8], de: &[f64], slot_grad: &mut [f64], w_grad: &mut [f64]) {
        let n = seq.len() as isize;
        let win = self.window as isize;
        for t in 0..n {
            let row = &de[t as usize * L..(t as usize + 1) * L];
            for o in -win..=win {
                let p = t + o;
                let oi = (o + win) as usize;
                let dst = if (0..n).contains(&p) {
                    let s = oi * 256 + seq[p as usize] as usize;
                    &mut slot_grad[s * L..(s + 1) * L]
                } else {
                    let id = if p == -1 {
                        self.bos[oi]
                    } else if p == n {
                        self.eos[oi]
                    } else {
                        NONE
                    };
                    if id == NONE {
                        continue;
                    }
                    &mut w_grad[id as usize * L..(id as usize + 1) * L]
                };
                dst.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
        }
    }

    fn scatter(&self, slot_grad: &[f64], w_grad: &mut [f64]) {
        for (s, ids) in self.slots.iter().enumerate() {
            let g = &slot_grad[s * L..(s + 1) * L];
            if g.iter().all(|x| *x == 0.0) {
                continue;
            }
            for &id in ids {
                if id != NONE {
                    w_grad[id as usize * L..(id as usize + 1) * L]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(a, b)| *a += b);
                }
            }
        }
    }
}

/// One training sequence: codes and gold label ids, padding removed.
struct Sequence {
    codes: Vec<u8>,
    gold: Vec<u8>,
}

fn sequences(batch: &EncodedBatch) -> Vec<Sequence> {
    (0..batch.n_chunks())
        .map(|c| {
            let codes = batch.chunk(c);
            let n = codes.iter().position(|&x| x == PAD_CODE).unwrap_or(codes.len());
            Sequence {
                codes: codes[..n].to_vec(),
                gold: batch.chunk_labels(c).map(|l| l[..n].to_vec()).unwrap_or_default(),
            }
        })
        .filter(|s| !s.codes.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramCrf {
    pub config: NgramCrfConfig,
    pub vocab: FeatureVocabulary,
    /// `[n_features × L]`.
    pub weights: Vec<f64>,
    pub crf: CrfParams,
    index: SlotIndex,
}

/// Data term of the objective over `seqs`, with gradient laid out as
/// `[weights, transitions, start, end]`.
fn data_term(
    index: &SlotIndex,
    n_weights: usize,
    w: &[f64],
    crf_p: &CrfParams,
    seqs: &[&Sequence],
    workers: usize,
) -> Result<(f64, Vec<f64>)> {
    let table = index.table(w);
    let n_crf = crf_p.n_params();
    let run = |part: &[&Sequence]| -> Result<(f64, Vec<f64>)> {
        let mut loss = 0.0;
        let mut slot_grad = vec![0.0; index.slots.len() * L];
        let mut grad = vec![0.0; n_weights + n_crf];
        for s in part {
            let e = index.emissions(&s.codes, &table, w);
            let (nll, g) = crf::nll_grad(&e, &s.gold, crf_p, None)?;
            loss += nll;
            let (wg, cg) = grad.split_at_mut(n_weights);
            index.accumulate(&s.codes, &g.emissions, &mut slot_grad, wg);
            cg.iter_mut().zip(g.params_vec()).for_each(|(a, b)| *a += b);
        }
        index.scatter(&slot_grad, &mut grad[..n_weights]);
        Ok((loss, grad))
    };
    let workers = workers.clamp(1, seqs.len().max(1));
    if workers == 1 {
        return run(seqs);
    }
    let per = seqs.len().div_ceil(workers);
    let parts: Vec<Result<(f64, Vec<f64>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seqs.chunks(per).map(|p| scope.spawn(move || run(p))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_weights + n_crf];
    for p in parts {
        let (l, g) = p?;
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

fn round_to_f32(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = *x as f32 as f64);
}

impl NgramCrf {
    pub fn new(config: NgramCrfConfig, mut vocab: FeatureVocabulary) -> Self {
        vocab.freeze();
        let index = SlotIndex::new(&vocab, config.window_len);
        Self {
            weights: vec![0.0; vocab.len() * L],
            crf: CrfParams::zeros(L),
            index,
            vocab,
            config,
        }
    }

    pub fn emissions(&self, codes: &[u8]) -> Vec<f64> {
        self.index.emissions(codes, &self.index.table(&self.weights), &self.weights)
    }

    /// Regularized objective over `docs` (sum over sequences).
    pub fn objective(&self, docs: &[LabeledDocument]) -> Result<f64> {
        let batch = flatten(docs, self.config.max_length, true)?;
        let seqs = sequences(&batch);
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let (loss, _) = data_term(&self.index, self.weights.len(), &self.weights, &self.crf, &refs, self.config.workers)?;
        let (r, _) = crf::regularizer(&self.weights, self.config.l1, self.config.l2);
        Ok(loss + r)
    }

    pub fn train(docs: &[LabeledDocument], config: NgramCrfConfig, seed: u64) -> Result<(Self, TrainReport)> {
        config.validate()?;
        if docs.is_empty() {
            return Err(Error::Validation("training set is empty".into()));
        }
        let started = Instant::now();
        let batch = flatten(docs, config.max_length, true)?;
        let seqs = sequences(&batch);
        let vocab = FeatureVocabulary::build(seqs.iter().map(|s| s.codes.as_slice()), config.window_len);
        let mut model = Self::new(config.clone(), vocab);
        let nw = model.weights.len();
        log::info!(
            "ngram-crf: {} sequences, {} features, {} weights",
            seqs.len(),
            model.vocab.len(),
            nw + model.crf.n_params()
        );
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let losses = match config.optimizer {
            CrfOptimizer::Lbfgs => model.train_lbfgs(&refs)?,
            CrfOptimizer::Sgd { step, decay } => model.train_sgd(&seqs, step, decay, seed)?,
        };
        round_to_f32(&mut model.weights);
        round_to_f32(&mut model.crf.transitions);
        round_to_f32(&mut model.crf.start);
        round_to_f32(&mut model.crf.end);
        let report = TrainReport {
            engine: Engine::NgramCrf,
            losses,
            heldout_micro_f1: vec![],
            wall_seconds: started.elapsed().as_secs_f64(),
            seed,
        };
        Ok((model, report))
    }

    fn train_lbfgs(&mut self, seqs: &[&Sequence]) -> Result<Vec<f64>> {
        let nw = self.weights.len();
        let c = &self.config;
        let mut x = self.weights.clone();
        x.extend(self.crf.to_vec());
        let mut l1 = vec![c.l1; nw];
        l1.resize(x.len(), 0.0);
        let cfg = OwlqnConfig {
            max_iterations: c.max_iterations,
            ..Default::default()
        };
        let index = &self.index;
        let (l2, workers) = (c.l2, c.workers);
        let history = owlqn(&mut x, &l1, &cfg, |x| {
            let (w, cp) = x.split_at(nw);
            let crf_p = CrfParams::from_slice(L, cp);
            let (loss, mut grad) = data_term(index, nw, w, &crf_p, seqs, workers)?;
            let mut value = loss;
            for i in 0..nw {
                value += l2 * w[i] * w[i];
                grad[i] += 2.0 * l2 * w[i];
            }
            if !value.is_finite() {
                return Err(Error::Diverged(format!("non-finite CRF objective {value}")));
            }
            Ok(Evaluation { value, grad })
        })?;
        self.weights.copy_from_slice(&x[..nw]);
        self.crf = CrfParams::from_slice(L, &x[nw..]);
        Ok(history)
    }

    fn train_sgd(&mut self, seqs: &[Sequence], step: f64, decay: f64, seed: u64) -> Result<Vec<f64>> {
        let nw = self.weights.len();
        let c = self.config.clone();
        let total_chars: usize = seqs.iter().map(|s| s.codes.len()).sum();
        let nt = total_chars as f64;
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        let mut rng = stream_rng(seed, "ngram-crf-sgd", 0);
        let all: Vec<&Sequence> = seqs.iter().collect();
        let objective = |m: &Self| -> Result<f64> {
            let (loss, _) = data_term(&m.index, nw, &m.weights, &m.crf, &all, c.workers)?;
            Ok(loss + crf::regularizer(&m.weights, c.l1, c.l2).0)
        };
        let mut history = vec![objective(self)?];
        for epoch in 0..c.max_iterations {
            let lr = step * decay.powi(epoch as i32);
            order.shuffle(&mut rng);
            for chunk in order.chunks(c.batch_size) {
                let part: Vec<&Sequence> = chunk.iter().map(|&i| &seqs[i]).collect();
                let n_chars: usize = part.iter().map(|s| s.codes.len()).sum();
                let (_, grad) = data_term(&self.index, nw, &self.weights, &self.crf, &part, c.workers)?;
                let scale = 1.0 / n_chars as f64;
                for i in 0..nw {
                    let g = grad[i] * scale + 2.0 * c.l2 * self.weights[i] / nt;
                    let w = self.weights[i] - lr * g;
                    let th = lr * c.l1 / nt;
                    self.weights[i] = w.signum() * (w.abs() - th).max(0.0);
                }
                let mut p = self.crf.to_vec();
                p.iter_mut().zip(&grad[nw..]).for_each(|(a, g)| *a -= lr * g * scale);
                self.crf = CrfParams::from_slice(L, &p);
            }
            let obj = objective(self)?;
            if !obj.is_finite() || obj > 10.0 * history[0] {
                return Err(Error::Diverged(format!("objective {obj} at epoch {epoch}")));
            }
            history.push(obj);
        }
        Ok(history)
    }

    /// One label id per code of `batch` (PAD on padding), chunks spread
    /// over `config.workers` threads.
    pub fn predict_batch(&self, batch: &EncodedBatch) -> Result<Vec<u8>> {
        let table = self.index.table(&self.weights);
        let ml = batch.max_length;
        let mut pred = vec![PAD_CODE; batch.indices.len()];
        let decode = |codes: &[u8], out: &mut [u8]| -> Result<()> {
            for (chunk, o) in codes.chunks(ml).zip(out.chunks_mut(ml)) {
                let n = chunk.iter().position(|&x| x == PAD_CODE).unwrap_or(chunk.len());
                if n == 0 {
                    continue;
                }
                let e = self.index.emissions(&chunk[..n], &table, &self.weights);
                o[..n].copy_from_slice(&crf::viterbi_decode(&e, &self.crf, None)?);
            }
            Ok(())
        };
        let n_chunks = batch.n_chunks();
        let workers = self.config.workers.clamp(1, n_chunks.max(1));
        if workers == 1 {
            decode(&batch.indices, &mut pred)?;
            return Ok(pred);
        }
        let per = n_chunks.div_ceil(workers) * ml;
        std::thread::scope(|s| {
            let handles: Vec<_> = batch
                .indices
                .chunks(per)
                .zip(pred.chunks_mut(per))
                .map(|(c, o)| s.spawn(move || decode(c, o)))
                .collect();
            handles.into_iter().try_for_each(|h| h.join().expect("worker panicked"))
        })?;
        Ok(pred)
    }

    pub fn predict(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>> {
        let batch = flatten(docs, self.config.max_length, false)?;
        unflatten(&self.predict_batch(&batch)?, &batch)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(Engine::NgramCrf.name(), serde_json::to_value(&self.config)?);
        ck.vocabulary = self.vocab.names();
        ck.push_f64("feature_weights", &[self.vocab.len(), L], &self.weights);
        ck.push_f64("crf.transitions", &[L, L], &self.crf.transitions);
        ck.push_f64("crf.start", &[L], &self.crf.start);
        ck.push_f64("crf.end", &[L], &self.crf.end);
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_engine(Engine::NgramCrf.name())?;
        let config: NgramCrfConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::Checkpoint(format!("bad ngram-crf config: {e}")))?;
        let vocab = FeatureVocabulary::from_names(&ck.vocabulary)?;
        let mut m = Self::new(config, vocab);
        m.weights = ck.get_f64("feature_weights", m.weights.len())?;
        m.crf.transitions = ck.get_f64("crf.transitions", L * L)?;
        m.crf.start = ck.get_f64("crf.start", L)?;
        m.crf.end = ck.get_f64("crf.end", L)?;
        Ok(m)
    }
}

impl Tagger for NgramCrf {
    fn engine(&self) -> Engine {
        Engine::NgramCrf
    }

    fn tag(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>> {
        self.predict(docs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::SpanAnnotation;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn names(fs: &[Feature]) -> BTreeSet<String> {
        fs.iter().map(|f| f.to_string()).collect()
    }

    #[test]
    fn single_char_window_zero() {
        let f = extract_features(b"A", 0);
        let want: BTreeSet<String> = ["lower=a@0", "isupper=1@0", "isdigit=0@0", "isalnum=1@0"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(names(&f[0]), want);
    }

    #[test]
    fn window_one_at_the_start() {
        let f = extract_features(b"a1", 1);
        let got = names(&f[0]);
        let want: BTreeSet<String> = [
            "BOS@-1",
            "lower=a@0",
            "isupper=0@0",
            "isdigit=0@0",
            "isalnum=1@0",
            "lower=1@1",
            "isupper=0@1",
            "isdigit=1@1",
            "isalnum=1@1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(got, want);
        assert!(names(&f[1]).contains("EOS@1"));
    }

    #[test]
    fn default_window_and_count_bound() {
        assert_eq!(NgramCrfConfig::default().window_len, 4);
        let mut rng = crate::rng::stream_rng(0, "feat", 0);
        for _ in 0..50 {
            let n = rng.gen_range(1..20);
            let text: Vec<u8> = (0..n).map(|_| rng.gen_range(1..128)).collect();
            let w = rng.gen_range(0..6);
            let a = extract_features(&text, w);
            assert_eq!(a, extract_features(&text, w));
            for fs in &a {
                assert!(fs.len() <= 4 * (2 * w + 1) + 2);
            }
        }
    }

    #[test]
    fn feature_names_round_trip() {
        let text: Vec<u8> = (1u8..128).collect();
        for fs in extract_features(&text, 2) {
            for f in fs {
                assert_eq!(f.to_string().parse::<Feature>().unwrap(), f);
            }
        }
        for s in ["lower==@0", "lower=@@-3", "lower=\\x5c@1", "BOS@-2"] {
            assert_eq!(s.parse::<Feature>().unwrap().to_string(), s);
        }
        assert!("nope".parse::<Feature>().is_err());
    }

    #[test]
    fn vocabulary_id_set_is_order_independent_and_frozen() {
        let a = FeatureVocabulary::build([b"abc".as_slice(), b"12".as_slice()], 1);
        let b = FeatureVocabulary::build([b"12".as_slice(), b"abc".as_slice()], 1);
        let sa: BTreeSet<_> = a.features().iter().copied().collect();
        let sb: BTreeSet<_> = b.features().iter().copied().collect();
        assert_eq!(sa, sb);
        assert_ne!(a.features(), b.features());
        let mut f = a.clone();
        f.freeze();
        let unseen = Feature { kind: FeatureKind::Lower, offset: 0, value: b'z' };
        assert_eq!(f.intern(unseen), None);
        assert_eq!(f.len(), a.len());
    }

    /// Emissions from the slot tables equal an explicit sum over features.
    #[test]
    fn slot_emissions_match_feature_sum() {
        let text = b"Ab1 -x";
        let vocab = FeatureVocabulary::build([text.as_slice()], 2);
        let mut m = NgramCrf::new(NgramCrfConfig { window_len: 2, ..Default::default() }, vocab);
        let mut rng = crate::rng::stream_rng(0, "emit", 0);
        m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let e = m.emissions(text);
        for (t, fs) in extract_features(text, 2).iter().enumerate() {
            for j in 0..L {
                let want: f64 = fs.iter().map(|f| m.weights[m.vocab.get(f).unwrap() as usize * L + j]).sum();
                assert!((e[t * L + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feature_weight_gradient_matches_finite_differences() {
        let docs = vec![
            LabeledDocument::from_spans("a", "id 12-3", vec![SpanAnnotation::new(3, 7, EntityLabel::Ssn)]).unwrap(),
            LabeledDocument::from_spans("b", "Xy 9", vec![SpanAnnotation::new(3, 4, EntityLabel::Integer)]).unwrap(),
        ];
        let config = NgramCrfConfig { window_len: 1, max_length: 6, l1: 0.0, l2: 0.05, ..Default::default() };
        let batch = flatten(&docs, config.max_length, true).unwrap();
        let seqs = sequences(&batch);
        let vocab = FeatureVocabulary::build(seqs.iter().map(|s| s.codes.as_slice()), 1);
        let mut m = NgramCrf::new(config, vocab);
        let mut rng = crate::rng::stream_rng(0, "fd", 0);
        m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
        m.crf.transitions.iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let nw = m.weights.len();
        let f = |w: &[f64], cp: &CrfParams| {
            let (l, _) = data_term(&m.index, nw, w, cp, &refs, 1).unwrap();
            l + crf::regularizer(w, 0.0, 0.05).0
        };
        let (_, mut g) = data_term(&m.index, nw, &m.weights, &m.crf, &refs, 1).unwrap();
        let (_, rg) = crf::regularizer(&m.weights, 0.0, 0.05);
        g.iter_mut().zip(rg).for_each(|(a, b)| *a += b);
        let h = 1e-6;
        for i in (0..nw).step_by(7) {
            let mut up = m.weights.clone();
            up[i] += h;
            let mut dn = m.weights.clone();
            dn[i] -= h;
            let num = (f(&up, &m.crf) - f(&dn, &m.crf)) / (2.0 * h);
            let rel = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(1e-3);
            assert!(rel <= 1e-4, "weight {i}: {} vs {num}", g[i]);
        }
        let p = m.crf.to_vec();
        for i in (0..p.len()).step_by(13) {
            let mut up = p.clone();
            up[i] += h;
            let mut dn = p.clone();
            dn[i] -= h;
            let num = (f(&m.weights, &CrfParams::from_slice(L, &up)) - f(&m.weights, &CrfParams::from_slice(L, &dn)))
                / (2.0 * h);
            let rel = (g[nw + i] - num).abs() / g[nw + i].abs().max(num.abs()).max(1e-3);
            assert!(rel <= 1e-4);
        }
    }

    /// Digits are INTEGER, lowercase letters BACKGROUND, uppercase PERSON.
    fn toy_docs(n: usize, seed: u64) -> Vec<LabeledDocument> {
        let mut rng = crate::rng::stream_rng(seed, "toy", 0);
        (0..n)
            .map(|i| {
                let mut text = String::new();
                let mut labels = Vec::new();
                for _ in 0..rng.gen_range(5..40) {
                    let (c, l) = match rng.gen_range(0..3) {
                        0 => ((b'0' + rng.gen_range(0..10)) as char, EntityLabel::Integer),
                        1 => ((b'a' + rng.gen_range(0..26)) as char, EntityLabel::Background),
                        _ => ((b'A' + rng.gen_range(0..26)) as char, EntityLabel::Person),
                    };
                    text.push(c);
                    labels.push(l);
                }
                LabeledDocument::from_labels(format!("t{i}"), text, labels).unwrap()
            })
            .collect()
    }

    fn accuracy(model: &NgramCrf, docs: &[LabeledDocument]) -> f64 {
        let pred = model.predict(docs).unwrap();
        let (mut ok, mut n) = (0, 0);
        for (d, p) in docs.iter().zip(&pred) {
            ok += d.labels().iter().zip(p).filter(|(a, b)| a == b).count();
            n += d.len();
        }
        ok as f64 / n as f64
    }

    #[test]
    fn toy_language_is_learned() {
        let train = toy_docs(60, 1);
        let test = toy_docs(30, 2);
        let config = NgramCrfConfig { max_length: 64, max_iterations: 50, ..Default::default() };
        let (m, report) = NgramCrf::train(&train, config, 0).unwrap();
        assert!(report.losses.last().unwrap() <= &report.losses[0]);
        assert!(accuracy(&m, &test) >= 0.99);
    }

    #[test]
    fn sgd_loss_decreases_on_repeated_sample() {
        let doc = toy_docs(1, 3).pop().unwrap();
        let train = vec![doc; 4];
        let config = NgramCrfConfig {
            max_length: 64,
            max_iterations: 10,
            optimizer: CrfOptimizer::Sgd { step: 0.1, decay: 1.0 },
            ..Default::default()
        };
        let (_, report) = NgramCrf::train(&train, config, 0).unwrap();
        assert_eq!(report.losses.len(), 11);
        assert!(report.losses.windows(2).all(|w| w[1] < w[0]), "{:?}", report.losses);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (m, _) = NgramCrf::train(
            &toy_docs(10, 4),
            NgramCrfConfig { max_length: 32, max_iterations: 5, ..Default::default() },
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        m.to_checkpoint().unwrap().write(&mut buf).unwrap();
        let back = NgramCrf::from_checkpoint(&Checkpoint::read(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn predict_keeps_lengths() {
        let (m, _) = NgramCrf::train(
            &toy_docs(5, 5),
            NgramCrfConfig { max_length: 16, max_iterations: 2, ..Default::default() },
            0,
        )
        .unwrap();
        assert!(m.predict(&[]).unwrap().is_empty());
        let docs = vec![LabeledDocument::unlabeled("x", "a".repeat(50)), LabeledDocument::unlabeled("y", "")];
        let p = m.predict(&docs).unwrap();
        assert_eq!(p[0].len(), 50);
        assert!(p[1].is_empty());
        let mut par = m.clone();
        par.config.workers = 3;
        assert_eq!(par.predict(&docs).unwrap(), p);
    }
}
