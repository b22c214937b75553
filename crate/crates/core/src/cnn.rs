//! Character CNN tagger: embedding, convolution blocks
//! (conv, ReLU, dropout, batchnorm), position-wise dense blocks (dense,
//! ReLU, dropout) and a projection to one score per label. Decoded by
//! argmax (softmax head) or Viterbi (CRF head).
//!
//! Activations are `[rows × channels]` with rows = chunks × max_length.
//! Convolutions use same padding inside each chunk and never see across
//! chunk boundaries.

use std::fmt::Debug;
use std::io::BufRead;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::path::Path;
use std::time::Instant;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::crf::{self, CrfParams};
use crate::document::LabeledDocument;
use crate::encode::{flatten, unflatten, EncodedBatch, PAD_CODE, VOCAB_SIZE};
use crate::error::{Error, Result};
use crate::eval::score_documents;
use crate::label::{EntityLabel, NUM_LABELS};
use crate::optim::{Optimizer, OptimizerConfig, Param};
use crate::rng::{stream_rng, Rng};
use crate::tagger::{Engine, Tagger, TrainReport};

const L: usize = NUM_LABELS;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

pub trait Scalar: Float + Param + AddAssign + SubAssign + MulAssign + Debug + Default {
    /// `c ← alpha·a·b + beta·c` over raw strided storage.
    ///
    /// # Safety
    /// Every addressed element must lie inside its allocation.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// `c[m×n] (+)= a[m×k]·b[k×n]`; `c` is row-major with row stride `rsc`.
#[allow(clippy::too_many_arguments)]
fn gemm<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    (rsa, csa): (usize, usize),
    b: &[S],
    (rsb, csb): (usize, usize),
    c: &mut [S],
    rsc: usize,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!((m - 1) * rsa + (k - 1) * csa < a.len());
        assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    }
    assert!((m - 1) * rsc + n - 1 < c.len());
    let beta = if accumulate { S::one() } else { S::zero() };
    // SAFETY: extents checked above.
    unsafe {
        S::gemm_raw(
            m,
            k,
            n,
            S::one(),
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        )
    }
}

fn cast<S: Scalar>(x: f64) -> S {
    S::from_f64(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Softmax,
    Crf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnConfig {
    pub epochs: usize,
    pub num_conv_layers: usize,
    pub num_dense_layers: usize,
    pub batch_size: usize,
    pub embedding_dim: usize,
    pub conv_channels: usize,
    pub max_length: usize,
    pub filter_size: usize,
    pub dense_layer_size: usize,
    pub dropout: f64,
    pub head: Head,
    pub optimizer: OptimizerConfig,
    /// Inference threads; training is single-threaded.
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            num_conv_layers: 4,
            num_dense_layers: 2,
            batch_size: 24,
            embedding_dim: 64,
            conv_channels: 64,
            max_length: 3400,
            filter_size: 13,
            dense_layer_size: 96,
            dropout: 0.073,
            head: Head::Softmax,
            optimizer: OptimizerConfig::adam(),
            workers: 1,
        }
    }
}

impl CnnConfig {
    /// Defaults for the CRF-decoded variant.
    pub fn crf() -> Self {
        Self {
            epochs: 15,
            batch_size: 128,
            head: Head::Crf,
            optimizer: OptimizerConfig::rmsprop(),
            ..Self::default()
        }
    }

    pub fn engine(&self) -> Engine {
        match self.head {
            Head::Softmax => Engine::Cnn,
            Head::Crf => Engine::CnnCrf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("num_conv_layers", self.num_conv_layers),
            ("batch_size", self.batch_size),
            ("embedding_dim", self.embedding_dim),
            ("conv_channels", self.conv_channels),
            ("max_length", self.max_length),
            ("filter_size", self.filter_size),
            ("dense_layer_size", self.dense_layer_size),
            ("workers", self.workers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name,
            shape,
            data: vec![S::zero(); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnStats<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout on, batchnorm on batch statistics.
    Train,
    /// Dropout off, batchnorm on running statistics.
    Eval,
}

/// Trainable tensors in a fixed order: embedding, per conv block
/// (weight `[K, in, out]`, bias, gamma, beta), per dense block (weight
/// `[in, out]`, bias), output (weight, bias), then for the CRF head
/// transitions, start and end.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<S> {
    pub config: CnnConfig,
    pub params: Vec<Tensor<S>>,
    pub running: Vec<BnStats<S>>,
}

struct ConvCache<S> {
    input: Vec<S>,
    pre: Vec<S>,
    drop: Option<Vec<S>>,
    xhat: Vec<S>,
    inv_std: Vec<S>,
}

struct DenseCache<S> {
    input: Vec<S>,
    pre: Vec<S>,
    drop: Option<Vec<S>>,
}

#[derive(Default)]
struct Cache<S> {
    conv: Vec<ConvCache<S>>,
    dense: Vec<DenseCache<S>>,
    out_input: Vec<S>,
}

pub struct LossGrads<S> {
    /// Mean loss per non-pad position.
    pub loss: f64,
    pub grads: Vec<Vec<S>>,
    /// Batch statistics per conv block (train mode only).
    pub batch_stats: Vec<BnStats<S>>,
}

fn relu_in_place<S: Scalar>(v: &mut [S]) {
    v.iter_mut().for_each(|x| {
        if *x < S::zero() {
            *x = S::zero()
        }
    });
}

fn dropout_mask<S: Scalar>(n: usize, p: f64, rng: &mut Rng) -> Vec<S> {
    let keep: S = cast(1.0 / (1.0 - p));
    (0..n)
        .map(|_| if rng.gen::<f64>() < p { S::zero() } else { keep })
        .collect()
}

fn add_bias<S: Scalar>(out: &mut [S], bias: &[S]) {
    for row in out.chunks_exact_mut(bias.len()) {
        row.iter_mut().zip(bias).for_each(|(a, b)| *a += *b);
    }
}

fn column_sums<S: Scalar>(x: &[S], width: usize, into: &mut [S]) {
    for row in x.chunks_exact(width) {
        into.iter_mut().zip(row).for_each(|(a, b)| *a += *b);
    }
}

/// Rows `t0..t1` of chunk-local tap `off` that stay inside the chunk.
fn tap_range(t_len: usize, off: isize) -> Option<(usize, usize)> {
    let t0 = (-off).max(0) as usize;
    let t1 = (t_len as isize - off).min(t_len as isize);
    (t1 > t0 as isize).then_some((t0, t1 as usize))
}

fn conv_forward<S: Scalar>(
    x: &[S],
    cin: usize,
    w: &[S],
    bias: &[S],
    k: usize,
    t_len: usize,
    out: &mut [S],
) {
    let cout = bias.len();
    let n_chunks = x.len() / cin / t_len;
    for row in out.chunks_exact_mut(cout) {
        row.copy_from_slice(bias);
    }
    let left = (k as isize - 1) / 2;
    for b in 0..n_chunks {
        for tap in 0..k {
            let off = tap as isize - left;
            let Some((t0, t1)) = tap_range(t_len, off) else { continue };
            let src = (b * t_len + t0).wrapping_add_signed(off);
            gemm(
                t1 - t0,
                cin,
                cout,
                &x[src * cin..],
                (cin, 1),
                &w[tap * cin * cout..(tap + 1) * cin * cout],
                (cout, 1),
                &mut out[(b * t_len + t0) * cout..],
                cout,
                true,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<S: Scalar>(
    x: &[S],
    cin: usize,
    w: &[S],
    cout: usize,
    k: usize,
    t_len: usize,
    dout: &[S],
    dw: &mut [S],
    db: &mut [S],
    dx: Option<&mut [S]>,
) {
    let n_chunks = x.len() / cin / t_len;
    column_sums(dout, cout, db);
    let left = (k as isize - 1) / 2;
    let mut dx = dx;
    for b in 0..n_chunks {
        for tap in 0..k {
            let off = tap as isize - left;
            let Some((t0, t1)) = tap_range(t_len, off) else { continue };
            let src = (b * t_len + t0).wrapping_add_signed(off);
            let wk = tap * cin * cout..(tap + 1) * cin * cout;
            let d = &dout[(b * t_len + t0) * cout..];
            gemm(cin, t1 - t0, cout, &x[src * cin..], (1, cin), d, (cout, 1), &mut dw[wk.clone()], cout, true);
            if let Some(dx) = dx.as_deref_mut() {
                gemm(t1 - t0, cout, cin, d, (cout, 1), &w[wk], (1, cout), &mut dx[src * cin..], cin, true);
            }
        }
    }
}

/// Loads `char v1 .. v_dim` lines; returns (code, vector) for single-byte
/// characters. Blank lines are skipped.
pub fn read_embedding_file<R: BufRead>(r: R, dim: usize) -> Result<Vec<(u8, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let Some(c) = line.chars().next() else { continue };
        let rest = &line[c.len_utf8()..];
        let values: Vec<f64> = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Embedding {
                    line: line_no,
                    message: format!("not a number: {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Embedding {
                line: line_no,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding {
                line: line_no,
                message: "non-finite value".into(),
            });
        }
        if c.is_ascii() && c != '\0' {
            out.push((c as u8, values));
        }
    }
    Ok(out)
}

impl<S: Scalar> Cnn<S> {
    fn conv_base(&self, i: usize) -> usize {
        1 + 4 * i
    }

    fn dense_base(&self, j: usize) -> usize {
        1 + 4 * self.config.num_conv_layers + 2 * j
    }

    fn out_base(&self) -> usize {
        self.dense_base(self.config.num_dense_layers)
    }

    fn crf_base(&self) -> Option<usize> {
        (self.config.head == Head::Crf).then(|| self.out_base() + 2)
    }

    /// Zero-filled parameters with the shapes `config` implies.
    pub fn zeros(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut p = vec![Tensor::zeros("embedding".into(), vec![VOCAB_SIZE, c.embedding_dim])];
        let mut width = c.embedding_dim;
        let mut running = Vec::new();
        for i in 0..c.num_conv_layers {
            let ch = c.conv_channels;
            p.push(Tensor::zeros(format!("conv{i}.weight"), vec![c.filter_size, width, ch]));
            p.push(Tensor::zeros(format!("conv{i}.bias"), vec![ch]));
            p.push(Tensor::zeros(format!("bn{i}.gamma"), vec![ch]));
            p.push(Tensor::zeros(format!("bn{i}.beta"), vec![ch]));
            running.push(BnStats {
                mean: vec![S::zero(); ch],
                var: vec![S::one(); ch],
            });
            width = ch;
        }
        for j in 0..c.num_dense_layers {
            p.push(Tensor::zeros(format!("dense{j}.weight"), vec![width, c.dense_layer_size]));
            p.push(Tensor::zeros(format!("dense{j}.bias"), vec![c.dense_layer_size]));
            width = c.dense_layer_size;
        }
        p.push(Tensor::zeros("output.weight".into(), vec![width, L]));
        p.push(Tensor::zeros("output.bias".into(), vec![L]));
        if c.head == Head::Crf {
            p.push(Tensor::zeros("crf.transitions".into(), vec![L, L]));
            p.push(Tensor::zeros("crf.start".into(), vec![L]));
            p.push(Tensor::zeros("crf.end".into(), vec![L]));
        }
        Ok(Self {
            config,
            params: p,
            running,
        })
    }

    /// Embedding uniform ±0.05; conv and dense weights He-uniform over
    /// their fan-in; output weights Glorot-uniform; biases and CRF scores
    /// zero; batchnorm scale one.
    pub fn init(config: CnnConfig, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = stream_rng(seed, "cnn-init", 0);
        let out_base = m.out_base();
        for (i, t) in m.params.iter_mut().enumerate() {
            let limit = if i == 0 {
                0.05
            } else if t.name.ends_with(".weight") {
                let fan_out = *t.shape.last().unwrap();
                let fan_in = t.data.len() / fan_out;
                if i == out_base {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in as f64).sqrt()
                }
            } else {
                if t.name.ends_with(".gamma") {
                    t.data.iter_mut().for_each(|x| *x = S::one());
                }
                continue;
            };
            t.data.iter_mut().for_each(|x| *x = cast(rng.gen_range(-limit..limit)));
        }
        Ok(m)
    }

    /// Overwrites embedding rows for the characters in `rows`.
    pub fn set_embedding_rows(&mut self, rows: &[(u8, Vec<f64>)]) -> Result<()> {
        let d = self.config.embedding_dim;
        for (code, v) in rows {
            if v.len() != d {
                return Err(Error::Shape(format!("embedding row has {} values, expected {d}", v.len())));
            }
            let c = *code as usize;
            self.params[0].data[c * d..(c + 1) * d]
                .iter_mut()
                .zip(v)
                .for_each(|(a, b)| *a = cast(*b));
        }
        Ok(())
    }

    pub fn load_embedding_file(&mut self, path: &Path) -> Result<usize> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let rows = read_embedding_file(f, self.config.embedding_dim)?;
        self.set_embedding_rows(&rows)?;
        Ok(rows.len())
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<S>> {
        self.params.iter().find(|t| t.name == name)
    }

    pub fn crf_params(&self) -> Option<CrfParams> {
        let b = self.crf_base()?;
        let v = |i: usize| self.params[b + i].data.iter().map(|x| x.widen()).collect();
        Some(CrfParams {
            n_labels: L,
            transitions: v(0),
            start: v(1),
            end: v(2),
        })
    }

    fn forward_impl(
        &self,
        codes: &[u8],
        t_len: usize,
        mode: Mode,
        mut rng: Option<&mut Rng>,
        mut cache: Option<&mut Cache<S>>,
    ) -> Result<(Vec<S>, Vec<BnStats<S>>)> {
        let c = &self.config;
        if t_len == 0 || codes.len() % t_len != 0 {
            return Err(Error::Shape(format!("{} codes do not fill rows of {t_len}", codes.len())));
        }
        if let Some(bad) = codes.iter().find(|&&x| x as usize >= VOCAB_SIZE) {
            return Err(Error::Shape(format!("code {bad} outside the vocabulary")));
        }
        let n = codes.len();
        let d = c.embedding_dim;
        let emb = &self.params[0].data;
        let mut x: Vec<S> = Vec::with_capacity(n * d);
        for &code in codes {
            x.extend_from_slice(&emb[code as usize * d..(code as usize + 1) * d]);
        }
        let dropout = if mode == Mode::Train { c.dropout } else { 0.0 };
        let mut width = d;
        let mut stats = Vec::new();
        for i in 0..c.num_conv_layers {
            let b = self.conv_base(i);
            let ch = c.conv_channels;
            let mut z = vec![S::zero(); n * ch];
            conv_forward(&x, width, &self.params[b].data, &self.params[b + 1].data, c.filter_size, t_len, &mut z);
            let mut a = z.clone();
            relu_in_place(&mut a);
            let drop = if dropout > 0.0 {
                let r = rng.as_deref_mut().ok_or_else(|| Error::Config("dropout needs an rng".into()))?;
                let m = dropout_mask::<S>(n * ch, dropout, r);
                a.iter_mut().zip(&m).for_each(|(v, k)| *v *= *k);
                Some(m)
            } else {
                None
            };
            let (mean, var) = if mode == Mode::Train {
                let mut mean = vec![0.0f64; ch];
                let mut var = vec![0.0f64; ch];
                for row in a.chunks_exact(ch) {
                    mean.iter_mut().zip(row).for_each(|(m, v)| *m += v.widen());
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                for row in a.chunks_exact(ch) {
                    for j in 0..ch {
                        let dv = row[j].widen() - mean[j];
                        var[j] += dv * dv;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                stats.push(BnStats {
                    mean: mean.iter().map(|&v| cast(v)).collect(),
                    var: var.iter().map(|&v| cast(v)).collect(),
                });
                (mean, var)
            } else {
                let r = &self.running[i];
                (
                    r.mean.iter().map(|v| v.widen()).collect(),
                    r.var.iter().map(|v| v.widen()).collect(),
                )
            };
            let mean: Vec<S> = mean.into_iter().map(cast).collect();
            let inv_std: Vec<S> = var.iter().map(|v| cast(1.0 / (v + BN_EPS).sqrt())).collect();
            let gamma = &self.params[b + 2].data;
            let beta = &self.params[b + 3].data;
            let mut xhat = a;
            let mut y = vec![S::zero(); n * ch];
            for (hr, yr) in xhat.chunks_exact_mut(ch).zip(y.chunks_exact_mut(ch)) {
                for j in 0..ch {
                    hr[j] = (hr[j] - mean[j]) * inv_std[j];
                    yr[j] = gamma[j] * hr[j] + beta[j];
                }
            }
            if let Some(cache) = cache.as_deref_mut() {
                cache.conv.push(ConvCache {
                    input: std::mem::take(&mut x),
                    pre: z,
                    drop,
                    xhat,
                    inv_std,
                });
            }
            x = y;
            width = ch;
        }
        for j in 0..c.num_dense_layers {
            let b = self.dense_base(j);
            let h = c.dense_layer_size;
            let mut z = vec![S::zero(); n * h];
            add_bias(&mut z, &self.params[b + 1].data);
            gemm(n, width, h, &x, (width, 1), &self.params[b].data, (h, 1), &mut z, h, true);
            let mut a = z.clone();
            relu_in_place(&mut a);
            let drop = if dropout > 0.0 {
                let r = rng.as_deref_mut().ok_or_else(|| Error::Config("dropout needs an rng".into()))?;
                let m = dropout_mask::<S>(n * h, dropout, r);
                a.iter_mut().zip(&m).for_each(|(v, k)| *v *= *k);
                Some(m)
            } else {
                None
            };
            if let Some(cache) = cache.as_deref_mut() {
                cache.dense.push(DenseCache {
                    input: std::mem::take(&mut x),
                    pre: z,
                    drop,
                });
            }
            x = a;
            width = h;
        }
        let b = self.out_base();
        let mut logits = vec![S::zero(); n * L];
        add_bias(&mut logits, &self.params[b + 1].data);
        gemm(n, width, L, &x, (width, 1), &self.params[b].data, (L, 1), &mut logits, L, true);
        if let Some(cache) = cache {
            cache.out_input = x;
        }
        Ok((logits, stats))
    }

    /// Per-position scores `[codes.len() × 20]`; `codes` holds whole chunks
    /// of `t_len`. Eval mode is pure.
    pub fn forward(&self, codes: &[u8], t_len: usize, mode: Mode, rng: Option<&mut Rng>) -> Result<Vec<S>> {
        Ok(self.forward_impl(codes, t_len, mode, rng, None)?.0)
    }

    /// Loss and gradient of every trainable tensor. `labels` uses PAD on
    /// padding; padded positions carry no loss.
    pub fn loss_and_grads(
        &self,
        codes: &[u8],
        labels: &[u8],
        t_len: usize,
        mode: Mode,
        rng: Option<&mut Rng>,
    ) -> Result<LossGrads<S>> {
        if labels.len() != codes.len() {
            return Err(Error::Shape(format!("{} labels for {} codes", labels.len(), codes.len())));
        }
        let c = &self.config;
        let mut cache = Cache::default();
        let (logits, batch_stats) = self.forward_impl(codes, t_len, mode, rng, Some(&mut cache))?;
        let n = codes.len();
        let n_valid = labels.iter().filter(|&&l| l != 0).count();
        let mut grads: Vec<Vec<S>> = self.params.iter().map(|t| vec![S::zero(); t.data.len()]).collect();
        if n_valid == 0 {
            return Ok(LossGrads {
                loss: 0.0,
                grads,
                batch_stats,
            });
        }
        let scale = 1.0 / n_valid as f64;
        let mut dlogits = vec![S::zero(); n * L];
        let mut loss = 0.0;
        match c.head {
            Head::Softmax => {
                for ((row, drow), &gold) in logits.chunks_exact(L).zip(dlogits.chunks_exact_mut(L)).zip(labels) {
                    if gold == 0 {
                        continue;
                    }
                    let m = row.iter().fold(f64::NEG_INFINITY, |a, b| a.max(b.widen()));
                    let z: f64 = row.iter().map(|v| (v.widen() - m).exp()).sum();
                    let lse = m + z.ln();
                    loss += lse - row[gold as usize].widen();
                    for j in 0..L {
                        let p = (row[j].widen() - lse).exp();
                        let g = p - if j == gold as usize { 1.0 } else { 0.0 };
                        drow[j] = cast(g * scale);
                    }
                }
            }
            Head::Crf => {
                let p = self.crf_params().expect("crf head has crf tensors");
                let cb = self.crf_base().unwrap();
                let mut crf_grad = vec![0.0; p.n_params()];
                for b in 0..n / t_len {
                    let rows = b * t_len..(b + 1) * t_len;
                    let len = labels[rows.clone()].iter().take_while(|&&l| l != 0).count();
                    if len == 0 {
                        continue;
                    }
                    let em: Vec<f64> = logits[b * t_len * L..(b * t_len + len) * L].iter().map(|v| v.widen()).collect();
                    let (nll, g) = crf::nll_grad(&em, &labels[b * t_len..b * t_len + len], &p, None)?;
                    loss += nll;
                    for (dst, src) in dlogits[b * t_len * L..].iter_mut().zip(&g.emissions) {
                        *dst = cast(src * scale);
                    }
                    crf_grad.iter_mut().zip(g.params_vec()).for_each(|(a, v)| *a += v * scale);
                }
                let mut it = crf_grad.into_iter();
                for k in 0..3 {
                    grads[cb + k].iter_mut().zip(&mut it).for_each(|(a, v)| *a = cast(v));
                }
            }
        }
        let loss = loss * scale;
        self.backward(codes, t_len, mode, cache, dlogits, &mut grads);
        Ok(LossGrads {
            loss,
            grads,
            batch_stats,
        })
    }

    fn backward(&self, codes: &[u8], t_len: usize, mode: Mode, cache: Cache<S>, dlogits: Vec<S>, grads: &mut [Vec<S>]) {
        let c = &self.config;
        let n = codes.len();
        let ob = self.out_base();
        let width = cache.out_input.len() / n;
        column_sums(&dlogits, L, &mut grads[ob + 1]);
        gemm(width, n, L, &cache.out_input, (1, width), &dlogits, (L, 1), &mut grads[ob], L, true);
        let mut dx = vec![S::zero(); n * width];
        gemm(n, L, width, &dlogits, (L, 1), &self.params[ob].data, (1, L), &mut dx, width, false);
        for (j, dc) in cache.dense.iter().enumerate().rev() {
            let b = self.dense_base(j);
            let h = c.dense_layer_size;
            let win = dc.input.len() / n;
            let mut dz = dx;
            if let Some(m) = &dc.drop {
                dz.iter_mut().zip(m).for_each(|(g, k)| *g *= *k);
            }
            dz.iter_mut().zip(&dc.pre).for_each(|(g, z)| {
                if *z <= S::zero() {
                    *g = S::zero()
                }
            });
            column_sums(&dz, h, &mut grads[b + 1]);
            gemm(win, n, h, &dc.input, (1, win), &dz, (h, 1), &mut grads[b], h, true);
            dx = vec![S::zero(); n * win];
            gemm(n, h, win, &dz, (h, 1), &self.params[b].data, (1, h), &mut dx, win, false);
        }
        for (i, cc) in cache.conv.iter().enumerate().rev() {
            let b = self.conv_base(i);
            let ch = c.conv_channels;
            let gamma = &self.params[b + 2].data;
            let mut dgamma = vec![0.0f64; ch];
            let mut dbeta = vec![0.0f64; ch];
            for (gr, hr) in dx.chunks_exact(ch).zip(cc.xhat.chunks_exact(ch)) {
                for j in 0..ch {
                    dgamma[j] += (gr[j] * hr[j]).widen();
                    dbeta[j] += gr[j].widen();
                }
            }
            let mut da = dx;
            match mode {
                Mode::Train => {
                    let nf = n as f64;
                    let mg: Vec<S> = dbeta.iter().map(|v| cast(v / nf)).collect();
                    let mgh: Vec<S> = dgamma.iter().map(|v| cast(v / nf)).collect();
                    for (gr, hr) in da.chunks_exact_mut(ch).zip(cc.xhat.chunks_exact(ch)) {
                        for j in 0..ch {
                            gr[j] = gamma[j] * cc.inv_std[j] * (gr[j] - mg[j] - hr[j] * mgh[j]);
                        }
                    }
                }
                Mode::Eval => {
                    for gr in da.chunks_exact_mut(ch) {
                        for j in 0..ch {
                            gr[j] *= gamma[j] * cc.inv_std[j];
                        }
                    }
                }
            }
            grads[b + 2].iter_mut().zip(&dgamma).for_each(|(a, v)| *a = cast(*v));
            grads[b + 3].iter_mut().zip(&dbeta).for_each(|(a, v)| *a = cast(*v));
            if let Some(m) = &cc.drop {
                da.iter_mut().zip(m).for_each(|(g, k)| *g *= *k);
            }
            da.iter_mut().zip(&cc.pre).for_each(|(g, z)| {
                if *z <= S::zero() {
                    *g = S::zero()
                }
            });
            let win = cc.input.len() / n;
            let mut dinput = vec![S::zero(); n * win];
            let (head, tail) = grads.split_at_mut(b + 1);
            conv_backward(
                &cc.input,
                win,
                &self.params[b].data,
                ch,
                c.filter_size,
                t_len,
                &da,
                &mut head[b],
                &mut tail[0],
                Some(&mut dinput),
            );
            dx = dinput;
        }
        let d = c.embedding_dim;
        for (row, &code) in dx.chunks_exact(d).zip(codes) {
            grads[0][code as usize * d..(code as usize + 1) * d]
                .iter_mut()
                .zip(row)
                .for_each(|(a, b)| *a += *b);
        }
    }

    fn update_running(&mut self, stats: &[BnStats<S>]) {
        let m: S = cast(BN_MOMENTUM);
        let one_m = S::one() - m;
        for (r, s) in self.running.iter_mut().zip(stats) {
            r.mean.iter_mut().zip(&s.mean).for_each(|(a, b)| *a = m * *a + one_m * *b);
            r.var.iter_mut().zip(&s.var).for_each(|(a, b)| *a = m * *a + one_m * *b);
        }
    }

    /// Shuffled minibatch training over flattened chunks of `docs`.
    pub fn fit(&mut self, docs: &[LabeledDocument], heldout: Option<&[LabeledDocument]>, seed: u64) -> Result<TrainReport> {
        let started = Instant::now();
        let c = self.config.clone();
        let batch = flatten(docs, c.max_length, true)?;
        if batch.non_pad_codes() == 0 {
            return Err(Error::Validation("training set is empty".into()));
        }
        let labels = batch.labels.as_ref().expect("flatten with labels");
        let t = c.max_length;
        let sizes: Vec<usize> = self.params.iter().map(|p| p.data.len()).collect();
        let mut opt = Optimizer::new(c.optimizer, &sizes);
        let mut order: Vec<usize> = (0..batch.n_chunks()).collect();
        let mut losses = Vec::new();
        let mut heldout_f1 = Vec::new();
        let mut first: Option<f64> = None;
        for epoch in 0..c.epochs {
            order.shuffle(&mut stream_rng(seed, "cnn-shuffle", epoch as u64));
            let mut total = 0.0;
            let mut steps = 0;
            for (bi, ids) in order.chunks(c.batch_size).enumerate() {
                let mut codes = Vec::with_capacity(ids.len() * t);
                let mut gold = Vec::with_capacity(ids.len() * t);
                for &i in ids {
                    codes.extend_from_slice(batch.chunk(i));
                    gold.extend_from_slice(&labels[i * t..(i + 1) * t]);
                }
                let mut rng = stream_rng(seed, "cnn-dropout", ((epoch as u64) << 32) | bi as u64);
                let lg = self.loss_and_grads(&codes, &gold, t, Mode::Train, Some(&mut rng))?;
                if !lg.loss.is_finite() || lg.grads.iter().flatten().any(|g| !g.is_finite()) {
                    return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}, batch {bi}")));
                }
                let base = *first.get_or_insert(lg.loss);
                if lg.loss > 10.0 * base {
                    return Err(Error::Diverged(format!(
                        "loss {:.4} in epoch {epoch}, batch {bi} exceeds ten times the initial {base:.4}",
                        lg.loss
                    )));
                }
                opt.begin_step();
                for (k, g) in lg.grads.iter().enumerate() {
                    opt.update(k, &mut self.params[k].data, g);
                }
                self.update_running(&lg.batch_stats);
                total += lg.loss;
                steps += 1;
            }
            let mean = total / steps as f64;
            losses.push(mean);
            if let Some(h) = heldout {
                let pred = self.predict(h)?;
                heldout_f1.push(score_documents(h, &pred, true)?.micro.f1);
            }
            log::info!(
                "{} epoch {}/{}: loss {mean:.5}{}",
                c.engine(),
                epoch + 1,
                c.epochs,
                heldout_f1.last().map(|f| format!(", held-out micro-F1 {f:.4}")).unwrap_or_default()
            );
        }
        Ok(TrainReport {
            engine: c.engine(),
            losses,
            heldout_micro_f1: heldout_f1,
            wall_seconds: started.elapsed().as_secs_f64(),
            seed,
        })
    }

    pub fn train(
        docs: &[LabeledDocument],
        heldout: Option<&[LabeledDocument]>,
        config: CnnConfig,
        seed: u64,
    ) -> Result<(Self, TrainReport)> {
        let mut m = Self::init(config, seed)?;
        let report = m.fit(docs, heldout, seed)?;
        Ok((m, report))
    }

    fn decode_chunks(&self, codes: &[u8], t_len: usize, out: &mut [u8]) -> Result<()> {
        let logits = self.forward(codes, t_len, Mode::Eval, None)?;
        match self.crf_params() {
            None => {
                for ((row, o), &code) in logits.chunks_exact(L).zip(out.iter_mut()).zip(codes) {
                    if code == PAD_CODE {
                        continue;
                    }
                    let mut best = 1;
                    for j in 2..L {
                        if row[j] > row[best] {
                            best = j;
                        }
                    }
                    *o = best as u8;
                }
            }
            Some(p) => {
                for b in 0..codes.len() / t_len {
                    let len = codes[b * t_len..(b + 1) * t_len].iter().take_while(|&&x| x != PAD_CODE).count();
                    if len == 0 {
                        continue;
                    }
                    let em: Vec<f64> = logits[b * t_len * L..(b * t_len + len) * L].iter().map(|v| v.widen()).collect();
                    let y = crf::viterbi_decode(&em, &p, None)?;
                    out[b * t_len..b * t_len + len].copy_from_slice(&y);
                }
            }
        }
        Ok(())
    }

    /// One label id per code of `batch` (PAD on padding). Chunks are
    /// processed in groups of `batch_size` spread over `workers` threads.
    pub fn predict_batch(&self, batch: &EncodedBatch) -> Result<Vec<u8>> {
        let t = batch.max_length;
        let mut out = vec![PAD_CODE; batch.indices.len()];
        if out.is_empty() {
            return Ok(out);
        }
        let group = self.config.batch_size * t;
        let workers = self.config.workers.max(1);
        if workers == 1 {
            for (codes, o) in batch.indices.chunks(group).zip(out.chunks_mut(group)) {
                self.decode_chunks(codes, t, o)?;
            }
            return Ok(out);
        }
        let jobs: Vec<(&[u8], &mut [u8])> = batch.indices.chunks(group).zip(out.chunks_mut(group)).collect();
        let per = jobs.len().div_ceil(workers);
        let mut jobs = jobs;
        std::thread::scope(|s| {
            let mut handles = Vec::new();
            while !jobs.is_empty() {
                let rest = jobs.split_off(per.min(jobs.len()));
                let mine = std::mem::replace(&mut jobs, rest);
                handles.push(s.spawn(move || -> Result<()> {
                    for (codes, o) in mine {
                        self.decode_chunks(codes, t, o)?;
                    }
                    Ok(())
                }));
            }
            handles.into_iter().try_for_each(|h| h.join().expect("worker panicked"))
        })?;
        Ok(out)
    }

    pub fn predict(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>> {
        let batch = flatten(docs, self.config.max_length, false)?;
        let pred = self.predict_batch(&batch)?;
        unflatten(&pred, &batch)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(self.config.engine().name(), serde_json::to_value(&self.config)?);
        let f32s = |v: &[S]| -> Vec<f32> { v.iter().map(|x| x.widen() as f32).collect() };
        for t in &self.params {
            ck.push(&t.name, &t.shape, f32s(&t.data));
        }
        for (i, r) in self.running.iter().enumerate() {
            ck.push(&format!("bn{i}.running_mean"), &[r.mean.len()], f32s(&r.mean));
            ck.push(&format!("bn{i}.running_var"), &[r.var.len()], f32s(&r.var));
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: CnnConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::Checkpoint(format!("bad cnn config: {e}")))?;
        ck.expect_engine(config.engine().name())?;
        let mut m = Self::zeros(config)?;
        let load = |name: &str, dst: &mut [S]| -> Result<()> {
            let src = ck.get_sized(name, dst.len())?;
            dst.iter_mut().zip(src).for_each(|(a, b)| *a = S::from_f64(*b as f64));
            Ok(())
        };
        for t in &mut m.params {
            load(&t.name, &mut t.data)?;
        }
        for (i, r) in m.running.iter_mut().enumerate() {
            load(&format!("bn{i}.running_mean"), &mut r.mean)?;
            load(&format!("bn{i}.running_var"), &mut r.var)?;
        }
        Ok(m)
    }
}

impl Tagger for Cnn<f32> {
    fn engine(&self) -> Engine {
        self.config.engine()
    }

    fn tag(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>> {
        self.predict(docs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(head: Head) -> CnnConfig {
        CnnConfig {
            epochs: 1,
            num_conv_layers: 2,
            num_dense_layers: 1,
            batch_size: 2,
            embedding_dim: 3,
            conv_channels: 4,
            max_length: 6,
            filter_size: 3,
            dense_layer_size: 5,
            dropout: 0.0,
            head,
            optimizer: OptimizerConfig::adam(),
            workers: 1,
        }
    }

    #[test]
    fn defaults() {
        let c = CnnConfig::default();
        assert_eq!((c.num_conv_layers, c.num_dense_layers, c.filter_size), (4, 2, 13));
        assert_eq!((c.epochs, c.batch_size, c.embedding_dim, c.dense_layer_size), (10, 24, 64, 96));
        assert_eq!((c.max_length, c.dropout), (3400, 0.073));
        let k = CnnConfig::crf();
        assert_eq!((k.epochs, k.batch_size, k.head), (15, 128, Head::Crf));
        assert!(matches!(k.optimizer, OptimizerConfig::Rmsprop { .. }));
        assert!(CnnConfig { dropout: 1.0, ..c }.validate().is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = Cnn::<f32>::init(tiny(Head::Crf), 7).unwrap();
        assert_eq!(a, Cnn::<f32>::init(tiny(Head::Crf), 7).unwrap());
        assert_ne!(a, Cnn::<f32>::init(tiny(Head::Crf), 8).unwrap());
    }

    #[test]
    fn hand_sized_network() {
        let config = CnnConfig {
            num_conv_layers: 1,
            num_dense_layers: 1,
            embedding_dim: 2,
            conv_channels: 1,
            filter_size: 1,
            dense_layer_size: 1,
            ..tiny(Head::Softmax)
        };
        let mut m = Cnn::<f64>::zeros(config).unwrap();
        let code = b'a' as usize;
        m.params[0].data[code * 2] = 0.5;
        m.params[0].data[code * 2 + 1] = -1.5;
        m.params[1].data = vec![2.0, -1.0]; // conv weight [1, 2, 1]
        m.params[2].data = vec![0.25];
        m.params[3].data = vec![1.5]; // gamma
        m.params[4].data = vec![-0.5]; // beta
        m.running[0] = BnStats { mean: vec![1.0], var: vec![4.0] };
        m.params[5].data = vec![3.0]; // dense [1, 1]
        m.params[6].data = vec![0.1];
        m.params[7].data = (0..20).map(|j| j as f64 * 0.1 - 1.0).collect();
        m.params[8].data = (0..20).map(|j| j as f64).collect();
        let logits = m.forward(b"a", 1, Mode::Eval, None).unwrap();
        // conv: 0.5*2 + (-1.5)(-1) + 0.25 = 2.75, relu 2.75
        // bn: 1.5 * (2.75 - 1) / sqrt(4 + 1e-5) - 0.5
        let bn = 1.5 * 1.75 / (4.0f64 + 1e-5).sqrt() - 0.5;
        let dense = (3.0 * bn + 0.1f64).max(0.0);
        for j in 0..20 {
            let want = dense * (j as f64 * 0.1 - 1.0) + j as f64;
            assert!((logits[j] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn eval_forward_is_pure_and_finite_on_padding() {
        let m = Cnn::<f32>::init(tiny(Head::Softmax), 1).unwrap();
        let codes = [b'x', b'1', 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        let a = m.forward(&codes, 6, Mode::Eval, None).unwrap();
        let b = m.forward(&codes, 6, Mode::Eval, None).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
        assert!(m.forward(&codes[..5], 6, Mode::Eval, None).is_err());
        assert!(m.forward(&[200; 6], 6, Mode::Eval, None).is_err());
    }

    #[test]
    fn saturated_logits_give_small_loss() {
        let mut m = Cnn::<f64>::zeros(CnnConfig { num_dense_layers: 0, ..tiny(Head::Softmax) }).unwrap();
        let ob = m.out_base();
        m.params[ob + 1].data[EntityLabel::Ssn.id() as usize] = 1000.0;
        let labels = [EntityLabel::Ssn.id(); 6];
        let lg = m.loss_and_grads(b"123456", &labels, 6, Mode::Eval, None).unwrap();
        assert!(lg.loss < 1e-3);
    }

    #[test]
    fn all_padding_has_zero_loss_and_gradient() {
        for head in [Head::Softmax, Head::Crf] {
            let m = Cnn::<f64>::init(tiny(head), 2).unwrap();
            let lg = m.loss_and_grads(&[0; 12], &[0; 12], 6, Mode::Train, None).unwrap();
            assert_eq!(lg.loss, 0.0);
            assert!(lg.grads.iter().flatten().all(|g| *g == 0.0));
        }
    }

    fn check_gradients(head: Head, mode: Mode) {
        let mut m = Cnn::<f64>::init(tiny(head), 3).unwrap();
        let mut rng = stream_rng(3, "fd", 0);
        for t in &mut m.params {
            if t.name.starts_with("bn") || t.name.starts_with("crf") || t.name.ends_with(".bias") {
                t.data.iter_mut().for_each(|x| *x += rng.gen_range(-0.5..0.5));
            }
        }
        for r in &mut m.running {
            r.mean.iter_mut().for_each(|x| *x = rng.gen_range(-0.3..0.3));
            r.var.iter_mut().for_each(|x| *x = rng.gen_range(0.5..2.0));
        }
        let codes = [b'a', b'B', b'3', b'-', b'a', b'z', b'9', b'9', b'x', 0, 0, 0];
        let labels = [2, 14, 9, 9, 14, 2, 17, 17, 2, 0, 0, 0];
        let lg = m.loss_and_grads(&codes, &labels, 6, mode, None).unwrap();
        let h = 1e-6;
        let mut checked = 0;
        for k in 0..m.params.len() {
            for i in 0..m.params[k].data.len() {
                let orig = m.params[k].data[i];
                m.params[k].data[i] = orig + h;
                let up = m.loss_and_grads(&codes, &labels, 6, mode, None).unwrap().loss;
                m.params[k].data[i] = orig - h;
                let dn = m.loss_and_grads(&codes, &labels, 6, mode, None).unwrap().loss;
                m.params[k].data[i] = orig;
                let num = (up - dn) / (2.0 * h);
                let ana = lg.grads[k][i];
                assert!(
                    (num - ana).abs() <= 1e-3 * num.abs().max(ana.abs()) + 1e-7,
                    "{} [{i}]: analytic {ana}, numeric {num}",
                    m.params[k].name
                );
                checked += 1;
            }
        }
        assert_eq!(checked, m.n_params());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for head in [Head::Softmax, Head::Crf] {
            check_gradients(head, Mode::Eval);
            check_gradients(head, Mode::Train);
        }
    }

    #[test]
    fn embedding_file_rows_override_random_init() {
        let dim = 4;
        let mut text = String::new();
        for c in 32u8..127 {
            let v: Vec<String> = (0..dim).map(|j| format!("{}", c as f64 / 100.0 + j as f64)).collect();
            text.push_str(&format!("{} {}\n", c as char, v.join(" ")));
        }
        let rows = read_embedding_file(text.as_bytes(), dim).unwrap();
        assert_eq!(rows.len(), 95);
        let config = CnnConfig { embedding_dim: dim, ..tiny(Head::Softmax) };
        let base = Cnn::<f64>::init(config.clone(), 5).unwrap();
        let mut m = base.clone();
        m.set_embedding_rows(&rows).unwrap();
        let e = &m.params[0].data;
        assert_eq!(e[b' ' as usize * dim], 0.32);
        assert_eq!(e[b'~' as usize * dim + 3], 1.26 + 3.0);
        for code in [0usize, 1, 10, 31, 127, 128] {
            assert_eq!(e[code * dim..(code + 1) * dim], base.params[0].data[code * dim..(code + 1) * dim]);
        }
        let err = read_embedding_file("a 1 2 3 4\nb 1 x 3 4\n".as_bytes(), dim).unwrap_err();
        assert!(matches!(err, Error::Embedding { line: 2, .. }), "{err}");
        let err = read_embedding_file("a 1 2 3\n".as_bytes(), dim).unwrap_err();
        assert!(matches!(err, Error::Embedding { line: 1, .. }));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        for head in [Head::Softmax, Head::Crf] {
            let mut m = Cnn::<f32>::init(tiny(head), 9).unwrap();
            m.running[1].var[2] = 0.123_456_79;
            let mut buf = Vec::new();
            m.to_checkpoint().unwrap().write(&mut buf).unwrap();
            let back = Cnn::<f32>::from_checkpoint(&Checkpoint::read(buf.as_slice()).unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn predictions_cover_every_character() {
        let mut config = tiny(Head::Crf);
        config.max_length = 8;
        let m = Cnn::<f32>::init(config, 4).unwrap();
        assert!(m.predict(&[]).unwrap().is_empty());
        let docs = vec![
            LabeledDocument::unlabeled("a", "x".repeat(21)),
            LabeledDocument::unlabeled("b", ""),
            LabeledDocument::unlabeled("c", "12"),
        ];
        let p = m.predict(&docs).unwrap();
        assert_eq!(p.iter().map(|v| v.len()).collect::<Vec<_>>(), vec![21, 0, 2]);
        let mut par = m.clone();
        par.config.workers = 3;
        par.config.batch_size = 1;
        assert_eq!(par.predict(&docs).unwrap(), p);
    }
}
