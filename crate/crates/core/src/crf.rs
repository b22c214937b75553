//! Linear-chain CRF over per-position label scores.
//!
//! A path `y` scores `start[y0] + Σ e[t][yt] + Σ trans[y(t-1)][yt] + end[yT-1]`.
//! Emissions are row-major `[T × L]`. Masked positions are dropped from the
//! chain entirely, as if the sequence were shorter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfParams {
    pub n_labels: usize,
    /// `[from × to]`, row-major.
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl CrfParams {
    pub fn zeros(n_labels: usize) -> Self {
        Self {
            n_labels,
            transitions: vec![0.0; n_labels * n_labels],
            start: vec![0.0; n_labels],
            end: vec![0.0; n_labels],
        }
    }

    #[inline]
    pub fn trans(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * self.n_labels + to]
    }

    pub fn is_finite(&self) -> bool {
        self.transitions
            .iter()
            .chain(&self.start)
            .chain(&self.end)
            .all(|x| x.is_finite())
    }

    pub fn n_params(&self) -> usize {
        self.transitions.len() + 2 * self.n_labels
    }

    /// Flat view: transitions, start, end.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.transitions.clone();
        v.extend(&self.start);
        v.extend(&self.end);
        v
    }

    pub fn from_slice(n_labels: usize, v: &[f64]) -> Self {
        let ll = n_labels * n_labels;
        Self {
            n_labels,
            transitions: v[..ll].to_vec(),
            start: v[ll..ll + n_labels].to_vec(),
            end: v[ll + n_labels..ll + 2 * n_labels].to_vec(),
        }
    }
}

/// Gradient of the negative log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGrad {
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// Same layout as the emissions; masked rows are zero.
    pub emissions: Vec<f64>,
}

impl CrfGrad {
    pub fn zeros(n_labels: usize, t: usize) -> Self {
        Self {
            transitions: vec![0.0; n_labels * n_labels],
            start: vec![0.0; n_labels],
            end: vec![0.0; n_labels],
            emissions: vec![0.0; t * n_labels],
        }
    }

    /// Flat transition/start/end part, aligned with [`CrfParams::to_vec`].
    pub fn params_vec(&self) -> Vec<f64> {
        let mut v = self.transitions.clone();
        v.extend(&self.start);
        v.extend(&self.end);
        v
    }
}

fn check_shape(emissions: &[f64], n_labels: usize, mask: Option<&[bool]>) -> Result<usize> {
    if n_labels == 0 || emissions.len() % n_labels != 0 {
        return Err(Error::Shape(format!(
            "{} emission scores do not divide into {n_labels} labels",
            emissions.len()
        )));
    }
    let t = emissions.len() / n_labels;
    if let Some(m) = mask {
        if m.len() != t {
            return Err(Error::Shape(format!("mask has {} entries for {t} positions", m.len())));
        }
    }
    Ok(t)
}

/// Unmasked position indices.
fn active(t: usize, mask: Option<&[bool]>) -> Vec<usize> {
    match mask {
        Some(m) => (0..t).filter(|&i| m[i]).collect(),
        None => (0..t).collect(),
    }
}

fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Forward/backward tables in log space over the active positions.
struct LogTables {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    log_z: f64,
}

fn log_tables(em: &[f64], p: &CrfParams, pos: &[usize]) -> LogTables {
    let l = p.n_labels;
    let n = pos.len();
    let e = |k: usize, j: usize| em[pos[k] * l + j];
    let mut alpha = vec![0.0; n * l];
    for j in 0..l {
        alpha[j] = p.start[j] + e(0, j);
    }
    for k in 1..n {
        for j in 0..l {
            let prev = &alpha[(k - 1) * l..k * l];
            alpha[k * l + j] = e(k, j) + logsumexp((0..l).map(|i| prev[i] + p.trans(i, j)));
        }
    }
    let mut beta = vec![0.0; n * l];
    beta[(n - 1) * l..].copy_from_slice(&p.end);
    for k in (0..n - 1).rev() {
        for i in 0..l {
            let next = &beta[(k + 1) * l..(k + 2) * l];
            beta[k * l + i] = logsumexp((0..l).map(|j| p.trans(i, j) + e(k + 1, j) + next[j]));
        }
    }
    let log_z = logsumexp((0..l).map(|j| alpha[(n - 1) * l + j] + p.end[j]));
    LogTables { alpha, beta, log_z }
}

/// Scaled forward/backward in probability space. `None` when scaling
/// under- or overflows; callers fall back to log space.
struct ScaledTables {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// exp(e - max e) per active position.
    pe: Vec<f64>,
    scale: Vec<f64>,
    pt: Vec<f64>,
    log_z: f64,
}

fn scaled_tables(em: &[f64], p: &CrfParams, pos: &[usize]) -> Option<ScaledTables> {
    let l = p.n_labels;
    let n = pos.len();
    let tmax = p.transitions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pt: Vec<f64> = p.transitions.iter().map(|x| (x - tmax).exp()).collect();
    let mut pe = vec![0.0; n * l];
    let mut emax = vec![0.0; n];
    for (k, &t) in pos.iter().enumerate() {
        let row = &em[t * l..(t + 1) * l];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        emax[k] = m;
        for j in 0..l {
            pe[k * l + j] = (row[j] - m).exp();
        }
    }
    let smax = p.start.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let endmax = p.end.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut alpha = vec![0.0; n * l];
    let mut scale = vec![0.0; n];
    let mut log_z = smax + endmax + tmax * (n as f64 - 1.0) + emax.iter().sum::<f64>();
    for j in 0..l {
        alpha[j] = (p.start[j] - smax).exp() * pe[j];
    }
    let s: f64 = alpha[..l].iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return None;
    }
    scale[0] = s;
    alpha[..l].iter_mut().for_each(|a| *a /= s);
    for k in 1..n {
        let (head, tail) = alpha.split_at_mut(k * l);
        let prev = &head[(k - 1) * l..];
        let cur = &mut tail[..l];
        cur.fill(0.0);
        for i in 0..l {
            let a = prev[i];
            if a == 0.0 {
                continue;
            }
            let row = &pt[i * l..(i + 1) * l];
            for j in 0..l {
                cur[j] += a * row[j];
            }
        }
        let mut s = 0.0;
        for j in 0..l {
            cur[j] *= pe[k * l + j];
            s += cur[j];
        }
        if !(s > 0.0 && s.is_finite()) {
            return None;
        }
        scale[k] = s;
        cur.iter_mut().for_each(|a| *a /= s);
    }
    let pend: Vec<f64> = p.end.iter().map(|x| (x - endmax).exp()).collect();
    let last: f64 = (0..l).map(|j| alpha[(n - 1) * l + j] * pend[j]).sum();
    if !(last > 0.0 && last.is_finite()) {
        return None;
    }
    log_z += scale.iter().map(|s| s.ln()).sum::<f64>() + last.ln();

    // beta scaled by the same factors, so alpha*beta/last is the marginal
    let mut beta = vec![0.0; n * l];
    beta[(n - 1) * l..].copy_from_slice(&pend);
    let mut tmp = vec![0.0; l];
    for k in (0..n - 1).rev() {
        for j in 0..l {
            tmp[j] = pe[(k + 1) * l + j] * beta[(k + 1) * l + j];
        }
        let s = scale[k + 1];
        for i in 0..l {
            let row = &pt[i * l..(i + 1) * l];
            let mut acc = 0.0;
            for j in 0..l {
                acc += row[j] * tmp[j];
            }
            beta[k * l + i] = acc / s;
        }
    }
    if !log_z.is_finite() {
        return None;
    }
    Some(ScaledTables {
        alpha,
        beta,
        pe,
        scale,
        pt,
        log_z,
    })
}

/// log Σ_y exp(score(y)).
pub fn log_partition(emissions: &[f64], params: &CrfParams, mask: Option<&[bool]>) -> Result<f64> {
    let t = check_shape(emissions, params.n_labels, mask)?;
    let pos = active(t, mask);
    if pos.is_empty() {
        return Err(Error::Validation("log_partition of an empty sequence".into()));
    }
    Ok(match scaled_tables(emissions, params, &pos) {
        Some(s) => s.log_z,
        None => log_tables(emissions, params, &pos).log_z,
    })
}

/// Log-space reference implementation of [`log_partition`].
pub fn log_partition_reference(emissions: &[f64], params: &CrfParams, mask: Option<&[bool]>) -> Result<f64> {
    let t = check_shape(emissions, params.n_labels, mask)?;
    let pos = active(t, mask);
    if pos.is_empty() {
        return Err(Error::Validation("log_partition of an empty sequence".into()));
    }
    Ok(log_tables(emissions, params, &pos).log_z)
}

pub fn path_score(emissions: &[f64], params: &CrfParams, labels: &[u8], mask: Option<&[bool]>) -> Result<f64> {
    let l = params.n_labels;
    let t = check_shape(emissions, l, mask)?;
    if labels.len() != t {
        return Err(Error::Shape(format!("{} labels for {t} positions", labels.len())));
    }
    let pos = active(t, mask);
    let Some(&first) = pos.first() else {
        return Ok(0.0);
    };
    let y = |k: usize| labels[pos[k]] as usize;
    let mut s = params.start[y(0)] + emissions[first * l + y(0)];
    for k in 1..pos.len() {
        s += params.trans(y(k - 1), y(k)) + emissions[pos[k] * l + y(k)];
    }
    Ok(s + params.end[y(pos.len() - 1)])
}

/// Per-position label marginals, `[T × L]`; masked rows are zero.
pub fn marginals(emissions: &[f64], params: &CrfParams, mask: Option<&[bool]>) -> Result<Vec<f64>> {
    let l = params.n_labels;
    let t = check_shape(emissions, l, mask)?;
    let pos = active(t, mask);
    let mut out = vec![0.0; t * l];
    if pos.is_empty() {
        return Ok(out);
    }
    match scaled_tables(emissions, params, &pos) {
        Some(s) => {
            for (k, &tt) in pos.iter().enumerate() {
                let z: f64 = (0..l).map(|j| s.alpha[k * l + j] * s.beta[k * l + j]).sum();
                for j in 0..l {
                    out[tt * l + j] = s.alpha[k * l + j] * s.beta[k * l + j] / z;
                }
            }
        }
        None => {
            let lt = log_tables(emissions, params, &pos);
            for (k, &tt) in pos.iter().enumerate() {
                for j in 0..l {
                    out[tt * l + j] = (lt.alpha[k * l + j] + lt.beta[k * l + j] - lt.log_z).exp();
                }
            }
        }
    }
    Ok(out)
}

/// Negative log-likelihood of `gold` and its gradient. Gold entries at
/// masked positions are ignored.
pub fn nll_grad(
    emissions: &[f64],
    gold: &[u8],
    params: &CrfParams,
    mask: Option<&[bool]>,
) -> Result<(f64, CrfGrad)> {
    let l = params.n_labels;
    let t = check_shape(emissions, l, mask)?;
    if gold.len() != t {
        return Err(Error::Shape(format!("{} gold labels for {t} positions", gold.len())));
    }
    let pos = active(t, mask);
    let mut g = CrfGrad::zeros(l, t);
    if pos.is_empty() {
        return Ok((0.0, g));
    }
    if let Some(&bad) = pos.iter().find(|&&p| gold[p] as usize >= l) {
        return Err(Error::Validation(format!("gold label {} out of range at {bad}", gold[bad])));
    }
    let gold_score = path_score(emissions, params, gold, mask)?;
    let n = pos.len();
    let log_z;
    match scaled_tables(emissions, params, &pos) {
        Some(s) => {
            log_z = s.log_z;
            let pend: Vec<f64> = {
                let m = params.end.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                params.end.iter().map(|x| (x - m).exp()).collect()
            };
            let last: f64 = (0..l).map(|j| s.alpha[(n - 1) * l + j] * pend[j]).sum();
            for (k, &tt) in pos.iter().enumerate() {
                let z: f64 = (0..l).map(|j| s.alpha[k * l + j] * s.beta[k * l + j]).sum();
                for j in 0..l {
                    g.emissions[tt * l + j] = s.alpha[k * l + j] * s.beta[k * l + j] / z;
                }
                if k > 0 {
                    // xi(i,j) = alpha[k-1][i] pt[i][j] pe[k][j] beta[k][j] / (scale[k] * last)
                    let denom = s.scale[k] * last;
                    for i in 0..l {
                        let a = s.alpha[(k - 1) * l + i];
                        if a == 0.0 {
                            continue;
                        }
                        for j in 0..l {
                            g.transitions[i * l + j] +=
                                a * s.pt[i * l + j] * s.pe[k * l + j] * s.beta[k * l + j] / denom;
                        }
                    }
                }
            }
        }
        None => {
            let lt = log_tables(emissions, params, &pos);
            log_z = lt.log_z;
            for (k, &tt) in pos.iter().enumerate() {
                for j in 0..l {
                    g.emissions[tt * l + j] = (lt.alpha[k * l + j] + lt.beta[k * l + j] - log_z).exp();
                }
                if k > 0 {
                    for i in 0..l {
                        for j in 0..l {
                            g.transitions[i * l + j] += (lt.alpha[(k - 1) * l + i]
                                + params.trans(i, j)
                                + emissions[tt * l + j]
                                + lt.beta[k * l + j]
                                - log_z)
                                .exp();
                        }
                    }
                }
            }
        }
    }
    let first = pos[0];
    let lastp = pos[n - 1];
    for j in 0..l {
        g.start[j] = g.emissions[first * l + j];
        g.end[j] = g.emissions[lastp * l + j];
    }
    for (k, &tt) in pos.iter().enumerate() {
        let y = gold[tt] as usize;
        g.emissions[tt * l + y] -= 1.0;
        if k > 0 {
            g.transitions[gold[pos[k - 1]] as usize * l + y] -= 1.0;
        }
    }
    g.start[gold[first] as usize] -= 1.0;
    g.end[gold[lastp] as usize] -= 1.0;
    let loss = log_z - gold_score;
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("non-finite CRF loss {loss}")));
    }
    Ok((loss.max(0.0), g))
}

/// L1/L2 penalty on a weight vector and its (sub)gradient.
pub fn regularizer(w: &[f64], l1: f64, l2: f64) -> (f64, Vec<f64>) {
    let mut v = 0.0;
    let g = w
        .iter()
        .map(|&x| {
            v += l1 * x.abs() + l2 * x * x;
            l1 * x.signum() * (x != 0.0) as u8 as f64 + 2.0 * l2 * x
        })
        .collect();
    (v, g)
}

/// Regularized NLL: `log Z − score(gold) + l1·|w|₁ + l2·|w|₂²`, where `w`
/// are the feature weights (empty in decoder mode). The feature-weight
/// gradient returned holds the regularizer part only; emission gradients
/// carry the data term for the caller to chain through.
pub fn neg_log_likelihood_grad(
    emissions: &[f64],
    gold: &[u8],
    params: &CrfParams,
    feature_weights: &[f64],
    l1: f64,
    l2: f64,
    mask: Option<&[bool]>,
) -> Result<(f64, CrfGrad, Vec<f64>)> {
    let (nll, g) = nll_grad(emissions, gold, params, mask)?;
    let (r, rg) = regularizer(feature_weights, l1, l2);
    Ok((nll + r, g, rg))
}

/// Highest-scoring label path. Ties go to the lower label id.
pub fn viterbi_decode(emissions: &[f64], params: &CrfParams, mask: Option<&[bool]>) -> Result<Vec<u8>> {
    let l = params.n_labels;
    let t = check_shape(emissions, l, mask)?;
    let pos = active(t, mask);
    let mut out = vec![0u8; t];
    let n = pos.len();
    if n == 0 {
        return Ok(out);
    }
    let mut delta: Vec<f64> = (0..l).map(|j| params.start[j] + emissions[pos[0] * l + j]).collect();
    let mut back = vec![0u8; n * l];
    let mut next = vec![0.0; l];
    for k in 1..n {
        let row = &emissions[pos[k] * l..(pos[k] + 1) * l];
        for j in 0..l {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..l {
                let s = delta[i] + params.trans(i, j);
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            next[j] = best + row[j];
            back[k * l + j] = arg as u8;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut best = f64::NEG_INFINITY;
    let mut y = 0;
    for j in 0..l {
        let s = delta[j] + params.end[j];
        if s > best {
            best = s;
            y = j;
        }
    }
    for k in (0..n).rev() {
        out[pos[k]] = y as u8;
        y = back[k * l + y] as usize;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_instance(rng: &mut impl Rng, t: usize, l: usize, scale: f64) -> (Vec<f64>, CrfParams) {
        let em = (0..t * l).map(|_| rng.gen_range(-scale..scale)).collect();
        let mut p = CrfParams::zeros(l);
        p.transitions.iter_mut().for_each(|x| *x = rng.gen_range(-scale..scale));
        p.start.iter_mut().for_each(|x| *x = rng.gen_range(-scale..scale));
        p.end.iter_mut().for_each(|x| *x = rng.gen_range(-scale..scale));
        (em, p)
    }

    /// Every label path of length t over l labels.
    fn all_paths(t: usize, l: usize) -> Vec<Vec<u8>> {
        (0..l.pow(t as u32))
            .map(|mut code| {
                (0..t)
                    .map(|_| {
                        let y = (code % l) as u8;
                        code /= l;
                        y
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn uniform_single_position() {
        let p = CrfParams::zeros(20);
        let z = log_partition(&[0.0; 20], &p, None).unwrap();
        assert!((z - 20f64.ln()).abs() < 1e-12);
        let (loss, _) = nll_grad(&[0.0; 20], &[3], &p, None).unwrap();
        assert!((loss - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let p = CrfParams::zeros(3);
        assert!(log_partition(&[], &p, None).is_err());
        assert!(log_partition(&[0.0; 3], &p, Some(&[false])).is_err());
        assert!(log_partition(&[0.0; 4], &p, None).is_err());
    }

    #[test]
    fn two_by_three_matches_enumeration() {
        let mut rng = crate::rng::stream_rng(0, "crf", 1);
        let (em, p) = random_instance(&mut rng, 2, 3, 2.0);
        let paths = all_paths(2, 3);
        assert_eq!(paths.len(), 9);
        let scores: Vec<f64> = paths.iter().map(|y| path_score(&em, &p, y, None).unwrap()).collect();
        let brute = logsumexp(scores.iter().copied());
        assert!((log_partition(&em, &p, None).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_moves_partition() {
        let mut rng = crate::rng::stream_rng(0, "crf", 2);
        let (mut em, p) = random_instance(&mut rng, 5, 4, 1.0);
        let z0 = log_partition(&em, &p, None).unwrap();
        for j in 0..4 {
            em[2 * 4 + j] += 3.25;
        }
        let z1 = log_partition(&em, &p, None).unwrap();
        assert!((z1 - z0 - 3.25).abs() < 1e-10);
    }

    #[test]
    fn scaled_and_log_space_agree() {
        let mut rng = crate::rng::stream_rng(0, "crf", 3);
        for _ in 0..50 {
            let t = rng.gen_range(1..60);
            let (em, p) = random_instance(&mut rng, t, 20, 5.0);
            let a = log_partition(&em, &p, None).unwrap();
            let b = log_partition_reference(&em, &p, None).unwrap();
            assert!(((a - b) / b.abs().max(1.0)).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn huge_scores_fall_back_to_log_space() {
        let mut p = CrfParams::zeros(3);
        p.transitions[1] = -5000.0;
        p.transitions[5] = 800.0;
        let em = vec![0.0, 900.0, -900.0, 0.0, 0.0, 1000.0];
        let a = log_partition(&em, &p, None).unwrap();
        let b = log_partition_reference(&em, &p, None).unwrap();
        assert!((a - b).abs() < 1e-9);
        let m = marginals(&em, &p, None).unwrap();
        for k in 0..2 {
            assert!((m[k * 3..k * 3 + 3].iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn marginals_sum_to_one() {
        let mut rng = crate::rng::stream_rng(0, "crf", 4);
        for _ in 0..50 {
            let t = rng.gen_range(1..30);
            let (em, p) = random_instance(&mut rng, t, 7, 3.0);
            let mask: Vec<bool> = (0..t).map(|i| i == 0 || rng.gen_bool(0.8)).collect();
            let m = marginals(&em, &p, Some(&mask)).unwrap();
            for k in 0..t {
                let s: f64 = m[k * 7..(k + 1) * 7].iter().sum();
                if mask[k] {
                    assert!((s - 1.0).abs() < 1e-8);
                } else {
                    assert_eq!(s, 0.0);
                }
            }
        }
    }

    #[test]
    fn partition_dominates_every_path() {
        let mut rng = crate::rng::stream_rng(0, "crf", 5);
        for _ in 0..30 {
            let (em, p) = random_instance(&mut rng, 4, 3, 4.0);
            let z = log_partition(&em, &p, None).unwrap();
            for y in all_paths(4, 3) {
                assert!(z >= path_score(&em, &p, &y, None).unwrap());
            }
        }
    }

    #[test]
    fn saturated_gold_has_near_zero_loss() {
        let l = 5;
        let gold = [1u8, 3, 3, 0, 4];
        let mut em = vec![0.0; gold.len() * l];
        for (t, &y) in gold.iter().enumerate() {
            em[t * l + y as usize] = 1000.0;
        }
        let w = [0.5, -0.25];
        let (loss, _, _) =
            neg_log_likelihood_grad(&em, &gold, &CrfParams::zeros(l), &w, 0.1, 0.1, None).unwrap();
        let reg = 0.1 * 0.75 + 0.1 * (0.25 + 0.0625);
        assert!((loss - reg).abs() < 1e-6, "{loss}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::rng::stream_rng(0, "crf", 6);
        for case in 0..10 {
            let t = rng.gen_range(1..7);
            let l = 4;
            let (em, p) = random_instance(&mut rng, t, l, 1.5);
            let gold: Vec<u8> = (0..t).map(|_| rng.gen_range(0..l as u8)).collect();
            let mask: Option<Vec<bool>> =
                (case % 2 == 1).then(|| (0..t).map(|i| i == 0 || rng.gen_bool(0.7)).collect());
            let m = mask.as_deref();
            let (_, g) = nll_grad(&em, &gold, &p, m).unwrap();
            let f = |em: &[f64], p: &CrfParams| nll_grad(em, &gold, p, m).unwrap().0;
            let h = 1e-5;
            let check = |a: f64, n: f64| {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
                assert!(rel <= 1e-4, "analytic {a} numeric {n}");
            };
            for i in 0..em.len() {
                let mut up = em.clone();
                up[i] += h;
                let mut dn = em.clone();
                dn[i] -= h;
                check(g.emissions[i], (f(&up, &p) - f(&dn, &p)) / (2.0 * h));
            }
            let flat = p.to_vec();
            let gflat = g.params_vec();
            for i in 0..flat.len() {
                let mut up = flat.clone();
                up[i] += h;
                let mut dn = flat.clone();
                dn[i] -= h;
                let num = (f(&em, &CrfParams::from_slice(l, &up)) - f(&em, &CrfParams::from_slice(l, &dn)))
                    / (2.0 * h);
                check(gflat[i], num);
            }
        }
    }

    #[test]
    fn viterbi_matches_enumeration() {
        let mut rng = crate::rng::stream_rng(0, "crf", 7);
        for _ in 0..200 {
            let t = rng.gen_range(1..=6);
            let (em, p) = random_instance(&mut rng, t, 4, 2.0);
            let best = all_paths(t, 4)
                .into_iter()
                .map(|y| (path_score(&em, &p, &y, None).unwrap(), y))
                .fold((f64::NEG_INFINITY, vec![]), |a, b| if b.0 > a.0 { b } else { a });
            assert_eq!(viterbi_decode(&em, &p, None).unwrap(), best.1);
        }
    }

    #[test]
    fn zero_transitions_decode_per_position() {
        let em = vec![0.1, 0.5, 0.5, 0.2, 0.9, 0.0, 0.3, 0.3, 0.3];
        assert_eq!(viterbi_decode(&em, &CrfParams::zeros(3), None).unwrap(), vec![1, 1, 0]);
    }

    #[test]
    fn forbidden_transition_forces_runs() {
        // labels: 0 = BG, 1 = SSN; emissions flip-flop but BG->SSN costs -50
        let mut p = CrfParams::zeros(2);
        p.transitions[1] = -50.0;
        let em = vec![0.0, 2.0, 1.5, 0.0, 0.0, 2.0, 1.5, 0.0, 0.0, 2.0];
        let y = viterbi_decode(&em, &p, None).unwrap();
        // without the penalty the decode would alternate
        let free = viterbi_decode(&em, &CrfParams::zeros(2), None).unwrap();
        assert_eq!(free, vec![1, 0, 1, 0, 1]);
        let switches_up = y.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count();
        assert_eq!(switches_up, 0);
        let best = all_paths(5, 2)
            .into_iter()
            .max_by(|a, b| {
                path_score(&em, &p, a, None)
                    .unwrap()
                    .partial_cmp(&path_score(&em, &p, b, None).unwrap())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(y, best);
    }

    #[test]
    fn masked_positions_are_skipped() {
        let mut rng = crate::rng::stream_rng(0, "crf", 8);
        let (em, p) = random_instance(&mut rng, 5, 3, 2.0);
        let mask = [true, true, false, true, false];
        let compact: Vec<f64> = [0, 1, 3].iter().flat_map(|&t| em[t * 3..t * 3 + 3].to_vec()).collect();
        let a = log_partition(&em, &p, Some(&mask)).unwrap();
        let b = log_partition(&compact, &p, None).unwrap();
        assert!((a - b).abs() < 1e-12);
        let y = viterbi_decode(&em, &p, Some(&mask)).unwrap();
        assert_eq!((y[2], y[4]), (0, 0));
    }
}
