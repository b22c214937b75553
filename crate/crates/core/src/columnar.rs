//! Column-wise entity prediction: join `k` sampled cells with a five-byte
//! separator, tag the joined text per character and take the modal label.
//!
//! Cell bytes 0x01 and 0x02 are escaped (0x01 → 0x02 0x01, 0x02 → 0x02 0x02)
//! before joining, so every unescaped 0x01 belongs to a separator. Separator
//! and escape bytes carry no vote.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::unstructured::TextBuilder;
use crate::datagen::ColumnAggregate;
use crate::document::LabeledDocument;
use crate::error::{Error, Result};
use crate::label::{EntityLabel, NUM_LABELS};
use crate::rng::stream_rng;
use crate::tagger::Tagger;

pub const SEPARATOR: &str = "\x01\x01\x01\x01\x01";
pub const DEFAULT_RESAMPLES: usize = 10;

const ESC: char = '\x02';

pub fn escape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '\x01' || c == ESC {
            out.push(ESC);
        }
        out.push(c);
    }
    out
}

/// Joined text and its vote mask (`true` = excluded).
pub fn join_cells<S: AsRef<str>>(cells: &[S]) -> (String, Vec<bool>) {
    let mut text = String::new();
    let mut mask = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            text.push_str(SEPARATOR);
            mask.extend([true; 5]);
        }
        for c in cell.as_ref().chars() {
            if c == '\x01' || c == ESC {
                text.push(ESC);
                mask.push(true);
            }
            text.push(c);
            mask.extend(std::iter::repeat_n(false, c.len_utf8()));
        }
    }
    (text, mask)
}

/// Inverse of [`join_cells`].
pub fn split_joined(joined: &str) -> Vec<String> {
    let mut cells = vec![String::new()];
    let mut chars = joined.chars().peekable();
    let mut run = 0;
    while let Some(c) = chars.next() {
        if c == ESC {
            if let Some(n) = chars.next() {
                cells.last_mut().unwrap().push(n);
            }
            continue;
        }
        if c == '\x01' {
            run += 1;
            if run == 5 {
                cells.push(String::new());
                run = 0;
            }
            continue;
        }
        cells.last_mut().unwrap().push(c);
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSample {
    pub column_id: usize,
    pub resample: usize,
    pub rows: Vec<String>,
    pub joined: String,
    #[serde(skip)]
    pub mask: Vec<bool>,
}

impl ColumnSample {
    pub fn new(column_id: usize, resample: usize, rows: Vec<String>) -> Self {
        let (joined, mask) = join_cells(&rows);
        Self {
            column_id,
            resample,
            rows,
            joined,
            mask,
        }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }
}

fn sample_rng(seed: u64, stream: &str, column: usize, resample: usize) -> crate::rng::Rng {
    stream_rng(seed, stream, ((column as u64) << 32) | resample as u64)
}

/// `resamples` subsamples of `k` cells per column; without replacement
/// when the column has at least `k` cells, with replacement otherwise.
pub fn build_column_samples<S: AsRef<str>>(
    columns: &[Vec<S>],
    k: usize,
    resamples: usize,
    seed: u64,
) -> Result<Vec<ColumnSample>> {
    if k == 0 || resamples == 0 {
        return Err(Error::Config("aggregate size and resamples must be positive".into()));
    }
    let mut out = Vec::with_capacity(columns.len() * resamples);
    for (c, col) in columns.iter().enumerate() {
        if col.is_empty() {
            return Err(Error::Validation(format!("column {c} has no rows")));
        }
        for r in 0..resamples {
            let mut rng = sample_rng(seed, "column-sample", c, r);
            let rows: Vec<String> = if col.len() >= k {
                let mut idx = (0..col.len()).choose_multiple(&mut rng, k);
                idx.shuffle(&mut rng);
                idx.into_iter().map(|i| col[i].as_ref().to_string()).collect()
            } else {
                (0..k).map(|_| col[rng.gen_range(0..col.len())].as_ref().to_string()).collect()
            };
            out.push(ColumnSample::new(c, r, rows));
        }
    }
    Ok(out)
}

/// Most frequent label among `counts`; ties go to a uniformly chosen
/// non-BACKGROUND candidate, or BACKGROUND when it is the only one.
pub fn mode_of_counts<R: Rng + ?Sized>(counts: &[usize; NUM_LABELS], rng: &mut R) -> Option<EntityLabel> {
    let best = *counts[1..].iter().max()?;
    if best == 0 {
        return None;
    }
    let tied: Vec<EntityLabel> = (1..NUM_LABELS)
        .filter(|&i| counts[i] == best)
        .map(|i| EntityLabel::from_id(i as u8).unwrap())
        .collect();
    if tied.len() == 1 {
        return Some(tied[0]);
    }
    let entities: Vec<EntityLabel> = tied.into_iter().filter(|l| *l != EntityLabel::Background).collect();
    Some(*entities.choose(rng).unwrap_or(&EntityLabel::Background))
}

/// Modal label over unmasked, non-PAD positions.
pub fn aggregate_mode<R: Rng + ?Sized>(labels: &[EntityLabel], mask: &[bool], rng: &mut R) -> EntityLabel {
    let mut counts = [0usize; NUM_LABELS];
    for (i, l) in labels.iter().enumerate() {
        if !mask.get(i).copied().unwrap_or(false) && *l != EntityLabel::Pad {
            counts[l.id() as usize] += 1;
        }
    }
    mode_of_counts(&counts, rng).unwrap_or_else(|| {
        log::warn!("no votable characters in column sample; predicting BACKGROUND");
        EntityLabel::Background
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnPrediction {
    pub per_resample: Vec<EntityLabel>,
    pub majority: EntityLabel,
    /// Fraction of resamples that agree with `majority`.
    pub confidence: f64,
}

/// Named columns of string cells.
pub type Columns = Vec<(String, Vec<String>)>;

pub fn predict_columns(
    columns: &Columns,
    tagger: &dyn Tagger,
    k: usize,
    resamples: usize,
    seed: u64,
) -> Result<BTreeMap<String, ColumnPrediction>> {
    if columns.is_empty() {
        return Err(Error::Validation("table has no columns".into()));
    }
    let cells: Vec<Vec<String>> = columns.iter().map(|(_, v)| v.clone()).collect();
    let samples = build_column_samples(&cells, k, resamples, seed)?;
    let docs: Vec<LabeledDocument> = samples
        .iter()
        .map(|s| LabeledDocument::unlabeled(format!("{}#{}", s.column_id, s.resample), s.joined.clone()))
        .collect();
    let tags = tagger.tag(&docs)?;
    let mut out = BTreeMap::new();
    for (c, (name, _)) in columns.iter().enumerate() {
        let per_resample: Vec<EntityLabel> = samples
            .iter()
            .zip(&tags)
            .filter(|(s, _)| s.column_id == c)
            .map(|(s, t)| aggregate_mode(t, &s.mask, &mut sample_rng(seed, "column-tie", c, s.resample)))
            .collect();
        let mut counts = [0usize; NUM_LABELS];
        per_resample.iter().for_each(|l| counts[l.id() as usize] += 1);
        let majority = mode_of_counts(&counts, &mut sample_rng(seed, "column-tie", c, resamples))
            .unwrap_or(EntityLabel::Background);
        let confidence = counts[majority.id() as usize] as f64 / per_resample.len() as f64;
        out.insert(
            name.clone(),
            ColumnPrediction {
                per_resample,
                majority,
                confidence,
            },
        );
    }
    Ok(out)
}

/// Training document for one aggregate: the joined cells, each cell's
/// core labeled with the aggregate's entity.
pub fn aggregate_document(agg: &ColumnAggregate, id: impl Into<String>) -> Result<LabeledDocument> {
    let label = (agg.entity != EntityLabel::Background).then_some(agg.entity);
    let mut b = TextBuilder::default();
    for (i, v) in agg.values.iter().enumerate() {
        if i > 0 {
            b.push_plain(SEPARATOR);
        }
        b.push_parts(&escape_cell(v.prefix()), &escape_cell(v.core()), &escape_cell(v.suffix()), label);
    }
    b.finish(id)
}

/// Columns from a CSV file with a header row, or from JSON-lines objects
/// (columns in first-seen key order; non-string values rendered as JSON).
pub fn load_columns(path: &Path) -> Result<Columns> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("csv") {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut cols: Columns = r.headers()?.iter().map(|h| (h.to_string(), Vec::new())).collect();
        for rec in r.records() {
            let rec = rec?;
            for (i, v) in rec.iter().enumerate() {
                if let Some(c) = cols.get_mut(i) {
                    c.1.push(v.to_string());
                }
            }
        }
        return Ok(cols);
    }
    let text = std::fs::read_to_string(path)?;
    let mut cols: Columns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line)
            .map_err(|e| Error::Validation(format!("line {}: {e}", i + 1)))?;
        for (k, v) in obj {
            let cell = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            match cols.iter_mut().find(|(n, _)| *n == k) {
                Some(c) => c.1.push(cell),
                None => cols.push((k, vec![cell])),
            }
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use EntityLabel::*;

    #[test]
    fn strict_mode() {
        let mut rng = stream_rng(0, "t", 0);
        assert_eq!(aggregate_mode(&[Ssn, Ssn, Background], &[false; 3], &mut rng), Ssn);
        assert_eq!(aggregate_mode(&[Background, Background, Ssn, Ssn], &[false; 4], &mut rng), Ssn);
        assert_eq!(aggregate_mode(&[], &[], &mut rng), Background);
        assert_eq!(aggregate_mode(&[Ssn, Pad, Pad], &[false; 3], &mut rng), Ssn);
    }

    #[test]
    fn tie_between_entities_is_uniform_and_reproducible() {
        let labels = [Ssn, Ssn, Ssn, PhoneNumber, PhoneNumber, PhoneNumber];
        let mut n_ssn = 0;
        for i in 0..2000 {
            let a = aggregate_mode(&labels, &[false; 6], &mut stream_rng(i, "t", 0));
            let b = aggregate_mode(&labels, &[false; 6], &mut stream_rng(i, "t", 0));
            assert_eq!(a, b);
            assert!(a == Ssn || a == PhoneNumber);
            n_ssn += (a == Ssn) as usize;
        }
        assert!((900..1100).contains(&n_ssn), "{n_ssn}");
    }

    #[test]
    fn separators_and_escapes_never_vote() {
        let rows = ["\x01\x01\x01\x01\x01\x01", "a\x02b", "plain"];
        let (joined, mask) = join_cells(&rows);
        assert_eq!(split_joined(&joined), rows);
        assert_eq!(mask.len(), joined.len());
        let votable = mask.iter().filter(|m| !**m).count();
        assert_eq!(votable, rows.iter().map(|r| r.len()).sum::<usize>());
        // separator and escape bytes tagged SSN outnumber the URL-tagged cell bytes
        let labels: Vec<EntityLabel> = joined
            .bytes()
            .zip(&mask)
            .map(|(_, m)| if *m { Ssn } else { Url })
            .collect();
        assert!(labels.iter().filter(|l| **l == Ssn).count() > 0);
        let mut rng = stream_rng(0, "t", 0);
        assert_eq!(aggregate_mode(&labels, &mask, &mut rng), Url);
        let adversarial: Vec<EntityLabel> = joined.bytes().map(|b| if b <= 2 { Ssn } else { Url }).collect();
        // the six 0x01 bytes inside the first cell still vote
        let n_url = adversarial.iter().zip(&mask).filter(|(l, m)| !**m && **l == Url).count();
        assert_eq!(n_url, 7);
        assert_eq!(aggregate_mode(&adversarial, &mask, &mut rng), Url);
    }

    #[test]
    fn sampling_shapes() {
        let col: Vec<Vec<&str>> = vec![vec!["a", "b", "c"]];
        let s = build_column_samples(&col, 5, 10, 1).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|x| x.k() == 5));
        let s1 = build_column_samples(&col, 1, 3, 1).unwrap();
        assert!(s1.iter().all(|x| x.k() == 1 && !x.joined.contains('\x01')));
        let s3 = build_column_samples(&col, 3, 4, 1).unwrap();
        for x in &s3 {
            let mut r = x.rows.clone();
            r.sort();
            assert_eq!(r, ["a", "b", "c"]);
        }
        assert_eq!(s, build_column_samples(&col, 5, 10, 1).unwrap());
        let empty: Vec<Vec<&str>> = vec![vec![]];
        assert!(build_column_samples(&empty, 1, 1, 0).is_err());
    }

    struct Fixed(EntityLabel);

    impl Tagger for Fixed {
        fn engine(&self) -> crate::tagger::Engine {
            crate::tagger::Engine::Regex
        }
        fn tag(&self, docs: &[LabeledDocument]) -> Result<Vec<Vec<EntityLabel>>> {
            Ok(docs.iter().map(|d| vec![self.0; d.len()]).collect())
        }
    }

    #[test]
    fn predict_columns_reports_every_resample() {
        let cols: Columns = vec![("ssn".into(), vec!["123-45-6789".into(), "987-65-4321".into()])];
        let out = predict_columns(&cols, &Fixed(Ssn), 5, 10, 0).unwrap();
        let p = &out["ssn"];
        assert_eq!(p.per_resample, vec![Ssn; 10]);
        assert_eq!((p.majority, p.confidence), (Ssn, 1.0));
        assert!(predict_columns(&vec![], &Fixed(Ssn), 5, 10, 0).is_err());
    }

    #[test]
    fn aggregate_documents_label_cells() {
        let agg = ColumnAggregate {
            entity: Ssn,
            values: vec![
                crate::datagen::GeneratedValue::whole("1".into()),
                crate::datagen::GeneratedValue::whole("2".into()),
            ],
        };
        let d = aggregate_document(&agg, "x").unwrap();
        assert_eq!(d.text(), "1\x01\x01\x01\x01\x012");
        assert_eq!(d.labels()[0], Ssn);
        assert_eq!(d.labels()[1], Background);
        assert_eq!(d.labels()[6], Ssn);
    }

    fn brute_force(labels: &[EntityLabel], mask: &[bool]) -> (usize, Vec<EntityLabel>) {
        let mut best = 0;
        let mut set = Vec::new();
        for cand in EntityLabel::entities() {
            let n = labels.iter().zip(mask).filter(|(l, m)| !**m && **l == cand).count();
            if n > best {
                best = n;
                set = vec![cand];
            } else if n == best && n > 0 {
                set.push(cand);
            }
        }
        (best, set)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn mode_matches_brute_force(
            v in proptest::collection::vec((0u8..20, any::<bool>()), 0..40),
            seed in any::<u64>(),
        ) {
            let labels: Vec<EntityLabel> = v.iter().map(|(i, _)| EntityLabel::from_id(*i).unwrap()).collect();
            let mask: Vec<bool> = v.iter().map(|(_, m)| *m).collect();
            let got = aggregate_mode(&labels, &mask, &mut stream_rng(seed, "p", 0));
            let (best, set) = brute_force(&labels, &mask);
            if best == 0 {
                prop_assert_eq!(got, Background);
            } else if set.len() == 1 {
                prop_assert_eq!(got, set[0]);
            } else {
                prop_assert!(set.contains(&got));
                prop_assert!(got != Background);
            }
        }
    }
}
