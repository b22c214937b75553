//! Character-level precision, recall and F1.
//!
//! PAD and BACKGROUND are never scored as entities, but a BACKGROUND
//! character predicted as an entity is a false positive for that entity and
//! an entity character predicted as BACKGROUND is a false negative.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::document::LabeledDocument;
use crate::error::{Error, Result};
use crate::label::{EntityLabel, NUM_LABELS};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self {
            counts: vec![0; NUM_LABELS * NUM_LABELS],
        }
    }
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, gold: EntityLabel, pred: EntityLabel) -> u64 {
        self.counts[gold.id() as usize * NUM_LABELS + pred.id() as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, gold: &[EntityLabel], pred: &[EntityLabel]) -> Result<()> {
        if gold.len() != pred.len() {
            return Err(Error::Validation(format!(
                "gold has {} labels, prediction {}",
                gold.len(),
                pred.len()
            )));
        }
        for (g, p) in gold.iter().zip(pred) {
            self.counts[g.id() as usize * NUM_LABELS + p.id() as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }

    /// (tp, fp, fn) for one entity.
    pub fn counts_for(&self, e: EntityLabel) -> (u64, u64, u64) {
        let i = e.id() as usize;
        let tp = self.counts[i * NUM_LABELS + i];
        let row: u64 = self.counts[i * NUM_LABELS..(i + 1) * NUM_LABELS].iter().sum();
        let col: u64 = (0..NUM_LABELS).map(|g| self.counts[g * NUM_LABELS + i]).sum();
        (tp, col - tp, row - tp)
    }

    pub fn report(&self, include_nonsensitive: bool) -> EvalReport {
        let mut entities = Vec::new();
        let (mut tp, mut fp, mut fneg) = (0, 0, 0);
        for e in scored_entities(include_nonsensitive) {
            let (t, p, n) = self.counts_for(e);
            tp += t;
            fp += p;
            fneg += n;
            if t + p + n > 0 {
                entities.push(EntityScore::new(e, t, p, n));
            }
        }
        let supported: Vec<&EntityScore> = entities.iter().filter(|s| s.support > 0).collect();
        let macro_avg = if supported.is_empty() {
            Prf::default()
        } else {
            let k = supported.len() as f64;
            let p = supported.iter().map(|s| s.precision).sum::<f64>() / k;
            let r = supported.iter().map(|s| s.recall).sum::<f64>() / k;
            let f = supported.iter().map(|s| s.f1).sum::<f64>() / k;
            Prf { precision: p, recall: r, f1: f }
        };
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            include_nonsensitive,
            characters: self.total(),
            entities,
            micro: Prf::from_counts(tp, fp, fneg),
            macro_avg,
        }
    }
}

/// Entities that receive a row, in canonical label order.
pub fn scored_entities(include_nonsensitive: bool) -> impl Iterator<Item = EntityLabel> {
    EntityLabel::value_entities().filter(move |e| include_nonsensitive || e.is_sensitive())
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fneg: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub entity: EntityLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold characters of this entity.
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fneg: u64,
}

impl EntityScore {
    fn new(entity: EntityLabel, tp: u64, fp: u64, fneg: u64) -> Self {
        let prf = Prf::from_counts(tp, fp, fneg);
        Self {
            entity,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            support: tp + fneg,
            tp,
            fp,
            fneg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub include_nonsensitive: bool,
    pub characters: u64,
    /// Entities with any gold or predicted characters, canonical order.
    pub entities: Vec<EntityScore>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
}

impl EvalReport {
    pub fn entity(&self, e: EntityLabel) -> Option<&EntityScore> {
        self.entities.iter().find(|s| s.entity == e)
    }
}

pub fn score<G, P>(gold: &[G], pred: &[P], include_nonsensitive: bool) -> Result<EvalReport>
where
    G: AsRef<[EntityLabel]>,
    P: AsRef<[EntityLabel]>,
{
    if gold.len() != pred.len() {
        return Err(Error::Validation(format!(
            "{} gold documents but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::new();
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        cm.accumulate(g.as_ref(), p.as_ref())
            .map_err(|e| Error::Validation(format!("document {i}: {e}")))?;
    }
    Ok(cm.report(include_nonsensitive))
}

/// As [`score`], naming documents by source id in errors.
pub fn score_documents<P: AsRef<[EntityLabel]>>(
    docs: &[LabeledDocument],
    pred: &[P],
    include_nonsensitive: bool,
) -> Result<EvalReport> {
    if docs.len() != pred.len() {
        return Err(Error::Validation(format!(
            "{} gold documents but {} predictions",
            docs.len(),
            pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::new();
    for (d, p) in docs.iter().zip(pred) {
        cm.accumulate(d.labels(), p.as_ref())
            .map_err(|e| Error::Validation(format!("document {:?}: {e}", d.source_id())))?;
    }
    Ok(cm.report(include_nonsensitive))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<16} {:>9} {:>9} {:>9} {:>10}",
                "entity", "precision", "recall", "f1", "support"
            );
            for e in &report.entities {
                let _ = writeln!(
                    s,
                    "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>10}",
                    e.entity.name(),
                    e.precision,
                    e.recall,
                    e.f1,
                    e.support
                );
            }
            for (name, p) in [("micro avg", report.micro), ("macro avg", report.macro_avg)] {
                let _ = writeln!(
                    s,
                    "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>10}",
                    name, p.precision, p.recall, p.f1, ""
                );
            }
            Ok(s)
        }
    }
}
