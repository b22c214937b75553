use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::entities::{formats, generate_entity, GeneratedValue};
use super::unstructured::{background, json_escape, push_json_object, TextBuilder};
use super::words::{generate_background_word, WordDistribution};
use crate::document::LabeledDocument;
use crate::error::{Error, Result};
use crate::label::EntityLabel;
use crate::rng::stream_rng;
use rand_chacha::ChaCha8Rng;

pub const MAX_COLUMNS: usize = 20;

/// Entity and format shared by every cell of a column. `format` is `None`
/// for background columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGold {
    pub name: String,
    pub entity: EntityLabel,
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<ColumnGold>,
    /// Row-major cells.
    pub rows: Vec<Vec<GeneratedValue>>,
}

impl Table {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_values(&self, col: usize) -> Vec<&str> {
        self.rows.iter().map(|r| r[col].text.as_str()).collect()
    }

    pub fn column_cells(&self, col: usize) -> Vec<GeneratedValue> {
        self.rows.iter().map(|r| r[col].clone()).collect()
    }

    /// CSV with a header row, RFC 4180 quoting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(w);
        wr.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            wr.write_record(row.iter().map(|v| v.text.as_str()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// One flat JSON object per row, keyed by column name.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for row in &self.rows {
            let obj: serde_json::Map<String, serde_json::Value> = self
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.name.clone(), serde_json::Value::String(v.text.clone())))
                .collect();
            serde_json::to_writer(&mut w, &obj)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn cell_label(&self, col: usize) -> Option<EntityLabel> {
        Some(self.columns[col].entity).filter(|e| *e != EntityLabel::Background)
    }

    /// Each row rendered as one CSV line (no header), labeled per cell.
    pub fn csv_row_documents(&self, id_prefix: &str) -> Result<Vec<LabeledDocument>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut b = TextBuilder::default();
                for (c, v) in row.iter().enumerate() {
                    if c > 0 {
                        b.push_plain(",");
                    }
                    push_csv_field(&mut b, v, self.cell_label(c));
                }
                b.finish(format!("{id_prefix}{r}"))
            })
            .collect()
    }

    /// Each row rendered as one JSON object, labeled per cell.
    pub fn json_row_documents(&self, id_prefix: &str) -> Result<Vec<LabeledDocument>> {
        let keys: Vec<_> = self
            .columns
            .iter()
            .map(|c| (background(c.name.clone()), None))
            .collect();
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let values: Vec<_> = row
                    .iter()
                    .enumerate()
                    .map(|(c, v)| (v.clone(), self.cell_label(c)))
                    .collect();
                let mut b = TextBuilder::default();
                push_json_object(&mut b, &keys, &values);
                b.finish(format!("{id_prefix}{r}"))
            })
            .collect()
    }
}

pub(crate) fn csv_needs_quotes(s: &str) -> bool {
    s.bytes().any(|b| matches!(b, b',' | b'"' | b'\n' | b'\r'))
}

fn csv_escape(s: &str) -> String {
    s.replace('"', "\"\"")
}

fn push_csv_field(b: &mut TextBuilder, v: &GeneratedValue, label: Option<EntityLabel>) {
    if csv_needs_quotes(&v.text) {
        b.push_plain("\"");
        b.push_parts(
            &csv_escape(v.prefix()),
            &csv_escape(v.core()),
            &csv_escape(v.suffix()),
            label,
        );
        b.push_plain("\"");
    } else {
        b.push_value(v, label);
    }
}

/// `n_rows` cells of one entity and format.
pub fn generate_column<R: Rng + ?Sized>(
    entity: EntityLabel,
    format: Option<&str>,
    n_rows: usize,
    dist: &WordDistribution,
    rng: &mut R,
) -> Result<Vec<GeneratedValue>> {
    (0..n_rows)
        .map(|_| {
            if entity == EntityLabel::Background {
                Ok(background(generate_background_word(dist, rng)))
            } else {
                generate_entity(entity, format, rng)
            }
        })
        .collect()
}

fn column_name<R: Rng + ?Sized>(i: usize, dist: &WordDistribution, rng: &mut R) -> String {
    format!("{}_{i}", dist.sample_word(rng).to_lowercase())
}

fn pick_format<R: Rng + ?Sized>(entity: EntityLabel, rng: &mut R) -> Option<String> {
    let f = formats(entity);
    (!f.is_empty()).then(|| f[rng.gen_range(0..f.len())].to_string())
}

fn build_table<R: Rng + ?Sized>(
    entities: Vec<EntityLabel>,
    n_rows: usize,
    dist: &WordDistribution,
    rng: &mut R,
) -> Result<Table> {
    let columns: Vec<ColumnGold> = entities
        .into_iter()
        .enumerate()
        .map(|(i, entity)| ColumnGold {
            name: column_name(i, dist, rng),
            entity,
            format: pick_format(entity, rng),
        })
        .collect();
    let mut cols = Vec::with_capacity(columns.len());
    for c in &columns {
        cols.push(generate_column(c.entity, c.format.as_deref(), n_rows, dist, rng)?);
    }
    let rows = (0..n_rows)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    Ok(Table { columns, rows })
}

/// Each column is background with probability 0.5, otherwise a uniformly
/// chosen other entity; one format per column.
pub fn generate_multicolumn_dataset<R: Rng + ?Sized>(
    n_rows: usize,
    n_cols: usize,
    dist: &WordDistribution,
    rng: &mut R,
) -> Result<Table> {
    if !(1..=MAX_COLUMNS).contains(&n_cols) {
        return Err(Error::Config(format!(
            "n_cols must be in [1, {MAX_COLUMNS}], got {n_cols}"
        )));
    }
    let entities = (0..n_cols)
        .map(|_| {
            if rng.gen_bool(0.5) {
                EntityLabel::Background
            } else {
                super::unstructured::sample_npi_entity(rng)
            }
        })
        .collect();
    build_table(entities, n_rows, dist, rng)
}

/// One column, entity uniform over all 19 entities (background included).
pub fn generate_singlecolumn_dataset<R: Rng + ?Sized>(
    n_rows: usize,
    dist: &WordDistribution,
    rng: &mut R,
) -> Result<Table> {
    let all: Vec<_> = EntityLabel::entities().collect();
    let entity = all[rng.gen_range(0..all.len())];
    build_table(vec![entity], n_rows, dist, rng)
}

pub fn generate_singlecolumn_of<R: Rng + ?Sized>(
    entity: EntityLabel,
    format: Option<&str>,
    n_rows: usize,
    dist: &WordDistribution,
    rng: &mut R,
) -> Result<Table> {
    let mut t = build_table(vec![entity], 0, dist, rng)?;
    if let Some(f) = format {
        t.columns[0].format = Some(f.to_string());
    }
    let cells = generate_column(entity, t.columns[0].format.as_deref(), n_rows, dist, rng)?;
    t.rows = cells.into_iter().map(|c| vec![c]).collect();
    Ok(t)
}

/// `k` values of one entity and format, the training unit of the
/// column-wise task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnAggregate {
    pub entity: EntityLabel,
    pub values: Vec<GeneratedValue>,
}

/// `total_values / k` aggregates; aggregate `i` holds entity
/// `entities()[i % 19]` in a format drawn per aggregate.
pub fn build_columnar_training_set<R: Rng + ?Sized>(
    total_values: usize,
    k: usize,
    dist: &WordDistribution,
    rng: &mut R,
) -> Result<Vec<ColumnAggregate>> {
    if !(1..=10).contains(&k) {
        return Err(Error::Config(format!("aggregate size must be in [1, 10], got {k}")));
    }
    let all: Vec<_> = EntityLabel::entities().collect();
    (0..total_values / k)
        .map(|i| {
            let entity = all[i % all.len()];
            let format = pick_format(entity, rng);
            Ok(ColumnAggregate {
                entity,
                values: generate_column(entity, format.as_deref(), k, dist, rng)?,
            })
        })
        .collect()
}

/// Sizes of a structured corpus: multi-column tables with a random column
/// count, plus single-column tables. Each table is rendered row by row as
/// JSON objects with probability `prob_json`, otherwise as CSV lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredConfig {
    pub multi_column_tables: usize,
    pub multi_column_rows: usize,
    pub single_column_tables: usize,
    pub single_column_rows: usize,
    pub prob_json: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for StructuredConfig {
    fn default() -> Self {
        Self::train()
    }
}

impl StructuredConfig {
    pub fn train() -> Self {
        Self {
            multi_column_tables: 50,
            multi_column_rows: 100,
            single_column_tables: 250,
            single_column_rows: 200,
            prob_json: 0.5,
            seed: 0,
        }
    }

    pub fn test() -> Self {
        Self {
            multi_column_tables: 30,
            multi_column_rows: 50,
            single_column_tables: 25,
            single_column_rows: 200,
            ..Self::train()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prob_json) {
            return Err(Error::Config(format!("prob_json must be in [0, 1], got {}", self.prob_json)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Tables of a structured corpus together with their row documents.
#[derive(Debug, Clone)]
pub struct StructuredCorpus {
    pub multi_column: Vec<Table>,
    pub single_column: Vec<Table>,
    pub documents: Vec<LabeledDocument>,
}

/// Table `i` of each family is drawn from its own stream, so the two
/// families are independent of each other's sizes.
pub fn generate_structured_corpus(config: &StructuredConfig, dist: &WordDistribution) -> Result<StructuredCorpus> {
    config.validate()?;
    let mut documents = Vec::new();
    let mut render = |t: &Table, prefix: String, rng: &mut ChaCha8Rng| -> Result<()> {
        let docs = if rng.gen_bool(config.prob_json) {
            t.json_row_documents(&prefix)?
        } else {
            t.csv_row_documents(&prefix)?
        };
        documents.extend(docs);
        Ok(())
    };
    let mut multi_column = Vec::with_capacity(config.multi_column_tables);
    for i in 0..config.multi_column_tables {
        let mut rng = stream_rng(config.seed, "multi-column", i as u64);
        let n_cols = rng.gen_range(1..=MAX_COLUMNS);
        let t = generate_multicolumn_dataset(config.multi_column_rows, n_cols, dist, &mut rng)?;
        render(&t, format!("m{i}r"), &mut rng)?;
        multi_column.push(t);
    }
    let mut single_column = Vec::with_capacity(config.single_column_tables);
    for i in 0..config.single_column_tables {
        let mut rng = stream_rng(config.seed, "single-column", i as u64);
        let t = generate_singlecolumn_dataset(config.single_column_rows, dist, &mut rng)?;
        render(&t, format!("s{i}r"), &mut rng)?;
        single_column.push(t);
    }
    Ok(StructuredCorpus { multi_column, single_column, documents })
}

/// Escaped CSV field, for tests and tools that render single cells.
pub fn csv_field(s: &str) -> String {
    if csv_needs_quotes(s) {
        format!("\"{}\"", csv_escape(s))
    } else {
        s.to_string()
    }
}

/// Escaped JSON string literal.
pub fn json_field(s: &str) -> String {
    format!("\"{}\"", json_escape(s))
}
