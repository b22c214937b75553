use rand::Rng;
use serde::{Deserialize, Serialize};

use super::entities::{generate_entity, GeneratedValue};
use super::words::{generate_background_word, WordDistribution};
use crate::document::{LabeledDocument, SpanAnnotation};
use crate::error::{Error, Result};
use crate::label::EntityLabel;
use crate::rng::stream_rng;

/// Knobs of the unstructured text generator. Field names follow the
/// generator's documented parameter names with `-` replaced by `_`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_samples: usize,
    pub bg_word_count_min: usize,
    pub bg_word_count_max: usize,
    pub prob_of_npi: f64,
    pub prob_two_npi_together: f64,
    pub prob_json: f64,
    pub prob_structured: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_samples: 35000,
            bg_word_count_min: 10,
            bg_word_count_max: 40,
            prob_of_npi: 0.25,
            prob_two_npi_together: 0.2,
            prob_json: 0.05,
            prob_structured: 0.25,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("prob_of_npi", self.prob_of_npi),
            ("prob_two_npi_together", self.prob_two_npi_together),
            ("prob_json", self.prob_json),
            ("prob_structured", self.prob_structured),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.prob_json + self.prob_structured > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "prob_json + prob_structured must not exceed 1, got {}",
                self.prob_json + self.prob_structured
            )));
        }
        if self.bg_word_count_min > self.bg_word_count_max {
            return Err(Error::Config(format!(
                "bg_word_count_min ({}) exceeds bg_word_count_max ({})",
                self.bg_word_count_min, self.bg_word_count_max
            )));
        }
        Ok(())
    }

    pub fn prob_sentence(&self) -> f64 {
        (1.0 - self.prob_json - self.prob_structured).max(0.0)
    }

    /// Expected number of entity values per sample.
    pub fn expected_entities_per_sample(&self) -> f64 {
        let mean_budget = (self.bg_word_count_min + self.bg_word_count_max) as f64 / 2.0;
        mean_budget * self.prob_of_npi * (1.0 + self.prob_two_npi_together)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("generator config: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextFormat {
    Sentence,
    Json,
    Delimited,
}

pub const DELIMITERS: [&str; 6] = [",", " ", "\t", ";", "\x00", "\x01"];

/// A uniformly chosen non-background entity.
pub fn sample_npi_entity<R: Rng + ?Sized>(rng: &mut R) -> EntityLabel {
    let n = EntityLabel::value_entities().count();
    EntityLabel::value_entities()
        .nth(rng.gen_range(0..n))
        .expect("in range")
}

/// A background value: no labeled range.
pub fn background(text: String) -> GeneratedValue {
    GeneratedValue {
        text,
        start: 0,
        end: 0,
    }
}

/// Concatenates pieces into one text, keeping each piece's labeled range.
#[derive(Debug, Default)]
pub(crate) struct TextBuilder {
    text: String,
    spans: Vec<SpanAnnotation>,
}

impl TextBuilder {
    pub fn push_plain(&mut self, s: &str) {
        self.text.push_str(s);
    }

    pub fn push_value(&mut self, v: &GeneratedValue, label: Option<EntityLabel>) {
        let base = self.text.len();
        self.text.push_str(&v.text);
        if let Some(label) = label.filter(|_| v.end > v.start) {
            self.spans
                .push(SpanAnnotation::new(base + v.start, base + v.end, label));
        }
    }

    /// Pushes an already-transformed rendering of a value: `prefix`, `core`
    /// and `suffix` are the encoded forms of the value's three parts.
    pub fn push_parts(&mut self, prefix: &str, core: &str, suffix: &str, label: Option<EntityLabel>) {
        self.text.push_str(prefix);
        let start = self.text.len();
        self.text.push_str(core);
        let end = self.text.len();
        self.text.push_str(suffix);
        if let Some(label) = label.filter(|_| end > start) {
            self.spans.push(SpanAnnotation::new(start, end, label));
        }
    }

    pub fn finish(self, id: impl Into<String>) -> Result<LabeledDocument> {
        LabeledDocument::from_spans(id, self.text, self.spans)
    }
}

/// JSON string body (no surrounding quotes).
pub(crate) fn json_escape(s: &str) -> String {
    let quoted = serde_json::to_string(s).expect("strings serialize");
    quoted[1..quoted.len() - 1].to_string()
}

fn push_json_string(b: &mut TextBuilder, v: &GeneratedValue, label: Option<EntityLabel>) {
    b.push_plain("\"");
    b.push_parts(
        &json_escape(v.prefix()),
        &json_escape(v.core()),
        &json_escape(v.suffix()),
        label,
    );
    b.push_plain("\"");
}

pub(crate) fn push_json_object(
    b: &mut TextBuilder,
    fields: &[(GeneratedValue, Option<EntityLabel>)],
    values: &[(GeneratedValue, Option<EntityLabel>)],
) {
    b.push_plain("{");
    for (i, ((k, kl), (v, vl))) in fields.iter().zip(values).enumerate() {
        if i > 0 {
            b.push_plain(", ");
        }
        push_json_string(b, k, *kl);
        b.push_plain(": ");
        push_json_string(b, v, *vl);
    }
    b.push_plain("}");
}

/// Each sequence item paired with the entity it carries.
fn labeled(items: Vec<GeneratedValue>, entities: Vec<Option<EntityLabel>>) -> Vec<(GeneratedValue, Option<EntityLabel>)> {
    items.into_iter().zip(entities).collect()
}

pub fn choose_format<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> TextFormat {
    let u: f64 = rng.gen();
    if u < config.prob_json {
        TextFormat::Json
    } else if u < config.prob_json + config.prob_structured {
        TextFormat::Delimited
    } else {
        TextFormat::Sentence
    }
}

/// One unstructured sample.
pub fn generate_unstructured_sample<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    dist: &WordDistribution,
    id: impl Into<String>,
    rng: &mut R,
) -> Result<LabeledDocument> {
    config.validate()?;
    let format = choose_format(config, rng);
    let budget = rng.gen_range(config.bg_word_count_min..=config.bg_word_count_max);
    let (items, entities) = generate_tagged_sequence(config, dist, budget, rng)?;
    let mut b = TextBuilder::default();
    match format {
        TextFormat::Sentence | TextFormat::Delimited => {
            let delim = if format == TextFormat::Sentence {
                " "
            } else {
                DELIMITERS[rng.gen_range(0..DELIMITERS.len())]
            };
            for (i, (v, e)) in items.iter().zip(&entities).enumerate() {
                if i > 0 {
                    b.push_plain(delim);
                }
                b.push_value(v, *e);
            }
        }
        TextFormat::Json => {
            let keys: Vec<_> = (0..items.len())
                .map(|_| (background(generate_background_word(dist, rng)), None))
                .collect();
            push_json_object(&mut b, &keys, &labeled(items, entities));
        }
    }
    b.finish(id)
}

/// Background/NPI item sequence with the entity of each item. Runs until
/// `budget` background words have been emitted; before each background word
/// an entity value is placed with `prob_of_npi`, followed by a second one
/// with `prob_two_npi_together`.
pub fn generate_tagged_sequence<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    dist: &WordDistribution,
    budget: usize,
    rng: &mut R,
) -> Result<(Vec<GeneratedValue>, Vec<Option<EntityLabel>>)> {
    let mut items = Vec::new();
    let mut entities = Vec::new();
    let mut bg = 0;
    while bg < budget {
        if rng.gen_bool(config.prob_of_npi) {
            let n = if rng.gen_bool(config.prob_two_npi_together) { 2 } else { 1 };
            for _ in 0..n {
                let e = sample_npi_entity(rng);
                items.push(generate_entity(e, None, rng)?);
                entities.push(Some(e));
            }
        }
        items.push(background(generate_background_word(dist, rng)));
        entities.push(None);
        bg += 1;
    }
    Ok((items, entities))
}

/// `config.num_samples` samples, sample `i` drawn from its own stream.
pub fn generate_unstructured_corpus(
    config: &GeneratorConfig,
    dist: &WordDistribution,
) -> Result<Vec<LabeledDocument>> {
    config.validate()?;
    (0..config.num_samples)
        .map(|i| {
            let mut rng = stream_rng(config.seed, "unstructured", i as u64);
            generate_unstructured_sample(config, dist, format!("u{i}"), &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn config() -> GeneratorConfig {
        GeneratorConfig {
            num_samples: 10,
            ..Default::default()
        }
    }

    #[test]
    fn default_is_first_training_row() {
        let c = GeneratorConfig::default();
        assert_eq!(
            (c.num_samples, c.bg_word_count_min, c.bg_word_count_max),
            (35000, 10, 40)
        );
        assert!((c.prob_sentence() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = config();
        c.prob_json = 0.7;
        c.prob_structured = 0.5;
        assert!(c.validate().is_err());
        let mut c = config();
        c.prob_of_npi = 1.5;
        assert!(c.validate().is_err());
        let mut c = config();
        c.bg_word_count_min = 9;
        c.bg_word_count_max = 3;
        assert!(c.validate().is_err());
        assert!(GeneratorConfig::from_json(r#"{"num_samples": 1, "bogus": 2}"#).is_err());
    }

    #[test]
    fn config_json_uses_underscored_names() {
        let text = r#"{"num_samples": 3000, "bg_word_count_min": 2, "bg_word_count_max": 50,
            "prob_of_npi": 0.4, "prob_two_npi_together": 0.1, "prob_json": 0.1,
            "prob_structured": 0.5, "seed": 9}"#;
        let c = GeneratorConfig::from_json(text).unwrap();
        assert_eq!(c.num_samples, 3000);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn no_npi_means_all_background() {
        let c = GeneratorConfig {
            prob_of_npi: 0.0,
            ..config()
        };
        let d = WordDistribution::bundled();
        for i in 0..50 {
            let mut rng = stream_rng(1, "t", i);
            let doc = generate_unstructured_sample(&c, &d, "x", &mut rng).unwrap();
            assert!(doc.spans().is_empty());
            assert!(doc.labels().iter().all(|l| *l == EntityLabel::Background));
        }
    }

    #[test]
    fn always_npi_with_budget_one_traced() {
        // p=1, no pairs, budget 1: exactly one value then one background word
        let c = GeneratorConfig {
            prob_of_npi: 1.0,
            prob_two_npi_together: 0.0,
            bg_word_count_min: 1,
            bg_word_count_max: 1,
            prob_json: 0.0,
            prob_structured: 0.0,
            ..config()
        };
        let d = WordDistribution::bundled();
        let mut rng = stream_rng(3, "trace", 0);
        let (items, ents) = generate_tagged_sequence(&c, &d, 1, &mut rng).unwrap();
        assert_eq!(ents.len(), 2);
        assert!(ents[0].is_some() && ents[1].is_none());
        assert_eq!(items.len(), 2);

        let c = GeneratorConfig {
            bg_word_count_min: 3,
            bg_word_count_max: 3,
            ..c
        };
        let (_, ents) = generate_tagged_sequence(&c, &d, 3, &mut rng).unwrap();
        let pattern: Vec<bool> = ents.iter().map(|e| e.is_some()).collect();
        assert_eq!(pattern, vec![true, false, true, false, true, false]);
    }

    #[test]
    fn labels_cover_exactly_the_entity_values() {
        let c = GeneratorConfig {
            prob_of_npi: 0.5,
            ..config()
        };
        let d = WordDistribution::bundled();
        for i in 0..200 {
            let mut rng = stream_rng(5, "exact", i);
            let doc = generate_unstructured_sample(&c, &d, "x", &mut rng).unwrap();
            for s in doc.spans() {
                assert!(doc.labels()[s.start..s.end].iter().all(|l| *l == s.label));
                if s.start > 0 {
                    // the byte before a value is never part of the same span
                    assert!(!doc.spans().iter().any(|o| o.start < s.start && o.end > s.start));
                }
            }
            let labeled: usize = doc.spans().iter().map(|s| s.len()).sum();
            let non_bg = doc.labels().iter().filter(|l| **l != EntityLabel::Background).count();
            assert_eq!(labeled, non_bg);
        }
    }

    #[test]
    fn json_samples_parse_and_keep_values() {
        let c = GeneratorConfig {
            prob_json: 1.0,
            prob_structured: 0.0,
            prob_of_npi: 0.6,
            ..config()
        };
        let d = WordDistribution::bundled();
        for i in 0..100 {
            let mut rng = stream_rng(8, "json", i);
            let doc = generate_unstructured_sample(&c, &d, "j", &mut rng).unwrap();
            let v: serde_json::Value = serde_json::from_str(doc.text()).unwrap();
            assert!(v.is_object());
            for s in doc.spans() {
                // labeled ranges sit inside string literals
                assert!(!doc.text()[s.start..s.end].contains("\": \""));
            }
        }
    }

    #[test]
    fn delimited_samples_use_one_delimiter() {
        let c = GeneratorConfig {
            prob_json: 0.0,
            prob_structured: 1.0,
            prob_of_npi: 0.0,
            bg_word_count_min: 5,
            bg_word_count_max: 5,
            ..config()
        };
        // punctuation-free vocabulary so only the delimiter is non-alphabetic
        let d = WordDistribution::from_words(
            ["alpha", "beta", "gamma"]
                .iter()
                .map(|t| super::super::words::WordEntry {
                    token: t.to_string(),
                    pos: "noun".into(),
                    frequency: 1.0,
                })
                .collect(),
        )
        .unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..300 {
            let mut rng = stream_rng(2, "delim", i);
            let doc = generate_unstructured_sample(&c, &d, "d", &mut rng).unwrap();
            let used: Vec<_> = DELIMITERS
                .iter()
                .filter(|dl| **dl != " " && doc.text().contains(**dl))
                .collect();
            assert!(used.len() <= 1, "{:?}", doc.text());
            seen.extend(used.into_iter().copied());
        }
        assert!(seen.contains("\x00") && seen.contains("\x01") && seen.contains("\t"));
    }

    #[test]
    fn corpus_is_deterministic() {
        let c = GeneratorConfig {
            num_samples: 30,
            seed: 77,
            ..Default::default()
        };
        let d = WordDistribution::bundled();
        let a = generate_unstructured_corpus(&c, &d).unwrap();
        let b = generate_unstructured_corpus(&c, &d).unwrap();
        assert_eq!(a, b);
        let other = generate_unstructured_corpus(&GeneratorConfig { seed: 78, ..c }, &d).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn mean_entity_count_matches_expectation() {
        let c = GeneratorConfig {
            num_samples: 3000,
            seed: 11,
            ..Default::default()
        };
        let d = WordDistribution::bundled();
        let docs = generate_unstructured_corpus(&c, &d).unwrap();
        let total: usize = docs.iter().map(|d| d.spans().len()).sum();
        let mean = total as f64 / docs.len() as f64;
        // 25 * 0.25 * 1.2 = 7.5 values per sample
        assert!((mean - c.expected_entities_per_sample()).abs() < 0.2, "{mean}");
    }
}
