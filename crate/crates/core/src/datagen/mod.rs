//! Synthetic corpus generation.

pub mod entities;
pub mod lists;
pub mod words;

pub use entities::{formats, generate_entity, generate_entity_value, GeneratedValue};
pub use words::{generate_background_word, Capitalization, WordDistribution, WordEntry};
pub mod structured;
pub mod unstructured;

pub use structured::{
    build_columnar_training_set, generate_multicolumn_dataset, generate_singlecolumn_dataset,
    generate_structured_corpus, ColumnAggregate, ColumnGold, StructuredConfig, StructuredCorpus, Table,
};
pub use unstructured::{
    generate_unstructured_corpus, generate_unstructured_sample, GeneratorConfig, TextFormat,
};
