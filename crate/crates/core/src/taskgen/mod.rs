//! Synthetic benchmark: random knowledge bases and templated questions whose
//! answers come from executing a gold program. Gold programs stay inside the
//! generator; dataset files carry only questions, entity spans and answers.

mod dataset;
mod kbgen;
mod templates;

pub use dataset::{load_dataset, parse_dataset, write_dataset, DatasetRecord, EntitySpan};
pub use kbgen::{gen_kb, KbSpec};
pub use templates::{default_templates, gen_dataset, GeneratedItem, Skeleton, Splits, Template};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskGenError {
    #[error("invalid generator setting: {0}")]
    Setting(String),
    #[error("template {0:?} has no valid instantiation on this knowledge base")]
    NotInstantiable(String),
    #[error("ran out of distinct instantiations after {made} of {wanted} items")]
    Exhausted { made: usize, wanted: usize },
    #[error("dataset line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
