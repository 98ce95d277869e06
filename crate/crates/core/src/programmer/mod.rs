//! The seq2seq "programmer".
//!
//! A GRU encoder reads the entity-abstracted question. A GRU decoder with
//! attention emits program tokens, one masked softmax per step, over the
//! static token vocabulary plus one token per live variable. Variables are
//! bridged to the network by a key-variable memory: question entities are
//! keyed by the mean encoder output over their span; every executed
//! expression is keyed by the decoder output of the step that reads its `)`.

mod decode;
mod item;
mod model;
mod vocab;

pub use decode::{beam_search, decode_step, extend, sample_program, Hypothesis, MemoryEntry};
pub use item::{QAItem, ENT};
pub use model::{
    encode, load_checkpoint, program_gradient, save_checkpoint, trace_programs, EncodedQuestion, Model, ModelConfig,
};
pub use vocab::{TokenVocab, WordVocab, UNK};

use thiserror::Error;

use crate::assist::AssistError;
use crate::nn::NnError;
use crate::program::Token;

#[derive(Debug, Error)]
pub enum ProgrammerError {
    #[error("question has no tokens")]
    EmptyQuestion,
    #[error("entity span {start}..{end} is out of bounds or overlapping")]
    BadSpan { start: usize, end: usize },
    #[error("hypothesis already terminated")]
    Terminated,
    #[error("token {0:?} is not valid in this state")]
    InvalidToken(Token),
    #[error(transparent)]
    Assist(#[from] AssistError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("model was trained on different properties than this knowledge base")]
    PropertyMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
