//! Weakly supervised semantic parsing over a knowledge base.
//!
//! The pieces, bottom up:
//!
//! * [`kb`]: immutable triple store with the indices the interpreter needs.
//! * [`program`]: Lisp-style programs (`Hop`, `ArgMax`, `ArgMin`, `Equal`)
//!   and their interpreter.
//! * [`assist`]: code assist, the exact set of error-free next tokens.
//! * [`nn`]: dense kernels (GRU, attention, masked softmax) and a recorded
//!   trace with a reverse pass.
//! * [`programmer`]: seq2seq model with a key-variable memory, beam search
//!   and sampling over the assist-masked vocabulary.
//! * [`trainer`]: rewards, iterative maximum likelihood and augmented
//!   REINFORCE.
//! * [`taskgen`]: synthetic knowledge bases and templated question sets.

pub mod assist;
pub mod gradcheck;
pub mod kb;
pub mod nn;
pub mod program;
pub mod programmer;
pub mod taskgen;
pub mod trainer;

pub use assist::{random_rollout, DecodingState};
pub use kb::{load_kb, EntityId, EntitySet, KnowledgeBase, KnowledgeBaseBuilder, PropertyId, RawValue, Value};
pub use program::{execute_program, parse_program, Expression, Func, Machine, Program, Token, Var};
