use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;

use crate::assist::DecodingState;
use crate::kb::{EntitySet, KnowledgeBase};
use crate::nn::{log_softmax_masked, Eager, ModelParams};
use crate::program::{Program, Token, Var};

use super::model::{encode_eager, gru, initial_decoder_state, step_logits, token_input, token_mask, Encoded};
use super::{Model, ProgrammerError, QAItem};

/// A key in the decoder's memory and the interpreter variable it names.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub key: Vec<f64>,
    pub var: Var,
}

/// A partial or finished program together with the decoder state that
/// produced it.
#[derive(Debug, Clone)]
pub struct Hypothesis<'kb> {
    enc: Arc<Encoded<Vec<f64>>>,
    state: DecodingState<'kb>,
    /// Valid next tokens; empty once terminated.
    valid: Vec<Token>,
    /// Decoder state after consuming every emitted token.
    hidden: Vec<f64>,
    /// `keys[i]` is the memory key of `R<i>`.
    keys: Vec<Vec<f64>>,
    log_prob: f64,
    step_log_probs: Vec<f64>,
}

impl<'kb> Hypothesis<'kb> {
    pub fn initial(model: &Model, kb: &'kb KnowledgeBase, item: &QAItem) -> Result<Self, ProgrammerError> {
        let enc = encode_eager(model, item)?;
        let mut g = Eager::new(&model.params);
        let hidden = initial_decoder_state(&mut g, model.tokens, &enc.final_state);
        let state = model.decoding_state(kb, item);
        Ok(Hypothesis {
            valid: state.valid_tokens()?,
            keys: enc.entity_keys.clone(),
            enc,
            state,
            hidden,
            log_prob: 0.0,
            step_log_probs: Vec::new(),
        })
    }

    pub fn tokens(&self) -> &[Token] {
        self.state.emitted()
    }

    pub fn program(&self) -> Program {
        self.state.program()
    }

    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub fn step_log_probs(&self) -> &[f64] {
        &self.step_log_probs
    }

    pub fn is_terminated(&self) -> bool {
        self.state.is_terminated()
    }

    pub fn state(&self) -> &DecodingState<'kb> {
        &self.state
    }

    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    pub fn valid_tokens(&self) -> &[Token] {
        &self.valid
    }

    pub fn memory(&self) -> Vec<MemoryEntry> {
        self.keys.iter().enumerate().map(|(i, k)| MemoryEntry { key: k.clone(), var: Var(i as u32) }).collect()
    }

    /// Value of the last executed expression; empty if none ran.
    pub fn denotation(&self) -> EntitySet {
        if self.state.n_expressions() == 0 {
            return EntitySet::empty();
        }
        self.state.machine().vars().last().cloned().unwrap_or_default()
    }

    /// `(token, log p)` for every valid token, in token order.
    pub fn log_distribution(&self, model: &Model) -> Result<Vec<(Token, f64)>, ProgrammerError> {
        if self.is_terminated() {
            return Err(ProgrammerError::Terminated);
        }
        let mut g = Eager::new(&model.params);
        let logits = step_logits(&mut g, &self.hidden, &self.enc, &self.keys);
        let mask = token_mask(model.tokens, &self.valid, self.keys.len());
        let lp = log_softmax_masked(&logits, &mask)?;
        Ok(self.valid.iter().map(|t| (*t, lp[model.tokens.id(*t)])).collect())
    }

    pub(crate) fn extend_with(&self, model: &Model, token: Token, lp: f64) -> Result<Self, ProgrammerError> {
        let mut next = self.clone();
        let new_var = next.state.push_checked(token, &self.valid).map_err(|e| match e {
            crate::assist::AssistError::InvalidToken(t) => ProgrammerError::InvalidToken(t),
            e => e.into(),
        })?;
        next.log_prob += lp;
        next.step_log_probs.push(lp);
        if token == Token::Return {
            next.valid.clear();
            return Ok(next);
        }
        let mut g = Eager::new(&model.params);
        let x = token_input(&mut g, model.tokens, token, &self.keys);
        next.hidden = gru(&mut g, &ModelParams::DECODER, &self.hidden, &x);
        if new_var.is_some() {
            next.keys.push(next.hidden.clone());
        }
        next.valid = next.state.valid_tokens()?;
        Ok(next)
    }
}

/// Masked-softmax probabilities of the valid next tokens.
pub fn decode_step(hyp: &Hypothesis<'_>, model: &Model) -> Result<Vec<(Token, f64)>, ProgrammerError> {
    Ok(hyp.log_distribution(model)?.into_iter().map(|(t, lp)| (t, lp.exp())).collect())
}

pub fn extend<'kb>(hyp: &Hypothesis<'kb>, token: Token, model: &Model) -> Result<Hypothesis<'kb>, ProgrammerError> {
    let dist = hyp.log_distribution(model)?;
    let lp = dist.iter().find(|(t, _)| *t == token).map(|(_, lp)| *lp).ok_or(ProgrammerError::InvalidToken(token))?;
    hyp.extend_with(model, token, lp)
}

fn token_ids(model: &Model, tokens: &[Token]) -> Vec<usize> {
    tokens.iter().map(|t| model.tokens.id(*t)).collect()
}

/// Higher log-probability first, then lexicographically smaller token ids.
fn rank(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Length-unnormalized beam search; returns up to `k` finished programs,
/// best first.
pub fn beam_search<'kb>(
    model: &Model,
    kb: &'kb KnowledgeBase,
    item: &QAItem,
    k: usize,
) -> Result<Vec<Hypothesis<'kb>>, ProgrammerError> {
    let k = k.max(1);
    let mut live = vec![Hypothesis::initial(model, kb, item)?];
    let mut finished: Vec<(Vec<usize>, Hypothesis<'kb>)> = Vec::new();
    while !live.is_empty() {
        let mut cands: Vec<(f64, Vec<usize>, usize, Token, f64)> = Vec::new();
        for (i, h) in live.iter().enumerate() {
            let prefix = token_ids(model, h.tokens());
            for (tok, lp) in h.log_distribution(model)? {
                let mut ids = prefix.clone();
                ids.push(model.tokens.id(tok));
                cands.push((h.log_prob + lp, ids, i, tok, lp));
            }
        }
        cands.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));
        cands.truncate(k);
        let mut next = Vec::with_capacity(cands.len());
        for (_, ids, parent, tok, lp) in cands {
            let h = live[parent].extend_with(model, tok, lp)?;
            if h.is_terminated() {
                finished.push((ids, h));
            } else {
                next.push(h);
            }
        }
        live = next;
        if finished.len() >= k {
            finished.sort_by(|a, b| rank((a.1.log_prob, &a.0), (b.1.log_prob, &b.0)));
            finished.truncate(k);
            // Extending never raises log-probability, so strictly worse
            // prefixes cannot enter the top k.
            let worst = finished[k - 1].1.log_prob;
            live.retain(|h| h.log_prob >= worst);
        }
    }
    finished.sort_by(|a, b| rank((a.1.log_prob, &a.0), (b.1.log_prob, &b.0)));
    Ok(finished.into_iter().map(|(_, h)| h).collect())
}

/// Ancestral sampling until RETURN.
pub fn sample_program<'kb, R: Rng + ?Sized>(
    model: &Model,
    kb: &'kb KnowledgeBase,
    item: &QAItem,
    rng: &mut R,
) -> Result<Hypothesis<'kb>, ProgrammerError> {
    let mut h = Hypothesis::initial(model, kb, item)?;
    while !h.is_terminated() {
        let dist = h.log_distribution(model)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = dist[dist.len() - 1];
        for &(t, lp) in &dist {
            acc += lp.exp();
            if u < acc {
                pick = (t, lp);
                break;
            }
        }
        h = h.extend_with(model, pick.0, pick.1)?;
    }
    Ok(h)
}
