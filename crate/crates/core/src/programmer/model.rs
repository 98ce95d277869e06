use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assist::{DecodingState, DEFAULT_MAX_EXPRESSIONS};
use crate::kb::KnowledgeBase;
use crate::nn::{Eager, Grads, Graph, GruIds, ModelDims, ModelParams, NodeId, ParamId, Tensor, Trace};
use crate::program::{Token, Var};

use super::decode::MemoryEntry;
use super::{ProgrammerError, QAItem, TokenVocab, WordVocab};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub max_expressions: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { embed_dim: 32, hidden_dim: 64, init_scale: 0.1, max_expressions: DEFAULT_MAX_EXPRESSIONS }
    }
}

/// Parameters plus the vocabularies they are indexed by.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub words: WordVocab,
    /// Property names in id order of the KB the model was built for.
    pub properties: Vec<String>,
    pub tokens: TokenVocab,
    pub params: ModelParams,
    pub max_expressions: usize,
}

impl Model {
    pub fn new<R: Rng>(words: WordVocab, kb: &KnowledgeBase, config: &ModelConfig, rng: &mut R) -> Self {
        let tokens = TokenVocab::new(kb.n_properties());
        let dims = ModelDims {
            embed: config.embed_dim,
            hidden: config.hidden_dim,
            n_words: words.len(),
            n_static: tokens.n_static(),
        };
        Model {
            properties: kb.properties().map(|p| kb.property_name(p).to_string()).collect(),
            words,
            tokens,
            params: ModelParams::uniform(dims, config.init_scale, rng),
            max_expressions: config.max_expressions,
        }
    }

    /// Property ids are positional, so a model only fits a KB with the same
    /// property table.
    pub fn check_kb(&self, kb: &KnowledgeBase) -> Result<(), ProgrammerError> {
        let same = kb.n_properties() == self.properties.len()
            && kb.properties().zip(&self.properties).all(|(p, name)| kb.property_name(p) == name);
        if same {
            Ok(())
        } else {
            Err(ProgrammerError::PropertyMismatch)
        }
    }

    pub(crate) fn decoding_state<'kb>(&self, kb: &'kb KnowledgeBase, item: &QAItem) -> DecodingState<'kb> {
        DecodingState::new(kb, item.initial_vars(), self.max_expressions)
    }
}

/// Encoder results on some graph backend.
#[derive(Debug, Clone)]
pub(crate) struct Encoded<V> {
    pub outputs: Vec<V>,
    /// `W_a h_t`, so an attention score is a single dot product.
    pub attn_keys: Vec<V>,
    pub final_state: V,
    pub entity_keys: Vec<V>,
}

pub(crate) fn gru<G: Graph>(g: &mut G, ids: &GruIds, h: &G::V, x: &G::V) -> G::V {
    fn gate<G: Graph>(g: &mut G, w: ParamId, u: ParamId, b: ParamId, x: &G::V, h: &G::V) -> G::V {
        let wx = g.matvec(w, x);
        let uh = g.matvec(u, h);
        let s = g.add(&wx, &uh);
        let bias = g.param(b);
        g.add(&s, &bias)
    }
    let z = gate(g, ids.w_z, ids.u_z, ids.b_z, x, h);
    let z = g.sigmoid(&z);
    let r = gate(g, ids.w_r, ids.u_r, ids.b_r, x, h);
    let r = g.sigmoid(&r);
    let rh = g.mul(&r, h);
    let n = gate(g, ids.w_n, ids.u_n, ids.b_n, x, &rh);
    let n = g.tanh(&n);
    let zh = g.mul(&z, h);
    let keep = g.one_minus(&z);
    let fresh = g.mul(&keep, &n);
    g.add(&zh, &fresh)
}

pub(crate) fn encode_graph<G: Graph>(
    g: &mut G,
    model: &Model,
    item: &QAItem,
) -> Result<Encoded<G::V>, ProgrammerError> {
    if item.abstracted.is_empty() {
        return Err(ProgrammerError::EmptyQuestion);
    }
    let hidden = model.params.dims.hidden;
    let mut h = g.constant(vec![0.0; hidden]);
    let mut outputs = Vec::with_capacity(item.abstracted.len());
    for w in model.words.ids(&item.abstracted) {
        let x = g.row(ModelParams::WORD_EMBED, w);
        h = gru(g, &ModelParams::ENCODER, &h, &x);
        outputs.push(h.clone());
    }
    let attn_keys = outputs.iter().map(|o| g.matvec(ModelParams::ATTN_W, o)).collect();
    let mut entity_keys = Vec::with_capacity(item.entities.len());
    for (span, _) in &item.entities {
        if span.end > outputs.len() || span.start >= span.end {
            return Err(ProgrammerError::BadSpan { start: span.start, end: span.end });
        }
        entity_keys.push(g.mean(&outputs[span.clone()]));
    }
    Ok(Encoded { outputs, attn_keys, final_state: h, entity_keys })
}

/// Decoder input for `token`. A variable's input is a projection of its key.
pub(crate) fn token_input<G: Graph>(g: &mut G, vocab: TokenVocab, token: Token, keys: &[G::V]) -> G::V {
    match token {
        Token::Var(v) => g.matvec(ModelParams::VAR_INPUT, &keys[v.index()]),
        t => g.row(ModelParams::TOKEN_EMBED, vocab.id(t)),
    }
}

/// Logits over `[static tokens; R0..R(n-1)]` for decoder state `u`.
pub(crate) fn step_logits<G: Graph>(g: &mut G, u: &G::V, enc: &Encoded<G::V>, keys: &[G::V]) -> G::V {
    let scores = g.dots(u, &enc.attn_keys);
    let weights = g.softmax(&scores);
    let context = g.weighted_sum(&weights, &enc.outputs);
    let joined = g.concat(&[u.clone(), context]);
    let pre = g.matvec(ModelParams::COMBINE_W, &joined);
    let bias = g.param(ModelParams::COMBINE_B);
    let pre = g.add(&pre, &bias);
    let o = g.tanh(&pre);
    let stat = g.matvec(ModelParams::OUT_W, &o);
    let out_b = g.param(ModelParams::OUT_B);
    let stat = g.add(&stat, &out_b);
    if keys.is_empty() {
        return stat;
    }
    let q = g.matvec(ModelParams::KEY_PROJ, &o);
    let var_logits = g.dots(&q, keys);
    g.concat(&[stat, var_logits])
}

pub(crate) fn initial_decoder_state<G: Graph>(g: &mut G, vocab: TokenVocab, final_state: &G::V) -> G::V {
    let go = g.row(ModelParams::TOKEN_EMBED, vocab.id(Token::Go));
    gru(g, &ModelParams::DECODER, final_state, &go)
}

pub(crate) fn token_mask(vocab: TokenVocab, valid: &[Token], n_vars: usize) -> Vec<bool> {
    let mut mask = vec![false; vocab.n_static() + n_vars];
    for t in valid {
        mask[vocab.id(*t)] = true;
    }
    mask
}

/// Eager encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedQuestion {
    pub outputs: Vec<Vec<f64>>,
    /// Last encoder hidden state. The decoder consumes `GO` from here before
    /// its first prediction.
    pub initial_state: Vec<f64>,
    /// One entry per resolved entity, keyed by the mean encoder output over
    /// its span.
    pub memory: Vec<MemoryEntry>,
}

pub(crate) fn encode_eager(model: &Model, item: &QAItem) -> Result<Arc<Encoded<Vec<f64>>>, ProgrammerError> {
    let mut g = Eager::new(&model.params);
    Ok(Arc::new(encode_graph(&mut g, model, item)?))
}

pub fn encode(model: &Model, item: &QAItem) -> Result<EncodedQuestion, ProgrammerError> {
    let enc = encode_eager(model, item)?;
    Ok(EncodedQuestion {
        outputs: enc.outputs.clone(),
        initial_state: enc.final_state.clone(),
        memory: enc
            .entity_keys
            .iter()
            .enumerate()
            .map(|(i, k)| MemoryEntry { key: k.clone(), var: Var(i as u32) })
            .collect(),
    })
}

/// Teacher-forces each program through the model on `trace` and returns the
/// per-step `log p(token)` nodes. Programs must be valid under code assist.
pub fn trace_programs(
    trace: &mut Trace<'_>,
    model: &Model,
    kb: &KnowledgeBase,
    item: &QAItem,
    programs: &[&[Token]],
) -> Result<Vec<Vec<NodeId>>, ProgrammerError> {
    let enc = encode_graph(trace, model, item)?;
    let vocab = model.tokens;
    let start = initial_decoder_state(trace, vocab, &enc.final_state);
    let mut out = Vec::with_capacity(programs.len());
    for program in programs {
        let mut state = model.decoding_state(kb, item);
        let mut u = start;
        let mut keys = enc.entity_keys.clone();
        let mut steps = Vec::with_capacity(program.len());
        for &tok in program.iter() {
            let valid = state.valid_tokens()?;
            let logits = step_logits(trace, &u, &enc, &keys);
            let mask = token_mask(vocab, &valid, keys.len());
            if valid.binary_search(&tok).is_err() {
                return Err(ProgrammerError::InvalidToken(tok));
            }
            steps.push(trace.log_prob(logits, &mask, vocab.id(tok))?);
            let new_var = state.push_checked(tok, &valid)?;
            if tok == Token::Return {
                break;
            }
            let x = token_input(trace, vocab, tok, &keys);
            u = gru(trace, &ModelParams::DECODER, &u, &x);
            if new_var.is_some() {
                keys.push(u);
            }
        }
        out.push(steps);
    }
    Ok(out)
}

/// Gradient of `Σ_i coef_i · log p(program_i)` together with each
/// `log p(program_i)`.
pub fn program_gradient(
    model: &Model,
    kb: &KnowledgeBase,
    item: &QAItem,
    weighted: &[(&[Token], f64)],
) -> Result<(Grads, Vec<f64>), ProgrammerError> {
    let mut trace = Trace::new(&model.params);
    let programs: Vec<&[Token]> = weighted.iter().map(|(p, _)| *p).collect();
    let nodes = trace_programs(&mut trace, model, kb, item, &programs)?;
    let mut objective = Vec::new();
    let mut log_probs = Vec::with_capacity(nodes.len());
    for (steps, (_, coef)) in nodes.iter().zip(weighted) {
        log_probs.push(steps.iter().map(|n| trace.scalar(*n)).sum());
        objective.extend(steps.iter().map(|n| (*n, *coef)));
    }
    Ok((trace.backward(&objective), log_probs))
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    embed_dim: usize,
    hidden_dim: usize,
    max_expressions: usize,
    words: Vec<String>,
    properties: Vec<String>,
    params: Vec<CheckpointTensor>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "lispqa-checkpoint-1";

impl Model {
    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            embed_dim: self.params.dims.embed,
            hidden_dim: self.params.dims.hidden,
            max_expressions: self.max_expressions,
            words: self.words.words().to_vec(),
            properties: self.properties.clone(),
            params: self
                .params
                .tensors()
                .iter()
                .zip(ModelParams::NAMES)
                .map(|(t, name)| CheckpointTensor {
                    name: name.to_string(),
                    shape: t.shape.clone(),
                    data: t.data.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ProgrammerError> {
        let bad = |m: String| ProgrammerError::Checkpoint(m);
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("unknown format {:?}", file.format)));
        }
        let words = WordVocab::from_words(file.words);
        let tokens = TokenVocab::new(file.properties.len());
        let dims = ModelDims {
            embed: file.embed_dim,
            hidden: file.hidden_dim,
            n_words: words.len(),
            n_static: tokens.n_static(),
        };
        let mut params = ModelParams::zeros(dims);
        if file.params.len() != ModelParams::COUNT {
            return Err(bad(format!("expected {} tensors, found {}", ModelParams::COUNT, file.params.len())));
        }
        for ((slot, saved), name) in params.tensors_mut().into_iter().zip(file.params).zip(ModelParams::NAMES) {
            if saved.name != name || saved.shape != slot.shape {
                return Err(bad(format!("tensor {name}: got {} with shape {:?}", saved.name, saved.shape)));
            }
            *slot = Tensor::from_vec(&saved.shape, saved.data).map_err(|e| bad(e.to_string()))?;
        }
        Ok(Model { words, properties: file.properties, tokens, params, max_expressions: file.max_expressions })
    }
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<(), ProgrammerError> {
    std::fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model, ProgrammerError> {
    Model::from_json(&std::fs::read_to_string(path)?)
}
