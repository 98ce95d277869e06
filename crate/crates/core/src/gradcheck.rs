//! Finite-difference check of the programmer's reverse pass on a miniature
//! model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assist::random_rollout;
use crate::kb::{EntitySet, KnowledgeBase};
use crate::nn::{ModelParams, Trace};
use crate::program::{denotation, Token};
use crate::programmer::{
    program_gradient, sample_program, trace_programs, Model, ModelConfig, ProgrammerError, QAItem, WordVocab,
};
use crate::taskgen::{gen_kb, KbSpec};
use crate::trainer::reward_f1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `Σ_i log p(z_i)` over fixed random programs.
    Likelihood,
    /// `Σ_i (R(z_i) - b) log p(z_i)` over fixed model samples.
    PolicyGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub embed: usize,
    pub hidden: usize,
    /// Question-word vocabulary size; the static token vocabulary is built
    /// to the same size.
    pub vocab: usize,
    pub epsilon: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub objective: Objective,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            embed: 8,
            hidden: 12,
            vocab: 20,
            epsilon: 1e-3,
            floor: 1e-6,
            objective: Objective::Likelihood,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub n_checked: usize,
    /// Parameter tensor and flat index of the worst coordinate.
    pub worst: (&'static str, usize),
    pub objective_value: f64,
}

struct Setup {
    kb: KnowledgeBase,
    model: Model,
    item: QAItem,
    programs: Vec<(Vec<Token>, f64)>,
}

fn setup(config: &GradCheckConfig, seed: u64) -> Result<Setup, ProgrammerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_props = config.vocab.saturating_sub(8).max(1);
    let kb = gen_kb(seed, &KbSpec { n_entities: 8, n_properties: n_props, edge_density: 0.5 })
        .map_err(|e| ProgrammerError::Checkpoint(e.to_string()))?;
    let n_words = config.vocab.saturating_sub(2).max(1);
    let words: Vec<String> = (0..n_words).map(|i| format!("w{i}")).collect();
    let vocab = WordVocab::build([words.as_slice()]);
    let mut tokens: Vec<String> = (0..6).map(|_| words[rng.gen_range(0..n_words)].clone()).collect();
    let entities: Vec<_> = kb.entities().collect();
    let e = entities[rng.gen_range(0..entities.len())];
    let at = rng.gen_range(0..tokens.len());
    tokens[at] = "ENT".into();
    let item = QAItem::new("gradcheck", tokens, vec![(at..at + 1, e)], EntitySet::empty())?;
    let model_config =
        ModelConfig { embed_dim: config.embed, hidden_dim: config.hidden, init_scale: 0.5, max_expressions: 2 };
    let model = Model::new(vocab, &kb, &model_config, &mut rng);
    let initial = item.initial_vars();
    let programs = match config.objective {
        Objective::Likelihood => {
            (0..3).map(|i| (random_rollout(&kb, initial.clone(), seed * 31 + i, 2).tokens(), 1.0)).collect()
        }
        Objective::PolicyGradient => {
            let gold = denotation(&kb, &random_rollout(&kb, initial.clone(), seed, 2), &initial);
            let mut out = Vec::new();
            for _ in 0..4 {
                let h = sample_program(&model, &kb, &item, &mut rng)?;
                let r = if gold.is_empty() { 0.0 } else { reward_f1(&h.denotation(), &gold).unwrap_or(0.0) };
                out.push((h.tokens().to_vec(), r - 0.5));
            }
            out
        }
    };
    Ok(Setup { kb, model, item, programs })
}

fn objective(s: &Setup, params: &ModelParams) -> Result<f64, ProgrammerError> {
    let model = Model { params: params.clone(), ..s.model.clone() };
    let mut trace = Trace::new(&model.params);
    let progs: Vec<&[Token]> = s.programs.iter().map(|(t, _)| t.as_slice()).collect();
    let nodes = trace_programs(&mut trace, &model, &s.kb, &s.item, &progs)?;
    Ok(nodes
        .iter()
        .zip(&s.programs)
        .map(|(steps, (_, c))| c * steps.iter().map(|n| trace.scalar(*n)).sum::<f64>())
        .sum())
}

/// Compares the analytic gradient with fourth-order central differences on every
/// parameter coordinate.
pub fn grad_check(config: &GradCheckConfig, seed: u64) -> Result<GradCheckReport, ProgrammerError> {
    let s = setup(config, seed)?;
    let weighted: Vec<(&[Token], f64)> = s.programs.iter().map(|(t, c)| (t.as_slice(), *c)).collect();
    let (grads, _) = program_gradient(&s.model, &s.kb, &s.item, &weighted)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_checked: 0,
        worst: (ModelParams::NAMES[0], 0),
        objective_value: objective(&s, &s.model.params)?,
    };
    let mut params = s.model.params.clone();
    for (ti, name) in ModelParams::NAMES.iter().enumerate() {
        for j in 0..grads.tensors[ti].len() {
            let orig = params.tensors()[ti].data[j];
            let mut at = |d: f64| -> Result<f64, ProgrammerError> {
                params.tensors_mut()[ti].data[j] = orig + d;
                objective(&s, &params)
            };
            let h = config.epsilon;
            // Fourth-order central stencil.
            let numeric = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
            params.tensors_mut()[ti].data[j] = orig;
            let analytic = grads.tensors[ti][j];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(config.floor);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (name, j);
            }
            report.n_checked += 1;
        }
    }
    Ok(report)
}
