use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate_with, reward_f1, Metrics, PseudoGoldStore, RewardedProgram, TrainConfig, TrainError};
use crate::kb::{EntitySet, KnowledgeBase};
use crate::nn::Grads;
use crate::program::Token;
use crate::programmer::{beam_search, program_gradient, sample_program, Hypothesis, Model, QAItem, WordVocab};

/// Independent stream for one `(seed, ...parts)` coordinate.
pub fn rng_for(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    ChaCha8Rng::seed_from_u64(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Ml,
    Rl,
}

const ML_STREAM: u64 = 1;
const RL_STREAM: u64 = 2;

/// Snapshot handed to the observer after each ML iteration or RL epoch.
pub struct Report<'a> {
    pub phase: Phase,
    /// 1-based within the phase.
    pub iteration: usize,
    pub mean_train_reward: f64,
    pub model: &'a Model,
    pub store: &'a PseudoGoldStore,
}

fn sum_in_order(model: &Model, parts: Vec<Grads>) -> Grads {
    let mut total = model.params.zero_grads();
    for g in &parts {
        total.add(g);
    }
    total
}

fn sgd_step(model: &mut Model, mut grads: Grads, config: &TrainConfig) {
    grads.clip(config.clip_norm);
    model.params.add_scaled(&grads, config.learning_rate);
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

fn rewarded(h: &Hypothesis<'_>, gold: &EntitySet) -> Result<RewardedProgram, TrainError> {
    Ok(RewardedProgram {
        tokens: h.tokens().to_vec(),
        reward: reward_f1(&h.denotation(), gold)?,
        log_prob: h.log_prob(),
    })
}

/// Best-preferred program of a beam, plus the reward of the top-ranked one.
fn search(
    model: &Model,
    kb: &KnowledgeBase,
    item: &QAItem,
    k: usize,
) -> Result<(Option<RewardedProgram>, f64), TrainError> {
    let beam = beam_search(model, kb, item, k)?;
    let mut best: Option<RewardedProgram> = None;
    let mut top = 0.0;
    for (i, h) in beam.iter().enumerate() {
        let r = rewarded(h, &item.answers)?;
        if i == 0 {
            top = r.reward;
        }
        if best.as_ref().is_none_or(|b| r.preference(b).is_lt()) {
            best = Some(r);
        }
    }
    Ok((best, top))
}

fn check_dataset(data: &[QAItem]) -> Result<(), TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut seen = BTreeSet::new();
    for item in data {
        if item.answers.is_empty() {
            return Err(TrainError::EmptyGold);
        }
        if !seen.insert(item.id.as_str()) {
            return Err(TrainError::DuplicateId(item.id.clone()));
        }
    }
    Ok(())
}

/// Alternates beam search into the store and likelihood training on the
/// stored programs with positive reward.
pub fn iterative_ml(
    model: &mut Model,
    kb: &KnowledgeBase,
    data: &[QAItem],
    config: &TrainConfig,
    store: &mut PseudoGoldStore,
    observer: &mut dyn FnMut(Report<'_>) -> Result<(), TrainError>,
) -> Result<(), TrainError> {
    check_dataset(data)?;
    for it in 0..config.ml_iterations {
        let found: Vec<(Option<RewardedProgram>, f64)> =
            data.par_iter().map(|item| search(model, kb, item, config.beam_size)).collect::<Result<_, _>>()?;
        let mut top_sum = 0.0;
        for (item, (best, top)) in data.iter().zip(found) {
            top_sum += top;
            if let Some(b) = best {
                store.offer(&item.id, b);
            }
        }
        let targets: Vec<usize> = (0..data.len()).filter(|&q| store.reward(&data[q].id) > 0.0).collect();
        for epoch in 0..config.epochs_per_iteration {
            let mut rng = rng_for(config.seed, &[ML_STREAM, it as u64, epoch as u64]);
            let order: Vec<usize> = shuffled(targets.len(), &mut rng).into_iter().map(|i| targets[i]).collect();
            for batch in order.chunks(config.batch_size) {
                let grads: Vec<Grads> = batch
                    .par_iter()
                    .map(|&q| {
                        let item = &data[q];
                        let tokens = &store.get(&item.id).expect("target has an entry").tokens;
                        program_gradient(model, kb, item, &[(tokens.as_slice(), 1.0)]).map(|(g, _)| g)
                    })
                    .collect::<Result<_, _>>()?;
                let total = sum_in_order(model, grads);
                sgd_step(model, total, config);
            }
        }
        observer(Report {
            phase: Phase::Ml,
            iteration: it + 1,
            mean_train_reward: top_sum / data.len() as f64,
            model,
            store,
        })?;
    }
    Ok(())
}

/// Exponentially decayed mean of each question's sampled rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    values: Vec<Option<f64>>,
    decay: f64,
}

impl Baselines {
    pub fn new(n: usize, decay: f64) -> Self {
        Baselines { values: vec![None; n], decay }
    }

    pub fn get(&self, q: usize) -> Option<f64> {
        self.values[q]
    }

    /// Folds in a step's sampled rewards; the first visit starts at their mean.
    pub fn update(&mut self, q: usize, rewards: &[f64]) {
        if rewards.is_empty() {
            return;
        }
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        self.values[q] = Some(match self.values[q] {
            Some(b) => self.decay * b + (1.0 - self.decay) * mean,
            None => mean,
        });
    }
}

/// `Σ_i (R_i - baseline) / n · ∇log p(z_i)` over the given programs.
pub fn reinforce_gradient(
    model: &Model,
    kb: &KnowledgeBase,
    item: &QAItem,
    programs: &[(Vec<Token>, f64)],
    baseline: f64,
) -> Result<Grads, TrainError> {
    let n = programs.len().max(1) as f64;
    let weighted: Vec<(&[Token], f64)> = programs.iter().map(|(t, r)| (t.as_slice(), (r - baseline) / n)).collect();
    Ok(program_gradient(model, kb, item, &weighted)?.0)
}

struct Rollouts {
    grads: Grads,
    sampled: Vec<f64>,
    best: Option<RewardedProgram>,
}

fn rollout(
    model: &Model,
    kb: &KnowledgeBase,
    item: &QAItem,
    pseudo: Option<&RewardedProgram>,
    baseline: Option<f64>,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Rollouts, TrainError> {
    let mut programs = Vec::with_capacity(config.samples);
    let mut sampled = Vec::new();
    let mut best: Option<RewardedProgram> = None;
    for _ in 0..config.samples {
        match pseudo {
            Some(pg) if rng.gen::<f64>() < config.alpha => programs.push((pg.tokens.clone(), pg.reward)),
            _ => {
                let h = sample_program(model, kb, item, rng)?;
                let r = rewarded(&h, &item.answers)?;
                sampled.push(r.reward);
                programs.push((r.tokens.clone(), r.reward));
                if best.as_ref().is_none_or(|b| r.preference(b).is_lt()) {
                    best = Some(r);
                }
            }
        }
    }
    let b = baseline.unwrap_or_else(|| {
        if sampled.is_empty() {
            0.0
        } else {
            sampled.iter().sum::<f64>() / sampled.len() as f64
        }
    });
    let grads = reinforce_gradient(model, kb, item, &programs, b)?;
    Ok(Rollouts { grads, sampled, best })
}

/// Policy-gradient epochs with pseudo-gold programs mixed in at rate
/// `alpha`. Sampled programs that beat the store are merged into it.
pub fn augmented_reinforce(
    model: &mut Model,
    kb: &KnowledgeBase,
    data: &[QAItem],
    config: &TrainConfig,
    store: &mut PseudoGoldStore,
    observer: &mut dyn FnMut(Report<'_>) -> Result<(), TrainError>,
) -> Result<(), TrainError> {
    check_dataset(data)?;
    let mut baselines = Baselines::new(data.len(), config.baseline_decay);
    for epoch in 0..config.rl_epochs {
        let mut rng = rng_for(config.seed, &[RL_STREAM, epoch as u64]);
        let order = shuffled(data.len(), &mut rng);
        let (mut reward_sum, mut reward_n) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let outs: Vec<Rollouts> = batch
                .par_iter()
                .map(|&q| {
                    let item = &data[q];
                    let mut rng = rng_for(config.seed, &[RL_STREAM, epoch as u64, q as u64]);
                    rollout(model, kb, item, store.get(&item.id), baselines.get(q), config, &mut rng)
                })
                .collect::<Result<_, _>>()?;
            let mut grads = Vec::with_capacity(outs.len());
            for (&q, out) in batch.iter().zip(outs) {
                reward_sum += out.sampled.iter().sum::<f64>();
                reward_n += out.sampled.len();
                baselines.update(q, &out.sampled);
                if let Some(b) = out.best {
                    store.offer(&data[q].id, b);
                }
                grads.push(out.grads);
            }
            let total = sum_in_order(model, grads);
            sgd_step(model, total, config);
        }
        observer(Report {
            phase: Phase::Rl,
            iteration: epoch + 1,
            mean_train_reward: if reward_n == 0 { 0.0 } else { reward_sum / reward_n as f64 },
            model,
            store,
        })?;
    }
    Ok(())
}

/// Greedy (beam 1) decode.
pub fn predict<'kb>(model: &Model, kb: &'kb KnowledgeBase, item: &QAItem) -> Result<Hypothesis<'kb>, TrainError> {
    let mut beam = beam_search(model, kb, item, 1)?;
    Ok(beam.remove(0))
}

pub fn evaluate(model: &Model, kb: &KnowledgeBase, data: &[QAItem]) -> Result<Metrics, TrainError> {
    let pairs: Vec<(EntitySet, EntitySet)> = data
        .par_iter()
        .map(|item| Ok((predict(model, kb, item)?.denotation(), item.answers.clone())))
        .collect::<Result<_, TrainError>>()?;
    evaluate_with(&pairs)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub phase: Phase,
    pub iteration: usize,
    pub mean_train_reward: f64,
    pub dev_f1: f64,
    pub store_coverage: f64,
    /// Stored reward per training question, in dataset order.
    pub store_rewards: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub store: PseudoGoldStore,
    pub log: Vec<LogRecord>,
    /// Dev metrics after iterative ML alone.
    pub ml_dev: Metrics,
    pub final_dev: Metrics,
}

struct Recorder<'a> {
    kb: &'a KnowledgeBase,
    train_set: &'a [QAItem],
    dev_set: &'a [QAItem],
    on_log: &'a mut (dyn FnMut(&LogRecord) + Send),
    log: Vec<LogRecord>,
    last_dev: Option<Metrics>,
}

impl Recorder<'_> {
    fn record(&mut self, r: Report<'_>) -> Result<(), TrainError> {
        let dev = evaluate(r.model, self.kb, self.dev_set)?;
        let rec = LogRecord {
            phase: r.phase,
            iteration: r.iteration,
            mean_train_reward: r.mean_train_reward,
            dev_f1: dev.f1,
            store_coverage: r.store.coverage(self.train_set.iter().map(|q| q.id.as_str())),
            store_rewards: self.train_set.iter().map(|q| r.store.reward(&q.id)).collect(),
        };
        (self.on_log)(&rec);
        self.log.push(rec);
        self.last_dev = Some(dev);
        Ok(())
    }

    fn take_dev(&mut self, model: &Model) -> Result<Metrics, TrainError> {
        match self.last_dev.take() {
            Some(m) => Ok(m),
            None => evaluate(model, self.kb, self.dev_set),
        }
    }
}

/// Full run: model init from the training vocabulary, iterative ML, then
/// augmented REINFORCE. `on_log` sees each record as it is produced.
pub fn train(
    kb: &KnowledgeBase,
    train_set: &[QAItem],
    dev_set: &[QAItem],
    config: &TrainConfig,
    on_log: &mut (dyn FnMut(&LogRecord) + Send),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    check_dataset(train_set)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| TrainError::Pool(e.to_string()))?;
    pool.install(|| {
        let words = WordVocab::build(train_set.iter().map(|q| q.abstracted.as_slice()));
        let mut init_rng = rng_for(config.seed, &[0]);
        let mut model = Model::new(words, kb, &config.model_config(), &mut init_rng);
        let mut store = PseudoGoldStore::new();
        let mut rec = Recorder { kb, train_set, dev_set, on_log, log: Vec::new(), last_dev: None };
        iterative_ml(&mut model, kb, train_set, config, &mut store, &mut |r| rec.record(r))?;
        let ml_dev = rec.take_dev(&model)?;
        augmented_reinforce(&mut model, kb, train_set, config, &mut store, &mut |r| rec.record(r))?;
        let final_dev = rec.take_dev(&model)?;
        Ok(TrainOutcome { model, store, log: rec.log, ml_dev, final_dev })
    })
}
