use std::fmt::Write as _;

use serde::Serialize;

use super::TrainError;
use crate::programmer::ModelConfig;

/// Every knob of a training run. The text form is one `key = value` per
/// line; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub beam_size: usize,
    pub samples: usize,
    pub learning_rate: f64,
    pub epochs_per_iteration: usize,
    pub ml_iterations: usize,
    /// Epochs of augmented REINFORCE after iterative ML.
    pub rl_epochs: usize,
    pub alpha: f64,
    pub baseline_decay: f64,
    pub seed: u64,
    pub max_expressions: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Worker threads; results do not depend on it.
    pub threads: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beam_size: 32,
            samples: 8,
            learning_rate: 0.05,
            epochs_per_iteration: 10,
            ml_iterations: 5,
            rl_epochs: 5,
            alpha: 0.1,
            baseline_decay: 0.9,
            seed: 0,
            max_expressions: 3,
            batch_size: 1,
            clip_norm: 5.0,
            threads: 1,
            embed_dim: 32,
            hidden_dim: 64,
            init_scale: 0.1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value.parse().map_err(|_| TrainError::Config(format!("{key}: cannot parse {value:?}")))
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        match key {
            "beam_size" => self.beam_size = parse_num(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "epochs_per_iteration" => self.epochs_per_iteration = parse_num(key, value)?,
            "ml_iterations" => self.ml_iterations = parse_num(key, value)?,
            "rl_epochs" => self.rl_epochs = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "baseline_decay" => self.baseline_decay = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "max_expressions" => self.max_expressions = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "clip_norm" => self.clip_norm = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "embed_dim" => self.embed_dim = parse_num(key, value)?,
            "hidden_dim" => self.hidden_dim = parse_num(key, value)?,
            "init_scale" => self.init_scale = parse_num(key, value)?,
            _ => return Err(TrainError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut c = TrainConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("beam_size", self.beam_size),
            ("samples", self.samples),
            ("max_expressions", self.max_expressions),
            ("batch_size", self.batch_size),
            ("threads", self.threads),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(TrainError::Config(format!("{k} must be positive")));
            }
        }
        for (k, v) in
            [("learning_rate", self.learning_rate), ("clip_norm", self.clip_norm), ("init_scale", self.init_scale)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrainError::Config(format!("{k} must be positive")));
            }
        }
        for (k, v) in [("alpha", self.alpha), ("baseline_decay", self.baseline_decay)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TrainError::Config(format!("{k} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let json = serde_json::to_value(self).expect("config serializes");
        let mut s = String::new();
        for (k, v) in json.as_object().expect("struct") {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            init_scale: self.init_scale,
            max_expressions: self.max_expressions,
        }
    }
}
