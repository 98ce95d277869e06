use serde::Serialize;

use super::TrainError;
use crate::kb::EntitySet;

/// Per-question precision, recall and F1. An empty prediction scores zero
/// on all three.
pub fn prf(predicted: &EntitySet, gold: &EntitySet) -> Result<(f64, f64, f64), TrainError> {
    if gold.is_empty() {
        return Err(TrainError::EmptyGold);
    }
    if predicted.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let hit = predicted.intersection_len(gold) as f64;
    let p = hit / predicted.len() as f64;
    let r = hit / gold.len() as f64;
    let f = if hit == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok((p, r, f))
}

pub fn reward_f1(predicted: &EntitySet, gold: &EntitySet) -> Result<f64, TrainError> {
    Ok(prf(predicted, gold)?.2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub n: usize,
}

/// Averages per-question scores of `(predicted, gold)` pairs.
pub fn evaluate_with(pairs: &[(EntitySet, EntitySet)]) -> Result<Metrics, TrainError> {
    let mut m = Metrics { precision: 0.0, recall: 0.0, f1: 0.0, accuracy: 0.0, n: pairs.len() };
    if pairs.is_empty() {
        return Ok(m);
    }
    for (pred, gold) in pairs {
        let (p, r, f) = prf(pred, gold)?;
        m.precision += p;
        m.recall += r;
        m.f1 += f;
        m.accuracy += f64::from(u8::from(pred == gold));
    }
    let n = pairs.len() as f64;
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    m.accuracy /= n;
    Ok(m)
}
