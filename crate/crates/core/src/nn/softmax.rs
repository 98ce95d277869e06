use super::NnError;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Softmax restricted to `mask`; masked-out entries are exactly zero.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
    let log_p = log_softmax_masked(logits, mask)?;
    Ok(log_p.into_iter().zip(mask).map(|(lp, &m)| if m { lp.exp() } else { 0.0 }).collect())
}

/// Log-probabilities under the masked softmax; masked entries are `-inf`.
pub fn log_softmax_masked(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NnError> {
    if logits.len() != mask.len() {
        return Err(NnError::Shape(format!("{} logits, {} mask entries", logits.len(), mask.len())));
    }
    let max = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NnError::EmptyMask);
    }
    let z: f64 = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| (x - max).exp()).sum();
    let log_z = z.ln();
    Ok(logits.iter().zip(mask).map(|(x, &m)| if m { (x - max) - log_z } else { f64::NEG_INFINITY }).collect())
}
