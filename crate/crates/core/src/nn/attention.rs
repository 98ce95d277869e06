use super::tensor::dot;
use super::{softmax, NnError, Tensor};

/// Dot-product attention with a bilinear score and a tanh output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `[hidden, hidden]`, score `s_t = uᵀ W_a h_t`.
    pub w_a: Tensor,
    /// `[hidden, 2 * hidden]` over `[u; context]`.
    pub w_c: Tensor,
    pub b_c: Tensor,
}

/// Returns `(tanh(W_c [u; c] + b_c), weights)` where `c = Σ_t softmax(s)_t h_t`.
pub fn attention(
    u: &[f64],
    encoder_outputs: &[Vec<f64>],
    p: &AttentionParams,
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    if encoder_outputs.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let scores: Vec<f64> =
        encoder_outputs.iter().map(|h| p.w_a.matvec(h).map(|wh| dot(u, &wh))).collect::<Result<_, _>>()?;
    let weights = softmax(&scores);
    let mut context = vec![0.0; u.len()];
    for (w, h) in weights.iter().zip(encoder_outputs) {
        for (c, x) in context.iter_mut().zip(h) {
            *c += w * x;
        }
    }
    let mut joined = u.to_vec();
    joined.extend_from_slice(&context);
    let out = p.w_c.matvec(&joined)?.into_iter().zip(&p.b_c.data).map(|(a, b)| (a + b).tanh()).collect();
    Ok((out, weights))
}
