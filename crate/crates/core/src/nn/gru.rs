use rand::Rng;

use super::tensor::sigmoid;
use super::{NnError, Tensor};

/// One-layer GRU with the reset gate applied to the hidden state before the
/// candidate projection:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
/// h' = z ⊙ h + (1 - z) ⊙ n
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_n: Tensor,
    pub u_n: Tensor,
    pub b_n: Tensor,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruParams { w_z: w(), u_z: u(), b_z: b(), w_r: w(), u_r: u(), b_r: b(), w_n: w(), u_n: u(), b_n: b() }
    }

    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut w = || Tensor::uniform(&[hidden, input], scale, rng);
        let (w_z, w_r, w_n) = (w(), w(), w());
        let mut u = || Tensor::uniform(&[hidden, hidden], scale, rng);
        let (u_z, u_r, u_n) = (u(), u(), u());
        let mut b = || Tensor::uniform(&[hidden], scale, rng);
        let (b_z, b_r, b_n) = (b(), b(), b());
        GruParams { w_z, u_z, b_z, w_r, u_r, b_r, w_n, u_n, b_n }
    }

    pub fn hidden(&self) -> usize {
        self.u_z.rows()
    }

    pub fn input(&self) -> usize {
        self.w_z.cols()
    }

    pub(crate) fn tensors(&self) -> [&Tensor; 9] {
        [&self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_n, &self.u_n, &self.b_n]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_n,
            &mut self.u_n,
            &mut self.b_n,
        ]
    }
}

pub fn gru_step(h: &[f64], x: &[f64], p: &GruParams) -> Result<Vec<f64>, NnError> {
    if h.len() != p.hidden() || x.len() != p.input() {
        return Err(NnError::Shape(format!(
            "gru expects h[{}], x[{}]; got h[{}], x[{}]",
            p.hidden(),
            p.input(),
            h.len(),
            x.len()
        )));
    }
    let gate = |w: &Tensor, u: &Tensor, b: &Tensor, hh: &[f64]| -> Result<Vec<f64>, NnError> {
        let wx = w.matvec(x)?;
        let uh = u.matvec(hh)?;
        Ok(wx.iter().zip(&uh).zip(&b.data).map(|((a, c), d)| a + c + d).collect())
    };
    let z: Vec<f64> = gate(&p.w_z, &p.u_z, &p.b_z, h)?.into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(&p.w_r, &p.u_r, &p.b_r, h)?.into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let n: Vec<f64> = gate(&p.w_n, &p.u_n, &p.b_n, &rh)?.into_iter().map(f64::tanh).collect();
    Ok((0..h.len()).map(|i| z[i] * h[i] + (1.0 - z[i]) * n[i]).collect())
}
