use rand::Rng;

use super::{AttentionParams, GruParams, Tensor};

/// Index of a tensor in the flat parameter list of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Parameter ids of one GRU inside [`ModelParams`].
#[derive(Debug, Clone, Copy)]
pub struct GruIds {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_n: ParamId,
    pub u_n: ParamId,
    pub b_n: ParamId,
}

impl GruIds {
    const fn at(base: usize) -> Self {
        GruIds {
            w_z: ParamId(base),
            u_z: ParamId(base + 1),
            b_z: ParamId(base + 2),
            w_r: ParamId(base + 3),
            u_r: ParamId(base + 4),
            b_r: ParamId(base + 5),
            w_n: ParamId(base + 6),
            u_n: ParamId(base + 7),
            b_n: ParamId(base + 8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub embed: usize,
    pub hidden: usize,
    /// Question-word vocabulary size.
    pub n_words: usize,
    /// Static decoder tokens (everything except variables).
    pub n_static: usize,
}

/// Every trainable tensor of the programmer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    /// `[n_words, embed]`
    pub word_embed: Tensor,
    /// `[n_static, embed]`, input embeddings of decoder tokens.
    pub token_embed: Tensor,
    pub encoder: GruParams,
    pub decoder: GruParams,
    pub attention: AttentionParams,
    /// `[n_static, hidden]`
    pub out_w: Tensor,
    pub out_b: Tensor,
    /// `[hidden, hidden]`, maps the attention output onto memory-key space.
    pub key_proj: Tensor,
    /// `[embed, hidden]`, turns a memory key into a decoder input.
    pub var_input: Tensor,
}

impl ModelParams {
    pub const COUNT: usize = 27;
    pub const WORD_EMBED: ParamId = ParamId(0);
    pub const TOKEN_EMBED: ParamId = ParamId(1);
    pub const ENCODER: GruIds = GruIds::at(2);
    pub const DECODER: GruIds = GruIds::at(11);
    pub const ATTN_W: ParamId = ParamId(20);
    pub const COMBINE_W: ParamId = ParamId(21);
    pub const COMBINE_B: ParamId = ParamId(22);
    pub const OUT_W: ParamId = ParamId(23);
    pub const OUT_B: ParamId = ParamId(24);
    pub const KEY_PROJ: ParamId = ParamId(25);
    pub const VAR_INPUT: ParamId = ParamId(26);

    pub const NAMES: [&'static str; Self::COUNT] = [
        "word_embed",
        "token_embed",
        "encoder.w_z",
        "encoder.u_z",
        "encoder.b_z",
        "encoder.w_r",
        "encoder.u_r",
        "encoder.b_r",
        "encoder.w_n",
        "encoder.u_n",
        "encoder.b_n",
        "decoder.w_z",
        "decoder.u_z",
        "decoder.b_z",
        "decoder.w_r",
        "decoder.u_r",
        "decoder.b_r",
        "decoder.w_n",
        "decoder.u_n",
        "decoder.b_n",
        "attention.w_a",
        "attention.w_c",
        "attention.b_c",
        "out_w",
        "out_b",
        "key_proj",
        "var_input",
    ];

    pub fn zeros(dims: ModelDims) -> Self {
        let (e, h) = (dims.embed, dims.hidden);
        ModelParams {
            dims,
            word_embed: Tensor::zeros(&[dims.n_words, e]),
            token_embed: Tensor::zeros(&[dims.n_static, e]),
            encoder: GruParams::zeros(e, h),
            decoder: GruParams::zeros(e, h),
            attention: AttentionParams {
                w_a: Tensor::zeros(&[h, h]),
                w_c: Tensor::zeros(&[h, 2 * h]),
                b_c: Tensor::zeros(&[h]),
            },
            out_w: Tensor::zeros(&[dims.n_static, h]),
            out_b: Tensor::zeros(&[dims.n_static]),
            key_proj: Tensor::zeros(&[h, h]),
            var_input: Tensor::zeros(&[e, h]),
        }
    }

    /// Every entry drawn from `uniform(-scale, scale)` in flat order.
    pub fn uniform<R: Rng>(dims: ModelDims, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        for t in p.tensors_mut() {
            for x in &mut t.data {
                *x = rng.gen_range(-scale..scale);
            }
        }
        p
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.word_embed, &self.token_embed];
        v.extend(self.encoder.tensors());
        v.extend(self.decoder.tensors());
        v.extend([
            &self.attention.w_a,
            &self.attention.w_c,
            &self.attention.b_c,
            &self.out_w,
            &self.out_b,
            &self.key_proj,
            &self.var_input,
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.word_embed, &mut self.token_embed];
        v.extend(self.encoder.tensors_mut());
        v.extend(self.decoder.tensors_mut());
        v.extend([
            &mut self.attention.w_a,
            &mut self.attention.w_c,
            &mut self.attention.b_c,
            &mut self.out_w,
            &mut self.out_b,
            &mut self.key_proj,
            &mut self.var_input,
        ]);
        v
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        match id.0 {
            0 => &self.word_embed,
            1 => &self.token_embed,
            i @ 2..=10 => self.encoder.tensors()[i - 2],
            i @ 11..=19 => self.decoder.tensors()[i - 11],
            20 => &self.attention.w_a,
            21 => &self.attention.w_c,
            22 => &self.attention.b_c,
            23 => &self.out_w,
            24 => &self.out_b,
            25 => &self.key_proj,
            26 => &self.var_input,
            i => panic!("parameter id {i} out of range"),
        }
    }

    pub fn n_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads { tensors: self.tensors().iter().map(|t| vec![0.0; t.len()]).collect() }
    }

    /// `self += scale * grads`.
    pub fn add_scaled(&mut self, grads: &Grads, scale: f64) {
        for (t, g) in self.tensors_mut().into_iter().zip(&grads.tensors) {
            for (x, d) in t.data.iter_mut().zip(g) {
                *x += scale * d;
            }
        }
    }
}

/// Gradient buffers aligned with [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.tensors[id.0]
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in self.tensors.iter_mut().flatten() {
            *x *= s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Rescales to at most `max_norm` in global L2 norm.
    pub fn clip(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }
}
