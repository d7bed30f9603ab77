//! Transformer building blocks with seeded initialization.
//!
//! candle's own initializers draw from an unseeded RNG on CPU, so every
//! parameter here is sampled from a ChaCha stream and registered in a
//! [`VarMap`] by name. Loading a checkpoint then overwrites the values.

use candle_core::{DType, Device, Tensor, Var, D};
use candle_nn::VarMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

pub struct ParamInit {
    varmap: VarMap,
    rng: ChaCha8Rng,
    device: Device,
    prefix: Vec<String>,
}

impl ParamInit {
    pub fn new(seed: u64, device: Device) -> Self {
        ParamInit {
            varmap: VarMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            device,
            prefix: Vec::new(),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn into_varmap(self) -> VarMap {
        self.varmap
    }

    pub fn push(&mut self, name: impl Into<String>) {
        self.prefix.push(name.into());
    }

    pub fn pop(&mut self) {
        self.prefix.pop();
    }

    fn full_name(&self, name: &str) -> String {
        let mut parts = self.prefix.clone();
        parts.push(name.to_string());
        parts.join(".")
    }

    fn register(&mut self, name: &str, values: Vec<f32>, shape: &[usize]) -> Result<Tensor> {
        let tensor = Tensor::from_vec(values, shape, &self.device)?;
        let var = Var::from_tensor(&tensor)?;
        let full = self.full_name(name);
        let t = var.as_tensor().clone();
        self.varmap.data().lock().expect("varmap lock").insert(full, var);
        Ok(t)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).expect("positive std");
        let values = (0..n).map(|_| dist.sample(&mut self.rng) as f32).collect();
        self.register(name, values, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f32) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.register(name, vec![value; n], shape)
    }
}

/// Bias-free dense layer, weight stored as `(out, in)`.
#[derive(Debug, Clone)]
pub struct Linear {
    weight: Tensor,
}

impl Linear {
    pub fn new(p: &mut ParamInit, name: &str, input: usize, output: usize) -> Result<Self> {
        let std = (input as f64).powf(-0.5);
        Ok(Linear {
            weight: p.normal(name, &[output, input], std)?,
        })
    }

    pub fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        let dims = xs.dims().to_vec();
        let last = *dims.last().expect("non-scalar input");
        let rows = xs.elem_count() / last;
        let out = xs.reshape((rows, last))?.matmul(&self.weight.t()?)?;
        let mut new_dims = dims;
        *new_dims.last_mut().expect("non-scalar") = self.weight.dim(0)?;
        Ok(out.reshape(new_dims)?)
    }
}

#[derive(Debug, Clone)]
pub struct RmsNorm {
    alpha: Tensor,
}

impl RmsNorm {
    pub fn new(p: &mut ParamInit, name: &str, dim: usize) -> Result<Self> {
        Ok(RmsNorm {
            alpha: p.constant(name, &[dim], 1.0)?,
        })
    }

    pub fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        Ok(candle_nn::ops::rms_norm_slow(xs, &self.alpha, 1e-6)?)
    }
}

/// Inverted dropout whose masks come from the caller's seeded stream.
pub fn dropout(xs: &Tensor, rate: f32, rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
    let Some(rng) = rng else {
        return Ok(xs.clone());
    };
    if rate <= 0.0 {
        return Ok(xs.clone());
    }
    use rand::Rng;
    let keep = 1.0 - rate;
    let mask: Vec<f32> = (0..xs.elem_count())
        .map(|_| if rng.gen::<f32>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    let mask = Tensor::from_vec(mask, xs.shape(), xs.device())?;
    Ok(xs.mul(&mask)?)
}

#[derive(Debug, Clone)]
pub struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
    head_dim: usize,
}

impl Attention {
    pub fn new(p: &mut ParamInit, name: &str, d_model: usize, heads: usize) -> Result<Self> {
        p.push(name);
        let attn = Attention {
            q: Linear::new(p, "q", d_model, d_model)?,
            k: Linear::new(p, "k", d_model, d_model)?,
            v: Linear::new(p, "v", d_model, d_model)?,
            o: Linear::new(p, "o", d_model, d_model)?,
            heads,
            head_dim: d_model / heads,
        };
        p.pop();
        Ok(attn)
    }

    fn split_heads(&self, xs: &Tensor) -> Result<Tensor> {
        let (b, t, _) = xs.dims3()?;
        Ok(xs
            .reshape((b, t, self.heads, self.head_dim))?
            .transpose(1, 2)?
            .contiguous()?)
    }

    /// `bias` broadcasts to `(batch, heads, t_query, t_key)`; masked slots
    /// hold a large negative value.
    pub fn forward(&self, query: &Tensor, memory: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let (b, tq, d) = query.dims3()?;
        let q = self.split_heads(&self.q.forward(query)?)?;
        let k = self.split_heads(&self.k.forward(memory)?)?;
        let v = self.split_heads(&self.v.forward(memory)?)?;
        let scale = (self.head_dim as f64).powf(-0.5);
        let mut scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?;
        if let Some(bias) = bias {
            scores = scores.broadcast_add(bias)?;
        }
        let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let ctx = probs
            .matmul(&v)?
            .transpose(1, 2)?
            .contiguous()?
            .reshape((b, tq, d))?;
        self.o.forward(&ctx)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    wi: Linear,
    wo: Linear,
}

impl FeedForward {
    pub fn new(p: &mut ParamInit, name: &str, d_model: usize, d_ff: usize) -> Result<Self> {
        p.push(name);
        let ff = FeedForward {
            wi: Linear::new(p, "wi", d_model, d_ff)?,
            wo: Linear::new(p, "wo", d_ff, d_model)?,
        };
        p.pop();
        Ok(ff)
    }

    pub fn forward(&self, xs: &Tensor) -> Result<Tensor> {
        self.wo.forward(&self.wi.forward(xs)?.gelu_erf()?)
    }
}

/// Fixed sinusoidal position table of shape `(len, dim)`.
pub fn sinusoidal_positions(len: usize, dim: usize, device: &Device) -> Result<Tensor> {
    let mut table = vec![0f32; len * dim];
    for pos in 0..len {
        for i in 0..dim / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            let angle = pos as f64 * freq;
            table[pos * dim + 2 * i] = angle.sin() as f32;
            table[pos * dim + 2 * i + 1] = angle.cos() as f32;
        }
    }
    Ok(Tensor::from_vec(table, (len, dim), device)?)
}

pub const MASKED: f32 = -1e9;

/// `(batch, 1, 1, t)` additive bias hiding padded key positions.
pub fn padding_bias(lengths: &[usize], t: usize, device: &Device) -> Result<Tensor> {
    let mut values = Vec::with_capacity(lengths.len() * t);
    for &len in lengths {
        values.extend((0..t).map(|j| if j < len { 0.0 } else { MASKED }));
    }
    Ok(Tensor::from_vec(values, (lengths.len(), 1, 1, t), device)?)
}

/// `(1, 1, t, t)` bias forbidding attention to future positions.
pub fn causal_bias(t: usize, device: &Device) -> Result<Tensor> {
    let values: Vec<f32> = (0..t * t)
        .map(|idx| if idx % t > idx / t { MASKED } else { 0.0 })
        .collect();
    Ok(Tensor::from_vec(values, (1, 1, t, t), device)?)
}

/// Local-window attention with a global prefix, as used by long-input
/// encoders: token `i` sees `j` when `|i - j| <= window / 2` or either is
/// inside its example's global prefix. Padded keys stay hidden.
pub fn windowed_bias(
    lengths: &[usize],
    global: &[usize],
    t: usize,
    window: usize,
    device: &Device,
) -> Result<Tensor> {
    let half = window / 2;
    let mut values = Vec::with_capacity(lengths.len() * t * t);
    for (&len, &g) in lengths.iter().zip(global) {
        for i in 0..t {
            for j in 0..t {
                let visible = j < len && (i.abs_diff(j) <= half || i < g || j < g);
                values.push(if visible { 0.0 } else { MASKED });
            }
        }
    }
    Ok(Tensor::from_vec(values, (lengths.len(), 1, t, t), device)?)
}

pub fn ids_tensor(rows: &[Vec<u32>], pad: u32, device: &Device) -> Result<(Tensor, Vec<usize>)> {
    let t = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let mut flat = Vec::with_capacity(rows.len() * t);
    for row in rows {
        flat.extend_from_slice(row);
        flat.extend(std::iter::repeat_n(pad, t - row.len()));
    }
    let lengths = rows.iter().map(Vec::len).collect();
    Ok((Tensor::from_vec(flat, (rows.len(), t), device)?, lengths))
}

pub fn scalar_f32(t: &Tensor) -> Result<f32> {
    Ok(t.to_dtype(DType::F32)?.to_scalar::<f32>()?)
}
