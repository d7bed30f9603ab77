//! Pre-norm encoder-decoder transformer used by the explanation generator.

use candle_core::{Device, Tensor, D};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    causal_bias, dropout, ids_tensor, padding_bias, sinusoidal_positions, windowed_bias, Attention,
    FeedForward, Linear, ParamInit, RmsNorm,
};
use crate::tokenizer::{EOS, PAD, UNK};

/// Architecture of an encoder-decoder checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seq2SeqConfig {
    pub family: String,
    pub vocab_size: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub dropout: f32,
    /// Largest input the positional table supports.
    pub max_positions: usize,
    /// When set, encoder self-attention is restricted to a local window plus
    /// the global prefix (claim and task prefix).
    #[serde(default)]
    pub attention_window: Option<usize>,
}

/// Registered checkpoint families, smallest first.
pub const FAMILIES: &[&str] = &[
    "seq2seq-small",
    "seq2seq-base",
    "seq2seq-large",
    "seq2seq-long-small",
    "seq2seq-long-base",
];

impl Seq2SeqConfig {
    /// Architecture for a registered family; `vocab_size` is filled in once
    /// the vocabulary is built.
    pub fn family(name: &str) -> Option<Self> {
        let (layers, dropout, max_positions, window) = match name {
            "seq2seq-small" => (2, 0.0, 1024, None),
            "seq2seq-base" => (6, 0.1, 1024, None),
            "seq2seq-large" => (12, 0.1, 1024, None),
            "seq2seq-long-small" => (2, 0.0, 2048, Some(512)),
            "seq2seq-long-base" => (6, 0.1, 2048, Some(512)),
            _ => return None,
        };
        Some(Seq2SeqConfig {
            family: name.to_string(),
            vocab_size: 0,
            d_model: 1024,
            heads: 16,
            d_ff: 4096,
            encoder_layers: layers,
            decoder_layers: layers,
            dropout,
            max_positions,
            attention_window: window,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.vocab_size < 5 {
            return Err(Error::Config(format!(
                "vocabulary of {} is too small",
                self.vocab_size
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

struct EncoderLayer {
    norm1: RmsNorm,
    attn: Attention,
    norm2: RmsNorm,
    ff: FeedForward,
}

struct DecoderLayer {
    norm1: RmsNorm,
    self_attn: Attention,
    norm2: RmsNorm,
    cross_attn: Attention,
    norm3: RmsNorm,
    ff: FeedForward,
}

pub struct Seq2SeqModel {
    config: Seq2SeqConfig,
    embedding: Tensor,
    positions: Tensor,
    encoder: Vec<EncoderLayer>,
    encoder_norm: RmsNorm,
    decoder: Vec<DecoderLayer>,
    decoder_norm: RmsNorm,
    lm_head: Linear,
    device: Device,
}

/// Encoder states for a padded batch.
pub struct Encoded {
    pub states: Tensor,
    pub lengths: Vec<usize>,
}

impl Seq2SeqModel {
    pub fn new(config: Seq2SeqConfig, p: &mut ParamInit) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let embedding = p.normal("shared", &[config.vocab_size, d], 1.0)?;
        let mut encoder = Vec::with_capacity(config.encoder_layers);
        for i in 0..config.encoder_layers {
            p.push(format!("encoder.{i}"));
            encoder.push(EncoderLayer {
                norm1: RmsNorm::new(p, "norm1", d)?,
                attn: Attention::new(p, "self_attn", d, config.heads)?,
                norm2: RmsNorm::new(p, "norm2", d)?,
                ff: FeedForward::new(p, "ff", d, config.d_ff)?,
            });
            p.pop();
        }
        let encoder_norm = RmsNorm::new(p, "encoder.final_norm", d)?;
        let mut decoder = Vec::with_capacity(config.decoder_layers);
        for i in 0..config.decoder_layers {
            p.push(format!("decoder.{i}"));
            decoder.push(DecoderLayer {
                norm1: RmsNorm::new(p, "norm1", d)?,
                self_attn: Attention::new(p, "self_attn", d, config.heads)?,
                norm2: RmsNorm::new(p, "norm2", d)?,
                cross_attn: Attention::new(p, "cross_attn", d, config.heads)?,
                norm3: RmsNorm::new(p, "norm3", d)?,
                ff: FeedForward::new(p, "ff", d, config.d_ff)?,
            });
            p.pop();
        }
        let decoder_norm = RmsNorm::new(p, "decoder.final_norm", d)?;
        let lm_head = Linear::new(p, "lm_head", d, config.vocab_size)?;
        let device = p.device().clone();
        let positions = sinusoidal_positions(config.max_positions + 1, d, &device)?;
        Ok(Seq2SeqModel {
            config,
            embedding,
            positions,
            encoder,
            encoder_norm,
            decoder,
            decoder_norm,
            lm_head,
            device,
        })
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        &self.config
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn embed(&self, ids: &Tensor) -> Result<Tensor> {
        let (b, t) = ids.dims2()?;
        if t > self.positions.dim(0)? {
            return Err(Error::InvalidInput(format!(
                "sequence of {t} tokens exceeds the {} supported positions",
                self.config.max_positions
            )));
        }
        let tokens =
            self.embedding
                .index_select(&ids.flatten_all()?, 0)?
                .reshape((b, t, self.config.d_model))?;
        Ok(tokens.broadcast_add(&self.positions.narrow(0, 0, t)?.unsqueeze(0)?)?)
    }

    /// Runs the encoder. `global` gives the per-example global-prefix length
    /// used by windowed attention (ignored by full-attention families).
    pub fn encode(
        &self,
        inputs: &[Vec<u32>],
        global: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Encoded> {
        let (ids, lengths) = ids_tensor(inputs, PAD, &self.device)?;
        let t = ids.dim(1)?;
        let bias = match self.config.attention_window {
            Some(w) => windowed_bias(&lengths, global, t, w, &self.device)?,
            None => padding_bias(&lengths, t, &self.device)?,
        };
        let rate = self.config.dropout;
        let mut h = dropout(&self.embed(&ids)?, rate, rng.as_deref_mut())?;
        for layer in &self.encoder {
            let x = layer.norm1.forward(&h)?;
            let a = layer.attn.forward(&x, &x, Some(&bias))?;
            h = (h + dropout(&a, rate, rng.as_deref_mut())?)?;
            let x = layer.norm2.forward(&h)?;
            let f = layer.ff.forward(&x)?;
            h = (h + dropout(&f, rate, rng.as_deref_mut())?)?;
        }
        let states = dropout(&self.encoder_norm.forward(&h)?, rate, rng)?;
        Ok(Encoded { states, lengths })
    }

    /// Decoder logits `(batch, t, vocab)` for teacher-forced inputs.
    pub fn decode(
        &self,
        decoder_ids: &Tensor,
        encoded: &Encoded,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor> {
        let t = decoder_ids.dim(1)?;
        let self_bias = causal_bias(t, &self.device)?;
        let cross_bias = padding_bias(&encoded.lengths, encoded.states.dim(1)?, &self.device)?;
        let rate = self.config.dropout;
        let mut h = dropout(&self.embed(decoder_ids)?, rate, rng.as_deref_mut())?;
        for layer in &self.decoder {
            let x = layer.norm1.forward(&h)?;
            let a = layer.self_attn.forward(&x, &x, Some(&self_bias))?;
            h = (h + dropout(&a, rate, rng.as_deref_mut())?)?;
            let x = layer.norm2.forward(&h)?;
            let c = layer.cross_attn.forward(&x, &encoded.states, Some(&cross_bias))?;
            h = (h + dropout(&c, rate, rng.as_deref_mut())?)?;
            let x = layer.norm3.forward(&h)?;
            let f = layer.ff.forward(&x)?;
            h = (h + dropout(&f, rate, rng.as_deref_mut())?)?;
        }
        let h = dropout(&self.decoder_norm.forward(&h)?, rate, rng)?;
        self.lm_head.forward(&h)
    }

    /// Mean token negative log-likelihood of `targets` (each ending in EOS)
    /// given `inputs`, with decoder inputs shifted right behind a PAD start
    /// token.
    pub fn loss(
        &self,
        inputs: &[Vec<u32>],
        global: &[usize],
        targets: &[Vec<u32>],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor> {
        let encoded = self.encode(inputs, global, rng.as_deref_mut())?;
        let shifted: Vec<Vec<u32>> = targets
            .iter()
            .map(|t| {
                std::iter::once(PAD)
                    .chain(t[..t.len() - 1].iter().copied())
                    .collect()
            })
            .collect();
        let (dec_ids, _) = ids_tensor(&shifted, PAD, &self.device)?;
        let (labels, lengths) = ids_tensor(targets, PAD, &self.device)?;
        let logits = self.decode(&dec_ids, &encoded, rng)?;
        let (b, t, v) = logits.dims3()?;
        let log_probs = candle_nn::ops::log_softmax(&logits.reshape((b * t, v))?, D::Minus1)?;
        let picked = log_probs
            .gather(&labels.flatten_all()?.unsqueeze(1)?, 1)?
            .squeeze(1)?;
        let mask: Vec<f32> = lengths
            .iter()
            .flat_map(|&len| (0..t).map(move |j| if j < len { 1.0 } else { 0.0 }))
            .collect();
        let count: f32 = mask.iter().sum();
        let mask = Tensor::from_vec(mask, b * t, &self.device)?;
        Ok((picked.mul(&mask)?.sum_all()?.neg()? / count as f64)?)
    }

    /// Beam search. EOS is blocked at the first step so the output is never
    /// empty; PAD and UNK are never emitted. Scores are summed
    /// log-probabilities divided by length.
    pub fn beam_search(
        &self,
        input: &[u32],
        global: usize,
        beam_width: usize,
        max_new_tokens: usize,
    ) -> Result<Vec<u32>> {
        if input.is_empty() {
            return Err(Error::InvalidInput("cannot generate from an empty input".into()));
        }
        let width = beam_width.max(1);
        let encoded = self.encode(&[input.to_vec()], &[global], None)?;
        let vocab = self.config.vocab_size;

        let mut live: Vec<(Vec<u32>, f64)> = vec![(vec![PAD], 0.0)];
        let mut finished: Vec<(Vec<u32>, f64)> = Vec::new();
        let normalized = |tokens: &[u32], score: f64| score / (tokens.len() - 1).max(1) as f64;

        for step in 0..max_new_tokens {
            let n = live.len();
            let rows: Vec<Vec<u32>> = live.iter().map(|(t, _)| t.clone()).collect();
            let (ids, _) = ids_tensor(&rows, PAD, &self.device)?;
            let states = encoded
                .states
                .broadcast_as((n, encoded.states.dim(1)?, encoded.states.dim(2)?))?;
            let enc = Encoded {
                states: states.contiguous()?,
                lengths: vec![encoded.lengths[0]; n],
            };
            let logits = self.decode(&ids, &enc, None)?;
            let last = logits.narrow(1, rows[0].len() - 1, 1)?.squeeze(1)?;
            let log_probs: Vec<Vec<f32>> = candle_nn::ops::log_softmax(&last, D::Minus1)?.to_vec2()?;

            let mut candidates: Vec<(usize, u32, f64)> = Vec::with_capacity(n * 2 * width);
            for (beam, row) in log_probs.iter().enumerate() {
                let mut order: Vec<u32> = (0..vocab as u32)
                    .filter(|&id| id != PAD && id != UNK && !(step == 0 && id == EOS))
                    .collect();
                order.sort_by(|&a, &b| row[b as usize].total_cmp(&row[a as usize]).then(a.cmp(&b)));
                for &id in order.iter().take(2 * width) {
                    candidates.push((beam, id, live[beam].1 + row[id as usize] as f64));
                }
            }
            candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

            let mut next = Vec::with_capacity(width);
            for (beam, id, score) in candidates {
                let mut tokens = live[beam].0.clone();
                tokens.push(id);
                if id == EOS {
                    finished.push((tokens, score));
                } else {
                    next.push((tokens, score));
                }
                if next.len() == width {
                    break;
                }
            }
            live = next;

            if finished.len() >= width {
                finished.sort_by(|a, b| normalized(&b.0, b.1).total_cmp(&normalized(&a.0, a.1)));
                finished.truncate(width);
                let worst = finished
                    .iter()
                    .map(|(t, s)| normalized(t, *s))
                    .fold(f64::INFINITY, f64::min);
                let best_live = live
                    .iter()
                    .map(|(t, s)| normalized(t, *s))
                    .fold(f64::NEG_INFINITY, f64::max);
                if best_live <= worst {
                    break;
                }
            }
            if live.is_empty() {
                break;
            }
        }
        finished.extend(live);
        let best = finished
            .into_iter()
            .max_by(|a, b| normalized(&a.0, a.1).total_cmp(&normalized(&b.0, b.1)))
            .expect("at least one hypothesis");
        Ok(best.0.into_iter().skip(1).take_while(|&id| id != EOS).collect())
    }
}
