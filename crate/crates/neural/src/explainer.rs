//! Explanation generator: input construction, fine-tuning and beam-search
//! generation on top of [`Seq2SeqModel`].

use std::path::{Path, PathBuf};

use candle_core::Device;
use candle_nn::{AdamW, Optimizer, ParamsAdamW, VarMap};
use factlens_core::dataset::{ClaimRecord, EvidenceBundle};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{scalar_f32, ParamInit};
use crate::schedule::LinearWarmupDecay;
use crate::seq2seq::{Seq2SeqConfig, Seq2SeqModel};
use crate::tokenizer::{Tokenizer, EOS};

pub const PREFIX: &str = "summarize: ";

const MIN_TOKEN_BUDGET: usize = 8;

/// Generator input `"summarize: " + claim + "\n" + evidence`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSequence {
    pub text: String,
    pub token_budget: usize,
    /// Byte length of the prefix, claim and separator.
    pub head_len: usize,
    /// Set when the evidence was empty and only the claim is present.
    pub evidence_missing: bool,
}

impl InputSequence {
    pub fn head(&self) -> &str {
        &self.text[..self.head_len]
    }

    pub fn evidence(&self) -> &str {
        &self.text[self.head_len..]
    }
}

pub fn build_input(claim: &str, evidence: &EvidenceBundle, token_budget: usize) -> Result<InputSequence> {
    if claim.trim().is_empty() {
        return Err(Error::InvalidInput("claim is empty".into()));
    }
    let evidence_text = evidence.text();
    let evidence_missing = evidence.is_empty();
    if evidence_missing {
        tracing::warn!(claim, "evidence is empty; input holds the claim only");
    }
    let head = format!("{PREFIX}{claim}\n");
    Ok(InputSequence {
        head_len: head.len(),
        text: head + &evidence_text,
        token_budget,
        evidence_missing,
    })
}

pub fn record_input(record: &ClaimRecord, token_budget: usize) -> Result<InputSequence> {
    build_input(&record.claim, &record.evidence, token_budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    /// Registered family name or checkpoint directory.
    pub checkpoint: String,
    pub max_input_tokens: usize,
    pub max_output_tokens: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of optimizer steps spent warming up.
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
    pub beam_width: usize,
    pub seed: u64,
    /// Vocabulary cap for families initialized from scratch.
    pub vocab_size: usize,
    /// Overrides the family's dropout when set.
    pub dropout: Option<f32>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            checkpoint: "seq2seq-small".into(),
            max_input_tokens: 1024,
            max_output_tokens: 128,
            learning_rate: 5e-5,
            epochs: 3,
            batch_size: 8,
            warmup_ratio: 0.0,
            weight_decay: 0.0,
            max_grad_norm: 1.0,
            beam_width: 4,
            seed: 42,
            vocab_size: 32_000,
            dropout: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_input_tokens < MIN_TOKEN_BUDGET {
            return Err(Error::Config(format!(
                "max_input_tokens {} is below the minimum of {MIN_TOKEN_BUDGET}",
                self.max_input_tokens
            )));
        }
        if self.max_output_tokens < 1 {
            return Err(Error::Config("max_output_tokens must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.beam_width == 0 {
            return Err(Error::Config(
                "batch_size, epochs and beam_width must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return Err(Error::Config(format!(
                "warmup_ratio {} outside [0, 1]",
                self.warmup_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub epoch: usize,
    pub loss: f32,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Mean loss over the full training set before the first update.
    pub initial_loss: f32,
    /// Same measurement after the last update.
    pub final_loss: f32,
    pub curve: Vec<LossPoint>,
    pub epoch_losses: Vec<f32>,
    pub config: GenerationConfig,
}

/// A model together with its vocabulary.
pub struct Explainer {
    model: Seq2SeqModel,
    varmap: VarMap,
    tokenizer: Tokenizer,
}

const CONFIG_FILE: &str = "config.json";
const VOCAB_FILE: &str = "vocab.json";
const WEIGHTS_FILE: &str = "model.safetensors";

impl Explainer {
    /// Fresh model of a registered family with a vocabulary built from
    /// `texts`, initialized from `seed`.
    pub fn from_family<'a>(
        family: &str,
        texts: impl IntoIterator<Item = &'a str>,
        vocab_size: usize,
        dropout: Option<f32>,
        seed: u64,
    ) -> Result<Self> {
        let mut config =
            Seq2SeqConfig::family(family).ok_or_else(|| Error::UnknownCheckpoint(family.into()))?;
        if let Some(rate) = dropout {
            config.dropout = rate;
        }
        Self::from_config(config, texts, vocab_size, seed)
    }

    /// Fresh model of an arbitrary architecture. `config.vocab_size` is
    /// replaced by the size of the vocabulary built from `texts`.
    pub fn from_config<'a>(
        mut config: Seq2SeqConfig,
        texts: impl IntoIterator<Item = &'a str>,
        vocab_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let tokenizer = Tokenizer::build(texts, vocab_size, 1);
        config.vocab_size = tokenizer.vocab_size();
        let mut init = ParamInit::new(seed, Device::Cpu);
        let model = Seq2SeqModel::new(config, &mut init)?;
        Ok(Explainer {
            model,
            varmap: init.into_varmap(),
            tokenizer,
        })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(CONFIG_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let config: Seq2SeqConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let tokenizer = Tokenizer::load(dir.join(VOCAB_FILE))?;
        if tokenizer.vocab_size() != config.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} entries but the model expects {}",
                tokenizer.vocab_size(),
                config.vocab_size
            )));
        }
        let mut init = ParamInit::new(0, Device::Cpu);
        let model = Seq2SeqModel::new(config, &mut init)?;
        let mut varmap = init.into_varmap();
        varmap.load(dir.join(WEIGHTS_FILE))?;
        Ok(Explainer {
            model,
            varmap,
            tokenizer,
        })
    }

    /// Loads a checkpoint directory, or initializes a registered family or an
    /// architecture JSON file whose vocabulary comes from `texts`.
    pub fn resolve<'a>(
        checkpoint: &str,
        texts: impl IntoIterator<Item = &'a str>,
        config: &GenerationConfig,
    ) -> Result<Self> {
        let path = Path::new(checkpoint);
        if path.join(CONFIG_FILE).is_file() {
            Self::load(path)
        } else if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut arch: Seq2SeqConfig =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(rate) = config.dropout {
                arch.dropout = rate;
            }
            Self::from_config(arch, texts, config.vocab_size, config.seed)
        } else if Seq2SeqConfig::family(checkpoint).is_some() {
            Self::from_family(checkpoint, texts, config.vocab_size, config.dropout, config.seed)
        } else {
            Err(Error::UnknownCheckpoint(checkpoint.into()))
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CONFIG_FILE);
        let text = serde_json::to_string_pretty(self.model.config()).expect("serializable config");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.tokenizer.save(dir.join(VOCAB_FILE))?;
        self.varmap.save(dir.join(WEIGHTS_FILE))?;
        Ok(())
    }

    pub fn config(&self) -> &Seq2SeqConfig {
        self.model.config()
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// Token ids for `input` plus the length of its global prefix. The
    /// evidence is cut from the tail; the prefix and claim are kept.
    pub fn encode_input(&self, input: &InputSequence) -> Result<(Vec<u32>, usize)> {
        let budget = input.token_budget.min(self.model.config().max_positions);
        if budget < MIN_TOKEN_BUDGET {
            return Err(Error::Config(format!(
                "token budget {budget} is below the minimum of {MIN_TOKEN_BUDGET}"
            )));
        }
        // one slot is reserved for the closing EOS
        let room = budget - 1;
        let mut ids = self.tokenizer.encode(input.head());
        if ids.len() > room {
            tracing::warn!(tokens = ids.len(), budget, "claim exceeds the token budget");
            ids.truncate(room);
        }
        let global = ids.len();
        let evidence = self.tokenizer.encode(input.evidence());
        let keep = room.saturating_sub(ids.len()).min(evidence.len());
        ids.extend_from_slice(&evidence[..keep]);
        ids.push(EOS);
        Ok((ids, global))
    }

    pub fn encode_target(&self, explanation: &str, max_output_tokens: usize) -> Vec<u32> {
        let mut ids = self.tokenizer.encode(explanation);
        ids.truncate(max_output_tokens.saturating_sub(1));
        ids.push(EOS);
        ids
    }

    pub fn generate(
        &self,
        input: &InputSequence,
        beam_width: usize,
        max_output_tokens: usize,
    ) -> Result<String> {
        if input.text.trim().is_empty() {
            return Err(Error::InvalidInput("input text is empty".into()));
        }
        let (ids, global) = self.encode_input(input)?;
        // the closing EOS does not count towards the output budget
        let out = self
            .model
            .beam_search(&ids, global, beam_width, max_output_tokens)?;
        Ok(self.tokenizer.decode(&out))
    }

    fn mean_loss(&self, examples: &[Example], batch_size: usize) -> Result<f32> {
        let mut total = 0.0f64;
        let mut tokens = 0usize;
        for chunk in examples.chunks(batch_size) {
            let inputs: Vec<Vec<u32>> = chunk.iter().map(|e| e.input.clone()).collect();
            let global: Vec<usize> = chunk.iter().map(|e| e.global).collect();
            let targets: Vec<Vec<u32>> = chunk.iter().map(|e| e.target.clone()).collect();
            let n: usize = targets.iter().map(Vec::len).sum();
            let loss = scalar_f32(&self.model.loss(&inputs, &global, &targets, None)?)?;
            total += loss as f64 * n as f64;
            tokens += n;
        }
        Ok((total / tokens.max(1) as f64) as f32)
    }
}

struct Example {
    input: Vec<u32>,
    global: usize,
    target: Vec<u32>,
}

pub(crate) fn clip_grad_norm(
    grads: &mut candle_core::backprop::GradStore,
    vars: &[candle_core::Var],
    max_norm: f64,
) -> Result<f64> {
    let mut sq = 0.0f64;
    for var in vars {
        if let Some(g) = grads.get(var) {
            sq += scalar_f32(&g.sqr()?.sum_all()?)? as f64;
        }
    }
    let norm = sq.sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        for var in vars {
            if let Some(g) = grads.remove(var) {
                grads.insert(var, (g * scale)?);
            }
        }
    }
    Ok(norm)
}

/// Generator inputs for `records`, checking that every target is present.
pub fn training_inputs(records: &[ClaimRecord], config: &GenerationConfig) -> Result<Vec<InputSequence>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no training records".into()));
    }
    records
        .iter()
        .map(|r| {
            if r.explanation.trim().is_empty() {
                return Err(Error::InvalidInput(format!(
                    "record {} has an empty explanation",
                    r.id
                )));
            }
            record_input(r, config.max_input_tokens)
        })
        .collect()
}

/// Input and target texts, the material a fresh vocabulary is built from.
pub fn vocabulary_texts<'a>(
    inputs: &'a [InputSequence],
    records: &'a [ClaimRecord],
) -> impl Iterator<Item = &'a str> {
    inputs
        .iter()
        .map(|i| i.text.as_str())
        .chain(records.iter().map(|r| r.explanation.as_str()))
}

/// Fine-tunes `config.checkpoint` on `records`. Per-epoch checkpoints go to
/// `out/epoch-N` and the final model to `out` when an output directory is
/// given.
pub fn train(
    records: &[ClaimRecord],
    config: &GenerationConfig,
    out: Option<&Path>,
) -> Result<(Explainer, TrainingLog)> {
    config.validate()?;
    let inputs = training_inputs(records, config)?;
    let explainer = Explainer::resolve(&config.checkpoint, vocabulary_texts(&inputs, records), config)?;
    fine_tune(explainer, records, config, out)
}

/// Fine-tunes an already constructed model.
pub fn fine_tune(
    explainer: Explainer,
    records: &[ClaimRecord],
    config: &GenerationConfig,
    out: Option<&Path>,
) -> Result<(Explainer, TrainingLog)> {
    config.validate()?;
    let inputs = training_inputs(records, config)?;
    let examples = inputs
        .iter()
        .zip(records)
        .map(|(input, r)| {
            let (ids, global) = explainer.encode_input(input)?;
            Ok(Example {
                input: ids,
                global,
                target: explainer.encode_target(&r.explanation, config.max_output_tokens),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let warmup = (config.warmup_ratio * total as f64).round() as usize;
    let schedule = LinearWarmupDecay::new(config.learning_rate, warmup, total);
    let vars = explainer.varmap.all_vars();
    let mut opt = AdamW::new(
        vars.clone(),
        ParamsAdamW {
            lr: schedule.at(0),
            weight_decay: config.weight_decay,
            ..Default::default()
        },
    )?;

    let initial_loss = explainer.mean_loss(&examples, config.batch_size)?;
    tracing::info!(initial_loss, total_steps = total, "training started");
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut curve = Vec::with_capacity(total);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(config.batch_size) {
            let lr = schedule.at(step);
            opt.set_learning_rate(lr);
            let inputs: Vec<Vec<u32>> = batch.iter().map(|&i| examples[i].input.clone()).collect();
            let global: Vec<usize> = batch.iter().map(|&i| examples[i].global).collect();
            let targets: Vec<Vec<u32>> = batch.iter().map(|&i| examples[i].target.clone()).collect();
            let loss = explainer
                .model
                .loss(&inputs, &global, &targets, Some(&mut dropout_rng))?;
            let value = scalar_f32(&loss)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    epoch,
                    loss: value,
                });
            }
            let mut grads = loss.backward()?;
            clip_grad_norm(&mut grads, &vars, config.max_grad_norm)?;
            opt.step(&grads)?;
            step += 1;
            curve.push(LossPoint {
                step,
                epoch,
                loss: value,
                learning_rate: lr,
            });
        }
        let epoch_loss = explainer.mean_loss(&examples, config.batch_size)?;
        tracing::info!(epoch, loss = epoch_loss, "epoch finished");
        epoch_losses.push(epoch_loss);
        if let Some(dir) = out {
            explainer.save(checkpoint_dir(dir, epoch))?;
        }
    }
    let final_loss = *epoch_losses.last().expect("at least one epoch");
    let log = TrainingLog {
        initial_loss,
        final_loss,
        curve,
        epoch_losses,
        config: config.clone(),
    };
    if let Some(dir) = out {
        explainer.save(dir)?;
        factlens_core::jsonl::write_json(dir.join("training_log.json"), &log)?;
        factlens_core::jsonl::write_json(dir.join("generation_config.json"), config)?;
    }
    Ok((explainer, log))
}

pub fn checkpoint_dir(out: &Path, epoch: usize) -> PathBuf {
    out.join(format!("epoch-{epoch}"))
}
