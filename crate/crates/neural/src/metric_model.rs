//! Encoder-only quality predictors: one binary classifier per binary
//! dimension and a single-output regressor for the quality rating.

use std::path::Path;

use candle_core::{Device, Tensor, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW, VarMap};
use factlens_core::annotation::{Dimension, MetricExample};
use factlens_core::metrics::{
    majority_class, mean_label, regression_eval, ConfusionMatrix, RegressionReport,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    dropout, ids_tensor, padding_bias, scalar_f32, sinusoidal_positions, Attention, FeedForward, Linear,
    ParamInit, RmsNorm,
};
use crate::schedule::LinearWarmupDecay;
use crate::tokenizer::{Tokenizer, EOS, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    BinaryClassifier,
    Regressor,
}

impl Head {
    pub fn for_dimension(dim: Dimension) -> Self {
        if dim.is_binary() {
            Head::BinaryClassifier
        } else {
            Head::Regressor
        }
    }

    fn outputs(self) -> usize {
        match self {
            Head::BinaryClassifier => 2,
            Head::Regressor => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub family: String,
    pub vocab_size: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub dropout: f32,
    pub max_positions: usize,
    pub head: Head,
}

pub const ENCODER_FAMILIES: &[&str] = &["encoder-base", "encoder-large"];

impl EncoderConfig {
    pub fn family(name: &str, head: Head) -> Option<Self> {
        let (d_model, heads, d_ff, layers) = match name {
            "encoder-base" => (256, 4, 1024, 4),
            "encoder-large" => (512, 8, 2048, 8),
            _ => return None,
        };
        Some(EncoderConfig {
            family: name.to_string(),
            vocab_size: 0,
            d_model,
            heads,
            d_ff,
            layers,
            dropout: 0.1,
            max_positions: 512,
            head,
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricModelConfig {
    /// Registered encoder family or checkpoint directory.
    pub checkpoint: String,
    pub max_seq_len: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
    pub vocab_size: usize,
    /// Overrides the family's dropout when set.
    pub dropout: Option<f32>,
}

impl Default for MetricModelConfig {
    fn default() -> Self {
        MetricModelConfig {
            checkpoint: "encoder-base".into(),
            max_seq_len: 512,
            batch_size: 4,
            learning_rate: 3e-6,
            epochs: 4,
            warmup_steps: 40,
            weight_decay: 0.0,
            max_grad_norm: 1.0,
            seed: 42,
            vocab_size: 32_000,
            dropout: None,
        }
    }
}

impl MetricModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_seq_len < 2 {
            return Err(Error::Config(format!(
                "max_seq_len {} is too small",
                self.max_seq_len
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        Ok(())
    }
}

struct Layer {
    norm1: RmsNorm,
    attn: Attention,
    norm2: RmsNorm,
    ff: FeedForward,
}

/// Transformer encoder, mean-pooled over real tokens, with a linear head.
pub struct EncoderModel {
    config: EncoderConfig,
    embedding: Tensor,
    positions: Tensor,
    layers: Vec<Layer>,
    final_norm: RmsNorm,
    head: Linear,
    head_bias: Tensor,
    device: Device,
}

impl EncoderModel {
    pub fn new(config: EncoderConfig, p: &mut ParamInit) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let embedding = p.normal("embedding", &[config.vocab_size, d], 1.0)?;
        let mut layers = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            p.push(format!("layer.{i}"));
            layers.push(Layer {
                norm1: RmsNorm::new(p, "norm1", d)?,
                attn: Attention::new(p, "attn", d, config.heads)?,
                norm2: RmsNorm::new(p, "norm2", d)?,
                ff: FeedForward::new(p, "ff", d, config.d_ff)?,
            });
            p.pop();
        }
        let final_norm = RmsNorm::new(p, "final_norm", d)?;
        let outputs = config.head.outputs();
        let head = Linear::new(p, "head.weight", d, outputs)?;
        let head_bias = p.constant("head.bias", &[outputs], 0.0)?;
        let device = p.device().clone();
        let positions = sinusoidal_positions(config.max_positions, d, &device)?;
        Ok(EncoderModel {
            config,
            embedding,
            positions,
            layers,
            final_norm,
            head,
            head_bias,
            device,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Head outputs `(batch, outputs)`.
    pub fn forward(&self, inputs: &[Vec<u32>], mut rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let (ids, lengths) = ids_tensor(inputs, PAD, &self.device)?;
        let (b, t) = ids.dims2()?;
        if t > self.config.max_positions {
            return Err(Error::InvalidInput(format!(
                "sequence of {t} tokens exceeds the {} supported positions",
                self.config.max_positions
            )));
        }
        let d = self.config.d_model;
        let rate = self.config.dropout;
        let tokens = self
            .embedding
            .index_select(&ids.flatten_all()?, 0)?
            .reshape((b, t, d))?
            .broadcast_add(&self.positions.narrow(0, 0, t)?.unsqueeze(0)?)?;
        let bias = padding_bias(&lengths, t, &self.device)?;
        let mut h = dropout(&tokens, rate, rng.as_deref_mut())?;
        for layer in &self.layers {
            let x = layer.norm1.forward(&h)?;
            let a = layer.attn.forward(&x, &x, Some(&bias))?;
            h = (h + dropout(&a, rate, rng.as_deref_mut())?)?;
            let x = layer.norm2.forward(&h)?;
            let f = layer.ff.forward(&x)?;
            h = (h + dropout(&f, rate, rng.as_deref_mut())?)?;
        }
        let h = self.final_norm.forward(&h)?;
        let mask: Vec<f32> = lengths
            .iter()
            .flat_map(|&len| (0..t).map(move |j| if j < len { 1.0 / len as f32 } else { 0.0 }))
            .collect();
        let mask = Tensor::from_vec(mask, (b, t, 1), &self.device)?;
        let pooled = h.broadcast_mul(&mask)?.sum(1)?;
        let pooled = dropout(&pooled, rate, rng)?;
        Ok(self.head.forward(&pooled)?.broadcast_add(&self.head_bias)?)
    }

    /// Cross-entropy for the classifier, squared error for the regressor.
    pub fn loss(&self, inputs: &[Vec<u32>], targets: &[f64], rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let out = self.forward(inputs, rng)?;
        match self.config.head {
            Head::BinaryClassifier => {
                let labels: Vec<u32> = targets.iter().map(|&t| (t >= 0.5) as u32).collect();
                let labels = Tensor::from_vec(labels, (targets.len(), 1), &self.device)?;
                let log_probs = candle_nn::ops::log_softmax(&out, D::Minus1)?;
                Ok(log_probs.gather(&labels, 1)?.mean_all()?.neg()?)
            }
            Head::Regressor => {
                let y: Vec<f32> = targets.iter().map(|&t| t as f32).collect();
                let y = Tensor::from_vec(y, (targets.len(), 1), &self.device)?;
                Ok(out.sub(&y)?.sqr()?.mean_all()?)
            }
        }
    }
}

/// A trained predictor together with its vocabulary and target dimension.
pub struct MetricModel {
    model: EncoderModel,
    varmap: VarMap,
    tokenizer: Tokenizer,
    dimension: Dimension,
    max_seq_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    dimension: Dimension,
    max_seq_len: usize,
}

const CONFIG_FILE: &str = "config.json";
const META_FILE: &str = "metric.json";
const VOCAB_FILE: &str = "vocab.json";
const WEIGHTS_FILE: &str = "model.safetensors";

impl MetricModel {
    /// Fresh model of an arbitrary architecture with a vocabulary built from
    /// `texts`; `config.vocab_size` and `config.head` are filled in.
    pub fn from_config<'a>(
        mut config: EncoderConfig,
        dimension: Dimension,
        texts: impl IntoIterator<Item = &'a str>,
        vocab_size: usize,
        max_seq_len: usize,
        seed: u64,
    ) -> Result<Self> {
        let tokenizer = Tokenizer::build(texts, vocab_size, 1);
        config.vocab_size = tokenizer.vocab_size();
        config.head = Head::for_dimension(dimension);
        let mut init = ParamInit::new(seed, Device::Cpu);
        let model = EncoderModel::new(config, &mut init)?;
        Ok(MetricModel {
            model,
            varmap: init.into_varmap(),
            tokenizer,
            dimension,
            max_seq_len,
        })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        let config: EncoderConfig = serde_json::from_str(&read(CONFIG_FILE)?)
            .map_err(|e| Error::Config(format!("{}: {e}", dir.join(CONFIG_FILE).display())))?;
        let meta: Meta = serde_json::from_str(&read(META_FILE)?)
            .map_err(|e| Error::Config(format!("{}: {e}", dir.join(META_FILE).display())))?;
        let tokenizer = Tokenizer::load(dir.join(VOCAB_FILE))?;
        if tokenizer.vocab_size() != config.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} entries but the model expects {}",
                tokenizer.vocab_size(),
                config.vocab_size
            )));
        }
        let mut init = ParamInit::new(0, Device::Cpu);
        let model = EncoderModel::new(config, &mut init)?;
        let mut varmap = init.into_varmap();
        varmap.load(dir.join(WEIGHTS_FILE))?;
        Ok(MetricModel {
            model,
            varmap,
            tokenizer,
            dimension: meta.dimension,
            max_seq_len: meta.max_seq_len,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        write(
            CONFIG_FILE,
            serde_json::to_string_pretty(self.model.config()).expect("serializable config"),
        )?;
        let meta = Meta {
            dimension: self.dimension,
            max_seq_len: self.max_seq_len,
        };
        write(
            META_FILE,
            serde_json::to_string_pretty(&meta).expect("serializable meta"),
        )?;
        self.tokenizer.save(dir.join(VOCAB_FILE))?;
        self.varmap.save(dir.join(WEIGHTS_FILE))?;
        Ok(())
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn config(&self) -> &EncoderConfig {
        self.model.config()
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        let budget = self.max_seq_len.min(self.model.config().max_positions);
        let mut ids = self.tokenizer.encode(text);
        ids.truncate(budget - 1);
        ids.push(EOS);
        ids
    }

    /// Raw scores: positive-class probability for classifiers, the
    /// predicted rating for the regressor.
    pub fn scores(&self, texts: &[&str]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(16) {
            let ids: Vec<Vec<u32>> = chunk.iter().map(|t| self.encode(t)).collect();
            let logits = self.model.forward(&ids, None)?;
            let values = match self.model.config().head {
                Head::BinaryClassifier => candle_nn::ops::softmax(&logits, D::Minus1)?
                    .narrow(1, 1, 1)?
                    .flatten_all()?,
                Head::Regressor => logits.flatten_all()?,
            };
            out.extend(values.to_vec1::<f32>()?.into_iter().map(f64::from));
        }
        Ok(out)
    }

    pub fn predict_labels(&self, texts: &[&str]) -> Result<Vec<bool>> {
        Ok(self.scores(texts)?.into_iter().map(|p| p >= 0.5).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub step: usize,
    pub epoch: usize,
    pub loss: f32,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTrainingLog {
    pub dimension: Dimension,
    pub examples: usize,
    pub curve: Vec<MetricPoint>,
    pub epoch_losses: Vec<f32>,
    pub config: MetricModelConfig,
}

/// Texts and targets of the examples labelled for `dim`.
pub fn labelled(examples: &[MetricExample], dim: Dimension) -> (Vec<&str>, Vec<f64>) {
    examples
        .iter()
        .filter_map(|e| e.target(dim).map(|t| (e.text.as_str(), t)))
        .unzip()
}

/// Trains a predictor for `dim`. Examples without a label for the dimension
/// are skipped. Per-epoch checkpoints are not kept; the final model and the
/// training log go to `out` when given.
pub fn train_metric_model(
    examples: &[MetricExample],
    dim: Dimension,
    config: &MetricModelConfig,
    out: Option<&Path>,
) -> Result<(MetricModel, MetricTrainingLog)> {
    config.validate()?;
    let (texts, _) = labelled(examples, dim);
    let path = Path::new(&config.checkpoint);
    let model = if path.join(CONFIG_FILE).is_file() {
        let m = MetricModel::load(path)?;
        if m.dimension != dim {
            return Err(Error::Config(format!(
                "checkpoint predicts {} but {dim} was requested",
                m.dimension
            )));
        }
        m
    } else {
        let mut arch = if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<EncoderConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            EncoderConfig::family(&config.checkpoint, Head::for_dimension(dim))
                .ok_or_else(|| Error::UnknownCheckpoint(config.checkpoint.clone()))?
        };
        if let Some(rate) = config.dropout {
            arch.dropout = rate;
        }
        MetricModel::from_config(
            arch,
            dim,
            texts.iter().copied(),
            config.vocab_size,
            config.max_seq_len,
            config.seed,
        )?
    };
    fit(model, examples, config, out)
}

/// Trains an already constructed model on its dimension.
pub fn fit(
    model: MetricModel,
    examples: &[MetricExample],
    config: &MetricModelConfig,
    out: Option<&Path>,
) -> Result<(MetricModel, MetricTrainingLog)> {
    config.validate()?;
    let dim = model.dimension;
    let (texts, targets) = labelled(examples, dim);
    if texts.is_empty() {
        return Err(Error::InvalidInput(format!("no examples carry a {dim} label")));
    }
    if dim.is_binary() {
        let positives = targets.iter().filter(|&&t| t >= 0.5).count();
        if positives == 0 || positives == targets.len() {
            return Err(Error::InvalidInput(format!(
                "every {dim} training label is {}; a classifier needs both classes",
                positives > 0
            )));
        }
    }
    let ids: Vec<Vec<u32>> = texts.iter().map(|t| model.encode(t)).collect();
    let steps_per_epoch = ids.len().div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let schedule = LinearWarmupDecay::new(config.learning_rate, config.warmup_steps, total);
    let vars = model.varmap.all_vars();
    let mut opt = AdamW::new(
        vars.clone(),
        ParamsAdamW {
            lr: schedule.at(0),
            weight_decay: config.weight_decay,
            ..Default::default()
        },
    )?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut curve = Vec::with_capacity(total);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut sum = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let lr = schedule.at(step);
            opt.set_learning_rate(lr);
            let inputs: Vec<Vec<u32>> = batch.iter().map(|&i| ids[i].clone()).collect();
            let y: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let loss = model.model.loss(&inputs, &y, Some(&mut dropout_rng))?;
            let value = scalar_f32(&loss)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    epoch,
                    loss: value,
                });
            }
            let mut grads = loss.backward()?;
            crate::explainer::clip_grad_norm(&mut grads, &vars, config.max_grad_norm)?;
            opt.step(&grads)?;
            step += 1;
            sum += value as f64 * batch.len() as f64;
            curve.push(MetricPoint {
                step,
                epoch,
                loss: value,
                learning_rate: lr,
            });
        }
        let epoch_loss = (sum / ids.len() as f64) as f32;
        tracing::info!(dimension = %dim, epoch, loss = epoch_loss, "epoch finished");
        epoch_losses.push(epoch_loss);
    }
    let log = MetricTrainingLog {
        dimension: dim,
        examples: ids.len(),
        curve,
        epoch_losses,
        config: config.clone(),
    };
    if let Some(dir) = out {
        model.save(dir)?;
        factlens_core::jsonl::write_json(dir.join("training_log.json"), &log)?;
    }
    Ok((model, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationEval {
    pub mcc: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub baseline_mcc: f64,
    pub baseline_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEval {
    pub report: RegressionReport,
    pub baseline: RegressionReport,
    pub baseline_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSuite {
    Classification(ClassificationEval),
    Regression(RegressionEval),
}

impl EvalSuite {
    /// The headline number: MCC for classifiers, Spearman for the regressor.
    pub fn primary(&self) -> f64 {
        match self {
            EvalSuite::Classification(c) => c.mcc,
            EvalSuite::Regression(r) => r.report.spearman,
        }
    }
}

/// Classifier: MCC against a majority-class baseline fitted on `train`.
/// Regressor: MAE/MSE/Spearman against a mean-label baseline fitted on
/// `train`.
pub fn evaluate(model: &MetricModel, train: &[MetricExample], eval: &[MetricExample]) -> Result<EvalSuite> {
    let dim = model.dimension;
    let (_, train_targets) = labelled(train, dim);
    let (texts, targets) = labelled(eval, dim);
    if texts.is_empty() || train_targets.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no labelled {dim} examples to evaluate"
        )));
    }
    let scores = model.scores(&texts)?;
    if dim.is_binary() {
        let labels: Vec<bool> = targets.iter().map(|&t| t >= 0.5).collect();
        let preds: Vec<bool> = scores.iter().map(|&p| p >= 0.5).collect();
        let confusion = ConfusionMatrix::from_predictions(&preds, &labels)?;
        let train_labels: Vec<bool> = train_targets.iter().map(|&t| t >= 0.5).collect();
        let baseline_class = majority_class(&train_labels);
        let baseline = ConfusionMatrix::from_predictions(&vec![baseline_class; labels.len()], &labels)?;
        Ok(EvalSuite::Classification(ClassificationEval {
            mcc: confusion.mcc(),
            accuracy: confusion.accuracy(),
            confusion,
            baseline_mcc: baseline.mcc(),
            baseline_class,
        }))
    } else {
        let baseline_value = mean_label(&train_targets);
        Ok(EvalSuite::Regression(RegressionEval {
            report: regression_eval(&scores, &targets)?,
            baseline: regression_eval(&vec![baseline_value; targets.len()], &targets)?,
            baseline_value,
        }))
    }
}

/// One rerun of the protocol: a fresh seeded split of `examples` (with
/// `eval_fraction` held out), training and evaluation. Returns the headline
/// metric.
pub fn rerun(
    examples: &[MetricExample],
    dim: Dimension,
    config: &MetricModelConfig,
    eval_fraction: f64,
    seed: u64,
) -> Result<f64> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Config(format!(
            "eval fraction {eval_fraction} outside (0, 1)"
        )));
    }
    let mut pool: Vec<&MetricExample> = examples.iter().filter(|e| e.target(dim).is_some()).collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((pool.len() as f64) * (1.0 - eval_fraction)).floor() as usize;
    let train: Vec<MetricExample> = pool[..cut].iter().map(|&e| e.clone()).collect();
    let eval: Vec<MetricExample> = pool[cut..].iter().map(|&e| e.clone()).collect();
    let run_config = MetricModelConfig {
        seed,
        ..config.clone()
    };
    let (model, _) = train_metric_model(&train, dim, &run_config, None)?;
    Ok(evaluate(&model, &train, &eval)?.primary())
}
