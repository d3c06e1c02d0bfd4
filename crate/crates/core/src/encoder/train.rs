use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{bce_with_logit, sigmoid, Params};
use super::{EncoderConfig, EncoderError, EncoderModel, Result};
use crate::corpus::{Corpus, Side, Vocabulary};

pub const DEFAULT_TOPICALITY_THRESHOLD: f64 = 0.15;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Documents per gradient work unit. Fixed so that the summation order, and
/// hence the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    TrueLabels,
    /// Sides permuted with a seeded shuffle; class balance is preserved.
    ShuffledLabels,
    /// No training at all; the initial weights are returned.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub label_mode: LabelMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 5e-4,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            label_mode: LabelMode::TrueLabels,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(EncoderError::Config(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(EncoderError::Config(
                "weight_decay must be finite and non-negative".into(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(EncoderError::Config(
                "batch_size and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Binary metrics with liberal as the positive class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ClassificationMetrics {
    /// Precision, recall and F1 are 0 when their denominators are 0.
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Result<Self> {
        if predicted.is_empty() {
            return Err(EncoderError::EmptyCorpus);
        }
        assert_eq!(
            predicted.len(),
            actual.len(),
            "prediction and label counts differ"
        );
        let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fneg += 1,
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Ok(Self {
            precision,
            recall,
            f1,
            accuracy: ratio(tp + tn, predicted.len()),
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fneg,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean BCE over the whole training set after the epoch.
    pub train_loss: f64,
    pub train_f1: f64,
    pub validation: Option<ClassificationMetrics>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The best checkpoint (highest validation F1, or training F1 when the
    /// validation set is empty).
    pub model: EncoderModel,
    pub best_epoch: Option<usize>,
    /// Mean training BCE of the initial weights.
    pub initial_train_loss: f64,
    pub epochs: Vec<EpochMetrics>,
}

/// Documents whose strongest topic reaches `threshold` train; the rest
/// validate. `theta` rows follow corpus order.
pub fn split_by_topicality(
    corpus: &Corpus,
    theta: &Array2<f64>,
    threshold: f64,
) -> Result<(Corpus, Corpus)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EncoderError::Config(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if theta.nrows() != corpus.len() {
        return Err(EncoderError::Config(format!(
            "theta has {} rows for {} documents",
            theta.nrows(),
            corpus.len()
        )));
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (doc, row) in corpus.iter().zip(theta.rows()) {
        let top = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if top >= threshold {
            train.push(doc.clone());
        } else {
            validation.push(doc.clone());
        }
    }
    Ok((
        Corpus::new(train).expect("subset of a valid corpus"),
        Corpus::new(validation).expect("subset of a valid corpus"),
    ))
}

/// Returns the corpus with sides replaced according to `mode`. Shuffling
/// permutes the existing side multiset with a generator seeded by `seed`.
pub fn apply_label_mode(corpus: &Corpus, mode: LabelMode, seed: u64) -> Corpus {
    if mode != LabelMode::ShuffledLabels {
        return corpus.clone();
    }
    let mut sides: Vec<Side> = corpus.iter().map(|d| d.side).collect();
    sides.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let docs = corpus
        .iter()
        .zip(sides)
        .map(|(d, side)| {
            let mut d = d.clone();
            d.side = side;
            d
        })
        .collect();
    Corpus::new(docs).expect("same ids")
}

pub fn evaluate_classifier(model: &EncoderModel, corpus: &Corpus) -> Result<ClassificationMetrics> {
    if corpus.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    let predicted = corpus
        .documents()
        .par_iter()
        .map(|d| model.predict(d).map(|p| p >= 0.5))
        .collect::<Result<Vec<_>>>()?;
    let actual: Vec<bool> = corpus.iter().map(|d| d.side == Side::Liberal).collect();
    ClassificationMetrics::from_predictions(&predicted, &actual)
}

struct Example {
    ids: Vec<u32>,
    target: f64,
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut Params, grads: &Params, lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let grads = grads.buffers();
        for (((p, (_, g)), m), v) in params
            .buffers_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.buffers_mut())
            .zip(self.v.buffers_mut())
        {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                p[i] -= lr * (update + weight_decay * p[i]);
            }
        }
    }
}

fn examples(model: &EncoderModel, corpus: &Corpus) -> Result<Vec<Example>> {
    corpus
        .iter()
        .map(|d| {
            if d.tokens.is_empty() {
                return Err(EncoderError::EmptyDocument(d.id.clone()));
            }
            Ok(Example {
                ids: model.token_ids(&d.tokens),
                target: f64::from(d.side.label()),
            })
        })
        .collect()
}

/// Summed loss and gradient over `batch`, reduced in a fixed order.
fn batch_gradient(params: &Params, config: &EncoderConfig, batch: &[&Example]) -> (f64, Params) {
    let partials: Vec<(f64, Params)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = Params::zeros(config);
            let mut loss = 0.0;
            for ex in chunk {
                let cache = params.forward(&ex.ids, config.n_heads);
                let (l, dlogit) = bce_with_logit(cache.logit, ex.target);
                loss += l;
                params.backward(&cache, dlogit, config.n_heads, &mut grads);
            }
            (loss, grads)
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    (loss, grads)
}

/// Mean loss and F1 of `params` on `data`.
fn full_pass(params: &Params, config: &EncoderConfig, data: &[Example]) -> Result<(f64, f64)> {
    let outputs: Vec<(f64, bool)> = data
        .par_iter()
        .map(|ex| {
            let logit = params.forward(&ex.ids, config.n_heads).logit;
            (bce_with_logit(logit, ex.target).0, sigmoid(logit) >= 0.5)
        })
        .collect();
    let loss = outputs.iter().map(|o| o.0).sum::<f64>() / data.len() as f64;
    let predicted: Vec<bool> = outputs.iter().map(|o| o.1).collect();
    let actual: Vec<bool> = data.iter().map(|e| e.target == 1.0).collect();
    Ok((
        loss,
        ClassificationMetrics::from_predictions(&predicted, &actual)?.f1,
    ))
}

/// Trains a fresh model (weights seeded by `tc.seed`) to predict the side of
/// each document from its pooled state.
pub fn train_partisanship(
    config: EncoderConfig,
    vocab: Vocabulary,
    train: &Corpus,
    validation: &Corpus,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    tc.validate()?;
    let mut model = EncoderModel::new(config, vocab, tc.seed)?;
    let train = apply_label_mode(train, tc.label_mode, tc.seed);
    let validation = apply_label_mode(validation, tc.label_mode, tc.seed.wrapping_add(1));
    let data = examples(&model, &train)?;
    if data.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    let initial_train_loss = full_pass(&model.params, &model.config, &data)?.0;
    if tc.label_mode == LabelMode::None {
        return Ok(TrainOutcome {
            model,
            best_epoch: None,
            initial_train_loss,
            epochs: Vec::new(),
        });
    }
    for side in Side::BOTH {
        if data.iter().all(|e| e.target != f64::from(side.label())) {
            return Err(EncoderError::SingleClass(side.opposite()));
        }
    }

    let config = model.config.clone();
    let mut adam = Adam {
        m: Params::zeros(&config),
        v: Params::zeros(&config),
        t: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x005e_ed0f_0de5);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best: Option<(f64, usize, Params)> = None;
    let mut history = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        for (b, idx) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &data[i]).collect();
            let (loss, mut grads) = batch_gradient(&model.params, &config, &batch);
            if !loss.is_finite() || !grads.all_finite() {
                return Err(EncoderError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!(
                        "batch loss {loss}, lr {}, {} documents",
                        tc.learning_rate,
                        batch.len()
                    ),
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.params, &grads, tc.learning_rate, tc.weight_decay);
        }
        let (train_loss, train_f1) = full_pass(&model.params, &config, &data)?;
        if !train_loss.is_finite() {
            return Err(EncoderError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                detail: "training-set loss after epoch".into(),
            });
        }
        let val = if validation.is_empty() {
            None
        } else {
            Some(evaluate_classifier(&model, &validation)?)
        };
        let score = val.as_ref().map_or(train_f1, |m| m.f1);
        log::info!(
            "epoch {epoch}: train loss {train_loss:.5}, train F1 {train_f1:.4}, selection F1 {score:.4}"
        );
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, epoch, model.params.clone()));
        }
        history.push(EpochMetrics {
            epoch,
            train_loss,
            train_f1,
            validation: val,
        });
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(TrainOutcome {
        model,
        best_epoch: Some(best_epoch),
        initial_train_loss,
        epochs: history,
    })
}
