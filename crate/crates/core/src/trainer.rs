//! Plain SGD with batch size 1, and exact-span precision / recall / F1.

use rand::seq::SliceRandom;

use crate::corpus::{extract_spans_from_tags, EntitySpan, Sentence, TagSet};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::likelihood;
use crate::nn::{CellKind, ModelParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub cell: CellKind,
    pub hidden: usize,
    /// Global L2 gradient-norm ceiling; `None` disables clipping.
    pub clip: Option<f64>,
    /// Keep transition scores at zero (per-token scores only).
    pub freeze_transitions: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            epochs: 21,
            seed: 1,
            cell: CellKind::Lstm,
            hidden: 50,
            clip: Some(5.0),
            freeze_transitions: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden size must be positive"));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::invalid(format!("clip threshold must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_nll: f64,
    /// Overall span F1 on the validation set, when one is supplied.
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub model: ModelParams,
    /// Parameters of the epoch with the highest validation F1 (the final
    /// model when no validation set is given).
    pub best: ModelParams,
    pub best_epoch: usize,
    pub trace: Vec<EpochStats>,
}

pub fn train(
    train_set: &[Sentence],
    dev_set: Option<&[Sentence]>,
    tagset: &TagSet,
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(train_set, dev_set, tagset, embeddings, config, |_| {})
}

/// Same as [`train`], reporting each finished epoch to `on_epoch`.
pub fn train_with(
    train_set: &[Sentence],
    dev_set: Option<&[Sentence]>,
    tagset: &TagSet,
    embeddings: &EmbeddingTable,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut model = ModelParams::init(
        config.cell,
        embeddings.dim(),
        config.hidden,
        tagset.len(),
        config.seed,
    );
    model.hyper.lr = config.lr;
    model.hyper.epochs = config.epochs;
    if config.freeze_transitions {
        model.transitions.as_mut_slice().fill(0.0);
    }
    let inputs: Vec<Vec<Vec<f64>>> = train_set.iter().map(|s| embeddings.sentence_vectors(s)).collect();
    let gold: Vec<Vec<usize>> = train_set.iter().map(Sentence::gold_tags).collect();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_f1 = f64::NEG_INFINITY;
    for epoch in 1..=config.epochs {
        let mut rng = seed::rng(seed::derive(
            seed::derive(config.seed, seed::streams::SHUFFLE),
            epoch as u64,
        ));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let (nll, mut grad) = likelihood::sentence_nll_grad(&model, &inputs[k], &gold[k])?;
            if !nll.is_finite() {
                return Err(Error::Diverged { epoch, sentence: train_set[k].id });
            }
            if config.freeze_transitions {
                grad.transitions.as_mut_slice().fill(0.0);
            }
            if let Some(limit) = config.clip {
                let norm = grad.norm();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            model.add_scaled(&grad, -config.lr);
            if !model.is_finite() {
                return Err(Error::Diverged { epoch, sentence: train_set[k].id });
            }
            total += nll;
        }
        let dev_f1 = match dev_set {
            Some(dev) if !dev.is_empty() => Some(evaluate(&model, dev, tagset, embeddings)?.overall.f1),
            _ => None,
        };
        let stats = EpochStats {
            epoch,
            mean_nll: total / train_set.len() as f64,
            dev_f1,
        };
        on_epoch(&stats);
        // Ties keep the earlier epoch.
        let key = dev_f1.unwrap_or(f64::NEG_INFINITY);
        if dev_f1.is_none() || key > best_f1 {
            best_f1 = key;
            best_epoch = epoch;
            best = model.clone();
        }
        trace.push(stats);
    }
    Ok(TrainOutcome {
        model,
        best,
        best_epoch,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpanCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SpanCounts {
    fn finish(gold: usize, predicted: usize, correct: usize) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(correct, predicted);
        let recall = pct(correct, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        SpanCounts {
            gold,
            predicted,
            correct,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Indexed by entity type id.
    pub per_type: Vec<(String, SpanCounts)>,
    /// Micro-averaged over all types.
    pub overall: SpanCounts,
    pub token_accuracy: f64,
}

/// Exact-match (boundaries and type) span scoring.
pub fn score_spans(gold: &[Vec<EntitySpan>], predicted: &[Vec<EntitySpan>], tagset: &TagSet) -> EvalReport {
    let k = tagset.entity_types().len();
    let mut g = vec![0usize; k];
    let mut p = vec![0usize; k];
    let mut c = vec![0usize; k];
    for (gs, ps) in gold.iter().zip(predicted) {
        for s in gs {
            g[s.etype] += 1;
        }
        for s in ps {
            p[s.etype] += 1;
            if gs.contains(s) {
                c[s.etype] += 1;
            }
        }
    }
    let per_type = (0..k)
        .map(|e| (tagset.entity_type_name(e).to_string(), SpanCounts::finish(g[e], p[e], c[e])))
        .collect();
    let sum = |v: &[usize]| v.iter().sum::<usize>();
    EvalReport {
        per_type,
        overall: SpanCounts::finish(sum(&g), sum(&p), sum(&c)),
        token_accuracy: f64::NAN,
    }
}

/// Viterbi-decode every sentence and score the predicted spans.
pub fn evaluate(model: &ModelParams, sentences: &[Sentence], tagset: &TagSet, embeddings: &EmbeddingTable) -> Result<EvalReport> {
    if model.num_tags() != tagset.len() {
        return Err(Error::Dimension {
            expected: tagset.len(),
            actual: model.num_tags(),
            context: "model tag count",
        });
    }
    let mut gold = Vec::with_capacity(sentences.len());
    let mut pred = Vec::with_capacity(sentences.len());
    let (mut right, mut total) = (0usize, 0usize);
    for s in sentences {
        let tags = likelihood::decode(model, &embeddings.sentence_vectors(s))?;
        let g = s.gold_tags();
        right += tags.iter().zip(&g).filter(|(a, b)| a == b).count();
        total += g.len();
        gold.push(extract_spans_from_tags(&g, tagset)?);
        pred.push(extract_spans_from_tags(&tags, tagset)?);
    }
    let mut report = score_spans(&gold, &pred, tagset);
    report.token_accuracy = if total == 0 { 0.0 } else { right as f64 / total as f64 };
    Ok(report)
}
