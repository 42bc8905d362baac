use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::DinesModel;
use crate::decoder::predict_sign;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{Edge, EdgeSplit, Sign, SignedDigraph};
use crate::metrics::{auc, macro_f1, Confusion};
use crate::numerics::{AdamConfig, ParamStore, Tape, Tensor};

/// Loss and timing of one optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub forward_seconds: f64,
    pub step_seconds: f64,
}

/// Full-batch optimizer state over a fixed message-passing graph and a
/// fixed set of labelled edges.
pub struct Trainer {
    pub model: DinesModel,
    pub store: ParamStore,
    graph: SignedDigraph,
    features: Tensor,
    edges: Arc<[(usize, usize)]>,
    labels: Arc<[f64]>,
    adam: AdamConfig,
    lambda_disc: f64,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, graph: SignedDigraph, features: &FeatureMatrix, edges: &[Edge]) -> Result<Self> {
        cfg.validate()?;
        if edges.is_empty() {
            return Err(Error::usage("no training edges"));
        }
        if features.dim() != cfg.encoder.d_in {
            return Err(Error::shape("train", &[features.rows(), features.dim()], &[graph.node_count(), cfg.encoder.d_in]));
        }
        let mut store = ParamStore::new();
        let model = DinesModel::new(cfg, &mut store)?;
        Ok(Trainer {
            model,
            store,
            graph,
            features: features.values().clone(),
            edges: edges.iter().map(|e| (e.src, e.dst)).collect(),
            labels: edges.iter().map(|e| e.sign.label()).collect(),
            adam: AdamConfig::new(cfg.learning_rate, cfg.weight_decay),
            lambda_disc: cfg.lambda_disc,
            epoch: 0,
        })
    }

    pub fn graph(&self) -> &SignedDigraph {
        &self.graph
    }

    /// Forward pass and loss only.
    pub fn loss(&self) -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(self.features.clone())?;
        let fwd = self
            .model
            .forward(&mut tape, &self.store, &self.graph, x, &self.edges, &self.labels, self.lambda_disc)?;
        Ok(tape.scalar(fwd.loss))
    }

    /// One epoch: forward, backward and an Adam update.
    pub fn step(&mut self) -> Result<StepStats> {
        self.epoch += 1;
        let epoch = self.epoch;
        let diverged = |e: Error| match e {
            Error::NonFinite { .. } => Error::Diverged { epoch, loss: f64::NAN },
            other => other,
        };
        let start = Instant::now();
        let mut tape = Tape::new();
        let x = tape.leaf(self.features.clone())?;
        let fwd = self
            .model
            .forward(&mut tape, &self.store, &self.graph, x, &self.edges, &self.labels, self.lambda_disc)
            .map_err(diverged)?;
        let loss = tape.scalar(fwd.loss);
        let forward_seconds = start.elapsed().as_secs_f64();
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let grads = tape.backward(fwd.loss).map_err(diverged)?;
        drop(tape);
        self.store.zero_grads();
        self.store.accumulate(&grads);
        self.store.adam_step(&self.adam).map_err(diverged)?;
        Ok(StepStats {
            loss,
            forward_seconds,
            step_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Trained weights plus per-epoch traces.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: DinesModel,
    pub store: ParamStore,
    pub losses: Vec<f64>,
    pub forward_seconds: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

impl TrainOutcome {
    pub fn mean_forward_seconds(&self) -> f64 {
        mean(&self.forward_seconds)
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        mean(&self.epoch_seconds)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Trains on the split's training edges, passing messages over the
/// training graph only.
pub fn train(split: &EdgeSplit, features: &FeatureMatrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if features.rows() != split.node_count {
        return Err(Error::shape("train", &[features.rows()], &[split.node_count]));
    }
    let mut trainer = Trainer::new(cfg, split.train_graph(), features, &split.train)?;
    let mut out = TrainOutcome {
        model: trainer.model.clone(),
        store: ParamStore::new(),
        losses: Vec::with_capacity(cfg.epochs),
        forward_seconds: Vec::with_capacity(cfg.epochs),
        epoch_seconds: Vec::with_capacity(cfg.epochs),
    };
    for _ in 0..cfg.epochs {
        let s = trainer.step()?;
        log::debug!("epoch {} loss {:.6}", out.losses.len() + 1, s.loss);
        out.losses.push(s.loss);
        out.forward_seconds.push(s.forward_seconds);
        out.epoch_seconds.push(s.step_seconds);
    }
    out.store = trainer.store;
    Ok(out)
}

/// Test-set metrics of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Percent.
    pub auc: f64,
    /// Percent.
    pub macro_f1: f64,
    pub f1_positive: f64,
    pub f1_negative: f64,
    pub confusion: Confusion,
    pub test_edges: usize,
    /// Mean wall-clock seconds of a forward pass per epoch during training.
    pub forward_seconds: f64,
    /// Mean wall-clock seconds of a full training epoch.
    pub train_seconds: f64,
}

/// Probability assigned to one test edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePrediction {
    pub src: usize,
    pub dst: usize,
    pub label: Sign,
    pub probability: f64,
}

/// Scores the split's test edges with embeddings computed over the
/// training graph.
pub fn predict_test(model: &DinesModel, store: &ParamStore, split: &EdgeSplit, features: &FeatureMatrix) -> Result<Vec<EdgePrediction>> {
    let pairs: Vec<(usize, usize)> = split.test.iter().map(|e| (e.src, e.dst)).collect();
    let probs = model.predict(store, &split.train_graph(), features.values(), &pairs)?;
    Ok(split
        .test
        .iter()
        .zip(probs)
        .map(|(e, p)| EdgePrediction {
            src: e.src,
            dst: e.dst,
            label: e.sign,
            probability: p,
        })
        .collect())
}

/// AUC and Macro-F1 of a set of predictions. Timing fields are zero.
pub fn report_from_predictions(preds: &[EdgePrediction]) -> Result<EvalReport> {
    let scores: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let labels: Vec<bool> = preds.iter().map(|p| p.label.is_positive()).collect();
    let signs: Vec<Sign> = preds.iter().map(|p| p.label).collect();
    let predicted: Vec<Sign> = scores.iter().map(|&p| predict_sign(p)).collect();
    let f1 = macro_f1(&predicted, &signs)?;
    Ok(EvalReport {
        auc: auc(&scores, &labels)?,
        macro_f1: f1.macro_f1,
        f1_positive: f1.f1_positive,
        f1_negative: f1.f1_negative,
        confusion: f1.confusion,
        test_edges: preds.len(),
        forward_seconds: 0.0,
        train_seconds: 0.0,
    })
}

pub fn evaluate(outcome: &TrainOutcome, split: &EdgeSplit, features: &FeatureMatrix) -> Result<(EvalReport, Vec<EdgePrediction>)> {
    let preds = predict_test(&outcome.model, &outcome.store, split, features)?;
    let mut report = report_from_predictions(&preds)?;
    report.forward_seconds = outcome.mean_forward_seconds();
    report.train_seconds = outcome.mean_epoch_seconds();
    Ok((report, preds))
}
