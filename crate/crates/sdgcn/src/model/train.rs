//! Full-batch training loop with per-epoch positive resampling, best
//! validation checkpointing, and patience-based early stopping.

use super::net::{backward, forward, nll_loss, predict_batch};
use super::{
    build_operator, init_features, Adam, ModelError, Result, SdGcnModel, TrainConfig,
};
use crate::graph::{sample_training_batch, split_edges, Edge, EdgeSplit, SignedDigraph};
use crate::linalg::{ComplexMatrix, SparseComplexMatrix};
use crate::metrics::{auc, confusion, f1_suite, EvalReport};
use crate::spectral::PhaseParams;

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// parameters from the best-validation epoch
    pub model: SdGcnModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub split: EdgeSplit,
    /// propagation operator built from the training subgraph only
    pub operator: SparseComplexMatrix,
    /// input signal built from the training subgraph only
    pub features: ComplexMatrix,
}

/// Trains one model on a per-sign stratified split of `g`. The propagation
/// operator and (for degree features) the input signal see only training
/// edges, so validation and test signs never leak into the forward pass.
pub fn train(g: &SignedDigraph, config: &TrainConfig) -> Result<TrainOutcome> {
    let split = split_edges(g, config.seed, config.split_ratios)?;
    let train_graph = g.with_edges(split.train_edges(g));
    let params = PhaseParams::with_epsilon(config.q, config.epsilon)?;
    let operator = build_operator(&train_graph, &params);
    let features = init_features(&train_graph, config.features, config.seed);
    let val_edges = split.validation_edges(g);

    let mut model = SdGcnModel::init(config, config.seed);
    let mut flat = model.pack();
    let trainable = model.trainable_mask();
    let mut adam = Adam::new(config.learning_rate, config.weight_decay, flat.len());

    let mut history = Vec::new();
    let mut best_flat = flat.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut prev_val = f64::INFINITY;
    let mut rising = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let batch =
            sample_training_batch(g, &split, config.positive_ratio, config.seed, epoch as u64);
        let tape = forward(&model, &operator, &features)?;
        let (train_loss, grads) = backward(&model, &operator, &tape, &batch.edges)?;
        if !train_loss.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        adam.step(&mut flat, &grads.flat, &trainable);
        model.unpack(&flat);

        let tape = forward(&model, &operator, &features)?;
        let val_loss = nll_loss(&model, &tape.embeddings, &val_edges);
        if !val_loss.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        let (scores, _) = predict_batch(&model, &tape.embeddings, &val_edges);
        let labels: Vec<bool> = val_edges.iter().map(|e| e.sign > 0).collect();
        let val_auc = auc(&scores, &labels).unwrap_or(f64::NAN);
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_auc,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_flat = flat.clone();
            best_epoch = epoch;
        }
        if val_loss > prev_val {
            rising += 1;
            if rising >= config.patience {
                stopped_early = true;
                break;
            }
        } else {
            rising = 0;
        }
        prev_val = val_loss;
    }

    model.unpack(&best_flat);
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        stopped_early,
        split,
        operator,
        features,
    })
}

/// Scores a trained model on an edge set: AUC over positive-class
/// probabilities plus the F1 family over hard predictions.
pub fn evaluate(
    model: &SdGcnModel,
    operator: &SparseComplexMatrix,
    features: &ComplexMatrix,
    edges: &[Edge],
    seed: u64,
) -> Result<EvalReport> {
    let tape = forward(model, operator, features)?;
    let (scores, preds) = predict_batch(model, &tape.embeddings, edges);
    let labels: Vec<bool> = edges.iter().map(|e| e.sign > 0).collect();
    let auc = auc(&scores, &labels)?;
    let f1 = f1_suite(&preds, &labels)?;
    let counts = confusion(&preds, &labels)?;
    Ok(EvalReport {
        auc,
        macro_f1: f1.macro_f1,
        micro_f1: f1.micro_f1,
        binary_f1: f1.binary_f1,
        counts,
        n_edges: edges.len(),
        seed,
    })
}
