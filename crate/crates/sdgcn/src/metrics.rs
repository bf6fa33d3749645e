//! Link sign prediction metrics: AUC, the F1 family, and multi-seed
//! aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("auc undefined: only one class present")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("aggregation needs at least 2 reports, got {0}")]
    TooFewRuns(usize),
}

/// Confusion counts with the positive edge sign as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fneg: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub binary_f1: f64,
    pub counts: Counts,
    pub n_edges: usize,
    pub seed: u64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "dataset,seed,auc,macro_f1,micro_f1,binary_f1";

    pub fn csv_row(&self, dataset: &str) -> String {
        format!(
            "{},{},{},{},{},{}",
            dataset, self.seed, self.auc, self.macro_f1, self.micro_f1, self.binary_f1
        )
    }
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half; rank-sum formulation, O(n log n).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tie groups (1-based ranks)
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<Counts, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut c = Counts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fneg += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn f1_from(tp: usize, fp: usize, fneg: usize) -> f64 {
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Suite {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub binary_f1: f64,
}

/// binary-F1 scores the positive class; macro-F1 is the unweighted mean of
/// the per-class F1s; micro-F1 pools counts globally (equal to accuracy for
/// binary single-label classification).
pub fn f1_suite(predictions: &[bool], labels: &[bool]) -> Result<F1Suite, MetricsError> {
    let c = confusion(predictions, labels)?;
    let binary_f1 = f1_from(c.tp, c.fp, c.fneg);
    // negative class viewed as positive: tp' = tn, fp' = fn, fn' = fp
    let negative_f1 = f1_from(c.tn, c.fneg, c.fp);
    let macro_f1 = (binary_f1 + negative_f1) / 2.0;
    let n = predictions.len();
    let micro_f1 = (c.tp + c.tn) as f64 / n as f64;
    Ok(F1Suite {
        macro_f1,
        micro_f1,
        binary_f1,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub auc: MetricSummary,
    pub macro_f1: MetricSummary,
    pub micro_f1: MetricSummary,
    pub binary_f1: MetricSummary,
    pub n_runs: usize,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MetricSummary {
        mean,
        std: var.sqrt(),
    }
}

/// Mean and sample standard deviation (n-1 denominator) across runs.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<Aggregate, MetricsError> {
    if reports.len() < 2 {
        return Err(MetricsError::TooFewRuns(reports.len()));
    }
    let pick = |f: fn(&EvalReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    Ok(Aggregate {
        auc: summarize(&pick(|r| r.auc)),
        macro_f1: summarize(&pick(|r| r.macro_f1)),
        micro_f1: summarize(&pick(|r| r.micro_f1)),
        binary_f1: summarize(&pick(|r| r.binary_f1)),
        n_runs: reports.len(),
    })
}
