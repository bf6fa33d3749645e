//! The SD-GCN model: spectral convolution layers over the renormalized
//! propagation operator, complex ReLU, unwinding, embedding and prediction
//! heads, hand-written reverse-mode gradients, and Adam training.

mod adam;
mod net;
mod train;

pub use adam::Adam;
pub use net::{
    backward, forward, nll_loss, predict_batch, predict_link, GradientTape, Gradients,
};
pub use train::{evaluate, train, EpochStats, TrainOutcome};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{derive_seed, GraphError, SignedDigraph};
use crate::linalg::{ComplexMatrix, LinalgError, RealMatrix, SparseComplexMatrix};
use crate::spectral::{
    hermitian_adjacency, magnetic_laplacian, LaplacianKind, PhaseParams, SpectralError,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature width {got} does not match first layer input width {want}")]
    WidthMismatch { got: usize, want: usize },
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint is invalid: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Input signal specification; the node feature matrix X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureSpec {
    /// Real entries ~ N(0, 1/dim), imaginary part zero.
    Gaussian { dim: usize },
    /// Four real columns [in+, in-, out+, out-], log(1+x)-scaled.
    Degree,
}

impl FeatureSpec {
    pub fn width(&self) -> usize {
        match self {
            FeatureSpec::Gaussian { dim } => *dim,
            FeatureSpec::Degree => 4,
        }
    }
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec::Gaussian { dim: 64 }
    }
}

/// Training hyperparameters, defaulting to the reference configuration:
/// q = 0.1 pi, two convolution layers of width 64, 64-dimensional
/// embeddings, Adam with lr 1e-3 and weight decay 1e-5, 3:1 positive
/// sampling, early stop after 10 consecutive epochs of rising validation
/// loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub q: f64,
    pub epsilon: f64,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub positive_ratio: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub features: FeatureSpec,
    pub real_weights: bool,
    pub split_ratios: (f64, f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            q: 0.1 * std::f64::consts::PI,
            epsilon: crate::spectral::DEFAULT_EPSILON,
            num_layers: 2,
            hidden_dim: 64,
            embed_dim: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            positive_ratio: 3.0,
            max_epochs: 300,
            patience: 10,
            seed: 0,
            features: FeatureSpec::default(),
            real_weights: true,
            split_ratios: (0.6, 0.2, 0.2),
        }
    }
}

/// One spectral convolution layer: a complex weight matrix (input channels x
/// output channels) and a per-channel complex bias constrained to
/// real(b) = imag(b), stored as the shared scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: ComplexMatrix,
    /// b_j = bias[j] * (1 + i)
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn bias_value(&self, j: usize) -> Complex64 {
        Complex64::new(self.bias[j], self.bias[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdGcnModel {
    pub layers: Vec<LayerParams>,
    /// 2 F_L x D
    pub w_unwind: RealMatrix,
    pub b_unwind: Vec<f64>,
    /// 2 D x 2 (positive logit column 0, negative column 1)
    pub w_predict: RealMatrix,
    pub b_predict: Vec<f64>,
    /// channel widths F_0 .. F_L
    pub widths: Vec<usize>,
    pub embed_dim: usize,
    /// when set, imaginary parts of layer weights are pinned to zero
    pub real_weights: bool,
}

impl SdGcnModel {
    /// Seeded init: real parts uniform in +-sqrt(6 / (fan_in + fan_out)),
    /// imaginary parts and biases zero.
    pub fn init(config: &TrainConfig, seed: u64) -> Self {
        let mut widths = vec![config.features.width()];
        for _ in 0..config.num_layers {
            widths.push(config.hidden_dim);
        }
        let d = config.embed_dim;
        let f_last = *widths.last().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xC0FFEE));
        let glorot = |fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            rng.gen_range(-s..s)
        };
        let layers = (0..config.num_layers)
            .map(|l| {
                let (fi, fo) = (widths[l], widths[l + 1]);
                LayerParams {
                    weight: ComplexMatrix::from_fn(fi, fo, |_, _| {
                        Complex64::new(glorot(fi, fo, &mut rng), 0.0)
                    }),
                    bias: vec![0.0; fo],
                }
            })
            .collect();
        let w_unwind = RealMatrix::from_fn(2 * f_last, d, |_, _| glorot(2 * f_last, d, &mut rng));
        let w_predict = RealMatrix::from_fn(2 * d, 2, |_, _| glorot(2 * d, 2, &mut rng));
        SdGcnModel {
            layers,
            w_unwind,
            b_unwind: vec![0.0; d],
            w_predict,
            b_predict: vec![0.0; 2],
            widths,
            embed_dim: d,
            real_weights: config.real_weights,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Flattens all parameters into one real vector. Order: per layer the
    /// weight as (re, im) pairs then the bias scalars; then the unwind head;
    /// then the prediction head. The bias Re=Im coupling is built in by
    /// packing the shared scalar once.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for z in layer.weight.data() {
                out.push(z.re);
                out.push(z.im);
            }
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(self.w_unwind.data());
        out.extend_from_slice(&self.b_unwind);
        out.extend_from_slice(self.w_predict.data());
        out.extend_from_slice(&self.b_predict);
        out
    }

    /// Inverse of `pack`.
    pub fn unpack(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        let take = |n: usize, it: &mut dyn Iterator<Item = f64>| -> Vec<f64> {
            it.take(n).collect()
        };
        for layer in &mut self.layers {
            let n = layer.weight.rows() * layer.weight.cols();
            let vals = take(2 * n, &mut it);
            let w = ComplexMatrix::from_fn(layer.weight.rows(), layer.weight.cols(), |i, j| {
                let k = i * layer.weight.cols() + j;
                Complex64::new(vals[2 * k], vals[2 * k + 1])
            });
            layer.weight = w;
            let nb = layer.bias.len();
            layer.bias = take(nb, &mut it);
        }
        let (r, c) = (self.w_unwind.rows(), self.w_unwind.cols());
        self.w_unwind = RealMatrix::from_flat(r, c, take(r * c, &mut it));
        let nb = self.b_unwind.len();
        self.b_unwind = take(nb, &mut it);
        let (r, c) = (self.w_predict.rows(), self.w_predict.cols());
        self.w_predict = RealMatrix::from_flat(r, c, take(r * c, &mut it));
        let nb = self.b_predict.len();
        self.b_predict = take(nb, &mut it);
        debug_assert!(it.next().is_none(), "flat vector longer than parameters");
    }

    /// True for packed slots that train; the imaginary weight components are
    /// frozen in real-weights mode.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for _ in layer.weight.data() {
                out.push(true);
                out.push(!self.real_weights);
            }
            out.extend(std::iter::repeat(true).take(layer.bias.len()));
        }
        let rest = self.w_unwind.data().len()
            + self.b_unwind.len()
            + self.w_predict.data().len()
            + self.b_predict.len();
        out.extend(std::iter::repeat(true).take(rest));
        out
    }
}

/// The renormalized propagation operator
/// D~^{-1/2} (A_s + I) D~^{-1/2} elementwise P (unit diagonal phase),
/// built once per training run and shared by every layer.
pub fn build_operator(g: &SignedDigraph, params: &PhaseParams) -> SparseComplexMatrix {
    let h = hermitian_adjacency(g, params);
    magnetic_laplacian(&h, LaplacianKind::Renormalized).matrix
}

/// Builds the input signal X (complex N x F_0) for a graph.
pub fn init_features(g: &SignedDigraph, spec: FeatureSpec, seed: u64) -> ComplexMatrix {
    match spec {
        FeatureSpec::Gaussian { dim } => {
            let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xFEA7));
            ComplexMatrix::from_fn(g.num_nodes, dim, |_, _| {
                Complex64::new(normal.sample(&mut rng), 0.0)
            })
        }
        FeatureSpec::Degree => {
            // columns: in+, in-, out+, out-
            let mut counts = vec![[0u32; 4]; g.num_nodes];
            for e in &g.edges {
                let (in_col, out_col) = if e.sign > 0 { (0, 2) } else { (1, 3) };
                counts[e.target][in_col] += 1;
                counts[e.source][out_col] += 1;
            }
            ComplexMatrix::from_fn(g.num_nodes, 4, |i, j| {
                Complex64::new((1.0 + counts[i][j] as f64).ln(), 0.0)
            })
        }
    }
}

/// Versioned on-disk model format: hyper block plus flat parameter vector
/// with a shape manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub widths: Vec<usize>,
    pub embed_dim: usize,
    pub real_weights: bool,
    pub q: f64,
    pub params: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn from_model(model: &SdGcnModel, q: f64) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            widths: model.widths.clone(),
            embed_dim: model.embed_dim,
            real_weights: model.real_weights,
            q,
            params: model.pack(),
        }
    }

    pub fn into_model(self) -> Result<SdGcnModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(ModelError::BadCheckpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.widths.len() < 2 {
            return Err(ModelError::BadCheckpoint("missing layer widths".into()));
        }
        let num_layers = self.widths.len() - 1;
        let config = TrainConfig {
            num_layers,
            hidden_dim: self.widths[1],
            embed_dim: self.embed_dim,
            real_weights: self.real_weights,
            features: FeatureSpec::Gaussian {
                dim: self.widths[0],
            },
            q: self.q,
            ..TrainConfig::default()
        };
        let mut model = SdGcnModel::init(&config, 0);
        // widths may be non-uniform; rebuild the exact shapes before unpack
        if model.widths != self.widths {
            return Err(ModelError::BadCheckpoint(format!(
                "width manifest {:?} does not match rebuildable shape {:?}",
                self.widths, model.widths
            )));
        }
        let expected: usize = model.pack().len();
        if self.params.len() != expected {
            return Err(ModelError::BadCheckpoint(format!(
                "parameter vector length {} does not match manifest ({expected})",
                self.params.len()
            )));
        }
        model.unpack(&self.params);
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_signed_digraph, Edge};
    use crate::model::net::{backward, forward, nll_loss, predict_link};
    use crate::model::train::{evaluate, train};

    fn small_config() -> TrainConfig {
        TrainConfig {
            num_layers: 2,
            hidden_dim: 4,
            embed_dim: 3,
            features: FeatureSpec::Gaussian { dim: 5 },
            real_weights: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pack_unpack_round_trip() {
        let config = small_config();
        let model = SdGcnModel::init(&config, 7);
        let flat = model.pack();
        let mut other = SdGcnModel::init(&config, 99);
        assert_ne!(other.pack(), flat);
        other.unpack(&flat);
        assert_eq!(other, model);
        assert_eq!(model.trainable_mask().len(), flat.len());
    }

    #[test]
    fn trainable_mask_freezes_imaginary_weights() {
        let mut config = small_config();
        config.real_weights = true;
        let model = SdGcnModel::init(&config, 0);
        let mask = model.trainable_mask();
        let mut cursor = 0;
        for layer in &model.layers {
            for _ in layer.weight.data() {
                assert!(mask[cursor]);
                assert!(!mask[cursor + 1]);
                cursor += 2;
            }
            cursor += layer.bias.len();
        }
        assert!(mask[cursor..].iter().all(|&t| t));
    }

    #[test]
    fn forward_shapes_and_mask_consistency() {
        let g = random_signed_digraph(12, 0.3, 0.3, 3);
        let config = small_config();
        let params = PhaseParams::with_epsilon(config.q, config.epsilon).unwrap();
        let operator = build_operator(&g, &params);
        let x = init_features(&g, config.features, 3);
        let model = SdGcnModel::init(&config, 3);
        let tape = forward(&model, &operator, &x).unwrap();
        assert_eq!(tape.activations.len(), 2);
        assert_eq!(tape.activations[1].cols(), 4);
        assert_eq!(tape.unwound.cols(), 8);
        assert_eq!(tape.embeddings.rows(), 12);
        assert_eq!(tape.embeddings.cols(), 3);
        // complex ReLU: masked-off entries are exactly zero, passed entries
        // have nonnegative real part
        for (l, act) in tape.activations.iter().enumerate() {
            for i in 0..act.rows() {
                for j in 0..act.cols() {
                    let z = act.get(i, j);
                    if tape.masks[l][i * act.cols() + j] {
                        assert!(z.re >= 0.0);
                    } else {
                        assert_eq!(z, Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
        for (k, &m) in tape.embed_mask.iter().enumerate() {
            let v = tape.embeddings.get(k / 3, k % 3);
            if m {
                assert!(v >= 0.0);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn feature_width_mismatch_is_rejected() {
        let g = random_signed_digraph(6, 0.4, 0.3, 1);
        let config = small_config();
        let params = PhaseParams::new(config.q).unwrap();
        let operator = build_operator(&g, &params);
        let x = init_features(&g, FeatureSpec::Gaussian { dim: 9 }, 1);
        let model = SdGcnModel::init(&config, 1);
        assert!(matches!(
            forward(&model, &operator, &x),
            Err(ModelError::WidthMismatch { got: 9, want: 5 })
        ));
    }

    #[test]
    fn degree_features_count_signed_directions() {
        let g = SignedDigraph {
            num_nodes: 3,
            edges: vec![
                Edge { source: 0, target: 1, sign: 1 },
                Edge { source: 2, target: 1, sign: -1 },
                Edge { source: 1, target: 0, sign: -1 },
            ],
            original_ids: vec![0, 1, 2],
        };
        let x = init_features(&g, FeatureSpec::Degree, 0);
        let ln2 = 2.0f64.ln();
        // node 1: in+ = 1, in- = 1, out+ = 0, out- = 1
        assert_eq!(x.get(1, 0).re, ln2);
        assert_eq!(x.get(1, 1).re, ln2);
        assert_eq!(x.get(1, 2).re, 0.0);
        assert_eq!(x.get(1, 3).re, ln2);
        assert!(x.data().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn prediction_is_a_distribution_and_loss_matches() {
        let g = random_signed_digraph(10, 0.3, 0.4, 5);
        let config = small_config();
        let params = PhaseParams::new(config.q).unwrap();
        let operator = build_operator(&g, &params);
        let x = init_features(&g, config.features, 5);
        let model = SdGcnModel::init(&config, 5);
        let tape = forward(&model, &operator, &x).unwrap();
        let p = predict_link(&model, &tape.embeddings, 0, 1);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.0 && p[1] > 0.0);
        // an all-zero head gives uniform probabilities and loss ln 2
        let mut zeroed = model.clone();
        let zeros = vec![0.0; zeroed.pack().len()];
        zeroed.unpack(&zeros);
        let tape = forward(&zeroed, &operator, &x).unwrap();
        let loss = nll_loss(&zeroed, &tape.embeddings, &g.edges);
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = random_signed_digraph(8, 0.4, 0.35, 11);
        let config = small_config();
        let params = PhaseParams::with_epsilon(config.q, config.epsilon).unwrap();
        let operator = build_operator(&g, &params);
        let x = init_features(&g, config.features, 11);
        let mut model = SdGcnModel::init(&config, 11);
        // jitter every parameter (biases included) away from ReLU boundaries
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let mut flat = model.pack();
        for p in flat.iter_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        model.unpack(&flat);

        let tape = forward(&model, &operator, &x).unwrap();
        let (_, grads) = backward(&model, &operator, &tape, &g.edges).unwrap();
        assert_eq!(grads.flat.len(), flat.len());

        let h = 1e-5;
        let mut worst = 0.0f64;
        for k in 0..flat.len() {
            let mut probe = model.clone();
            let mut bumped = flat.clone();
            bumped[k] += h;
            probe.unpack(&bumped);
            let t = forward(&probe, &operator, &x).unwrap();
            let up = nll_loss(&probe, &t.embeddings, &g.edges);
            bumped[k] = flat[k] - h;
            probe.unpack(&bumped);
            let t = forward(&probe, &operator, &x).unwrap();
            let down = nll_loss(&probe, &t.embeddings, &g.edges);
            let fd = (up - down) / (2.0 * h);
            let an = grads.flat[k];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(rel < 1e-4, "param {k}: fd {fd} vs analytic {an} (rel {rel})");
        }
        assert!(worst < 1e-4);
    }

    #[test]
    fn adam_weight_decay_shrinks_parameters() {
        let mut params = vec![1.0, -2.0];
        let grads = vec![0.0, 0.0];
        let mut adam = Adam::new(1e-2, 1e-1, 2);
        for _ in 0..50 {
            adam.step(&mut params, &grads, &[true, true]);
        }
        assert!(params[0] > 0.0 && params[0] < 1.0);
        assert!(params[1] < 0.0 && params[1] > -2.0);
    }

    #[test]
    fn adam_respects_frozen_slots() {
        let mut params = vec![1.0, 1.0];
        let grads = vec![0.5, 0.5];
        let mut adam = Adam::new(1e-2, 0.0, 2);
        adam.step(&mut params, &grads, &[true, false]);
        assert!(params[0] < 1.0);
        assert_eq!(params[1], 1.0);
    }

    /// Planted trust structure: the second half of the nodes is distrusted,
    /// so every edge pointing at them is negative. Learnable by a per-node
    /// score on the target embedding.
    fn planted_trust_graph(seed: u64) -> SignedDigraph {
        use rand::Rng;
        let n = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.gen::<f64>() < 0.35 {
                    edges.push(Edge {
                        source: u,
                        target: v,
                        sign: if v < n / 2 { 1 } else { -1 },
                    });
                }
            }
        }
        SignedDigraph {
            num_nodes: n,
            edges,
            original_ids: (0..n as u64).collect(),
        }
    }

    #[test]
    fn learns_planted_trust_signs() {
        let g = planted_trust_graph(17);
        let config = TrainConfig {
            num_layers: 2,
            hidden_dim: 16,
            embed_dim: 16,
            features: FeatureSpec::Gaussian { dim: 16 },
            max_epochs: 150,
            seed: 17,
            ..TrainConfig::default()
        };
        let out = train(&g, &config).unwrap();
        let report = evaluate(
            &out.model,
            &out.operator,
            &out.features,
            &out.split.test_edges(&g),
            config.seed,
        )
        .unwrap();
        assert!(report.auc > 0.95, "test AUC {}", report.auc);
        assert!(!out.history.is_empty());
        assert_eq!(out.history[0].epoch, 1);
    }

    #[test]
    fn training_is_deterministic() {
        let g = planted_trust_graph(23);
        let config = TrainConfig {
            hidden_dim: 8,
            embed_dim: 8,
            features: FeatureSpec::Gaussian { dim: 8 },
            max_epochs: 20,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train(&g, &config).unwrap();
        let b = train(&g, &config).unwrap();
        assert_eq!(a.model.pack(), b.model.pack());
        assert_eq!(a.history.len(), b.history.len());
        for (x, y) in a.history.iter().zip(&b.history) {
            assert_eq!(x.train_loss, y.train_loss);
            assert_eq!(x.val_loss, y.val_loss);
            assert_eq!(x.val_auc, y.val_auc);
        }
    }

    #[test]
    fn real_weights_mode_keeps_imaginary_parts_zero() {
        let g = planted_trust_graph(31);
        let config = TrainConfig {
            hidden_dim: 8,
            embed_dim: 8,
            features: FeatureSpec::Gaussian { dim: 8 },
            max_epochs: 10,
            real_weights: true,
            ..TrainConfig::default()
        };
        let out = train(&g, &config).unwrap();
        for layer in &out.model.layers {
            assert!(layer.weight.data().iter().all(|z| z.im == 0.0));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let config = small_config();
        let model = SdGcnModel::init(&config, 13);
        let ckpt = Checkpoint::from_model(&model, config.q);
        let json = serde_json::to_string(&ckpt).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        let restored = back.into_model().unwrap();
        assert_eq!(restored, model);
    }

    #[test]
    fn checkpoint_rejects_bad_version_and_length() {
        let config = small_config();
        let model = SdGcnModel::init(&config, 13);
        let mut ckpt = Checkpoint::from_model(&model, config.q);
        ckpt.version = 99;
        assert!(matches!(
            ckpt.clone().into_model(),
            Err(ModelError::BadCheckpoint(_))
        ));
        ckpt.version = CHECKPOINT_VERSION;
        ckpt.params.pop();
        assert!(matches!(
            ckpt.into_model(),
            Err(ModelError::BadCheckpoint(_))
        ));
    }
}
