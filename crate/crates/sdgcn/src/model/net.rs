//! Forward pass with a gradient tape, hand-derived reverse-mode backward
//! pass, and the link-sign prediction head.
//!
//! Gradient convention for complex parameters: the stored gradient of a
//! complex quantity w is dL/dRe(w) + i dL/dIm(w). Under that convention,
//! for C = M W the gradients are dW = M-dagger G and dM = G W-dagger, where
//! G is the incoming gradient of C.

use num_complex::Complex64;

use super::{ModelError, Result, SdGcnModel};
use crate::graph::Edge;
use crate::linalg::{ComplexMatrix, RealMatrix, SparseComplexMatrix};

/// Every intermediate needed by the backward pass.
#[derive(Debug, Clone)]
pub struct GradientTape {
    /// X_0, the input signal
    pub input: ComplexMatrix,
    /// M_l = Y X_{l-1}, per layer
    pub propagated: Vec<ComplexMatrix>,
    /// complex ReLU pass mask per layer, row-major over (node, channel)
    pub masks: Vec<Vec<bool>>,
    /// X_l after activation, per layer
    pub activations: Vec<ComplexMatrix>,
    /// [Re(X_L) | Im(X_L)], N x 2 F_L
    pub unwound: RealMatrix,
    /// real ReLU pass mask of the embedding head
    pub embed_mask: Vec<bool>,
    /// node embeddings, N x D
    pub embeddings: RealMatrix,
}

/// Gradients packed in the same order as `SdGcnModel::pack`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub flat: Vec<f64>,
}

/// Runs the network: L spectral convolutions with complex ReLU, unwinding
/// into a real matrix, and the linear + ReLU embedding head.
pub fn forward(
    model: &SdGcnModel,
    operator: &SparseComplexMatrix,
    x: &ComplexMatrix,
) -> Result<GradientTape> {
    if x.cols() != model.widths[0] {
        return Err(ModelError::WidthMismatch {
            got: x.cols(),
            want: model.widths[0],
        });
    }
    let n = x.rows();
    let mut propagated = Vec::with_capacity(model.num_layers());
    let mut masks = Vec::with_capacity(model.num_layers());
    let mut activations = Vec::with_capacity(model.num_layers());
    let mut cur = x.clone();
    for layer in &model.layers {
        let m = operator.matmul_dense(&cur)?;
        let mut z = m.matmul(&layer.weight)?;
        let f_out = z.cols();
        let mut mask = vec![false; n * f_out];
        for i in 0..n {
            for j in 0..f_out {
                let v = z.get(i, j) + layer.bias_value(j);
                // complex ReLU: pass z iff Re(z) >= 0
                if v.re >= 0.0 {
                    z.set(i, j, v);
                    mask[i * f_out + j] = true;
                } else {
                    z.set(i, j, Complex64::new(0.0, 0.0));
                }
            }
        }
        propagated.push(m);
        masks.push(mask);
        activations.push(z.clone());
        cur = z;
    }

    let f_last = *model.widths.last().unwrap();
    let unwound = RealMatrix::from_fn(n, 2 * f_last, |i, j| {
        if j < f_last {
            cur.get(i, j).re
        } else {
            cur.get(i, j - f_last).im
        }
    });
    let mut embeddings = unwound.matmul(&model.w_unwind);
    let d = model.embed_dim;
    let mut embed_mask = vec![false; n * d];
    for i in 0..n {
        for j in 0..d {
            let v = embeddings.get(i, j) + model.b_unwind[j];
            if v >= 0.0 {
                embeddings.set(i, j, v);
                embed_mask[i * d + j] = true;
            } else {
                embeddings.set(i, j, 0.0);
            }
        }
    }
    Ok(GradientTape {
        input: x.clone(),
        propagated,
        masks,
        activations,
        unwound,
        embed_mask,
        embeddings,
    })
}

fn logits(model: &SdGcnModel, embeddings: &RealMatrix, u: usize, v: usize) -> [f64; 2] {
    let d = model.embed_dim;
    let (eu, ev) = (embeddings.row(u), embeddings.row(v));
    let mut z = [model.b_predict[0], model.b_predict[1]];
    for k in 0..2 {
        for j in 0..d {
            z[k] += eu[j] * model.w_predict.get(j, k) + ev[j] * model.w_predict.get(d + j, k);
        }
    }
    z
}

fn softmax2(z: [f64; 2]) -> ([f64; 2], f64) {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    ([(z[0] - lse).exp(), (z[1] - lse).exp()], lse)
}

/// Class probabilities [p(positive), p(negative)] for the link (u, v).
pub fn predict_link(model: &SdGcnModel, embeddings: &RealMatrix, u: usize, v: usize) -> [f64; 2] {
    softmax2(logits(model, embeddings, u, v)).0
}

/// Positive-class scores and hard predictions (p_pos >= 1/2) per edge.
pub fn predict_batch(
    model: &SdGcnModel,
    embeddings: &RealMatrix,
    edges: &[Edge],
) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::with_capacity(edges.len());
    let mut preds = Vec::with_capacity(edges.len());
    for e in edges {
        let p = predict_link(model, embeddings, e.source, e.target)[0];
        scores.push(p);
        preds.push(p >= 0.5);
    }
    (scores, preds)
}

/// Mean negative log-likelihood of the edge signs.
pub fn nll_loss(model: &SdGcnModel, embeddings: &RealMatrix, edges: &[Edge]) -> f64 {
    assert!(!edges.is_empty(), "loss over an empty edge set");
    let mut loss = 0.0;
    for e in edges {
        let z = logits(model, embeddings, e.source, e.target);
        let (_, lse) = softmax2(z);
        let cls = if e.sign > 0 { 0 } else { 1 };
        loss += lse - z[cls];
    }
    loss / edges.len() as f64
}

/// Reverse-mode pass for the mean NLL over `edges`; returns the loss and the
/// packed gradient vector.
pub fn backward(
    model: &SdGcnModel,
    operator: &SparseComplexMatrix,
    tape: &GradientTape,
    edges: &[Edge],
) -> Result<(f64, Gradients)> {
    assert!(!edges.is_empty(), "backward over an empty edge set");
    let n = tape.embeddings.rows();
    let d = model.embed_dim;
    let batch = edges.len() as f64;

    let mut d_embed = RealMatrix::zeros(n, d);
    let mut d_wp = RealMatrix::zeros(2 * d, 2);
    let mut d_bp = [0.0f64; 2];
    let mut loss = 0.0;
    for e in edges {
        let z = logits(model, &tape.embeddings, e.source, e.target);
        let (p, lse) = softmax2(z);
        let cls = if e.sign > 0 { 0 } else { 1 };
        loss += lse - z[cls];
        let mut g = p;
        g[cls] -= 1.0;
        g[0] /= batch;
        g[1] /= batch;
        let (eu, ev): (Vec<f64>, Vec<f64>) = (
            tape.embeddings.row(e.source).to_vec(),
            tape.embeddings.row(e.target).to_vec(),
        );
        for k in 0..2 {
            d_bp[k] += g[k];
            for j in 0..d {
                d_wp.set(j, k, d_wp.get(j, k) + eu[j] * g[k]);
                d_wp.set(d + j, k, d_wp.get(d + j, k) + ev[j] * g[k]);
                d_embed.set(
                    e.source,
                    j,
                    d_embed.get(e.source, j) + model.w_predict.get(j, k) * g[k],
                );
                d_embed.set(
                    e.target,
                    j,
                    d_embed.get(e.target, j) + model.w_predict.get(d + j, k) * g[k],
                );
            }
        }
    }
    loss /= batch;

    // embedding head ReLU gate
    for i in 0..n {
        for j in 0..d {
            if !tape.embed_mask[i * d + j] {
                d_embed.set(i, j, 0.0);
            }
        }
    }
    let d_wu = tape.unwound.transpose().matmul(&d_embed);
    let mut d_bu = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            d_bu[j] += d_embed.get(i, j);
        }
    }
    // back through the unwinding: real and imaginary halves recombine into
    // one complex gradient of X_L
    let d_unwound = d_embed.matmul(&model.w_unwind.transpose());
    let f_last = *model.widths.last().unwrap();
    let mut g = ComplexMatrix::from_fn(n, f_last, |i, j| {
        Complex64::new(d_unwound.get(i, j), d_unwound.get(i, j + f_last))
    });

    let operator_h = operator.conj_transpose();
    let mut d_weights: Vec<ComplexMatrix> = Vec::with_capacity(model.num_layers());
    let mut d_biases: Vec<Vec<f64>> = Vec::with_capacity(model.num_layers());
    for l in (0..model.num_layers()).rev() {
        let f_out = model.widths[l + 1];
        for i in 0..n {
            for j in 0..f_out {
                if !tape.masks[l][i * f_out + j] {
                    g.set(i, j, Complex64::new(0.0, 0.0));
                }
            }
        }
        let m = &tape.propagated[l];
        let dw = m.conj_transpose().matmul(&g)?;
        // bias b_j = t_j (1 + i): chain through both components
        let mut db = vec![0.0; f_out];
        for i in 0..n {
            for j in 0..f_out {
                let z = g.get(i, j);
                db[j] += z.re + z.im;
            }
        }
        d_weights.push(dw);
        d_biases.push(db);
        if l > 0 {
            let dm = g.matmul(&model.layers[l].weight.conj_transpose())?;
            g = operator_h.matmul_dense(&dm)?;
        }
    }
    d_weights.reverse();
    d_biases.reverse();

    // pack in the exact order of SdGcnModel::pack
    let mut flat = Vec::new();
    for (dw, db) in d_weights.iter().zip(&d_biases) {
        for z in dw.data() {
            flat.push(z.re);
            flat.push(z.im);
        }
        flat.extend_from_slice(db);
    }
    flat.extend_from_slice(d_wu.data());
    flat.extend_from_slice(&d_bu);
    flat.extend_from_slice(d_wp.data());
    flat.extend_from_slice(&d_bp);
    Ok((loss, Gradients { flat }))
}
