//! Phase matrix, complex Hermitian adjacency, magnetic Laplacians, and the
//! spectral operators built on them (PSD verification, graph Fourier
//! transform, Chebyshev filtering).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::SignedDigraph;
use crate::linalg::{
    hermitian_eig, ComplexMatrix, LinalgError, SparseComplexMatrix, SpectralDecomposition,
};

/// Default denominator guard in the phase-matrix normalization.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Default node cap for eigendecomposition-backed operations.
pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid phase params: {0}")]
    InvalidParams(String),
    #[error("graph has {n} nodes, above the dense-path cap {cap}; verify an induced subgraph instead")]
    SizeCap { n: usize, cap: usize },
    #[error("chebyshev filter needs at least one coefficient")]
    EmptyCoefficients,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Phase-control parameter q in [0, pi/2] and the epsilon denominator guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    q: f64,
    epsilon: f64,
}

impl PhaseParams {
    pub fn new(q: f64) -> Result<Self> {
        Self::with_epsilon(q, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(q: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&q) {
            return Err(SpectralError::InvalidParams(format!(
                "q = {q} outside [0, pi/2]"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(SpectralError::InvalidParams(format!(
                "epsilon = {epsilon} must be > 0"
            )));
        }
        Ok(Self { q, epsilon })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Normalized phase value for one unordered pair, oriented u -> v.
/// `s_uv`/`s_vu` are the signs of the u->v / v->u edges, 0 when absent.
///
/// The angle cases are Theta in {q, pi+q, 0} and Theta-bar in {-q, pi-q, 0};
/// the pi offsets are applied as exact negations of e^{+-iq} so that
/// opposite-sign terms cancel to exactly zero and sign flips negate the
/// numerator exactly.
fn phase_entry(params: &PhaseParams, s_uv: i8, s_vu: i8) -> Complex64 {
    let fwd = Complex64::from_polar(1.0, params.q); // e^{iq}
    let mut num = Complex64::new(0.0, 0.0);
    match s_uv {
        1 => num += fwd,
        -1 => num -= fwd, // e^{i(pi+q)} = -e^{iq}
        _ => {}
    }
    match s_vu {
        1 => num += fwd.conj(),
        -1 => num -= fwd.conj(), // e^{i(pi-q)} = -e^{-iq}
        _ => {}
    }
    num / (num.norm() + params.epsilon)
}

/// Collects per-unordered-pair edge signs: (u, v, sign of u->v, sign of v->u)
/// with u < v.
fn pair_signs(g: &SignedDigraph) -> Vec<(usize, usize, i8, i8)> {
    let mut map: std::collections::BTreeMap<(usize, usize), (i8, i8)> =
        std::collections::BTreeMap::new();
    for e in &g.edges {
        let (key, fwd) = if e.source < e.target {
            ((e.source, e.target), true)
        } else {
            ((e.target, e.source), false)
        };
        let entry = map.entry(key).or_insert((0, 0));
        if fwd {
            entry.0 = e.sign;
        } else {
            entry.1 = e.sign;
        }
    }
    map.into_iter()
        .map(|((u, v), (suv, svu))| (u, v, suv, svu))
        .collect()
}

/// The phase matrix: unit-modulus entries (up to epsilon slack) encoding edge
/// direction and sign; Hermitian by construction, zero where no edge exists
/// in either direction.
pub fn phase_matrix(g: &SignedDigraph, params: &PhaseParams) -> SparseComplexMatrix {
    let mut triplets = Vec::new();
    for (u, v, suv, svu) in pair_signs(g) {
        let p = phase_entry(params, suv, svu);
        triplets.push((u, v, p));
        triplets.push((v, u, p.conj()));
    }
    SparseComplexMatrix::from_triplets(g.num_nodes, g.num_nodes, triplets)
}

/// Complex Hermitian adjacency H = A_s (elementwise) P, together with the
/// symmetrized adjacency A_s and its degree vector D_s.
#[derive(Debug, Clone)]
pub struct HermitianAdjacency {
    pub matrix: SparseComplexMatrix,
    pub sym_adjacency: SparseComplexMatrix,
    /// diagonal of D_s
    pub sym_degree: Vec<f64>,
    pub params: PhaseParams,
}

pub fn hermitian_adjacency(g: &SignedDigraph, params: &PhaseParams) -> HermitianAdjacency {
    let n = g.num_nodes;
    let mut h_triplets = Vec::new();
    let mut a_triplets = Vec::new();
    let mut degree = vec![0.0f64; n];
    for (u, v, suv, svu) in pair_signs(g) {
        // A_s(u,v) = (A(u,v) + A(v,u)) / 2, an exact dyadic in {1/2, 1}
        let a_s = match (suv != 0, svu != 0) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.5,
            (false, false) => continue,
        };
        let p = phase_entry(params, suv, svu);
        h_triplets.push((u, v, a_s * p));
        h_triplets.push((v, u, a_s * p.conj()));
        a_triplets.push((u, v, Complex64::new(a_s, 0.0)));
        a_triplets.push((v, u, Complex64::new(a_s, 0.0)));
        degree[u] += a_s;
        degree[v] += a_s;
    }
    HermitianAdjacency {
        matrix: SparseComplexMatrix::from_triplets(n, n, h_triplets),
        sym_adjacency: SparseComplexMatrix::from_triplets(n, n, a_triplets),
        sym_degree: degree,
        params: *params,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Unnormalized,
    Normalized,
    /// The renormalized propagation operator of the convolution layer
    /// (self-loops added, degrees recomputed, unit diagonal phase).
    Renormalized,
}

impl std::fmt::Display for LaplacianKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LaplacianKind::Unnormalized => "unnormalized",
            LaplacianKind::Normalized => "normalized",
            LaplacianKind::Renormalized => "renormalized",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct MagneticLaplacian {
    pub matrix: SparseComplexMatrix,
    pub kind: LaplacianKind,
    pub params: PhaseParams,
}

pub fn magnetic_laplacian(h: &HermitianAdjacency, kind: LaplacianKind) -> MagneticLaplacian {
    let n = h.matrix.rows();
    let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();
    match kind {
        LaplacianKind::Unnormalized => {
            // D_s - H
            for (i, j, v) in h.matrix.iter() {
                triplets.push((i, j, -v));
            }
            for (i, &d) in h.sym_degree.iter().enumerate() {
                if d != 0.0 {
                    triplets.push((i, i, Complex64::new(d, 0.0)));
                }
            }
        }
        LaplacianKind::Normalized => {
            // I - (D^{-1/2} A_s D^{-1/2}) elementwise P; isolated nodes keep
            // the unit diagonal with zero off-diagonals
            for i in 0..n {
                triplets.push((i, i, Complex64::new(1.0, 0.0)));
            }
            for (i, j, hv) in h.matrix.iter() {
                let scale = (h.sym_degree[i] * h.sym_degree[j]).sqrt();
                triplets.push((i, j, -hv / scale));
            }
        }
        LaplacianKind::Renormalized => {
            // A~ = A_s + I, D~ from A~, diagonal phase fixed at 1
            let deg_t: Vec<f64> = h.sym_degree.iter().map(|d| d + 1.0).collect();
            for i in 0..n {
                triplets.push((i, i, Complex64::new(1.0 / deg_t[i], 0.0)));
            }
            for (i, j, hv) in h.matrix.iter() {
                let scale = (deg_t[i] * deg_t[j]).sqrt();
                triplets.push((i, j, hv / scale));
            }
        }
    }
    MagneticLaplacian {
        matrix: SparseComplexMatrix::from_triplets(n, n, triplets),
        kind,
        params: h.params,
    }
}

/// Result of the runtime theorem checks: positive semi-definiteness and, for
/// the normalized kind, the [0, 2] eigenvalue interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdReport {
    pub n: usize,
    pub q: f64,
    pub kind: LaplacianKind,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub hermitian_deviation: f64,
    pub pass: bool,
}

pub const PSD_TOL: f64 = 1e-9;

pub fn verify_psd(l: &MagneticLaplacian, dense_cap: usize) -> Result<PsdReport> {
    let n = l.matrix.rows();
    if n > dense_cap {
        return Err(SpectralError::SizeCap { n, cap: dense_cap });
    }
    let dense = l.matrix.to_dense();
    let dev = dense.hermitian_deviation().unwrap();
    // symmetrize for the eigenvalue report; a corrupted matrix still gets
    // min/max values but fails on the deviation
    let sym = dense
        .add(&dense.conj_transpose())
        .map_err(SpectralError::Linalg)?
        .scale(Complex64::new(0.5, 0.0));
    let decomp = hermitian_eig(&sym)?;
    let min = decomp.eigenvalues.first().copied().unwrap_or(0.0);
    let max = decomp.eigenvalues.last().copied().unwrap_or(0.0);
    let bounds_ok = match l.kind {
        LaplacianKind::Unnormalized => min >= -PSD_TOL,
        LaplacianKind::Normalized => min >= -PSD_TOL && max <= 2.0 + PSD_TOL,
        LaplacianKind::Renormalized => min >= -1.0 - PSD_TOL && max <= 1.0 + PSD_TOL,
    };
    Ok(PsdReport {
        n,
        q: l.params.q(),
        kind: l.kind,
        min_eigenvalue: min,
        max_eigenvalue: max,
        hermitian_deviation: dev,
        pass: dev <= PSD_TOL && bounds_ok,
    })
}

/// Graph Fourier transform backed by the dense eigendecomposition of a
/// magnetic Laplacian.
pub struct GraphFourier {
    pub decomposition: SpectralDecomposition,
}

impl GraphFourier {
    pub fn new(l: &MagneticLaplacian, dense_cap: usize) -> Result<Self> {
        let n = l.matrix.rows();
        if n > dense_cap {
            return Err(SpectralError::SizeCap { n, cap: dense_cap });
        }
        let decomposition = hermitian_eig(&l.matrix.to_dense())?;
        Ok(Self { decomposition })
    }

    /// x_hat = U-dagger x
    pub fn transform(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self
            .decomposition
            .eigenvectors
            .conj_transpose()
            .matvec(x)?)
    }

    /// x = U x_hat
    pub fn inverse(&self, x_hat: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.decomposition.eigenvectors.matvec(x_hat)?)
    }
}

/// Largest-magnitude eigenvalue estimate by power iteration (30 steps,
/// 1e-6 relative tolerance, deterministic start vector).
pub fn estimate_lambda_max(m: &SparseComplexMatrix) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    // deterministic non-degenerate start: varying magnitudes, all nonzero
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (i as f64 * 0.734_217).sin() * 0.5, 0.0))
        .collect();
    let mut lambda = 0.0f64;
    for _ in 0..30 {
        let w = m.matvec(&v).expect("square operator");
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        // Rayleigh quotient v-dagger M v / v-dagger v (v is unit)
        let rq: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let next = rq.re;
        v = w.into_iter().map(|z| z / norm).collect();
        if (next - lambda).abs() <= 1e-6 * next.abs().max(1e-12) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Chebyshev-filtered signal: sum_k coeffs[k] T_k(L~) x with
/// L~ = (2/lambda_max) L - I, applied by repeated sparse matvec. lambda_max
/// defaults to 2 for the normalized kind and to a power-iteration estimate
/// otherwise.
pub fn chebyshev_filter(
    l: &MagneticLaplacian,
    coeffs: &[f64],
    x: &ComplexMatrix,
    lambda_max: Option<f64>,
) -> Result<ComplexMatrix> {
    if coeffs.is_empty() {
        return Err(SpectralError::EmptyCoefficients);
    }
    let lam = lambda_max.unwrap_or(match l.kind {
        LaplacianKind::Normalized => 2.0,
        _ => estimate_lambda_max(&l.matrix),
    });
    let n = l.matrix.rows();
    // L~ = (2/lam) L - I
    let mut triplets: Vec<(usize, usize, Complex64)> =
        l.matrix.iter().map(|(i, j, v)| (i, j, v * (2.0 / lam))).collect();
    for i in 0..n {
        triplets.push((i, i, Complex64::new(-1.0, 0.0)));
    }
    let lt = SparseComplexMatrix::from_triplets(n, n, triplets);

    let mut t_prev = x.clone(); // T_0(L~) x = x
    let mut acc = t_prev.scale(Complex64::new(coeffs[0], 0.0));
    if coeffs.len() == 1 {
        return Ok(acc);
    }
    let mut t_cur = lt.matmul_dense(x)?; // T_1(L~) x
    acc = acc.add(&t_cur.scale(Complex64::new(coeffs[1], 0.0)))?;
    for &c in &coeffs[2..] {
        let t_next = lt
            .matmul_dense(&t_cur)?
            .scale(Complex64::new(2.0, 0.0))
            .sub(&t_prev)?;
        acc = acc.add(&t_next.scale(Complex64::new(c, 0.0)))?;
        t_prev = t_cur;
        t_cur = t_next;
    }
    Ok(acc)
}
