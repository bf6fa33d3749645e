use nalgebra::DMatrix;
use num_complex::Complex64;

use super::dense::ComplexMatrix;
use super::{LinalgError, Result};

/// Default tolerance for the Hermitian precondition check.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues (ascending, real) and a unitary eigenvector matrix whose
/// columns are the eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    /// Rebuilds U diag(lambda) U-dagger; test-side reconstruction checks go
    /// through this.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += u.get(i, k) * self.eigenvalues[k] * u.get(j, k).conj();
            }
            acc
        })
    }
}

/// Full eigendecomposition of a Hermitian matrix with the default
/// Hermitian-check tolerance.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    hermitian_eig_with_tol(m, HERMITIAN_TOL)
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// The N x N Hermitian problem H = A + iB is reduced to the 2N x 2N real
/// symmetric problem [[A, -B], [B, A]]; its eigenvalues are those of H with
/// doubled multiplicity and a real eigenvector [x; y] maps back to the
/// complex eigenvector x + iy. The doubled spectrum is deduplicated by
/// orthonormalizing mapped candidates per eigenvalue cluster and keeping one
/// complex vector per pair.
pub fn hermitian_eig_with_tol(m: &ComplexMatrix, tol: f64) -> Result<SpectralDecomposition> {
    if m.rows() != m.cols() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let dev = m.hermitian_deviation().unwrap();
    if dev > tol {
        return Err(LinalgError::NotHermitian {
            max_deviation: dev,
            tol,
        });
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }

    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m.get(i, j);
            real[(i, j)] = z.re;
            real[(i, j + n)] = -z.im;
            real[(i + n, j)] = z.im;
            real[(i + n, j + n)] = z.re;
        }
    }
    let se = real.symmetric_eigen();

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));

    let scale = order
        .iter()
        .map(|&k| se.eigenvalues[k].abs())
        .fold(0.0f64, f64::max);
    let cluster_tol = 1e-8 * scale.max(1.0);

    for &accept_tol in &[1e-6, 1e-10] {
        if let Some(decomp) = extract_basis(n, &se, &order, cluster_tol, accept_tol) {
            return Ok(decomp);
        }
    }
    Err(LinalgError::EigenbasisIncomplete {
        recovered: 0,
        expected: n,
    })
}

fn extract_basis(
    n: usize,
    se: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    order: &[usize],
    cluster_tol: f64,
    accept_tol: f64,
) -> Option<SpectralDecomposition> {
    let mut accepted: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(n);
    for &k in order {
        if accepted.len() == n {
            break;
        }
        let lambda = se.eigenvalues[k];
        let col = se.eigenvectors.column(k);
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(col[i], col[i + n]))
            .collect();
        // project out previously accepted vectors from the same cluster
        for (mu, u) in accepted.iter().rev() {
            if (lambda - mu).abs() > cluster_tol {
                break;
            }
            let proj: Complex64 = u
                .iter()
                .zip(&v)
                .map(|(a, b)| a.conj() * b)
                .sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > accept_tol {
            for z in v.iter_mut() {
                *z /= norm;
            }
            accepted.push((lambda, v));
        }
    }
    if accepted.len() < n {
        return None;
    }
    let eigenvalues: Vec<f64> = accepted.iter().map(|(l, _)| *l).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| accepted[j].1[i]);
    Some(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
