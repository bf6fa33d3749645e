use num_complex::Complex64;

use super::dense::ComplexMatrix;
use super::{LinalgError, Result};

/// Compressed-sparse-row complex matrix.
///
/// Column indices are strictly increasing within each row and no explicit
/// zeros are stored; `from_triplets` sums duplicates and drops entries whose
/// sum is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComplexMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseComplexMatrix {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < rows && c < cols, "triplet ({r},{c}) out of bounds");
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows_done = 0usize;
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            while rows_done <= r {
                row_offsets[rows_done] = values.len();
                rows_done += 1;
            }
            col_indices.push(c);
            values.push(v);
        }
        while rows_done <= rows {
            row_offsets[rows_done] = values.len();
            rows_done += 1;
        }
        Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(
            n,
            n,
            (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of one row as parallel (column, value) slices.
    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            m.set(i, j, v);
        }
        m
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != x.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "sparse matvec {}x{} * {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Sparse x dense product. Per-row accumulation runs over stored columns
    /// in ascending order, matching the dense path's ascending-k order.
    pub fn matmul_dense(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != b.rows() {
            return Err(LinalgError::DimensionMismatch(format!(
                "sparse matmul {}x{} * {}x{}",
                self.rows,
                self.cols,
                b.rows(),
                b.cols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, b.cols());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for j in 0..b.cols() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (&k, &v) in cols.iter().zip(vals) {
                    acc += v * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn conj_transpose(&self) -> SparseComplexMatrix {
        let triplets = self.iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        SparseComplexMatrix::from_triplets(self.cols, self.rows, triplets)
    }

    pub fn hermitian_deviation(&self) -> Option<f64> {
        if self.rows != self.cols {
            return None;
        }
        let mut dev: f64 = 0.0;
        for (i, j, v) in self.iter() {
            dev = dev.max((v - self.get(j, i).conj()).norm());
        }
        Some(dev)
    }

    pub fn scale(&self, s: Complex64) -> SparseComplexMatrix {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= s;
        }
        out
    }
}
