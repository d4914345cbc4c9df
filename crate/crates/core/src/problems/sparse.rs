use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linop::{LinearOperator, OperatorKind};

/// Compressed-row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_rows];
        for (i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::Domain(format!(
                    "triplet ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y = Mᵀ x`
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let triplets = (0..self.n_rows).flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v)));
        Self::from_triplets(self.n_cols, self.n_rows, triplets.collect::<Vec<_>>())
            .expect("transpose indices stay in range")
    }

    /// `self * other`
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: other.n_rows,
            });
        }
        let mut triplets = Vec::new();
        for i in 0..self.n_rows {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    *acc.entry(j).or_insert(0.0) += a * b;
                }
            }
            triplets.extend(acc.into_iter().map(|(j, v)| (i, j, v)));
        }
        Self::from_triplets(self.n_rows, other.n_cols, triplets)
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| {
                let mut row = vec![0.0; self.n_cols];
                for (j, v) in self.row(i) {
                    row[j] = v;
                }
                row
            })
            .collect()
    }
}

/// Square symmetric sparse operator.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    matrix: CsrMatrix,
    kind: OperatorKind,
}

impl SparseOperator {
    pub fn new(matrix: CsrMatrix, kind: OperatorKind) -> Result<Self> {
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n_rows(),
                found: matrix.n_cols(),
            });
        }
        if !matrix.is_symmetric() {
            return Err(Error::NotSymmetric { asymmetry: f64::NAN });
        }
        Ok(Self { matrix, kind })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.matrix.n_rows()
    }
    fn kind(&self) -> OperatorKind {
        self.kind
    }
    fn name(&self) -> &'static str {
        "sparse"
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y);
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.matrix.diagonal_entries())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_sorted_and_summed() {
        let m = CsrMatrix::from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, 3.0)])
            .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (2, 1.5)]);
        assert_eq!(m.get(1, 1), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn matmul_and_transpose_agree_with_dense() {
        let a = CsrMatrix::from_triplets(2, 3, [(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(3, 2, [(0, 1, 3.0), (1, 0, 4.0), (2, 0, 1.0)]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.to_dense_rows(), vec![vec![2.0, 3.0], vec![-4.0, 0.0]]);
        let at = a.transpose();
        assert_eq!(at.to_dense_rows(), vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![2.0, 0.0]]);
        let mut y = [0.0; 3];
        a.matvec_transpose(&[1.0, 2.0], &mut y);
        assert_eq!(y, [1.0, -2.0, 2.0]);
    }
}
