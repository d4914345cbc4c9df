use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linop::{Capabilities, LinearOperator, OperatorKind};

/// Square row-major matrix used to assemble dense pencils.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyVector);
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `max |m_ij − m_ji| / max |m_ij|`
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Dense symmetric positive definite operator with a Cholesky-backed inverse.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DenseMatrix,
    factor: Option<Cholesky<f64, Dyn>>,
    kind: OperatorKind,
}

impl DenseOperator {
    /// Checks symmetry (relative 1e-12) and definiteness by factorizing.
    pub fn new(matrix: DenseMatrix, kind: OperatorKind) -> Result<Self> {
        let asym = matrix.asymmetry();
        if asym > 1e-12 {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let factor = Cholesky::new(matrix.to_nalgebra()).ok_or_else(|| {
            Error::Factorization(format!("{kind:?} matrix is not positive definite"))
        })?;
        Ok(Self {
            matrix,
            factor: Some(factor),
            kind,
        })
    }

    /// Wraps without any checks; the inverse falls back to conjugate gradients.
    pub fn new_unchecked(matrix: DenseMatrix, kind: OperatorKind) -> Self {
        Self {
            matrix,
            factor: None,
            kind,
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn kind(&self) -> OperatorKind {
        self.kind
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }
    fn name(&self) -> &'static str {
        "dense"
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y);
    }
    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        match &self.factor {
            Some(f) => {
                let sol = f.solve(&DVector::from_column_slice(r));
                w.copy_from_slice(sol.as_slice());
                Ok(())
            }
            None => crate::linop::conjugate_gradient(
                self,
                None,
                r,
                w,
                crate::linop::INNER_SOLVE_TOL,
                20 * self.dim() + 200,
            ),
        }
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.dim()).map(|i| self.matrix[(i, i)]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            DenseOperator::new(m, OperatorKind::Stiffness),
            Err(Error::NotSymmetric { .. })
        ));
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            DenseOperator::new(m, OperatorKind::Stiffness),
            Err(Error::Factorization(_))
        ));
    }

    #[test]
    fn cholesky_solve_inverts_apply() {
        let m = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.0],
            vec![0.5, 0.0, 2.0],
        ])
        .unwrap();
        let op = DenseOperator::new(m, OperatorKind::Stiffness).unwrap();
        let mut y = [0.0; 3];
        op.apply_into(&[1.0, -2.0, 0.5], &mut y);
        let mut x = [0.0; 3];
        op.solve_into(&y, &mut x).unwrap();
        for (a, b) in x.iter().zip([1.0, -2.0, 0.5]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
