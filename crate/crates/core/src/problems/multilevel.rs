//! Geometric V-cycle on nested uniform grids, used as a symmetric positive
//! preconditioner whose quality does not degrade with the mesh width.

use nalgebra::{Cholesky, DVector, Dyn};

use super::grid::GridSpec;
use super::sparse::CsrMatrix;
use super::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linop::{conjugate_gradient, Capabilities, LinearOperator, OperatorKind, INNER_SOLVE_TOL};

#[derive(Debug, Clone, Copy)]
pub struct MultilevelOptions {
    /// Damped Jacobi sweeps before and after the coarse correction.
    pub smoothing_steps: usize,
    pub omega: f64,
    /// Requested number of levels; `None` coarsens as far as nesting allows.
    pub levels: Option<usize>,
}

impl Default for MultilevelOptions {
    fn default() -> Self {
        Self {
            smoothing_steps: 2,
            omega: 2.0 / 3.0,
            levels: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
    /// Interpolation from the next coarser level, absent on the coarsest.
    prolong: Option<CsrMatrix>,
}

/// `P⁻¹` is one symmetric V-cycle; `P` itself is applied by an inner
/// conjugate-gradient solve on `P⁻¹`, preconditioned with `A`.
#[derive(Debug, Clone)]
pub struct MultilevelOperator {
    levels: Vec<Level>,
    coarse: Cholesky<f64, Dyn>,
    opts: MultilevelOptions,
}

/// Bilinear (or linear in 1D) interpolation from `coarse` to `fine`.
fn prolongation(fine: &GridSpec, coarse: &GridSpec) -> Result<CsrMatrix> {
    let fine_nodes = fine.interior_nodes();
    let coarse_index = coarse.index_map();
    let two_d = fine.domain.is_2d();
    let weights = |i: usize| -> Vec<(isize, f64)> {
        if i % 2 == 0 {
            vec![((i / 2) as isize, 1.0)]
        } else {
            vec![(((i - 1) / 2) as isize, 0.5), (((i + 1) / 2) as isize, 0.5)]
        }
    };
    let mut triplets = Vec::new();
    for (row, &(i, j)) in fine_nodes.iter().enumerate() {
        let wy = if two_d { weights(j) } else { vec![(0, 1.0)] };
        for &(ci, wxi) in &weights(i) {
            for &(cj, wyj) in &wy {
                if let Some(col) = coarse_index.lookup(ci, cj) {
                    triplets.push((row, col, wxi * wyj));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine_nodes.len(), coarse.num_unknowns(), triplets)
}

impl MultilevelOperator {
    pub fn new(grid: &GridSpec, opts: MultilevelOptions) -> Result<Self> {
        grid.validate()?;
        if !(opts.omega > 0.0 && opts.omega < 1.0) {
            return Err(Error::Domain(format!("Jacobi damping must be in (0, 1), got {}", opts.omega)));
        }
        let mut grids = vec![*grid];
        loop {
            if let Some(k) = opts.levels {
                if grids.len() == k {
                    break;
                }
            }
            match grids.last().unwrap().coarsened() {
                Some(c) => grids.push(c),
                None => break,
            }
        }
        if let Some(k) = opts.levels {
            if grids.len() < k {
                return Err(Error::Grid(format!(
                    "grid {grid} supports only {} nested levels, {k} requested",
                    grids.len()
                )));
            }
        }

        let mut a = grid.laplacian()?;
        let mut levels = Vec::with_capacity(grids.len());
        for pair in grids.windows(2) {
            let p = prolongation(&pair[0], &pair[1])?;
            let coarse_a = p.transpose().matmul(&a)?.matmul(&p)?;
            levels.push(Level {
                inv_diag: a.diagonal_entries().iter().map(|d| 1.0 / d).collect(),
                a,
                prolong: Some(p),
            });
            a = coarse_a;
        }
        let dense = DenseMatrix::from_rows(&a.to_dense_rows())?;
        let coarse = Cholesky::new(dense.to_nalgebra())
            .ok_or_else(|| Error::Factorization("coarsest-level operator".into()))?;
        levels.push(Level {
            inv_diag: a.diagonal_entries().iter().map(|d| 1.0 / d).collect(),
            a,
            prolong: None,
        });
        Ok(Self { levels, coarse, opts })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// The fine-level stiffness matrix the cycle was built from.
    pub fn fine_operator(&self) -> &CsrMatrix {
        &self.levels[0].a
    }

    fn smooth(&self, level: &Level, r: &[f64], x: &mut [f64], scratch: &mut [f64]) {
        for _ in 0..self.opts.smoothing_steps {
            level.a.matvec(x, scratch);
            for k in 0..x.len() {
                x[k] += self.opts.omega * level.inv_diag[k] * (r[k] - scratch[k]);
            }
        }
    }

    fn vcycle(&self, depth: usize, r: &[f64], x: &mut [f64]) {
        let level = &self.levels[depth];
        let Some(prolong) = &level.prolong else {
            let sol = self.coarse.solve(&DVector::from_column_slice(r));
            x.copy_from_slice(sol.as_slice());
            return;
        };
        let n = r.len();
        let mut scratch = vec![0.0; n];
        x.iter_mut().for_each(|v| *v = 0.0);
        self.smooth(level, r, x, &mut scratch);

        level.a.matvec(x, &mut scratch);
        let defect: Vec<f64> = r.iter().zip(&scratch).map(|(a, b)| a - b).collect();
        let mut coarse_r = vec![0.0; prolong.n_cols()];
        prolong.matvec_transpose(&defect, &mut coarse_r);
        let mut coarse_x = vec![0.0; coarse_r.len()];
        self.vcycle(depth + 1, &coarse_r, &mut coarse_x);
        prolong.matvec(&coarse_x, &mut scratch);
        for (xi, ci) in x.iter_mut().zip(&scratch) {
            *xi += ci;
        }

        self.smooth(level, r, x, &mut scratch);
    }
}

/// Exposes the V-cycle as an operator so conjugate gradients can invert it.
#[derive(Debug)]
struct CycleAsOperator<'a>(&'a MultilevelOperator);

impl LinearOperator for CycleAsOperator<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.0.vcycle(0, x, y);
    }
}

impl LinearOperator for MultilevelOperator {
    fn dim(&self) -> usize {
        self.levels[0].a.n_rows()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Preconditioner
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }
    fn name(&self) -> &'static str {
        "multilevel"
    }

    /// Best effort: returns the last inner iterate if the solve stalls.
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        if self.levels.len() == 1 {
            self.levels[0].a.matvec(x, y);
            return;
        }
        let fine = &self.levels[0].a;
        let precond = |r: &[f64], z: &mut [f64]| -> Result<()> {
            fine.matvec(r, z);
            Ok(())
        };
        let _ = conjugate_gradient(
            &CycleAsOperator(self),
            Some(&precond),
            x,
            y,
            INNER_SOLVE_TOL,
            10 * self.dim() + 100,
        );
    }

    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        self.vcycle(0, r, w);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::dot;
    use crate::problems::grid::Domain;

    #[test]
    fn prolongation_reproduces_linear_functions_1d() {
        let fine = GridSpec::new(Domain::Interval, 0.125).unwrap();
        let coarse = fine.coarsened().unwrap();
        let p = prolongation(&fine, &coarse).unwrap();
        // coarse nodes at x = 0.25, 0.5, 0.75; sample x(1-x) is not linear,
        // but a hat at the middle coarse node interpolates exactly
        let mut y = vec![0.0; 7];
        p.matvec(&[0.0, 1.0, 0.0], &mut y);
        assert_eq!(y, vec![0.0, 0.0, 0.5, 1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn single_level_is_exact_inverse() {
        let grid = GridSpec::interval_nodes(3).unwrap();
        let ml = MultilevelOperator::new(&grid, MultilevelOptions { levels: Some(1), ..Default::default() })
            .unwrap();
        assert_eq!(ml.num_levels(), 1);
        let mut w = [0.0; 3];
        ml.solve_into(&[1.0, 0.0, 0.0], &mut w).unwrap();
        let expected = [3.0 / 64.0, 2.0 / 64.0, 1.0 / 64.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn vcycle_is_symmetric_and_apply_inverts_it() {
        let grid = GridSpec::new(Domain::LShape, 0.125).unwrap();
        let ml = MultilevelOperator::new(&grid, MultilevelOptions::default()).unwrap();
        assert_eq!(ml.num_levels(), 3);
        let n = ml.dim();
        let u: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 17 % 7) as f64 - 3.0) / 2.0).collect();
        let mut bu = vec![0.0; n];
        let mut bv = vec![0.0; n];
        ml.solve_into(&u, &mut bu).unwrap();
        ml.solve_into(&v, &mut bv).unwrap();
        let lhs = dot(&bu, &v);
        let rhs = dot(&bv, &u);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        assert!(dot(&bu, &u) > 0.0);

        let mut pu = vec![0.0; n];
        ml.apply_into(&bu, &mut pu);
        let err: f64 = pu.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * dot(&u, &u).sqrt(), "err = {err}");
    }

    #[test]
    fn requesting_too_many_levels_is_a_nesting_error() {
        let grid = GridSpec::interval_nodes(7).unwrap();
        let err = MultilevelOperator::new(&grid, MultilevelOptions { levels: Some(5), ..Default::default() })
            .unwrap_err();
        assert!(matches!(err, Error::Grid(_)));
    }
}
