//! Concrete pencils: dense matrices, finite-difference Laplacians on the
//! interval, rectangles and the L-shaped domain, and their preconditioners.

mod dense;
mod grid;
mod multilevel;
mod sparse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use dense::{DenseMatrix, DenseOperator};
pub use grid::{parse_scalar, Domain, GridSpec, NodeIndex};
pub use multilevel::{MultilevelOperator, MultilevelOptions};
pub use sparse::{CsrMatrix, SparseOperator};

use crate::error::{Error, Result};
use crate::linop::{pencil_extremes, Diagonal, Identity, LinearOperator, OperatorKind, PencilBounds, Scaled};

/// Lanczos budget used when measuring preconditioner quality.
const MEASURE_STEPS: usize = 300;

/// Known or measured facts about a pencil.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub id: String,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub grid: Option<GridSpec>,
    /// Measured `‖I − P⁻¹A‖_A` of the attached preconditioner.
    pub gamma_p: Option<f64>,
    pub preconditioner: Option<String>,
}

/// Symmetric positive pencil `A u = λ E u` with preconditioner `P`.
#[derive(Debug, Clone)]
pub struct EigenProblem {
    a: Arc<dyn LinearOperator>,
    e: Arc<dyn LinearOperator>,
    p: Arc<dyn LinearOperator>,
    meta: ProblemMeta,
}

impl EigenProblem {
    pub fn new(
        a: Arc<dyn LinearOperator>,
        e: Arc<dyn LinearOperator>,
        p: Arc<dyn LinearOperator>,
    ) -> Result<Self> {
        let n = a.dim();
        for op in [&e, &p] {
            if op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: op.dim(),
                });
            }
        }
        if n == 0 {
            return Err(Error::EmptyVector);
        }
        Ok(Self {
            a,
            e,
            p,
            meta: ProblemMeta::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &dyn LinearOperator {
        self.a.as_ref()
    }

    pub fn e(&self) -> &dyn LinearOperator {
        self.e.as_ref()
    }

    pub fn p(&self) -> &dyn LinearOperator {
        self.p.as_ref()
    }

    pub fn a_arc(&self) -> Arc<dyn LinearOperator> {
        Arc::clone(&self.a)
    }

    pub fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut ProblemMeta {
        &mut self.meta
    }

    pub fn with_meta(mut self, meta: ProblemMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Swaps in a different preconditioner, recording its measured quality.
    pub fn with_preconditioner(mut self, p: Preconditioner) -> Result<Self> {
        if p.op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.op.dim(),
            });
        }
        self.p = p.op;
        self.meta.gamma_p = Some(p.gamma_p);
        self.meta.preconditioner = Some(p.label);
        Ok(self)
    }
}

/// A preconditioner together with its measured spectral bracket.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub op: Arc<dyn LinearOperator>,
    /// `max |1 − θ|` over the eigenvalues θ of `P⁻¹A`.
    pub gamma_p: f64,
    pub bounds: PencilBounds,
    pub label: String,
}

/// Wraps dense matrices as a pencil; each must be symmetric positive definite.
pub fn dense_problem(a: DenseMatrix, e: DenseMatrix, p: DenseMatrix) -> Result<EigenProblem> {
    let a = DenseOperator::new(a, OperatorKind::Stiffness)?;
    let e = DenseOperator::new(e, OperatorKind::Mass)?;
    let p = DenseOperator::new(p, OperatorKind::Preconditioner)?;
    let mut problem = EigenProblem::new(Arc::new(a), Arc::new(e), Arc::new(p))?;
    problem.meta.id = "dense".into();
    Ok(problem)
}

/// Finite-difference Dirichlet Laplacian with lumped (identity) mass and the
/// multilevel preconditioner attached.
pub fn fd_laplacian(grid: &GridSpec) -> Result<EigenProblem> {
    fd_laplacian_with(grid, PreconditionerChoice::Multilevel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerChoice {
    Jacobi,
    Multilevel,
    Identity,
}

impl std::str::FromStr for PreconditionerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jacobi" | "diagonal" => Ok(Self::Jacobi),
            "multilevel" | "mg" => Ok(Self::Multilevel),
            "identity" | "scaled-identity" => Ok(Self::Identity),
            other => Err(Error::Parse(format!("unknown preconditioner `{other}`"))),
        }
    }
}

pub fn fd_laplacian_with(grid: &GridSpec, choice: PreconditionerChoice) -> Result<EigenProblem> {
    let a = SparseOperator::new(grid.laplacian()?, OperatorKind::Stiffness)?;
    let n = a.dim();
    let a: Arc<dyn LinearOperator> = Arc::new(a);
    let e: Arc<dyn LinearOperator> = Arc::new(Identity::new(n).with_kind(OperatorKind::Mass));
    let pre = match choice {
        PreconditionerChoice::Jacobi => jacobi_preconditioner(a.as_ref())?,
        PreconditionerChoice::Multilevel => multilevel_preconditioner(grid)?,
        PreconditionerChoice::Identity => scaled_identity_preconditioner(a.as_ref())?,
    };
    let problem = EigenProblem::new(a, e, Arc::clone(&pre.op))?;
    let (lambda1, lambda2) = match grid.closed_form_eigenvalues() {
        Some((l1, l2)) => (Some(l1), l2),
        None => (None, None),
    };
    let meta = ProblemMeta {
        id: grid.to_string(),
        lambda1,
        lambda2,
        grid: Some(*grid),
        gamma_p: None,
        preconditioner: None,
    };
    problem.with_meta(meta).with_preconditioner(pre)
}

/// Scales `base` so the spectrum of `P⁻¹A` is centred on one.
fn centre<O: LinearOperator + 'static>(
    a: &dyn LinearOperator,
    base: O,
    label: &str,
) -> Result<Preconditioner> {
    let raw = pencil_extremes(a, &base, 1, MEASURE_STEPS, 0x00c0_ffee)?;
    if !(raw.min > 0.0) {
        return Err(Error::NotPositive { value: raw.min });
    }
    let s = 0.5 * (raw.min + raw.max);
    let bounds = PencilBounds {
        min: raw.min / s,
        max: raw.max / s,
    };
    let gamma = bounds.deviation_from_identity();
    let gamma_p = if gamma < 1e-12 { 0.0 } else { gamma };
    let op: Arc<dyn LinearOperator> = if (s - 1.0).abs() < 1e-14 {
        Arc::new(base)
    } else {
        Arc::new(Scaled::new(base, s)?)
    };
    Ok(Preconditioner {
        op,
        gamma_p,
        bounds,
        label: label.into(),
    })
}

/// Optimally scaled `diag(A)`.
pub fn jacobi_preconditioner(a: &dyn LinearOperator) -> Result<Preconditioner> {
    let d = a.diagonal().ok_or(Error::MissingCapability {
        operator: a.name(),
        capability: "diagonal",
    })?;
    if let Some(&bad) = d.iter().find(|&&x| x == 0.0) {
        return Err(Error::Domain(format!("zero diagonal entry ({bad})")));
    }
    let diag = Diagonal::new(d)?.with_kind(OperatorKind::Preconditioner);
    centre(a, diag, "jacobi")
}

/// Optimally scaled `c·I`.
pub fn scaled_identity_preconditioner(a: &dyn LinearOperator) -> Result<Preconditioner> {
    let id = Identity::new(a.dim()).with_kind(OperatorKind::Preconditioner);
    centre(a, id, "scaled-identity")
}

pub fn multilevel_preconditioner(grid: &GridSpec) -> Result<Preconditioner> {
    multilevel_preconditioner_with(grid, MultilevelOptions::default())
}

pub fn multilevel_preconditioner_with(
    grid: &GridSpec,
    opts: MultilevelOptions,
) -> Result<Preconditioner> {
    let ml = MultilevelOperator::new(grid, opts)?;
    let a = SparseOperator::new(ml.fine_operator().clone(), OperatorKind::Stiffness)?;
    centre(&a, ml, "multilevel")
}

/// `P_ω = P/ω`, i.e. the inverse damped by `omega`; `gamma_p` is re-measured.
pub fn damped(a: &dyn LinearOperator, p: &Preconditioner, omega: f64) -> Result<Preconditioner> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("damping must be positive, got {omega}")));
    }
    let op = Scaled::new(Arc::clone(&p.op), 1.0 / omega)?;
    let bounds = pencil_extremes(a, &op, 1, MEASURE_STEPS, 0x00c0_ffee)?;
    Ok(Preconditioner {
        op: Arc::new(op),
        gamma_p: bounds.deviation_from_identity(),
        bounds,
        label: format!("{}*{omega}", p.label),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::norm_in;

    #[test]
    fn dense_problem_validates_inputs() {
        let i2 = DenseMatrix::identity(2);
        let bad = DenseMatrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        assert!(dense_problem(bad, i2.clone(), i2.clone()).is_err());
        assert!(dense_problem(i2.clone(), DenseMatrix::identity(3), i2).is_err());
    }

    #[test]
    fn jacobi_of_diagonal_is_exact() {
        let a = Diagonal::new(vec![1.0, 5.0, 9.0]).unwrap();
        let p = jacobi_preconditioner(&a).unwrap();
        assert_eq!(p.gamma_p, 0.0);
        let v = [1.0, -1.0, 2.0];
        assert!((norm_in(p.op.as_ref(), &v).unwrap() - norm_in(&a, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scaled_identity_gamma_matches_condition_formula() {
        let a = Diagonal::new(vec![1.0, 2.0, 4.0]).unwrap();
        let p = scaled_identity_preconditioner(&a).unwrap();
        assert!((p.gamma_p - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn fd_problem_carries_metadata() {
        let g = GridSpec::interval_nodes(7).unwrap();
        let pr = fd_laplacian(&g).unwrap();
        assert_eq!(pr.dim(), 7);
        assert!(pr.meta().lambda1.is_some() && pr.meta().lambda2.is_some());
        assert!(pr.meta().gamma_p.unwrap() < 1.0);
        assert_eq!(pr.meta().preconditioner.as_deref(), Some("multilevel"));
    }

    #[test]
    fn multilevel_with_one_level_is_exact() {
        let g = GridSpec::interval_nodes(5).unwrap();
        let p = multilevel_preconditioner_with(&g, MultilevelOptions { levels: Some(1), ..Default::default() })
            .unwrap();
        assert_eq!(p.gamma_p, 0.0);
    }
}
