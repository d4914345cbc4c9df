//! The exact preconditioned inverse iteration step, its convergence factor
//! and angle bounds, and the reduced model iteration `x′ = x + μ⁻¹T(Bx − μx)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{apply, apply_inverse, axpy, dot, norm_in, norm_in_inverse, LinearOperator, Vector};
use crate::problems::EigenProblem;

/// Relative tolerance on the perturbation budget check in [`pinvit_step`].
pub const BUDGET_SLACK: f64 = 1e-9;

/// `‖ṽ‖ < BREAKDOWN_RATIO ‖v‖` is treated as a vanished update.
pub const BREAKDOWN_RATIO: f64 = 1e-14;

fn check_nonzero(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(())
}

/// `μ(v) = ⟨Av, v⟩ / ⟨Ev, v⟩`
pub fn rayleigh_quotient(a: &dyn LinearOperator, e: &dyn LinearOperator, v: &[f64]) -> Result<f64> {
    check_nonzero(v)?;
    let num = dot(&apply(a, v)?, v);
    let den = dot(&apply(e, v)?, v);
    if !(den > 0.0) {
        return Err(Error::NotPositive { value: den });
    }
    Ok(num / den)
}

/// `r(v) = Av − μ(v)Ev`
pub fn residual(a: &dyn LinearOperator, e: &dyn LinearOperator, v: &[f64]) -> Result<Vector> {
    check_nonzero(v)?;
    let av = apply(a, v)?;
    let ev = apply(e, v)?;
    let den = dot(&ev, v);
    if !(den > 0.0) {
        return Err(Error::NotPositive { value: den });
    }
    let mu = dot(&av, v) / den;
    let mut r = av.into_inner();
    axpy(-mu, &ev, &mut r);
    Vector::new(r)
}

/// `ρ(v) = ‖r(v)‖_{A⁻¹} / ‖v‖_A`
pub fn residual_measure(a: &dyn LinearOperator, e: &dyn LinearOperator, v: &[f64]) -> Result<f64> {
    let r = residual(a, e, v)?;
    Ok(norm_in_inverse(a, &r)? / norm_in(a, v)?)
}

/// Spectral facts a step may use to check its preconditions and bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    pub gamma_p: f64,
    /// Relative perturbation budget; `ξ` is checked against it when set.
    pub gamma_xi: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

impl StepContext {
    pub fn from_problem(problem: &EigenProblem) -> Self {
        Self {
            gamma_p: problem.meta().gamma_p.unwrap_or(0.0),
            gamma_xi: None,
            lambda1: problem.meta().lambda1,
            lambda2: problem.meta().lambda2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// `ṽ/|ṽ|` with `⟨next, v⟩ ≥ 0`.
    pub next: Vector,
    /// The unnormalized update `ṽ = v − P⁻¹r(v) + ξ`.
    pub raw: Vector,
    pub mu: f64,
    pub mu_next: f64,
    pub rho_next: f64,
    /// `q²` for `γ = γ_P (+ γ_ξ when ξ is given)`; `None` when `μ(v) ≥ λ₂`
    /// or the spectrum is unknown.
    pub bound_factor: Option<f64>,
}

/// Normalizes `x` in the `E`-norm and orients it along `reference`.
pub(crate) fn normalize_oriented(
    e: &dyn LinearOperator,
    x: &mut [f64],
    reference: &[f64],
) -> Result<()> {
    let norm = norm_in(e, x)?;
    let ref_norm = norm_in(e, reference)?;
    if !(norm >= BREAKDOWN_RATIO * ref_norm) || norm == 0.0 {
        return Err(Error::Breakdown {
            ratio: norm / ref_norm,
        });
    }
    let sign = if dot(x, reference) < 0.0 { -1.0 } else { 1.0 };
    x.iter_mut().for_each(|v| *v *= sign / norm);
    Ok(())
}

/// One step `ṽ = v − P⁻¹(Av − μ(v)Ev) + ξ`, normalized in the `E`-norm.
pub fn pinvit_step(
    problem: &EigenProblem,
    v: &[f64],
    xi: Option<&[f64]>,
    ctx: &StepContext,
) -> Result<StepResult> {
    let (a, e, p) = (problem.a(), problem.e(), problem.p());
    check_nonzero(v)?;
    let av = apply(a, v)?;
    let ev = apply(e, v)?;
    let mu = dot(&av, v) / dot(&ev, v);
    let mut r = av.into_inner();
    axpy(-mu, &ev, &mut r);

    let correction = apply_inverse(p, &r)?;
    let mut raw = v.to_vec();
    axpy(-1.0, &correction, &mut raw);
    let mut gamma = ctx.gamma_p;
    if let Some(xi) = xi {
        if xi.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                found: xi.len(),
            });
        }
        if let Some(gamma_xi) = ctx.gamma_xi {
            let v_norm = norm_in(a, v)?;
            let rho = norm_in_inverse(a, &r)? / v_norm;
            let observed = norm_in(a, xi)? / v_norm;
            let allowed = gamma_xi * rho;
            if observed > allowed * (1.0 + BUDGET_SLACK) + f64::EPSILON * BUDGET_SLACK {
                return Err(Error::PerturbationBudget { observed, allowed });
            }
            gamma += gamma_xi;
        }
        axpy(1.0, xi, &mut raw);
    }
    let raw = Vector::new(raw)?;
    let mut next = raw.clone().into_inner();
    normalize_oriented(e, &mut next, v)?;
    let mu_next = rayleigh_quotient(a, e, &next)?;
    if let Some(l1) = ctx.lambda1 {
        if mu_next < l1 * (1.0 - 1e-8) {
            return Err(Error::OutsideBracket {
                mu: mu_next,
                lower: l1,
                upper: ctx.lambda2.unwrap_or(f64::INFINITY),
            });
        }
    }
    let rho_next = residual_measure(a, e, &next)?;
    let bound_factor = match (ctx.lambda1, ctx.lambda2) {
        (Some(l1), Some(l2)) if mu < l2 && gamma < 1.0 => {
            convergence_factor(gamma, l1, l2).ok().map(|q| q * q)
        }
        _ => None,
    };
    Ok(StepResult {
        next: Vector::new(next)?,
        raw,
        mu,
        mu_next,
        rho_next,
        bound_factor,
    })
}

/// `q(γ, λ_k, λ_{k+1}) = 1 − (1−γ)(1 − λ_k/λ_{k+1})`
pub fn convergence_factor(gamma: f64, lambda_k: f64, lambda_k1: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma = {gamma} not in [0, 1)")));
    }
    if !(lambda_k > 0.0 && lambda_k < lambda_k1) {
        return Err(Error::Domain(format!(
            "need 0 < lambda_k < lambda_k1, got {lambda_k}, {lambda_k1}"
        )));
    }
    Ok(1.0 - (1.0 - gamma) * (1.0 - lambda_k / lambda_k1))
}

/// `(μ − λ₁)/(λ₂ − μ)`, clamped at zero below.
pub fn shifted_ratio(mu: f64, lambda1: f64, lambda2: f64) -> f64 {
    ((mu - lambda1) / (lambda2 - mu)).max(0.0)
}

/// Absolute slack used by [`ratio_bound_holds`].
pub const RATIO_SLACK: f64 = 1e-10;

/// Whether the step `mu → mu_next` satisfies the shifted-ratio contraction
/// by `q²`; `None` when `mu` is outside `[λ₁, λ₂)`.
pub fn ratio_bound_holds(mu: f64, mu_next: f64, lambda1: f64, lambda2: f64, q_squared: f64) -> Option<bool> {
    if !(mu < lambda2) || mu_next >= lambda2 {
        return None;
    }
    let before = shifted_ratio(mu, lambda1, lambda2);
    let after = shifted_ratio(mu_next, lambda1, lambda2);
    Some(after <= q_squared * before + RATIO_SLACK)
}

/// Vector-space data for the reduced iteration: `B`, `T` and the Gram
/// operator of the `X` inner product.
pub struct ModelSpace<'a> {
    pub b: Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'a>,
    pub t: Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'a>,
    pub gram: &'a dyn LinearOperator,
}

impl<'a> ModelSpace<'a> {
    /// `B = A⁻¹E`, `T = P⁻¹A`, `X = V` with the `A` inner product.
    pub fn from_problem(problem: &'a EigenProblem) -> Self {
        let (a, e, p) = (problem.a(), problem.e(), problem.p());
        Self {
            b: Box::new(move |x| Ok(apply_inverse(a, &apply(e, x)?)?.into_inner())),
            t: Box::new(move |x| Ok(apply_inverse(p, &apply(a, x)?)?.into_inner())),
            gram: a,
        }
    }

    /// `(Bx, x)_X / (x, x)_X`
    pub fn rayleigh(&self, x: &[f64]) -> Result<f64> {
        check_nonzero(x)?;
        let bx = (self.b)(x)?;
        let gx = apply(self.gram, x)?;
        Ok(dot(&gx, &bx) / dot(&gx, x))
    }
}

/// `x′ = x + μ(x)⁻¹ T(Bx − μ(x)x) + η`
pub fn model_step(space: &ModelSpace<'_>, x: &[f64], eta: Option<&[f64]>) -> Result<Vector> {
    let mu = space.rayleigh(x)?;
    if !(mu > 0.0) {
        return Err(Error::NotPositive { value: mu });
    }
    let mut d = (space.b)(x)?;
    axpy(-mu, x, &mut d);
    let td = (space.t)(&d)?;
    let mut out = x.to_vec();
    axpy(1.0 / mu, &td, &mut out);
    if let Some(eta) = eta {
        if eta.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: eta.len(),
            });
        }
        axpy(1.0, eta, &mut out);
    }
    Vector::new(out)
}

/// Two-sided bound on `sin φ_A(v, E₁)` in terms of `ρ(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn angle_bounds(mu: f64, lambda1: f64, lambda2: f64, rho: f64) -> Result<AngleBounds> {
    if !(mu >= lambda1 && mu < lambda2) {
        return Err(Error::OutsideBracket {
            mu,
            lower: lambda1,
            upper: lambda2,
        });
    }
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("rho must be non-negative, got {rho}")));
    }
    let lower = (lambda1 / (3.0 * mu) * rho).clamp(0.0, 1.0);
    let by_residual = lambda2 / (lambda2 - mu) * rho;
    let by_quotient = (lambda2 / lambda1 * (mu - lambda1) / (lambda2 - mu)).max(0.0).sqrt();
    let upper = by_residual.min(by_quotient).min(1.0).max(0.0);
    Ok(AngleBounds { lower, upper })
}

/// Both sides of `(μ₁ − μ(x))(μ(x) − μ₂) ≤ ‖Bx − μ(x)x‖²_X / ‖x‖²_X`.
pub fn temple_kato_gap(space: &ModelSpace<'_>, x: &[f64], mu1: f64, mu2: f64) -> Result<(f64, f64)> {
    let mu = space.rayleigh(x)?;
    if !(mu > mu2 && mu <= mu1 * (1.0 + 1e-14)) {
        return Err(Error::OutsideBracket {
            mu,
            lower: mu2,
            upper: mu1,
        });
    }
    let mut d = (space.b)(x)?;
    axpy(-mu, x, &mut d);
    let lhs = ((mu1 - mu) * (mu - mu2)).max(0.0);
    let rhs = dot(&apply(space.gram, &d)?, &d) / dot(&apply(space.gram, x)?, x);
    Ok((lhs, rhs))
}

/// `‖v − Π_A v‖_A / ‖v‖_A` for an `A`-orthonormal `basis`.
pub fn sin_angle_to_eigenspace(a: &dyn LinearOperator, v: &[f64], basis: &[Vec<f64>]) -> Result<f64> {
    if basis.is_empty() {
        return Err(Error::Domain("eigenspace basis is empty".into()));
    }
    check_nonzero(v)?;
    let av = apply(a, v)?;
    let mut d = v.to_vec();
    for b in basis {
        if b.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                found: b.len(),
            });
        }
        axpy(-dot(&av, b), b, &mut d);
    }
    Ok((norm_in(a, &d)? / norm_in(a, v)?).clamp(0.0, 1.0))
}

/// Estimates of the two lowest eigenvalues and the lowest eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct LowestPair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub u1: Vector,
    pub steps: usize,
}

/// Runs exact steps to a tight residual, then repeats on the
/// `E`-orthogonal complement of the result to estimate `λ₂`.
pub fn estimate_lowest_pair(problem: &EigenProblem, tol: f64, max_steps: usize, seed: u64) -> Result<LowestPair> {
    let n = problem.dim();
    if n < 2 {
        return Err(Error::Domain("need at least two unknowns to estimate lambda2".into()));
    }
    let (a, e, p) = (problem.a(), problem.e(), problem.p());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = 0;

    let mut run = |deflate: Option<&[f64]>, rng: &mut ChaCha8Rng| -> Result<(f64, Vec<f64>)> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        if deflate.is_some() {
            v.iter_mut().for_each(|x| *x -= 1.0);
        }
        let project = |v: &mut Vec<f64>| -> Result<()> {
            if let Some(u) = deflate {
                let c = dot(&apply(e, v)?, u);
                axpy(-c, u, v);
            }
            Ok(())
        };
        project(&mut v)?;
        let mut mu = rayleigh_quotient(a, e, &v)?;
        let mut quiet = 0;
        for _ in 0..max_steps {
            steps += 1;
            let mut r = residual(a, e, &v)?.into_inner();
            if let Some(u) = deflate {
                // keep the search direction in the complement
                let eu = apply(e, u)?;
                let c = dot(&r, u);
                axpy(-c, &eu, &mut r);
            }
            let w = apply_inverse(p, &r)?;
            let estimate = (dot(&w, &r).max(0.0)).sqrt() / norm_in(p, &v)?;
            if estimate <= tol {
                break;
            }
            let mut next = v.clone();
            axpy(-1.0, &w, &mut next);
            project(&mut next)?;
            normalize_oriented(e, &mut next, &v)?;
            let mu_next = rayleigh_quotient(a, e, &next)?;
            v = next;
            if (mu - mu_next).abs() <= 1e-15 * mu {
                quiet += 1;
                if quiet >= 5 {
                    mu = mu_next;
                    break;
                }
            } else {
                quiet = 0;
            }
            mu = mu_next;
        }
        Ok((mu, v))
    };
    let (lambda1, u1) = run(None, &mut rng)?;
    let (lambda2, _) = run(Some(&u1), &mut rng)?;
    if !(lambda2 > lambda1) {
        return Err(Error::Estimation(format!(
            "deflated iteration did not separate eigenvalues ({lambda1}, {lambda2})"
        )));
    }
    Ok(LowestPair {
        lambda1,
        lambda2,
        u1: Vector::new(u1)?,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{Diagonal, Identity};
    use crate::problems::{dense_problem, DenseMatrix};

    fn diag_problem(a: &[f64], p: &[f64]) -> EigenProblem {
        let n = a.len();
        let mut pr = dense_problem(
            DenseMatrix::from_diagonal(a),
            DenseMatrix::identity(n),
            DenseMatrix::from_diagonal(p),
        )
        .unwrap();
        let mut sorted = a.to_vec();
        sorted.sort_by(f64::total_cmp);
        pr.meta_mut().lambda1 = Some(sorted[0]);
        pr.meta_mut().lambda2 = sorted.get(1).copied();
        pr
    }

    #[test]
    fn rayleigh_examples() {
        let a = Diagonal::new(vec![1.0, 3.0]).unwrap();
        let e = Identity::new(2);
        assert_eq!(rayleigh_quotient(&a, &e, &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rayleigh_quotient(&a, &e, &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(rayleigh_quotient(&a, &e, &[2.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rayleigh_quotient(&a, &e, &[0.0, 0.0]).unwrap_err(), Error::ZeroVector);
    }

    #[test]
    fn residual_examples() {
        let a = Diagonal::new(vec![1.0, 3.0]).unwrap();
        let e = Identity::new(2);
        assert_eq!(residual(&a, &e, &[1.0, 1.0]).unwrap().as_slice(), &[-1.0, 1.0]);
        assert_eq!(residual(&a, &e, &[0.0, 2.0]).unwrap().as_slice(), &[0.0, 0.0]);
        let rho = residual_measure(&a, &e, &[1.0, 1.0]).unwrap();
        assert!((rho - (4.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        let rho3 = residual_measure(&a, &e, &[-3.0, -3.0]).unwrap();
        assert!((rho - rho3).abs() < 1e-15);
        assert_eq!(residual_measure(&a, &e, &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn step_equality_case() {
        let pr = diag_problem(&[1.0, 2.0], &[1.0, 2.0]);
        let s = 0.5f64.sqrt();
        let ctx = StepContext::from_problem(&pr);
        let out = pinvit_step(&pr, &[s, s], None, &ctx).unwrap();
        assert!((out.mu_next - 1.2).abs() < 1e-15);
        let dir = out.next[0] / out.next[1];
        assert!((dir - 2.0).abs() < 1e-14);
        assert!((out.bound_factor.unwrap() - 0.25).abs() < 1e-15);
        let before = shifted_ratio(out.mu, 1.0, 2.0);
        let after = shifted_ratio(out.mu_next, 1.0, 2.0);
        assert!((before - 1.0).abs() < 1e-14 && (after - 0.25).abs() < 1e-14);
        assert_eq!(ratio_bound_holds(out.mu, out.mu_next, 1.0, 2.0, 0.25), Some(true));

        let zero = pinvit_step(&pr, &[s, s], Some(&[0.0, 0.0]), &ctx).unwrap();
        assert_eq!(zero, out);
    }

    #[test]
    fn eigenvector_is_fixed_point() {
        let pr = diag_problem(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]);
        let ctx = StepContext::from_problem(&pr);
        let out = pinvit_step(&pr, &[0.0, -3.0, 0.0], None, &ctx).unwrap();
        assert_eq!(out.next.as_slice(), &[0.0, -1.0, 0.0]);
        assert_eq!(out.mu_next, 2.0);
        assert_eq!(out.bound_factor, None);
    }

    #[test]
    fn perturbation_budget_is_enforced() {
        let pr = diag_problem(&[1.0, 2.0], &[1.0, 2.0]);
        let ctx = StepContext {
            gamma_xi: Some(0.1),
            ..StepContext::from_problem(&pr)
        };
        let err = pinvit_step(&pr, &[1.0, 1.0], Some(&[1.0, 0.0]), &ctx).unwrap_err();
        assert!(matches!(err, Error::PerturbationBudget { .. }));
    }

    #[test]
    fn breakdown_is_reported() {
        // P⁻¹ = A⁻¹ scaled so that the update cancels v exactly
        let pr = dense_problem(
            DenseMatrix::from_diagonal(&[1.0, 1.0]),
            DenseMatrix::identity(2),
            DenseMatrix::from_diagonal(&[1.0, 1.0]),
        )
        .unwrap();
        // r = 0 for every v here, so construct cancellation through xi
        let err = pinvit_step(&pr, &[1.0, 2.0], Some(&[-1.0, -2.0]), &StepContext::default()).unwrap_err();
        assert!(matches!(err, Error::Breakdown { .. }));
    }

    #[test]
    fn convergence_factor_examples() {
        assert_eq!(convergence_factor(0.0, 1.0, 2.0).unwrap(), 0.5);
        assert_eq!(convergence_factor(0.5, 1.0, 4.0).unwrap(), 0.625);
        assert!(convergence_factor(1.0 - 1e-12, 1.0, 2.0).unwrap() > 1.0 - 1e-11);
        assert!(convergence_factor(1.0, 1.0, 2.0).is_err());
        assert!(convergence_factor(0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn angle_bound_examples() {
        let b = angle_bounds(1.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        let b = angle_bounds(1.5, 1.0, 2.0, 0.3).unwrap();
        assert!((b.lower - 0.3 / 4.5).abs() < 1e-15);
        assert_eq!(b.upper, 1.0);
        assert!(angle_bounds(2.0, 1.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn temple_kato_example() {
        let b = Diagonal::new(vec![1.0, 0.5, 1.0 / 3.0]).unwrap();
        let id = Identity::new(3);
        let space = ModelSpace {
            b: Box::new(move |x| Ok(apply(&b, x)?.into_inner())),
            t: Box::new(|x| Ok(x.to_vec())),
            gram: &id,
        };
        let s = 0.5f64.sqrt();
        let (lhs, rhs) = temple_kato_gap(&space, &[s, s, 0.0], 1.0, 0.5).unwrap();
        assert!((lhs - 1.0 / 16.0).abs() < 1e-15);
        // equality: x lies in the span of two eigenvectors
        assert!((rhs - 1.0 / 16.0).abs() < 1e-15);
        let (lhs, rhs) = temple_kato_gap(&space, &[1.0, 0.0, 0.0], 1.0, 0.5).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));
    }

    #[test]
    fn model_step_with_identity_t_is_scaled_power_step() {
        let b = Diagonal::new(vec![1.0, 0.5]).unwrap();
        let id = Identity::new(2);
        let space = ModelSpace {
            b: Box::new(move |x| Ok(apply(&b, x)?.into_inner())),
            t: Box::new(|x| Ok(x.to_vec())),
            gram: &id,
        };
        let x = [1.0, 1.0];
        let mu = space.rayleigh(&x).unwrap();
        let out = model_step(&space, &x, None).unwrap();
        assert!((out[0] - 1.0 / mu).abs() < 1e-15 && (out[1] - 0.5 / mu).abs() < 1e-15);
        let fixed = model_step(&space, &[0.0, 2.0], None).unwrap();
        assert_eq!(fixed.as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn model_step_matches_raw_pinvit_update() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]]).unwrap();
        let e = DenseMatrix::from_rows(&[vec![2.0, 0.2, 0.0], vec![0.2, 1.0, 0.1], vec![0.0, 0.1, 1.5]]).unwrap();
        let p = DenseMatrix::from_diagonal(&[4.0, 3.0, 2.0]);
        let pr = dense_problem(a, e, p).unwrap();
        let x = [0.3, -1.0, 0.7];
        let space = ModelSpace::from_problem(&pr);
        let model = model_step(&space, &x, None).unwrap();
        let step = pinvit_step(&pr, &x, None, &StepContext::default()).unwrap();
        let mut diff = model.into_inner();
        axpy(-1.0, &step.raw, &mut diff);
        assert!(norm_in(pr.a(), &diff).unwrap() <= 1e-12 * norm_in(pr.a(), &step.raw).unwrap());
        let mu = rayleigh_quotient(pr.a(), pr.e(), &x).unwrap();
        assert!((mu * space.rayleigh(&x).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sin_angle_examples() {
        let a = Diagonal::new(vec![1.0, 4.0]).unwrap();
        let basis = vec![vec![1.0, 0.0]];
        assert_eq!(sin_angle_to_eigenspace(&a, &[3.0, 0.0], &basis).unwrap(), 0.0);
        assert_eq!(sin_angle_to_eigenspace(&a, &[0.0, 1.0], &basis).unwrap(), 1.0);
        assert!(sin_angle_to_eigenspace(&a, &[1.0, 1.0], &[]).is_err());
    }

    #[test]
    fn lowest_pair_on_diagonal() {
        let pr = diag_problem(&[3.0, 1.0, 2.0, 5.0], &[3.0, 1.0, 2.0, 5.0]);
        let lp = estimate_lowest_pair(&pr, 1e-12, 500, 1).unwrap();
        assert!((lp.lambda1 - 1.0).abs() < 1e-12);
        assert!((lp.lambda2 - 2.0).abs() < 1e-10);
    }
}
