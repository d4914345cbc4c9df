//! Symmetric operator layer: vectors, operator handles, induced norms and
//! spectral-constant estimation.
//!
//! All operators act on plain `f64` slices. The pairing `⟨f, v⟩` between a
//! functional and a vector is the Euclidean dot product; every other inner
//! product is induced by a symmetric positive operator.

use std::fmt;
use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::EigenProblem;

/// Relative tolerance of every iterative inner solve.
pub const INNER_SOLVE_TOL: f64 = 1e-12;

/// Dense coefficient vector with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Wraps `data`, rejecting empty input and NaN/Inf entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: f64, v: &mut [f64]) {
    for x in v {
        *x *= a;
    }
}

/// Role an operator plays in a pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Stiffness,
    Mass,
    Preconditioner,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub exact_apply: bool,
    pub approx_apply: bool,
    pub inverse_apply: bool,
}

impl Capabilities {
    pub const ALL: Self = Self {
        exact_apply: true,
        approx_apply: true,
        inverse_apply: true,
    };
}

/// Symmetric positive operator on `R^dim`.
///
/// `apply_into` and `solve_into` are the raw kernels; the checked free
/// functions in this module validate dimensions and capabilities before
/// calling them.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn kind(&self) -> OperatorKind {
        OperatorKind::Generic
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::ALL
    }

    fn name(&self) -> &'static str {
        "operator"
    }

    /// `y = M x`
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// `w ≈ M⁻¹ r` with relative residual at most [`INNER_SOLVE_TOL`].
    ///
    /// The default runs conjugate gradients on `apply_into`.
    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        conjugate_gradient(self, None, r, w, INNER_SOLVE_TOL, 20 * self.dim() + 200)
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// `M = I`
#[derive(Debug, Clone)]
pub struct Identity {
    dim: usize,
    kind: OperatorKind,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            kind: OperatorKind::Generic,
        }
    }

    pub fn with_kind(mut self, kind: OperatorKind) -> Self {
        self.kind = kind;
        self
    }
}

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> OperatorKind {
        self.kind
    }
    fn name(&self) -> &'static str {
        "identity"
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        w.copy_from_slice(r);
        Ok(())
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(vec![1.0; self.dim])
    }
}

/// Positive diagonal operator; inverted exactly.
#[derive(Debug, Clone)]
pub struct Diagonal {
    entries: Vec<f64>,
    kind: OperatorKind,
}

impl Diagonal {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(&value) = entries.iter().find(|&&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositive { value });
        }
        Ok(Self {
            entries,
            kind: OperatorKind::Generic,
        })
    }

    pub fn with_kind(mut self, kind: OperatorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl LinearOperator for Diagonal {
    fn dim(&self) -> usize {
        self.entries.len()
    }
    fn kind(&self) -> OperatorKind {
        self.kind
    }
    fn name(&self) -> &'static str {
        "diagonal"
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.entries) {
            *yi = d * xi;
        }
    }
    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        for ((wi, ri), d) in w.iter_mut().zip(r).zip(&self.entries) {
            *wi = ri / d;
        }
        Ok(())
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.entries.clone())
    }
}

/// `c · M` for a positive scalar `c`.
#[derive(Debug, Clone)]
pub struct Scaled<O> {
    inner: O,
    factor: f64,
}

impl<O: LinearOperator> Scaled<O> {
    pub fn new(inner: O, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::Domain(format!("scale factor must be positive, got {factor}")));
        }
        Ok(Self { inner, factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: LinearOperator> LinearOperator for Scaled<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kind(&self) -> OperatorKind {
        self.inner.kind()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn name(&self) -> &'static str {
        self.inner.name()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply_into(x, y);
        scale(self.factor, y);
    }
    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        self.inner.solve_into(r, w)?;
        scale(1.0 / self.factor, w);
        Ok(())
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        self.inner
            .diagonal()
            .map(|d| d.into_iter().map(|x| x * self.factor).collect())
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kind(&self) -> OperatorKind {
        (**self).kind()
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
    fn solve_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        (**self).solve_into(r, w)
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        (**self).diagonal()
    }
}

/// Preconditioned conjugate gradients for `M w = r`, started from `w = 0`.
///
/// Convergence is judged on the true residual: after the recurrence meets
/// `tol`, the residual is recomputed and the solve restarted on the
/// correction if rounding drift left it above `tol`.
pub fn conjugate_gradient<O: LinearOperator + ?Sized>(
    op: &O,
    precond: Option<&dyn Fn(&[f64], &mut [f64]) -> Result<()>>,
    r: &[f64],
    w: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<()> {
    let n = op.dim();
    w.iter_mut().for_each(|x| *x = 0.0);
    let rhs_norm = norm2(r);
    if rhs_norm == 0.0 {
        return Ok(());
    }
    let mut res = r.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut total = 0usize;
    let mut rel = 1.0;
    for _restart in 0..6 {
        let precondition = |res: &[f64], z: &mut [f64]| -> Result<()> {
            match precond {
                Some(f) => f(res, z),
                None => {
                    z.copy_from_slice(res);
                    Ok(())
                }
            }
        };
        precondition(&res, &mut z)?;
        p.copy_from_slice(&z);
        let mut rz = dot(&res, &z);
        while total < max_iter {
            op.apply_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                if norm2(&res) <= tol * rhs_norm {
                    break;
                }
                return Err(Error::NotPositive { value: pq });
            }
            let step = rz / pq;
            axpy(step, &p, w);
            axpy(-step, &q, &mut res);
            total += 1;
            if norm2(&res) <= 0.1 * tol * rhs_norm {
                break;
            }
            precondition(&res, &mut z)?;
            let rz_next = dot(&res, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        // true residual
        op.apply_into(w, &mut q);
        for ((ri, bi), qi) in res.iter_mut().zip(r).zip(&q) {
            *ri = bi - qi;
        }
        rel = norm2(&res) / rhs_norm;
        if rel <= tol {
            return Ok(());
        }
        if total >= max_iter {
            break;
        }
        // restart on the correction equation: keep w, continue from res
    }
    Err(Error::InnerSolve {
        iterations: total,
        residual: rel,
    })
}

fn check_dim(op: &dyn LinearOperator, v: &[f64]) -> Result<()> {
    if op.dim() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `M v`
pub fn apply(op: &dyn LinearOperator, v: &[f64]) -> Result<Vector> {
    check_dim(op, v)?;
    if !op.capabilities().exact_apply {
        return Err(Error::MissingCapability {
            operator: op.name(),
            capability: "exact apply",
        });
    }
    let mut out = vec![0.0; v.len()];
    op.apply_into(v, &mut out);
    Ok(Vector(out))
}

/// Euclidean inner product.
pub fn inner(u: &[f64], v: &[f64]) -> Result<f64> {
    check_pair(u, v)?;
    Ok(dot(u, v))
}

/// `⟨M u, v⟩`
pub fn operator_inner(op: &dyn LinearOperator, u: &[f64], v: &[f64]) -> Result<f64> {
    check_pair(u, v)?;
    Ok(dot(&apply(op, u)?, v))
}

/// `√⟨M v, v⟩`; a negative quadratic form is reported, not clamped.
pub fn norm_in(op: &dyn LinearOperator, v: &[f64]) -> Result<f64> {
    let q = operator_inner(op, v, v)?;
    quad_sqrt(q, v)
}

fn quad_sqrt(q: f64, v: &[f64]) -> Result<f64> {
    if q < 0.0 {
        // rounding can produce tiny negative values for near-null vectors
        if q.abs() <= 1e-14 * dot(v, v).max(f64::MIN_POSITIVE) {
            return Ok(0.0);
        }
        return Err(Error::NotPositive { value: q });
    }
    Ok(q.sqrt())
}

/// `M⁻¹ r`
pub fn apply_inverse(op: &dyn LinearOperator, r: &[f64]) -> Result<Vector> {
    check_dim(op, r)?;
    if !op.capabilities().inverse_apply {
        return Err(Error::MissingCapability {
            operator: op.name(),
            capability: "inverse apply",
        });
    }
    let mut w = vec![0.0; r.len()];
    op.solve_into(r, &mut w)?;
    Ok(Vector(w))
}

/// `√⟨M⁻¹ r, r⟩`, the dual norm induced by `M`.
pub fn norm_in_inverse(op: &dyn LinearOperator, r: &[f64]) -> Result<f64> {
    let w = apply_inverse(op, r)?;
    quad_sqrt(dot(&w, r), r)
}

/// Constants relating the stiffness operator, the preconditioner and the
/// mass operator.
///
/// In the discrete setting the V-norm is the `P`-norm and the H-norm the
/// `E`-norm, so `sigma0`/`sigma1` bound the pencil `(A, P)` and `alpha²`
/// bounds `(E, P)` from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    pub sigma0: f64,
    pub sigma1: f64,
    pub alpha: f64,
    pub gamma_p: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

impl SpectralConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("sigma0", self.sigma0)?;
        positive("sigma1", self.sigma1)?;
        positive("alpha", self.alpha)?;
        if self.sigma0 > self.sigma1 {
            return Err(Error::Domain(format!(
                "sigma0 = {} exceeds sigma1 = {}",
                self.sigma0, self.sigma1
            )));
        }
        if !(0.0..1.0).contains(&self.gamma_p) {
            return Err(Error::Domain(format!("gamma_p = {} not in [0, 1)", self.gamma_p)));
        }
        if let (Some(l1), Some(l2)) = (self.lambda1, self.lambda2) {
            if !(0.0 < l1 && l1 < l2) {
                return Err(Error::Domain(format!("need 0 < lambda1 < lambda2, got {l1}, {l2}")));
            }
        }
        Ok(())
    }
}

/// Tuning for [`estimate_constants_with`].
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub trials: usize,
    /// Multiplicative safety margin applied to every estimate.
    pub margin: f64,
    /// Cap on Lanczos steps per trial.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            trials: 2,
            margin: 1.1,
            max_iter: 500,
            seed: 0x5eed,
        }
    }
}

/// Extremal eigenvalues of the pencil `N x = θ M x`, i.e. of `M⁻¹N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilBounds {
    pub min: f64,
    pub max: f64,
}

impl PencilBounds {
    /// `max |1 − θ|` over the bracket.
    pub fn deviation_from_identity(&self) -> f64 {
        (1.0 - self.min).abs().max((self.max - 1.0).abs())
    }
}

/// Lanczos estimate of the extremal eigenvalues of `M⁻¹N`.
///
/// `M⁻¹N` is self-adjoint in the `N` inner product, which is where the
/// recurrence runs; full reorthogonalization keeps the Ritz values clean,
/// and for `dim ≤ max_iter` the Krylov space exhausts the spectrum.
pub fn pencil_extremes(
    n_op: &dyn LinearOperator,
    m_op: &dyn LinearOperator,
    trials: usize,
    max_iter: usize,
    seed: u64,
) -> Result<PencilBounds> {
    extremes_with(n_op, m_op, trials, max_iter, seed, false)
}

/// Largest eigenvalue of `M⁻¹N`; cheaper than [`pencil_extremes`] when the
/// low end of the spectrum is clustered. The returned `min` is not converged.
pub fn pencil_max(
    n_op: &dyn LinearOperator,
    m_op: &dyn LinearOperator,
    trials: usize,
    max_iter: usize,
    seed: u64,
) -> Result<PencilBounds> {
    extremes_with(n_op, m_op, trials, max_iter, seed, true)
}

fn extremes_with(
    n_op: &dyn LinearOperator,
    m_op: &dyn LinearOperator,
    trials: usize,
    max_iter: usize,
    seed: u64,
    top_only: bool,
) -> Result<PencilBounds> {
    let dim = n_op.dim();
    if m_op.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m_op.dim(),
        });
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..trials {
        let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = lanczos_extremes(n_op, m_op, &start, max_iter.min(dim).max(1), top_only)?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok(PencilBounds { min: lo, max: hi })
}

fn lanczos_extremes(
    n_op: &dyn LinearOperator,
    m_op: &dyn LinearOperator,
    start: &[f64],
    steps: usize,
    top_only: bool,
) -> Result<(f64, f64)> {
    let dim = start.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut n_basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);

    let mut q = start.to_vec();
    let mut nq = vec![0.0; dim];
    n_op.apply_into(&q, &mut nq);
    let nn = dot(&q, &nq);
    if !(nn > 0.0) {
        return Err(Error::NotPositive { value: nn });
    }
    let s = 1.0 / nn.sqrt();
    scale(s, &mut q);
    scale(s, &mut nq);

    let mut w = vec![0.0; dim];
    let mut nw = vec![0.0; dim];
    let mut previous: Option<(f64, f64)> = None;
    for j in 0..steps {
        m_op.solve_into(&nq, &mut w)?;
        let alpha = dot(&w, &nq);
        alphas.push(alpha);
        basis.push(q.clone());
        n_basis.push(nq.clone());
        // two passes of Gram-Schmidt in the N inner product
        for _ in 0..2 {
            for (bi, nbi) in basis.iter().zip(&n_basis) {
                let c = dot(&w, nbi);
                axpy(-c, bi, &mut w);
            }
        }
        n_op.apply_into(&w, &mut nw);
        let beta2 = dot(&w, &nw);
        let extremes = tridiagonal_extremes(&alphas, &betas);
        let scale_ref = extremes.0.abs().max(extremes.1.abs()).max(f64::MIN_POSITIVE);
        if j + 1 == steps || !(beta2 > (1e-13 * scale_ref).powi(2)) {
            return Ok(extremes);
        }
        if let Some((plo, phi)) = previous {
            if j >= 8
                && (top_only || (plo - extremes.0).abs() <= 1e-8 * scale_ref)
                && (phi - extremes.1).abs() <= 1e-8 * scale_ref
            {
                return Ok(extremes);
            }
        }
        previous = Some(extremes);
        let beta = beta2.sqrt();
        betas.push(beta);
        q.iter_mut().zip(&w).for_each(|(qi, wi)| *qi = wi / beta);
        nq.iter_mut().zip(&nw).for_each(|(qi, wi)| *qi = wi / beta);
    }
    unreachable!("loop returns on its final iteration")
}

fn tridiagonal_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    // Gershgorin interval, then Sturm-count bisection for the two ends
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let r = if i > 0 { betas[i - 1].abs() } else { 0.0 } + if i + 1 < k { betas[i].abs() } else { 0.0 };
        lo = lo.min(alphas[i] - r);
        hi = hi.max(alphas[i] + r);
    }
    // number of eigenvalues strictly below x
    let count = |x: f64| -> usize {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..k {
            let b2 = if i > 0 { betas[i - 1] * betas[i - 1] } else { 0.0 };
            d = alphas[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    let bisect = |target: usize| -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if count(m) > target {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(k - 1))
}

/// Inflates `gamma` by `margin` while keeping it strictly below one.
pub fn inflate_gamma(gamma: f64, margin: f64) -> f64 {
    (margin * gamma).min(1.0 - (1.0 - gamma) / margin)
}

/// Estimates σ₀, σ₁, α and γ_P for `problem` with the default margin.
pub fn estimate_constants(problem: &EigenProblem, trials: usize) -> Result<SpectralConstants> {
    estimate_constants_with(
        problem,
        EstimateOptions {
            trials,
            ..EstimateOptions::default()
        },
    )
}

pub fn estimate_constants_with(
    problem: &EigenProblem,
    opts: EstimateOptions,
) -> Result<SpectralConstants> {
    if opts.trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if !(opts.margin >= 1.0) {
        return Err(Error::Domain(format!("margin must be >= 1, got {}", opts.margin)));
    }
    let a = problem.a();
    let e = problem.e();
    let p = problem.p();
    let ap = pencil_extremes(a, p, opts.trials, opts.max_iter, opts.seed)?;
    let ep = pencil_max(e, p, opts.trials, opts.max_iter, opts.seed ^ 0x9e37_79b9)?;
    if !(ap.min > 0.0) || !(ep.max > 0.0) {
        return Err(Error::Estimation(format!(
            "non-positive pencil bounds: (A,P) in [{}, {}], (E,P) max {}",
            ap.min, ap.max, ep.max
        )));
    }
    let raw_gamma = ap.deviation_from_identity();
    // exact equality P = A must survive as gamma = 0
    let raw_gamma = if raw_gamma < 1e-12 { 0.0 } else { raw_gamma };
    if raw_gamma >= 1.0 {
        return Err(Error::Estimation(format!(
            "preconditioner is not spectrally equivalent after scaling (gamma = {raw_gamma})"
        )));
    }
    let gamma_p = inflate_gamma(raw_gamma, opts.margin);
    let consts = SpectralConstants {
        sigma0: ap.min / opts.margin,
        sigma1: ap.max * opts.margin,
        alpha: ep.max.sqrt() * opts.margin,
        gamma_p,
        lambda1: problem.meta().lambda1,
        lambda2: problem.meta().lambda2,
    };
    consts.validate()?;
    Ok(consts)
}
