//! Inexact operator application and the adaptive perturbed iteration.
//!
//! The dual norm on the stiffness side is the `P⁻¹`-norm and the primal norm
//! the `P`-norm; on the mass side they are the `E⁻¹`- and `E`-norms. An
//! approximate apply of tolerance `ε` must satisfy
//! `‖M_ε(v) − Mv‖_dual ≤ ε ‖v‖_primal`.

use std::fmt;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{
    apply, apply_inverse, axpy, dot, estimate_constants, norm_in, norm_in_inverse, LinearOperator,
    SpectralConstants, Vector,
};
use crate::pinvit::{
    convergence_factor, estimate_lowest_pair, normalize_oriented, ratio_bound_holds,
};
use crate::problems::EigenProblem;

/// Which operator of the pencil an approximate apply stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Stiffness,
    Mass,
}

/// Everything an approximate apply may use for one product `M v`.
#[derive(Clone, Copy)]
pub struct ApplyRequest<'a> {
    pub role: Role,
    pub v: &'a [f64],
    /// The exact product `M v`.
    pub exact: &'a [f64],
    pub eps: f64,
    /// `‖v‖` in the primal metric.
    pub primal_norm: f64,
    /// Operator whose inverse induces the dual norm.
    pub metric: &'a dyn LinearOperator,
}

impl ApplyRequest<'_> {
    /// `ε ‖v‖`, the admissible dual-norm error.
    pub fn budget(&self) -> f64 {
        self.eps * self.primal_norm
    }

    pub fn dual_norm(&self, f: &[f64]) -> Result<f64> {
        norm_in_inverse(self.metric, f)
    }
}

/// A realization of `M_ε`.
pub trait ApproxApply: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    fn approximate(&self, req: &ApplyRequest<'_>) -> Result<Vec<f64>>;
}

/// Returns the exact product for every `ε`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exact;

impl ApproxApply for Exact {
    fn label(&self) -> String {
        "exact".into()
    }

    fn approximate(&self, req: &ApplyRequest<'_>) -> Result<Vec<f64>> {
        Ok(req.exact.to_vec())
    }
}

/// Zeroes the entries of the exact product that contribute least, keeping
/// the dropped part within the budget.
///
/// Entries are ranked by `w_i² / m_ii` (`m_ii` the diagonal of the metric
/// when available) with ties broken by index; the longest admissible prefix
/// of that order is found by bisection on the exactly measured dual norm.
#[derive(Debug, Clone, Copy, Default)]
pub struct Truncate;

impl ApproxApply for Truncate {
    fn label(&self) -> String {
        "truncate".into()
    }

    fn approximate(&self, req: &ApplyRequest<'_>) -> Result<Vec<f64>> {
        truncated(req)
    }
}

fn truncated(req: &ApplyRequest<'_>) -> Result<Vec<f64>> {
    let w = req.exact;
    let n = w.len();
    let budget = req.budget();
    if req.eps == 0.0 || n == 0 {
        return Ok(w.to_vec());
    }
    if req.dual_norm(w)? <= budget {
        return Ok(vec![0.0; n]);
    }
    let diag = req.metric.diagonal();
    let key = |i: usize| {
        let m = diag.as_ref().map_or(1.0, |d| d[i]);
        w[i] * w[i] / m
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| key(i).total_cmp(&key(j)).then(i.cmp(&j)));

    let dropped = |k: usize| -> Vec<f64> {
        let mut d = vec![0.0; n];
        for &i in &order[..k] {
            d[i] = w[i];
        }
        d
    };
    // lo is admissible, hi is not
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if req.dual_norm(&dropped(mid))? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut out = w.to_vec();
    for &i in &order[..lo] {
        out[i] = 0.0;
    }
    Ok(out)
}

/// Adds an error of dual norm exactly `factor · ε ‖v‖`.
///
/// With `adversarial` the error points along `±Mv` in the metric (the
/// direction that moves `⟨M_ε v, v⟩` the most); otherwise it is uniformly
/// random. `factor > 1` violates the contract on purpose.
#[derive(Debug)]
pub struct Saturating {
    pub factor: f64,
    pub adversarial: bool,
    rng: Mutex<ChaCha8Rng>,
}

impl Saturating {
    pub fn new(factor: f64, adversarial: bool, seed: u64) -> Self {
        Self {
            factor,
            adversarial,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl ApproxApply for Saturating {
    fn label(&self) -> String {
        format!(
            "saturating(x{}{})",
            self.factor,
            if self.adversarial { ", adversarial" } else { "" }
        )
    }

    fn approximate(&self, req: &ApplyRequest<'_>) -> Result<Vec<f64>> {
        let budget = self.factor * req.budget();
        if budget == 0.0 {
            return Ok(req.exact.to_vec());
        }
        let mut rng = self.rng.lock().expect("rng lock poisoned");
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let dir = if self.adversarial {
            apply(req.metric, req.v)?.into_inner()
        } else {
            (0..req.v.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        drop(rng);
        let size = req.dual_norm(&dir)?;
        if size == 0.0 {
            return Ok(req.exact.to_vec());
        }
        let mut out = req.exact.to_vec();
        axpy(sign * budget / size, &dir, &mut out);
        Ok(out)
    }
}

fn role_parts(problem: &EigenProblem, role: Role) -> (&dyn LinearOperator, &dyn LinearOperator) {
    match role {
        Role::Stiffness => (problem.a(), problem.p()),
        Role::Mass => (problem.e(), problem.e()),
    }
}

/// `M_ε(v)` for the stiffness (`A`) or mass (`E`) operator of `problem`.
pub fn apply_approx(
    problem: &EigenProblem,
    role: Role,
    v: &[f64],
    eps: f64,
    strategy: &dyn ApproxApply,
) -> Result<Vector> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps must be non-negative, got {eps}")));
    }
    let (op, metric) = role_parts(problem, role);
    if !op.capabilities().approx_apply {
        return Err(Error::MissingCapability {
            operator: op.name(),
            capability: "approximate apply",
        });
    }
    let exact = apply(op, v)?;
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let req = ApplyRequest {
        role,
        v,
        exact: &exact,
        eps,
        primal_norm: norm_in(metric, v)?,
        metric,
    };
    Vector::new(strategy.approximate(&req)?)
}

/// Exact data of one iterand, reused across the `ε` loop.
#[derive(Debug, Clone)]
pub struct Iterand<'p> {
    problem: &'p EigenProblem,
    pub v: Vec<f64>,
    pub av: Vec<f64>,
    pub ev: Vec<f64>,
    pub p_norm: f64,
    pub e_norm: f64,
    pub mu: f64,
}

/// Approximate products and residual at one tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxResidual {
    pub a_eps: Vec<f64>,
    pub e_eps: Vec<f64>,
    pub mu_eps: f64,
    pub r_eps: Vector,
}

impl<'p> Iterand<'p> {
    pub fn new(problem: &'p EigenProblem, v: &[f64]) -> Result<Self> {
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        let av = apply(problem.a(), v)?.into_inner();
        let ev = apply(problem.e(), v)?.into_inner();
        let e_sq = dot(&ev, v);
        if !(e_sq > 0.0) {
            return Err(Error::NotPositive { value: e_sq });
        }
        Ok(Self {
            problem,
            mu: dot(&av, v) / e_sq,
            p_norm: norm_in(problem.p(), v)?,
            e_norm: e_sq.sqrt(),
            v: v.to_vec(),
            av,
            ev,
        })
    }

    pub fn approx(&self, eps: f64, strategy: &dyn ApproxApply) -> Result<ApproxResidual> {
        let a_req = ApplyRequest {
            role: Role::Stiffness,
            v: &self.v,
            exact: &self.av,
            eps,
            primal_norm: self.p_norm,
            metric: self.problem.p(),
        };
        let a_eps = strategy.approximate(&a_req)?;
        let e_req = ApplyRequest {
            role: Role::Mass,
            v: &self.v,
            exact: &self.ev,
            eps,
            primal_norm: self.e_norm,
            metric: self.problem.e(),
        };
        let e_eps = strategy.approximate(&e_req)?;
        let den = dot(&e_eps, &self.v);
        if !(den > 0.0) {
            return Err(Error::NotPositive { value: den });
        }
        let mu_eps = dot(&a_eps, &self.v) / den;
        let mut r = a_eps.clone();
        axpy(-mu_eps, &e_eps, &mut r);
        Ok(ApproxResidual {
            a_eps,
            e_eps,
            mu_eps,
            r_eps: Vector::new(r)?,
        })
    }

    /// `(ρ_ε, P⁻¹r_ε)`
    pub fn estimate(&self, r_eps: &[f64]) -> Result<(f64, Vector)> {
        let w = apply_inverse(self.problem.p(), r_eps)?;
        let q = dot(&w, r_eps).max(0.0);
        Ok((q.sqrt() / self.p_norm, w))
    }
}

/// `μ_ε(v) = ⟨A_ε v, v⟩ / ⟨E_ε v, v⟩`
pub fn perturbed_rayleigh(problem: &EigenProblem, v: &[f64], eps: f64, strategy: &dyn ApproxApply) -> Result<f64> {
    Ok(Iterand::new(problem, v)?.approx(eps, strategy)?.mu_eps)
}

/// `r_ε(v) = A_ε v − μ_ε(v) E_ε v`
pub fn approx_residual(
    problem: &EigenProblem,
    v: &[f64],
    eps: f64,
    strategy: &dyn ApproxApply,
) -> Result<ApproxResidual> {
    Iterand::new(problem, v)?.approx(eps, strategy)
}

/// `ρ_ε(v) = ‖r_ε‖_{P⁻¹} / ‖v‖_P`
pub fn residual_estimator(p: &dyn LinearOperator, v: &[f64], r_eps: &[f64]) -> Result<f64> {
    let v_norm = norm_in(p, v)?;
    if v_norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(norm_in_inverse(p, r_eps)? / v_norm)
}

/// `ε ≤ c₃ ρ_ε`, inclusive.
pub fn accuracy_test(eps: f64, rho_eps: f64, c3: f64) -> bool {
    eps <= c3 * rho_eps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target bound on `ρ` of the returned vector.
    pub tau: f64,
    /// Defaults to the spectral constants' value.
    pub gamma_p: Option<f64>,
    /// Defaults to `(1 − γ_P)/2`.
    pub gamma_xi: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    /// Multiplies `c₁`, `c₂` and divides `c₃`; values below one relax the tests.
    pub constant_scale: f64,
    pub max_outer_steps: usize,
    pub max_halvings: usize,
    /// Defaults to `c₀`.
    pub epsilon_init: Option<f64>,
    pub seed: u64,
    /// Steps without a new best `ρ_ε` before a restart.
    pub stagnation_window: usize,
    pub max_restarts: usize,
    /// Reject `μ(v₀) ≥ λ₂` up front when `λ₂` is known.
    pub strict_start: bool,
    /// Measured constants; estimated from the problem when absent.
    pub spectral: Option<SpectralConstants>,
    pub estimate_trials: usize,
}

impl SolverConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            gamma_p: None,
            gamma_xi: None,
            c0: None,
            c1: None,
            c2: None,
            c3: None,
            constant_scale: 1.0,
            max_outer_steps: 10_000,
            max_halvings: 60,
            epsilon_init: None,
            seed: 0,
            stagnation_window: 50,
            max_restarts: 5,
            strict_start: false,
            spectral: None,
            estimate_trials: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.constant_scale > 0.0 && self.constant_scale <= 1.0) {
            return Err(Error::Config(format!(
                "constant_scale must be in (0, 1], got {}",
                self.constant_scale
            )));
        }
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if let Some(c) = c {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {c}")));
                }
            }
        }
        if let Some(e) = self.epsilon_init {
            if !(e > 0.0) {
                return Err(Error::Config(format!("epsilon_init must be positive, got {e}")));
            }
        }
        if self.max_outer_steps == 0 || self.estimate_trials == 0 {
            return Err(Error::Config("step cap and estimate trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// The tolerances of the adaptive step, independent of `v` and `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub gamma_p: f64,
    pub gamma_xi: f64,
}

impl Constants {
    /// `γ = γ_P + γ_ξ`
    pub fn gamma(&self) -> f64 {
        self.gamma_p + self.gamma_xi
    }

    /// Lower bound on `ε_exit / max(τ, ρ(v))` over all steps, assuming the
    /// approximate applies honour their contract and `max(τ, ρ) ≤ 1`.
    pub fn kappa_floor(&self) -> f64 {
        let g = self.gamma_p;
        let k = (1.0 + g) / (1.0 - g);
        let accurate = self.c3 * (1.0 - g) / (1.0 + self.c3 * (1.0 - g) * self.c2);
        let by_accuracy = accurate / (2.0 * k);
        let by_stopping = 1.0 / (2.0 * self.c2 * (k + 1.0));
        self.c0.min(0.5 * by_accuracy.min(by_stopping))
    }
}

/// Derives `c₀..c₃` from measured constants, honouring overrides and scale.
pub fn constants_for(consts: &SpectralConstants, config: &SolverConfig) -> Result<Constants> {
    config.validate()?;
    let sigma0 = consts.sigma0;
    let alpha = consts.alpha;
    if !(sigma0 > 0.0 && alpha > 0.0) {
        return Err(Error::Config("sigma0 and alpha must be positive".into()));
    }
    let lambda2 = consts
        .lambda2
        .ok_or_else(|| Error::Config("an upper bound for lambda2 is required".into()))?;
    let gamma_p = config.gamma_p.unwrap_or(consts.gamma_p);
    if !(0.0..1.0).contains(&gamma_p) {
        return Err(Error::Config(format!("gamma_p = {gamma_p} not in [0, 1)")));
    }
    let gamma_xi = config.gamma_xi.unwrap_or((1.0 - gamma_p) / 2.0);
    if !(gamma_xi > 0.0 && gamma_p + gamma_xi < 1.0) {
        return Err(Error::Config(format!(
            "need gamma_xi > 0 and gamma_p + gamma_xi < 1, got {gamma_p} + {gamma_xi}"
        )));
    }
    let s = config.constant_scale;
    let c0_max = 0.5f64.min(sigma0);
    let c0 = config.c0.unwrap_or(c0_max);
    if c0 > c0_max {
        return Err(Error::Config(format!("c0 = {c0} exceeds min(1/2, sigma0) = {c0_max}")));
    }
    let c1_base = 2.0 * (1.0 + 1.0 / sigma0) * lambda2;
    let c2_base = (1.0 + alpha * alpha * (lambda2 + 1.5 * c1_base)) / sigma0;
    let c3_base = gamma_xi / ((1.0 + gamma_p) * ((1.0 + gamma_p) * c2_base + gamma_xi * c2_base));
    Ok(Constants {
        c0,
        c1: config.c1.unwrap_or(c1_base * s),
        c2: config.c2.unwrap_or(c2_base * s),
        c3: config.c3.unwrap_or(c3_base / s),
        gamma_p,
        gamma_xi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Converged,
    Stepped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub status: StepStatus,
    pub vector: Vector,
    pub epsilon_final: f64,
    pub rho_eps_final: f64,
    pub mu_eps: f64,
    /// Exact `μ` of the input vector.
    pub mu: f64,
    pub halvings: usize,
}

/// One adaptive step: halve `ε` from `ε_init` until either the reliable
/// stopping bound falls below `τ` or `ε ≤ c₃ρ_ε`, then step with `P⁻¹r_ε`.
pub fn ppinvit_step(
    problem: &EigenProblem,
    v: &[f64],
    config: &SolverConfig,
    constants: &Constants,
    strategy: &dyn ApproxApply,
) -> Result<StepOutcome> {
    let it = Iterand::new(problem, v)?;
    let mut eps = config.epsilon_init.unwrap_or(constants.c0);
    for halvings in 0..=config.max_halvings {
        let approx = it.approx(eps, strategy)?;
        let (rho_eps, w) = it.estimate(&approx.r_eps)?;
        if rho_eps / (1.0 - constants.gamma_p) + constants.c2 * eps <= config.tau {
            let mut vector = v.to_vec();
            normalize_oriented(problem.e(), &mut vector, v)?;
            return Ok(StepOutcome {
                status: StepStatus::Converged,
                vector: Vector::new(vector)?,
                epsilon_final: eps,
                rho_eps_final: rho_eps,
                mu_eps: approx.mu_eps,
                mu: it.mu,
                halvings,
            });
        }
        if accuracy_test(eps, rho_eps, constants.c3) {
            let mut next = v.to_vec();
            axpy(-1.0, &w, &mut next);
            normalize_oriented(problem.e(), &mut next, v)?;
            return Ok(StepOutcome {
                status: StepStatus::Stepped,
                vector: Vector::new(next)?,
                epsilon_final: eps,
                rho_eps_final: rho_eps,
                mu_eps: approx.mu_eps,
                mu: it.mu,
                halvings,
            });
        }
        eps /= 2.0;
    }
    Err(Error::MaxHalvings(config.max_halvings))
}

/// One row of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub step: usize,
    /// Exact `μ` of the iterand after this step.
    pub mu: f64,
    pub mu_eps: f64,
    pub rho_eps: f64,
    pub epsilon: f64,
    pub halvings: usize,
    /// Shifted-ratio contraction check; `None` when not applicable.
    pub bound_ok: Option<bool>,
}

/// What an observer of [`solve_observed`] sees after each step.
pub struct StepEvent<'a> {
    pub record: &'a ConvergenceRecord,
    pub before: &'a [f64],
    pub outcome: &'a StepOutcome,
    pub constants: &'a Constants,
    pub restarted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mu: f64,
    pub v: Vector,
    pub log: Vec<ConvergenceRecord>,
    pub constants: Constants,
    pub spectral: SpectralConstants,
    pub restarts: usize,
    pub strategy: String,
}

/// Measured constants for `problem`, with `λ₁`, `λ₂` filled in from metadata
/// or, failing that, a deflated exact iteration.
pub fn resolve_spectral(problem: &EigenProblem, config: &SolverConfig) -> Result<SpectralConstants> {
    if let Some(s) = config.spectral {
        s.validate()?;
        return Ok(s);
    }
    let mut s = estimate_constants(problem, config.estimate_trials)?;
    if problem.dim() == 1 {
        // the spectrum is {λ₁}; any larger value bounds μ(v) from above
        let l1 = Iterand::new(problem, &[1.0])?.mu;
        s.lambda1 = Some(l1);
        s.lambda2 = Some(2.0 * l1);
    } else if s.lambda2.is_none() {
        let pair = estimate_lowest_pair(problem, 1e-11, 20_000, config.seed ^ 0x1a2b)?;
        s.lambda1 = Some(pair.lambda1);
        s.lambda2 = Some(pair.lambda2);
    }
    s.validate()?;
    Ok(s)
}

pub fn solve(
    problem: &EigenProblem,
    v0: &[f64],
    config: &SolverConfig,
    strategy: &dyn ApproxApply,
) -> Result<SolveReport> {
    solve_observed(problem, v0, config, strategy, &mut |_| {})
}

/// [`solve`] with a callback after every outer step.
pub fn solve_observed(
    problem: &EigenProblem,
    v0: &[f64],
    config: &SolverConfig,
    strategy: &dyn ApproxApply,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<SolveReport> {
    config.validate()?;
    let spectral = resolve_spectral(problem, config)?;
    let constants = constants_for(&spectral, config)?;
    let q_squared = match (spectral.lambda1, spectral.lambda2) {
        (Some(l1), Some(l2)) => {
            let gamma = constants.gamma().min(1.0 - f64::EPSILON);
            Some((l1, l2, convergence_factor(gamma, l1, l2)?.powi(2)))
        }
        _ => None,
    };

    let mut v = v0.to_vec();
    if v.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: v.len(),
        });
    }
    normalize_oriented(problem.e(), &mut v, v0).map_err(|_| Error::ZeroVector)?;
    if config.strict_start {
        if let Some(l2) = spectral.lambda2 {
            let mu0 = Iterand::new(problem, &v)?.mu;
            if mu0 >= l2 {
                return Err(Error::BadStart(format!("mu(v0) = {mu0} is not below lambda2 = {l2}")));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = Vec::new();
    let mut restarts = 0;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut restarted = false;
    for step in 0..config.max_outer_steps {
        let outcome = ppinvit_step(problem, &v, config, &constants, strategy)?;
        let mu_after = match outcome.status {
            StepStatus::Converged => outcome.mu,
            StepStatus::Stepped => Iterand::new(problem, &outcome.vector)?.mu,
        };
        let bound_ok = match (outcome.status, q_squared) {
            (StepStatus::Stepped, Some((l1, l2, q2))) => ratio_bound_holds(outcome.mu, mu_after, l1, l2, q2),
            _ => None,
        };
        let record = ConvergenceRecord {
            step,
            mu: mu_after,
            mu_eps: outcome.mu_eps,
            rho_eps: outcome.rho_eps_final,
            epsilon: outcome.epsilon_final,
            halvings: outcome.halvings,
            bound_ok,
        };
        observer(&StepEvent {
            record: &record,
            before: &v,
            outcome: &outcome,
            constants: &constants,
            restarted,
        });
        restarted = false;
        log.push(record);
        if outcome.status == StepStatus::Converged {
            return Ok(SolveReport {
                mu: mu_after,
                v: outcome.vector,
                log,
                constants,
                spectral,
                restarts,
                strategy: strategy.label(),
            });
        }
        v = outcome.vector.into_inner();

        if outcome.rho_eps_final < best * (1.0 - 1e-3) {
            best = outcome.rho_eps_final;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.stagnation_window {
            restarts += 1;
            if restarts > config.max_restarts {
                return Err(Error::BadStart(format!(
                    "no progress after {} restarts",
                    config.max_restarts
                )));
            }
            let fresh: Vec<f64> = (0..v.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            v = fresh.clone();
            normalize_oriented(problem.e(), &mut v, &fresh)?;
            best = f64::INFINITY;
            since_best = 0;
            restarted = true;
        }
    }
    Err(Error::MaxSteps(config.max_outer_steps))
}

/// Seeded uniform `(0, 1)` starting vector.
pub fn random_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::Diagonal;
    use crate::pinvit::{pinvit_step, residual_measure, StepContext};
    use crate::problems::{dense_problem, fd_laplacian_with, DenseMatrix, GridSpec, PreconditionerChoice};

    fn diag123() -> EigenProblem {
        let mut pr = dense_problem(
            DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]),
            DenseMatrix::identity(3),
            DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]),
        )
        .unwrap();
        pr.meta_mut().lambda1 = Some(1.0);
        pr.meta_mut().lambda2 = Some(2.0);
        pr
    }

    #[test]
    fn constants_worked_example() {
        let consts = SpectralConstants {
            sigma0: 1.0,
            sigma1: 1.0,
            alpha: 1.0,
            gamma_p: 0.0,
            lambda1: Some(1.0),
            lambda2: Some(2.0),
        };
        let c = constants_for(&consts, &SolverConfig::new(1e-6)).unwrap();
        assert_eq!(c.c0, 0.5);
        assert_eq!(c.c1, 8.0);
        assert_eq!(c.c2, 15.0);
        assert!((c.c3 - 1.0 / 45.0).abs() < 1e-17);
        assert_eq!(c.gamma_xi, 0.5);

        let near_one = constants_for(
            &SpectralConstants {
                gamma_p: 1.0 - 1e-9,
                ..consts
            },
            &SolverConfig::new(1e-6),
        )
        .unwrap();
        assert!(near_one.c3 < 1e-9);

        let relaxed = constants_for(
            &consts,
            &SolverConfig {
                constant_scale: 0.5,
                ..SolverConfig::new(1e-6)
            },
        )
        .unwrap();
        assert_eq!((relaxed.c1, relaxed.c2), (4.0, 7.5));
        assert!((relaxed.c3 - 2.0 / 45.0).abs() < 1e-17);

        let missing = SpectralConstants { lambda2: None, ..consts };
        assert!(constants_for(&missing, &SolverConfig::new(1e-6)).is_err());
    }

    #[test]
    fn accuracy_test_boundaries() {
        assert!(accuracy_test(0.0, 0.0, 1.0));
        assert!(accuracy_test(0.0, 3.0, 0.1));
        assert!(!accuracy_test(1e-3, 0.0, 0.1));
        assert!(accuracy_test(0.25, 0.5, 0.5));
    }

    #[test]
    fn zero_eps_is_exact() {
        let pr = diag123();
        let v = [1.0, 1.0, 1.0];
        let strat = Saturating::new(1.0, true, 7);
        let a0 = apply_approx(&pr, Role::Stiffness, &v, 0.0, &strat).unwrap();
        assert_eq!(a0.as_slice(), &[1.0, 2.0, 3.0]);
        let t = apply_approx(&pr, Role::Stiffness, &v, 0.0, &Truncate).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(perturbed_rayleigh(&pr, &v, 0.0, &strat).unwrap(), 2.0);
        assert_eq!(perturbed_rayleigh(&pr, &[1.0, 0.0, 0.0], 0.0, &Truncate).unwrap(), 1.0);
        let r = approx_residual(&pr, &[0.0, 5.0, 0.0], 0.0, &Truncate).unwrap();
        assert!(r.r_eps.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn huge_eps_truncates_to_zero() {
        let pr = diag123();
        let v = [1.0, -1.0, 2.0];
        let z = apply_approx(&pr, Role::Stiffness, &v, 1.5, &Truncate).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn truncation_meets_contract_on_fd() {
        let grid = GridSpec::interval_nodes(15).unwrap();
        let pr = fd_laplacian_with(&grid, PreconditionerChoice::Jacobi).unwrap();
        let v = random_start(15, 3);
        let w = apply_approx(&pr, Role::Stiffness, &v, 0.1, &Truncate).unwrap();
        let exact = apply(pr.a(), &v).unwrap();
        let mut d = w.clone().into_inner();
        axpy(-1.0, &exact, &mut d);
        let err = norm_in_inverse(pr.p(), &d).unwrap();
        assert!(err <= 0.1 * norm_in(pr.p(), &v).unwrap());
        assert!(w.iter().filter(|&&x| x == 0.0).count() > 0);
    }

    #[test]
    fn residual_estimator_with_p_equal_a_is_rho() {
        let pr = dense_problem(
            DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            DenseMatrix::identity(2),
            DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        )
        .unwrap();
        let v = [0.4, 1.0];
        let r = approx_residual(&pr, &v, 0.0, &Exact).unwrap();
        let est = residual_estimator(pr.p(), &v, &r.r_eps).unwrap();
        let rho = residual_measure(pr.a(), pr.e(), &v).unwrap();
        assert!((est - rho).abs() < 1e-14);
        assert_eq!(residual_estimator(pr.p(), &v, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn exact_strategy_step_matches_pinvit() {
        let pr = diag123();
        let v = [1.0, 1.0, 1.0];
        let cfg = SolverConfig::new(1e-12);
        let spectral = resolve_spectral(&pr, &cfg).unwrap();
        let c = constants_for(&spectral, &cfg).unwrap();
        let out = ppinvit_step(&pr, &v, &cfg, &c, &Exact).unwrap();
        assert_eq!(out.status, StepStatus::Stepped);
        let reference = pinvit_step(&pr, &v, None, &StepContext::default()).unwrap();
        for (a, b) in out.vector.iter().zip(reference.next.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn eigenvector_converges_immediately() {
        let pr = diag123();
        let report = solve(&pr, &[2.0, 0.0, 0.0], &SolverConfig::new(1e-8), &Truncate).unwrap();
        assert_eq!(report.log.len(), 1);
        assert_eq!(report.mu, 1.0);
    }

    #[test]
    fn diag123_solve_reaches_tau() {
        let pr = diag123();
        let s = 1.0 / 3f64.sqrt();
        let report = solve(&pr, &[s, s, s], &SolverConfig::new(1e-8), &Truncate).unwrap();
        let last = report.v.clone();
        assert!(residual_measure(pr.a(), pr.e(), &last).unwrap() <= 1e-8);
        assert!((report.mu - 1.0).abs() < 1e-14);
        assert!(report.log.iter().all(|r| r.bound_ok != Some(false)));
    }

    #[test]
    fn solve_is_deterministic() {
        let grid = GridSpec::interval_nodes(15).unwrap();
        let pr = fd_laplacian_with(&grid, PreconditionerChoice::Multilevel).unwrap();
        let v0 = random_start(15, 11);
        let cfg = SolverConfig::new(1e-8);
        let a = solve(&pr, &v0, &cfg, &Saturating::new(1.0, true, 5)).unwrap();
        let b = solve(&pr, &v0, &cfg, &Saturating::new(1.0, true, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_node_problem() {
        let grid = GridSpec::interval_nodes(1).unwrap();
        let pr = fd_laplacian_with(&grid, PreconditionerChoice::Jacobi).unwrap();
        let cfg = SolverConfig {
            spectral: Some(SpectralConstants {
                sigma0: 1.0,
                sigma1: 1.0,
                alpha: 0.5,
                gamma_p: 0.0,
                lambda1: Some(8.0),
                lambda2: Some(9.0),
            }),
            ..SolverConfig::new(1e-8)
        };
        let report = solve(&pr, &[1.0], &cfg, &Truncate).unwrap();
        assert_eq!(report.mu, 8.0);
        let _ = Diagonal::new(vec![1.0]).unwrap();
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(0.0);
        assert!(cfg.validate().is_err());
        cfg.tau = 1e-3;
        cfg.constant_scale = 1.5;
        assert!(cfg.validate().is_err());
        cfg.constant_scale = 1.0;
        cfg.c2 = Some(-1.0);
        assert!(cfg.validate().is_err());
    }
}
