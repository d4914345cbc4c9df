//! Randomized audits of the convergence bounds against the dense oracle.
//!
//! Every suite draws small random pencils, runs the solver-side code on them
//! and checks the relevant inequality with quantities measured by
//! [`crate::oracle`]. Reports contain no timings, so equal options give
//! byte-identical output.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inexact::{accuracy_test, constants_for, ApproxApply, Iterand, Saturating, SolverConfig};
use crate::linop::{axpy, estimate_constants, norm_in, LinearOperator, OperatorKind, SpectralConstants};
use crate::oracle::{audit_step, Matrix, OraclePencil, Verdict};
use crate::pinvit::{
    angle_bounds, model_step, pinvit_step, rayleigh_quotient, residual_measure, sin_angle_to_eigenspace,
    temple_kato_gap, ModelSpace, StepContext,
};
use crate::problems::{DenseMatrix, DenseOperator, EigenProblem};

/// Absolute slack on every audited inequality.
pub const SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Trials of the contraction suites; the others run a fixed fraction.
    pub trials: usize,
    pub seed: u64,
    /// Largest pencil dimension drawn.
    pub max_dim: usize,
    /// Replace the contract-honouring approximate apply by one with twice
    /// the admissible error.
    pub inject_violation: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 20,
            max_dim: 50,
            inject_violation: false,
        }
    }
}

/// Replayable description of a failed check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub suite: String,
    pub trial: usize,
    pub trial_seed: u64,
    pub a: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub eps: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    /// Draws where the inequality's premise did not hold.
    pub skipped: usize,
    /// Largest `lhs / rhs` seen; at most one when every check passes.
    pub worst: f64,
    pub counterexample: Option<Counterexample>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub suites: Vec<SuiteReport>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn first_counterexample(&self) -> Option<&Counterexample> {
        self.suites.iter().find_map(|s| s.counterexample.as_ref())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:>7} {:>8} {:>8} {:>8} {:>12}  result",
            "suite", "trials", "checks", "failures", "skipped", "worst"
        );
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{:<28} {:>7} {:>8} {:>8} {:>8} {:>12.6e}  {}",
                s.name,
                s.trials,
                s.checks,
                s.failures,
                s.skipped,
                s.worst,
                if s.passed() { "pass" } else { "FAIL" }
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// A random dense pencil with its oracle.
#[derive(Debug, Clone)]
pub struct RandomPencil {
    pub problem: EigenProblem,
    pub oracle: OraclePencil,
    /// Oracle-measured `‖I − P⁻¹A‖_A`.
    pub gamma_p: f64,
}

impl RandomPencil {
    pub fn lambda1(&self) -> f64 {
        self.oracle.lambda1()
    }

    pub fn lambda2(&self) -> Option<f64> {
        self.oracle.lambda2()
    }

    fn context(&self) -> StepContext {
        StepContext {
            gamma_p: self.gamma_p,
            gamma_xi: None,
            lambda1: Some(self.lambda1()),
            lambda2: self.lambda2(),
        }
    }
}

fn random_spd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..n {
                s += g[k * n + i] * g[k * n + j];
            }
            s /= n as f64;
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
        m[i * n + i] += shift;
    }
    m
}

/// Draws `A = GᵀG/n + sI`, `E = HᵀH/n + sI` and a preconditioner with
/// `γ_P ≤ max_gamma`: either `P = A`, or a blend of `A` with an unrelated SPD
/// matrix, rescaled to centre the spectrum of `P⁻¹A`.
pub fn random_pencil(rng: &mut ChaCha8Rng, max_dim: usize, max_gamma: f64) -> Result<RandomPencil> {
    let n = rng.gen_range(2..=max_dim.max(2));
    let a = random_spd(n, rng.gen_range(0.05..1.0), rng);
    let e = random_spd(n, rng.gen_range(0.2..1.0), rng);
    let a_m = Matrix::from_row_major(n, &a)?;
    let e_m = Matrix::from_row_major(n, &e)?;

    let (p, gamma_p) = if rng.gen_bool(0.2) {
        (a.clone(), 0.0)
    } else {
        let q = random_spd(n, rng.gen_range(0.05..1.0), rng);
        let mut t: f64 = rng.gen_range(0.05..1.0);
        loop {
            let blend: Vec<f64> = a.iter().zip(&q).map(|(x, y)| (1.0 - t) * x + t * y).collect();
            let (lo, hi) = OraclePencil::pencil_bounds(&a_m, &Matrix::from_row_major(n, &blend)?)?;
            // P = s·blend gives θ ∈ [lo/s, hi/s]; centre on one
            let s = 0.5 * (lo + hi);
            let gamma = (hi - lo) / (hi + lo);
            if gamma <= max_gamma || t < 1e-6 {
                break (blend.iter().map(|x| x * s).collect::<Vec<_>>(), gamma);
            }
            t *= 0.5;
        }
    };
    let p_m = Matrix::from_row_major(n, &p)?;
    let oracle = OraclePencil::new(a_m, e_m, p_m)?;
    let gamma_p = if gamma_p == 0.0 { 0.0 } else { oracle.gamma_p()? };

    let op = |m: &[f64], kind| -> Result<Arc<dyn LinearOperator>> {
        Ok(Arc::new(DenseOperator::new(DenseMatrix::from_row_major(n, m.to_vec())?, kind)?))
    };
    let mut problem = EigenProblem::new(
        op(&a, OperatorKind::Stiffness)?,
        op(&e, OperatorKind::Mass)?,
        op(&p, OperatorKind::Preconditioner)?,
    )?;
    let meta = problem.meta_mut();
    meta.id = format!("random-{n}");
    meta.lambda1 = Some(oracle.lambda1());
    meta.lambda2 = oracle.lambda2();
    meta.gamma_p = Some(gamma_p);
    Ok(RandomPencil {
        problem,
        oracle,
        gamma_p,
    })
}

/// A vector with `λ₁ < μ(v) < λ₂`: the lowest eigenvector plus a random
/// combination of the others, weighted so the quotient lands inside the
/// bracket.
pub fn vector_in_bracket(pencil: &RandomPencil, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let l1 = pencil.lambda1();
    let l2 = pencil.lambda2()?;
    let spec = &pencil.oracle.spectrum;
    let n = spec.eigenvalues.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        if spec.eigenvalues[k] > l1 * (1.0 + 1e-10) {
            axpy(rng.gen_range(-1.0..1.0), &spec.eigenvectors[k], &mut w);
        }
    }
    let w_norm = pencil.oracle.e_norm(&w);
    if w_norm == 0.0 {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= w_norm);
    let mu_w = pencil.oracle.rayleigh(&w);
    let u: f64 = rng.gen_range(0.01..0.99);
    let t2 = if mu_w > l2 * (1.0 + 1e-8) { (u * (l2 - l1) / (mu_w - l2)).min(100.0) } else { u * 10.0 };
    let mut v = spec.eigenvectors[0].clone();
    axpy(t2.sqrt(), &w, &mut v);
    let s: f64 = rng.gen_range(0.1..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    v.iter_mut().for_each(|x| *x *= s);
    let mu = pencil.oracle.rayleigh(&v);
    (mu > l1 && mu < l2).then_some(v)
}

/// Outcome of one check inside a trial.
#[derive(Debug, Clone)]
struct Check {
    ok: bool,
    lhs: f64,
    rhs: f64,
    detail: String,
    v: Vec<f64>,
    eps: Option<f64>,
}

impl Check {
    fn leq(lhs: f64, rhs: f64, detail: impl FnOnce() -> String, v: &[f64], eps: Option<f64>) -> Self {
        let ok = lhs <= rhs;
        Self {
            ok,
            lhs,
            rhs,
            detail: if ok { String::new() } else { detail() },
            v: if ok { Vec::new() } else { v.to_vec() },
            eps,
        }
    }

    fn failed(detail: String, v: &[f64], eps: Option<f64>) -> Self {
        Self {
            ok: false,
            lhs: f64::INFINITY,
            rhs: 0.0,
            detail,
            v: v.to_vec(),
            eps,
        }
    }

    fn utilisation(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Per-trial result: the pencil (kept only for failures) and the checks.
struct TrialResult {
    checks: Vec<(usize, Check)>,
    skipped: Vec<usize>,
    pencil: Option<RandomPencil>,
    trial_seed: u64,
}

fn trial_seed(seed: u64, suite: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(suite << 40)
        .wrapping_add(trial as u64)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows()
}

/// Runs `trials` independent draws in parallel and folds the checks of each
/// named sub-suite in trial order.
fn run_suites<F>(names: &[&str], suite_tag: u64, trials: usize, seed: u64, body: F) -> Vec<SuiteReport>
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<(usize, Check)>, &mut Vec<usize>) -> Result<Option<RandomPencil>> + Sync,
{
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let ts = trial_seed(seed, suite_tag, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(ts);
            let mut checks = Vec::new();
            let mut skipped = Vec::new();
            let pencil = match body(&mut rng, &mut checks, &mut skipped) {
                Ok(p) => p,
                Err(err) => {
                    for s in 0..names.len() {
                        checks.push((
                            s,
                            Check {
                                ok: false,
                                lhs: f64::INFINITY,
                                rhs: 0.0,
                                detail: format!("error: {err}"),
                                v: Vec::new(),
                                eps: None,
                            },
                        ));
                    }
                    None
                }
            };
            let failed = checks.iter().any(|(_, c)| !c.ok);
            TrialResult {
                checks,
                skipped,
                pencil: if failed { pencil } else { None },
                trial_seed: ts,
            }
        })
        .collect();

    names
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let mut report = SuiteReport {
                name: (*name).to_string(),
                trials,
                checks: 0,
                failures: 0,
                skipped: 0,
                worst: 0.0,
                counterexample: None,
            };
            for (trial, res) in results.iter().enumerate() {
                report.skipped += res.skipped.iter().filter(|&&k| k == s).count();
                for (_, check) in res.checks.iter().filter(|(k, _)| *k == s) {
                    report.checks += 1;
                    report.worst = report.worst.max(check.utilisation());
                    if !check.ok {
                        report.failures += 1;
                        if report.counterexample.is_none() {
                            let (a, e, p) = match &res.pencil {
                                Some(pc) => (rows(&pc.oracle.a), rows(&pc.oracle.e), rows(&pc.oracle.p)),
                                None => (Vec::new(), Vec::new(), Vec::new()),
                            };
                            report.counterexample = Some(Counterexample {
                                suite: (*name).to_string(),
                                trial,
                                trial_seed: res.trial_seed,
                                a,
                                e,
                                p,
                                v: check.v.clone(),
                                eps: check.eps,
                                detail: check.detail.clone(),
                            });
                        }
                    }
                }
            }
            report
        })
        .collect()
}

/// Shifted-ratio contraction of exact steps, `q = 1 − (1−γ_P)(1 − λ₁/λ₂)`.
pub fn contraction_suite(opts: &VerifyOptions, perturbed: bool) -> Vec<SuiteReport> {
    let name = if perturbed { "ratio-contraction-perturbed" } else { "ratio-contraction" };
    let monotone = if perturbed { "monotone-descent-perturbed" } else { "monotone-descent" };
    let max_dim = opts.max_dim;
    run_suites(&[name, monotone], 1 + perturbed as u64, opts.trials, opts.seed, |rng, checks, skipped| {
        let pencil = random_pencil(rng, max_dim, 0.9)?;
        let Some(mut v) = vector_in_bracket(&pencil, rng) else {
            skipped.push(0);
            skipped.push(1);
            return Ok(Some(pencil));
        };
        let l2 = pencil.lambda2().expect("bracket exists");
        let gamma_xi = (1.0 - pencil.gamma_p) / 2.0;
        let gamma = if perturbed { pencil.gamma_p + gamma_xi } else { pencil.gamma_p };
        for _ in 0..3 {
            let mu = pencil.oracle.rayleigh(&v);
            if !(mu > pencil.lambda1() && mu < l2) {
                break;
            }
            let xi = if perturbed {
                Some(boundary_perturbation(&pencil, &v, gamma_xi, rng))
            } else {
                None
            };
            let ctx = StepContext {
                gamma_xi: perturbed.then_some(gamma_xi),
                ..pencil.context()
            };
            let step = pinvit_step(&pencil.problem, &v, xi.as_deref(), &ctx)?;
            let row = audit_step(&pencil.oracle, &v, &step.next, gamma);
            match row.verdict {
                Verdict::NotApplicable => skipped.push(0),
                verdict => checks.push((
                    0,
                    Check {
                        ok: verdict == Verdict::Pass,
                        lhs: row.ratio_after,
                        rhs: row.q_squared * row.ratio_before + crate::oracle::AUDIT_SLACK,
                        detail: format!(
                            "ratio {:e} -> {:e}, q^2 = {:e}, gamma = {gamma}",
                            row.ratio_before, row.ratio_after, row.q_squared
                        ),
                        v: if verdict == Verdict::Pass { Vec::new() } else { v.clone() },
                        eps: None,
                    },
                )),
            }
            let mu_next = pencil.oracle.rayleigh(&step.next);
            checks.push((
                1,
                Check::leq(mu_next, mu + 1e-12 * mu.abs(), || format!("mu rose from {mu} to {mu_next}"), &v, None),
            ));
            v = step.next.into_inner();
        }
        Ok(Some(pencil))
    })
}

/// `ξ` with `‖ξ‖_A = γ_ξ ρ(v) ‖v‖_A`: half the draws point along the
/// non-lowest part of `v` (amplifying the error), the rest are random.
fn boundary_perturbation(pencil: &RandomPencil, v: &[f64], gamma_xi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = v.len();
    let dir: Vec<f64> = if rng.gen_bool(0.5) {
        let x1 = &pencil.oracle.spectrum.eigenvectors[0];
        let ex1 = pencil.oracle.e.mul_vec(x1);
        let c: f64 = ex1.iter().zip(v).map(|(a, b)| a * b).sum();
        let mut d = v.to_vec();
        axpy(-c, x1, &mut d);
        d
    } else {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let size = pencil.oracle.a_norm(&dir);
    let target = gamma_xi * pencil.oracle.rho(v) * pencil.oracle.a_norm(v);
    if size == 0.0 {
        return vec![0.0; n];
    }
    dir.iter().map(|d| d * target / size).collect()
}

/// Angle sandwich in terms of `ρ`, and the Temple–Kato inequality for the
/// reduced operator `B = A⁻¹E`.
pub fn angle_suite(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let trials = opts.trials.div_ceil(2);
    let max_dim = opts.max_dim.min(30);
    run_suites(&["angle-sandwich", "temple-kato"], 3, trials, opts.seed, |rng, checks, skipped| {
        let pencil = random_pencil(rng, max_dim, 0.9)?;
        let Some(v) = vector_in_bracket(&pencil, rng) else {
            skipped.push(0);
            skipped.push(1);
            return Ok(Some(pencil));
        };
        let (l1, l2) = (pencil.lambda1(), pencil.lambda2().expect("bracket exists"));
        let pr = &pencil.problem;
        let mu = rayleigh_quotient(pr.a(), pr.e(), &v)?;
        let rho = residual_measure(pr.a(), pr.e(), &v)?;
        let bounds = angle_bounds(mu.max(l1), l1, l2, rho)?;
        let sin = pencil.oracle.sin_angle_lowest(&v);
        let tol = |x: f64| x * (1.0 + 1e-10) + SLACK;
        checks.push((
            0,
            Check::leq(bounds.lower, tol(sin), || format!("lower {} > sin {sin}", bounds.lower), &v, None),
        ));
        checks.push((
            0,
            Check::leq(sin, tol(bounds.upper), || format!("sin {sin} > upper {}", bounds.upper), &v, None),
        ));
        // the solver-side projection agrees with the oracle's Gram solve
        let basis: Vec<Vec<f64>> = pencil
            .oracle
            .lowest_eigenspace()
            .into_iter()
            .map(|x| {
                let s = pencil.oracle.a_norm(&x);
                x.iter().map(|c| c / s).collect()
            })
            .collect();
        let solver_sin = sin_angle_to_eigenspace(pr.a(), &v, &basis)?;
        checks.push((
            0,
            Check::leq(
                (solver_sin - sin).abs(),
                1e-8 * sin.max(1e-6),
                || format!("projection mismatch {solver_sin} vs {sin}"),
                &v,
                None,
            ),
        ));

        let space = ModelSpace::from_problem(pr);
        let (lhs, rhs) = temple_kato_gap(&space, &v, 1.0 / l1, 1.0 / l2)?;
        checks.push((
            1,
            Check::leq(lhs, rhs * (1.0 + 1e-10) + 1e-14 / (l1 * l1), || format!("{lhs} > {rhs}"), &v, None),
        ));
        drop(space);
        Ok(Some(pencil))
    })
}

/// The reduced iteration with `B = A⁻¹E`, `T = P⁻¹A` formed explicitly
/// reproduces the unnormalized step, and `μ(v) μ_B(v) = 1`.
pub fn equivalence_suite(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let trials = opts.trials.div_ceil(10);
    let max_dim = opts.max_dim;
    run_suites(&["model-equivalence"], 4, trials, opts.seed, |rng, checks, _| {
        let pencil = random_pencil(rng, max_dim, 0.9)?;
        let pr = &pencil.problem;
        let n = pr.dim();
        let b = explicit_product(pr.a(), pr.e(), n)?;
        let t = explicit_product(pr.p(), pr.a(), n)?;
        let space = ModelSpace {
            b: Box::new(move |x| {
                let mut y = vec![0.0; x.len()];
                b.matvec(x, &mut y);
                Ok(y)
            }),
            t: Box::new(move |x| {
                let mut y = vec![0.0; x.len()];
                t.matvec(x, &mut y);
                Ok(y)
            }),
            gram: pr.a(),
        };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = model_step(&space, &x, None)?;
        let step = pinvit_step(pr, &x, None, &StepContext::default())?;
        let mut diff = model.into_inner();
        axpy(-1.0, &step.raw, &mut diff);
        let rel = norm_in(pr.a(), &diff)? / norm_in(pr.a(), &step.raw)?;
        checks.push((0, Check::leq(rel, 1e-10, || format!("A-norm mismatch {rel:e}"), &x, None)));
        let mu = rayleigh_quotient(pr.a(), pr.e(), &x)?;
        let mu_b = space.rayleigh(&x)?;
        let err = (mu * mu_b - 1.0).abs();
        checks.push((0, Check::leq(err, 1e-12, || format!("mu * mu_B - 1 = {err:e}"), &x, None)));
        drop(space);
        Ok(Some(pencil))
    })
}

/// `M⁻¹N` as an explicit dense matrix, column by column.
fn explicit_product(m: &dyn LinearOperator, n_op: &dyn LinearOperator, n: usize) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut sol = vec![0.0; n];
    for j in 0..n {
        unit.iter_mut().for_each(|x| *x = 0.0);
        unit[j] = 1.0;
        n_op.apply_into(&unit, &mut col);
        m.solve_into(&col, &mut sol)?;
        for i in 0..n {
            out[(i, j)] = sol[i];
        }
    }
    Ok(out)
}

/// Perturbed Rayleigh quotient, residual, estimator sandwich and accuracy
/// implication under contract-saturating approximate applies.
pub fn perturbation_suite(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let trials = opts.trials.div_ceil(2);
    let max_dim = opts.max_dim.min(20);
    let factor = if opts.inject_violation { 2.0 } else { 1.0 };
    let names = [
        "rayleigh-perturbation",
        "residual-perturbation",
        "estimator-sandwich",
        "accuracy-implication",
    ];
    run_suites(&names, 5, trials, opts.seed, |rng, checks, skipped| {
        let pencil = random_pencil(rng, max_dim, 0.9)?;
        let Some(v) = vector_in_bracket(&pencil, rng) else {
            skipped.extend(0..4);
            return Ok(Some(pencil));
        };
        let pr = &pencil.problem;
        let spectral = SpectralConstants {
            lambda1: Some(pencil.lambda1()),
            lambda2: pencil.lambda2(),
            ..estimate_constants(pr, 2)?
        };
        let c = constants_for(&spectral, &SolverConfig::new(1.0))?;
        let strategy = Saturating::new(factor, rng.gen_bool(0.5), rng.gen());
        let it = Iterand::new(pr, &v)?;
        let or = &pencil.oracle;
        let rho = or.rho(&v);
        let v_a = or.a_norm(&v);
        let exact_r = or.residual(&v);
        let mu = or.rayleigh(&v);
        let rel = 1.0 + 1e-9;

        let eps = c.c0 * 10f64.powf(-rng.gen_range(0.0..6.0));
        let e_ = Some(eps);
        let approx = match it.approx(eps, &strategy) {
            Ok(a) => a,
            Err(err) => {
                for k in 0..4 {
                    checks.push((k, Check::failed(format!("approximate apply broke down: {err}"), &v, e_)));
                }
                return Ok(Some(pencil));
            }
        };

        // the contract itself, measured independently
        let mut da = approx.a_eps.clone();
        axpy(-1.0, &it.av, &mut da);
        let mut de = approx.e_eps.clone();
        axpy(-1.0, &it.ev, &mut de);
        let a_err = or.p_inv_norm(&da);
        let e_err = or.e_inv_norm(&de);
        let a_budget = eps * or.p_norm(&v) * rel;
        let e_budget = eps * or.e_norm(&v) * rel;
        checks.push((1, Check::leq(a_err, a_budget, || format!("A_eps contract: {a_err:e} > {a_budget:e}"), &v, e_)));
        checks.push((1, Check::leq(e_err, e_budget, || format!("E_eps contract: {e_err:e} > {e_budget:e}"), &v, e_)));

        let dmu = (approx.mu_eps - mu).abs();
        checks.push((
            0,
            Check::leq(dmu, c.c1 * eps * rel + 1e-13 * mu, || format!("|mu_eps - mu| = {dmu:e}, c1 eps = {:e}", c.c1 * eps), &v, e_),
        ));

        let mut dr = approx.r_eps.clone().into_inner();
        axpy(-1.0, &exact_r, &mut dr);
        let r_err = or.a_inv_norm(&dr) / v_a;
        checks.push((
            1,
            Check::leq(r_err, c.c2 * eps * rel + SLACK * 1e-3, || format!("residual error {r_err:e} > c2 eps {:e}", c.c2 * eps), &v, e_),
        ));

        let (rho_eps, _) = it.estimate(&approx.r_eps)?;
        let lower = rho_eps / (1.0 + c.gamma_p) - c.c2 * eps;
        let upper = rho_eps / (1.0 - c.gamma_p) + c.c2 * eps;
        checks.push((2, Check::leq(lower, rho * rel + SLACK, || format!("lower {lower:e} > rho {rho:e}"), &v, e_)));
        checks.push((2, Check::leq(rho, upper * rel + SLACK, || format!("rho {rho:e} > upper {upper:e}"), &v, e_)));

        // halve from c0 until the accuracy test passes, then measure the
        // realized preconditioned perturbation
        let mut eps = c.c0;
        let mut passed = None;
        for _ in 0..200 {
            let approx = match it.approx(eps, &strategy) {
                Ok(a) => a,
                Err(err) => {
                    checks.push((3, Check::failed(format!("approximate apply broke down: {err}"), &v, Some(eps))));
                    return Ok(Some(pencil));
                }
            };
            let (rho_eps, _) = it.estimate(&approx.r_eps)?;
            if accuracy_test(eps, rho_eps, c.c3) {
                passed = Some(approx);
                break;
            }
            eps /= 2.0;
        }
        match passed {
            None => skipped.push(3),
            Some(approx) => {
                let mut dr = approx.r_eps.into_inner();
                axpy(-1.0, &exact_r, &mut dr);
                let xi = or.solve_p(&dr);
                let realized = or.a_norm(&xi) / v_a;
                let allowed = c.gamma_xi * rho;
                checks.push((
                    3,
                    Check::leq(realized, allowed * rel + SLACK * 1e-3, || format!("perturbation {realized:e} > {allowed:e}"), &v, Some(eps)),
                ));
            }
        }
        Ok(Some(pencil))
    })
}

/// Every suite, in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.max_dim < 2 {
        return Err(Error::Config("max_dim must be at least 2".into()));
    }
    let mut suites = Vec::new();
    suites.extend(contraction_suite(opts, false));
    suites.extend(contraction_suite(opts, true));
    suites.extend(angle_suite(opts));
    suites.extend(equivalence_suite(opts));
    suites.extend(perturbation_suite(opts));
    let mut warnings = Vec::new();
    if opts.trials == 0 {
        warnings.push("trials = 0: every suite passes vacuously".to_string());
    }
    Ok(VerifyReport {
        options: *opts,
        suites,
        warnings,
    })
}

/// The approximate apply used by the perturbation suites.
pub fn suite_strategy(opts: &VerifyOptions, seed: u64) -> Box<dyn ApproxApply> {
    let factor = if opts.inject_violation { 2.0 } else { 1.0 };
    Box::new(Saturating::new(factor, true, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> VerifyOptions {
        VerifyOptions {
            trials,
            seed: 3,
            max_dim: 8,
            inject_violation: false,
        }
    }

    #[test]
    fn random_pencil_respects_gamma_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = random_pencil(&mut rng, 10, 0.9).unwrap();
            assert!(p.gamma_p <= 0.9 + 1e-9, "gamma = {}", p.gamma_p);
            if let Some(v) = vector_in_bracket(&p, &mut rng) {
                let mu = p.oracle.rayleigh(&v);
                assert!(mu > p.lambda1() && mu < p.lambda2().unwrap());
            }
        }
    }

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let a = run_all(&small(20)).unwrap();
        assert!(a.passed(), "{}", a.to_table());
        let b = run_all(&small(20)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn zero_trials_is_vacuous() {
        let r = run_all(&small(0)).unwrap();
        assert!(r.passed());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.suites.iter().all(|s| s.checks == 0));
    }

    #[test]
    fn injected_violation_is_caught() {
        let r = run_all(&VerifyOptions {
            inject_violation: true,
            ..small(20)
        })
        .unwrap();
        assert!(!r.passed());
        let residual = r.suites.iter().find(|s| s.name == "residual-perturbation").unwrap();
        assert!(residual.failures > 0);
        let cx = residual.counterexample.as_ref().unwrap();
        assert!(!cx.a.is_empty() && !cx.v.is_empty() && cx.eps.is_some());
    }
}
