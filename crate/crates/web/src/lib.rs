//! Browser bindings: each export takes plain numbers and returns a JSON
//! string for the page script to draw.

use pinvit_core::inexact::{random_start, solve, solve_observed, ApproxApply, Exact, SolverConfig, Truncate};
use pinvit_core::linop::{Diagonal, LinearOperator, OperatorKind};
use pinvit_core::pinvit::{convergence_factor, pinvit_step, rayleigh_quotient, shifted_ratio, StepContext};
use pinvit_core::problems::{fd_laplacian, Domain, GridSpec};
use pinvit_core::{EigenProblem, Error, Result};
use serde::Serialize;
use std::sync::Arc;
use wasm_bindgen::prelude::*;

/// Largest grid the page will solve; keeps the tab responsive.
pub const MAX_UNKNOWNS: usize = 5000;

/// Below this shifted ratio, cancellation in `μ − λ₁` swamps the contraction.
pub const RATIO_FLOOR: f64 = 1e-6;

#[derive(Serialize)]
struct LogRow {
    step: usize,
    mu: f64,
    rho_eps: f64,
    epsilon: f64,
    halvings: usize,
    bound_ok: Option<bool>,
}

#[derive(Serialize)]
struct GridSolve {
    domain: String,
    h: f64,
    unknowns: usize,
    mu: f64,
    steps: usize,
    log: Vec<LogRow>,
    /// Row-major `(ny+1) × (nx+1)` node values; `null` outside the domain.
    field: Vec<Option<f64>>,
    nx: usize,
    ny: usize,
}

fn strategy(name: &str) -> Result<Box<dyn ApproxApply>> {
    match name {
        "exact" => Ok(Box::new(Exact)),
        "truncate" => Ok(Box::new(Truncate)),
        other => Err(Error::Config(format!("unknown apply `{other}`"))),
    }
}

pub fn grid_solve_json(domain: &str, cells: usize, tau: f64, apply: &str, seed: u64) -> Result<String> {
    let domain: Domain = domain.parse()?;
    let extent = domain.bounding_box().1[0];
    let grid = GridSpec::new(domain, extent / cells as f64)?;
    if grid.num_unknowns() > MAX_UNKNOWNS {
        return Err(Error::Config(format!("at most {MAX_UNKNOWNS} unknowns in the browser")));
    }
    let problem = fd_laplacian(&grid)?;
    let config = SolverConfig {
        seed,
        ..SolverConfig::new(tau)
    };
    let report = solve(&problem, &random_start(problem.dim(), seed), &config, strategy(apply)?.as_ref())?;

    let (nx, ny) = grid.cell_counts()?;
    let index = grid.index_map();
    // unit max norm, positive peak
    let peak = report.v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let mut field = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            field.push(index.lookup(i as isize, j as isize).map(|k| report.v[k] / peak));
        }
    }
    let out = GridSolve {
        domain: domain.to_string(),
        h: grid.h,
        unknowns: problem.dim(),
        mu: report.mu,
        steps: report.log.len(),
        log: report
            .log
            .iter()
            .map(|r| LogRow {
                step: r.step,
                mu: r.mu,
                rho_eps: r.rho_eps,
                epsilon: r.epsilon,
                halvings: r.halvings,
                bound_ok: r.bound_ok,
            })
            .collect(),
        field,
        nx,
        ny,
    };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

#[derive(Serialize)]
struct Contraction {
    q_squared: f64,
    /// Observed `ratio_after / ratio_before` per step.
    observed: Vec<f64>,
    mu: Vec<f64>,
}

/// Exact steps on `diag(λ₁, λ₂, 2λ₂, 4λ₂)` with `P = A/(1−γ)`, which has
/// `‖I − P⁻¹A‖_A = γ` exactly.
pub fn contraction_json(gamma: f64, lambda1: f64, lambda2: f64, steps: usize) -> Result<String> {
    let q = convergence_factor(gamma, lambda1, lambda2)?;
    let eig = vec![lambda1, lambda2, 2.0 * lambda2, 4.0 * lambda2];
    let a: Arc<dyn LinearOperator> = Arc::new(Diagonal::new(eig.clone())?.with_kind(OperatorKind::Stiffness));
    let e: Arc<dyn LinearOperator> = Arc::new(Diagonal::new(vec![1.0; 4])?.with_kind(OperatorKind::Mass));
    let p_entries: Vec<f64> = eig.iter().map(|l| l / (1.0 - gamma)).collect();
    let p: Arc<dyn LinearOperator> = Arc::new(Diagonal::new(p_entries)?.with_kind(OperatorKind::Preconditioner));
    let problem = EigenProblem::new(a, e, p)?;
    let ctx = StepContext {
        gamma_p: gamma,
        gamma_xi: None,
        lambda1: Some(lambda1),
        lambda2: Some(lambda2),
    };
    // μ₀ below λ₂, dominated by the second eigenvector
    let mut v = vec![0.3, 1.0, 0.02, 0.01];
    let mut mu = vec![rayleigh_quotient(problem.a(), problem.e(), &v)?];
    let mut observed = Vec::new();
    for _ in 0..steps.min(200) {
        let before = *mu.last().unwrap();
        let rb = shifted_ratio(before, lambda1, lambda2);
        if before >= lambda2 || rb < RATIO_FLOOR {
            break;
        }
        let step = pinvit_step(&problem, &v, None, &ctx)?;
        observed.push(shifted_ratio(step.mu_next, lambda1, lambda2) / rb);
        mu.push(step.mu_next);
        v = step.next.into_inner();
    }
    Ok(serde_json::to_string(&Contraction {
        q_squared: q * q,
        observed,
        mu,
    })
    .expect("serializable"))
}

#[derive(Serialize)]
struct EpsilonTrace {
    kappa_floor: f64,
    c3: f64,
    rho_eps: Vec<f64>,
    epsilon: Vec<f64>,
    halvings: Vec<usize>,
}

/// Inner-loop tolerances of a truncated solve on the interval with `n` nodes.
pub fn epsilon_trace_json(n: usize, tau: f64, constant_scale: f64) -> Result<String> {
    let grid = GridSpec::interval_nodes(n.clamp(1, MAX_UNKNOWNS))?;
    let problem = fd_laplacian(&grid)?;
    let config = SolverConfig {
        constant_scale,
        ..SolverConfig::new(tau)
    };
    let mut trace = EpsilonTrace {
        kappa_floor: 0.0,
        c3: 0.0,
        rho_eps: Vec::new(),
        epsilon: Vec::new(),
        halvings: Vec::new(),
    };
    solve_observed(&problem, &random_start(problem.dim(), 1), &config, &Truncate, &mut |ev| {
        trace.kappa_floor = ev.constants.kappa_floor();
        trace.c3 = ev.constants.c3;
        trace.rho_eps.push(ev.record.rho_eps);
        trace.epsilon.push(ev.record.epsilon);
        trace.halvings.push(ev.record.halvings);
    })?;
    Ok(serde_json::to_string(&trace).expect("serializable"))
}

fn js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn grid_solve(domain: &str, cells: usize, tau: f64, apply: &str, seed: u32) -> std::result::Result<String, JsValue> {
    js(grid_solve_json(domain, cells, tau, apply, seed as u64))
}

#[wasm_bindgen]
pub fn contraction(gamma: f64, lambda1: f64, lambda2: f64, steps: usize) -> std::result::Result<String, JsValue> {
    js(contraction_json(gamma, lambda1, lambda2, steps))
}

#[wasm_bindgen]
pub fn epsilon_trace(n: usize, tau: f64, constant_scale: f64) -> std::result::Result<String, JsValue> {
    js(epsilon_trace_json(n, tau, constant_scale))
}
