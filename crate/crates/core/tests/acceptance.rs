//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output.

use std::process::ExitCode;
use std::time::Instant;

use pinvit_core::error::Error;
use pinvit_core::inexact::{random_start, solve_observed, ApproxApply, Exact, Saturating, SolveReport, SolverConfig, Truncate};
use pinvit_core::oracle::{Matrix, OraclePencil};
use pinvit_core::problems::{
    damped, dense_problem, fd_laplacian, multilevel_preconditioner, DenseMatrix, GridSpec,
};
use pinvit_core::verify::{
    angle_suite, contraction_suite, equivalence_suite, perturbation_suite, run_all, SuiteReport, VerifyOptions,
};
use pinvit_core::EigenProblem;

const LSHAPE_REFERENCE: f64 = 9.639723844;

struct Outcome {
    pass: bool,
    measured: String,
    tolerance: &'static str,
}

fn suites_pass(reports: &[SuiteReport]) -> (bool, String) {
    let pass = reports.iter().all(SuiteReport::passed);
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {}/{} failed, worst {:.4}", r.name, r.failures, r.checks, r.worst))
        .collect();
    (pass, parts.join("; "))
}

fn timed_suites(reports: impl FnOnce() -> Vec<SuiteReport>, limit_s: f64, tolerance: &'static str) -> Outcome {
    let t = Instant::now();
    let reports = reports();
    let secs = t.elapsed().as_secs_f64();
    let (pass, text) = suites_pass(&reports);
    Outcome {
        pass: pass && secs < limit_s,
        measured: format!("{text}; {secs:.1} s"),
        tolerance,
    }
}

fn defaults() -> VerifyOptions {
    VerifyOptions::default()
}

fn contraction_exact() -> Outcome {
    timed_suites(
        || contraction_suite(&defaults(), false),
        60.0,
        "ratio_after <= q^2 ratio_before + 1e-10, 1000 pencils n <= 50, < 60 s",
    )
}

fn contraction_perturbed() -> Outcome {
    timed_suites(
        || contraction_suite(&defaults(), true),
        60.0,
        "gamma = (1 + gamma_P)/2, xi at the gamma_xi budget, slack 1e-10, < 60 s",
    )
}

fn angle_and_temple_kato() -> Outcome {
    timed_suites(
        || angle_suite(&defaults()),
        f64::INFINITY,
        "lower <= sin <= upper (relative 1e-10), Temple-Kato lhs <= rhs, 500 draws",
    )
}

fn model_equivalence() -> Outcome {
    timed_suites(
        || equivalence_suite(&defaults()),
        f64::INFINITY,
        "A-norm relative difference <= 1e-10, 100 dense pencils",
    )
}

fn perturbation_lemmas() -> Outcome {
    timed_suites(
        || perturbation_suite(&defaults()),
        f64::INFINITY,
        "four inequality suites at scale 1, 500 draws, relative slack 1e-9",
    )
}

fn dense_oracle(a: &DenseMatrix, e: &DenseMatrix) -> OraclePencil {
    let n = a.dim();
    let a = Matrix::from_row_major(n, a.row_major()).unwrap();
    let e = Matrix::from_row_major(n, e.row_major()).unwrap();
    OraclePencil::new(a.clone(), e, a).unwrap()
}

fn grid_oracle(grid: &GridSpec) -> OraclePencil {
    let csr = grid.laplacian().unwrap();
    let n = csr.n_rows();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for (j, v) in csr.row(i) {
            data[i * n + j] = v;
        }
    }
    dense_oracle(&DenseMatrix::from_row_major(n, data).unwrap(), &DenseMatrix::identity(n))
}

/// Solves and checks final `ρ ≤ τ` and the per-step floor `ε ≥ κ max(τ, ρ)`.
fn driver_case(problem: &EigenProblem, oracle: &OraclePencil, tau: f64) -> (bool, String) {
    let config = SolverConfig::new(tau);
    let v0 = random_start(problem.dim(), 5);
    let mut worst = f64::INFINITY;
    let mut kappas = Vec::new();
    let report = solve_observed(problem, &v0, &config, &Truncate, &mut |ev| {
        let rho = oracle.rho(ev.before);
        worst = worst.min(ev.outcome.epsilon_final / tau.max(rho));
        kappas.push(ev.constants.kappa_floor());
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let kappa = report.constants.kappa_floor();
    let stable = kappas.iter().all(|&k| k == kappa);
    let rho = oracle.rho(&report.v);
    let pass = rho <= tau && kappa > 0.0 && stable && worst >= kappa;
    (
        pass,
        format!(
            "{} steps, final rho {rho:.2e}, kappa {kappa:.3e}, min eps/max(tau,rho) {worst:.3e}",
            report.log.len()
        ),
    )
}

fn driver() -> Outcome {
    let t = Instant::now();
    let d = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
    let mut diag = dense_problem(d.clone(), DenseMatrix::identity(3), d.clone()).unwrap();
    diag.meta_mut().lambda1 = Some(1.0);
    diag.meta_mut().lambda2 = Some(2.0);
    let (p1, m1) = driver_case(&diag, &dense_oracle(&d, &DenseMatrix::identity(3)), 1e-8);

    let grid = GridSpec::interval_nodes(63).unwrap();
    let fd = fd_laplacian(&grid).unwrap();
    let (p2, m2) = driver_case(&fd, &grid_oracle(&grid), 1e-8);
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: p1 && p2 && secs < 10.0,
        measured: format!("diag(1,2,3): {m1}; interval n=63: {m2}; {secs:.1} s"),
        tolerance: "rho <= 1e-8, eps >= kappa max(tau, rho), kappa > 0 and constant, < 10 s",
    }
}

fn lshape(h: &str) -> Result<(f64, usize), Error> {
    let grid: GridSpec = format!("lshape,{h}").parse()?;
    let problem = fd_laplacian(&grid)?;
    let v0 = random_start(problem.dim(), 1);
    let report = solve_observed(&problem, &v0, &SolverConfig::new(1e-6), &Truncate, &mut |_| {})?;
    Ok((report.mu, problem.dim()))
}

fn benchmark() -> Outcome {
    let t = Instant::now();
    let fine = lshape("2^-6");
    let coarse = lshape("2^-5");
    let secs = t.elapsed().as_secs_f64();
    match (fine, coarse) {
        (Ok((l6, n6)), Ok((l5, _))) => {
            let rel = (l6 - LSHAPE_REFERENCE).abs() / LSHAPE_REFERENCE;
            let improves = (l6 - LSHAPE_REFERENCE).abs() < (l5 - LSHAPE_REFERENCE).abs();
            Outcome {
                pass: rel <= 0.05 && improves && secs < 120.0,
                measured: format!(
                    "h=2^-6 ({n6} unknowns): {l6:.9} (relative {rel:.3e}); h=2^-5: {l5:.9}; {secs:.1} s"
                ),
                tolerance: "relative 5% of 9.639723844, closer than h=2^-5, < 120 s",
            }
        }
        (a, b) => Outcome {
            pass: false,
            measured: format!("solve failed: {:?} {:?}", a.err(), b.err()),
            tolerance: "relative 5% of 9.639723844",
        },
    }
}

/// Geometric-mean contraction of the exact `ρ` over the first `steps` steps.
fn observed_contraction(
    problem: &EigenProblem,
    oracle: &OraclePencil,
    strategy: &dyn ApproxApply,
    steps: usize,
    scale: f64,
) -> Result<f64, String> {
    let config = SolverConfig {
        max_outer_steps: steps,
        constant_scale: scale,
        ..SolverConfig::new(1e-14)
    };
    let v0 = random_start(problem.dim(), 8);
    let mut rhos = Vec::new();
    let mut last = None;
    let result = solve_observed(problem, &v0, &config, strategy, &mut |ev| {
        rhos.push(oracle.rho(ev.before));
        last = Some(ev.outcome.vector.clone().into_inner());
    });
    match result {
        Err(Error::MaxSteps(_)) => {}
        Ok(SolveReport { log, .. }) => return Err(format!("converged after {} steps", log.len())),
        Err(e) => return Err(e.to_string()),
    }
    let final_rho = oracle.rho(&last.ok_or("no steps")?);
    Ok((final_rho / rhos[0]).powf(1.0 / steps as f64))
}

fn inexact_contraction() -> Outcome {
    let grid = GridSpec::interval_nodes(63).unwrap();
    let base = fd_laplacian(&grid).unwrap();
    let pre = multilevel_preconditioner(&grid).unwrap();
    // damp to gamma_P = 0.7 so 30 steps stay clear of the rounding floor
    let omega = (1.0 - 0.7) / (1.0 - pre.gamma_p);
    let pre = damped(base.a(), &pre, omega).unwrap();
    let gamma = pre.gamma_p;
    let problem = base.with_preconditioner(pre).unwrap();
    let oracle = grid_oracle(&grid);
    let exact = match observed_contraction(&problem, &oracle, &Exact, 30, 1.0) {
        Ok(g) => g,
        Err(e) => {
            return Outcome {
                pass: false,
                measured: format!("exact run failed: {e}"),
                tolerance: "|G_inexact/G_exact - 1| <= 0.1",
            }
        }
    };
    // truncation is the realistic apply; the saturating one spends the
    // whole error budget in the worst direction on every product
    let saturating = Saturating::new(1.0, true, 4);
    let mut pass = true;
    let mut parts = vec![format!("gamma_P {gamma:.3}: exact {exact:.6}")];
    for (label, strategy) in [("truncated", &Truncate as &dyn ApproxApply), ("saturating", &saturating)] {
        match observed_contraction(&problem, &oracle, strategy, 30, 1.0) {
            Ok(g) => {
                let dev = (g / exact - 1.0).abs();
                pass &= dev <= 0.1;
                parts.push(format!("{label} {g:.6} (deviation {dev:.2e})"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{label} failed: {e}"));
            }
        }
    }
    // informational: relaxed constants admit far larger perturbations
    if let Ok(g) = observed_contraction(&problem, &oracle, &saturating, 30, 0.01) {
        parts.push(format!("saturating at constant scale 0.01: {g:.6} (not gated)"));
    }
    Outcome {
        pass,
        measured: parts.join(", "),
        tolerance: "|G_inexact/G_exact - 1| <= 0.1 for each apply, geometric mean over 30 steps",
    }
}

fn determinism() -> Outcome {
    let a = run_all(&defaults()).unwrap().to_json();
    let b = run_all(&defaults()).unwrap().to_json();
    Outcome {
        pass: a == b,
        measured: format!("{} bytes, identical: {}", a.len(), a == b),
        tolerance: "byte-identical verify reports for equal seeds",
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("shifted-ratio contraction, exact steps", contraction_exact),
        ("shifted-ratio contraction, perturbed steps", contraction_perturbed),
        ("angle sandwich and Temple-Kato", angle_and_temple_kato),
        ("reduced-operator equivalence", model_equivalence),
        ("perturbation inequalities under saturating applies", perturbation_lemmas),
        ("adaptive step driver", driver),
        ("L-shape benchmark eigenvalue", benchmark),
        ("inexact vs exact contraction", inexact_contraction),
        ("verify determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!(
            "criterion {} {} {name}: {} [tolerance: {}]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.measured,
            o.tolerance
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
