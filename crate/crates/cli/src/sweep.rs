use std::fmt::Write as _;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use pinvit_core::inexact::{random_start, solve_observed, SolverConfig, StepStatus};
use pinvit_core::pinvit::{convergence_factor, shifted_ratio};
use pinvit_core::problems::{damped, fd_laplacian, multilevel_preconditioner, parse_scalar, PreconditionerChoice};
use rayon::prelude::*;

use crate::args::{out_dir, write, Manifest, SweepArgs};
use crate::problem::{problem_spec, settings, ProblemSpec};

pub const SWEEP_HEADER: &str = "param,lambda1_discrete,steps_to_tau,worst_ratio,q_squared";

/// Steps whose shifted ratio is already below this are dominated by rounding
/// and left out of the observed contraction.
pub const RATIO_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    MeshWidth,
    Gamma,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub param: f64,
    pub dof: usize,
    pub lambda1: f64,
    pub reference: Option<f64>,
    pub steps: usize,
    pub worst_ratio: Option<f64>,
    pub q_squared: f64,
}

fn render_rows(rows: &[Row]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let worst = r.worst_ratio.map_or("n/a".to_string(), |w| format!("{w:e}"));
        let _ = writeln!(out, "{},{:e},{},{},{:e}", r.param, r.lambda1, r.steps, worst, r.q_squared);
    }
    out
}

fn render_dof_table(rows: &[Row]) -> String {
    let mut out = String::from("dof,h,lambda1_discrete,reference,abs_error\n");
    for r in rows {
        let (reference, err) = match r.reference {
            Some(x) => (format!("{x}"), format!("{:e}", (r.lambda1 - x).abs())),
            None => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(out, "{},{},{:e},{reference},{err}", r.dof, r.param, r.lambda1);
    }
    out
}

struct Point<'a> {
    kind: SweepKind,
    base: &'a ProblemSpec,
    domain_name: &'a str,
    precond: PreconditionerChoice,
    config: &'a SolverConfig,
    strategy: &'a str,
}

fn run_point(p: &Point<'_>, param: f64) -> Result<Row> {
    let (spec, problem) = match p.kind {
        SweepKind::MeshWidth => {
            let spec = problem_spec(p.domain_name, Some(param), None)?;
            let pr = spec.build(p.precond)?;
            (spec, pr)
        }
        SweepKind::Gamma => {
            let ProblemSpec::Grid(grid) = p.base else {
                bail!("the gamma sweep needs a grid problem");
            };
            let base = multilevel_preconditioner(grid)?;
            let g0 = base.gamma_p;
            if !(param >= g0 && param < 1.0) {
                bail!("target gamma {param} outside [{g0:.4}, 1) reachable by damping");
            }
            // P/ω has θω ∈ [ω(1−g₀), ω(1+g₀)], whose low end sets γ
            let omega = (1.0 - param) / (1.0 - g0);
            let pr = fd_laplacian(grid)?;
            let pre = damped(pr.a(), &base, omega)?;
            (p.base.clone(), pr.with_preconditioner(pre)?)
        }
    };
    let strategy = crate::problem::strategy(p.strategy)?;
    let v0 = random_start(problem.dim(), p.config.seed);
    let mut pairs = Vec::new();
    let report = solve_observed(&problem, &v0, p.config, strategy.as_ref(), &mut |ev| {
        if ev.outcome.status == StepStatus::Stepped && !ev.restarted {
            pairs.push((ev.outcome.mu, ev.record.mu));
        }
    })?;
    let (l1, l2) = match (report.spectral.lambda1, report.spectral.lambda2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(anyhow!("lambda1 and lambda2 are unavailable")),
    };
    // exact applies only perturb by rounding, so γ_P alone governs them
    let gamma = if p.strategy == "exact" {
        report.constants.gamma_p
    } else {
        report.constants.gamma()
    };
    let q = convergence_factor(gamma, l1, l2)?;
    let worst_ratio = pairs
        .iter()
        .filter_map(|&(before, after)| {
            let rb = shifted_ratio(before, l1, l2);
            let ra = shifted_ratio(after, l1, l2);
            (before < l2 && after < l2 && rb >= RATIO_FLOOR).then_some(ra / rb)
        })
        .reduce(f64::max);
    Ok(Row {
        param,
        dof: problem.dim(),
        lambda1: report.mu,
        reference: spec.reference(),
        steps: report.log.len(),
        worst_ratio,
        q_squared: q * q,
    })
}

pub fn run(args: SweepArgs) -> Result<ExitCode> {
    let manifest = Manifest::load(args.common.config.as_ref())?;
    let kind = match manifest.pick(args.kind.clone(), "kind")?.as_deref().unwrap_or("h") {
        "h" => SweepKind::MeshWidth,
        "gamma" => SweepKind::Gamma,
        other => bail!("unknown sweep kind `{other}` (expected h or gamma)"),
    };
    let default_values = match kind {
        SweepKind::MeshWidth => "2^-3,2^-4,2^-5,2^-6,2^-7",
        SweepKind::Gamma => "0.5,0.6,0.7,0.8,0.9",
    };
    let values = manifest
        .pick(args.values.clone(), "values")?
        .unwrap_or_else(|| default_values.to_string());
    let mut params = values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_scalar(s).map_err(|e| anyhow!(e)))
        .collect::<Result<Vec<f64>>>()?;
    params.sort_by(f64::total_cmp);

    let domain_name = manifest
        .pick(args.problem.problem.clone(), "problem")?
        .unwrap_or_else(|| "interval".to_string());
    if kind == SweepKind::MeshWidth && (domain_name.contains(',') || domain_name.starts_with("diag:")) {
        bail!("the h sweep needs a bare domain name, got `{domain_name}`");
    }
    let s = settings(&args.problem, &manifest, args.common.seed)?;
    let strategy_name = manifest
        .pick(args.problem.strategy.clone(), "strategy")?
        .unwrap_or_else(|| "truncate".to_string())
        .to_ascii_lowercase();
    let jobs = manifest.pick(args.jobs, "jobs")?.unwrap_or(0);
    let dir = out_dir(&args.common, &manifest)?;

    let point = Point {
        kind,
        base: &s.problem,
        domain_name: &domain_name,
        precond: s.precond,
        config: &s.config,
        strategy: &strategy_name,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let results: Vec<(f64, Result<Row>)> =
        pool.install(|| params.par_iter().map(|&x| (x, run_point(&point, x))).collect());

    let mut rows = Vec::new();
    let mut failures = 0;
    for (param, res) in results {
        match res {
            Ok(row) => rows.push(row),
            Err(err) => {
                failures += 1;
                eprintln!("sweep point {param}: {err:#}");
            }
        }
    }
    let table = render_rows(&rows);
    write(&dir, "sweep.csv", &table)?;
    if kind == SweepKind::MeshWidth {
        write(&dir, "dof_vs_error.csv", &render_dof_table(&rows))?;
    }
    print!("{table}");
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
