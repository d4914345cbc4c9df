use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use pinvit_core::inexact::{random_start, solve, SolveReport};
use pinvit_core::io::{log_to_csv, RunLog};
use pinvit_core::pinvit::residual_measure;
use serde::Serialize;

use crate::args::{out_dir, write, Manifest, SolveArgs};
use crate::problem::{settings, Settings};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub problem: String,
    pub dim: usize,
    pub mu: f64,
    /// Exact `ρ(v)` of the returned vector.
    pub rho: f64,
    pub steps: usize,
    pub restarts: usize,
    pub wall_time_s: f64,
    pub reference: Option<f64>,
    pub relative_error: Option<f64>,
    pub kappa_floor: f64,
    pub failed_bound_checks: usize,
}

impl Summary {
    pub fn render(&self) -> String {
        let mut lines = vec![
            format!("problem      {}", self.problem),
            format!("unknowns     {}", self.dim),
            format!("mu           {:.12}", self.mu),
            format!("rho          {:.3e}", self.rho),
            format!("steps        {}", self.steps),
            format!("restarts     {}", self.restarts),
            format!("kappa floor  {:.3e}", self.kappa_floor),
            format!("bound fails  {}", self.failed_bound_checks),
            format!("wall time    {:.3} s", self.wall_time_s),
        ];
        if let (Some(r), Some(e)) = (self.reference, self.relative_error) {
            lines.push(format!("reference    {r} (relative difference {e:.3e})"));
        }
        lines.join("\n") + "\n"
    }
}

pub struct Outcome {
    pub report: SolveReport,
    pub summary: Summary,
    pub run_log: RunLog,
}

pub fn execute(s: &Settings) -> Result<Outcome> {
    let start = Instant::now();
    let problem = s.problem.build(s.precond)?;
    let v0 = random_start(problem.dim(), s.config.seed);
    let report = solve(&problem, &v0, &s.config, s.strategy.as_ref())?;
    let wall = start.elapsed().as_secs_f64();
    let rho = residual_measure(problem.a(), problem.e(), &report.v)?;
    let reference = s.problem.reference();
    let summary = Summary {
        problem: s.problem.id(),
        dim: problem.dim(),
        mu: report.mu,
        rho,
        steps: report.log.len(),
        restarts: report.restarts,
        wall_time_s: wall,
        reference,
        relative_error: reference.map(|r| (report.mu - r).abs() / r),
        kappa_floor: report.constants.kappa_floor(),
        failed_bound_checks: report.log.iter().filter(|r| r.bound_ok == Some(false)).count(),
    };
    let run_log = RunLog {
        problem: s.problem.id(),
        dim: problem.dim(),
        seed: s.config.seed,
        strategy: report.strategy.clone(),
        config: s.config.clone(),
        constants: report.constants,
        spectral: report.spectral,
        restarts: report.restarts,
        records: report.log.clone(),
    };
    Ok(Outcome {
        report,
        summary,
        run_log,
    })
}

pub fn run(args: SolveArgs) -> Result<ExitCode> {
    let manifest = Manifest::load(args.common.config.as_ref())?;
    let s = settings(&args.problem, &manifest, args.common.seed)?;
    let dir = out_dir(&args.common, &manifest)?;
    let out = execute(&s)?;
    write(&dir, "convergence.csv", &log_to_csv(&out.report.log))?;
    write(&dir, "convergence.json", &out.run_log.to_json())?;
    write(&dir, "summary.json", &serde_json::to_string_pretty(&out.summary)?)?;
    print!("{}", out.summary.render());
    Ok(ExitCode::SUCCESS)
}
