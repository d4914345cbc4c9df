use anyhow::{anyhow, bail, Result};
use pinvit_core::inexact::{ApproxApply, Exact, SolverConfig, Truncate};
use pinvit_core::problems::{
    dense_problem, fd_laplacian_with, parse_scalar, DenseMatrix, Domain, GridSpec, PreconditionerChoice,
};
use pinvit_core::EigenProblem;

use crate::args::{Manifest, ProblemArgs};

/// Continuum smallest eigenvalue of the L-shaped domain, used as reference.
pub const LSHAPE_REFERENCE: f64 = 9.639723844;

#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Grid(GridSpec),
    Diagonal(Vec<f64>),
}

impl ProblemSpec {
    pub fn id(&self) -> String {
        match self {
            ProblemSpec::Grid(g) => g.to_string(),
            ProblemSpec::Diagonal(d) => {
                let cells: Vec<String> = d.iter().map(f64::to_string).collect();
                format!("diag:{}", cells.join(","))
            }
        }
    }

    pub fn build(&self, precond: PreconditionerChoice) -> Result<EigenProblem> {
        match self {
            ProblemSpec::Grid(g) => Ok(fd_laplacian_with(g, precond)?),
            ProblemSpec::Diagonal(d) => {
                // Jacobi on a diagonal pencil is exact
                let a = DenseMatrix::from_diagonal(d);
                let mut pr = dense_problem(a.clone(), DenseMatrix::identity(d.len()), a)?;
                let mut sorted = d.clone();
                sorted.sort_by(f64::total_cmp);
                sorted.dedup();
                let meta = pr.meta_mut();
                meta.id = self.id();
                meta.lambda1 = sorted.first().copied();
                meta.lambda2 = sorted.get(1).copied();
                meta.gamma_p = Some(0.0);
                meta.preconditioner = Some("jacobi".into());
                Ok(pr)
            }
        }
    }

    /// Continuum reference eigenvalue, where known.
    pub fn reference(&self) -> Option<f64> {
        use std::f64::consts::PI;
        match self {
            ProblemSpec::Grid(g) => match g.domain {
                Domain::Interval => Some(PI * PI),
                Domain::Rectangle { width, height } => Some(PI * PI * (1.0 / (width * width) + 1.0 / (height * height))),
                Domain::LShape => Some(LSHAPE_REFERENCE),
            },
            ProblemSpec::Diagonal(_) => None,
        }
    }
}

fn default_h(domain: &Domain) -> f64 {
    match domain {
        Domain::Interval => 1.0 / 64.0,
        _ => 1.0 / 32.0,
    }
}

/// Resolved `solve`/`sweep` settings.
#[derive(Debug)]
pub struct Settings {
    pub problem: ProblemSpec,
    pub precond: PreconditionerChoice,
    pub config: SolverConfig,
    pub strategy: Box<dyn ApproxApply>,
}

pub fn strategy(name: &str) -> Result<Box<dyn ApproxApply>> {
    match name.trim().to_ascii_lowercase().as_str() {
        "truncate" => Ok(Box::new(Truncate)),
        "exact" => Ok(Box::new(Exact)),
        other => bail!("unknown strategy `{other}` (expected truncate or exact)"),
    }
}

pub fn problem_spec(name: &str, h: Option<f64>, n: Option<usize>) -> Result<ProblemSpec> {
    if let Some(list) = name.strip_prefix("diag:") {
        let d = list
            .split(',')
            .map(|c| parse_scalar(c).map_err(|e| anyhow!(e)))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(ProblemSpec::Diagonal(d));
    }
    if name.contains(',') {
        if h.is_some() || n.is_some() {
            bail!("`{name}` already fixes the mesh width; drop --h/--n");
        }
        return Ok(ProblemSpec::Grid(name.parse()?));
    }
    let domain: Domain = name.parse()?;
    let grid = match (n, h) {
        (Some(_), Some(_)) => bail!("give either --n or --h, not both"),
        (Some(n), None) => {
            if domain != Domain::Interval {
                bail!("--n applies to the interval only");
            }
            GridSpec::interval_nodes(n)?
        }
        (None, h) => GridSpec::new(domain, h.unwrap_or_else(|| default_h(&domain)))?,
    };
    Ok(ProblemSpec::Grid(grid))
}

pub fn settings(args: &ProblemArgs, manifest: &Manifest, seed: Option<u64>) -> Result<Settings> {
    let name = manifest
        .pick(args.problem.clone(), "problem")?
        .unwrap_or_else(|| "interval".to_string());
    let h = manifest
        .pick(args.h.clone(), "h")?
        .map(|s| parse_scalar(&s))
        .transpose()?;
    let n = manifest.pick(args.n, "n")?;
    let problem = problem_spec(&name, h, n)?;
    let precond: PreconditionerChoice = manifest
        .pick(args.precond.clone(), "precond")?
        .as_deref()
        .unwrap_or("multilevel")
        .parse()?;
    let mut config = SolverConfig::new(manifest.pick(args.tau, "tau")?.unwrap_or(1e-8));
    if let Some(s) = manifest.pick(args.gamma_scale, "gamma_scale")? {
        config.constant_scale = s;
    }
    if let Some(m) = manifest.pick(args.max_steps, "max_steps")? {
        config.max_outer_steps = m;
    }
    config.seed = manifest.pick(seed, "seed")?.unwrap_or(0);
    config.validate()?;
    let strategy = strategy(
        manifest
            .pick(args.strategy.clone(), "strategy")?
            .as_deref()
            .unwrap_or("truncate"),
    )?;
    Ok(Settings {
        problem,
        precond,
        config,
        strategy,
    })
}
