use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use pinvit_core::io::parse_key_values;

#[derive(Debug, Parser)]
#[command(name = "pinvit-kit", version, about = "Preconditioned inverse iteration with inexact operator application")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the smallest eigenpair and write the convergence log.
    Solve(SolveArgs),
    /// Audit the convergence bounds on random pencils against the dense oracle.
    Verify(VerifyArgs),
    /// Sweep the mesh width or the preconditioner quality.
    Sweep(SweepArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` manifest; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "PINVIT_KIT_OUT_DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Problem and solver selection shared by `solve` and `sweep`.
#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// `interval`, `square`, `lshape`, `rectangle:WxH`, `domain,h` or `diag:d1,d2,...`.
    #[arg(long)]
    pub problem: Option<String>,
    /// Mesh width, e.g. `2^-6` or `1/64`.
    #[arg(long)]
    pub h: Option<String>,
    /// Interior nodes of an interval grid (sets `h = 1/(n+1)`).
    #[arg(long)]
    pub n: Option<usize>,
    /// `multilevel`, `jacobi` or `identity`.
    #[arg(long)]
    pub precond: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Scale of the constants c1, c2 (and 1/c3), in (0, 1].
    #[arg(long)]
    pub gamma_scale: Option<f64>,
    /// Approximate apply: `truncate` or `exact`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest random pencil dimension.
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Use an approximate apply whose error is twice the admissible one.
    #[arg(long)]
    pub inject_violation: bool,
    /// Convergence CSVs to audit for failed bound checks.
    #[arg(long = "audit-log")]
    pub audit_logs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// `h` (mesh widths) or `gamma` (target preconditioner quality).
    #[arg(long)]
    pub kind: Option<String>,
    /// Comma-separated parameter values; empty gives an empty table.
    #[arg(long)]
    pub values: Option<String>,
    /// Concurrent sweep points.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Manifest values, consulted when a flag is absent.
#[derive(Debug, Default)]
pub struct Manifest(BTreeMap<String, String>);

impl Manifest {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(Self(parse_key_values(&text)?))
            }
        }
    }

    /// `flag`, else the manifest entry, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("manifest key `{key}`: {e}")))
            .transpose()
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

pub fn out_dir(common: &Common, manifest: &Manifest) -> Result<PathBuf> {
    let dir = manifest
        .pick(common.out.clone(), "out")?
        .unwrap_or_else(|| PathBuf::from("pinvit-out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write(dir: &std::path::Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
