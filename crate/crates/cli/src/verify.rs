use std::fs;
use std::process::ExitCode;

use anyhow::{Context, Result};
use pinvit_core::io::log_from_csv;
use pinvit_core::verify::{run_all, VerifyOptions};

use crate::args::{out_dir, write, Manifest, VerifyArgs};

pub fn run(args: VerifyArgs) -> Result<ExitCode> {
    let manifest = Manifest::load(args.common.config.as_ref())?;
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        trials: manifest.pick(args.trials, "trials")?.unwrap_or(defaults.trials),
        seed: manifest.pick(args.common.seed, "seed")?.unwrap_or(defaults.seed),
        max_dim: manifest.pick(args.max_dim, "max_dim")?.unwrap_or(defaults.max_dim),
        inject_violation: manifest.flag(args.inject_violation, "inject_violation")?,
    };
    let dir = out_dir(&args.common, &manifest)?;

    let mut ok = true;
    for path in &args.audit_logs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let log = log_from_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
        let failed: Vec<usize> = log.iter().filter(|r| r.bound_ok == Some(false)).map(|r| r.step).collect();
        if failed.is_empty() {
            println!("log {}: {} rows, no failed bound checks", path.display(), log.len());
        } else {
            ok = false;
            println!("log {}: failed bound checks at steps {failed:?}", path.display());
        }
    }

    let report = run_all(&opts)?;
    write(&dir, "verify_report.json", &report.to_json())?;
    write(&dir, "verify_table.txt", &report.to_table())?;
    print!("{}", report.to_table());
    if let Some(cx) = report.first_counterexample() {
        let text = serde_json::to_string_pretty(cx)?;
        let path = write(&dir, "counterexample.json", &text)?;
        eprintln!("first counterexample ({}):\n{text}", path.display());
    }
    if report.passed() && ok {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
