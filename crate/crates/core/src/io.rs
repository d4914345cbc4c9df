//! Text formats: convergence logs (CSV and JSON), matrix-market pencils and
//! flat `key = value` manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inexact::{Constants, ConvergenceRecord, SolverConfig};
use crate::linop::SpectralConstants;
use crate::problems::CsrMatrix;

pub const CSV_HEADER: &str = "step,mu,mu_eps,rho_eps,epsilon,halvings,bound_ok";

fn bound_cell(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "n/a",
    }
}

/// Renders the log as CSV. Floats use the shortest round-trip form, so
/// identical logs give identical bytes.
pub fn log_to_csv(log: &[ConvergenceRecord]) -> String {
    let mut out = String::with_capacity(64 * (log.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in log {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{},{}",
            r.step,
            r.mu,
            r.mu_eps,
            r.rho_eps,
            r.epsilon,
            r.halvings,
            bound_cell(r.bound_ok)
        );
    }
    out
}

pub fn log_from_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected CSV header {other:?}"))),
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`"))) };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad integer `{s}`"))) };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(Error::Parse(format!("expected 7 cells, got {}: `{line}`", cells.len())));
            }
            Ok(ConvergenceRecord {
                step: int(cells[0])?,
                mu: num(cells[1])?,
                mu_eps: num(cells[2])?,
                rho_eps: num(cells[3])?,
                epsilon: num(cells[4])?,
                halvings: int(cells[5])?,
                bound_ok: match cells[6] {
                    "true" => Some(true),
                    "false" => Some(false),
                    "n/a" => None,
                    other => return Err(Error::Parse(format!("bad bound_ok `{other}`"))),
                },
            })
        })
        .collect()
}

/// JSON form of a run: the log plus what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub problem: String,
    pub dim: usize,
    pub seed: u64,
    pub strategy: String,
    pub config: SolverConfig,
    pub constants: Constants,
    pub spectral: SpectralConstants,
    pub restarts: usize,
    pub records: Vec<ConvergenceRecord>,
}

impl RunLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run log is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Symmetric coordinate matrix-market text (lower triangle stored).
pub fn to_matrix_market(m: &CsrMatrix) -> String {
    let mut entries = Vec::new();
    for i in 0..m.n_rows() {
        for (j, v) in m.row(i) {
            if j <= i {
                entries.push((i, j, v));
            }
        }
    }
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

/// Parses coordinate matrix-market text; `symmetric` inputs are expanded.
pub fn from_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines();
    let banner = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix-market text".into()))?
        .to_ascii_lowercase();
    if !banner.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(Error::Parse(format!("unsupported banner `{banner}`")));
    }
    let symmetric = banner.ends_with("symmetric");
    let mut body = lines.filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let size = body.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad size `{size}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(Error::Parse(format!("bad size line `{size}`")));
    };
    let mut triplets = Vec::with_capacity(2 * nnz);
    for line in body {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad entry `{line}`")));
        }
        let i: usize = parts[0].parse().map_err(|_| Error::Parse(format!("bad row in `{line}`")))?;
        let j: usize = parts[1].parse().map_err(|_| Error::Parse(format!("bad column in `{line}`")))?;
        let v: f64 = parts[2].parse().map_err(|_| Error::Parse(format!("bad value in `{line}`")))?;
        if i == 0 || j == 0 {
            return Err(Error::Parse("matrix-market indices are one-based".into()));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    let expected = if symmetric {
        triplets.iter().filter(|(i, j, _)| i >= j).count()
    } else {
        triplets.len()
    };
    if expected != nnz {
        return Err(Error::Parse(format!("declared {nnz} entries, found {expected}")));
    }
    CsrMatrix::from_triplets(rows, cols, triplets)
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_matrix_market(&text)
}

/// Parses `key = value` lines; `#` starts a comment, later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", n + 1)));
        }
        map.insert(key.replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, bound_ok: Option<bool>) -> ConvergenceRecord {
        ConvergenceRecord {
            step,
            mu: 1.0 + 1.0 / (step as f64 + 3.0),
            mu_eps: 1.25,
            rho_eps: 0.1 / 3.0,
            epsilon: 2f64.powi(-12),
            halvings: 11,
            bound_ok,
        }
    }

    #[test]
    fn csv_round_trip() {
        let log = vec![record(0, Some(true)), record(1, None), record(2, Some(false))];
        let text = log_to_csv(&log);
        assert!(text.starts_with("step,mu,mu_eps,rho_eps,epsilon,halvings,bound_ok\n"));
        assert!(text.contains(",n/a\n"));
        assert_eq!(log_from_csv(&text).unwrap(), log);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        assert!(log_from_csv("a,b\n").is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = CsrMatrix::from_triplets(3, 3, [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 0.5)])
            .unwrap();
        let text = to_matrix_market(&m);
        assert_eq!(from_matrix_market(&text).unwrap(), m);
    }

    #[test]
    fn key_values() {
        let map = parse_key_values("# manifest\nproblem = lshape\nh=2^-5 # mesh\n\ngamma-scale = 0.5\nh = 2^-6\n").unwrap();
        assert_eq!(map["problem"], "lshape");
        assert_eq!(map["h"], "2^-6");
        assert_eq!(map["gamma_scale"], "0.5");
        assert!(parse_key_values("novalue\n").is_err());
    }
}
