//! Brute-force reference computations for verification.
//!
//! Everything here works on its own row-major [`Matrix`] type and shares no
//! linear algebra with the solver: the pencil is reduced with a hand-written
//! Cholesky factorization and diagonalized with cyclic Jacobi rotations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self {
            n,
            data: data.to_vec(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.data[i * n + j] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|c| c.to_vec()).collect()
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += u[i] * v[i];
    }
    s
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(m: &Matrix) -> Result<Self> {
        let n = m.dim();
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) {
                return Err(Error::Factorization(format!(
                    "oracle Cholesky: non-positive pivot {d:e} at column {j}"
                )));
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(Self { l })
    }

    /// `L⁻¹ b`
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l.get(i, k) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    /// `L⁻ᵀ b`
    pub fn backward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    /// `M⁻¹ b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

/// Cyclic Jacobi diagonalization of a symmetric matrix.
///
/// Returns eigenvalues (unsorted) and the orthogonal matrix whose columns are
/// the eigenvectors.
pub fn jacobi_eigen(sym: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = sym.dim();
    let mut a = sym.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            let values = (0..n).map(|i| a.get(i, i)).collect();
            return Ok((values, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Err(Error::Estimation("oracle Jacobi sweeps did not converge".into()))
}

/// Full spectrum of a pencil `A x = λ E x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// E-orthonormal, `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `max_k ‖A x_k − λ_k E x_k‖₂`
    pub residual_check: f64,
}

/// Reduces `(A, E)` with `E = L Lᵀ` to `L⁻¹ A L⁻ᵀ` and diagonalizes it.
pub fn dense_eigensolve(a: &Matrix, e: &Matrix) -> Result<SpectrumReport> {
    let n = a.dim();
    if e.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: e.dim(),
        });
    }
    if n == 0 || n > MAX_ORACLE_DIM {
        return Err(Error::Domain(format!("oracle supports 1..={MAX_ORACLE_DIM}, got {n}")));
    }
    let chol = Cholesky::factor(e)?;
    // C = L⁻¹ A L⁻ᵀ, built column by column
    let mut c = Matrix::zeros(n);
    let mut tmp = Matrix::zeros(n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a.get(i, j)).collect();
        let y = chol.forward(&col);
        for i in 0..n {
            tmp.set(i, j, y[i]);
        }
    }
    // tmp = L⁻¹ A; C = (L⁻¹ (L⁻¹ A)ᵀ)ᵀ = L⁻¹ A L⁻ᵀ
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| tmp.get(i, j)).collect();
        let y = chol.forward(&row);
        for j in 0..n {
            c.set(i, j, y[j]);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (c.get(i, j) + c.get(j, i));
            c.set(i, j, m);
            c.set(j, i, m);
        }
    }
    let (values, q) = jacobi_eigen(&c)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    let mut residual_check = 0.0f64;
    for &k in &order {
        let y: Vec<f64> = (0..n).map(|i| q.get(i, k)).collect();
        let mut x = chol.backward(&y);
        // deterministic sign: largest-magnitude entry positive
        let pivot = x
            .iter()
            .cloned()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let ax = a.mul_vec(&x);
        let ex = e.mul_vec(&x);
        let res = ax
            .iter()
            .zip(&ex)
            .map(|(p, q)| (p - values[k] * q).powi(2))
            .sum::<f64>()
            .sqrt();
        residual_check = residual_check.max(res);
        eigenvalues.push(values[k]);
        eigenvectors.push(x);
    }
    let report = SpectrumReport {
        eigenvalues,
        eigenvectors,
        residual_check,
    };
    let a_norm = a.frobenius();
    if report.residual_check > 1e-8 * a_norm.max(1.0) {
        return Err(Error::Estimation(format!(
            "oracle residual check failed: {:e}",
            report.residual_check
        )));
    }
    Ok(report)
}

/// Dense pencil `(A, E, P)` with everything the bound audits need.
#[derive(Debug, Clone)]
pub struct OraclePencil {
    pub a: Matrix,
    pub e: Matrix,
    pub p: Matrix,
    pub spectrum: SpectrumReport,
    chol_a: Cholesky,
    chol_p: Cholesky,
    chol_e: Cholesky,
}

impl OraclePencil {
    pub fn new(a: Matrix, e: Matrix, p: Matrix) -> Result<Self> {
        let spectrum = dense_eigensolve(&a, &e)?;
        Ok(Self {
            chol_a: Cholesky::factor(&a)?,
            chol_p: Cholesky::factor(&p)?,
            chol_e: Cholesky::factor(&e)?,
            a,
            e,
            p,
            spectrum,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn lambda1(&self) -> f64 {
        self.spectrum.eigenvalues[0]
    }

    /// Smallest eigenvalue strictly above λ₁ (relative gap 1e-10).
    pub fn lambda2(&self) -> Option<f64> {
        let l1 = self.lambda1();
        self.spectrum
            .eigenvalues
            .iter()
            .copied()
            .find(|&l| l > l1 * (1.0 + 1e-10))
    }

    pub fn quad(m: &Matrix, u: &[f64], v: &[f64]) -> f64 {
        dot(&m.mul_vec(u), v)
    }

    pub fn a_norm(&self, v: &[f64]) -> f64 {
        Self::quad(&self.a, v, v).max(0.0).sqrt()
    }

    pub fn p_norm(&self, v: &[f64]) -> f64 {
        Self::quad(&self.p, v, v).max(0.0).sqrt()
    }

    pub fn e_norm(&self, v: &[f64]) -> f64 {
        Self::quad(&self.e, v, v).max(0.0).sqrt()
    }

    /// `‖f‖_{A⁻¹}`
    pub fn a_inv_norm(&self, f: &[f64]) -> f64 {
        dot(&self.chol_a.solve(f), f).max(0.0).sqrt()
    }

    /// `‖f‖_{P⁻¹}`
    pub fn p_inv_norm(&self, f: &[f64]) -> f64 {
        dot(&self.chol_p.solve(f), f).max(0.0).sqrt()
    }

    /// `‖f‖_{E⁻¹}`
    pub fn e_inv_norm(&self, f: &[f64]) -> f64 {
        dot(&self.chol_e.solve(f), f).max(0.0).sqrt()
    }

    pub fn solve_p(&self, f: &[f64]) -> Vec<f64> {
        self.chol_p.solve(f)
    }

    pub fn solve_a(&self, f: &[f64]) -> Vec<f64> {
        self.chol_a.solve(f)
    }

    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        Self::quad(&self.a, v, v) / Self::quad(&self.e, v, v)
    }

    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mu = self.rayleigh(v);
        let av = self.a.mul_vec(v);
        let ev = self.e.mul_vec(v);
        av.iter().zip(&ev).map(|(a, e)| a - mu * e).collect()
    }

    /// `ρ(v) = ‖A v − μ(v) E v‖_{A⁻¹} / ‖v‖_A`
    pub fn rho(&self, v: &[f64]) -> f64 {
        self.a_inv_norm(&self.residual(v)) / self.a_norm(v)
    }

    /// Eigenvectors spanning the λ₁ eigenspace.
    pub fn lowest_eigenspace(&self) -> Vec<Vec<f64>> {
        let l1 = self.lambda1();
        self.spectrum
            .eigenvalues
            .iter()
            .zip(&self.spectrum.eigenvectors)
            .filter(|(l, _)| **l <= l1 * (1.0 + 1e-10))
            .map(|(_, x)| x.clone())
            .collect()
    }

    /// `sin φ_A(v, E₁)` from a Gram-matrix projection onto the λ₁ eigenspace.
    pub fn sin_angle_lowest(&self, v: &[f64]) -> f64 {
        let basis = self.lowest_eigenspace();
        let k = basis.len();
        let a_basis: Vec<Vec<f64>> = basis.iter().map(|b| self.a.mul_vec(b)).collect();
        let mut gram = Matrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                gram.set(i, j, dot(&a_basis[i], &basis[j]));
            }
        }
        let rhs: Vec<f64> = a_basis.iter().map(|ab| dot(ab, v)).collect();
        let coeffs = Cholesky::factor(&gram)
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|_| vec![0.0; k]);
        let mut d = v.to_vec();
        for (c, b) in coeffs.iter().zip(&basis) {
            for (di, bi) in d.iter_mut().zip(b) {
                *di -= c * bi;
            }
        }
        (self.a_norm(&d) / self.a_norm(v)).clamp(0.0, 1.0)
    }

    /// Extremal eigenvalues of `(N, M)` for two of the pencil's matrices.
    pub fn pencil_bounds(n: &Matrix, m: &Matrix) -> Result<(f64, f64)> {
        let rep = dense_eigensolve(n, m)?;
        Ok((rep.eigenvalues[0], *rep.eigenvalues.last().unwrap()))
    }

    /// `‖I − P⁻¹A‖_A = max |1 − θ|`, θ the eigenvalues of `(A, P)`.
    pub fn gamma_p(&self) -> Result<f64> {
        let (lo, hi) = Self::pencil_bounds(&self.a, &self.p)?;
        Ok((1.0 - lo).abs().max((hi - 1.0).abs()))
    }

    /// σ₀, σ₁ of `(A, P)` and α with `α² = λ_max(E, P)`.
    pub fn norm_constants(&self) -> Result<(f64, f64, f64)> {
        let (s0, s1) = Self::pencil_bounds(&self.a, &self.p)?;
        let (_, emax) = Self::pencil_bounds(&self.e, &self.p)?;
        Ok((s0, s1, emax.sqrt()))
    }
}

/// Outcome of checking one step against the Rayleigh-quotient contraction bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub ratio_before: f64,
    pub ratio_after: f64,
    pub q_squared: f64,
    pub verdict: Verdict,
}

/// Absolute slack allowed on the contraction inequality.
pub const AUDIT_SLACK: f64 = 1e-10;

/// Checks `(λ′−λ₁)/(λ₂−λ′) ≤ q² (λ−λ₁)/(λ₂−λ)` for a step `before → after`
/// using the shifted-ratio definition with `q = 1 − (1−γ)(1 − λ₁/λ₂)`.
pub fn audit_step(pencil: &OraclePencil, before: &[f64], after: &[f64], gamma: f64) -> AuditRow {
    let l1 = pencil.lambda1();
    let Some(l2) = pencil.lambda2() else {
        return AuditRow {
            ratio_before: f64::NAN,
            ratio_after: f64::NAN,
            q_squared: f64::NAN,
            verdict: Verdict::NotApplicable,
        };
    };
    audit_values(
        l1,
        l2,
        pencil.rayleigh(before),
        pencil.rayleigh(after),
        gamma,
    )
}

/// [`audit_step`] on Rayleigh quotients that are already known.
pub fn audit_values(l1: f64, l2: f64, mu_before: f64, mu_after: f64, gamma: f64) -> AuditRow {
    let q = 1.0 - (1.0 - gamma) * (1.0 - l1 / l2);
    let q_squared = q * q;
    let ratio = |mu: f64| ((mu - l1) / (l2 - mu)).max(0.0);
    let ratio_before = ratio(mu_before);
    let ratio_after = ratio(mu_after);
    let verdict = if !(mu_before >= l1 * (1.0 - 1e-12) && mu_before < l2) || mu_after >= l2 {
        Verdict::NotApplicable
    } else if ratio_after <= q_squared * ratio_before + AUDIT_SLACK {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    AuditRow {
        ratio_before,
        ratio_after,
        q_squared,
        verdict,
    }
}
