//! Linear solves with the system operator: sparse direct Cholesky,
//! incomplete-Cholesky preconditioned conjugate gradients, or an exact
//! eigenbasis route for problems with dense similarity graphs.

mod cholesky;
mod pcg;
mod spectral;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cholesky::FillOrdering;
pub use pcg::IncompleteCholesky;
pub use spectral::ExactTraces;

use crate::error::{Error, Result};
use crate::linalg::{norm, CsrMatrix};
use crate::system::{SystemOperator, DEFAULT_ASSEMBLY_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Sparse Cholesky of the assembled system.
    Direct,
    /// Conjugate gradients preconditioned by incomplete Cholesky.
    Pcg,
    /// Laplacian eigenbases plus a capacitance matrix over the unobserved
    /// entries; exact, and fast when graphs are dense but small.
    Spectral,
    /// `Direct` below `auto_threshold` unknowns, `Pcg` above.
    Auto,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Direct => "direct",
            Method::Pcg => "pcg",
            Method::Spectral => "spectral",
            Method::Auto => "auto",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "pcg" => Ok(Method::Pcg),
            "spectral" => Ok(Method::Spectral),
            "auto" => Ok(Method::Auto),
            other => Err(Error::InvalidArgument(format!("unknown solver method '{other}'"))),
        }
    }
}

/// Shared counter of linear solves, for auditing cost claims.
#[derive(Debug, Clone, Default)]
pub struct SolveAudit(Arc<AtomicUsize>);

impl SolveAudit {
    pub fn new() -> Self {
        SolveAudit::default()
    }

    pub fn count(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    fn record(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    pub cg_rel_tol: f64,
    /// `None` means `10 sqrt(np) + 200`.
    pub cg_max_iters: Option<usize>,
    /// Zero gives the no-fill incomplete factor.
    pub ic_drop_tol: f64,
    /// Turn off to run plain conjugate gradients.
    pub precondition: bool,
    pub auto_threshold: usize,
    pub ordering: FillOrdering,
    pub audit: Option<SolveAudit>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Auto,
            cg_rel_tol: 1e-8,
            cg_max_iters: None,
            ic_drop_tol: 0.0,
            precondition: true,
            auto_threshold: 50_000,
            ordering: FillOrdering::Amd,
            audit: None,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        SolverConfig { method, ..SolverConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("cg_rel_tol must be positive, got {}", self.cg_rel_tol)));
        }
        if !(self.ic_drop_tol >= 0.0 && self.ic_drop_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("ic_drop_tol must be nonnegative, got {}", self.ic_drop_tol)));
        }
        if self.auto_threshold < 1 || self.cg_max_iters == Some(0) {
            return Err(Error::InvalidArgument("solver thresholds must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_iters_for(&self, dim: usize) -> usize {
        self.cg_max_iters.unwrap_or_else(|| (10.0 * (dim as f64).sqrt()).ceil() as usize + 200)
    }

    /// The concrete method `Auto` resolves to for `dim` unknowns.
    pub fn resolve(&self, dim: usize) -> Method {
        match self.method {
            Method::Auto if dim < self.auto_threshold => Method::Direct,
            Method::Auto => Method::Pcg,
            m => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    /// Zero for non-iterative methods.
    pub iterations: usize,
    /// `||S z - b|| / ||b||`, recomputed from the returned `z`.
    pub relative_residual: f64,
    /// The factorization had already served an earlier solve.
    pub factorization_reused: bool,
}

enum Kind {
    Direct(cholesky::SparseCholesky),
    Pcg { matrix: CsrMatrix, preconditioner: Option<IncompleteCholesky> },
    Spectral(spectral::SpectralFactor),
}

/// A reusable solve handle for one operator at one parameter pair.
pub struct Factorization<'a> {
    op: SystemOperator<'a>,
    cfg: SolverConfig,
    kind: Kind,
    solves: AtomicUsize,
}

impl std::fmt::Debug for Factorization<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("method", &self.method())
            .field("params", &self.op.params())
            .field("solves", &self.solve_count())
            .finish()
    }
}

/// Factorizes `S` for repeated solves. Fails with `NotPositiveDefinite` when
/// some (row component, column component) patch has no observation, since
/// `S` is then singular.
pub fn factorize<'a>(op: &SystemOperator<'a>, cfg: &SolverConfig) -> Result<Factorization<'a>> {
    cfg.validate()?;
    if let Some((r, c)) = op.first_empty_patch() {
        return Err(Error::NotPositiveDefinite(format!(
            "row component {r} and column component {c} share no observed entry"
        )));
    }
    let kind = match cfg.resolve(op.dim()) {
        Method::Direct => {
            let a = op.assemble_sparse(DEFAULT_ASSEMBLY_CAP)?;
            Kind::Direct(cholesky::SparseCholesky::new(&a, &cfg.ordering)?)
        }
        Method::Pcg => {
            let matrix = op.assemble_sparse(DEFAULT_ASSEMBLY_CAP)?;
            let preconditioner =
                if cfg.precondition { shifted_incomplete_cholesky(&matrix, cfg.ic_drop_tol) } else { None };
            Kind::Pcg { matrix, preconditioner }
        }
        Method::Spectral => {
            if !spectral::is_feasible(op) {
                return Err(Error::CapExceeded {
                    what: "spectral factorization (estimated flops)",
                    size: spectral::estimated_flops(op.n_rows(), op.n_cols(), op.mask().missing_count()) as usize,
                    cap: 400_000_000_000,
                });
            }
            Kind::Spectral(spectral::SpectralFactor::new(op)?)
        }
        Method::Auto => unreachable!("resolved above"),
    };
    Ok(Factorization { op: *op, cfg: cfg.clone(), kind, solves: AtomicUsize::new(0) })
}

/// Incomplete Cholesky with diagonal shifts `alpha diag(S)`, `alpha` doubling
/// from `1e-3`, up to 8 retries. `None` means plain CG.
fn shifted_incomplete_cholesky(matrix: &CsrMatrix, drop_tol: f64) -> Option<IncompleteCholesky> {
    if let Some(ic) = IncompleteCholesky::new(matrix, drop_tol, 0.0) {
        return Some(ic);
    }
    let mut alpha = 1e-3;
    for _ in 0..8 {
        if let Some(ic) = IncompleteCholesky::new(matrix, drop_tol, alpha) {
            log::debug!("incomplete Cholesky succeeded with diagonal shift {alpha}");
            return Some(ic);
        }
        alpha *= 2.0;
    }
    log::warn!("incomplete Cholesky broke down after 8 shifted retries; using unpreconditioned CG");
    None
}

/// Whether the capacitance route is affordable for this operator.
pub fn spectral_feasible(op: &SystemOperator<'_>) -> bool {
    spectral::is_feasible(op)
}

impl<'a> Factorization<'a> {
    pub fn method(&self) -> Method {
        match self.kind {
            Kind::Direct(_) => Method::Direct,
            Kind::Pcg { .. } => Method::Pcg,
            Kind::Spectral(_) => Method::Spectral,
        }
    }

    pub fn operator(&self) -> &SystemOperator<'a> {
        &self.op
    }

    /// Solves performed through this handle.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::SeqCst)
    }

    pub fn is_preconditioned(&self) -> bool {
        matches!(self.kind, Kind::Pcg { preconditioner: Some(_), .. })
    }

    /// Stored entries of the Cholesky factor, for the direct method.
    pub fn factor_nnz(&self) -> Option<usize> {
        match &self.kind {
            Kind::Direct(c) => Some(c.factor_nnz()),
            _ => None,
        }
    }

    /// Exact traces, available on the eigenbasis route only.
    pub fn exact_traces(&self) -> Option<ExactTraces> {
        match &self.kind {
            Kind::Spectral(s) => Some(s.traces()),
            _ => None,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        if b.len() != self.op.dim() {
            return Err(Error::DimensionMismatch { expected: self.op.dim(), got: b.len() });
        }
        let previous = self.solves.fetch_add(1, Ordering::SeqCst);
        if let Some(audit) = &self.cfg.audit {
            audit.record();
        }
        let (z, iterations) = match &self.kind {
            Kind::Direct(c) => (c.solve(b), 0),
            Kind::Spectral(s) => (s.solve(b), 0),
            Kind::Pcg { matrix, preconditioner } => {
                let max_iters = self.cfg.max_iters_for(b.len());
                let out = pcg::pcg(|v| matrix.mul_vec(v), preconditioner.as_ref(), b, self.cfg.cg_rel_tol, max_iters);
                if !out.converged {
                    let residual = self.relative_residual(&out.x, b)?;
                    return Err(Error::MaxItersExceeded { iterations: out.iterations, residual });
                }
                (out.x, out.iterations)
            }
        };
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("solve produced non-finite values".into()));
        }
        let relative_residual = self.relative_residual(&z, b)?;
        let report = SolveReport { method: self.method(), iterations, relative_residual, factorization_reused: previous > 0 };
        Ok((z, report))
    }

    /// Solves each right-hand side independently; results are identical to
    /// calling `solve` on each in turn.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<(Vec<f64>, SolveReport)>> {
        rhs.par_iter().map(|b| self.solve(b)).collect()
    }

    fn relative_residual(&self, z: &[f64], b: &[f64]) -> Result<f64> {
        let sz = self.op.apply(z)?;
        let r: Vec<f64> = sz.iter().zip(b).map(|(s, bi)| s - bi).collect();
        let b_norm = norm(b);
        Ok(if b_norm == 0.0 { norm(&r) } else { norm(&r) / b_norm })
    }
}

/// One-shot solve of `S z = b`.
pub fn solve(op: &SystemOperator<'_>, cfg: &SolverConfig, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    factorize(op, cfg)?.solve(b)
}
