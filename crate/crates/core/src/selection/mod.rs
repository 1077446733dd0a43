//! Choosing the smoothing strengths: degrees of freedom (exact or by
//! randomized trace estimation), the BIC and AIC objectives and their
//! gradients, quasi-Newton descent, grid search and cross-validation.

mod cv;
mod grid;
mod ims;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, split_folds, CvResult};
pub use grid::{exponent_grid, grid_search, GridObjective, GridResult, GridSpec};
pub use ims::{ims, ImsConfig, IterateRecord, SelectionTrace, TerminalStatus};

use crate::completion::{check_assumption, solve_data, BmcProblem};
use crate::error::{Error, Result};
use crate::linalg::{dot, CompensatedSum};
use crate::solver::{factorize, spectral_feasible, ExactTraces, Factorization, SolverConfig};
use crate::system::{PenaltyParams, SystemOperator, DENSE_CAP};

/// Smallest residual sum of squares used inside a logarithm.
pub const RSS_FLOOR: f64 = 1e-300;

/// Rademacher probe vectors, drawn once and reused.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    seed: u64,
    probes: Vec<Vec<f64>>,
}

impl ProbeSet {
    pub fn rademacher(count: usize, dim: usize, seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed, "probes");
        let probes = (0..count)
            .map(|_| (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        ProbeSet { seed, probes }
    }

    /// Wraps given vectors; every entry must be `+1` or `-1`.
    pub fn from_vectors(probes: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if probes.iter().flatten().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument("probe entries must be +1 or -1".into()));
        }
        Ok(ProbeSet { seed, probes })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.probes.first().map_or(0, Vec::len)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.probes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Hutchinson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Bic,
    Aic,
}

impl Criterion {
    /// Multiplier of the degrees of freedom for `n_observed` entries.
    pub fn df_weight(self, n_observed: usize) -> f64 {
        match self {
            Criterion::Bic => (n_observed as f64).ln(),
            Criterion::Aic => 2.0,
        }
    }
}

/// `tr(S^-1)` from a dense inverse. Intended as a small-scale reference.
pub fn degrees_of_freedom_exact(op: &SystemOperator<'_>) -> Result<f64> {
    Ok(dense_inverse(op)?.diagonal().column_vector().iter().sum())
}

fn dense_inverse(op: &SystemOperator<'_>) -> Result<Mat<f64>> {
    if op.dim() > DENSE_CAP {
        return Err(Error::CapExceeded { what: "dense inverse", size: op.dim(), cap: DENSE_CAP });
    }
    if let Some((row_component, col_component)) = op.first_empty_patch() {
        return Err(Error::AssumptionViolated { row_component, col_component });
    }
    let rows = op.to_dense()?;
    let s = Mat::<f64>::from_fn(op.dim(), op.dim(), |i, j| rows[i][j]);
    let llt = s
        .llt(Side::Lower)
        .map_err(|_| Error::NotPositiveDefinite("dense Cholesky pivot failure".into()))?;
    Ok(llt.inverse())
}

/// Exact `tr(S^-1)` together with the two gradient traces
/// `tr(S^-1 (I kron L_r) S^-1)` and `tr(S^-1 (L_c kron I) S^-1)`.
///
/// Uses the eigenbasis route when affordable, else a dense inverse within the
/// dense cap.
pub fn exact_traces(op: &SystemOperator<'_>) -> Result<ExactTraces> {
    if spectral_feasible(op) {
        let cfg = SolverConfig::with_method(crate::solver::Method::Spectral);
        let f = factorize(op, &cfg)?;
        return Ok(f.exact_traces().expect("eigenbasis factorization provides traces"));
    }
    dense_traces(op)
}

/// Same quantities from a dense inverse `B`: `tr(B)` and `<B, K B>`.
pub fn dense_traces(op: &SystemOperator<'_>) -> Result<ExactTraces> {
    let b = dense_inverse(op)?;
    let dim = op.dim();
    let mut df = CompensatedSum::default();
    let mut row = CompensatedSum::default();
    let mut col = CompensatedSum::default();
    let mut column = vec![0.0; dim];
    for j in 0..dim {
        for (i, c) in column.iter_mut().enumerate() {
            *c = b[(i, j)];
        }
        df.add(column[j]);
        row.add(dot(&column, &op.apply_row_penalty(&column)));
        col.add(dot(&column, &op.apply_col_penalty(&column)));
    }
    Ok(ExactTraces { df: df.value(), row: row.value(), col: col.value() })
}

/// Mean of `w^T S^-1 w` over the probes.
pub fn hutchinson_trace(f: &Factorization<'_>, probes: &ProbeSet) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("at least one probe is required".into()));
    }
    let solutions = f.solve_many(probes.vectors())?;
    Ok(quadratic_mean(probes.vectors(), solutions.iter().map(|(z, _)| z.as_slice())))
}

fn quadratic_mean<'a>(w: &[Vec<f64>], z: impl Iterator<Item = &'a [f64]>) -> f64 {
    let mut total = CompensatedSum::default();
    for (wk, zk) in w.iter().zip(z) {
        total.add(dot(wk, zk));
    }
    total.value() / w.len() as f64
}

/// Rademacher sample size guaranteeing relative error `epsilon` with
/// probability at least `1 - delta`: `ceil(6 epsilon^-2 ln(2 / delta))`.
pub fn sample_count_for(epsilon: f64, delta: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need epsilon > 0 and 0 < delta < 1, got ({epsilon}, {delta})"
        )));
    }
    let raw = 6.0 / (epsilon * epsilon) * (2.0 / delta).ln();
    let nearest = raw.round();
    // absorb rounding in the logarithm when the bound is an integer
    let value = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) { nearest } else { raw.ceil() };
    Ok(value as usize)
}

/// Objective value and cached quantities at one parameter pair.
#[derive(Debug)]
pub struct ObjectiveEvaluation<'p> {
    pub gamma: PenaltyParams,
    pub mode: Mode,
    /// `||P_Omega (z - x)||^2`, floored at `RSS_FLOOR`.
    pub rss: f64,
    /// The floor was applied.
    pub rss_floored: bool,
    pub df: f64,
    pub bic: f64,
    pub aic: f64,
    pub n_observed: usize,
    pub z: Vec<f64>,
    /// `P_Omega (z - x)`
    pub residual: Vec<f64>,
    /// `S^-1 w_k` for each probe, in Hutchinson mode.
    pub probe_solutions: Vec<Vec<f64>>,
    traces: Option<ExactTraces>,
    factorization: Factorization<'p>,
}

impl ObjectiveEvaluation<'_> {
    pub fn value(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Bic => self.bic,
            Criterion::Aic => self.aic,
        }
    }

    pub fn factorization(&self) -> &Factorization<'_> {
        &self.factorization
    }

    pub fn exact_traces(&self) -> Option<ExactTraces> {
        self.traces
    }
}

/// Evaluates BIC and AIC at `gamma`. Exact mode performs one solve plus an
/// exact trace computation; Hutchinson mode performs `N + 1` solves against
/// one factorization.
pub fn evaluate_objective<'p>(
    p: &'p BmcProblem,
    gamma: PenaltyParams,
    mode: Mode,
    probes: Option<&ProbeSet>,
    cfg: &SolverConfig,
) -> Result<ObjectiveEvaluation<'p>> {
    if let Some((row_component, col_component)) = check_assumption(p).first_violation {
        return Err(Error::AssumptionViolated { row_component, col_component });
    }
    let op = p.operator(gamma)?;
    let f = factorize(&op, cfg)?;
    let x = p.data().projected();
    let (z, probe_solutions, df, traces) = match mode {
        Mode::Exact => {
            let (z, _) = solve_data(p, &f)?;
            let traces = match f.exact_traces() {
                Some(t) => t,
                None => exact_traces(&op)?,
            };
            (z, Vec::new(), traces.df, Some(traces))
        }
        Mode::Hutchinson => {
            let probes = probes.ok_or_else(|| Error::InvalidArgument("Hutchinson mode needs probes".into()))?;
            if probes.is_empty() || probes.dim() != op.dim() {
                return Err(Error::InvalidArgument(format!(
                    "need at least one probe of length {}, got {} of length {}",
                    op.dim(),
                    probes.len(),
                    probes.dim()
                )));
            }
            let (z, _) = solve_data(p, &f)?;
            let probe_solutions: Vec<Vec<f64>> = f.solve_many(probes.vectors())?.into_iter().map(|(z, _)| z).collect();
            let df = quadratic_mean(probes.vectors(), probe_solutions.iter().map(Vec::as_slice));
            (z, probe_solutions, df, None)
        }
    };
    let residual = p.mask().project(&z.iter().zip(&x).map(|(zi, xi)| zi - xi).collect::<Vec<_>>());
    let raw_rss = dot(&residual, &residual);
    let rss_floored = raw_rss < RSS_FLOOR;
    let rss = raw_rss.max(RSS_FLOOR);
    let n_observed = p.mask().observed_count();
    let fit = n_observed as f64 * rss.ln();
    Ok(ObjectiveEvaluation {
        gamma,
        mode,
        rss,
        rss_floored,
        df,
        bic: fit + Criterion::Bic.df_weight(n_observed) * df,
        aic: fit + Criterion::Aic.df_weight(n_observed) * df,
        n_observed,
        z,
        residual,
        probe_solutions,
        traces,
        factorization: f,
    })
}

/// Gradient pieces with respect to `(gamma_r, gamma_c)`: the derivative of
/// the fit term and the traces `tr(S_r)`, `tr(S_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveGradient {
    pub fit: [f64; 2],
    pub traces: [f64; 2],
    pub n_observed: usize,
}

impl ObjectiveGradient {
    pub fn for_criterion(&self, criterion: Criterion) -> [f64; 2] {
        let w = criterion.df_weight(self.n_observed);
        [self.fit[0] - w * self.traces[0], self.fit[1] - w * self.traces[1]]
    }

    pub fn bic(&self) -> [f64; 2] {
        self.for_criterion(Criterion::Bic)
    }

    pub fn aic(&self) -> [f64; 2] {
        self.for_criterion(Criterion::Aic)
    }
}

/// One extra solve `v = S^-1 r`; the fit derivative is
/// `-(2 |Omega| / rss) z^T K v` for `K = I kron L_r` or `L_c kron I`.
pub fn gradient(_p: &BmcProblem, eval: &ObjectiveEvaluation<'_>, _cfg: &SolverConfig) -> Result<ObjectiveGradient> {
    if eval.rss_floored {
        return Err(Error::GradientUndefined);
    }
    let f = &eval.factorization;
    let op = f.operator();
    let (v, _) = f.solve(&eval.residual)?;
    let scale = -2.0 * eval.n_observed as f64 / eval.rss;
    let fit = [scale * dot(&eval.z, &op.apply_row_penalty(&v)), scale * dot(&eval.z, &op.apply_col_penalty(&v))];
    let traces = match (eval.mode, eval.traces) {
        (Mode::Exact, Some(t)) => [t.row, t.col],
        _ => {
            let n = eval.probe_solutions.len() as f64;
            let mut tr = [CompensatedSum::default(), CompensatedSum::default()];
            for zk in &eval.probe_solutions {
                tr[0].add(dot(zk, &op.apply_row_penalty(zk)));
                tr[1].add(dot(zk, &op.apply_col_penalty(zk)));
            }
            [tr[0].value() / n, tr[1].value() / n]
        }
    };
    Ok(ObjectiveGradient { fit, traces, n_observed: eval.n_observed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_counts() {
        assert_eq!(sample_count_for(1.0, 2.0 / std::f64::consts::E).unwrap(), 6);
        assert_eq!(sample_count_for(0.1, 0.05).unwrap(), 2214);
        assert!(sample_count_for(0.0, 0.5).is_err());
        assert!(sample_count_for(0.5, 1.0).is_err());
    }

    #[test]
    fn probes_are_signs_and_seeded() {
        let a = ProbeSet::rademacher(3, 50, 11);
        assert!(a.vectors().iter().flatten().all(|v| v.abs() == 1.0));
        assert_eq!(a, ProbeSet::rademacher(3, 50, 11));
        assert_ne!(a, ProbeSet::rademacher(3, 50, 12));
    }
}
