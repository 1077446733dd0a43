use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cross_validate, evaluate_objective, Criterion, Mode, ProbeSet};
use crate::completion::BmcProblem;
use crate::error::{Error, Result};
use crate::solver::{SolveAudit, SolverConfig};
use crate::system::PenaltyParams;

/// `points` evenly spaced exponents on `[lo, hi]`, exponentiated.
pub fn exponent_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo.exp()],
        _ => (0..points).map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_row: usize,
    pub n_col: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    pub fn square(points: usize) -> Self {
        GridSpec { n_row: points, n_col: points, lo: -9.0, hi: 1.0 }
    }

    pub fn row_values(&self) -> Vec<f64> {
        exponent_grid(self.n_row, self.lo, self.hi)
    }

    pub fn col_values(&self) -> Vec<f64> {
        exponent_grid(self.n_col, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridObjective {
    Exact(Criterion),
    Hutchinson { criterion: Criterion, probes: usize, seed: u64 },
    CrossValidation { folds: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub gamma: PenaltyParams,
    /// Index `(i, j)` of the selected cell.
    pub best: (usize, usize),
    pub best_value: f64,
    pub row_values: Vec<f64>,
    pub col_values: Vec<f64>,
    /// `surface[i][j]` is the objective at `(row_values[i], col_values[j])`;
    /// failed points hold `+inf`.
    pub surface: Vec<Vec<f64>>,
    pub solves: usize,
}

/// Evaluates the objective at every grid cell and returns the smallest,
/// preferring the lowest row-major index among ties.
pub fn grid_search(
    p: &BmcProblem,
    objective: GridObjective,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<GridResult> {
    if grid.n_row < 2 || grid.n_col < 2 {
        return Err(Error::InvalidArgument("a grid needs at least two points per axis".into()));
    }
    let audit = SolveAudit::new();
    let cfg = SolverConfig { audit: Some(audit.clone()), ..cfg.clone() };
    let row_values = grid.row_values();
    let col_values = grid.col_values();
    let probes = match objective {
        GridObjective::Hutchinson { probes, seed, .. } => {
            Some(ProbeSet::rademacher(probes, p.n_rows() * p.n_cols(), seed))
        }
        _ => None,
    };
    let cells: Vec<(usize, usize)> =
        (0..grid.n_row).flat_map(|i| (0..grid.n_col).map(move |j| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let gamma = PenaltyParams::new(row_values[i], col_values[j])?;
            let value = match objective {
                GridObjective::Exact(c) => evaluate_objective(p, gamma, Mode::Exact, None, &cfg).map(|e| e.value(c)),
                GridObjective::Hutchinson { criterion, .. } => {
                    evaluate_objective(p, gamma, Mode::Hutchinson, probes.as_ref(), &cfg).map(|e| e.value(criterion))
                }
                GridObjective::CrossValidation { folds, seed } => {
                    cross_validate(p, gamma, folds, seed, &cfg).map(|r| r.mean_mse)
                }
            };
            match value {
                Ok(v) if !v.is_nan() => Ok(v),
                Ok(_) => {
                    log::warn!("grid point ({i}, {j}) gave NaN; recorded as +inf");
                    Ok(f64::INFINITY)
                }
                Err(e @ (Error::FoldInfeasible { .. } | Error::AssumptionViolated { .. })) => Err(e),
                Err(e) => {
                    log::warn!("grid point ({i}, {j}) failed: {e}; recorded as +inf");
                    Ok(f64::INFINITY)
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    let (bi, bj) = cells[best];
    let surface = values.chunks(grid.n_col).map(<[f64]>::to_vec).collect();
    Ok(GridResult {
        gamma: PenaltyParams::new(row_values[bi], col_values[bj])?,
        best: (bi, bj),
        best_value: values[best],
        row_values,
        col_values,
        surface,
        solves: audit.count(),
    })
}
