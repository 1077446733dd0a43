//! The completion estimator: the problem bundle, the missingness check, the
//! penalized fit at given smoothing strengths, and its infinite-strength
//! limit (observed means over each bicluster patch).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{ComponentPartition, EdgeIncidence, LaplacianMatrix, WeightedGraph};
use crate::linalg::{norm, CompensatedSum};
use crate::solver::{factorize, Factorization, SolveReport, SolverConfig};
use crate::system::{Mask, ObservedMatrix, PenaltyParams, SystemOperator};

#[derive(Debug)]
struct GraphBundle {
    graph: WeightedGraph,
    laplacian: LaplacianMatrix,
    incidence: EdgeIncidence,
    partition: ComponentPartition,
}

impl GraphBundle {
    fn new(graph: WeightedGraph) -> Self {
        GraphBundle {
            laplacian: graph.laplacian(),
            incidence: graph.incidence(),
            partition: graph.components(),
            graph,
        }
    }
}

/// Data plus row and column graphs. Graph-derived quantities are computed
/// once and shared between problems that differ only in data or mask.
#[derive(Debug, Clone)]
pub struct BmcProblem {
    data: ObservedMatrix,
    rows: Arc<GraphBundle>,
    cols: Arc<GraphBundle>,
}

impl BmcProblem {
    pub fn new(data: ObservedMatrix, row_graph: WeightedGraph, col_graph: WeightedGraph) -> Result<Self> {
        if row_graph.n_vertices() != data.n_rows() {
            return Err(Error::DimensionMismatch { expected: data.n_rows(), got: row_graph.n_vertices() });
        }
        if col_graph.n_vertices() != data.n_cols() {
            return Err(Error::DimensionMismatch { expected: data.n_cols(), got: col_graph.n_vertices() });
        }
        Ok(BmcProblem { data, rows: Arc::new(GraphBundle::new(row_graph)), cols: Arc::new(GraphBundle::new(col_graph)) })
    }

    /// Same graphs, different data of the same shape.
    pub fn with_data(&self, data: ObservedMatrix) -> Result<Self> {
        if data.n_rows() != self.n_rows() || data.n_cols() != self.n_cols() {
            return Err(Error::InvalidArgument("replacement data must keep the matrix shape".into()));
        }
        Ok(BmcProblem { data, rows: Arc::clone(&self.rows), cols: Arc::clone(&self.cols) })
    }

    /// Same data and graphs, different observation set.
    pub fn with_mask(&self, mask: Mask) -> Result<Self> {
        self.with_data(self.data.with_mask(mask)?)
    }

    pub fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.n_cols()
    }

    pub fn data(&self) -> &ObservedMatrix {
        &self.data
    }

    pub fn mask(&self) -> &Mask {
        self.data.mask()
    }

    pub fn row_graph(&self) -> &WeightedGraph {
        &self.rows.graph
    }

    pub fn col_graph(&self) -> &WeightedGraph {
        &self.cols.graph
    }

    pub fn row_laplacian(&self) -> &LaplacianMatrix {
        &self.rows.laplacian
    }

    pub fn col_laplacian(&self) -> &LaplacianMatrix {
        &self.cols.laplacian
    }

    pub fn row_incidence(&self) -> &EdgeIncidence {
        &self.rows.incidence
    }

    pub fn col_incidence(&self) -> &EdgeIncidence {
        &self.cols.incidence
    }

    pub fn row_partition(&self) -> &ComponentPartition {
        &self.rows.partition
    }

    pub fn col_partition(&self) -> &ComponentPartition {
        &self.cols.partition
    }

    pub fn operator(&self, params: PenaltyParams) -> Result<SystemOperator<'_>> {
        SystemOperator::new(self.mask(), &self.rows.laplacian, &self.cols.laplacian, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub holds: bool,
    /// First empty patch `(row component, column component)` in row-major
    /// order.
    pub first_violation: Option<(usize, usize)>,
}

/// Every patch formed by a row component and a column component must contain
/// an observed entry.
pub fn check_assumption(p: &BmcProblem) -> AssumptionCheck {
    check_mask(p.mask(), p.row_partition(), p.col_partition())
}

/// The same check on a bare mask and partitions; one pass over the mask.
pub fn check_mask(mask: &Mask, rows: &ComponentPartition, cols: &ComponentPartition) -> AssumptionCheck {
    let counts = mask.patch_counts(rows, cols);
    let first_violation =
        counts.iter().enumerate().find_map(|(r, row)| row.iter().position(|&c| c == 0).map(|c| (r, c)));
    AssumptionCheck { holds: first_violation.is_none(), first_violation }
}

fn require_assumption(p: &BmcProblem) -> Result<()> {
    match check_assumption(p).first_violation {
        Some((row_component, col_component)) => Err(Error::AssumptionViolated { row_component, col_component }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fit {
    Penalized(PenaltyParams),
    /// Both strengths taken to infinity.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletedMatrix {
    pub estimate: Matrix,
    pub fit: Fit,
    pub report: Option<SolveReport>,
}

/// Solves `S z = P_Omega x`.
pub fn complete(p: &BmcProblem, gamma: PenaltyParams, cfg: &SolverConfig) -> Result<CompletedMatrix> {
    require_assumption(p)?;
    let op = p.operator(gamma)?;
    let f = factorize(&op, cfg)?;
    complete_with(p, &f)
}

/// Completion through an existing factorization of the problem's operator.
pub fn complete_with(p: &BmcProblem, f: &Factorization<'_>) -> Result<CompletedMatrix> {
    let (z, report) = solve_data(p, f)?;
    let estimate = Matrix::from_col_major(p.n_rows(), p.n_cols(), z)?;
    Ok(CompletedMatrix { estimate, fit: Fit::Penalized(f.operator().params()), report: Some(report) })
}

/// Solves `S z = P_Omega x` as `z = a + S^-1 P_Omega (x - a)`, where `a` holds
/// the patch means over the operator's effective components. The penalty
/// annihilates `a`, so the identity is exact, and the solve only has to
/// resolve the small deviation from the limit, which keeps large strengths
/// accurate. The reported residual is relative to `P_Omega x`.
pub fn solve_data(p: &BmcProblem, f: &Factorization<'_>) -> Result<(Vec<f64>, SolveReport)> {
    let op = f.operator();
    let (rows, cols) = op.effective_partitions();
    let (means, _) = average_patches(p.data(), &rows, &cols);
    let n = p.n_rows();
    let anchor: Vec<f64> = (0..n * p.n_cols()).map(|k| means[rows.label(k % n)][cols.label(k / n)]).collect();
    let x = p.data().values().as_slice();
    let shifted: Vec<f64> = (0..x.len()).map(|k| if p.mask().is_observed_at(k) { x[k] - anchor[k] } else { 0.0 }).collect();
    let (delta, mut report) = f.solve(&shifted)?;
    let b_norm = norm(&p.data().projected());
    if b_norm > 0.0 {
        let shifted_norm = norm(&shifted);
        report.relative_residual *= if shifted_norm > 0.0 { shifted_norm } else { 1.0 } / b_norm;
    }
    let z = anchor.iter().zip(&delta).map(|(a, d)| a + d).collect();
    Ok((z, report))
}

fn average_patches(data: &ObservedMatrix, rows: &ComponentPartition, cols: &ComponentPartition) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut sums = vec![vec![CompensatedSum::default(); cols.component_count()]; rows.component_count()];
    let counts = data.mask().patch_counts(rows, cols);
    let x = data.values();
    for j in 0..data.n_cols() {
        let c = cols.label(j);
        for i in 0..data.n_rows() {
            if data.mask().is_observed(i, j) {
                sums[rows.label(i)][c].add(x.get(i, j));
            }
        }
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(s_row, c_row)| s_row.iter().zip(c_row).map(|(s, &c)| if c == 0 { 0.0 } else { s.value() / c as f64 }).collect())
        .collect();
    (means, counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMeans {
    /// `means[r][c]` is the observed mean over row component `r` and column
    /// component `c`.
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

pub fn patch_means(p: &BmcProblem) -> Result<PatchMeans> {
    require_assumption(p)?;
    let (means, counts) = average_patches(p.data(), p.row_partition(), p.col_partition());
    Ok(PatchMeans { means, counts })
}

/// Block-constant matrix of patch means.
pub fn limiting_solution(p: &BmcProblem) -> Result<CompletedMatrix> {
    let pm = patch_means(p)?;
    let (rows, cols) = (p.row_partition(), p.col_partition());
    let estimate = Matrix::from_fn(p.n_rows(), p.n_cols(), |i, j| pm.means[rows.label(i)][cols.label(j)]);
    Ok(CompletedMatrix { estimate, fit: Fit::Limit, report: None })
}

/// `gamma_r/2 ||Phi_r Z||^2 + gamma_c/2 ||Z Phi_c^T||^2`, the smoothing
/// penalty; nonnegative by construction.
pub fn penalty(p: &BmcProblem, gamma: PenaltyParams, z: &Matrix) -> f64 {
    let (n, q) = (z.n_rows(), z.n_cols());
    let mut row_part = CompensatedSum::default();
    for j in 0..q {
        let col = &z.as_slice()[j * n..(j + 1) * n];
        for v in p.row_incidence().apply(col) {
            row_part.add(v * v);
        }
    }
    let mut col_part = CompensatedSum::default();
    for i in 0..n {
        for v in p.col_incidence().apply(&z.row(i)) {
            col_part.add(v * v);
        }
    }
    0.5 * gamma.gamma_r * row_part.value() + 0.5 * gamma.gamma_c * col_part.value()
}
