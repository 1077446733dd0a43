//! The vectorized normal-equations operator
//! `S = P_Omega + gamma_r (I kron L_r) + gamma_c (L_c kron I)`.
//!
//! Vectors of length `n * p` are column-major vectorizations: entry `(i, j)`
//! lives at `i + n * j`.

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{ComponentPartition, LaplacianMatrix};
use crate::linalg::CsrMatrix;

/// Largest number of unknowns `assemble_sparse` accepts by default.
pub const DEFAULT_ASSEMBLY_CAP: usize = 1_000_000;

/// Largest `n * p` for which dense oracles may be materialized.
pub const DENSE_CAP: usize = 2_000;

/// The observation set Omega as a column-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    n_rows: usize,
    n_cols: usize,
    observed: Vec<bool>,
    count: usize,
}

impl Mask {
    pub fn full(n_rows: usize, n_cols: usize) -> Self {
        Mask { n_rows, n_cols, observed: vec![true; n_rows * n_cols], count: n_rows * n_cols }
    }

    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Mask { n_rows, n_cols, observed: vec![false; n_rows * n_cols], count: 0 }
    }

    pub fn from_entries(n_rows: usize, n_cols: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut mask = Mask::empty(n_rows, n_cols);
        for (i, j) in entries {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidArgument(format!(
                    "observed index ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            mask.set(i, j, true);
        }
        Ok(mask)
    }

    pub fn from_flags(n_rows: usize, n_cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch { expected: n_rows * n_cols, got: observed.len() });
        }
        let count = observed.iter().filter(|&&b| b).count();
        Ok(Mask { n_rows, n_cols, observed, count })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|Omega|`
    #[inline]
    pub fn observed_count(&self) -> usize {
        self.count
    }

    pub fn missing_count(&self) -> usize {
        self.len() - self.count
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i + self.n_rows * j]
    }

    #[inline]
    pub fn is_observed_at(&self, k: usize) -> bool {
        self.observed[k]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let k = i + self.n_rows * j;
        if self.observed[k] != value {
            self.observed[k] = value;
            if value {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.observed
    }

    /// Observed linear indices in increasing order.
    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.observed[k]).collect()
    }

    pub fn missing_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.observed[k]).collect()
    }

    /// `P_Omega v`: zeroes unobserved coordinates (even non-finite ones).
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.len(), "vector length must be n * p");
        v.iter().zip(&self.observed).map(|(&x, &o)| if o { x } else { 0.0 }).collect()
    }

    /// Patch observation counts: entry `[r][c]` counts observed indices in
    /// row component `r` and column component `c`.
    pub fn patch_counts(&self, rows: &ComponentPartition, cols: &ComponentPartition) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0usize; cols.component_count()]; rows.component_count()];
        for j in 0..self.n_cols {
            let c = cols.label(j);
            for i in 0..self.n_rows {
                if self.is_observed(i, j) {
                    counts[rows.label(i)][c] += 1;
                }
            }
        }
        counts
    }
}

pub fn project(mask: &Mask, v: &[f64]) -> Vec<f64> {
    mask.project(v)
}

/// Data matrix `X` with its observation mask. Values at unobserved positions
/// are ignored everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    values: Matrix,
    mask: Mask,
}

impl ObservedMatrix {
    pub fn new(values: Matrix, mask: Mask) -> Result<Self> {
        if values.n_rows() != mask.n_rows() || values.n_cols() != mask.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "values are {}x{} but the mask is {}x{}",
                values.n_rows(),
                values.n_cols(),
                mask.n_rows(),
                mask.n_cols()
            )));
        }
        if mask.observed_count() == 0 {
            return Err(Error::InvalidArgument("at least one entry must be observed".into()));
        }
        for k in mask.observed_indices() {
            if !values.as_slice()[k].is_finite() {
                return Err(Error::InvalidArgument(format!("observed entry at index {k} is not finite")));
            }
        }
        Ok(ObservedMatrix { values, mask })
    }

    pub fn fully_observed(values: Matrix) -> Result<Self> {
        let mask = Mask::full(values.n_rows(), values.n_cols());
        ObservedMatrix::new(values, mask)
    }

    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.n_cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// `P_Omega x`
    pub fn projected(&self) -> Vec<f64> {
        self.mask.project(self.values.as_slice())
    }

    pub fn with_mask(&self, mask: Mask) -> Result<Self> {
        ObservedMatrix::new(self.values.clone(), mask)
    }
}

/// Smoothing strengths `(gamma_r, gamma_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub gamma_r: f64,
    pub gamma_c: f64,
}

impl PenaltyParams {
    pub fn new(gamma_r: f64, gamma_c: f64) -> Result<Self> {
        if !(gamma_r.is_finite() && gamma_c.is_finite() && gamma_r >= 0.0 && gamma_c >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty parameters must be finite and nonnegative, got ({gamma_r}, {gamma_c})"
            )));
        }
        Ok(PenaltyParams { gamma_r, gamma_c })
    }

    pub fn uniform(gamma: f64) -> Result<Self> {
        PenaltyParams::new(gamma, gamma)
    }

    pub fn from_log(eta_r: f64, eta_c: f64) -> Result<Self> {
        PenaltyParams::new(eta_r.exp(), eta_c.exp())
    }

    pub fn log(&self) -> [f64; 2] {
        [self.gamma_r.ln(), self.gamma_c.ln()]
    }

    pub fn is_positive(&self) -> bool {
        self.gamma_r > 0.0 && self.gamma_c > 0.0
    }
}

/// Borrowed view of `S` at one parameter pair; cheap to create per `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct SystemOperator<'a> {
    mask: &'a Mask,
    row_laplacian: &'a LaplacianMatrix,
    col_laplacian: &'a LaplacianMatrix,
    params: PenaltyParams,
}

impl<'a> SystemOperator<'a> {
    pub fn new(
        mask: &'a Mask,
        row_laplacian: &'a LaplacianMatrix,
        col_laplacian: &'a LaplacianMatrix,
        params: PenaltyParams,
    ) -> Result<Self> {
        if row_laplacian.dim() != mask.n_rows() {
            return Err(Error::DimensionMismatch { expected: mask.n_rows(), got: row_laplacian.dim() });
        }
        if col_laplacian.dim() != mask.n_cols() {
            return Err(Error::DimensionMismatch { expected: mask.n_cols(), got: col_laplacian.dim() });
        }
        Ok(SystemOperator { mask, row_laplacian, col_laplacian, params })
    }

    pub fn mask(&self) -> &'a Mask {
        self.mask
    }

    pub fn row_laplacian(&self) -> &'a LaplacianMatrix {
        self.row_laplacian
    }

    pub fn col_laplacian(&self) -> &'a LaplacianMatrix {
        self.col_laplacian
    }

    pub fn params(&self) -> PenaltyParams {
        self.params
    }

    pub fn with_params(&self, params: PenaltyParams) -> Self {
        SystemOperator { params, ..*self }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.mask.n_rows()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.mask.n_cols()
    }

    /// `n * p`
    #[inline]
    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// `(I kron L_r) v = vec(L_r V)`
    pub fn apply_row_penalty(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n_rows();
        let mut out = vec![0.0; v.len()];
        let l = self.row_laplacian.matrix();
        for (vj, oj) in v.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            l.mul_vec_into(vj, oj);
        }
        out
    }

    /// `(L_c kron I) v = vec(V L_c)`
    pub fn apply_col_penalty(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n_rows();
        let mut out = vec![0.0; v.len()];
        let l = self.col_laplacian.matrix();
        for j in 0..self.n_cols() {
            let oj = &mut out[j * n..(j + 1) * n];
            // L_c is symmetric, so row j lists the nonzeros of column j
            for (q, w) in l.row(j) {
                crate::linalg::axpy(w, &v[q * n..(q + 1) * n], oj);
            }
        }
        out
    }

    /// `S v` without materializing `S`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut out = self.mask.project(v);
        let PenaltyParams { gamma_r, gamma_c } = self.params;
        if gamma_r != 0.0 {
            crate::linalg::axpy(gamma_r, &self.apply_row_penalty(v), &mut out);
        }
        if gamma_c != 0.0 {
            crate::linalg::axpy(gamma_c, &self.apply_col_penalty(v), &mut out);
        }
        Ok(out)
    }

    /// Diagonal of `S`.
    pub fn diagonal(&self) -> Vec<f64> {
        let (n, p) = (self.n_rows(), self.n_cols());
        let dr = self.row_laplacian.matrix().diagonal();
        let dc = self.col_laplacian.matrix().diagonal();
        let mut d = Vec::with_capacity(n * p);
        for j in 0..p {
            for i in 0..n {
                let obs = if self.mask.is_observed(i, j) { 1.0 } else { 0.0 };
                d.push(obs + self.params.gamma_r * dr[i] + self.params.gamma_c * dc[j]);
            }
        }
        d
    }

    /// Full symmetric sparse assembly of `S` in sorted CSR order.
    pub fn assemble_sparse(&self, cap: usize) -> Result<CsrMatrix> {
        let dim = self.dim();
        if dim > cap {
            return Err(Error::CapExceeded { what: "sparse assembly", size: dim, cap });
        }
        let n = self.n_rows();
        let PenaltyParams { gamma_r, gamma_c } = self.params;
        let lr = self.row_laplacian.matrix();
        let lc = self.col_laplacian.matrix();
        let mut triplets = Vec::new();
        for j in 0..self.n_cols() {
            for i in 0..n {
                let k = i + n * j;
                if self.mask.is_observed(i, j) {
                    triplets.push((k, k, 1.0));
                }
                if gamma_r != 0.0 {
                    for (q, w) in lr.row(i) {
                        triplets.push((k, q + n * j, gamma_r * w));
                    }
                }
                if gamma_c != 0.0 {
                    for (q, w) in lc.row(j) {
                        triplets.push((k, i + n * q, gamma_c * w));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(dim, dim, triplets)
    }

    /// Dense row-major copy of `S`, for oracle checks on small problems only.
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        if self.dim() > DENSE_CAP {
            return Err(Error::CapExceeded { what: "dense materialization", size: self.dim(), cap: DENSE_CAP });
        }
        Ok(self.assemble_sparse(DENSE_CAP)?.to_dense())
    }

    /// Components of the graphs that actually enter `S`: a zero penalty
    /// weight leaves every vertex on that side isolated.
    pub fn effective_partitions(&self) -> (ComponentPartition, ComponentPartition) {
        let rows = if self.params.gamma_r > 0.0 {
            laplacian_components(self.row_laplacian)
        } else {
            ComponentPartition::singletons(self.n_rows())
        };
        let cols = if self.params.gamma_c > 0.0 {
            laplacian_components(self.col_laplacian)
        } else {
            ComponentPartition::singletons(self.n_cols())
        };
        (rows, cols)
    }

    /// First patch (row component, column component) without an observation,
    /// if any. `S` is positive definite exactly when this is `None`.
    pub fn first_empty_patch(&self) -> Option<(usize, usize)> {
        let (rows, cols) = self.effective_partitions();
        let counts = self.mask.patch_counts(&rows, &cols);
        counts.iter().enumerate().find_map(|(r, row)| row.iter().position(|&c| c == 0).map(|c| (r, c)))
    }
}

/// Components read off the off-diagonal pattern of a Laplacian.
fn laplacian_components(l: &LaplacianMatrix) -> ComponentPartition {
    let edges = (0..l.dim()).flat_map(|i| l.matrix().row(i).filter(move |&(j, _)| j > i).map(move |(j, w)| (i, j, w.abs())));
    crate::graph::WeightedGraph::new(l.dim(), edges)
        .expect("Laplacian pattern forms a valid graph")
        .components()
}
