//! Sparse supernodal Cholesky of the assembled system, backed by `faer`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::LltRegularization;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Fill-reducing ordering applied before the numeric factorization.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FillOrdering {
    /// Approximate minimum degree.
    #[default]
    Amd,
    /// No reordering.
    Natural,
    /// Caller-supplied permutation: entry `k` is the original index placed
    /// at position `k`.
    Custom(Vec<usize>),
}

pub(crate) struct SparseCholesky {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

/// Lower triangle of a symmetric CSR matrix in CSC form. Row `j` of the full
/// matrix equals column `j`, so column `j` of the lower triangle is the part
/// of row `j` on or right of the diagonal.
fn lower_csc(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let n = a.n_rows();
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for j in 0..n {
        for (i, v) in a.row(j).filter(|&(i, _)| i >= j) {
            row_idx.push(i);
            values.push(v);
        }
        col_ptr.push(row_idx.len());
    }
    let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    Ok(SparseColMat::new(symbolic, values))
}

impl SparseCholesky {
    pub(crate) fn new(a: &CsrMatrix, ordering: &FillOrdering) -> Result<Self> {
        let n = a.n_rows();
        let lower = lower_csc(a)?;
        let inverse: Vec<usize>;
        let forward: Vec<usize>;
        let ord = match ordering {
            FillOrdering::Amd => SymmetricOrdering::Amd,
            FillOrdering::Natural | FillOrdering::Custom(_) => {
                let perm = match ordering {
                    FillOrdering::Custom(perm) => perm.clone(),
                    _ => (0..n).collect(),
                };
                let mut seen = vec![false; n];
                if perm.len() != n || perm.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
                    return Err(Error::InvalidArgument("custom ordering is not a permutation".into()));
                }
                forward = perm;
                let mut inv = vec![0usize; n];
                for (k, &v) in forward.iter().enumerate() {
                    inv[v] = k;
                }
                inverse = inv;
                SymmetricOrdering::Custom(PermRef::new_checked(&forward, &inverse, n))
            }
        };
        let symbolic = factorize_symbolic_cholesky(lower.symbolic(), Side::Lower, ord, CholeskySymbolicParams::default())
            .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic
            .factorize_numeric_llt(
                &mut values,
                lower.as_ref(),
                Side::Lower,
                LltRegularization::default(),
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::NotPositiveDefinite(format!("sparse Cholesky pivot failure: {e:?}")))?;
        Ok(SparseCholesky { symbolic, values })
    }

    /// Overwrites each column of `rhs` with the solution.
    pub(crate) fn solve_in_place(&self, rhs: MatMut<'_, f64>) {
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(rhs.ncols(), Par::Seq));
        LltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            rhs,
            Par::Seq,
            MemStack::new(&mut mem),
        );
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = faer::Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub(crate) fn factor_nnz(&self) -> usize {
        self.values.len()
    }
}
