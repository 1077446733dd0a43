//! Incomplete Cholesky preconditioning and the preconditioned conjugate
//! gradient iteration.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::linalg::{axpy, dot, norm, CsrMatrix};

/// Lower-triangular incomplete factor `L` with `L L^T ~ A`, stored by rows
/// with the diagonal as the last entry of each row.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl IncompleteCholesky {
    /// With `drop_tol == 0` the factor keeps exactly the lower pattern of `a`.
    /// Otherwise fill is admitted and entries below
    /// `drop_tol * ||row of a||` are discarded. The diagonal of `a` is scaled
    /// by `1 + shift`. Returns `None` on a nonpositive pivot.
    pub fn new(a: &CsrMatrix, drop_tol: f64, shift: f64) -> Option<Self> {
        let n = a.n_rows();
        let mut indptr = vec![0usize];
        let mut indices: Vec<usize> = Vec::new();
        let mut data: Vec<f64> = Vec::new();
        // column view of the finished part of L, excluding diagonals
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];
        let mut work = vec![0.0; n];
        let mut in_pattern = vec![false; n];
        let mut allowed = vec![false; n];
        let mut heap = BinaryHeap::new();
        let mut row_entries: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            let mut a_ii = 0.0;
            let mut row_norm = 0.0;
            for (j, v) in a.row(i) {
                row_norm += v * v;
                if j < i {
                    work[j] = v;
                    in_pattern[j] = true;
                    allowed[j] = true;
                    heap.push(Reverse(j));
                } else if j == i {
                    a_ii = v * (1.0 + shift);
                }
            }
            let threshold = drop_tol * row_norm.sqrt();
            let fill = drop_tol > 0.0;
            row_entries.clear();
            let mut sum_sq = 0.0;
            while let Some(Reverse(k)) = heap.pop() {
                if !in_pattern[k] {
                    continue;
                }
                in_pattern[k] = false;
                let x = work[k] / diag[k];
                work[k] = 0.0;
                if x == 0.0 || (fill && x.abs() < threshold) {
                    continue;
                }
                row_entries.push((k, x));
                sum_sq += x * x;
                for &(r, l_rk) in &cols[k] {
                    if r >= i {
                        break;
                    }
                    if !in_pattern[r] {
                        if !(fill || allowed[r]) || r <= k {
                            continue;
                        }
                        in_pattern[r] = true;
                        heap.push(Reverse(r));
                    }
                    work[r] -= l_rk * x;
                }
            }
            for (j, _) in a.row(i) {
                allowed[j] = false;
            }
            let pivot = a_ii - sum_sq;
            if !(pivot > 0.0 && pivot.is_finite()) {
                return None;
            }
            diag[i] = pivot.sqrt();
            for &(k, x) in &row_entries {
                indices.push(k);
                data.push(x);
                cols[k].push((i, x));
            }
            indices.push(i);
            data.push(diag[i]);
            indptr.push(indices.len());
        }
        Some(IncompleteCholesky { indptr, indices, data })
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// `(L L^T)^{-1} r`
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.indptr.len() - 1;
        let mut y = r.to_vec();
        for i in 0..n {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = y[i];
            for k in lo..hi - 1 {
                acc -= self.data[k] * y[self.indices[k]];
            }
            y[i] = acc / self.data[hi - 1];
        }
        for i in (0..n).rev() {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let zi = y[i] / self.data[hi - 1];
            y[i] = zi;
            for k in lo..hi - 1 {
                y[self.indices[k]] -= self.data[k] * zi;
            }
        }
        y
    }
}

pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Conjugate gradients from the zero vector. Convergence is declared on the
/// recomputed true residual; the recurrence is restarted whenever the
/// recursive residual claims convergence that the true one does not confirm.
pub(crate) fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: Option<&IncompleteCholesky>,
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return CgOutcome { x, iterations: 0, converged: true };
    }
    let target = rel_tol * b_norm;
    let prec = |r: &[f64]| match precondition {
        Some(ic) => ic.apply(r),
        None => r.to_vec(),
    };
    let mut r = b.to_vec();
    let mut iterations = 0;
    'restart: loop {
        let mut z = prec(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iters {
            let q = apply(&p);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break 'restart;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            iterations += 1;
            if norm(&r) <= target {
                let sx = apply(&x);
                r = b.iter().zip(&sx).map(|(bi, si)| bi - si).collect();
                if norm(&r) <= target {
                    return CgOutcome { x, iterations, converged: true };
                }
                continue 'restart;
            }
            z = prec(&r);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        break;
    }
    CgOutcome { x, iterations, converged: false }
}
