//! Exact solves and traces through the Laplacian eigenbases.
//!
//! With `Q = Q_c kron Q_r`, the penalized part `A = I + gamma_r (I kron L_r) +
//! gamma_c (L_c kron I)` is diagonal, `A = Q diag(d) Q^T`. The system is then
//! `S = A - U U^T` with `U` selecting the unobserved coordinates, and the
//! Woodbury identity reduces every solve to one with the `m x m` capacitance
//! matrix `H = I - U^T A^{-1} U`, where `m` counts unobserved entries.

use std::sync::Arc;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::graph::Spectrum;
use crate::system::SystemOperator;

/// Rough flop budget above which the capacitance route is not attempted.
const FLOP_BUDGET: f64 = 4e11;

pub(crate) struct SpectralFactor {
    n: usize,
    p: usize,
    row: Arc<Spectrum>,
    col: Arc<Spectrum>,
    /// Eigenvalues of `A`, column-major over `(a, b)`.
    d: Vec<f64>,
    missing: Vec<(usize, usize)>,
    capacitance: Option<faer::linalg::solvers::Llt<f64>>,
}

/// Exact `tr(S^-1)`, `tr(S^-1 (I kron L_r) S^-1)` and `tr(S^-1 (L_c kron I) S^-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactTraces {
    pub df: f64,
    pub row: f64,
    pub col: f64,
}

/// Estimated cost of building the capacitance factor and its traces.
pub(crate) fn estimated_flops(n: usize, p: usize, m: usize) -> f64 {
    let (n, p, m) = (n as f64, p as f64, m as f64);
    let eig = 10.0 * (n.powi(3) + p.powi(3));
    let gather = 6.0 * (n.powi(3) * p + m * m * p);
    eig + gather + 5.0 * m.powi(3)
}

pub(crate) fn is_feasible(op: &SystemOperator<'_>) -> bool {
    estimated_flops(op.n_rows(), op.n_cols(), op.mask().missing_count()) <= FLOP_BUDGET
}

impl SpectralFactor {
    pub(crate) fn new(op: &SystemOperator<'_>) -> Result<Self> {
        let (n, p) = (op.n_rows(), op.n_cols());
        let row = op.row_laplacian().spectrum()?;
        let col = op.col_laplacian().spectrum()?;
        let params = op.params();
        let mut d = Vec::with_capacity(n * p);
        for b in 0..p {
            for a in 0..n {
                d.push(1.0 + params.gamma_r * row.values[a].max(0.0) + params.gamma_c * col.values[b].max(0.0));
            }
        }
        let missing: Vec<(usize, usize)> =
            op.mask().missing_indices().into_iter().map(|k| (k % n, k / n)).collect();
        let mut factor = SpectralFactor { n, p, row, col, d, missing, capacitance: None };
        if !factor.missing.is_empty() {
            let inv_d: Vec<f64> = factor.d.iter().map(|x| 1.0 / x).collect();
            let g = factor.gathered(&[inv_d]).pop().expect("one weight requested");
            let m = factor.missing.len();
            let h = Mat::<f64>::from_fn(m, m, |i, j| if i == j { 1.0 - g[(i, j)] } else { -g[(i, j)] });
            let llt = h
                .llt(Side::Lower)
                .map_err(|_| Error::NotPositiveDefinite("capacitance matrix is not positive definite".into()))?;
            factor.capacitance = Some(llt);
        }
        Ok(factor)
    }

    fn to_spectral(&self, v: &[f64]) -> Mat<f64> {
        let vm = faer::MatRef::from_column_major_slice(v, self.n, self.p);
        self.row.vectors.transpose() * vm * &self.col.vectors
    }

    fn from_spectral(&self, t: &Mat<f64>) -> Vec<f64> {
        let out = &self.row.vectors * t * self.col.vectors.transpose();
        let mut v = Vec::with_capacity(self.n * self.p);
        for j in 0..self.p {
            v.extend((0..self.n).map(|i| out[(i, j)]));
        }
        v
    }

    /// `A^{-1} v`
    fn apply_a_inverse(&self, v: &[f64]) -> Vec<f64> {
        let mut t = self.to_spectral(v);
        for b in 0..self.p {
            for a in 0..self.n {
                t[(a, b)] /= self.d[a + self.n * b];
            }
        }
        self.from_spectral(&t)
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = self.apply_a_inverse(b);
        let Some(llt) = &self.capacitance else {
            return z;
        };
        let n = self.n;
        let m = self.missing.len();
        let rhs = Mat::<f64>::from_fn(m, 1, |l, _| {
            let (i, j) = self.missing[l];
            z[i + n * j]
        });
        let s = llt.solve(&rhs);
        let mut scattered = vec![0.0; n * self.p];
        for (l, &(i, j)) in self.missing.iter().enumerate() {
            scattered[i + n * j] = s[(l, 0)];
        }
        let correction = self.apply_a_inverse(&scattered);
        for (zi, ci) in z.iter_mut().zip(&correction) {
            *zi += ci;
        }
        z
    }

    /// `U^T Q diag(f) Q^T U` for each weight vector `f` (column-major over
    /// the `(a, b)` eigenpairs).
    ///
    /// Entry `(l, k)` equals `sum_b W_k[i_l, b] Q_c[j_k, b] Q_c[j_l, b]` with
    /// `W_k = Q_r diag(Q_r[i_k, :]) F`, so all columns sharing a row index
    /// `i_k` come out of one matrix product.
    fn gathered(&self, weights: &[Vec<f64>]) -> Vec<Mat<f64>> {
        let (n, p) = (self.n, self.p);
        let m = self.missing.len();
        let t_count = weights.len();
        let qr = &self.row.vectors;
        let qc = &self.col.vectors;
        let mut out: Vec<Mat<f64>> = (0..t_count).map(|_| Mat::zeros(m, m)).collect();
        let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &(i, _)) in self.missing.iter().enumerate() {
            by_row[i].push(k);
        }
        let mut stacked = Mat::<f64>::zeros(t_count * m, p);
        for (i, ks) in by_row.iter().enumerate() {
            if ks.is_empty() {
                continue;
            }
            for (t, f) in weights.iter().enumerate() {
                let scaled = Mat::<f64>::from_fn(n, p, |a, b| qr[(i, a)] * f[a + n * b]);
                let w = qr * &scaled;
                for (l, &(il, jl)) in self.missing.iter().enumerate() {
                    for b in 0..p {
                        stacked[(t * m + l, b)] = w[(il, b)] * qc[(jl, b)];
                    }
                }
            }
            let right = Mat::<f64>::from_fn(p, ks.len(), |b, c| qc[(self.missing[ks[c]].1, b)]);
            let block = &stacked * &right;
            for (t, g) in out.iter_mut().enumerate() {
                for (c, &k) in ks.iter().enumerate() {
                    for l in 0..m {
                        g[(l, k)] = block[(t * m + l, c)];
                    }
                }
            }
        }
        // symmetrize away rounding differences between (l, k) and (k, l)
        for g in &mut out {
            for k in 0..m {
                for l in (k + 1)..m {
                    let v = 0.5 * (g[(l, k)] + g[(k, l)]);
                    g[(l, k)] = v;
                    g[(k, l)] = v;
                }
            }
        }
        out
    }

    pub(crate) fn traces(&self) -> ExactTraces {
        let (n, p) = (self.n, self.p);
        let lr = |k: usize| self.row.values[k % n].max(0.0);
        let lc = |k: usize| self.col.values[k / n].max(0.0);
        let mut base_df = crate::linalg::CompensatedSum::default();
        let mut base_r = crate::linalg::CompensatedSum::default();
        let mut base_c = crate::linalg::CompensatedSum::default();
        for (k, &dk) in self.d.iter().enumerate() {
            base_df.add(1.0 / dk);
            base_r.add(lr(k) / (dk * dk));
            base_c.add(lc(k) / (dk * dk));
        }
        let Some(llt) = &self.capacitance else {
            return ExactTraces { df: base_df.value(), row: base_r.value(), col: base_c.value() };
        };
        let np = n * p;
        let inv2: Vec<f64> = self.d.iter().map(|x| 1.0 / (x * x)).collect();
        let r3: Vec<f64> = (0..np).map(|k| lr(k) * inv2[k] / self.d[k]).collect();
        let c3: Vec<f64> = (0..np).map(|k| lc(k) * inv2[k] / self.d[k]).collect();
        let r2: Vec<f64> = (0..np).map(|k| lr(k) * inv2[k]).collect();
        let c2: Vec<f64> = (0..np).map(|k| lc(k) * inv2[k]).collect();
        let g = self.gathered(&[inv2, r3, c3, r2, c2]);
        let h_inv = llt.inverse();
        let inner = |a: &Mat<f64>, b: &Mat<f64>| -> f64 {
            let mut s = 0.0;
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    s += a[(i, j)] * b[(i, j)];
                }
            }
            s
        };
        let sandwich = &h_inv * &g[0] * &h_inv;
        ExactTraces {
            df: base_df.value() + inner(&h_inv, &g[0]),
            row: base_r.value() + 2.0 * inner(&h_inv, &g[1]) + inner(&g[3], &sandwich),
            col: base_c.value() + 2.0 * inner(&h_inv, &g[2]) + inner(&g[4], &sandwich),
        }
    }
}
