//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use bmc::{Mask, Matrix, ObservedMatrix, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense symmetric weight matrix of a graph.
pub fn weight_matrix(g: &WeightedGraph) -> Vec<Vec<f64>> {
    let n = g.n_vertices();
    let mut w = vec![vec![0.0; n]; n];
    for e in g.edges() {
        w[e.i][e.j] = e.weight;
        w[e.j][e.i] = e.weight;
    }
    w
}

/// Degree minus adjacency, straight from the definition.
pub fn laplacian_oracle(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l[i][j] = -w[i][j];
                l[i][i] += w[i][j];
            }
        }
    }
    l
}

/// `S = P + gamma_r (I kron L_r) + gamma_c (L_c kron I)` entry by entry,
/// column-major index `k = i + n j`.
pub fn dense_system(mask: &Mask, lr: &[Vec<f64>], lc: &[Vec<f64>], gr: f64, gc: f64) -> Vec<Vec<f64>> {
    let (n, p) = (lr.len(), lc.len());
    let dim = n * p;
    let mut s = vec![vec![0.0; dim]; dim];
    for j in 0..p {
        for i in 0..n {
            let k = i + n * j;
            if mask.is_observed(i, j) {
                s[k][k] += 1.0;
            }
            for i2 in 0..n {
                s[k][i2 + n * j] += gr * lr[i][i2];
            }
            for j2 in 0..p {
                s[k][i + n * j2] += gc * lc[j][j2];
            }
        }
    }
    s
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, q) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; q]; n];
    for i in 0..n {
        for k in 0..m {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..q {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

pub fn trace(a: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// Gauss-Jordan inverse with partial pivoting; `None` if singular.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        let total: f64 = m.iter().flatten().map(|v| v * v).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Component label per vertex from the transitive closure of adjacency,
/// numbered by smallest member.
pub fn closure_components(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || w[i][j] > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i] == usize::MAX {
            for j in 0..n {
                if reach[i][j] {
                    labels[j] = next;
                }
            }
            next += 1;
        }
    }
    labels
}

/// Top-`k` union rule by sorting every vertex's full neighbour list.
pub fn knn_oracle(w: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut keep = vec![vec![false; n]; n];
    for i in 0..n {
        let mut nbrs: Vec<usize> = (0..n).filter(|&j| j != i && w[i][j] > 0.0).collect();
        nbrs.sort_by(|&a, &b| w[i][b].partial_cmp(&w[i][a]).unwrap().then(a.cmp(&b)));
        for &j in nbrs.iter().take(k) {
            keep[i][j] = true;
            keep[j][i] = true;
        }
    }
    (0..n).map(|i| (0..n).map(|j| if keep[i][j] { w[i][j] } else { 0.0 }).collect()).collect()
}

/// Textbook sample correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn random_graph(n: usize, density: f64, rng: &mut impl Rng) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

/// Connected random graph: a random spanning path plus extra edges.
pub fn random_connected_graph(n: usize, density: f64, rng: &mut impl Rng) -> WeightedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut w = vec![vec![0.0; n]; n];
    for pair in order.windows(2) {
        let v = rng.random_range(0.1..2.0);
        w[pair[0]][pair[1]] = v;
        w[pair[1]][pair[0]] = v;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if w[i][j] == 0.0 && rng.random::<f64>() < density {
                let v = rng.random_range(0.1..2.0);
                w[i][j] = v;
                w[j][i] = v;
            }
        }
    }
    WeightedGraph::from_dense(&w).unwrap()
}

/// Random data with roughly `missing` of the entries unobserved, at least one
/// observed.
pub fn random_observed(n: usize, p: usize, missing: f64, rng: &mut impl Rng) -> ObservedMatrix {
    let x = Matrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0));
    let mut flags: Vec<bool> = (0..n * p).map(|_| rng.random::<f64>() >= missing).collect();
    if !flags.iter().any(|&b| b) {
        flags[0] = true;
    }
    ObservedMatrix::new(x, Mask::from_flags(n, p, flags).unwrap()).unwrap()
}

/// Two-by-two block constant matrix of the given block sizes.
pub fn checkerboard(rows: &[usize], cols: &[usize], means: &[Vec<f64>]) -> Matrix {
    let rlab: Vec<usize> = rows.iter().enumerate().flat_map(|(r, &s)| std::iter::repeat_n(r, s)).collect();
    let clab: Vec<usize> = cols.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    Matrix::from_fn(rlab.len(), clab.len(), |i, j| means[rlab[i]][clab[j]])
}

/// Graph connecting vertices within the same block only.
pub fn block_graph(sizes: &[usize], weight: f64) -> WeightedGraph {
    let lab: Vec<usize> = sizes.iter().enumerate().flat_map(|(r, &s)| std::iter::repeat_n(r, s)).collect();
    WeightedGraph::from_fn(lab.len(), |i, j| if lab[i] == lab[j] { weight } else { 0.0 }).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
