//! Weighted similarity graphs over rows or columns, their Laplacians,
//! edge-incidence factors, and connected components.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use faer::{Mat, Side};

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// One undirected edge, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Symmetric nonnegative similarity weights, each unordered pair stored once.
///
/// Exact-zero weights are never stored, so connectivity is determined by the
/// stored edges alone.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) has weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            out.push(Edge { i: a.min(b), j: a.max(b), weight: w });
        }
        out.sort_unstable_by_key(|e| (e.i, e.j));
        if let Some(pair) = out.windows(2).find(|p| p[0].i == p[1].i && p[0].j == p[1].j) {
            return Err(Error::InvalidGraph(format!(
                "edge ({}, {}) listed more than once",
                pair[0].i, pair[0].j
            )));
        }
        Ok(WeightedGraph { n_vertices, edges: out })
    }

    pub fn empty(n_vertices: usize) -> Self {
        WeightedGraph { n_vertices, edges: Vec::new() }
    }

    /// Complete graph with weights `f(i, j)` for `i < j`; zero weights are dropped.
    pub fn from_fn(n_vertices: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n_vertices {
            for j in (i + 1)..n_vertices {
                edges.push((i, j, f(i, j)));
            }
        }
        WeightedGraph::new(n_vertices, edges)
    }

    /// Reads the strict upper triangle of a dense weight matrix. The matrix
    /// must be symmetric.
    pub fn from_dense(weights: &[Vec<f64>]) -> Result<Self> {
        let n = weights.len();
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for j in 0..i {
                if weights[i][j] != weights[j][i] {
                    return Err(Error::InvalidGraph(format!("weights ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        WeightedGraph::from_fn(n, |i, j| weights[i][j])
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        let (i, j) = (a.min(b), a.max(b));
        self.edges
            .binary_search_by_key(&(i, j), |e| (e.i, e.j))
            .map_or(0.0, |k| self.edges[k].weight)
    }

    /// Adjacency lists `(neighbor, weight)` in increasing neighbor order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for e in &self.edges {
            adj[e.i].push((e.j, e.weight));
            adj[e.j].push((e.i, e.weight));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(v, _)| v);
        }
        adj
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        build_laplacian(self)
    }

    pub fn incidence(&self) -> EdgeIncidence {
        build_incidence(self)
    }

    pub fn components(&self) -> ComponentPartition {
        connected_components(self)
    }
}

/// Graph Laplacian `D - W` in full symmetric CSR storage.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    matrix: CsrMatrix,
    spectrum: OnceLock<Arc<Spectrum>>,
}

/// Eigendecomposition `L = Q diag(values) Q^T`, eigenvalues nondecreasing.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl LaplacianMatrix {
    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(v)
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        crate::linalg::dot(v, &self.apply(v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.matrix.to_dense()
    }

    /// Dense symmetric eigendecomposition, computed once and cached.
    pub fn spectrum(&self) -> Result<Arc<Spectrum>> {
        if let Some(s) = self.spectrum.get() {
            return Ok(Arc::clone(s));
        }
        let n = self.dim();
        let mut dense = Mat::<f64>::zeros(n, n);
        for (i, j, v) in self.matrix.triplets() {
            dense[(i, j)] = v;
        }
        let evd = dense
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("Laplacian eigendecomposition failed: {e:?}")))?;
        let values: Vec<f64> = (0..n).map(|k| evd.S()[k]).collect();
        let spectrum = Arc::new(Spectrum { values, vectors: evd.U().to_owned() });
        Ok(Arc::clone(self.spectrum.get_or_init(|| spectrum)))
    }
}

pub fn build_laplacian(g: &WeightedGraph) -> LaplacianMatrix {
    let n = g.n_vertices();
    let mut degree = vec![0.0; n];
    let mut triplets = Vec::with_capacity(2 * g.n_edges() + n);
    for e in g.edges() {
        degree[e.i] += e.weight;
        degree[e.j] += e.weight;
        triplets.push((e.i, e.j, -e.weight));
        triplets.push((e.j, e.i, -e.weight));
    }
    triplets.extend(degree.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let matrix = CsrMatrix::from_triplets(n, n, triplets).expect("edges are validated at construction");
    LaplacianMatrix { matrix, spectrum: OnceLock::new() }
}

/// Signed edge-incidence matrix: row `l` holds `+sqrt(w_l)` at the edge's
/// first vertex and `-sqrt(w_l)` at its second, so that `Phi^T Phi = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIncidence {
    n_vertices: usize,
    rows: Vec<(usize, usize, f64)>,
}

impl EdgeIncidence {
    pub fn n_edges(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// `(head, tail, sqrt(weight))` per row.
    pub fn rows(&self) -> &[(usize, usize, f64)] {
        &self.rows
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let triplets = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(l, &(h, t, s))| [(l, h, s), (l, t, -s)]);
        CsrMatrix::from_triplets(self.rows.len(), self.n_vertices, triplets)
            .expect("incidence entries are in range")
    }

    /// `Phi v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&(h, t, s)| s * (v[h] - v[t])).collect()
    }

    /// `Phi^T Phi` assembled sparse.
    pub fn gram(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(4 * self.rows.len());
        for &(h, t, s) in &self.rows {
            let w = s * s;
            triplets.extend([(h, h, w), (t, t, w), (h, t, -w), (t, h, -w)]);
        }
        CsrMatrix::from_triplets(self.n_vertices, self.n_vertices, triplets)
            .expect("incidence entries are in range")
    }
}

pub fn build_incidence(g: &WeightedGraph) -> EdgeIncidence {
    EdgeIncidence {
        n_vertices: g.n_vertices(),
        rows: g.edges().iter().map(|e| (e.i, e.j, e.weight.sqrt())).collect(),
    }
}

/// Vertex partition into connected components. Component ids are assigned in
/// order of each component's smallest vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPartition {
    labels: Vec<usize>,
    supports: Vec<Vec<usize>>,
}

impl ComponentPartition {
    /// Every vertex in its own component.
    pub fn singletons(n: usize) -> Self {
        ComponentPartition { labels: (0..n).collect(), supports: (0..n).map(|v| vec![v]).collect() }
    }

    pub fn component_count(&self) -> usize {
        self.supports.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, vertex: usize) -> usize {
        self.labels[vertex]
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    /// Indicator vector of component `c`.
    pub fn indicator(&self, c: usize) -> Vec<f64> {
        let mut chi = vec![0.0; self.labels.len()];
        for &v in &self.supports[c] {
            chi[v] = 1.0;
        }
        chi
    }
}

pub fn connected_components(g: &WeightedGraph) -> ComponentPartition {
    let n = g.n_vertices();
    let adj = g.adjacency();
    let mut labels = vec![usize::MAX; n];
    let mut supports = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        let id = supports.len();
        let mut members = Vec::new();
        labels[start] = id;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for &(u, _) in &adj[v] {
                if labels[u] == usize::MAX {
                    labels[u] = id;
                    queue.push_back(u);
                }
            }
        }
        members.sort_unstable();
        supports.push(members);
    }
    ComponentPartition { labels, supports }
}

/// Keeps `w_ij` iff `j` is among the `k` heaviest neighbours of `i` or `i` is
/// among the `k` heaviest neighbours of `j`. Ties at the cut are broken toward
/// the lower vertex index.
pub fn knn_sparsify(g: &WeightedGraph, k: usize) -> Result<WeightedGraph> {
    if k == 0 {
        return Err(Error::InvalidArgument("knn sparsification needs k >= 1".into()));
    }
    let n = g.n_vertices();
    let mut keep = vec![false; g.n_edges()];
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (idx, e) in g.edges().iter().enumerate() {
        incident[e.i].push((e.j, idx));
        incident[e.j].push((e.i, idx));
    }
    let edges = g.edges();
    for list in &mut incident {
        list.sort_by(|&(va, ea), &(vb, eb)| {
            edges[eb].weight.total_cmp(&edges[ea].weight).then(va.cmp(&vb))
        });
        for &(_, idx) in list.iter().take(k) {
            keep[idx] = true;
        }
    }
    let kept = edges
        .iter()
        .zip(&keep)
        .filter(|(_, &kept)| kept)
        .map(|(e, _)| (e.i, e.j, e.weight));
    WeightedGraph::new(n, kept)
}

/// Pearson correlation between every pair of rows of `features`.
pub fn pearson_correlations(features: &Matrix) -> Result<Vec<Vec<f64>>> {
    let (n, d) = (features.n_rows(), features.n_cols());
    let mut centered = Vec::with_capacity(n);
    for i in 0..n {
        let row = features.row(i);
        let mean = row.iter().sum::<f64>() / d as f64;
        let c: Vec<f64> = row.iter().map(|x| x - mean).collect();
        let ss: f64 = c.iter().map(|x| x * x).sum();
        let scale: f64 = row.iter().map(|x| x * x).sum();
        if d < 2 || ss <= 1e-28 * scale || ss == 0.0 {
            return Err(Error::ZeroVarianceRow { row: i });
        }
        let inv = 1.0 / ss.sqrt();
        centered.push(c.into_iter().map(|x| x * inv).collect::<Vec<_>>());
    }
    let mut rho = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = crate::linalg::dot(&centered[i], &centered[j]).clamp(-1.0, 1.0);
            rho[i][j] = r;
            rho[j][i] = r;
        }
    }
    Ok(rho)
}

/// Complete graph with exponentiated-Pearson weights `exp(rho_ij)` between
/// rows of `features`, before any sparsification.
pub fn exp_pearson_graph(features: &Matrix) -> Result<WeightedGraph> {
    let rho = pearson_correlations(features)?;
    WeightedGraph::from_fn(features.n_rows(), |i, j| rho[i][j].exp())
}

/// Exponentiated-Pearson similarity between rows, then knn sparsification.
pub fn weights_from_features(features: &Matrix, k: usize) -> Result<WeightedGraph> {
    knn_sparsify(&exp_pearson_graph(features)?, k)
}
