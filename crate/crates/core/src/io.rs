//! File formats: CSV and MatrixMarket matrices, MatrixMarket graphs, JSON
//! reports, and CSV tables of traces, surfaces and experiment results.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every value bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::selection::{GridResult, SelectionTrace};
use crate::simulate::{ExperimentResult, MethodSummary};
use crate::system::{Mask, ObservedMatrix};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    /// Dense CSV; `NaN` or empty cells are missing.
    #[default]
    CsvNan,
    /// MatrixMarket coordinate file listing observed entries only.
    MmCoord,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" | "csv_nan" | "csv-nan" => Ok(MatrixFormat::CsvNan),
            "mm" | "mm_coord" | "mm-coord" | "mtx" => Ok(MatrixFormat::MmCoord),
            _ => Err(Error::InvalidArgument(format!("unknown matrix format '{s}'"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn is_missing_cell(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("nan")
}

/// Parses CSV text into a rectangular grid of optional numbers.
fn parse_csv_cells(text: &str, header: bool, path: &Path) -> Result<Vec<Vec<Option<f64>>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(header).flexible(false).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|cell| {
                let cell = cell.trim();
                if is_missing_cell(cell) {
                    return Ok(None);
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(Error::parse(path, line, format!("'{cell}' is not a finite number"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::parse(path, 1, "no data rows"));
    }
    Ok(rows)
}

/// Reads CSV text with `NaN` or empty cells treated as missing.
pub fn parse_observed_csv(text: &str, header: bool, path: &Path) -> Result<ObservedMatrix> {
    let rows = parse_csv_cells(text, header, path)?;
    let (n, p) = (rows.len(), rows[0].len());
    let values = Matrix::from_fn(n, p, |i, j| rows[i][j].unwrap_or(0.0));
    let mask = Mask::from_flags(n, p, (0..n * p).map(|k| rows[k % n][k / n].is_some()).collect())?;
    if mask.observed_count() == 0 {
        return Err(Error::parse(path, 1, "no observed entries"));
    }
    ObservedMatrix::new(values, mask)
}

/// Reads MatrixMarket coordinate text whose entries are the observed cells.
pub fn parse_observed_mm(text: &str, path: &Path) -> Result<ObservedMatrix> {
    let (n, p, entries) = parse_mm_coordinate(text, path, false)?;
    let mut values = Matrix::zeros(n, p);
    let mut flags = vec![false; n * p];
    for (line, i, j, v) in entries {
        if std::mem::replace(&mut flags[i + n * j], true) {
            return Err(Error::parse(path, line, format!("duplicate entry ({}, {})", i + 1, j + 1)));
        }
        values.set(i, j, v);
    }
    if !flags.iter().any(|&f| f) {
        return Err(Error::parse(path, 1, "no observed entries"));
    }
    ObservedMatrix::new(values, Mask::from_flags(n, p, flags)?)
}

/// Zero-based `(line, i, j, value)` entries of a real coordinate file.
type MmEntries = Vec<(usize, usize, usize, f64)>;

fn parse_mm_coordinate(text: &str, path: &Path, want_symmetric: bool) -> Result<(usize, usize, MmEntries)> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, banner) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" || words[2] != "coordinate" {
        return Err(Error::parse(path, 1, "expected a '%%MatrixMarket matrix coordinate' banner"));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(Error::parse(path, 1, format!("unsupported field '{}'", words[3])));
    }
    match (words[4].as_str(), want_symmetric) {
        ("general", false) | ("symmetric", true) => {}
        (sym, _) => return Err(Error::parse(path, 1, format!("unsupported symmetry '{sym}' here"))),
    }
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = body.next().ok_or_else(|| Error::parse(path, 2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| Error::parse(path, size_line, format!("bad size '{w}'"))))
        .collect::<Result<_>>()?;
    let [n, p, nnz] = dims[..] else {
        return Err(Error::parse(path, size_line, "size line needs rows, columns and entry count"));
    };
    if n == 0 || p == 0 {
        return Err(Error::parse(path, size_line, "dimensions must be positive"));
    }
    let mut entries = Vec::with_capacity(nnz);
    for (line, l) in body {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(path, line, "expected 'row column value'"));
        }
        let index = |w: &str, bound: usize| -> Result<usize> {
            match w.parse::<usize>() {
                Ok(k) if (1..=bound).contains(&k) => Ok(k - 1),
                _ => Err(Error::parse(path, line, format!("index '{w}' out of range 1..={bound}"))),
            }
        };
        let i = index(parts[0], n)?;
        let j = index(parts[1], p)?;
        let v: f64 = parts[2].parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            Error::parse(path, line, format!("'{}' is not a finite number", parts[2]))
        })?;
        entries.push((line, i, j, v));
    }
    if entries.len() != nnz {
        return Err(Error::parse(path, size_line, format!("size line promises {nnz} entries, found {}", entries.len())));
    }
    Ok((n, p, entries))
}

pub fn read_observed_matrix(path: &Path, format: MatrixFormat, header: bool) -> Result<ObservedMatrix> {
    let text = read_text(path)?;
    match format {
        MatrixFormat::CsvNan => parse_observed_csv(&text, header, path),
        MatrixFormat::MmCoord => parse_observed_mm(&text, path),
    }
}

pub fn format_observed_csv(data: &ObservedMatrix) -> String {
    let mut out = String::new();
    for i in 0..data.n_rows() {
        let cells: Vec<String> = (0..data.n_cols())
            .map(|j| if data.mask().is_observed(i, j) { data.values().get(i, j).to_string() } else { "NaN".into() })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn format_observed_mm(data: &ObservedMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", data.n_rows(), data.n_cols(), data.mask().observed_count()));
    for k in data.mask().observed_indices() {
        let (i, j) = (k % data.n_rows(), k / data.n_rows());
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, data.values().get(i, j)));
    }
    out
}

pub fn write_observed_matrix(path: &Path, data: &ObservedMatrix, format: MatrixFormat) -> Result<()> {
    let text = match format {
        MatrixFormat::CsvNan => format_observed_csv(data),
        MatrixFormat::MmCoord => format_observed_mm(data),
    };
    write_text(path, &text)
}

/// Dense CSV without a header, one matrix row per line.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.n_rows() {
        let cells: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Fully observed numeric CSV, e.g. a feature matrix.
pub fn read_matrix_csv(path: &Path, header: bool) -> Result<Matrix> {
    let rows = parse_csv_cells(&read_text(path)?, header, path)?;
    if let Some(i) = rows.iter().position(|r| r.iter().any(Option::is_none)) {
        return Err(Error::parse(path, i + 1 + usize::from(header), "missing value in a matrix that must be complete"));
    }
    Matrix::from_rows(&rows.into_iter().map(|r| r.into_iter().flatten().collect()).collect::<Vec<_>>())
}

pub fn format_graph_mm(g: &WeightedGraph) -> String {
    let n = g.n_vertices();
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    out.push_str(&format!("{n} {n} {}\n", g.n_edges()));
    let mut edges: Vec<_> = g.edges().iter().map(|e| (e.j, e.i, e.weight)).collect();
    edges.sort_by_key(|&(row, col, _)| (col, row));
    for (row, col, w) in edges {
        out.push_str(&format!("{} {} {}\n", row + 1, col + 1, w));
    }
    out
}

/// Symmetric MatrixMarket text, one triangle of the weight matrix. Zero
/// weights are dropped; diagonal entries and repeated pairs are rejected.
pub fn parse_graph_mm(text: &str, path: &Path) -> Result<WeightedGraph> {
    let (n, p, entries) = parse_mm_coordinate(text, path, true)?;
    if n != p {
        return Err(Error::parse(path, 2, "a graph file must be square"));
    }
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(entries.len());
    for (line, i, j, w) in entries {
        if i == j {
            return Err(Error::parse(path, line, "self-loops are not allowed"));
        }
        if w < 0.0 {
            return Err(Error::parse(path, line, "weights must be nonnegative"));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::parse(path, line, format!("duplicate edge ({}, {})", i + 1, j + 1)));
        }
        edges.push((i, j, w));
    }
    WeightedGraph::new(n, edges)
}

pub fn read_graph(path: &Path) -> Result<WeightedGraph> {
    parse_graph_mm(&read_text(path)?, path)
}

pub fn write_graph(path: &Path, g: &WeightedGraph) -> Result<()> {
    write_text(path, &format_graph_mm(g))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::Serde(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Outcome of one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema: u32,
    pub method: String,
    pub mode: String,
    pub criterion: String,
    pub seed: u64,
    pub gamma_r: f64,
    pub gamma_c: f64,
    pub bic: f64,
    pub aic: f64,
    pub df: f64,
    pub rss: f64,
    pub n_observed: usize,
    pub solves: usize,
    pub iterations: usize,
    pub status: Option<String>,
    /// Present only when timing was requested, so reports stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_seconds: Option<f64>,
}

fn csv_text<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(fill: F) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).map_err(|e| Error::Serde(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

/// One row per recorded iterate. The wall-clock column is left empty unless
/// `timing` is set.
pub fn format_trace_csv(trace: &SelectionTrace, timing: bool) -> Result<String> {
    csv_text(|w| {
        w.write_record(["iteration", "gamma_r", "gamma_c", "objective", "grad_inf_norm", "solves", "wall_seconds"])?;
        for (k, it) in trace.iterates.iter().enumerate() {
            w.write_record([
                k.to_string(),
                it.gamma.gamma_r.to_string(),
                it.gamma.gamma_c.to_string(),
                it.objective.to_string(),
                it.grad_inf_norm.to_string(),
                it.solves.to_string(),
                if timing { it.wall_seconds.to_string() } else { String::new() },
            ])?;
        }
        Ok(())
    })
}

/// Long-form surface: one row per cell.
pub fn format_surface_csv(grid: &GridResult) -> Result<String> {
    csv_text(|w| {
        w.write_record(["i", "j", "gamma_r", "gamma_c", "value"])?;
        for (i, row) in grid.surface.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    grid.row_values[i].to_string(),
                    grid.col_values[j].to_string(),
                    v.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// One row per (replicate, method).
pub fn format_results_csv(results: &[ExperimentResult]) -> Result<String> {
    csv_text(|w| {
        w.write_record([
            "replicate",
            "method",
            "gamma_r",
            "gamma_c",
            "bic",
            "mse_missing",
            "mse_observed",
            "mse_observed_noisy",
            "solves",
            "iterations",
            "status",
            "wall_seconds",
        ])?;
        for res in results {
            for r in &res.records {
                w.write_record([
                    res.replicate.to_string(),
                    r.method.clone(),
                    r.gamma.gamma_r.to_string(),
                    r.gamma.gamma_c.to_string(),
                    r.bic.to_string(),
                    r.mse_missing.to_string(),
                    r.mse_observed.to_string(),
                    r.mse_observed_noisy.to_string(),
                    r.solves.to_string(),
                    r.iterations.to_string(),
                    r.status.map(|s| format!("{s:?}").to_ascii_lowercase()).unwrap_or_default(),
                    r.wall_seconds.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)
}

/// Means and standard deviations per method, as written next to a results
/// table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub schema: u32,
    pub replicates: usize,
    pub methods: Vec<MethodSummary>,
}
