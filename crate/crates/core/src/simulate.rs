//! Synthetic block-constant experiments: ground truth, noise, missingness,
//! block-structured weights, and side-by-side runs of the selection methods
//! on identical realizations.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::{check_assumption, complete, BmcProblem};
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::rng::indexed_stream;
use crate::selection::{
    evaluate_objective, grid_search, ims, Criterion, GridObjective, GridSpec, ImsConfig, Mode, TerminalStatus,
};
use crate::solver::{Method, SolverConfig};
use crate::system::{Mask, ObservedMatrix, PenaltyParams};

/// Weight between two vertices of the same block.
pub const WITHIN_BLOCK_WEIGHT: f64 = 1.0;
/// Weight between vertices of different blocks.
pub const ACROSS_BLOCK_WEIGHT: f64 = 0.001;

/// Mask redraws allowed before a realization is declared infeasible.
pub const MAX_MASK_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardSpec {
    pub row_blocks: Vec<usize>,
    pub col_blocks: Vec<usize>,
    /// `means[r][c]` is the value on row block `r` and column block `c`.
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Fraction of entries hidden, in `[0, 1)`.
    pub missing: f64,
    pub seed: u64,
}

impl Default for CheckerboardSpec {
    /// Four 25 by 25 biclusters with means 10, -25, 25, -10, unit noise and
    /// a tenth of the entries missing.
    fn default() -> Self {
        CheckerboardSpec {
            row_blocks: vec![25, 25],
            col_blocks: vec![25, 25],
            means: vec![vec![10.0, -25.0], vec![25.0, -10.0]],
            sigma: 1.0,
            missing: 0.1,
            seed: 0,
        }
    }
}

impl CheckerboardSpec {
    pub fn n_rows(&self) -> usize {
        self.row_blocks.iter().sum()
    }

    pub fn n_cols(&self) -> usize {
        self.col_blocks.iter().sum()
    }

    /// Number of entries left unobserved: `ceil(missing * n * p)`.
    pub fn missing_count(&self) -> usize {
        (self.missing * (self.n_rows() * self.n_cols()) as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.row_blocks.is_empty() || self.col_blocks.is_empty() || self.row_blocks.iter().chain(&self.col_blocks).any(|&s| s == 0) {
            return bad("block sizes must be positive and nonempty".into());
        }
        if self.means.len() != self.row_blocks.len() || self.means.iter().any(|r| r.len() != self.col_blocks.len()) {
            return bad(format!("means must be {} by {}", self.row_blocks.len(), self.col_blocks.len()));
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            return bad("means must be finite".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("noise level must be nonnegative, got {}", self.sigma));
        }
        if !(0.0..1.0).contains(&self.missing) {
            return bad(format!("missing fraction must lie in [0, 1), got {}", self.missing));
        }
        if self.missing_count() >= self.n_rows() * self.n_cols() {
            return bad("no entry would remain observed".into());
        }
        Ok(())
    }

    /// The noiseless block-constant matrix.
    pub fn truth(&self) -> Matrix {
        let rows = block_labels(&self.row_blocks);
        let cols = block_labels(&self.col_blocks);
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.means[rows[i]][cols[j]])
    }
}

fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect()
}

/// One noisy, partially observed draw. Noise comes from the stream
/// `("noise", replicate)` and the mask from `("mask", replicate)`, where
/// `attempt` indexes redraws of the mask alone.
pub fn realize(spec: &CheckerboardSpec, replicate: u64, attempt: usize) -> Result<(Matrix, ObservedMatrix)> {
    spec.validate()?;
    let truth = spec.truth();
    let (n, p) = (truth.n_rows(), truth.n_cols());
    let mut noise = indexed_stream(spec.seed, "noise", replicate);
    let x = Matrix::from_fn(n, p, |i, j| {
        let e: f64 = noise.sample(StandardNormal);
        truth.get(i, j) + spec.sigma * e
    });
    let mut mask_rng = indexed_stream(spec.seed, "mask", replicate.wrapping_mul(MAX_MASK_ATTEMPTS as u64 + 1) + attempt as u64);
    let mut flags = vec![true; n * p];
    for k in sample(&mut mask_rng, n * p, spec.missing_count()) {
        flags[k] = false;
    }
    let data = ObservedMatrix::new(x, Mask::from_flags(n, p, flags)?)?;
    Ok((truth, data))
}

/// The first realization of `spec`.
pub fn generate(spec: &CheckerboardSpec) -> Result<(Matrix, ObservedMatrix)> {
    realize(spec, 0, 0)
}

/// Complete graph over the blocks: weight 1 inside a block, 0.001 across.
pub fn block_weights(sizes: &[usize]) -> WeightedGraph {
    let labels = block_labels(sizes);
    WeightedGraph::from_fn(labels.len(), |i, j| if labels[i] == labels[j] { WITHIN_BLOCK_WEIGHT } else { ACROSS_BLOCK_WEIGHT })
        .expect("block weights are positive and finite")
}

/// The problem of one realization, with block weights on both sides.
pub fn block_problem(spec: &CheckerboardSpec, data: ObservedMatrix) -> Result<BmcProblem> {
    BmcProblem::new(data, block_weights(&spec.row_blocks), block_weights(&spec.col_blocks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MethodSpec {
    ImsExact,
    ImsHutchinson { probes: usize },
    GridBic { points: usize },
    GridCv { points: usize, folds: usize },
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::ImsExact => write!(f, "ims_exact"),
            MethodSpec::ImsHutchinson { probes } => write!(f, "ims_hutchinson({probes})"),
            MethodSpec::GridBic { points } => write!(f, "grid_bic({points})"),
            MethodSpec::GridCv { points, folds } => write!(f, "grid_cv({points},{folds})"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    /// Parses the `Display` form, e.g. `ims_hutchinson(5)` or `grid_cv(50,5)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown method '{s}'"));
        let s = s.trim();
        if s == "ims_exact" {
            return Ok(MethodSpec::ImsExact);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<usize> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name, args.as_slice()) {
            ("ims_hutchinson", &[probes]) if probes > 0 => Ok(MethodSpec::ImsHutchinson { probes }),
            ("grid_bic", &[points]) if points >= 2 => Ok(MethodSpec::GridBic { points }),
            ("grid_cv", &[points, folds]) if points >= 2 && folds >= 2 => Ok(MethodSpec::GridCv { points, folds }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub methods: Vec<MethodSpec>,
    pub replicates: usize,
    pub init: PenaltyParams,
    pub ims: ImsConfig,
    pub solver: SolverConfig,
    /// Run replicates on the rayon pool; each replicate stays sequential.
    pub parallel: bool,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            methods: vec![MethodSpec::ImsExact, MethodSpec::ImsHutchinson { probes: 5 }],
            replicates: 1,
            init: PenaltyParams { gamma_r: 1.0, gamma_c: 1.0 },
            ims: ImsConfig::default(),
            solver: SolverConfig::with_method(Method::Spectral),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: String,
    pub wall_seconds: f64,
    pub gamma: PenaltyParams,
    /// Exact BIC at the selected strengths.
    pub bic: f64,
    /// Mean squared error against the noiseless truth over hidden entries;
    /// zero when nothing is hidden.
    pub mse_missing: f64,
    /// The same over observed entries.
    pub mse_observed: f64,
    /// Mean squared error against the noisy data over observed entries.
    pub mse_observed_noisy: f64,
    pub solves: usize,
    /// IMS iterates or grid cells evaluated.
    pub iterations: usize,
    pub status: Option<TerminalStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub replicate: usize,
    /// Mask draws needed before every patch had an observation.
    pub mask_attempts: usize,
    pub records: Vec<MethodRecord>,
}

/// Runs every method on `cfg.replicates` realizations of `spec`. Results are
/// a pure function of `(spec, cfg)`; all methods see the same data.
pub fn run_comparison(spec: &CheckerboardSpec, cfg: &ComparisonConfig) -> Result<Vec<ExperimentResult>> {
    spec.validate()?;
    let one = |rep: usize| run_replicate(spec, cfg, rep);
    if cfg.parallel {
        (0..cfg.replicates).into_par_iter().map(one).collect()
    } else {
        (0..cfg.replicates).map(one).collect()
    }
}

/// A feasible realization: the first mask draw under which every bicluster
/// patch keeps an observation.
pub fn feasible_realization(spec: &CheckerboardSpec, replicate: u64) -> Result<(Matrix, BmcProblem, usize)> {
    for attempt in 0..MAX_MASK_ATTEMPTS {
        let (truth, data) = realize(spec, replicate, attempt)?;
        let prob = block_problem(spec, data)?;
        if check_assumption(&prob).holds {
            return Ok((truth, prob, attempt + 1));
        }
    }
    Err(Error::InfeasibleRealization { attempts: MAX_MASK_ATTEMPTS })
}

fn run_replicate(spec: &CheckerboardSpec, cfg: &ComparisonConfig, replicate: usize) -> Result<ExperimentResult> {
    let (truth, prob, mask_attempts) = feasible_realization(spec, replicate as u64)?;
    let records = cfg
        .methods
        .iter()
        .map(|&m| run_method(&prob, &truth, m, cfg, replicate))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { replicate, mask_attempts, records })
}

/// Seed of the method-level randomness (probes, folds) for one replicate.
fn method_seed(cfg: &ComparisonConfig, replicate: usize) -> u64 {
    crate::rng::indexed_seed(cfg.ims.seed, "method", replicate as u64)
}

pub fn run_method(
    prob: &BmcProblem,
    truth: &Matrix,
    method: MethodSpec,
    cfg: &ComparisonConfig,
    replicate: usize,
) -> Result<MethodRecord> {
    let seed = method_seed(cfg, replicate);
    let start = Instant::now();
    let (gamma, solves, iterations, status, estimate) = match method {
        MethodSpec::ImsExact | MethodSpec::ImsHutchinson { .. } => {
            let (mode, probes) = match method {
                MethodSpec::ImsHutchinson { probes } => (Mode::Hutchinson, probes),
                _ => (Mode::Exact, cfg.ims.probes),
            };
            let ims_cfg = ImsConfig { probes, seed, ..cfg.ims.clone() };
            let (gamma, trace) = ims(prob, cfg.init, mode, &ims_cfg, &cfg.solver)?;
            let z = complete(prob, gamma, &cfg.solver)?.estimate;
            (gamma, trace.solves, trace.iterations(), Some(trace.status), z)
        }
        MethodSpec::GridBic { points } => {
            let res = grid_search(prob, GridObjective::Exact(Criterion::Bic), &GridSpec::square(points), &cfg.solver)?;
            let z = complete(prob, res.gamma, &cfg.solver)?.estimate;
            (res.gamma, res.solves, points * points, None, z)
        }
        MethodSpec::GridCv { points, folds } => {
            let objective = GridObjective::CrossValidation { folds, seed };
            let res = grid_search(prob, objective, &GridSpec::square(points), &cfg.solver)?;
            // the refit on every observed entry is part of the method
            let z = complete(prob, res.gamma, &cfg.solver)?.estimate;
            (res.gamma, res.solves + 1, points * points, None, z)
        }
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    let bic = evaluate_objective(prob, gamma, Mode::Exact, None, &cfg.solver)?.bic;
    let mask = prob.mask();
    let x = prob.data().values();
    let mean_sq = |keep: bool, reference: &Matrix| {
        let (mut sum, mut count) = (0.0, 0usize);
        for k in 0..mask.len() {
            if mask.is_observed_at(k) == keep {
                sum += (estimate.as_slice()[k] - reference.as_slice()[k]).powi(2);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    };
    Ok(MethodRecord {
        method: method.to_string(),
        wall_seconds,
        gamma,
        bic,
        mse_missing: mean_sq(false, truth),
        mse_observed: mean_sq(true, truth),
        mse_observed_noisy: mean_sq(true, x),
        solves,
        iterations,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub replicates: usize,
    pub mean_mse_missing: f64,
    pub sd_mse_missing: f64,
    pub mean_mse_observed: f64,
    pub sd_mse_observed: f64,
    pub mean_wall_seconds: f64,
    pub sd_wall_seconds: f64,
    pub mean_solves: f64,
    pub mean_iterations: f64,
    pub mean_bic: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-method means and sample standard deviations across replicates, in
/// the order methods first appear.
pub fn summarize(results: &[ExperimentResult]) -> Vec<MethodSummary> {
    let mut order: Vec<String> = Vec::new();
    for rec in results.iter().flat_map(|r| &r.records) {
        if !order.contains(&rec.method) {
            order.push(rec.method.clone());
        }
    }
    order
        .into_iter()
        .map(|method| {
            let recs: Vec<&MethodRecord> = results.iter().flat_map(|r| &r.records).filter(|r| r.method == method).collect();
            let col = |f: fn(&MethodRecord) -> f64| recs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (mean_mse_missing, sd_mse_missing) = mean_sd(&col(|r| r.mse_missing));
            let (mean_mse_observed, sd_mse_observed) = mean_sd(&col(|r| r.mse_observed));
            let (mean_wall_seconds, sd_wall_seconds) = mean_sd(&col(|r| r.wall_seconds));
            MethodSummary {
                replicates: recs.len(),
                mean_mse_missing,
                sd_mse_missing,
                mean_mse_observed,
                sd_mse_observed,
                mean_wall_seconds,
                sd_wall_seconds,
                mean_solves: mean_sd(&col(|r| r.solves as f64)).0,
                mean_iterations: mean_sd(&col(|r| r.iterations as f64)).0,
                mean_bic: mean_sd(&col(|r| r.bic)).0,
                method,
            }
        })
        .collect()
}
