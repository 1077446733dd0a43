//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code:
//! 0 success, 1 usage, 2 missingness assumption violated, 3 solver failure,
//! 4 input/output.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::completion::{check_assumption, complete, limiting_solution, BmcProblem};
use crate::error::{Error, Result};
use crate::graph::{weights_from_features, WeightedGraph};
use crate::io::{self, MatrixFormat, SelectionReport, SimulationSummary, REPORT_SCHEMA};
use crate::selection::{
    evaluate_objective, grid_search, ims, Criterion, GridObjective, GridSpec, ImsConfig, Mode, ProbeSet,
};
use crate::simulate::{run_comparison, summarize, CheckerboardSpec, ComparisonConfig, MethodSpec};
use crate::solver::{FillOrdering, Method, SolverConfig};
use crate::system::PenaltyParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ASSUMPTION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "BMC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bmc", version, about = "Biclustered matrix completion with graph smoothing and BIC-driven selection")]
pub struct Cli {
    /// Worker threads for parallel work (default: BMC_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log verbosity: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that every bicluster patch has an observed entry.
    Check(CheckArgs),
    /// Fit at fixed smoothing strengths and write the completed matrix.
    Complete(CompleteArgs),
    /// Choose smoothing strengths by IMS, BIC grid search or CV grid search.
    Select(SelectArgs),
    /// Build a k-nearest-neighbour similarity graph from a feature matrix.
    Weights(WeightsArgs),
    /// Run a synthetic comparison study described by a JSON file.
    Simulate(SimulateArgs),
    /// Degrees of freedom of the fit at given strengths.
    Df(DfArgs),
    /// Objective surface over a grid of strengths, as CSV.
    Surface(SurfaceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// Dense CSV with NaN or empty cells missing.
    Csv,
    /// MatrixMarket coordinate list of observed entries.
    Mm,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::CsvNan,
            FormatArg::Mm => MatrixFormat::MmCoord,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    Direct,
    Pcg,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingArg {
    Amd,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Hutchinson,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Hutchinson => Mode::Hutchinson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Bic,
    Aic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Aic => Criterion::Aic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectMethod {
    Ims,
    GridBic,
    GridCv,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Data matrix with missing entries.
    #[arg(long)]
    pub data: PathBuf,
    /// Format of the data file.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// The data and feature CSV files start with a header row.
    #[arg(long)]
    pub header: bool,
    /// Row similarity graph (symmetric MatrixMarket).
    #[arg(long, conflicts_with = "row_features")]
    pub row_graph: Option<PathBuf>,
    /// Column similarity graph (symmetric MatrixMarket).
    #[arg(long, conflicts_with = "col_features")]
    pub col_graph: Option<PathBuf>,
    /// Row feature CSV; the row graph is built from it.
    #[arg(long)]
    pub row_features: Option<PathBuf>,
    /// Column feature CSV; the column graph is built from it.
    #[arg(long)]
    pub col_features: Option<PathBuf>,
    /// Neighbours kept per vertex when building graphs from features.
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Linear solver.
    #[arg(long, value_enum, default_value = "auto")]
    pub solver: SolverArg,
    /// Relative residual target for conjugate gradients.
    #[arg(long, default_value_t = 1e-8)]
    pub cg_tol: f64,
    /// Iteration cap for conjugate gradients (default 10 sqrt(np) + 200).
    #[arg(long)]
    pub cg_max_iters: Option<usize>,
    /// Drop tolerance of the incomplete Cholesky preconditioner (0 = no fill).
    #[arg(long, default_value_t = 0.0)]
    pub ic_drop_tol: f64,
    /// Unknown count at which auto switches from direct to PCG.
    #[arg(long, default_value_t = 50_000)]
    pub auto_threshold: usize,
    /// Fill-reducing ordering for the direct solver.
    #[arg(long, value_enum, default_value = "amd")]
    pub ordering: OrderingArg,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            method: match self.solver {
                SolverArg::Auto => Method::Auto,
                SolverArg::Direct => Method::Direct,
                SolverArg::Pcg => Method::Pcg,
                SolverArg::Spectral => Method::Spectral,
            },
            cg_rel_tol: self.cg_tol,
            cg_max_iters: self.cg_max_iters,
            ic_drop_tol: self.ic_drop_tol,
            auto_threshold: self.auto_threshold,
            ordering: match self.ordering {
                OrderingArg::Amd => FillOrdering::Amd,
                OrderingArg::Natural => FillOrdering::Natural,
            },
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    /// Row smoothing strength.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_r: f64,
    /// Column smoothing strength.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_c: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Return the infinite-strength limit (patch means) instead.
    #[arg(long)]
    pub limit: bool,
    /// Where to write the completed matrix as CSV.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Selection procedure.
    #[arg(long, value_enum, default_value = "ims")]
    pub method: SelectMethod,
    /// Degrees-of-freedom computation for IMS.
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Criterion minimized by IMS and the BIC grid.
    #[arg(long, value_enum, default_value = "bic")]
    pub criterion: CriterionArg,
    /// Rademacher probes in Hutchinson mode.
    #[arg(long, default_value_t = 5)]
    pub probes: usize,
    /// Master seed for probes and folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Starting row strength for IMS.
    #[arg(long, default_value_t = 1.0)]
    pub init_gamma_r: f64,
    /// Starting column strength for IMS.
    #[arg(long, default_value_t = 1.0)]
    pub init_gamma_c: f64,
    /// Iterate cap for IMS.
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Stopping tolerance on the log-strength gradient.
    #[arg(long, default_value_t = 1e-5)]
    pub grad_tol: f64,
    /// Grid size as ROWSxCOLS, e.g. 50x50.
    #[arg(long, default_value = "50x50")]
    pub grid: String,
    /// Exponent range LO:HI of the grid; strengths are exp of these.
    #[arg(long, default_value = "-9:1", allow_hyphen_values = true)]
    pub range: String,
    /// Folds for cross-validation.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Where to write the JSON report (default: standard output).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to write the IMS iterate trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Where to write the matrix completed at the selected strengths.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Record wall-clock times, which makes the output vary between runs.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    /// Feature CSV, one row per vertex.
    #[arg(long)]
    pub features: PathBuf,
    /// The feature file starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Neighbours kept per vertex.
    #[arg(long, default_value_t = 5)]
    pub knn: usize,
    /// Where to write the graph (symmetric MatrixMarket).
    #[arg(long)]
    pub output: PathBuf,
}

/// Contents of a `simulate` spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    #[serde(default)]
    pub design: Option<CheckerboardSpec>,
    /// Method names such as `ims_exact`, `ims_hutchinson(5)`,
    /// `grid_bic(50)` or `grid_cv(10,5)`.
    pub methods: Vec<String>,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Seed for probes and folds.
    #[serde(default)]
    pub method_seed: u64,
    #[serde(default)]
    pub init_gamma: Option<[f64; 2]>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON spec file: design, methods, replicates, method_seed.
    #[arg(long)]
    pub spec: PathBuf,
    /// Where to write the per-replicate results CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Where to write the JSON summary of means and standard deviations.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Directory receiving one JSON record per replicate.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DfArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub gamma: GammaArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Exact trace or Hutchinson estimate.
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Rademacher probes in Hutchinson mode.
    #[arg(long, default_value_t = 5)]
    pub probes: usize,
    /// Seed of the probes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Grid size as ROWSxCOLS, e.g. 7x7.
    #[arg(long, default_value = "50x50")]
    pub grid: String,
    /// Exponent range LO:HI; strengths are exp of these.
    #[arg(long, default_value = "-9:1", allow_hyphen_values = true)]
    pub range: String,
    /// Criterion tabulated on the grid.
    #[arg(long, value_enum, default_value = "bic")]
    pub criterion: CriterionArg,
    /// Where to write the surface CSV (default: standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AssumptionViolated { .. } | Error::FoldInfeasible { .. } | Error::InfeasibleRealization { .. } => {
            EXIT_ASSUMPTION
        }
        e if e.is_solver_failure() => EXIT_SOLVER,
        Error::CapExceeded { .. } => EXIT_SOLVER,
        Error::Io { .. } | Error::Parse { .. } | Error::Serde(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn parse_grid(grid: &str, range: &str) -> Result<GridSpec> {
    let bad = |what: &str, v: &str| Error::InvalidArgument(format!("bad {what} '{v}'"));
    let (r, c) = grid.split_once(['x', 'X']).ok_or_else(|| bad("grid", grid))?;
    let n_row: usize = r.trim().parse().map_err(|_| bad("grid", grid))?;
    let n_col: usize = c.trim().parse().map_err(|_| bad("grid", grid))?;
    let (lo, hi) = range.split_once(':').ok_or_else(|| bad("range", range))?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad("range", range))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("range", range))?;
    if n_row < 2 || n_col < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("grid needs at least 2x2 points and LO < HI, got {grid} over {range}")));
    }
    Ok(GridSpec { n_row, n_col, lo, hi })
}

fn load_graph(graph: &Option<PathBuf>, features: &Option<PathBuf>, header: bool, knn: usize, size: usize) -> Result<WeightedGraph> {
    let g = match (graph, features) {
        (Some(path), _) => io::read_graph(path)?,
        (None, Some(path)) => weights_from_features(&io::read_matrix_csv(path, header)?, knn)?,
        (None, None) => WeightedGraph::empty(size),
    };
    if g.n_vertices() != size {
        return Err(Error::DimensionMismatch { expected: size, got: g.n_vertices() });
    }
    Ok(g)
}

fn load_problem(a: &ProblemArgs) -> Result<BmcProblem> {
    let data = io::read_observed_matrix(&a.data, a.format.into(), a.header)?;
    let rows = load_graph(&a.row_graph, &a.row_features, a.header, a.knn, data.n_rows())?;
    let cols = load_graph(&a.col_graph, &a.col_features, a.header, a.knn, data.n_cols())?;
    BmcProblem::new(data, rows, cols)
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => io::write_string(p, text),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn say(out: &mut dyn Write, text: String) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let prob = load_problem(&a.problem)?;
    let check = check_assumption(&prob);
    let (r, c) = (prob.row_partition().component_count(), prob.col_partition().component_count());
    match check.first_violation {
        None => {
            say(out, format!("holds: {r} row components x {c} column components, every patch observed"))?;
            Ok(EXIT_OK)
        }
        Some((rc, cc)) => {
            say(out, format!("violated: patch (row component {rc}, column component {cc}) has no observed entry"))?;
            Ok(EXIT_ASSUMPTION)
        }
    }
}

fn cmd_complete(a: &CompleteArgs, out: &mut dyn Write) -> Result<i32> {
    let prob = load_problem(&a.problem)?;
    let fit = if a.limit {
        limiting_solution(&prob)?
    } else {
        complete(&prob, PenaltyParams::new(a.gamma.gamma_r, a.gamma.gamma_c)?, &a.solver.config()?)?
    };
    io::write_matrix_csv(&a.output, &fit.estimate)?;
    if let Some(r) = fit.report {
        say(out, format!("solved with {} (relative residual {:.3e})", r.method, r.relative_residual))?;
    }
    Ok(EXIT_OK)
}

fn cmd_select(a: &SelectArgs, out: &mut dyn Write) -> Result<i32> {
    let prob = load_problem(&a.problem)?;
    let solver = a.solver.config()?;
    let criterion: Criterion = a.criterion.into();
    let start = std::time::Instant::now();
    let (gamma, solves, iterations, status, mode_name) = match a.method {
        SelectMethod::Ims => {
            let cfg = ImsConfig {
                max_iters: a.max_iters,
                grad_tol: a.grad_tol,
                probes: a.probes,
                seed: a.seed,
                criterion,
                ..ImsConfig::default()
            };
            let init = PenaltyParams::new(a.init_gamma_r, a.init_gamma_c)?;
            let (gamma, trace) = ims(&prob, init, a.mode.into(), &cfg, &solver)?;
            if let Some(path) = &a.trace {
                io::write_string(path, &io::format_trace_csv(&trace, a.timing)?)?;
            }
            let status = format!("{:?}", trace.status).to_ascii_lowercase();
            (gamma, trace.solves, trace.iterations(), Some(status), format!("{:?}", a.mode).to_ascii_lowercase())
        }
        SelectMethod::GridBic | SelectMethod::GridCv => {
            let grid = parse_grid(&a.grid, &a.range)?;
            let objective = match a.method {
                SelectMethod::GridBic => GridObjective::Exact(criterion),
                _ => GridObjective::CrossValidation { folds: a.folds, seed: a.seed },
            };
            let res = grid_search(&prob, objective, &grid, &solver)?;
            (res.gamma, res.solves, grid.n_row * grid.n_col, None, "exact".to_string())
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let eval = evaluate_objective(&prob, gamma, Mode::Exact, None, &solver)?;
    let report = SelectionReport {
        schema: REPORT_SCHEMA,
        method: format!("{:?}", a.method).to_ascii_lowercase(),
        mode: mode_name,
        criterion: format!("{:?}", a.criterion).to_ascii_lowercase(),
        seed: a.seed,
        gamma_r: gamma.gamma_r,
        gamma_c: gamma.gamma_c,
        bic: eval.bic,
        aic: eval.aic,
        df: eval.df,
        rss: eval.rss,
        n_observed: eval.n_observed,
        solves,
        iterations,
        status,
        wall_seconds: a.timing.then_some(wall),
    };
    if let Some(path) = &a.output {
        io::write_matrix_csv(path, &complete(&prob, gamma, &solver)?.estimate)?;
    }
    emit(out, a.report.as_ref(), &io::to_json(&report)?)?;
    Ok(EXIT_OK)
}

fn cmd_weights(a: &WeightsArgs, out: &mut dyn Write) -> Result<i32> {
    let g = weights_from_features(&io::read_matrix_csv(&a.features, a.header)?, a.knn)?;
    io::write_graph(&a.output, &g)?;
    say(out, format!("{} vertices, {} edges", g.n_vertices(), g.n_edges()))?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let file: SimulationFile = io::read_json(&a.spec)?;
    let spec = file.design.clone().unwrap_or_default();
    let methods = file.methods.iter().map(|m| m.parse::<MethodSpec>()).collect::<Result<Vec<_>>>()?;
    if methods.is_empty() || file.replicates == 0 {
        return Err(Error::InvalidArgument("need at least one method and one replicate".into()));
    }
    let mut solver = a.solver.config()?;
    if a.solver.solver == SolverArg::Auto {
        solver.method = ComparisonConfig::default().solver.method;
    }
    let init = match file.init_gamma {
        Some([r, c]) => PenaltyParams::new(r, c)?,
        None => ComparisonConfig::default().init,
    };
    let cfg = ComparisonConfig {
        methods,
        replicates: file.replicates,
        init,
        ims: ImsConfig { seed: file.method_seed, ..ImsConfig::default() },
        solver,
        ..ComparisonConfig::default()
    };
    let results = run_comparison(&spec, &cfg)?;
    io::write_string(&a.output, &io::format_results_csv(&results)?)?;
    if let Some(path) = &a.summary {
        let summary = SimulationSummary { schema: REPORT_SCHEMA, replicates: file.replicates, methods: summarize(&results) };
        io::write_json(path, &summary)?;
    }
    if let Some(dir) = &a.trace_dir {
        for r in &results {
            io::write_json(&dir.join(format!("replicate_{:04}.json", r.replicate)), r)?;
        }
    }
    for s in summarize(&results) {
        say(out, format!("{}: mean mse_missing {:.6} over {} replicates", s.method, s.mean_mse_missing, s.replicates))?;
    }
    Ok(EXIT_OK)
}

fn cmd_df(a: &DfArgs, out: &mut dyn Write) -> Result<i32> {
    let prob = load_problem(&a.problem)?;
    let gamma = PenaltyParams::new(a.gamma.gamma_r, a.gamma.gamma_c)?;
    let mode: Mode = a.mode.into();
    let probes = (mode == Mode::Hutchinson).then(|| ProbeSet::rademacher(a.probes, prob.n_rows() * prob.n_cols(), a.seed));
    let eval = evaluate_objective(&prob, gamma, mode, probes.as_ref(), &a.solver.config()?)?;
    say(out, format!("{}", eval.df))?;
    Ok(EXIT_OK)
}

fn cmd_surface(a: &SurfaceArgs, out: &mut dyn Write) -> Result<i32> {
    let prob = load_problem(&a.problem)?;
    let grid = parse_grid(&a.grid, &a.range)?;
    let res = grid_search(&prob, GridObjective::Exact(a.criterion.into()), &grid, &a.solver.config()?)?;
    emit(out, a.output.as_ref(), &io::format_surface_csv(&res)?)?;
    Ok(EXIT_OK)
}

/// Worker count from the flag, else from the environment value; `None`
/// leaves the choice to the thread pool.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return if n == 0 { Err(Error::InvalidArgument("--threads must be positive".into())) } else { Ok(Some(n)) };
    }
    match env {
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        None => Ok(None),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Complete(a) => cmd_complete(a, out),
        Command::Select(a) => cmd_select(a, out),
        Command::Weights(a) => cmd_weights(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Df(a) => cmd_df(a, out),
        Command::Surface(a) => cmd_surface(a, out),
    }
}

/// Runs the command line `args` (program name first), writing normal output
/// to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log_level).try_init();
    let result = resolve_threads(cli.threads, std::env::var(THREADS_ENV).ok().as_deref()).and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let mut buffer = Vec::new();
        let code = pool.install(|| dispatch(&cli, &mut buffer));
        out.write_all(&buffer).map_err(|e| Error::io("<stdout>", e))?;
        code
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs with the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
