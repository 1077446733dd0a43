mod common;

use std::fs;
use std::path::{Path, PathBuf};

use bmc::cli::{run_with, Cli};
use bmc::completion::BmcProblem;
use bmc::io::{self, MatrixFormat};
use bmc::selection::{degrees_of_freedom_exact, evaluate_objective, Mode};
use bmc::solver::SolverConfig;
use bmc::{Mask, Matrix, ObservedMatrix, PenaltyParams, WeightedGraph};
use clap::CommandFactory;
use common::*;
use rand::Rng;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with(std::iter::once("bmc").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
    rows: PathBuf,
    cols: PathBuf,
    problem: BmcProblem,
}

/// A 6x5 instance with connected graphs and a few hidden entries.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(42);
    let rg = random_connected_graph(6, 0.3, &mut r);
    let cg = random_connected_graph(5, 0.3, &mut r);
    let data = random_observed(6, 5, 0.25, &mut r);
    let paths = (dir.path().join("x.csv"), dir.path().join("rows.mtx"), dir.path().join("cols.mtx"));
    io::write_observed_matrix(&paths.0, &data, MatrixFormat::CsvNan).unwrap();
    io::write_graph(&paths.1, &rg).unwrap();
    io::write_graph(&paths.2, &cg).unwrap();
    let problem = BmcProblem::new(data, rg, cg).unwrap();
    Fixture { dir, data: paths.0, rows: paths.1, cols: paths.2, problem }
}

impl Fixture {
    fn problem_args(&self) -> Vec<String> {
        vec!["--data".into(), p(&self.data).into(), "--row-graph".into(), p(&self.rows).into(), "--col-graph".into(), p(&self.cols).into()]
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn with(base: &[&str], extra: &[String]) -> Vec<String> {
    base.iter().map(|s| s.to_string()).chain(extra.iter().cloned()).collect()
}

fn run_owned(args: &[String]) -> (i32, String, String) {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

#[test]
fn two_by_two_csv_marks_nan_missing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    fs::write(&path, "1,NaN\n3,4").unwrap();
    let d = io::read_observed_matrix(&path, MatrixFormat::CsvNan, false).unwrap();
    let observed: Vec<(usize, usize)> = d.mask().observed_indices().iter().map(|&k| (k % 2, k / 2)).collect();
    assert_eq!(observed, vec![(0, 0), (1, 0), (1, 1)]);
}

#[test]
fn empty_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    fs::write(&path, "").unwrap();
    assert!(io::read_observed_matrix(&path, MatrixFormat::CsvNan, false).is_err());
    assert!(io::read_observed_matrix(&path, MatrixFormat::MmCoord, false).is_err());
}

#[test]
fn masked_matrix_round_trips_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(3);
    for trial in 0..5 {
        let x = Matrix::from_fn(10, 8, |_, _| r.random_range(-1e3..1e3) * 10f64.powi(r.random_range(-8..8)));
        let flags: Vec<bool> = (0..80).map(|_| r.random::<f64>() < 0.7).collect();
        let mask = Mask::from_flags(10, 8, flags).unwrap();
        let mut clean = x.clone();
        for k in mask.missing_indices() {
            clean.as_mut_slice()[k] = 0.0;
        }
        let data = ObservedMatrix::new(clean, mask).unwrap();
        for format in [MatrixFormat::CsvNan, MatrixFormat::MmCoord] {
            let path = dir.path().join(format!("m{trial}.{format:?}"));
            io::write_observed_matrix(&path, &data, format).unwrap();
            assert_eq!(io::read_observed_matrix(&path, format, false).unwrap(), data);
        }
    }
}

#[test]
fn feature_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    fs::write(&path, "a,b,c\n1,2,3\n4,5,7\n").unwrap();
    let m = io::read_matrix_csv(&path, true).unwrap();
    assert_eq!(m.rows(), vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 7.0]]);
    fs::write(&path, "1,2,3\n4,,7\n").unwrap();
    assert!(io::read_matrix_csv(&path, false).is_err());
}

#[test]
fn every_flag_is_documented_in_help() {
    let mut root = Cli::command();
    root.build();
    let mut checked = 0;
    for sub in root.get_subcommands() {
        let mut sub = sub.clone();
        let help = sub.render_long_help().to_string();
        for arg in sub.get_arguments() {
            if arg.get_id() == "help" || arg.get_id() == "version" {
                continue;
            }
            let doc = arg.get_help().or(arg.get_long_help()).map(|h| h.to_string()).unwrap_or_default();
            assert!(!doc.trim().is_empty(), "{} --{} has no help", sub.get_name(), arg.get_id());
            let long = arg.get_long().expect("every option is a long flag");
            let line = help.lines().find(|l| l.contains(&format!("--{long}"))).unwrap_or_else(|| panic!("--{long} missing from help"));
            let first_words: String = doc.split_whitespace().take(2).collect::<Vec<_>>().join(" ");
            assert!(help.contains(&first_words), "help for --{long} not rendered: {line}");
            checked += 1;
        }
    }
    assert!(checked > 40);
}

#[test]
fn check_reports_holds_and_violation() {
    let f = fixture();
    let full = f.path("full.csv");
    io::write_observed_matrix(&full, &ObservedMatrix::fully_observed(Matrix::zeros(6, 5)).unwrap(), MatrixFormat::CsvNan).unwrap();
    let (code, out, _) = run_owned(&with(&["check", "--data", p(&full)], &[]));
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("holds"));

    let holed = f.path("holed.csv");
    fs::write(&holed, "1,2\nNaN,NaN\n").unwrap();
    let (code, out, _) = run(&["check", "--data", p(&holed)]);
    assert_eq!(code, 2);
    assert!(out.contains("row component 1, column component 0"), "{out}");
}

#[test]
fn complete_writes_matrix_equal_to_library() {
    let f = fixture();
    let out_path = f.path("z.csv");
    let args = with(&["complete", "--gamma-r", "0.5", "--gamma-c", "2", "--output", p(&out_path)], &f.problem_args());
    let (code, _, err) = run_owned(&args);
    assert_eq!(code, 0, "{err}");
    let got = io::read_matrix_csv(&out_path, false).unwrap();
    let want = bmc::completion::complete(&f.problem, PenaltyParams::new(0.5, 2.0).unwrap(), &SolverConfig::default()).unwrap();
    assert_eq!(got, want.estimate);

    let (code, _, _) = run_owned(&with(&["complete", "--limit", "--output", p(&out_path)], &f.problem_args()));
    assert_eq!(code, 0);
    assert_eq!(io::read_matrix_csv(&out_path, false).unwrap(), bmc::completion::limiting_solution(&f.problem).unwrap().estimate);
}

#[test]
fn hutchinson_selection_is_byte_identical_across_runs() {
    let f = fixture();
    let mut reports = Vec::new();
    for k in 0..2 {
        let report = f.path(&format!("r{k}.json"));
        let trace = f.path(&format!("t{k}.csv"));
        let args = with(
            &["select", "--method", "ims", "--mode", "hutchinson", "--probes", "5", "--seed", "7", "--report", p(&report), "--trace", p(&trace)],
            &f.problem_args(),
        );
        let (code, _, err) = run_owned(&args);
        assert_eq!(code, 0, "{err}");
        reports.push((fs::read(&report).unwrap(), fs::read(&trace).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let parsed: serde_json::Value = serde_json::from_slice(&reports[0].0).unwrap();
    assert_eq!(parsed["schema"], 1);
    assert_eq!(parsed["mode"], "hutchinson");
    assert!(parsed.get("wall_seconds").is_none());
}

#[test]
fn grid_selections_run() {
    let f = fixture();
    for method in ["grid-bic", "grid-cv"] {
        let args = with(&["select", "--method", method, "--grid", "4x4", "--folds", "2"], &f.problem_args());
        let (code, out, err) = run_owned(&args);
        assert_eq!(code, 0, "{err}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["iterations"], 16);
    }
}

#[test]
fn surface_cells_match_library_objective() {
    let f = fixture();
    let args = with(&["surface", "--grid", "7x7", "--range", "-9:1"], &f.problem_args());
    let (code, out, err) = run_owned(&args);
    assert_eq!(code, 0, "{err}");
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let mut cells = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let gr: f64 = rec[2].parse().unwrap();
        let gc: f64 = rec[3].parse().unwrap();
        let value: f64 = rec[4].parse().unwrap();
        let eval = evaluate_objective(&f.problem, PenaltyParams::new(gr, gc).unwrap(), Mode::Exact, None, &SolverConfig::default()).unwrap();
        assert_eq!(value, eval.bic);
        cells += 1;
    }
    assert_eq!(cells, 49);
}

#[test]
fn df_matches_dense_trace() {
    let f = fixture();
    let (code, out, err) = run_owned(&with(&["df", "--gamma-r", "0.3", "--gamma-c", "3"], &f.problem_args()));
    assert_eq!(code, 0, "{err}");
    let got: f64 = out.trim().parse().unwrap();
    let want = degrees_of_freedom_exact(&f.problem.operator(PenaltyParams::new(0.3, 3.0).unwrap()).unwrap()).unwrap();
    assert!((got - want).abs() < 1e-9 * want);
    let (code, out, _) = run_owned(&with(&["df", "--mode", "hutchinson", "--probes", "50", "--seed", "1"], &f.problem_args()));
    assert_eq!(code, 0);
    assert!(out.trim().parse::<f64>().unwrap() > 0.0);
}

#[test]
fn weights_writes_knn_graph() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("feat.csv");
    let graph = dir.path().join("g.mtx");
    let mut r = rng(5);
    let m = Matrix::from_fn(12, 4, |_, _| r.random_range(-1.0..1.0));
    io::write_matrix_csv(&feats, &m).unwrap();
    let (code, _, err) = run(&["weights", "--features", p(&feats), "--knn", "3", "--output", p(&graph)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(io::read_graph(&graph).unwrap(), bmc::graph::weights_from_features(&m, 3).unwrap());
}

#[test]
fn features_build_graphs_inline() {
    let f = fixture();
    let feats = f.path("rf.csv");
    let mut r = rng(6);
    io::write_matrix_csv(&feats, &Matrix::from_fn(6, 3, |_, _| r.random_range(-1.0..1.0))).unwrap();
    let (code, _, err) = run(&["check", "--data", p(&f.data), "--row-features", p(&feats), "--knn", "2"]);
    assert!(code == 0 || code == 2, "{err}");
    let (code, _, _) = run(&["check", "--data", p(&f.data), "--row-features", p(&feats), "--row-graph", p(&f.rows)]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_writes_one_row_per_method_and_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"design": {"row_blocks": [4, 4], "col_blocks": [3, 3], "means": [[10, -25], [25, -10]], "sigma": 1.0, "missing": 0.2, "seed": 3},
            "methods": ["ims_exact", "ims_hutchinson(3)", "grid_bic(3)"], "replicates": 2}"#,
    )
    .unwrap();
    let results = dir.path().join("res.csv");
    let summary = dir.path().join("sum.json");
    let traces = dir.path().join("traces");
    let (code, _, err) = run(&["simulate", "--spec", p(&spec), "--output", p(&results), "--summary", p(&summary), "--trace-dir", p(&traces)]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s["methods"].as_array().unwrap().len(), 3);
    assert_eq!(fs::read_dir(&traces).unwrap().count(), 2);
}

#[test]
fn exit_codes_follow_error_classes() {
    let f = fixture();
    assert_eq!(run(&["select", "--bogus"]).0, 1);
    assert_eq!(run(&["check", "--data", "/nonexistent/x.csv"]).0, 4);
    let bad = f.path("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let (code, _, err) = run(&["check", "--data", p(&bad)]);
    assert_eq!(code, 4);
    assert!(err.contains(":2:"), "{err}");

    let holed = f.path("holed.csv");
    fs::write(&holed, "1,2\nNaN,NaN\n").unwrap();
    let out = f.path("o.csv");
    assert_eq!(run(&["complete", "--data", p(&holed), "--output", p(&out)]).0, 2);

    let args = with(&["complete", "--solver", "pcg", "--cg-max-iters", "1", "--cg-tol", "1e-15", "--gamma-r", "100", "--output", p(&out)], &f.problem_args());
    assert_eq!(run_owned(&args).0, 3);
    assert_eq!(run_owned(&with(&["df", "--threads", "0"], &f.problem_args())).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn mismatched_graph_size_is_rejected() {
    let f = fixture();
    let g = f.path("small.mtx");
    io::write_graph(&g, &WeightedGraph::empty(3)).unwrap();
    assert_eq!(run(&["check", "--data", p(&f.data), "--row-graph", p(&g)]).0, 1);
}
