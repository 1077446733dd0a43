//! Hide half of a noiseless two-by-two checkerboard and fill it back in.
//!
//! Rows and columns are linked only inside their own block, so every
//! bicluster is a graph component and the completion is exact for any
//! positive penalty.

use bmc::completion::{check_assumption, complete, limiting_solution, BmcProblem};
use bmc::simulate::{feasible_realization, CheckerboardSpec};
use bmc::solver::SolverConfig;
use bmc::{PenaltyParams, WeightedGraph};

fn block_graph(sizes: &[usize]) -> WeightedGraph {
    let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    WeightedGraph::from_fn(labels.len(), |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 }).unwrap()
}

fn main() -> bmc::Result<()> {
    let spec = CheckerboardSpec {
        row_blocks: vec![10, 10],
        col_blocks: vec![10, 10],
        sigma: 0.0,
        missing: 0.5,
        seed: 1,
        ..CheckerboardSpec::default()
    };
    let (truth, sim, _) = feasible_realization(&spec, 0)?;
    let prob = BmcProblem::new(sim.data().clone(), block_graph(&spec.row_blocks), block_graph(&spec.col_blocks))?;
    let check = check_assumption(&prob);
    println!("{} of {} entries observed, every patch covered: {}", prob.mask().observed_count(), prob.mask().len(), check.holds);

    for gamma in [1e-3, 1.0, 1e3] {
        let z = complete(&prob, PenaltyParams::uniform(gamma)?, &SolverConfig::default())?;
        let rel = z.estimate.distance(&truth) / truth.frobenius_norm();
        println!("gamma = {gamma:>7}: relative error {rel:.2e}");
    }

    let star = limiting_solution(&prob)?;
    println!("patch-mean limit matches truth: {}", star.estimate.max_abs_diff(&truth) < 1e-12);
    Ok(())
}
